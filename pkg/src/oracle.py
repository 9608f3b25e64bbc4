"""Exact probabilities of threshold events over independent Uniform(0,1) innovations.

Each innovation's range [0, 1] is cut at the thresholds that reference it;
an event is a function of which interval every innovation falls in, so its
probability is the sum of interval-length products over satisfying cells.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np
from loguru import logger

from .levels import LevelVector, levels_from_tau_prime
from .process import ProcessSpec, builtin_process, make_process

MAX_INDICES = 24
MAX_CELLS = 1 << 22


class OracleBudgetError(ValueError):
    def __init__(self, cells: int, indices: int, max_cells: int, max_indices: int):
        self.cells = cells
        self.indices = indices
        super().__init__(
            f"event references {indices} innovations over {cells} cells; "
            f"budget is {max_indices} innovations and {max_cells} cells"
        )


class EventExpr:
    """Boolean expression over atoms {Y_t > c}."""

    def __and__(self, other):
        return conjunction((self, other))

    def __or__(self, other):
        return disjunction((self, other))

    def __invert__(self):
        return negation(self)


@dataclass(frozen=True, eq=False)
class Above(EventExpr):
    t: int
    c: float

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise ValueError(f"c: threshold must lie in (0, 1), got {self.c}")


@dataclass(frozen=True, eq=False)
class And(EventExpr):
    children: tuple


@dataclass(frozen=True, eq=False)
class Or(EventExpr):
    children: tuple


@dataclass(frozen=True, eq=False)
class Not(EventExpr):
    child: EventExpr


@dataclass(frozen=True, eq=False)
class Always(EventExpr):
    value: bool


TRUE = Always(True)
FALSE = Always(False)


def above(t: int, c: float) -> EventExpr:
    return Above(int(t), float(c))


def below(t: int, c: float) -> EventExpr:
    return Not(Above(int(t), float(c)))


def conjunction(children) -> EventExpr:
    kept = []
    for child in children:
        if child is FALSE:
            return FALSE
        if child is not TRUE:
            kept.append(child)
    if not kept:
        return TRUE
    return kept[0] if len(kept) == 1 else And(tuple(kept))


def disjunction(children) -> EventExpr:
    kept = []
    for child in children:
        if child is TRUE:
            return TRUE
        if child is not FALSE:
            kept.append(child)
    if not kept:
        return FALSE
    return kept[0] if len(kept) == 1 else Or(tuple(kept))


def negation(child: EventExpr) -> EventExpr:
    if child is TRUE:
        return FALSE
    if child is FALSE:
        return TRUE
    return Not(child)


def _nodes(expr: EventExpr):
    seen = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        yield node
        if isinstance(node, (And, Or)):
            stack.extend(node.children)
        elif isinstance(node, Not):
            stack.append(node.child)


def thresholds(expr: EventExpr) -> dict[int, list[float]]:
    cuts = {}
    for node in _nodes(expr):
        if isinstance(node, Above):
            cuts.setdefault(node.t, set()).add(node.c)
    return {t: sorted(cs) for t, cs in sorted(cuts.items())}


def _evaluate(expr: EventExpr, leaf):
    cache = {}

    def visit(node):
        key = id(node)
        if key in cache:
            return cache[key]
        if isinstance(node, Above):
            result = leaf(node)
        elif isinstance(node, Always):
            result = np.bool_(node.value)
        elif isinstance(node, Not):
            result = np.logical_not(visit(node.child))
        elif isinstance(node, And):
            result = functools.reduce(np.logical_and, (visit(c) for c in node.children))
        elif isinstance(node, Or):
            result = functools.reduce(np.logical_or, (visit(c) for c in node.children))
        else:
            raise TypeError(f"unsupported event node {type(node).__name__}")
        cache[key] = result
        return result

    return visit(expr)


def enumeration_cost(expr: EventExpr) -> tuple[int, int]:
    """(distinct innovation indices, cells to enumerate)."""
    cuts = thresholds(expr)
    return len(cuts), math.prod(len(cs) + 1 for cs in cuts.values())


def exact_prob(expr: EventExpr, max_indices: int = MAX_INDICES, max_cells: int = MAX_CELLS) -> float:
    cuts = thresholds(expr)
    indices, cells = len(cuts), math.prod(len(cs) + 1 for cs in cuts.values())
    if indices > max_indices or cells > max_cells:
        raise OracleBudgetError(cells, indices, max_cells, max_indices)
    if indices == 0:
        return float(bool(_evaluate(expr, None)))

    axes = {t: axis for axis, t in enumerate(cuts)}
    shape = tuple(len(cs) + 1 for cs in cuts.values())

    def leaf(atom: Above):
        axis = axes[atom.t]
        position = cuts[atom.t].index(atom.c)
        grid = [1] * indices
        grid[axis] = shape[axis]
        # interval m covers (c_m, c_{m+1}] with c_0 = 0, so Y > c_p iff m > p
        return np.arange(shape[axis]).reshape(grid) > position

    mask = np.broadcast_to(_evaluate(expr, leaf), shape)
    lengths = [np.diff([0.0, *cs, 1.0]) for cs in cuts.values()]
    weights = functools.reduce(np.multiply.outer, lengths)
    return float(np.sum(weights[mask]))


def simulate_prob(expr: EventExpr, draws: int, rng: np.random.Generator, chunk: int = 200_000):
    """Monte Carlo frequency of `expr` and its binomial standard error."""
    cuts = thresholds(expr)
    columns = {t: k for k, t in enumerate(cuts)}
    hits = 0
    remaining = draws
    while remaining > 0:
        size = min(chunk, remaining)
        innovations = rng.random((size, max(len(columns), 1)))
        result = _evaluate(expr, lambda atom: innovations[:, columns[atom.t]] > atom.c)
        hits += int(np.broadcast_to(result, (size,)).sum())
        remaining -= size
    p = hits / draws
    return p, math.sqrt(p * (1 - p) / draws)


def upcrossing_event(spec: ProcessSpec, j: int, i: int, u: float) -> EventExpr:
    """{X_{i,j} <= u < X_{i+1,j}} over innovation atoms; shared innovations appear once."""
    current = [i + lag for lag in spec.lags[j]]
    following = [i + 1 + lag for lag in spec.lags[j] if i + 1 + lag not in current]
    return conjunction([below(t, u) for t in current] + [disjunction([above(t, u) for t in following])])


def exceedance_event(spec: ProcessSpec, j: int, i: int, u: float) -> EventExpr:
    return disjunction([above(i + lag, u) for lag in spec.lags[j]])


def exactly(events, k: int) -> EventExpr:
    """Exactly k of `events` occur."""
    if k < 0:
        return FALSE
    states = [TRUE] + [FALSE] * k
    for event in events:
        missed = negation(event)
        states = [conjunction((states[0], missed))] + [
            disjunction((conjunction((states[c], missed)), conjunction((states[c - 1], event))))
            for c in range(1, k + 1)
        ]
    return states[k]


class WindowEvents:
    """Upcrossing and exceedance events of one window, compiled to innovation atoms."""

    def __init__(self, spec: ProcessSpec, levels: LevelVector):
        if levels.d != spec.d:
            raise ValueError(f"levels.u: expected {spec.d} levels, got {levels.d}")
        self.spec = spec
        self.levels = levels
        self.n = levels.n
        self._upcrossings = {}

    def _margins(self, margin):
        return range(self.spec.d) if margin is None else [margin]

    def upcrossing(self, i: int, j: int) -> EventExpr:
        if (i, j) not in self._upcrossings:
            self._upcrossings[(i, j)] = upcrossing_event(self.spec, j, i, self.levels.u[j])
        return self._upcrossings[(i, j)]

    def exceedance(self, i: int, j: int) -> EventExpr:
        return exceedance_event(self.spec, j, i, self.levels.u[j])

    def union(self, i: int, margin=None) -> EventExpr:
        return disjunction([self.upcrossing(i, j) for j in self._margins(margin)])

    def no_upcrossing(self, margin=None) -> EventExpr:
        return conjunction([negation(self.union(i, margin)) for i in range(1, self.n + 1)])

    def max_below(self, margin=None) -> EventExpr:
        return conjunction(
            [negation(self.exceedance(i, j)) for i in range(1, self.n + 1) for j in self._margins(margin)]
        )

    def upcrossing_count(self, k: int, margin=None) -> EventExpr:
        """Exactly k upcrossings in the window, counted per margin (or over the union)."""
        if margin is None:
            events = [self.union(i) for i in range(1, self.n + 1)]
        else:
            events = [self.upcrossing(i, margin) for i in range(1, self.n + 1)]
        return exactly(events, k)


def exact_window_prob(spec: ProcessSpec, levels: LevelVector, predicate, **budget) -> float:
    """Exact probability of a window predicate.

    `predicate` is either a callable mapping WindowEvents to an EventExpr or an
    event-file predicate node (see `compile_predicate`).
    """
    events = WindowEvents(spec, levels)
    expr = predicate(events) if callable(predicate) else compile_predicate(predicate, events)
    return exact_prob(expr, **budget)


def exact_rates(spec: ProcessSpec, levels: LevelVector) -> dict[str, float]:
    """n times the exact single-index probabilities at the run's own n."""
    events = WindowEvents(spec, levels)
    n = levels.n
    rates = {}
    for j in range(spec.d):
        rates[f"nu_{j + 1}"] = n * exact_prob(events.upcrossing(1, j))
        rates[f"tau_{j + 1}"] = n * exact_prob(events.exceedance(1, j))
    rates["nu_union"] = n * exact_prob(events.union(1))
    rates["tau_union"] = n * exact_prob(disjunction([events.exceedance(1, j) for j in range(spec.d)]))
    return rates


def random_window_event(events: WindowEvents, rng: np.random.Generator, terms: int = 3) -> EventExpr:
    """A random boolean combination of window upcrossing/exceedance events."""
    expr = None
    for _ in range(terms):
        i = int(rng.integers(1, events.n + 1))
        j = int(rng.integers(0, events.spec.d))
        term = events.upcrossing(i, j) if rng.random() < 0.5 else events.exceedance(i, j)
        if rng.random() < 0.3:
            term = negation(term)
        if expr is None:
            expr = term
        elif rng.random() < 0.5:
            expr = conjunction((expr, term))
        else:
            expr = disjunction((expr, term))
    return expr


# event files


def parse_event(node) -> EventExpr:
    """Event tree from a mapping: above/below atoms with t and c, and/or lists, not."""
    if not isinstance(node, dict) or len(node) != 1:
        raise ValueError(f"event: each node must be a single-key mapping, got {node!r}")
    (key, value), = node.items()
    if key == "above":
        return above(value["t"], value["c"])
    if key == "below":
        return below(value["t"], value["c"])
    if key == "and":
        return conjunction([parse_event(child) for child in value])
    if key == "or":
        return disjunction([parse_event(child) for child in value])
    if key == "not":
        return negation(parse_event(value))
    raise ValueError(f"event: unknown node '{key}'")


def _margin(value, d: int):
    """1-based margin in files; None means the union."""
    if value is None:
        return None
    if not 1 <= int(value) <= d:
        raise ValueError(f"margin: must lie in [1, {d}], got {value}")
    return int(value) - 1


def compile_predicate(node, events: WindowEvents) -> EventExpr:
    if node is True:
        return TRUE
    if not isinstance(node, dict) or len(node) != 1:
        raise ValueError(f"predicate: each node must be a single-key mapping, got {node!r}")
    (key, value), = node.items()
    options = value if isinstance(value, dict) else {}
    d = events.spec.d
    if key == "always":
        return TRUE
    if key == "no_upcrossing":
        return events.no_upcrossing(_margin(options.get("margin"), d))
    if key == "max_below":
        return events.max_below(_margin(options.get("margin"), d))
    if key == "upcrossing_count":
        return events.upcrossing_count(int(options["equals"]), _margin(options.get("margin"), d))
    if key == "upcrossing":
        return events.union(int(options["index"]), _margin(options.get("margin"), d))
    if key == "and":
        return conjunction([compile_predicate(child, events) for child in value])
    if key == "or":
        return disjunction([compile_predicate(child, events) for child in value])
    if key == "not":
        return negation(compile_predicate(value, events))
    raise ValueError(f"predicate: unknown node '{key}'")


def evaluate_event_file(data: dict) -> dict:
    """Evaluate an event-file mapping (see configs/events) and describe the result."""
    if "event" in data:
        expr = parse_event(data["event"])
        indices, cells = enumeration_cost(expr)
        probability = exact_prob(expr)
        return {"kind": "event", "probability": probability, "innovations": indices, "cells": cells}

    if "lags" in data:
        spec = make_process(data["lags"], name=data.get("name", "custom"))
    else:
        spec = builtin_process(data.get("process", "iid"), d=int(data.get("d", 1)))
    n = int(data["n"])
    if "u" in data:
        levels = LevelVector(n=n, u=tuple(float(x) for x in data["u"]))
    else:
        levels = levels_from_tau_prime(data["tau_prime"], n)
    predicate = data.get("predicate", True)
    indices, cells = enumeration_cost(compile_predicate(predicate, WindowEvents(spec, levels)))
    logger.info(f"Enumerating {cells} cells over {indices} innovations")
    return {
        "kind": "window",
        "process": spec.to_dict(),
        "n": n,
        "u": list(levels.u),
        "probability": exact_window_prob(spec, levels, predicate),
        "innovations": indices,
        "cells": cells,
    }
