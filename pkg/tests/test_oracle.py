import math
from pathlib import Path

import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from src.levels import LevelVector, levels_from_tau_prime
from src.oracle import (
    TRUE,
    OracleBudgetError,
    WindowEvents,
    above,
    below,
    conjunction,
    disjunction,
    enumeration_cost,
    evaluate_event_file,
    exact_prob,
    exact_rates,
    exact_window_prob,
    parse_event,
    random_window_event,
    simulate_prob,
    thresholds,
)
from src.point_process import upcrossing_matrix
from src.process import builtin_process, draw_innovations, moving_maxima

EVENTS = Path(__file__).resolve().parent.parent / "configs" / "events"


def _events(name="ex61", n=5, u=(0.7, 0.8)) -> WindowEvents:
    return WindowEvents(builtin_process(name), LevelVector(n=n, u=u))


def test_single_atoms():
    assert exact_prob(above(1, 0.3)) == pytest.approx(0.7)
    assert exact_prob(below(1, 0.3)) == pytest.approx(0.3)
    assert exact_prob(TRUE) == 1.0


def test_thresholds_are_sorted_per_index():
    expr = above(2, 0.6) & above(1, 0.9) & below(1, 0.3)
    assert thresholds(expr) == {1: [0.3, 0.9], 2: [0.6]}
    assert enumeration_cost(expr) == (2, 6)


def test_threshold_outside_unit_interval():
    with pytest.raises(ValueError, match="c"):
        above(1, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_complement_and_inclusion_exclusion(seed):
    events = _events()
    rng = np.random.default_rng(seed)
    first = random_window_event(events, rng, terms=2)
    second = random_window_event(events, rng, terms=2)
    p, q = exact_prob(first), exact_prob(second)
    assert exact_prob(~first) == pytest.approx(1 - p, abs=1e-12)
    assert exact_prob(first | second) == pytest.approx(p + q - exact_prob(first & second), abs=1e-12)
    assert 0.0 <= p <= 1.0


def test_upcrossing_counts_sum_to_one():
    events = _events()
    total = sum(exact_prob(events.upcrossing_count(k)) for k in range(events.n + 1))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_second_margin_upcrossing_by_hand():
    events = _events()
    assert exact_prob(events.upcrossing(1, 1)) == pytest.approx(0.8 * 0.2)


def test_ex61_first_margin_upcrossing_at_point_nine():
    events = _events(u=(0.9, 0.9))
    assert exact_prob(events.upcrossing(1, 0)) == pytest.approx(0.9 ** 3 * (1 - 0.9 ** 2), abs=1e-12)
    assert exact_prob(events.upcrossing(1, 0)) == pytest.approx(0.138510, abs=1e-6)


@pytest.mark.parametrize("d", [1, 2])
def test_no_upcrossing_in_two_step_iid_window(d):
    spec = builtin_process("iid", d=d)
    levels = LevelVector(n=2, u=(0.9,) * d)
    # A_1 needs Y_2 above u and A_2 needs it below, so the two never meet
    expected = 1 - 2 * 0.9 * 0.1
    assert exact_window_prob(spec, levels, lambda events: events.no_upcrossing()) == pytest.approx(expected)
    assert exact_window_prob(spec, levels, {"no_upcrossing": {}}) == pytest.approx(expected)


@pytest.mark.parametrize("name", ["iid", "ex61", "ex62"])
def test_true_predicate_has_probability_one(name):
    spec = builtin_process(name)
    levels = levels_from_tau_prime((1.0,) * spec.d, 4)
    assert exact_window_prob(spec, levels, True) == 1.0
    assert exact_window_prob(spec, levels, {"always": {}}) == 1.0


@settings(max_examples=60, deadline=None)
@given(
    name=st.sampled_from(["iid", "ex61", "ex62"]),
    low=st.tuples(st.floats(0.05, 0.9), st.floats(0.05, 0.9)),
    raise_by=st.tuples(st.floats(0.0, 0.09), st.floats(0.0, 0.09)),
    atoms=st.lists(st.tuples(st.integers(1, 4), st.integers(0, 1)), min_size=1, max_size=4),
    join=st.sampled_from([conjunction, disjunction]),
)
def test_raising_levels_lowers_exceedance_probability(name, low, raise_by, atoms, join):
    spec = builtin_process(name, d=2) if name == "iid" else builtin_process(name)
    high = tuple(u + r for u, r in zip(low, raise_by))

    def event(u):
        events = WindowEvents(spec, LevelVector(n=5, u=u))
        return join([events.exceedance(i, j) for i, j in atoms])

    assert exact_prob(event(high)) <= exact_prob(event(low)) + 1e-12
    assert exact_prob(~event(high)) >= exact_prob(~event(low)) - 1e-12


def test_budget_is_enforced():
    expr = conjunction([above(t, 0.5) for t in range(30)])
    with pytest.raises(OracleBudgetError) as info:
        exact_prob(expr)
    assert info.value.indices == 30
    smaller = conjunction([above(t, 0.5) for t in range(20)])
    assert exact_prob(smaller) == pytest.approx(0.5 ** 20)
    with pytest.raises(OracleBudgetError):
        exact_prob(smaller, max_cells=1 << 10)


def test_complement_event_file():
    data = yaml.safe_load((EVENTS / "complement.yaml").read_text())
    result = evaluate_event_file(data)
    assert result["kind"] == "event"
    assert result["probability"] == pytest.approx(0.36)
    assert result["innovations"] == 2


@pytest.mark.parametrize("name", ["ex61-no-upcrossing.yaml", "ex62-two-upcrossings.yaml"])
def test_window_event_files(name):
    result = evaluate_event_file(yaml.safe_load((EVENTS / name).read_text()))
    assert result["kind"] == "window"
    assert result["n"] == 6
    assert 0.0 < result["probability"] < 1.0


def test_event_file_errors():
    with pytest.raises(ValueError, match="event"):
        parse_event({"greater": {"t": 1, "c": 0.5}})
    with pytest.raises(ValueError, match="margin"):
        evaluate_event_file({"process": "ex61", "n": 4, "u": [0.5, 0.5], "predicate": {"no_upcrossing": {"margin": 3}}})
    with pytest.raises(ValueError, match="predicate"):
        evaluate_event_file({"process": "iid", "n": 4, "u": [0.5], "predicate": {"sometimes": {}}})


def test_exact_rates_iid():
    rates = exact_rates(builtin_process("iid"), levels_from_tau_prime((1.0,), 100))
    assert rates["nu_1"] == pytest.approx(0.99)
    assert rates["tau_1"] == pytest.approx(1.0)
    assert rates["nu_union"] == pytest.approx(0.99)


def test_exact_rates_approach_limits():
    rates = exact_rates(builtin_process("ex61"), levels_from_tau_prime((1.0, 1.0), 10_000))
    assert rates["nu_1"] == pytest.approx(2.0, rel=1e-3)
    assert rates["tau_1"] == pytest.approx(3.0, rel=1e-3)
    assert rates["nu_union"] == pytest.approx(3.0, rel=1e-3)
    assert rates["tau_union"] == pytest.approx(4.0, rel=1e-3)


def test_generator_matches_oracle_on_empty_windows():
    spec = builtin_process("ex61")
    n = 6
    levels = levels_from_tau_prime((1.0, 1.0), n)
    exact = exact_window_prob(spec, levels, lambda events: events.no_upcrossing())
    draws = 200_000
    values = moving_maxima(spec, draw_innovations(spec, n, np.random.default_rng(17), size=draws), n)
    empty = ~upcrossing_matrix(values, levels.u).any(axis=(1, 2))
    se = math.sqrt(exact * (1 - exact) / draws)
    assert abs(empty.mean() - exact) <= 4 * se


@pytest.mark.slow
@pytest.mark.parametrize("name, u", [("iid", (0.7,)), ("ex61", (0.7, 0.8)), ("ex62", (0.7, 0.8))])
def test_simulation_agrees_with_enumeration(name, u):
    events = _events(name, n=8, u=u)
    rng = np.random.default_rng(123)
    for _ in range(20):
        expr = random_window_event(events, rng)
        exact = exact_prob(expr)
        simulated, _ = simulate_prob(expr, 1_000_000, rng)
        se = math.sqrt(exact * (1 - exact) / 1_000_000)
        assert abs(simulated - exact) <= 4 * se + 1e-12
