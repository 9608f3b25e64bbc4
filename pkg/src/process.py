"""Moving-maximum processes driven by i.i.d. Uniform(0,1) innovations."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from loguru import logger


BUILTIN_PROCESSES = ("iid", "ex61", "ex62")


@dataclass(frozen=True)
class ProcessSpec:
    """A d-margin moving maximum: margin j at time i is max{Y_{i+l} : l in lags[j]}."""

    lags: tuple
    name: str = "custom"

    def __post_init__(self):
        if len(self.lags) == 0:
            raise ValueError("lags: at least one margin is required")
        for j, lag_set in enumerate(self.lags):
            if len(lag_set) == 0:
                raise ValueError(f"lags[{j}]: lag set must be non-empty")

    @property
    def d(self) -> int:
        return len(self.lags)

    @property
    def min_lag(self) -> int:
        return min(min(lag_set) for lag_set in self.lags)

    @property
    def max_lag(self) -> int:
        return max(max(lag_set) for lag_set in self.lags)

    def innovation_range(self, n: int) -> tuple[int, int]:
        """First and last innovation index needed by rows 1..n+1."""
        return 1 + self.min_lag, n + 1 + self.max_lag

    def to_dict(self):
        return {"name": self.name, "lags": [list(lag_set) for lag_set in self.lags]}

    @property
    def builtin_kind(self) -> Optional[str]:
        """Which built-in family the lag sets describe, whatever the spec is named."""
        if all(lag_set == (0,) for lag_set in self.lags):
            return "iid"
        for name in ("ex61", "ex62"):
            if self.lags == builtin_process(name).lags:
                return name
        return None


@dataclass(frozen=True)
class ReplicateSeed:
    master_seed: int
    replicate: int

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.master_seed, self.replicate]))


@dataclass
class SamplePath:
    n: int
    values: np.ndarray  # (n+1, d)
    seed: ReplicateSeed
    innovations: np.ndarray = field(repr=False, default=None)
    first_index: int = 1

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def innovation(self, t: int) -> float:
        return float(self.innovations[t - self.first_index])


def make_process(lag_sets, name: str = "custom") -> ProcessSpec:
    lags = []
    for j, lag_set in enumerate(lag_sets):
        lag_set = sorted({int(l) for l in lag_set})
        if not lag_set:
            raise ValueError(f"lag_sets[{j}]: lag set must be non-empty")
        lags.append(tuple(lag_set))
    if not lags:
        raise ValueError("lag_sets: at least one margin is required")
    return ProcessSpec(lags=tuple(lags), name=name)


def builtin_process(name: str, d: int = 1) -> ProcessSpec:
    if name == "iid":
        if d < 1:
            raise ValueError(f"d: must be >= 1, got {d}")
        return make_process([{0}] * d, name="iid")
    if name == "ex61":
        return make_process([{0, -2, -3}, {1}], name="ex61")
    if name == "ex62":
        return make_process([{0, -2, -3}, {0}], name="ex62")
    raise ValueError(f"process: unknown built-in '{name}', expected one of {list(BUILTIN_PROCESSES)}")


def moving_maxima(spec: ProcessSpec, innovations: np.ndarray, n: int) -> np.ndarray:
    """Build the (..., n+1, d) value array from innovations indexed from 1 + min_lag.

    Leading axes of `innovations` are treated as a batch.
    """
    offset = spec.min_lag
    columns = []
    for lag_set in spec.lags:
        column = None
        for lag in lag_set:
            start = lag - offset
            shifted = innovations[..., start:start + n + 1]
            column = shifted if column is None else np.maximum(column, shifted)
        columns.append(column)
    return np.stack(columns, axis=-1)


def draw_innovations(spec: ProcessSpec, n: int, rng: np.random.Generator, size=None) -> np.ndarray:
    first, last = spec.innovation_range(n)
    count = last - first + 1
    shape = (count,) if size is None else (size, count)
    return rng.random(shape)


def generate_window(spec: ProcessSpec, n: int, seed: ReplicateSeed) -> SamplePath:
    if n < 2:
        raise ValueError(f"n: window length must be >= 2, got {n}")
    innovations = draw_innovations(spec, n, seed.rng())
    values = moving_maxima(spec, innovations, n)
    logger.debug(f"Generated window {spec.name} n={n} replicate={seed.replicate}")
    return SamplePath(
        n=n,
        values=values,
        seed=seed,
        innovations=innovations,
        first_index=spec.innovation_range(n)[0],
    )
