"""Level calibration and the limiting exceedance/upcrossing rates of a process."""

import math
from typing import Optional

from pydantic import BaseModel, field_validator

from .process import ProcessSpec


class LevelVector(BaseModel):
    n: int
    u: tuple[float, ...]

    @field_validator("u")
    @classmethod
    def _check_u(cls, v):
        if not v:
            raise ValueError("u must have at least one margin")
        for j, level in enumerate(v):
            if not 0 < level < 1:
                raise ValueError(f"u[{j}] must lie in (0, 1), got {level}")
        return v

    @property
    def d(self) -> int:
        return len(self.u)


class RateSummary(BaseModel):
    tau_prime: tuple[float, ...]
    tau: tuple[float, ...]
    nu: tuple[float, ...]
    nu_union: Optional[float] = None
    tau_union: Optional[float] = None


def levels_from_tau_prime(tau_prime, n: int) -> LevelVector:
    if n < 2:
        raise ValueError(f"n: window length must be >= 2, got {n}")
    u = []
    for j, rate in enumerate(tau_prime):
        if not 0 < rate < n:
            raise ValueError(f"tau_prime[{j}]: must lie in (0, {n}), got {rate}")
        u.append(1.0 - rate / n)
    return LevelVector(n=n, u=tuple(u))


def lag_runs(lag_set) -> int:
    """Number of maximal runs of consecutive integers in {-l : l in lag_set}.

    One high innovation at time t exceeds at times {t - l}; each run of
    consecutive exceedance times is entered by exactly one upcrossing.
    """
    times = sorted({-l for l in lag_set})
    runs = 1
    for previous, current in zip(times, times[1:]):
        if current != previous + 1:
            runs += 1
    return runs


def _union_rates(spec: ProcessSpec, tau_prime) -> tuple[Optional[float], Optional[float]]:
    kind = spec.builtin_kind
    if kind == "ex61":
        a, b = tau_prime
        return 2 * a + b, 3 * a + b
    if kind == "ex62":
        a, b = tau_prime
        # nu = (2a, b): nu_1/2 + nu_2 when 2 nu_2 >= nu_1, else nu_1
        nu_union = a + b if b >= a else 2 * a
        return nu_union, 2 * a + max(a, b)
    if kind == "iid":
        # all margins read the same innovation
        return max(tau_prime), max(tau_prime)
    return None, None


def limiting_rates(spec: ProcessSpec, tau_prime) -> RateSummary:
    tau_prime = tuple(float(rate) for rate in tau_prime)
    if len(tau_prime) != spec.d:
        raise ValueError(f"tau_prime: expected {spec.d} values, got {len(tau_prime)}")
    for j, rate in enumerate(tau_prime):
        if rate <= 0:
            raise ValueError(f"tau_prime[{j}]: must be positive, got {rate}")
    tau = tuple(len(lag_set) * rate for lag_set, rate in zip(spec.lags, tau_prime))
    nu = tuple(lag_runs(lag_set) * rate for lag_set, rate in zip(spec.lags, tau_prime))
    nu_union, tau_union = _union_rates(spec, tau_prime)
    return RateSummary(tau_prime=tau_prime, tau=tau, nu=nu, nu_union=nu_union, tau_union=tau_union)


def tau_prime_for_nu(spec: ProcessSpec, nu) -> tuple[float, ...]:
    """Inverse of the nu column of limiting_rates."""
    if len(nu) != spec.d:
        raise ValueError(f"nu: expected {spec.d} values, got {len(nu)}")
    return tuple(float(rate) / lag_runs(lag_set) for lag_set, rate in zip(spec.lags, nu))


def scaled_levels(spec: ProcessSpec, tau_prime, n: int, c: float) -> LevelVector:
    """Levels calibrated for floor(n/c), applied to windows of length n."""
    if c <= 0:
        raise ValueError(f"c: scaling constant must be positive, got {c}")
    if len(tau_prime) != spec.d:
        raise ValueError(f"tau_prime: expected {spec.d} values, got {len(tau_prime)}")
    shortened = math.floor(n / c)
    if shortened < 2:
        raise ValueError(f"c: floor(n/c) = {shortened} is below 2 for n={n}")
    calibrated = levels_from_tau_prime(tau_prime, shortened)
    return LevelVector(n=n, u=calibrated.u)
