"""Step/size distributions used by the hypermutation and heavy-tailed operators.

All tables are precomputed once per parameter pair.  Tables are indexed so
that ``p[i]`` is the probability attached to step (or size) ``i``; for the
step-indexed tables entry 0 is unused and set to 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from .core import RandomSource, next_double


class ConfigError(ValueError):
    """Invalid parameter for a distribution, operator or run."""


def default_gamma(n: int) -> float:
    # 1/ln n, capped at 1; for n <= 2 the table has no interior entries anyway
    return 1.0 if n <= 2 else 1.0 / math.log(n)


DEFAULT_BETA = 1.5
DEFAULT_P1 = 1.0 / math.e


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _cumulative(p: np.ndarray) -> np.ndarray:
    c = np.cumsum(p)
    c /= c[-1]
    c[-1] = 1.0
    return _freeze(c)


@dataclass(frozen=True, eq=False)
class ParabolicEvalDist:
    """Evaluation probability after the i-th flip, i = 1..n (index 0 unused)."""

    n: int
    gamma: float
    p: np.ndarray = field(repr=False)

    @property
    def kind(self) -> str:
        return "parabolic"


@dataclass(frozen=True, eq=False)
class SymmetricPowerLawDist:
    """Symmetric power law over sizes 0..n.

    Used both as a size distribution (HMP_beta) and, for steps 1..n, as the
    per-step evaluation probability of FCM_beta.
    """

    n: int
    beta: float
    p: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)
    offset: int = 0

    @property
    def kind(self) -> str:
        return "symmetric_powerlaw"


@dataclass(frozen=True, eq=False)
class PowerLawRateDist:
    """Power law over chi = 1..upper (index 0 unused, mass 0)."""

    n: int
    beta: float
    upper: int
    p: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)
    offset: int = 1

    @property
    def kind(self) -> str:
        return "powerlaw_rate"


@dataclass(frozen=True, eq=False)
class UniformHeavyTailDist:
    """Size 1 with probability p1, every size 2..n with (1 - p1)/(n - 1)."""

    n: int
    p1: float
    p: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)
    offset: int = 1

    @property
    def kind(self) -> str:
        return "uniform_tail"


@lru_cache(maxsize=256)
def build_parabolic(n: int, gamma: float) -> ParabolicEvalDist:
    if n < 2:
        raise ConfigError(f"parabolic distribution needs n >= 2, got {n}")
    if not (0.0 < gamma <= 1.0):
        raise ConfigError(f"gamma must lie in (0, 1], got {gamma}")
    p = np.zeros(n + 1)
    p[1] = p[n] = 1.0 / math.e
    for i in range(2, n):
        p[i] = gamma / min(i, n - i)
    return ParabolicEvalDist(n, float(gamma), _freeze(p))


def symmetric_weights(n: int, beta: float) -> np.ndarray:
    i = np.arange(n + 1)
    return np.minimum(i + 1, n - i + 1).astype(float) ** (-beta)


@lru_cache(maxsize=256)
def build_symmetric_powerlaw(n: int, beta: float) -> SymmetricPowerLawDist:
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if not beta >= 1.0:
        raise ConfigError(f"beta must be >= 1 for the symmetric power law, got {beta}")
    w = symmetric_weights(n, beta)
    p = w / w.sum()
    return SymmetricPowerLawDist(n, float(beta), _freeze(p), _cumulative(p))


@lru_cache(maxsize=256)
def build_powerlaw_rate(n: int, beta: float, extended: bool = False) -> PowerLawRateDist:
    if n < 2:
        raise ConfigError(f"n must be >= 2, got {n}")
    if not beta > 1.0:
        raise ConfigError(f"beta must be > 1 for the power-law rate, got {beta}")
    upper = n if extended else n // 2
    p = np.zeros(upper + 1)
    chi = np.arange(1, upper + 1, dtype=float)
    w = chi ** (-beta)
    p[1:] = w / w.sum()
    return PowerLawRateDist(n, float(beta), upper, _freeze(p), _cumulative(p[1:]))


@lru_cache(maxsize=256)
def build_uniform_tail(n: int, p1: float = DEFAULT_P1) -> UniformHeavyTailDist:
    if n < 2:
        raise ConfigError(f"n must be >= 2, got {n}")
    if not (0.0 < p1 < 1.0):
        raise ConfigError(f"p1 must lie in (0, 1), got {p1}")
    p = np.zeros(n + 1)
    p[1] = p1
    p[2:] = (1.0 - p1) / (n - 1)
    return UniformHeavyTailDist(n, float(p1), _freeze(p), _cumulative(p[1:]))


@njit(cache=True, _nrt=False)
def _sample_cdf(state, cdf, offset):
    u = next_double(state)
    return offset + np.searchsorted(cdf, u, side="right")


def sample_size(dist, rng: RandomSource) -> int:
    """Draw a size from a size distribution by inverse-table lookup."""
    return int(_sample_cdf(rng.state, dist.cdf, dist.offset))


def degenerate(n: int, k: int) -> UniformHeavyTailDist:
    """Point mass at size ``k`` (0 <= k <= n); handy for forcing sizes in tests."""
    p = np.zeros(n + 1)
    p[k] = 1.0
    return UniformHeavyTailDist(n, float("nan"), _freeze(p), _cumulative(p), offset=0)


# ---------------------------------------------------------------------------
# sequential evaluation schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EvalSchedule:
    """Per-step evaluation probabilities in the form the sequential walk consumes.

    ``hazard[k]`` is the cumulative hazard sum_{i<=k} -log(1 - p_i) over the
    uncertain steps; ``next_certain[j]`` is the first step after ``j`` that is
    evaluated with probability one (``n + 1`` if none).
    """

    n: int
    p: np.ndarray = field(repr=False)
    hazard: np.ndarray = field(repr=False)
    next_certain: np.ndarray = field(repr=False)


def make_schedule(p_steps: np.ndarray) -> EvalSchedule:
    p = np.asarray(p_steps, dtype=float)
    n = p.shape[0] - 1
    h = np.zeros(n + 1)
    certain = np.zeros(n + 2, dtype=bool)
    for i in range(1, n + 1):
        if p[i] >= 1.0:
            certain[i] = True
        elif p[i] > 0.0:
            h[i] = -math.log1p(-p[i])
    hazard = np.cumsum(h)
    nxt = np.full(n + 1, n + 1, dtype=np.int64)
    upcoming = n + 1
    for j in range(n, -1, -1):
        nxt[j] = upcoming
        if certain[j]:
            upcoming = j
    return EvalSchedule(n, _freeze(p.copy()), _freeze(hazard), _freeze(nxt))


@lru_cache(maxsize=256)
def _schedule_for(kind: str, n: int, param: float) -> EvalSchedule:
    if kind == "parabolic":
        return make_schedule(build_parabolic(n, param).p)
    if kind == "symmetric_powerlaw":
        return make_schedule(build_symmetric_powerlaw(n, param).p)
    if kind == "static":
        p = np.ones(n + 1)
        p[0] = 0.0
        return make_schedule(p)
    raise ConfigError(f"no evaluation schedule for {kind}")


def schedule(dist) -> EvalSchedule:
    """Evaluation schedule for FCM-style walks over ``dist``; see ``static_schedule`` for static HMP."""
    if dist is None:
        raise ConfigError("static schedule needs n; use static_schedule(n)")
    if isinstance(dist, ParabolicEvalDist):
        return _schedule_for("parabolic", dist.n, dist.gamma)
    if isinstance(dist, SymmetricPowerLawDist):
        return _schedule_for("symmetric_powerlaw", dist.n, dist.beta)
    raise ConfigError(f"{type(dist).__name__} is not a per-step evaluation distribution")


def static_schedule(n: int) -> EvalSchedule:
    return _schedule_for("static", n, 0.0)
