"""Mutation and hypermutation operators (reference implementations).

Every operator has the same contract: take a parent :class:`Individual`, a
problem, a random source and an evaluation ledger, and return a
:class:`MutationOutcome`.  The compiled kernels in :mod:`fastia._kernels`
replay exactly the same draws in the same order, so for a given seed both
routes produce the same offspring.

Random-draw protocol (shared with the kernels):

* sequential walks (FCM variants, static HMP+FCM): the next evaluated step is
  found by one exponential draw against the cumulative hazard of the
  evaluation schedule (no draw when the next step is certain); every flip is a
  Fisher-Yates swap consuming one ``randbelow`` draw.
* size-based operators: one draw for the size, then ``_sample_subset``.
* standard bit mutation: geometric skips, one draw per flipped bit plus one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np
from numba import njit

from .core import (BitString, BudgetExhausted, EvaluationLedger, Individual, RandomSource,
                   exp1, next_double, randbelow)
from .distributions import (DEFAULT_BETA, DEFAULT_P1, ConfigError, EvalSchedule, ParabolicEvalDist,
                            PowerLawRateDist, SymmetricPowerLawDist, UniformHeavyTailDist,
                            _sample_cdf, build_parabolic, build_powerlaw_rate,
                            build_symmetric_powerlaw, build_uniform_tail, default_gamma,
                            sample_size, schedule, static_schedule)


@dataclass
class MutationOutcome:
    offspring: Individual
    evals_used: int
    improved: bool
    evaluated: bool


# ---------------------------------------------------------------------------
# shared sampling helpers (also called from the kernels)
# ---------------------------------------------------------------------------


@njit(cache=True, _nrt=False)
def _sample_subset(state, n, k, mark, out):
    """Write ``k`` distinct positions of ``range(n)`` into ``out[:k]``.

    ``mark`` is an all-zero uint8 scratch array of length n and is left zeroed.
    """
    if 2 * k <= n:
        c = 0
        while c < k:
            r = randbelow(state, n)
            if mark[r] == 0:
                mark[r] = 1
                out[c] = r
                c += 1
        for j in range(k):
            mark[out[j]] = 0
    else:
        # pick the n - k positions that stay, flip the rest in increasing order
        c = 0
        while c < n - k:
            r = randbelow(state, n)
            if mark[r] == 0:
                mark[r] = 1
                c += 1
        c = 0
        for i in range(n):
            if mark[i]:
                mark[i] = 0
            else:
                out[c] = i
                c += 1
    return k


@njit(cache=True, _nrt=False)
def _sample_sbm(state, n, rate, out):
    """Positions flipped by standard bit mutation with per-bit ``rate``."""
    if rate <= 0.0:
        return 0
    if rate >= 1.0:
        for i in range(n):
            out[i] = i
        return n
    lq = math.log1p(-rate)
    c = 0
    i = -1
    while True:
        u = next_double(state)
        i += int(math.floor(math.log1p(-u) / lq)) + 1
        if i >= n:
            break
        out[c] = i
        c += 1
    return c


def _subset(n: int, k: int, rng: RandomSource) -> np.ndarray:
    out = np.empty(max(n, 1), dtype=np.int64)
    mark = np.zeros(max(n, 1), dtype=np.uint8)
    c = _sample_subset(rng.state, n, k, mark, out)
    return out[:c]


def _better(problem, f: float, g: float) -> bool:
    return problem.sign * f > problem.sign * g


def _single(parent: Individual, problem, positions, ledger: EvaluationLedger) -> MutationOutcome:
    y = parent.genotype.flipped(positions) if len(positions) else parent.genotype
    f = ledger.evaluate(problem, y)
    child = Individual(y, f, parent.age)
    return MutationOutcome(child, 1, _better(problem, f, parent.fitness), True)


# ---------------------------------------------------------------------------
# sequential (stop-at-first-constructive-mutation) walks
# ---------------------------------------------------------------------------


def sequential_walk(parent: Individual, problem, sched: EvalSchedule, rng: RandomSource,
                    ledger: EvaluationLedger) -> MutationOutcome:
    """Flip bits in uniformly random order, evaluating step i with prob ``sched.p[i]``.

    Stops at the first evaluated point strictly better than the parent.  Without
    an improvement the last evaluated point is returned; without any evaluation
    the parent comes back unevaluated.
    """
    n = len(parent.genotype)
    if sched.n != n:
        raise ConfigError(f"schedule built for n={sched.n}, parent has n={n}")
    state = rng.state
    hazard, nxt = sched.hazard, sched.next_certain
    x = parent.genotype.bits.copy()
    perm = np.arange(n, dtype=np.int64)
    step = 0
    evals = 0
    last: Optional[Individual] = None
    while True:
        nc = int(nxt[step])
        if nc == step + 1:
            k = nc
        else:
            t = hazard[step] + exp1(state)
            k = int(np.searchsorted(hazard, t, side="left"))
            k = min(max(k, step + 1), nc)
        if k > n:
            break
        for j in range(step, k):
            r = j + randbelow(state, n - j)
            perm[j], perm[r] = perm[r], perm[j]
            x[perm[j]] ^= 1
        step = k
        y = BitString(x)
        try:
            f = ledger.evaluate(problem, y)
        except BudgetExhausted as exc:
            exc.outcome = _partial(parent, last, evals)
            raise
        evals += 1
        last = Individual(y, f, parent.age)
        if _better(problem, f, parent.fitness):
            return MutationOutcome(last, evals, True, True)
    return _partial(parent, last, evals)


def _partial(parent, last, evals) -> MutationOutcome:
    if last is None:
        return MutationOutcome(parent.copy(), 0, False, False)
    return MutationOutcome(last, evals, False, True)


def fcm_gamma(parent, problem, dist: ParabolicEvalDist, rng, ledger) -> MutationOutcome:
    return sequential_walk(parent, problem, schedule(dist), rng, ledger)


def fcm_beta(parent, problem, dist: SymmetricPowerLawDist, rng, ledger) -> MutationOutcome:
    return sequential_walk(parent, problem, schedule(dist), rng, ledger)


def static_hmp_fcm(parent, problem, rng, ledger) -> MutationOutcome:
    return sequential_walk(parent, problem, static_schedule(len(parent.genotype)), rng, ledger)


# ---------------------------------------------------------------------------
# single-evaluation operators
# ---------------------------------------------------------------------------


def hmp_beta(parent, problem, dist: SymmetricPowerLawDist, rng, ledger) -> MutationOutcome:
    n = len(parent.genotype)
    k = sample_size(dist, rng)
    return _single(parent, problem, _subset(n, k, rng), ledger)


def static_hmp_plain(parent, problem, rng, ledger) -> MutationOutcome:
    n = len(parent.genotype)
    return _single(parent, problem, np.arange(n), ledger)


def sbm(parent, problem, rate: float, rng, ledger) -> MutationOutcome:
    n = len(parent.genotype)
    out = np.empty(n, dtype=np.int64)
    c = _sample_sbm(rng.state, n, float(rate), out)
    return _single(parent, problem, out[:c], ledger)


def rls_flip(parent, problem, rng, ledger) -> MutationOutcome:
    n = len(parent.genotype)
    return _single(parent, problem, [rng.integers(n)], ledger)


def ea_beta_mutation(parent, problem, dist: PowerLawRateDist, mode: str, rng, ledger) -> MutationOutcome:
    n = len(parent.genotype)
    chi = sample_size(dist, rng)
    if mode == "rate":
        out = np.empty(n, dtype=np.int64)
        c = _sample_sbm(rng.state, n, chi / n, out)
        return _single(parent, problem, out[:c], ledger)
    if mode == "exact":
        return _single(parent, problem, _subset(n, chi, rng), ledger)
    raise ConfigError(f"unknown EA_beta mode {mode!r} (rate, exact)")


def ea_unif_mutation(parent, problem, dist: UniformHeavyTailDist, rng, ledger) -> MutationOutcome:
    n = len(parent.genotype)
    k = sample_size(dist, rng)
    return _single(parent, problem, _subset(n, k, rng), ledger)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


class OperatorKind(str, Enum):
    FCM_GAMMA = "fcm_gamma"
    FCM_BETA = "fcm_beta"
    HMP_BETA = "hmp_beta"
    STATIC_HMP_FCM = "static_hmp_fcm"
    STATIC_HMP_PLAIN = "static_hmp_plain"
    SBM = "sbm"
    RLS_FLIP = "rls_flip"
    EA_BETA = "ea_beta"
    EA_UNIF = "ea_unif"


# kernel operator codes
OP_WALK, OP_SIZE, OP_SIZE_RATE, OP_PLAIN, OP_SBM, OP_RLS = range(6)


class KernelOperator(NamedTuple):
    code: int
    hazard: np.ndarray
    next_certain: np.ndarray
    cdf: np.ndarray
    offset: int
    rate: float


_EMPTY_F = np.zeros(1)
_EMPTY_I = np.zeros(1, dtype=np.int64)


@dataclass(frozen=True)
class OperatorConfig:
    """Operator choice plus its parameters; ``None`` means the default for n.

    The mutation potential constant is fixed at c = 1 (up to n flips).
    """

    kind: OperatorKind
    gamma: Optional[float] = None
    beta: Optional[float] = None
    p1: float = DEFAULT_P1
    rate: Optional[float] = None
    mode: str = "rate"
    extended: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", OperatorKind(self.kind))
        if self.gamma is not None and not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.mode not in ("rate", "exact"):
            raise ConfigError(f"mode must be 'rate' or 'exact', got {self.mode!r}")

    def with_params(self, **kw) -> "OperatorConfig":
        return replace(self, **kw)

    def params(self, n: int) -> dict:
        """Resolved parameter values at dimension n (for records and CSV)."""
        k = self.kind
        if k is OperatorKind.FCM_GAMMA:
            return {"gamma": self.resolved_gamma(n)}
        if k in (OperatorKind.FCM_BETA, OperatorKind.HMP_BETA):
            return {"beta": self.resolved_beta()}
        if k is OperatorKind.EA_BETA:
            return {"beta": self.resolved_beta(), "mode": self.mode, "extended": self.extended}
        if k is OperatorKind.EA_UNIF:
            return {"p1": self.p1}
        if k is OperatorKind.SBM:
            return {"rate": self.resolved_rate(n)}
        return {}

    def resolved_gamma(self, n: int) -> float:
        return default_gamma(n) if self.gamma is None else float(self.gamma)

    def resolved_beta(self) -> float:
        return DEFAULT_BETA if self.beta is None else float(self.beta)

    def resolved_rate(self, n: int) -> float:
        return 1.0 / n if self.rate is None else float(self.rate)

    def build(self, n: int) -> "Operator":
        return Operator(self, n)


class Operator:
    """An :class:`OperatorConfig` bound to a dimension, with tables resolved."""

    def __init__(self, config: OperatorConfig, n: int):
        self.config = config
        self.n = n
        k = config.kind
        self.dist = None
        self.sched = None
        if k is OperatorKind.FCM_GAMMA:
            self.dist = build_parabolic(n, config.resolved_gamma(n))
            self.sched = schedule(self.dist)
        elif k in (OperatorKind.FCM_BETA, OperatorKind.HMP_BETA):
            self.dist = build_symmetric_powerlaw(n, config.resolved_beta())
            if k is OperatorKind.FCM_BETA:
                self.sched = schedule(self.dist)
        elif k is OperatorKind.STATIC_HMP_FCM:
            self.sched = static_schedule(n)
        elif k is OperatorKind.EA_BETA:
            self.dist = build_powerlaw_rate(n, config.resolved_beta(), config.extended)
        elif k is OperatorKind.EA_UNIF:
            self.dist = build_uniform_tail(n, config.p1)
        elif k is OperatorKind.SBM:
            r = config.resolved_rate(n)
            if not 0.0 <= r <= 1.0:
                raise ConfigError(f"SBM rate must lie in [0, 1], got {r}")
        elif k is OperatorKind.RLS_FLIP and n < 1:
            raise ConfigError("RLS needs n >= 1")

    def __call__(self, parent: Individual, problem, rng: RandomSource,
                 ledger: EvaluationLedger) -> MutationOutcome:
        k = self.config.kind
        if self.sched is not None:
            return sequential_walk(parent, problem, self.sched, rng, ledger)
        if k is OperatorKind.HMP_BETA:
            return hmp_beta(parent, problem, self.dist, rng, ledger)
        if k is OperatorKind.STATIC_HMP_PLAIN:
            return static_hmp_plain(parent, problem, rng, ledger)
        if k is OperatorKind.SBM:
            return sbm(parent, problem, self.config.resolved_rate(self.n), rng, ledger)
        if k is OperatorKind.RLS_FLIP:
            return rls_flip(parent, problem, rng, ledger)
        if k is OperatorKind.EA_BETA:
            return ea_beta_mutation(parent, problem, self.dist, self.config.mode, rng, ledger)
        return ea_unif_mutation(parent, problem, self.dist, rng, ledger)

    def kernel(self) -> KernelOperator:
        # writable copies throughout, so every operator shares one compiled type
        k = self.config.kind
        if self.sched is not None:
            return KernelOperator(OP_WALK, self.sched.hazard.copy(), self.sched.next_certain.copy(),
                                  _EMPTY_F, 0, 0.0)
        if k is OperatorKind.STATIC_HMP_PLAIN:
            return KernelOperator(OP_PLAIN, _EMPTY_F, _EMPTY_I, _EMPTY_F, 0, 0.0)
        if k is OperatorKind.SBM:
            return KernelOperator(OP_SBM, _EMPTY_F, _EMPTY_I, _EMPTY_F, 0, self.config.resolved_rate(self.n))
        if k is OperatorKind.RLS_FLIP:
            return KernelOperator(OP_RLS, _EMPTY_F, _EMPTY_I, _EMPTY_F, 0, 0.0)
        code = OP_SIZE
        if k is OperatorKind.EA_BETA and self.config.mode == "rate":
            code = OP_SIZE_RATE
        return KernelOperator(code, _EMPTY_F, _EMPTY_I, self.dist.cdf.copy(), int(self.dist.offset), 0.0)
