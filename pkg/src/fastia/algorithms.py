"""The two search engines: the elitist (1+1) loop and Opt-IA with hybrid ageing.

Both engines work internally with ``g = sign * f`` so that all comparisons are
written for maximisation.  Each engine has a reference implementation on top
of :mod:`fastia.operators` and a compiled counterpart in
:mod:`fastia._kernels`; ``backend="auto"`` picks the kernel whenever the
problem is a built-in.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .core import (BitString, BudgetExhausted, EvaluationLedger, Individual, RandomSource,
                   TargetReached, hamming)
from .distributions import ConfigError
from .operators import OperatorConfig

ONE_PLUS_ONE = "one_plus_one"
OPT_IA = "opt_ia"
ENGINES = (ONE_PLUS_ONE, OPT_IA)


@dataclass
class AgeingConfig:
    tau: float = math.inf
    mu: int = 1
    dup: int = 1
    p_die: Optional[float] = None  # None: 1 - 1/((dup + 1) mu), follows mu and dup

    def __post_init__(self):
        if self.mu < 1 or self.dup < 1:
            raise ConfigError(f"mu and dup must be >= 1, got mu={self.mu}, dup={self.dup}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.p_die is not None and not 0.0 <= self.p_die <= 1.0:
            raise ConfigError(f"p_die must lie in [0, 1], got {self.p_die}")

    @property
    def death_probability(self) -> float:
        if self.p_die is not None:
            return float(self.p_die)
        return 1.0 - 1.0 / ((self.dup + 1) * self.mu)


@dataclass
class RunConfig:
    operator: OperatorConfig
    engine: str = ONE_PLUS_ONE
    ageing: Optional[AgeingConfig] = None
    budget: Optional[int] = None
    target: str = "optimum"  # or "none": run until the budget is spent
    seed: int = 0

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown engine {self.engine!r}; choose from {ENGINES}")
        if self.engine == OPT_IA and self.ageing is None:
            raise ConfigError("the Opt-IA engine needs an AgeingConfig")
        if self.budget is not None and self.budget < 1:
            raise ConfigError(f"budget must be positive, got {self.budget}")
        if self.target not in ("optimum", "none"):
            raise ConfigError(f"target must be 'optimum' or 'none', got {self.target!r}")


@dataclass
class RunRecord:
    seed: int
    stream: int
    evaluations: int
    generations: int
    success: bool
    evaluations_to_target: Optional[int]
    best_fitness: float
    best_first_hit_evaluation: int

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class _Tracker:
    """Best-so-far bookkeeping, installed as the ledger observer."""

    problem: object
    stop_on_target: bool = True
    best_g: float = -math.inf
    best_f: float = math.nan
    first_hit: int = 0
    success: bool = False
    hit_at: Optional[int] = None
    generations: int = 0

    def __call__(self, x, f, count):
        track_best(self, x, f, count)


def track_best(tracker: _Tracker, x: BitString, f: float, count: int) -> _Tracker:
    """Fold one evaluated point into the best-so-far record."""
    g = tracker.problem.sign * f
    if g > tracker.best_g:
        tracker.best_g = g
        tracker.best_f = f
        tracker.first_hit = count
    if tracker.stop_on_target and tracker.problem.is_target(x, f):
        tracker.success = True
        tracker.hit_at = count
        raise TargetReached(count)
    return tracker


def _record(rng, count, tracker) -> RunRecord:
    return RunRecord(rng.seed, rng.stream, count, tracker.generations, tracker.success,
                     tracker.hit_at, float(tracker.best_f), tracker.first_hit)


def _use_kernel(problem, backend: str) -> bool:
    if backend == "reference":
        return False
    kp = problem.kernel_spec()
    if backend == "kernel" and kp is None:
        raise ConfigError(f"{problem.descriptor} has no compiled kernel")
    return kp is not None


def _budget(config) -> int:
    return K.NO_BUDGET if config.budget is None else int(config.budget)


def _kernel_record(rng, problem, trk, best, target) -> RunRecord:
    success = bool(trk[K.T_SUCCESS])
    count = int(trk[K.T_COUNT])
    return RunRecord(rng.seed, rng.stream, count, int(trk[K.T_GENS]), success,
                     count if success else None, float(best[1]), int(trk[K.T_HIT]))


class _NoTarget:
    """Wrap a problem so its target never fires (``target="none"``)."""

    def __init__(self, problem):
        self._p = problem

    def __getattr__(self, name):
        return getattr(self._p, name)

    def is_target(self, x, f):
        return False

    def kernel_spec(self):
        # the kernels always stop on the target
        return None


# ---------------------------------------------------------------------------
# (1+1) engine
# ---------------------------------------------------------------------------


def run_one_plus_one(problem, config: RunConfig, rng: Optional[RandomSource] = None,
                     init: Optional[BitString] = None, backend: str = "auto") -> RunRecord:
    """Elitist loop: keep the offspring whenever it is at least as good."""
    rng = rng or RandomSource(config.seed, 0)
    if config.target == "none":
        problem = _NoTarget(problem)
    op = config.operator.build(problem.n)
    if init is not None and len(init) != problem.n:
        raise ConfigError(f"initial point has length {len(init)}, expected {problem.n}")
    if _use_kernel(problem, backend):
        kp = problem.kernel_spec()
        x0 = init.bits.copy() if init is not None else np.zeros(0, dtype=np.uint8)
        trk, best = K.one_plus_one(kp, op.kernel(), rng.state, x0, _budget(config), K.state_len(kp))
        return _kernel_record(rng, problem, trk, best, config.target)

    tracker = _Tracker(problem)
    ledger = EvaluationLedger(config.budget, observer=tracker)
    try:
        x = init if init is not None else BitString.random(problem.n, rng)
        cur = Individual(x, ledger.evaluate(problem, x))
        while True:
            tracker.generations += 1
            out = op(cur, problem, rng, ledger)
            y = out.offspring
            if out.evaluated and problem.sign * y.fitness >= problem.sign * cur.fitness:
                cur = y
    except (BudgetExhausted, TargetReached):
        pass
    return _record(rng, ledger.count, tracker)


# ---------------------------------------------------------------------------
# Opt-IA engine
# ---------------------------------------------------------------------------


def apply_hybrid_ageing(population: list, ageing: AgeingConfig, rng: RandomSource) -> list:
    """Remove each member with age >= tau independently with probability p_die."""
    p_die = ageing.death_probability
    out = []
    for ind in population:
        if ind.age >= ageing.tau and rng.random() < p_die:
            continue
        out.append(ind)
    return out


def _fresh(problem, rng, ledger) -> Individual:
    x = BitString.random(problem.n, rng)
    return Individual(x, ledger.evaluate(problem, x), 0)


def _truncate(population: list, mu: int, sign: float, rng: RandomSource) -> list:
    keys = [rng.random() for _ in population]
    order = sorted(range(len(population)), key=lambda j: (-sign * population[j].fitness, keys[j]))
    return [population[j] for j in order[:mu]]


def opt_ia_generation(population, problem, op, ageing: AgeingConfig, rng, ledger) -> list:
    """One generation of Opt-IA: age, clone and mutate, hybrid ageing, refill, truncate."""
    mu, dup = ageing.mu, ageing.dup
    for ind in population:
        ind.age += 1
    mutants = []
    for ind in population:
        for _ in range(dup):
            out = op(ind, problem, rng, ledger)
            child = out.offspring.copy()
            child.age = 0 if out.improved else ind.age
            mutants.append(child)
    merged = population + mutants
    merged = apply_hybrid_ageing(merged, ageing, rng)
    while len(merged) < mu:
        merged.append(_fresh(problem, rng, ledger))
    if len(merged) > mu:
        merged = _truncate(merged, mu, problem.sign, rng)
    return merged


def run_opt_ia(problem, config: RunConfig, rng: Optional[RandomSource] = None,
               backend: str = "auto", on_generation=None) -> RunRecord:
    """Opt-IA: cloning, hypermutation, hybrid ageing, refill and truncation.

    ``on_generation(population)`` (reference backend only) is called after every
    completed generation; tests use it to inspect ages and sizes.
    """
    ageing = config.ageing
    if ageing is None:
        raise ConfigError("the Opt-IA engine needs an AgeingConfig")
    rng = rng or RandomSource(config.seed, 0)
    if config.target == "none":
        problem = _NoTarget(problem)
    op = config.operator.build(problem.n)
    if on_generation is None and _use_kernel(problem, backend):
        kp = problem.kernel_spec()
        trk, best = K.opt_ia(kp, op.kernel(), rng.state, ageing.mu, ageing.dup, float(ageing.tau),
                             ageing.death_probability, _budget(config), K.state_len(kp))
        return _kernel_record(rng, problem, trk, best, config.target)

    tracker = _Tracker(problem)
    ledger = EvaluationLedger(config.budget, observer=tracker)
    try:
        pop = [_fresh(problem, rng, ledger) for _ in range(ageing.mu)]
        while True:
            tracker.generations += 1
            pop = opt_ia_generation(pop, problem, op, ageing, rng, ledger)
            if on_generation is not None:
                on_generation(pop)
    except (BudgetExhausted, TargetReached):
        pass
    return _record(rng, ledger.count, tracker)


def run(problem, config: RunConfig, rng: Optional[RandomSource] = None,
        init: Optional[BitString] = None, backend: str = "auto") -> RunRecord:
    if config.engine == OPT_IA:
        if init is not None:
            raise ConfigError("initial points are only supported by the (1+1) engine")
        return run_opt_ia(problem, config, rng, backend=backend)
    return run_one_plus_one(problem, config, rng, init=init, backend=backend)


# ---------------------------------------------------------------------------
# repeated mutation of a fixed parent
# ---------------------------------------------------------------------------


def mutation_histogram(problem, operator: OperatorConfig, x: BitString, calls: int,
                       rng: Optional[RandomSource] = None, backend: str = "auto"):
    """Apply the operator ``calls`` times to the same parent, accepting nothing.

    Returns ``(evaluations, hist)``: ``hist[d]`` counts offspring at Hamming
    distance d and ``hist[n + 1]`` counts calls that returned the parent
    without evaluating anything.  The parent's own evaluation is not counted.
    """
    rng = rng if rng is not None else RandomSource(0)
    n = problem.n
    op = operator.build(n)
    hist = np.zeros(n + 2, dtype=np.int64)
    if _use_kernel(problem, backend):
        kp = problem.kernel_spec()
        total = K.repeat_mutation(kp, op.kernel(), rng.state, x.bits.copy(), int(calls), hist,
                                  K.state_len(kp))
        return int(total), hist
    parent = Individual(x, problem.evaluate(x), 0)
    ledger = EvaluationLedger()
    for _ in range(calls):
        out = op(parent, problem, rng, ledger)
        if out.evaluated:
            hist[hamming(out.offspring.genotype, x)] += 1
        else:
            hist[n + 1] += 1
    return ledger.count, hist
