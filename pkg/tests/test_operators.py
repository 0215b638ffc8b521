import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chi2_contingency

from fastia.algorithms import mutation_histogram
from fastia.core import BitString, BudgetExhausted, EvaluationLedger, Individual, RandomSource, hamming
from fastia.distributions import (ConfigError, build_parabolic, build_powerlaw_rate,
                                  build_symmetric_powerlaw, build_uniform_tail, degenerate,
                                  make_schedule)
from fastia.operators import (OperatorConfig, OperatorKind, ea_beta_mutation, ea_unif_mutation,
                              fcm_beta, fcm_gamma, hmp_beta, rls_flip, sbm, sequential_walk,
                              static_hmp_fcm, static_hmp_plain)
from fastia.oracles import flat_walk_evaluations, no_evaluation_probability
from fastia.problems import ConstantProblem, FunctionProblem, LeadingOnes, OneMax

from helpers import ALPHA, Counting, chi2_pvalue, within_3_sigma

E = 1 / math.e
ALL_KINDS = list(OperatorKind)


def parent_of(problem, x):
    return Individual(x, problem.evaluate(x), 0)


def hist(problem, kind, x, calls, seed=0, **kw):
    return mutation_histogram(problem, OperatorConfig(kind, **kw), x, calls, RandomSource(seed, 17))


# ---------------------------------------------------------------------------
# FCM walks


def test_fcm_first_step_improvement_from_zero_string():
    n = 10
    p = np.zeros(n + 1)
    p[1] = 1.0  # force the evaluation after the first flip
    sched = make_schedule(p)
    om = OneMax(n)
    out = sequential_walk(parent_of(om, BitString.zeros(n)), om, sched, RandomSource(4), EvaluationLedger())
    assert out.improved and out.evaluated and out.evals_used == 1
    assert out.offspring.genotype.ones_count() == 1


def test_fcm_gamma_no_evaluation_probability_at_optimum():
    n, gamma, calls = 8, 0.5, 10**6
    _, h = hist(OneMax(n), OperatorKind.FCM_GAMMA, BitString.ones(n), calls, gamma=gamma)
    q = no_evaluation_probability(build_parabolic(n, gamma).p)
    assert within_3_sigma(h[n + 1], calls, q)


@pytest.mark.parametrize("n", [50, 100])
def test_fcm_gamma_flat_mean_matches_table_sum(n):
    # the exact expectation is the sum of the evaluation table over steps 1..n
    gamma = 1 / math.log(n)
    total, _ = hist(ConstantProblem(n), OperatorKind.FCM_GAMMA, BitString.zeros(n), 10**6, seed=n)
    assert total / 10**6 == pytest.approx(flat_walk_evaluations(build_parabolic(n, gamma).p), rel=0.01)


def test_fcm_gamma_step_evaluation_probabilities():
    # at the optimum no step improves, so the point at step d is evaluated with prob p[d]
    n, gamma, calls = 8, 0.4, 10**5
    counts = np.zeros(n + 1, dtype=int)
    x = BitString.ones(n)

    def record(y):
        counts[hamming(y, x)] += 1
        return float(y.ones_count())

    prob = FunctionProblem(n, record)
    parent = Individual(x, float(n), 0)
    dist = build_parabolic(n, gamma)
    rng, ledger = RandomSource(3), EvaluationLedger()
    for _ in range(calls):
        fcm_gamma(parent, prob, dist, rng, ledger)
    for d in range(1, n + 1):
        assert within_3_sigma(counts[d], calls, dist.p[d]), d


def test_fcm_beta_large_beta_concentrates_on_both_ends():
    # the symmetric law piles its mass on 0 (no evaluation) and n (complement)
    n, calls = 16, 10**5
    _, h = hist(OneMax(n), OperatorKind.FCM_BETA, BitString.ones(n), calls, beta=20.0)
    assert (h[n] + h[n + 1]) / calls > 0.999
    assert within_3_sigma(h[n + 1], calls, build_symmetric_powerlaw(n, 20.0).p[0])


def test_fcm_beta_single_bit():
    calls = 10**5
    _, h = hist(ConstantProblem(1), OperatorKind.FCM_BETA, BitString.zeros(1), calls)
    p1 = build_symmetric_powerlaw(1, 1.5).p[1]
    assert within_3_sigma(h[1], calls, p1)


def test_fcm_beta_flat_mean_is_one_minus_p0():
    n, calls = 30, 10**6
    total, _ = hist(ConstantProblem(n), OperatorKind.FCM_BETA, BitString.zeros(n), calls, beta=1.5)
    p = build_symmetric_powerlaw(n, 1.5).p
    assert total / calls == pytest.approx(1 - p[0], rel=0.01)


def test_static_hmp_fcm_examples():
    n = 12
    om = OneMax(n)
    out = static_hmp_fcm(parent_of(om, BitString.ones(n)), om, RandomSource(1), EvaluationLedger())
    assert out.evals_used == n and out.offspring.genotype == BitString.zeros(n) and not out.improved
    out = static_hmp_fcm(parent_of(om, BitString.zeros(n)), om, RandomSource(1), EvaluationLedger())
    assert out.evals_used == 1 and out.improved


def test_static_hmp_fcm_first_step_improvement_rate():
    n, calls = 10, 2 * 10**5
    x = BitString.from_str("1111111000")
    _, h = hist(OneMax(n), OperatorKind.STATIC_HMP_FCM, x, calls)
    assert within_3_sigma(h[1], calls, 3 / 10)


def _random_landscape(n, seed):
    table = RandomSource(seed).bits(2**n * 8).reshape(-1, 8) @ (2.0 ** -np.arange(1, 9))

    def f(y):
        return float(table[int("".join(map(str, y.bits)), 2)])
    return f


@pytest.mark.parametrize("kind", [OperatorKind.FCM_GAMMA, OperatorKind.FCM_BETA, OperatorKind.STATIC_HMP_FCM])
@given(seed=st.integers(0, 10**6), maximise=st.booleans())
def test_fcm_stops_at_first_strict_improvement(kind, seed, maximise):
    n = 7
    f = _random_landscape(n, seed % 50)
    seen = []

    def spy(y):
        v = f(y)
        seen.append((y, v))
        return v

    prob = FunctionProblem(n, spy, maximise=maximise)
    op = OperatorConfig(kind, gamma=0.6).build(n)
    rng = RandomSource(seed)
    x = BitString.random(n, rng)
    parent = Individual(x, f(x), 0)
    better = (lambda a, b: a > b) if maximise else (lambda a, b: a < b)
    for _ in range(20):
        seen.clear()
        ledger = EvaluationLedger()
        out = op(parent, prob, rng, ledger)
        assert out.evals_used == len(seen) == ledger.count
        if not out.evaluated:
            assert not seen and out.offspring.genotype == x
            continue
        assert out.offspring.genotype == seen[-1][0] and out.offspring.fitness == seen[-1][1]
        assert not any(better(v, parent.fitness) for _, v in seen[:-1])
        assert out.improved == better(seen[-1][1], parent.fitness)


def test_walk_budget_exhaustion_carries_partial_outcome():
    n = 8
    om = OneMax(n)
    parent = parent_of(om, BitString.ones(n))
    with pytest.raises(BudgetExhausted) as info:
        static_hmp_fcm(parent, om, RandomSource(0), EvaluationLedger(3))
    part = info.value.outcome
    assert part.evaluated and part.evals_used == 3 and hamming(part.offspring.genotype, parent.genotype) == 3
    with pytest.raises(BudgetExhausted) as info:
        static_hmp_fcm(parent, om, RandomSource(0), EvaluationLedger(1, count=1))
    assert not info.value.outcome.evaluated


# ---------------------------------------------------------------------------
# single-evaluation operators


def test_hmp_beta_forced_sizes():
    n = 9
    om = OneMax(n)
    x = BitString.from_str("101100111")
    px = parent_of(om, x)
    out = hmp_beta(px, om, degenerate(n, 0), RandomSource(0), EvaluationLedger())
    assert out.offspring.genotype == x and out.evals_used == 1 and out.evaluated
    out = hmp_beta(px, om, degenerate(n, n), RandomSource(0), EvaluationLedger())
    assert out.offspring.genotype == x.complement()


def test_hmp_beta_n2_distance_frequencies():
    calls = 10**6
    _, h = hist(ConstantProblem(2), OperatorKind.HMP_BETA, BitString.zeros(2), calls, beta=1.0)
    for d, p in enumerate([0.4, 0.2, 0.4]):
        assert within_3_sigma(h[d], calls, p)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=30).map(BitString))
def test_static_hmp_plain(x):
    om = OneMax(len(x))
    ledger = EvaluationLedger()
    out = static_hmp_plain(parent_of(om, x), om, RandomSource(0), ledger)
    assert out.offspring.genotype == x.complement() and out.evals_used == 1 == ledger.count
    back = static_hmp_plain(out.offspring, om, RandomSource(0), ledger)
    assert back.offspring.genotype == x


def test_sbm_extreme_rates():
    x = BitString.from_str("0110100111")
    om = OneMax(len(x))
    px = parent_of(om, x)
    out = sbm(px, om, 0.0, RandomSource(2), EvaluationLedger())
    assert out.offspring.genotype == x and out.evals_used == 1
    out = sbm(px, om, 1.0, RandomSource(2), EvaluationLedger())
    assert out.offspring.genotype == x.complement()


def test_sbm_mean_flips():
    n, calls = 100, 10**6
    _, h = hist(ConstantProblem(n), OperatorKind.SBM, BitString.zeros(n), calls)
    mean = (np.arange(n + 2) * h)[: n + 1].sum() / calls
    sigma = math.sqrt(n * (1 / n) * (1 - 1 / n) / calls)
    assert abs(mean - 1) <= 3 * sigma
    assert chi2_pvalue(h[: n + 1], np.array([math.comb(n, k) * (1 / n) ** k * (1 - 1 / n) ** (n - k)
                                              for k in range(n + 1)])) > ALPHA


def test_rls_flip_positions_uniform():
    n, calls = 10, 10**6
    x = BitString.zeros(n)
    counts = np.zeros(n)
    prob = FunctionProblem(n, lambda y: 0.0)
    parent = Individual(x, 0.0, 0)
    rng, ledger = RandomSource(8), EvaluationLedger()
    for _ in range(calls):
        y = rls_flip(parent, prob, rng, ledger).offspring.genotype
        counts[int(np.flatnonzero(y.bits)[0])] += 1
    assert ledger.count == calls
    assert chi2_pvalue(counts, np.full(n, 1 / n)) > ALPHA


def test_rls_flip_distance_one():
    _, h = hist(ConstantProblem(20), OperatorKind.RLS_FLIP, BitString.zeros(20), 10**4)
    assert h[1] == 10**4


def test_ea_beta_exact_forced_full_size_is_complement():
    n = 8
    om = OneMax(n)
    x = BitString.from_str("11010010")
    out = ea_beta_mutation(parent_of(om, x), om, degenerate(n, n), "exact", RandomSource(1), EvaluationLedger())
    assert out.offspring.genotype == x.complement()
    with pytest.raises(ConfigError):
        ea_beta_mutation(parent_of(om, x), om, degenerate(n, 1), "bogus", RandomSource(1), EvaluationLedger())


def test_ea_beta_rate_mode_never_complements():
    n, calls = 40, 10**6
    _, h = hist(ConstantProblem(n), OperatorKind.EA_BETA, BitString.zeros(n), calls, mode="rate")
    assert h[n] == 0 and h.sum() == calls


@pytest.mark.parametrize("extended", [False, True])
def test_ea_beta_exact_sizes_follow_table(extended):
    n, calls = 20, 2 * 10**5
    _, h = hist(ConstantProblem(n), OperatorKind.EA_BETA, BitString.zeros(n), calls, mode="exact",
                extended=extended)
    p = np.zeros(n + 1)
    d = build_powerlaw_rate(n, 1.5, extended)
    p[: d.upper + 1] = d.p
    assert chi2_pvalue(h[: n + 1], p) > ALPHA


def test_ea_unif_examples():
    n = 12
    om = OneMax(n)
    x = BitString.zeros(n)
    out = ea_unif_mutation(parent_of(om, x), om, degenerate(n, 1), RandomSource(0), EvaluationLedger())
    assert hamming(out.offspring.genotype, x) == 1
    calls = 10**6
    _, h = hist(ConstantProblem(n), OperatorKind.EA_UNIF, x, calls)
    dist = build_uniform_tail(n, E)
    assert within_3_sigma(h[n], calls, (1 - E) / (n - 1))
    assert chi2_pvalue(h[: n + 1], dist.p) > ALPHA


# ---------------------------------------------------------------------------
# cross-cutting properties


@pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.value)
def test_unbiased_distance_histograms(kind):
    n, calls = 12, 10**5
    rng = RandomSource(5, ALL_KINDS.index(kind))
    x = BitString.random(n, rng)
    sigma = rng.permutation(n)
    xs = BitString(x.bits[sigma])
    _, h1 = hist(OneMax(n), kind, x, calls, seed=1)
    _, h2 = hist(OneMax(n), kind, xs, calls, seed=2)
    table = np.array([h1, h2])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] > 1:
        assert chi2_contingency(table).pvalue > ALPHA


@pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.value)
def test_unbiased_under_relabelled_positions(kind):
    # offspring of sigma(x) on LeadingOnes∘sigma^-1, mapped back, match offspring of x on LeadingOnes
    n, calls = 5, 20000
    lo = LeadingOnes(n)
    rng = RandomSource(9, ALL_KINDS.index(kind))
    x = BitString.random(n, rng)
    sigma = rng.permutation(n)
    inv = np.argsort(sigma)
    prob_s = FunctionProblem(n, lambda y: lo.evaluate(BitString(y.bits[inv])))
    op = OperatorConfig(kind, gamma=0.5).build(n)
    counts = np.zeros((2, 2**n + 1))
    for row, (prob, parent, back) in enumerate([(lo, x, None), (prob_s, BitString(x.bits[sigma]), inv)]):
        par = Individual(parent, prob.evaluate(parent), 0)
        r, ledger = RandomSource(row + 11), EvaluationLedger()
        for _ in range(calls):
            out = op(par, prob, r, ledger)
            if not out.evaluated:
                counts[row, -1] += 1
                continue
            y = out.offspring.genotype.bits
            if back is not None:
                y = y[back]
            counts[row, int("".join(map(str, y)), 2)] += 1
    table = counts[:, counts.sum(axis=0) > 0]
    if table.shape[1] > 1:
        assert chi2_contingency(table).pvalue > ALPHA


@pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.value)
def test_ledger_exactness_per_call(kind):
    n = 10
    prob = Counting(OneMax(n))
    op = OperatorConfig(kind).build(n)
    rng = RandomSource(3)
    ledger = EvaluationLedger()
    used = 0
    for _ in range(500):
        x = BitString.random(n, rng)
        parent = Individual(x, OneMax(n).evaluate(x), 0)
        before = ledger.count
        out = op(parent, prob, rng, ledger)
        assert out.evals_used == ledger.count - before
        assert not out.improved or (out.evaluated and out.offspring.fitness > parent.fitness)
        if not out.evaluated:
            assert out.evals_used == 0 and out.offspring.genotype == x
        used += out.evals_used
    assert used == ledger.count == prob.calls


def test_operator_config_validation():
    with pytest.raises(ConfigError):
        OperatorConfig(OperatorKind.FCM_GAMMA, gamma=2.0).build(10)
    with pytest.raises(ConfigError):
        OperatorConfig(OperatorKind.EA_BETA, beta=1.0).build(10)
    with pytest.raises(ConfigError):
        OperatorConfig(OperatorKind.SBM, rate=1.5).build(10)
    assert OperatorConfig(OperatorKind.FCM_GAMMA).resolved_gamma(100) == 1 / math.log(100)
