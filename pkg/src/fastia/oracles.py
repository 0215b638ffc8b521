"""Exact reference values that the Monte-Carlo checks are compared against."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import comb

from .distributions import build_parabolic


def rls_onemax_expected_evaluations(n: int) -> float:
    """Expected evaluations of the elitist RLS on OneMax from a uniform start.

    Solves the absorbing chain over the unitation levels 0..n: from level i a
    single flip moves to i + 1 with probability (n - i)/n and is otherwise
    rejected.  The initial evaluation is included.
    """
    q = np.zeros((n, n))
    for i in range(n):
        q[i, i] = i / n
        if i + 1 < n:
            q[i, i + 1] = (n - i) / n
    steps = np.linalg.solve(np.eye(n) - q, np.ones(n))
    start = np.array([comb(n, i, exact=True) for i in range(n + 1)], dtype=float) / 2.0**n
    return 1.0 + float(start[:n] @ steps)


def flat_walk_evaluations(p: np.ndarray) -> float:
    """Mean evaluations of a sequential walk that never finds an improvement."""
    return float(np.sum(p[1:]))


def parabolic_expected_evaluations(n: int, gamma: float) -> float:
    """Exact mean evaluations per FCM_gamma call on a constant objective."""
    return flat_walk_evaluations(build_parabolic(n, gamma).p)


def parabolic_harmonic_sum(n: int, gamma: float) -> float:
    """The closed form 2/e + 2 gamma sum_{i=2}^{n/2} 1/i.

    It leaves out the asymmetric term at step n - 1 (probability gamma, and
    gamma/((n-1)/2)-style terms for odd n); see
    :func:`parabolic_expected_evaluations` for the exact table sum.
    """
    h = math.fsum(1.0 / i for i in range(2, n // 2 + 1))
    return 2.0 / math.e + 2.0 * gamma * h


def no_evaluation_probability(p: np.ndarray) -> float:
    return float(np.prod(1.0 - p[1:]))


def survivors_pmf(m: int, p_die: float) -> np.ndarray:
    """Distribution of survivors when m members all face removal with p_die."""
    k = np.arange(m + 1)
    return comb(m, k) * (1.0 - p_die) ** k * p_die ** (m - k)
