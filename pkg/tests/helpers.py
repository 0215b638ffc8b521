"""Statistical helpers and a call-counting problem wrapper shared by the tests."""
import numpy as np
from scipy import stats

from fastia.problems import FunctionProblem

ALPHA = 0.001

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def chi2_pvalue(observed, probs) -> float:
    """Goodness-of-fit p-value; bins with small expectation are pooled.

    Mass observed where the model puts probability zero fails outright.
    """
    observed = np.asarray(observed, dtype=float)
    probs = np.asarray(probs, dtype=float)
    assert observed.shape == probs.shape
    if observed[probs == 0].sum() > 0:
        return 0.0
    expected = probs * observed.sum()
    keep = expected >= 5
    obs, exp = list(observed[keep]), list(expected[keep])
    rest = (~keep) & (probs > 0)
    if rest.any():
        obs.append(observed[rest].sum())
        exp.append(expected[rest].sum())
    obs, exp = np.array(obs), np.array(exp)
    return float(stats.chisquare(obs, exp * obs.sum() / exp.sum()).pvalue)


def within_3_sigma(count, trials, p) -> bool:
    sigma = np.sqrt(trials * p * (1 - p))
    return abs(count - trials * p) <= 3 * sigma + 1e-9


class Counting(FunctionProblem):
    """Wraps a problem and counts every call to ``evaluate``."""

    def __init__(self, inner):
        super().__init__(inner.n, inner.evaluate, inner.maximise, inner.is_target, "counting")
        self.inner = inner
        self.calls = 0

    def evaluate(self, x):
        self.calls += 1
        return self.inner.evaluate(x)
