"""Acceptance criteria A1-A11 plus the soft HiddenPath check.

Each test runs its experiment at full size, prints one PASS/FAIL line and
asserts the verdict.  The lines are repeated in the terminal summary.
"""
import re
import subprocess
import sys
import time
from pathlib import Path

import pytest

from fastia.experiments import run_experiment

from helpers import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow

HERE = Path(__file__).parent
PROPERTY_SUITES = ["test_core.py", "test_distributions.py", "test_operators.py", "test_algorithms.py",
                   "test_problems.py", "test_kernels.py", "test_harness.py"]


def _report(line):
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.mark.parametrize("key", ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10", "HP"])
def test_criterion(key):
    out = run_experiment(key)
    _report(out.line())
    assert out.passed, out.line()


def test_a11_property_suites():
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           *[str(HERE / f) for f in PROPERTY_SUITES]],
                          capture_output=True, text=True, cwd=HERE.parent, check=False)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-300:]
    counts = re.sub(r"\s+in [\d.]+s.*", "", tail.strip("= "))
    status = "PASS" if proc.returncode == 0 else "FAIL"
    _report(f"A11 {status} property suites ({time.perf_counter() - t0:.0f}s) | {counts}")
    assert proc.returncode == 0, proc.stdout[-3000:]
