"""Genotypes, evaluation accounting and the shared random stream.

Every stochastic decision in the package is drawn from :class:`RandomSource`,
a counter-based generator whose primitives are compiled with numba so that the
reference (pure Python) engines and the compiled kernels consume one and the
same sequence of numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# random stream primitives
# ---------------------------------------------------------------------------

_U = np.uint64
_GOLDEN = _U(0x9E3779B97F4A7C15)
_M1 = _U(0xBF58476D1CE4E5B9)
_M2 = _U(0x94D049BB133111EB)
_S30 = _U(30)
_S27 = _U(27)
_S31 = _U(31)
_S11 = _U(11)
_ONE = _U(1)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def next_u64(state):
    # state = [base, gamma, counter]; output k is a pure function of (base, gamma, k)
    state[2] += _ONE
    return _mix64(state[0] + state[2] * state[1])


@njit(cache=True)
def next_double(state):
    return float(next_u64(state) >> _S11) * _INV53


@njit(cache=True)
def randbelow(state, k):
    r = int(next_double(state) * k)
    if r >= k:
        r = k - 1
    return r


@njit(cache=True)
def exp1(state):
    return -math.log(1.0 - next_double(state))


def _stream_state(seed: int, stream: int) -> np.ndarray:
    mask = (1 << 64) - 1

    def mix(z: int) -> int:
        z &= mask
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        return z ^ (z >> 31)

    base = mix(mix(seed + 0x9E3779B97F4A7C15) ^ mix(stream * 0xD1B54A32D192ED03 + 1))
    gamma = mix(stream + 0x632BE59BD9B4E019 + mix(seed)) | 1
    # low-entropy increments make poor Weyl sequences
    if bin(gamma ^ (gamma >> 1)).count("1") < 24:
        gamma ^= 0xAAAAAAAAAAAAAAAA
    return np.array([base, gamma, 0], dtype=np.uint64)


class RandomSource:
    """Deterministic random stream identified by ``(seed, stream)``.

    Value ``k`` of the stream is a fixed hash of ``(seed, stream, k)``, so the
    same pair reproduces the same sequence on every platform, and different
    stream ids give independent streams.
    """

    def __init__(self, seed: int = 0, stream: int = 0):
        if not (0 <= seed < 2**64 and 0 <= stream < 2**64):
            raise ValueError("seed and stream must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream = int(stream)
        self.state = _stream_state(self.seed, self.stream)

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, stream={self.stream}, drawn={int(self.state[2])})"

    @property
    def position(self) -> int:
        return int(self.state[2])

    def u64(self) -> int:
        return int(next_u64(self.state))

    def random(self) -> float:
        return next_double(self.state)

    def integers(self, k: int) -> int:
        """Uniform integer in ``[0, k)``."""
        return randbelow(self.state, k)

    def exponential(self) -> float:
        return exp1(self.state)

    def bits(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint8)
        _fill_bits(self.state, out)
        return out

    def permutation(self, n: int) -> np.ndarray:
        return sample_flip_order(n, self)


@njit(cache=True)
def _fill_bits(state, out):
    n = out.shape[0]
    w = _U(0)
    for i in range(n):
        if i % 64 == 0:
            w = next_u64(state)
        out[i] = np.uint8(w & _ONE)
        w = w >> _ONE


@njit(cache=True)
def _fisher_yates(state, perm):
    n = perm.shape[0]
    for j in range(n - 1):
        r = j + randbelow(state, n - j)
        t = perm[j]
        perm[j] = perm[r]
        perm[r] = t


# ---------------------------------------------------------------------------
# genotypes
# ---------------------------------------------------------------------------


class BitString:
    """Immutable fixed-length binary string backed by a read-only uint8 array."""

    __slots__ = ("_bits",)

    def __init__(self, bits):
        arr = np.array(bits, dtype=np.uint8).reshape(-1)
        if arr.size and arr.max() > 1:
            raise ValueError("bits must be 0 or 1")
        arr.setflags(write=False)
        self._bits = arr

    @classmethod
    def from_str(cls, text: str) -> "BitString":
        return cls([int(c) for c in text.strip()])

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls(np.zeros(n, dtype=np.uint8))

    @classmethod
    def ones(cls, n: int) -> "BitString":
        return cls(np.ones(n, dtype=np.uint8))

    @classmethod
    def random(cls, n: int, rng: RandomSource) -> "BitString":
        return cls(rng.bits(n))

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    def __len__(self) -> int:
        return self._bits.shape[0]

    def __getitem__(self, i):
        return int(self._bits[i])

    def __iter__(self):
        return (int(b) for b in self._bits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return np.array_equal(self._bits, other._bits)

    def __hash__(self) -> int:
        return hash(self._bits.tobytes())

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self._bits)

    def __repr__(self) -> str:
        return f"BitString('{self}')"

    def ones_count(self) -> int:
        return int(self._bits.sum(dtype=np.int64))

    def zeros_count(self) -> int:
        return len(self) - self.ones_count()

    def complement(self) -> "BitString":
        return BitString(1 - self._bits)

    def flipped(self, positions) -> "BitString":
        arr = self._bits.copy()
        idx = np.asarray(positions, dtype=np.int64)
        arr[idx] ^= 1
        return BitString(arr)


def flip_bit(x: BitString, i: int) -> BitString:
    n = len(x)
    if not 0 <= i < n:
        raise IndexError(f"position {i} out of range for length {n}")
    arr = x.bits.copy()
    arr[i] ^= 1
    return BitString(arr)


def hamming(x: BitString, y: BitString) -> int:
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} != {len(y)}")
    return int(np.count_nonzero(x.bits != y.bits))


def sample_flip_order(n: int, rng: RandomSource) -> np.ndarray:
    """Uniformly random permutation of ``range(n)`` (Fisher-Yates)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    perm = np.arange(n, dtype=np.int64)
    _fisher_yates(rng.state, perm)
    return perm


# ---------------------------------------------------------------------------
# individuals and evaluation accounting
# ---------------------------------------------------------------------------


@dataclass
class Individual:
    genotype: BitString
    fitness: float
    age: int = 0

    def copy(self) -> "Individual":
        return Individual(self.genotype, self.fitness, self.age)


class BudgetExhausted(Exception):
    """Raised when an evaluation is requested after the budget is spent.

    ``outcome`` carries whatever partial result the interrupted operation had
    produced (operators attach their partial :class:`MutationOutcome`).
    """

    def __init__(self, count: int, outcome=None):
        super().__init__(f"evaluation budget exhausted after {count} evaluations")
        self.count = count
        self.outcome = outcome


class TargetReached(Exception):
    """Raised by an evaluation observer to stop a run at the first target hit."""

    def __init__(self, count: int):
        super().__init__(f"target reached at evaluation {count}")
        self.count = count


@dataclass
class EvaluationLedger:
    """Counts objective calls and enforces the evaluation budget.

    ``observer(genotype, fitness, count)`` is called after every evaluation; the
    engines use it to track the best point and to stop on the target.
    """

    budget: Optional[int] = None
    count: int = 0
    observer: Optional[Callable[[BitString, float, int], None]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.budget is not None and self.budget < 1:
            raise ValueError("budget must be positive or None")

    @property
    def remaining(self) -> float:
        return math.inf if self.budget is None else self.budget - self.count

    def evaluate(self, problem, x: BitString) -> float:
        if self.budget is not None and self.count >= self.budget:
            raise BudgetExhausted(self.count)
        f = problem.evaluate(x)
        self.count += 1
        if self.observer is not None:
            self.observer(x, f, self.count)
        return f
