"""Objective functions, instances and target predicates.

Every built-in problem is a :class:`Problem` with a pure ``evaluate`` method.
Built-ins additionally describe themselves to the compiled kernels through
:meth:`Problem.kernel_spec`; user-defined problems simply return ``None`` and
run on the reference engines.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Optional

import numpy as np

from .core import BitString
from .distributions import ConfigError

log = logging.getLogger(__name__)

TARGET_TOL = 1e-9

# kernel problem codes
K_CONST, K_ONEMAX, K_LEADINGONES, K_TRAP, K_JUMP, K_CLIFF, K_HIDDENPATH, K_PARTITION, K_VC_NODE, K_VC_EDGE = range(10)


class KernelProblem(NamedTuple):
    kind: int
    n: int
    sign: float
    ip: np.ndarray
    fp: np.ndarray
    w: np.ndarray
    adj_ptr: np.ndarray
    adj_nbr: np.ndarray
    adj_edge: np.ndarray
    eu: np.ndarray
    ev: np.ndarray


def _kspec(kind, n, sign=1.0, ip=(), fp=(), w=None, graph=None):
    ip_a = np.zeros(8, dtype=np.int64)
    ip_a[: len(ip)] = ip
    fp_a = np.zeros(4)
    fp_a[: len(fp)] = fp
    w_a = np.zeros(1) if w is None else np.array(w, dtype=float)  # writable copy
    if graph is None:
        empty = np.zeros(1, dtype=np.int64)
        return KernelProblem(kind, n, sign, ip_a, fp_a, w_a, empty, empty, empty, empty, empty)
    ptr, nbr, eid = graph.incidence()
    return KernelProblem(kind, n, sign, ip_a, fp_a, w_a, ptr, nbr, eid, graph.eu, graph.ev)


# ---------------------------------------------------------------------------
# benchmark functions
# ---------------------------------------------------------------------------


def _arr(x) -> np.ndarray:
    return x.bits if isinstance(x, BitString) else np.asarray(x, dtype=np.uint8)


def onemax(x) -> float:
    return float(_arr(x).sum(dtype=np.int64))


def leadingones(x) -> float:
    b = _arr(x)
    zeros = np.flatnonzero(b == 0)
    return float(zeros[0] if zeros.size else b.shape[0])


def trap(x) -> float:
    b = _arr(x)
    ones = int(b.sum(dtype=np.int64))
    return float(b.shape[0] + 1) if ones == 0 else float(ones)


def jump(x, d: int) -> float:
    b = _arr(x)
    n = b.shape[0]
    ones = int(b.sum(dtype=np.int64))
    if ones <= n - d or ones == n:
        return float(d + ones)
    return float(n - ones)


def cliff(x, d: int) -> float:
    b = _arr(x)
    n = b.shape[0]
    ones = int(b.sum(dtype=np.int64))
    if ones <= n - d:
        return float(ones)
    return ones - d + 0.5


def hiddenpath_log(n: int) -> int:
    lg = int(round(math.log2(n))) if n > 0 else 0
    if n < 32 or 2**lg != n:
        raise ConfigError(f"HiddenPath needs n a power of two >= 32, got {n}")
    return lg


def hiddenpath(x, eps: float = 0.5) -> float:
    b = _arr(x)
    n = b.shape[0]
    lg = hiddenpath_log(n)
    zeros = n - int(b.sum(dtype=np.int64))
    on_path = 5 <= zeros <= lg + 1 and not b[n - zeros:].any()
    if zeros == 5 and not on_path:
        return n - eps + int((b[n - 5:] == 0).sum()) / n
    if zeros < 5 or zeros == n:
        return 0.0
    if on_path:
        return n - eps + eps * zeros / lg
    if zeros == n - 1:
        return float(n)
    return float(zeros)


# ---------------------------------------------------------------------------
# Problem objects
# ---------------------------------------------------------------------------


class Problem:
    """Objective interface: ``evaluate``, direction, target predicate, dimension."""

    name = "problem"
    maximise = True

    def __init__(self, n: int):
        if n < 1:
            raise ConfigError(f"dimension must be >= 1, got {n}")
        self.n = int(n)

    @property
    def direction(self) -> str:
        return "maximise" if self.maximise else "minimise"

    @property
    def sign(self) -> float:
        return 1.0 if self.maximise else -1.0

    def params(self) -> dict:
        return {}

    @property
    def descriptor(self) -> str:
        extra = ",".join(f"{k}={v}" for k, v in sorted(self.params().items()))
        return f"{self.name}(n={self.n}{',' + extra if extra else ''})"

    def evaluate(self, x: BitString) -> float:
        raise NotImplementedError

    def is_target(self, x: BitString, fitness: float) -> bool:
        return False

    def kernel_spec(self) -> Optional[KernelProblem]:
        return None

    def __repr__(self) -> str:
        return self.descriptor


class ConstantProblem(Problem):
    name = "constant"

    def __init__(self, n: int, value: float = 0.0):
        super().__init__(n)
        self.value = float(value)

    def evaluate(self, x):
        return self.value

    def kernel_spec(self):
        return _kspec(K_CONST, self.n, fp=(self.value,))


class FunctionProblem(Problem):
    """Wrap an arbitrary callable; always runs on the reference engines."""

    def __init__(self, n: int, fn: Callable[[BitString], float], maximise: bool = True,
                 target: Optional[Callable[[BitString, float], bool]] = None, name: str = "custom"):
        super().__init__(n)
        self.fn = fn
        self.maximise = maximise
        self.target = target
        self.name = name

    def evaluate(self, x):
        return float(self.fn(x))

    def is_target(self, x, fitness):
        return bool(self.target(x, fitness)) if self.target else False


class OneMax(Problem):
    name = "onemax"

    def evaluate(self, x):
        return onemax(x)

    def is_target(self, x, fitness):
        return fitness == self.n

    def kernel_spec(self):
        return _kspec(K_ONEMAX, self.n)


class LeadingOnes(Problem):
    name = "leadingones"

    def evaluate(self, x):
        return leadingones(x)

    def is_target(self, x, fitness):
        return fitness == self.n

    def kernel_spec(self):
        return _kspec(K_LEADINGONES, self.n)


class Trap(Problem):
    name = "trap"

    def evaluate(self, x):
        return trap(x)

    def is_target(self, x, fitness):
        return fitness == self.n + 1

    def kernel_spec(self):
        return _kspec(K_TRAP, self.n)


class Jump(Problem):
    name = "jump"

    def __init__(self, n: int, d: int):
        super().__init__(n)
        if not 1 <= d < n:
            raise ConfigError(f"jump gap d must satisfy 1 <= d < n, got d={d}, n={n}")
        self.d = int(d)

    def params(self):
        return {"d": self.d}

    def evaluate(self, x):
        return jump(x, self.d)

    def is_target(self, x, fitness):
        return fitness == self.n + self.d

    def kernel_spec(self):
        return _kspec(K_JUMP, self.n, ip=(self.d,))


class Cliff(Problem):
    name = "cliff"

    def __init__(self, n: int, d: int):
        super().__init__(n)
        if not 1 <= d < n:
            raise ConfigError(f"cliff gap d must satisfy 1 <= d < n, got d={d}, n={n}")
        self.d = int(d)

    def params(self):
        return {"d": self.d}

    def evaluate(self, x):
        return cliff(x, self.d)

    def is_target(self, x, fitness):
        return fitness == self.n - self.d + 0.5

    def kernel_spec(self):
        return _kspec(K_CLIFF, self.n, ip=(self.d,))


class HiddenPath(Problem):
    name = "hiddenpath"

    def __init__(self, n: int, eps: float = 0.5):
        super().__init__(n)
        self.log_n = hiddenpath_log(n)
        if not 0.0 < eps < 1.0:
            raise ConfigError(f"HiddenPath eps must lie in (0, 1), got {eps}")
        self.eps = float(eps)

    def params(self):
        return {"eps": self.eps}

    @property
    def optimum_value(self) -> float:
        k = self.log_n + 1
        return self.n - self.eps + self.eps * k / self.log_n

    def optimum(self) -> BitString:
        k = self.log_n + 1
        return BitString([1] * (self.n - k) + [0] * k)

    def evaluate(self, x):
        return hiddenpath(x, self.eps)

    def is_target(self, x, fitness):
        return fitness == self.optimum_value

    def kernel_spec(self):
        return _kspec(K_HIDDENPATH, self.n, ip=(0, self.log_n), fp=(self.eps,))


# ---------------------------------------------------------------------------
# Partition
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PartitionInstance:
    weights: np.ndarray
    name: str = "partition"
    known_opt: Optional[float] = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1 or (w <= 0).any():
            raise ConfigError("partition weights must be a non-empty list of positive numbers")
        if (np.diff(w) > 0).any():
            log.warning("partition weights not in non-increasing order; sorting")
            w = np.sort(w)[::-1].copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def total(self) -> float:
        return float(math.fsum(self.weights))

    @property
    def opt_lower_bound(self) -> float:
        return max(float(self.weights[0]), self.total / 2)

    @property
    def opt_reference(self) -> float:
        return self.known_opt if self.known_opt is not None else self.opt_lower_bound


def make_w_eps(n: int, eps: float) -> PartitionInstance:
    """Worst-case instance for the (1+1) EA: two large jobs, n - 2 equal small ones."""
    if n < 4:
        raise ConfigError(f"W_eps needs n >= 4, got {n}")
    if not 0.0 < eps < 1.0 / 3.0:
        raise ConfigError(f"W_eps needs 0 < eps < 1/3, got {eps}")
    large = 1.0 / 3.0 - eps / 4.0
    small = (1.0 / 3.0 + eps / 2.0) / (n - 2)
    w = np.array([large, large] + [small] * (n - 2))
    return PartitionInstance(w, name=f"w_eps(n={n},eps={eps})", known_opt=0.5)


def _loads(b: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    # sequential sums in index order; the kernels reproduce the same rounding
    l1 = 0.0
    l0 = 0.0
    for bit, wi in zip(b.tolist(), w.tolist()):
        if bit:
            l1 += wi
        else:
            l0 += wi
    return l1, l0


def partition_makespan(x, instance: PartitionInstance) -> float:
    l1, l0 = _loads(_arr(x), instance.weights)
    return max(l1, l0)


def partition_target(fitness: float, instance: PartitionInstance, eps_approx: float = 0.0) -> bool:
    return fitness <= (1.0 + eps_approx) * instance.opt_reference + TARGET_TOL


def load_partition(path) -> PartitionInstance:
    values = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from exc
    return PartitionInstance(np.array(values), name=Path(path).stem)


def save_partition(instance: PartitionInstance, path) -> None:
    Path(path).write_text("".join(f"{w!r}\n" for w in instance.weights.tolist()))


class Partition(Problem):
    name = "partition"
    maximise = False

    def __init__(self, instance: PartitionInstance, eps_approx: float = 0.0):
        super().__init__(instance.n)
        self.instance = instance
        self.eps_approx = float(eps_approx)

    def params(self):
        return {"instance": self.instance.name, "eps_approx": self.eps_approx}

    @property
    def threshold(self) -> float:
        return (1.0 + self.eps_approx) * self.instance.opt_reference + TARGET_TOL

    def evaluate(self, x):
        return partition_makespan(x, self.instance)

    def is_target(self, x, fitness):
        return partition_target(fitness, self.instance, self.eps_approx)

    def kernel_spec(self):
        return _kspec(K_PARTITION, self.n, sign=-1.0, fp=(self.threshold,), w=self.instance.weights)


# ---------------------------------------------------------------------------
# graphs and vertex cover
# ---------------------------------------------------------------------------


class GraphParseError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph on vertices 0..n_vertices-1."""

    n_vertices: int
    edges: tuple = field(default=())

    def __post_init__(self):
        seen = set()
        norm = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise ValueError(f"edge ({u}, {v}) out of range")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            norm.append(key)
        object.__setattr__(self, "edges", tuple(norm))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def eu(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges], dtype=np.int64).reshape(-1) if self.edges else np.zeros(0, np.int64)

    @property
    def ev(self) -> np.ndarray:
        return np.array([e[1] for e in self.edges], dtype=np.int64).reshape(-1) if self.edges else np.zeros(0, np.int64)

    def __eq__(self, other):
        return isinstance(other, Graph) and self.n_vertices == other.n_vertices and set(self.edges) == set(other.edges)

    def __hash__(self):
        return hash((self.n_vertices, frozenset(self.edges)))

    def neighbours(self, v: int) -> list[int]:
        return [b if a == v else a for a, b in self.edges if v in (a, b)]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_vertices, self.n_vertices), dtype=np.uint8)
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1
        return a

    def incidence(self):
        """CSR incidence: for vertex v, ``nbr[ptr[v]:ptr[v+1]]`` and matching edge ids."""
        deg = np.zeros(self.n_vertices + 1, dtype=np.int64)
        for u, v in self.edges:
            deg[u + 1] += 1
            deg[v + 1] += 1
        ptr = np.cumsum(deg)
        nbr = np.zeros(max(1, 2 * self.m), dtype=np.int64)
        eid = np.zeros(max(1, 2 * self.m), dtype=np.int64)
        fill = ptr[:-1].copy()
        for e, (u, v) in enumerate(self.edges):
            nbr[fill[u]], eid[fill[u]] = v, e
            fill[u] += 1
            nbr[fill[v]], eid[fill[v]] = u, e
            fill[v] += 1
        return ptr, nbr, eid


def parse_graph(text: str) -> Graph:
    """Parse the DIMACS edge format (``p edge N M`` header, 1-indexed ``e u v`` lines)."""
    n = m = None
    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        parts = line.split()
        if parts[0] == "p":
            if n is not None:
                raise GraphParseError(f"line {lineno}: duplicate problem line")
            if len(parts) != 4 or parts[1] not in ("edge", "col"):
                raise GraphParseError(f"line {lineno}: malformed header {line!r}")
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise GraphParseError(f"line {lineno}: malformed header {line!r}") from None
            if n < 0 or m < 0:
                raise GraphParseError(f"line {lineno}: negative counts in header")
        elif parts[0] == "e":
            if n is None:
                raise GraphParseError(f"line {lineno}: edge before header")
            if len(parts) != 3:
                raise GraphParseError(f"line {lineno}: malformed edge line {line!r}")
            try:
                u, v = int(parts[1]), int(parts[2])
            except ValueError:
                raise GraphParseError(f"line {lineno}: malformed edge line {line!r}") from None
            if not (1 <= u <= n and 1 <= v <= n):
                raise GraphParseError(f"line {lineno}: vertex out of range 1..{n}")
            if u == v:
                raise GraphParseError(f"line {lineno}: self-loop at vertex {u}")
            key = (min(u, v) - 1, max(u, v) - 1)
            if key in seen:
                raise GraphParseError(f"line {lineno}: duplicate edge {u} {v}")
            seen.add(key)
            edges.append(key)
        else:
            raise GraphParseError(f"line {lineno}: unknown line type {parts[0]!r}")
    if n is None:
        raise GraphParseError("missing 'p edge N M' header")
    if len(edges) != m:
        raise GraphParseError(f"header announces {m} edges, found {len(edges)}")
    return Graph(n, tuple(edges))


def serialise_graph(g: Graph) -> str:
    lines = [f"p edge {g.n_vertices} {g.m}"]
    lines += [f"e {u + 1} {v + 1}" for u, v in g.edges]
    return "\n".join(lines) + "\n"


def load_graph(path) -> Graph:
    return parse_graph(Path(path).read_text())


def generate_graph(kind: str, n: int) -> Graph:
    """Star (vertex 0 is the centre), complete or path graph on ``n`` vertices."""
    if n < 1:
        raise ConfigError(f"graph needs n >= 1, got {n}")
    if kind == "star":
        edges = [(0, i) for i in range(1, n)]
    elif kind == "complete":
        edges = list(combinations(range(n), 2))
    elif kind == "path":
        edges = [(i, i + 1) for i in range(n - 1)]
    else:
        raise ConfigError(f"unknown graph kind {kind!r} (star, complete, path)")
    return Graph(n, tuple(edges))


def vc_node_fitness(x, graph: Graph) -> float:
    b = _arr(x).astype(np.int64)
    n = graph.n_vertices
    out = 1 - b
    a = graph.adjacency().astype(np.int64)
    return float(b.sum() + n * int(out @ a @ out))


def _selected_cover(x_edges, graph: Graph) -> np.ndarray:
    sel = _arr(x_edges)
    cover = np.zeros(graph.n_vertices, dtype=np.uint8)
    for bit, (u, v) in zip(sel.tolist(), graph.edges):
        if bit:
            cover[u] = cover[v] = 1
    return cover


def _adjacent_selected_pairs(x_edges, graph: Graph) -> int:
    chosen = [e for bit, e in zip(_arr(x_edges).tolist(), graph.edges) if bit]
    pairs = 0
    for e, f in combinations(chosen, 2):
        if set(e) & set(f):
            pairs += 2
    return pairs


def vc_edge_fitness(x_edges, graph: Graph) -> float:
    cover = _selected_cover(x_edges, graph)
    penalty = (graph.n_vertices + 1) * (graph.m + 1) * _adjacent_selected_pairs(x_edges, graph)
    return vc_node_fitness(cover, graph) + penalty


def is_cover(vertices, graph: Graph) -> bool:
    b = _arr(vertices)
    return all(b[u] or b[v] for u, v in graph.edges)


def vc_two_approx_target(x_edges, graph: Graph) -> bool:
    if _adjacent_selected_pairs(x_edges, graph):
        return False
    return is_cover(_selected_cover(x_edges, graph), graph)


class VertexCoverNode(Problem):
    name = "vc_node"
    maximise = False

    def __init__(self, graph: Graph):
        super().__init__(graph.n_vertices)
        self.graph = graph
        self._adj = graph.adjacency().astype(np.int64)

    def params(self):
        return {"m": self.graph.m}

    def evaluate(self, x):
        b = _arr(x).astype(np.int64)
        out = 1 - b
        return float(b.sum() + self.n * int(out @ self._adj @ out))

    def is_target(self, x, fitness):
        return is_cover(x, self.graph)

    def kernel_spec(self):
        return _kspec(K_VC_NODE, self.n, sign=-1.0, ip=(0, 0, self.graph.n_vertices, self.graph.m), graph=self.graph)


class VertexCoverEdge(Problem):
    name = "vc_edge"
    maximise = False

    def __init__(self, graph: Graph):
        if graph.m < 1:
            raise ConfigError("edge representation needs at least one edge")
        super().__init__(graph.m)
        self.graph = graph

    def params(self):
        return {"vertices": self.graph.n_vertices}

    def evaluate(self, x):
        return vc_edge_fitness(x, self.graph)

    def is_target(self, x, fitness):
        return vc_two_approx_target(x, self.graph)

    def kernel_spec(self):
        return _kspec(K_VC_EDGE, self.n, sign=-1.0, ip=(0, 0, self.graph.n_vertices, self.graph.m), graph=self.graph)


def minimum_cover_size(graph: Graph) -> int:
    """Exact minimum vertex cover by enumeration (small graphs only)."""
    n = graph.n_vertices
    if n > 20:
        raise ValueError("exhaustive minimum cover limited to 20 vertices")
    for size in range(n + 1):
        for chosen in combinations(range(n), size):
            s = set(chosen)
            if all(u in s or v in s for u, v in graph.edges):
                return size
    return n


# ---------------------------------------------------------------------------
# registry used by configs and the CLI
# ---------------------------------------------------------------------------

PROBLEM_NAMES = ("onemax", "leadingones", "trap", "jump", "cliff", "hiddenpath",
                 "partition", "vc-node", "vc-edge", "constant")


def make_problem(name: str, n: int, *, d: Optional[int] = None, eps: Optional[float] = None,
                 instance: Optional[PartitionInstance] = None, eps_approx: float = 0.0,
                 graph: Optional[Graph] = None, graph_kind: str = "star") -> Problem:
    name = name.lower().replace("_", "-")
    if name == "onemax":
        return OneMax(n)
    if name == "leadingones":
        return LeadingOnes(n)
    if name == "trap":
        return Trap(n)
    if name in ("jump", "cliff"):
        if d is None:
            raise ConfigError(f"{name} needs the gap parameter d")
        return (Jump if name == "jump" else Cliff)(n, int(d))
    if name == "hiddenpath":
        return HiddenPath(n, 0.5 if eps is None else eps)
    if name == "partition":
        if instance is None:
            instance = make_w_eps(n, 0.2 if eps is None else eps)
        return Partition(instance, eps_approx)
    if name == "vc-node":
        return VertexCoverNode(graph if graph is not None else generate_graph(graph_kind, n))
    if name == "vc-edge":
        # n counts edges here; a star with m edges has m + 1 vertices
        return VertexCoverEdge(graph if graph is not None else generate_graph(graph_kind, n + 1))
    if name == "constant":
        return ConstantProblem(n)
    raise ConfigError(f"unknown problem {name!r}; choose from {', '.join(PROBLEM_NAMES)}")
