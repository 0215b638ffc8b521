"""Replication sweeps, aggregation and scaling fits.

A sweep runs one or more named algorithms on one problem family over a list of
dimensions.  Replication ``r`` at every dimension uses the random stream
``RandomSource(master_seed, r)``, so results do not depend on how the runs are
scheduled across worker processes.
"""
from __future__ import annotations

import ast
import csv
import json
import math
import operator
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats
from scipy.special import comb

from .algorithms import OPT_IA, ONE_PLUS_ONE, AgeingConfig, RunConfig, RunRecord, run
from .core import BitString, RandomSource
from .distributions import ConfigError
from .operators import OperatorConfig, OperatorKind, _subset
from .problems import load_graph, load_partition, make_problem

# ---------------------------------------------------------------------------
# model expressions
# ---------------------------------------------------------------------------

GRAMMAR_HINT = ("model grammar: numbers, n and bound parameters (e.g. gamma, d), "
                "+ - * / ^, parentheses, log(x) (base 2), ln(x), sqrt(x), binom(a, b)")


class ModelError(ConfigError):
    pass


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"log": (1, math.log2), "ln": (1, math.log), "sqrt": (1, math.sqrt),
          "binom": (2, lambda a, b: float(comb(round(a), round(b), exact=True)))}


class Expr:
    """Arithmetic expression over n and named parameters.

    Parsed with :mod:`ast` and evaluated by walking a whitelisted node set;
    ``^`` is accepted as exponentiation.
    """

    def __init__(self, text):
        self.text = str(text).strip()
        try:
            tree = ast.parse(self.text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ModelError(f"cannot parse {self.text!r}: {exc.msg}; {GRAMMAR_HINT}") from None
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            self._check(node.operand)
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            pass
        elif isinstance(node, ast.Name):
            pass
        elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in _FUNCS and not node.keywords:
            arity = _FUNCS[node.func.id][0]
            if len(node.args) != arity:
                raise ModelError(f"{node.func.id}() takes {arity} argument(s) in {self.text!r}")
            for a in node.args:
                self._check(a)
        else:
            raise ModelError(f"unsupported construct in {self.text!r}; {GRAMMAR_HINT}")

    @property
    def names(self) -> set:
        return {nd.id for nd in ast.walk(self._tree)
                if isinstance(nd, ast.Name) and nd.id not in _FUNCS}

    def __call__(self, **env) -> float:
        return float(self._eval(self._tree, env))

    def _eval(self, node, env):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            if node.id not in env:
                raise ModelError(f"unbound name {node.id!r} in {self.text!r}")
            return env[node.id]
        _, fn = _FUNCS[node.func.id]
        return fn(*(self._eval(a, env) for a in node.args))

    def __repr__(self):
        return f"Expr({self.text!r})"


def resolve_bindings(bindings: dict, n: int) -> dict:
    """Evaluate parameter bindings at dimension n.

    Values may be numbers, strings such as ``"auto"`` or ``"rate"``, or
    expressions in n and earlier-resolved parameters (in any order without
    cycles).
    """
    out: dict = {"n": n}
    pending = {}
    for k, v in bindings.items():
        if isinstance(v, str):
            try:
                pending[k] = Expr(v)
            except ModelError:
                out[k] = v  # plain string setting
        else:
            out[k] = v
    for k, e in list(pending.items()):
        if not e.names:
            out[k] = e()
            del pending[k]
        elif e.names == {e.text}:  # a bare word such as "auto" or "exact"
            out[k] = e.text
            del pending[k]
    while pending:
        progress = False
        for k, e in list(pending.items()):
            if e.names <= out.keys():
                out[k] = e(**{a: b for a, b in out.items() if isinstance(b, (int, float))})
                del pending[k]
                progress = True
        if not progress:
            raise ConfigError(f"cannot resolve parameters {sorted(pending)} (unknown names or a cycle)")
    del out["n"]
    return out


# ---------------------------------------------------------------------------
# algorithm registry
# ---------------------------------------------------------------------------

ALGORITHMS = {
    "rls": (ONE_PLUS_ONE, OperatorKind.RLS_FLIP),
    "one-plus-one-ea": (ONE_PLUS_ONE, OperatorKind.SBM),
    "one-plus-one-ia": (ONE_PLUS_ONE, OperatorKind.STATIC_HMP_FCM),
    "one-plus-one-ia-plain": (ONE_PLUS_ONE, OperatorKind.STATIC_HMP_PLAIN),
    "fast-ia-gamma": (ONE_PLUS_ONE, OperatorKind.FCM_GAMMA),
    "fast-ia-beta-fcm": (ONE_PLUS_ONE, OperatorKind.FCM_BETA),
    "fast-ia-beta-hmp": (ONE_PLUS_ONE, OperatorKind.HMP_BETA),
    "fast-ea-beta": (ONE_PLUS_ONE, OperatorKind.EA_BETA),
    "fast-ea-unif": (ONE_PLUS_ONE, OperatorKind.EA_UNIF),
    "opt-ia-gamma": (OPT_IA, OperatorKind.FCM_GAMMA),
    "opt-ia-beta": (OPT_IA, OperatorKind.FCM_BETA),
}

OPERATOR_KEYS = ("gamma", "beta", "p1", "rate", "mode", "extended")
AGEING_KEYS = ("tau", "mu", "dup", "p_die")
PROBLEM_KEYS = ("d", "eps", "eps_approx", "graph_kind", "graph", "instance")
RUN_KEYS = ("budget", "init")
KNOWN_KEYS = OPERATOR_KEYS + AGEING_KEYS + PROBLEM_KEYS + RUN_KEYS


def _auto(v):
    return v is None or (isinstance(v, str) and v.lower() == "auto")


def build_run(algorithm: str, problem_name: str, n: int, params: dict, seed: int = 0):
    """Turn resolved parameters into ``(problem, RunConfig)``."""
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    unknown = set(params) - set(KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
    engine, kind = ALGORITHMS[algorithm]
    p = params
    n = int(n)

    op_kw = {}
    for key in ("gamma", "beta", "rate"):
        if not _auto(p.get(key)):
            op_kw[key] = float(p[key])
    if not _auto(p.get("p1")):
        op_kw["p1"] = float(p["p1"])
    if p.get("mode") is not None:
        op_kw["mode"] = str(p["mode"])
    if p.get("extended") is not None:
        op_kw["extended"] = str(p["extended"]).lower() in ("1", "true", "yes")
    opc = OperatorConfig(kind, **op_kw)

    ageing = None
    has_ageing = any(p.get(k) is not None for k in AGEING_KEYS)
    if engine == OPT_IA or has_ageing:
        # ageing attached to a (1+1) algorithm runs the Opt-IA engine with mu = dup = 1
        engine = OPT_IA
        tau = p.get("tau")
        if _auto(tau):
            tau = 2 * n * math.log(n) if tau is not None or has_ageing else math.inf
        tau = math.inf if str(tau).lower() in ("inf", "infinity") else float(tau)
        pdie = None if _auto(p.get("p_die")) else float(p["p_die"])
        ageing = AgeingConfig(tau=tau, mu=int(p.get("mu", 1)), dup=int(p.get("dup", 1)), p_die=pdie)

    budget = p.get("budget")
    budget = None if budget is None else int(round(float(budget)))

    kw = {}
    if p.get("d") is not None:
        kw["d"] = int(round(float(p["d"])))
    if p.get("eps") is not None:
        kw["eps"] = float(p["eps"])
    if p.get("eps_approx") is not None:
        kw["eps_approx"] = float(p["eps_approx"])
    if p.get("graph_kind") is not None:
        kw["graph_kind"] = str(p["graph_kind"])
    if p.get("graph") is not None:
        kw["graph"] = load_graph(p["graph"])
    if p.get("instance") is not None:
        kw["instance"] = load_partition(p["instance"])
    problem = make_problem(problem_name, n, **kw)
    cfg = RunConfig(opc, engine=engine, ageing=ageing, budget=budget, seed=seed)
    return problem, cfg


def initial_point(kind: Optional[str], problem, params: dict, rng: RandomSource) -> Optional[BitString]:
    """``None`` for a uniform start; ``"plateau"`` draws a point with n - d ones."""
    if kind in (None, "random"):
        return None
    if kind == "plateau":
        d = int(round(float(params["d"])))
        zeros = _subset(problem.n, d, rng)
        return BitString.ones(problem.n).flipped(zeros)
    raise ConfigError(f"unknown initialisation {kind!r} (random, plateau)")


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepConfig:
    algorithms: Sequence[str]
    problem: str
    dims: Sequence[int]
    replications: int = 1
    params: dict = field(default_factory=dict)
    master_seed: int = 0
    model: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.algorithms, str):
            self.algorithms = [self.algorithms]
        self.algorithms = list(self.algorithms)
        self.dims = [int(n) for n in self.dims]
        if not self.dims:
            raise ConfigError("the dimension list is empty")
        if sorted(set(self.dims)) != self.dims:
            raise ConfigError(f"dimensions must be strictly increasing, got {self.dims}")
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if not self.algorithms:
            raise ConfigError("no algorithm given")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}; choose from {', '.join(ALGORITHMS)}")
        # fail early on anything that does not resolve at some dimension
        for n in self.dims:
            for a in self.algorithms:
                build_run(a, self.problem, n, self.resolved(n))

    def resolved(self, n: int) -> dict:
        return resolve_bindings(self.params, n)


@dataclass
class SweepRecord:
    run_id: int
    algorithm: str
    operator: str
    problem: str
    n: int
    replication: int
    params: dict
    record: RunRecord

    @property
    def params_json(self) -> str:
        return json.dumps(self.params, sort_keys=True, separators=(",", ":"))


def run_single(algorithm: str, problem_name: str, n: int, params: dict, master_seed: int,
               replication: int, backend: str = "auto"):
    problem, cfg = build_run(algorithm, problem_name, n, params, seed=master_seed)
    rng = RandomSource(master_seed, replication)
    init = initial_point(params.get("init"), problem, params, rng)
    rec = run(problem, cfg, rng, init=init, backend=backend)
    return problem, cfg, rec


def _canonical_params(problem, cfg: RunConfig, params: dict) -> dict:
    out = dict(cfg.operator.params(problem.n))
    out.update({k: v for k, v in problem.params().items()})
    if cfg.ageing is not None:
        out.update(tau=cfg.ageing.tau, mu=cfg.ageing.mu, dup=cfg.ageing.dup,
                   p_die=cfg.ageing.death_probability)
    out["budget"] = cfg.budget
    if params.get("init") not in (None, "random"):
        out["init"] = params["init"]
    return {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in out.items()}


def _task(args):
    run_id, algorithm, problem_name, n, r, params, master_seed = args
    problem, cfg, rec = run_single(algorithm, problem_name, n, params, master_seed, r)
    return SweepRecord(run_id, algorithm, cfg.operator.kind.value, problem.name, n, r,
                       _canonical_params(problem, cfg, params), rec)


def sweep_tasks(sweep: SweepConfig) -> list:
    tasks = []
    for a in sweep.algorithms:
        for n in sweep.dims:
            params = sweep.resolved(n)
            for r in range(sweep.replications):
                tasks.append((len(tasks), a, sweep.problem, n, r, params, sweep.master_seed))
    return tasks


def run_sweep(sweep: SweepConfig, jobs: int = 1) -> list:
    """All replications of the sweep, ordered by (algorithm, n, replication)."""
    tasks = sweep_tasks(sweep)
    if jobs <= 1:
        out = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    return sorted(out, key=lambda s: s.run_id)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

RUN_HEADER = ["run_id", "seed", "algorithm", "operator", "problem", "n", "params_json",
              "evaluations", "generations", "success", "best_fitness", "first_hit_evaluation"]
SUMMARY_HEADER = ["n", "mean", "median", "stderr", "success_rate", "ratio", "model"]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def run_row(s: SweepRecord) -> list:
    r = s.record
    return [s.run_id, r.seed, s.algorithm, s.operator, s.problem, s.n, s.params_json,
            r.evaluations, r.generations, r.success, r.best_fitness, r.best_first_hit_evaluation]


def write_runs_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_HEADER)
        for s in records:
            w.writerow([_fmt(v) for v in run_row(s)])


def read_runs_csv(path) -> list:
    """Rows of a per-run CSV as dicts with typed values."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RUN_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        rows = []
        for row in reader:
            rows.append({
                "run_id": int(row["run_id"]), "seed": int(row["seed"]), "algorithm": row["algorithm"],
                "operator": row["operator"], "problem": row["problem"], "n": int(row["n"]),
                "params": json.loads(row["params_json"]), "evaluations": int(row["evaluations"]),
                "generations": int(row["generations"]), "success": row["success"] == "true",
                "best_fitness": float(row["best_fitness"]),
                "first_hit_evaluation": int(row["first_hit_evaluation"]),
            })
    return rows


# ---------------------------------------------------------------------------
# aggregation and fitting
# ---------------------------------------------------------------------------


@dataclass
class Summary:
    n: int
    runs: int
    successes: int
    mean: float
    median: float
    stderr: float
    success_rate: float
    ci_low: float
    ci_high: float


def _runtime_pairs(records):
    for s in records:
        if isinstance(s, SweepRecord):
            yield s.n, s.record.success, s.record.evaluations
        elif isinstance(s, dict):
            yield s["n"], s["success"], s["evaluations"]
        else:
            n, success, ev = s
            yield n, success, ev


def aggregate(records) -> list:
    """Per-dimension summary; runtime statistics use successful runs only."""
    by_n: dict = {}
    for n, ok, ev in _runtime_pairs(records):
        by_n.setdefault(n, []).append((ok, ev))
    out = []
    for n in sorted(by_n):
        rows = by_n[n]
        good = np.array([ev for ok, ev in rows if ok], dtype=float)
        k, total = len(good), len(rows)
        if k:
            mean, median = float(good.mean()), float(np.median(good))
            stderr = float(good.std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan
        else:
            mean = median = stderr = math.nan
        ci = stats.binomtest(k, total).proportion_ci(0.95, method="exact")
        out.append(Summary(n, total, k, mean, median, stderr, k / total, float(ci.low), float(ci.high)))
    return out


@dataclass
class FitResult:
    model: str
    ns: list
    ratios: list
    spread: float
    slope: Optional[float]
    r2: Optional[float]


def fit_scaling(summaries, model, **env) -> FitResult:
    """Ratios mean/model(n), their max/min spread, and the log-log slope.

    ``env`` binds extra names used by the model (e.g. ``gamma`` or ``d``);
    a name may also be a callable of n.
    """
    expr = model if isinstance(model, Expr) else Expr(model)
    ns, means, ratios = [], [], []
    for s in summaries:
        if not math.isfinite(s.mean):
            continue
        bound = {k: (v(s.n) if callable(v) else v) for k, v in env.items()}
        m = expr(n=s.n, **bound)
        if not m > 0:
            raise ModelError(f"model {expr.text!r} is not positive at n={s.n}")
        ns.append(s.n)
        means.append(s.mean)
        ratios.append(s.mean / m)
    if not ratios:
        raise ConfigError("no dimension has a successful run; nothing to fit")
    spread = max(ratios) / min(ratios)
    slope = r2 = None
    if len(ns) >= 2:
        lr = stats.linregress(np.log(ns), np.log(means))
        slope, r2 = float(lr.slope), float(lr.rvalue ** 2)
    return FitResult(expr.text, ns, ratios, spread, slope, r2)


def write_summary_csv(summaries, path, fit: Optional[FitResult] = None) -> None:
    ratio = dict(zip(fit.ns, fit.ratios)) if fit else {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for s in summaries:
            w.writerow([s.n, _fmt(s.mean), _fmt(s.median), _fmt(s.stderr), _fmt(s.success_rate),
                        _fmt(ratio.get(s.n)), fit.model if fit else ""])


def format_fit(fit: FitResult) -> str:
    lines = [f"model: {fit.model}"]
    lines += [f"  n={n:<8d} ratio={r:.6g}" for n, r in zip(fit.ns, fit.ratios)]
    lines.append(f"spread: {fit.spread:.4f}")
    if fit.slope is not None:
        lines.append(f"log-log slope: {fit.slope:.4f}  R^2: {fit.r2:.4f}")
    else:
        lines.append("log-log slope: unavailable (fewer than two dimensions)")
    return "\n".join(lines)
