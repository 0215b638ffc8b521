"""Command-line front end: ``run``, ``sweep``, ``fit`` and ``instance``.

Config files are INI files with the sections ``[engine]``, ``[operator]``,
``[problem]`` and ``[sweep]``; every command-line flag has a key in one of
them, and flags override the file.  Parameter values may be expressions in
``n`` (for example ``gamma = 1/(n*ln(n)^2)``).

Exit codes: 0 success, 1 usage or configuration error, 2 budget exhausted
without reaching the target, 3 input/output error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import logging
import sys
from pathlib import Path

from . import harness as H
from .distributions import ConfigError
from .problems import GraphParseError, generate_graph, make_w_eps, save_partition, serialise_graph

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_IO = 0, 1, 2, 3

# flag name -> (section, key)
SETTINGS = {
    "algo": ("engine", "algorithm"),
    "budget": ("engine", "budget"),
    "seed": ("engine", "seed"),
    "tau": ("engine", "tau"),
    "mu": ("engine", "mu"),
    "dup": ("engine", "dup"),
    "pdie": ("engine", "p_die"),
    "init": ("engine", "init"),
    "backend": ("engine", "backend"),
    "gamma": ("operator", "gamma"),
    "beta": ("operator", "beta"),
    "p1": ("operator", "p1"),
    "rate": ("operator", "rate"),
    "mode": ("operator", "mode"),
    "extended": ("operator", "extended"),
    "problem": ("problem", "name"),
    "n": ("problem", "n"),
    "d": ("problem", "d"),
    "eps": ("problem", "eps"),
    "eps_approx": ("problem", "eps_approx"),
    "graph_kind": ("problem", "graph_kind"),
    "graph": ("problem", "graph"),
    "instance": ("problem", "instance"),
    "dims": ("sweep", "dims"),
    "reps": ("sweep", "replications"),
    "jobs": ("sweep", "jobs"),
    "model": ("sweep", "model"),
    "out": ("sweep", "out"),
    "summary": ("sweep", "summary"),
}
_BY_KEY = {key: flag for flag, (_, key) in SETTINGS.items()}
_SECTION_KEYS = {}
for _flag, (_sec, _key) in SETTINGS.items():
    _SECTION_KEYS.setdefault(_sec, set()).add(_key)

HELP = {
    "gamma": "FCM_gamma evaluation constant in (0, 1]; 'auto' binds gamma = 1/ln n",
    "tau": "ageing threshold; 'auto' binds tau = 2 n ln n (attaches ageing to any algorithm)",
    "pdie": "ageing death probability; 'auto' binds 1 - 1/((dup+1) mu)",
    "algo": "one of: " + ", ".join(H.ALGORITHMS),
    "budget": "evaluation budget (expression in n allowed)",
    "init": "initial point: random (default) or plateau (n - d ones)",
    "backend": "auto, kernel or reference",
    "dims": "comma-separated dimensions, e.g. 64,128,256",
    "model": "scaling model expression, e.g. 'n*ln(n)'",
    "set": "override any setting as key=value (repeatable)",
}


def load_config(path) -> dict:
    """Flat ``key -> value`` settings from an INI file; unknown keys are rejected."""
    cp = configparser.ConfigParser(interpolation=None)
    with open(path) as fh:
        cp.read_file(fh)
    out = {}
    for section in cp.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"{path}: unknown section [{section}] "
                              f"(expected {', '.join(sorted(_SECTION_KEYS))})")
        for key, value in cp[section].items():
            if key not in _SECTION_KEYS[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            out[key] = value.strip()
    return out


def _settings(args) -> dict:
    s = load_config(args.config) if getattr(args, "config", None) else {}
    for flag, (_, key) in SETTINGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            s[key] = v
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        k = k.strip().split(".")[-1]
        if k not in _BY_KEY:
            raise ConfigError(f"unknown setting {k!r}")
        s[k] = v.strip()
    return s


_NON_PARAMS = {"algorithm", "seed", "name", "n", "dims", "replications", "jobs", "model", "out",
               "summary", "backend"}


def _params(s: dict) -> dict:
    return {k: v for k, v in s.items() if k not in _NON_PARAMS}


def _int(s: dict, key: str, default=None) -> int:
    v = s.get(key, default)
    if v is None:
        raise ConfigError(f"missing setting {key!r}")
    try:
        return int(round(float(v)))
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {v!r}") from None


def _add_setting_flags(p, keys):
    for flag in keys:
        p.add_argument("--" + flag.replace("_", "-"), dest=flag, default=None, help=HELP.get(flag))


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fastia", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run_keys = ["algo", "budget", "seed", "tau", "mu", "dup", "pdie", "init", "backend",
                "gamma", "beta", "p1", "rate", "mode", "extended",
                "problem", "n", "d", "eps", "eps_approx", "graph_kind", "graph", "instance"]
    p = sub.add_parser("run", help="one run; prints a CSV row")
    p.add_argument("--config")
    p.add_argument("--header", action="store_true", help="print the CSV header first")
    p.add_argument("--set", action="append", help=HELP["set"])
    _add_setting_flags(p, run_keys)

    p = sub.add_parser("sweep", help="replicated runs over dimensions; writes CSV files")
    p.add_argument("--config")
    p.add_argument("--set", action="append", help=HELP["set"])
    _add_setting_flags(p, run_keys + ["dims", "reps", "jobs", "model", "out", "summary"])

    p = sub.add_parser("fit", help="fit a scaling model to a per-run CSV")
    p.add_argument("results")
    p.add_argument("--model", required=True, help=HELP["model"])
    p.add_argument("--algo", default=None, help="restrict to one algorithm")
    p.add_argument("--bind", action="append", default=[],
                   help="bind a model name, e.g. gamma=1/ln(n) (repeatable)")

    p = sub.add_parser("instance", help="write benchmark instances")
    p.add_argument("kind", choices=["partition-weps", "graph"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--kind", dest="graph_kind", default="star", choices=["star", "complete", "path"])
    p.add_argument("--out", default=None, help="output file (default: standard output)")
    return ap


def cmd_run(args) -> int:
    s = _settings(args)
    if "algorithm" not in s or "name" not in s:
        raise ConfigError("run needs --algo and --problem (or [engine] algorithm / [problem] name)")
    n = _int(s, "n")
    seed = _int(s, "seed", 0)
    params = H.resolve_bindings(_params(s), n)
    problem, cfg, rec = H.run_single(s["algorithm"], s["name"], n, params, seed, 0,
                                     backend=s.get("backend", "auto"))
    srec = H.SweepRecord(0, s["algorithm"], cfg.operator.kind.value, problem.name, n, 0,
                         H._canonical_params(problem, cfg, params), rec)
    out = sys.stdout
    if args.header:
        out.write(",".join(H.RUN_HEADER) + "\n")
    csv.writer(out, lineterminator="\n").writerow([H._fmt(v) for v in H.run_row(srec)])
    return EXIT_OK if rec.success else EXIT_BUDGET


def sweep_from_settings(s: dict) -> H.SweepConfig:
    if "algorithm" not in s or "name" not in s:
        raise ConfigError("sweep needs --algo and --problem")
    dims_text = s.get("dims", "")
    try:
        dims = [int(x) for x in str(dims_text).replace(" ", "").split(",") if x]
    except ValueError:
        raise ConfigError(f"dims must be a comma-separated list of integers, got {dims_text!r}") from None
    algos = [a.strip() for a in str(s["algorithm"]).split(",") if a.strip()]
    return H.SweepConfig(algos, s["name"], dims, replications=_int(s, "replications", 1),
                         params=_params(s), master_seed=_int(s, "seed", 0), model=s.get("model"))


def cmd_sweep(args) -> int:
    s = _settings(args)
    sweep = sweep_from_settings(s)
    algos = sweep.algorithms
    out = Path(s.get("out", "results.csv"))
    records = H.run_sweep(sweep, jobs=_int(s, "jobs", 1))
    H.write_runs_csv(records, out)
    summary = Path(s["summary"]) if s.get("summary") else out.with_name(out.stem + "_summary.csv")
    for a in algos:
        recs = [r for r in records if r.algorithm == a]
        summ = H.aggregate(recs)
        fit = None
        if sweep.model:
            try:
                fit = H.fit_scaling(summ, sweep.model, **_model_env(sweep))
            except ConfigError as exc:
                logging.warning("fit for %s skipped: %s", a, exc)
        path = summary if len(algos) == 1 else summary.with_name(f"{summary.stem}_{a}{summary.suffix}")
        H.write_summary_csv(summ, path, fit)
        if fit is not None:
            print(f"[{a}]\n{H.format_fit(fit)}")
    return EXIT_OK


def _model_env(sweep):
    # bound numeric parameters (gamma, d, ...) are visible to the model
    def getter(name):
        return lambda n: sweep.resolved(n)[name]
    names = set(H.Expr(sweep.model).names) - {"n"}
    return {k: getter(k) for k in names}


def cmd_fit(args) -> int:
    rows = H.read_runs_csv(args.results)
    if args.algo:
        rows = [r for r in rows if r["algorithm"] == args.algo]
    algos = sorted({r["algorithm"] for r in rows})
    if len(algos) > 1:
        raise ConfigError(f"results hold several algorithms ({', '.join(algos)}); pick one with --algo")
    env = {}
    for b in args.bind:
        if "=" not in b:
            raise ConfigError(f"--bind expects name=expression, got {b!r}")
        k, v = b.split("=", 1)
        e = H.Expr(v)
        env[k.strip()] = (lambda e: (lambda n: e(n=n)))(e)
    fit = H.fit_scaling(H.aggregate(rows), H.Expr(args.model), **env)
    print(H.format_fit(fit))
    return EXIT_OK


def cmd_instance(args) -> int:
    if args.kind == "partition-weps":
        inst = make_w_eps(args.n, args.eps)
        if args.out:
            save_partition(inst, args.out)
            return EXIT_OK
        text = "".join(f"{w!r}\n" for w in inst.weights.tolist())
    else:
        text = serialise_graph(generate_graph(args.graph_kind, args.n))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "fit": cmd_fit, "instance": cmd_instance}


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.cmd](args)
    except (ConfigError, GraphParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
