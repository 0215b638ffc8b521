import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from fastia.cli import HELP, SETTINGS, _parser, load_config, main, sweep_from_settings
from fastia.distributions import ConfigError
from fastia.harness import RUN_HEADER, Expr
from fastia.problems import load_graph, load_partition


def _row(text):
    return next(csv.reader([text.strip().splitlines()[-1]]))


def test_run_success(capsys):
    code = main(["run", "--problem", "onemax", "--n", "32", "--algo", "fast-ia-gamma", "--gamma", "auto",
                 "--budget", "1e6", "--seed", "7", "--header"])
    out = capsys.readouterr().out.splitlines()
    assert code == 0 and len(out) == 2 and out[0] == ",".join(RUN_HEADER)
    row = dict(zip(RUN_HEADER, _row(out[1])))
    assert row["success"] == "true" and row["seed"] == "7" and row["algorithm"] == "fast-ia-gamma"


def test_run_budget_exhausted(capsys):
    code = main(["run", "--problem", "trap", "--n", "64", "--algo", "one-plus-one-ea", "--budget", "1e6",
                 "--seed", "7"])
    row = dict(zip(RUN_HEADER, _row(capsys.readouterr().out)))
    assert code == 2 and row["success"] == "false" and row["evaluations"] == "1000000"


def test_run_invalid_gamma(capsys):
    code = main(["run", "--problem", "onemax", "--n", "32", "--algo", "fast-ia-gamma", "--gamma", "2.0"])
    err = capsys.readouterr().err
    assert code == 1 and "(0, 1]" in err


@pytest.mark.parametrize("argv", [
    ["run", "--problem", "onemax", "--n", "8"],
    ["run", "--problem", "onemax", "--n", "8", "--algo", "fast-ia"],
    ["run", "--problem", "onemax", "--n", "8", "--algo", "rls", "--set", "colour=red"],
    ["run", "--bogus"],
    ["frobnicate"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1


def test_every_flag_has_a_config_key():
    for flag, (section, key) in SETTINGS.items():
        assert section in ("engine", "operator", "problem", "sweep") and key
    text = _parser().format_help()
    sub = _parser()._subparsers._group_actions[0].choices["sweep"].format_help()
    assert "run" in text and "--jobs" in sub
    for flag in ("gamma", "tau", "pdie"):
        assert "auto" in HELP[flag]


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[engine]\nalgorithm = fast-ia-gamma\nbudget = 1e6\nseed = 3\n"
                   "[problem]\nname = onemax\nn = 16\n")
    assert main(["run", "--config", str(cfg)]) == 0
    from_file = dict(zip(RUN_HEADER, _row(capsys.readouterr().out)))
    assert from_file["seed"] == "3" and from_file["n"] == "16"
    assert main(["run", "--config", str(cfg), "--seed", "4", "--set", "n=20"]) == 0
    over = dict(zip(RUN_HEADER, _row(capsys.readouterr().out)))
    assert over["seed"] == "4" and over["n"] == "20"


def test_config_rejects_unknown(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[engine]\nalgorithm = rls\nspeed = 3\n")
    with pytest.raises(ConfigError, match="speed"):
        load_config(bad)
    bad.write_text("[extras]\nx = 1\n")
    with pytest.raises(ConfigError, match="extras"):
        load_config(bad)
    assert main(["run", "--config", str(bad)]) == 1


def test_missing_config_file_is_io_error(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.ini")]) == 3


def _sweep_args(out, *extra):
    return ["sweep", "--problem", "onemax", "--dims", "16,32", "--reps", "3", "--seed", "5",
            "--budget", "1e6", "--out", str(out), *extra]


def test_sweep_writes_identical_files(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(_sweep_args(a, "--algo", "fast-ia-gamma", "--model", "n*ln(n)")) == 0
    assert "spread" in capsys.readouterr().out
    assert main(_sweep_args(b, "--algo", "fast-ia-gamma", "--model", "n*ln(n)")) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a_summary.csv").read_text().startswith("n,mean,median,stderr,success_rate,ratio,model")


def test_sweep_two_algorithms(tmp_path):
    out = tmp_path / "r.csv"
    assert main(_sweep_args(out, "--algo", "fast-ia-gamma,rls")) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 12 and {r["algorithm"] for r in rows} == {"fast-ia-gamma", "rls"}
    assert (tmp_path / "r_summary_rls.csv").exists()
    assert (tmp_path / "r_summary_fast-ia-gamma.csv").exists()


def test_sweep_empty_dims(tmp_path):
    assert main(["sweep", "--problem", "onemax", "--algo", "rls", "--dims", "",
                 "--out", str(tmp_path / "x.csv")]) == 1


def test_fit_command(tmp_path, capsys):
    out = tmp_path / "r.csv"
    main(_sweep_args(out, "--algo", "fast-ia-gamma,rls"))
    capsys.readouterr()
    assert main(["fit", str(out), "--model", "n*log(n)", "--algo", "rls"]) == 0
    report = capsys.readouterr().out
    assert "spread" in report and "R^2" in report
    assert main(["fit", str(out), "--model", "binom(n,4)*n", "--algo", "rls"]) == 0
    assert main(["fit", str(out), "--model", "n*ln(n)*(1+gamma*ln(n))", "--algo", "fast-ia-gamma",
                 "--bind", "gamma=1/ln(n)"]) == 0
    assert main(["fit", str(out), "--model", "n*log(n)"]) == 1
    capsys.readouterr()
    assert main(["fit", str(out), "--model", "n**", "--algo", "rls"]) == 1
    assert "grammar" in capsys.readouterr().err
    assert main(["fit", str(tmp_path / "none.csv"), "--model", "n"]) == 3


def test_instance_partition(tmp_path):
    path = tmp_path / "w.txt"
    assert main(["instance", "partition-weps", "--n", "50", "--eps", "0.2", "--out", str(path)]) == 0
    inst = load_partition(path)
    assert inst.n == 50 and abs(inst.total - 1) < 1e-12


def test_instance_graph(tmp_path, capsys):
    path = tmp_path / "star.col"
    assert main(["instance", "graph", "--kind", "star", "--n", "64", "--out", str(path)]) == 0
    lines = path.read_text().splitlines()
    assert lines[0] == "p edge 64 63" and sum(l.startswith("e ") for l in lines) == 63
    assert load_graph(path).m == 63
    assert main(["instance", "graph", "--kind", "complete", "--n", "4"]) == 0
    assert capsys.readouterr().out.count("\ne ") == 6


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fastia", "instance", "partition-weps", "--n", "4"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert np.allclose([float(v) for v in proc.stdout.split()], [0.2833333333, 0.2833333333,
                                                                  0.2166666667, 0.2166666667])


CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.ini"))


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    sweep = sweep_from_settings(load_config(path))
    assert sweep.replications >= 1
    if sweep.model:
        names = Expr(sweep.model).names - {"n"}
        for n in sweep.dims:
            assert Expr(sweep.model)(n=n, **{k: sweep.resolved(n)[k] for k in names}) > 0
