import json
import subprocess
import sys

import numpy as np
import pytest

from amkl.cli import (
    RunConfig,
    SyntheticSpec,
    compare,
    main,
    read_config_file,
    read_trace,
    run_experiment,
    sweep,
)
from amkl.engine import AlgorithmConfig
from amkl.errors import ConfigError

SMALL = "sigma2=1,noise=0,T=400,d=3,seed=0"


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--synthetic", SMALL, "--variant", "amkl_aks", "--eta-c", "0.05", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    for name in ("trace.csv", "summary.json", "mse.dat", "al_eff.dat", "K.dat", "plot.gp"):
        assert (out / name).exists()
    first = (out / "trace.csv").read_text().splitlines()[0]
    assert first.startswith("# amkl-trace v1")
    rows = read_trace(out / "trace.csv")
    assert len(rows) == 400
    assert rows[-1]["mse"] == summary["final_mse"]
    saved = json.loads((out / "summary.json").read_text())
    assert saved["config"]["active"]["eta_c"] == 0.05
    mse_dat = np.loadtxt(out / "mse.dat")
    assert mse_dat.shape == (400, 2) and mse_dat[-1, 1] == pytest.approx(summary["final_mse"], rel=1e-9)


def test_trace_columns_satisfy_recurrences(tmp_path):
    out = tmp_path / "r"
    main(["run", "--synthetic", SMALL, "--variant", "amkl", "--eta-c", "0.05", "--M", "2", "--out", str(out)])
    rows = read_trace(out / "trace.csv")
    prev_mse, prev_eff = 0.0, None
    for r in rows:
        t = r["t"]
        expected = ((t - 1) * prev_mse + (r["yhat"] - r["y"]) ** 2) / t
        assert abs(r["mse"] - expected) <= 1e-9
        if prev_eff is not None and r["al_eff"] < prev_eff:
            assert r["a_t"] == 0
        if t >= 3:
            assert r["al_eff"] >= 1 / 3
        prev_mse, prev_eff = r["mse"], r["al_eff"]
    assert any(r["a_t"] == 0 for r in rows)


def test_emit_flags(tmp_path):
    out = tmp_path / "q"
    main(["run", "--synthetic", SMALL, "--variant", "raker", "--no-trace", "--no-plot", "--out", str(out)])
    assert sorted(p.name for p in out.iterdir()) == ["summary.json"]


def test_exit_codes(tmp_path):
    assert main(["run", "--synthetic", SMALL, "--variant", "bogus"]) == 1
    assert main(["run", "--synthetic", SMALL, "--delta", "2"]) == 1
    assert main(["run"]) == 1
    assert main(["run", "--dataset", str(tmp_path / "missing.manifest")]) == 2
    (tmp_path / "m.manifest").write_text("name = x\npath = nowhere.csv\n")
    assert main(["run", "--dataset", str(tmp_path / "m.manifest")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_config_files_and_flag_override(tmp_path, capsys):
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"variant": "amkl", "seed": 3, "active": {"eta_c": 0.05, "M": 2}}))
    kv = tmp_path / "c.cfg"
    kv.write_text("variant = amkl\nseed = 3\nactive.eta_c = 0.05  # threshold\nactive.M = 2\n")
    assert read_config_file(j) == read_config_file(kv)
    main(["run", "--synthetic", SMALL, "--config", str(j), "--variant", "amkl", "--no-trace", "--no-plot",
          "--out", str(tmp_path / "a")])
    main(["run", "--synthetic", SMALL, "--config", str(kv), "--variant", "amkl", "--seed", "4", "--no-trace",
          "--no-plot", "--out", str(tmp_path / "b")])
    a = json.loads((tmp_path / "a" / "summary.json").read_text())
    b = json.loads((tmp_path / "b" / "summary.json").read_text())
    assert a["config"]["active"]["M"] == 2 and a["seed"] == 3
    assert b["seed"] == 4 and b["config"]["active"]["eta_c"] == 0.05
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--synthetic", SMALL, "--config", str(bad)]) == 1


def test_runs_are_deterministic():
    cfg = RunConfig(AlgorithmConfig(variant="amkl_aks", seed=2), SyntheticSpec.parse(SMALL))
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert a.mse_curve == b.mse_curve and a.K_curve == b.K_curve
    assert a.final_mse == a.mse_curve[-1]


def test_compare_table(tmp_path):
    src = SyntheticSpec.parse(SMALL)
    algo = AlgorithmConfig(seed=1)
    rows = compare([RunConfig(algo, src, method=m) for m in ("raker", "omkl_aks", "amkl_aks", "raker")], tmp_path)
    assert [r["method"] for r in rows] == ["raker", "omkl_aks", "amkl_aks", "raker"]
    assert rows[0] == rows[3]
    text = (tmp_path / "comparison.txt").read_text()
    assert "MSE(x1e-3)" in text and "AL_eff" in text
    assert (tmp_path / "comparison.csv").read_text().splitlines()[0] == "method,seed,mse_e3,al_eff"


def test_compare_errors():
    src = SyntheticSpec.parse(SMALL)
    with pytest.raises(ConfigError):
        compare([RunConfig(AlgorithmConfig(), src)])
    other = SyntheticSpec.parse("T=300")
    with pytest.raises(ConfigError):
        compare([RunConfig(AlgorithmConfig(), src), RunConfig(AlgorithmConfig(), other)])


def test_compare_cli_with_baselines(capsys):
    code = main(["compare", "--synthetic", "T=200", "--variants", "raker,kl_rbf:1,poly2,linear,omkl_b"])
    assert code == 0
    out = capsys.readouterr().out
    for m in ("raker", "kl_rbf:1", "poly2", "linear", "omkl_b"):
        assert m in out


def test_sweep_parallel_matches_serial(tmp_path):
    base = RunConfig(AlgorithmConfig(variant="amkl"), SyntheticSpec.parse(SMALL), method="amkl")
    serial = sweep(base, [0.01, 0.1], seeds=(0, 1))
    parallel = sweep(RunConfig(base.algorithm, base.dataset, tmp_path, method="amkl"), [0.01, 0.1], seeds=(0, 1), jobs=2)
    assert serial == parallel
    assert (tmp_path / "sweep.csv").exists()
    assert (tmp_path / "eta_c=0.01" / "seed=1" / "trace.csv").exists()


def test_regret_in_summary(capsys):
    assert main(["run", "--synthetic", SMALL, "--variant", "raker", "--regret"]) == 0
    assert json.loads(capsys.readouterr().out)["regret"] is not None
    assert main(["run", "--synthetic", SMALL, "--variant", "poly2", "--regret"]) == 1


def test_noiseless_synthetic_learnable():
    cfg = RunConfig(
        AlgorithmConfig(variant="omkl_aks", lam=1e-3, eta_l=0.3, eta_g=1.0),
        SyntheticSpec(sigma2=1.0, noise=0.0, T=5000, d=3, seed=0),
    )
    assert run_experiment(cfg).final_mse <= 1e-3


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "amkl", "run", "--synthetic", "T=50", "--variant", "raker"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["T"] == 50
