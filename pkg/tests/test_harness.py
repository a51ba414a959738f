import json
import math

import numpy as np
import pytest

from pdemas import cli
from pdemas.runner import load_run, run, sweep, verify, convergence_study
from pdemas.scenario import (
    ConfigError,
    ScenarioConfig,
    load_scenario,
    scenario_from_dict,
    bench_config,
)

SMALL_TOML = """
[plant]
lambda = 5.0
alpha = 1.0
l = 1.0
gains = [0.1, 0.2, 0.3, 0.4, 0.5]

[grid]
intervals = 40
dt = 2e-3
horizon = 0.2

[signals]
preset = "bench"
D0 = 1.0
D1 = 1.0
A = 2.0
A0 = 3.0
A1 = 3.0

[verification]
sigma = 2.5
eps_tol = 0.05

[output]
cadence = 10
"""

FAILING_TOML = """
[plant]
lambda = 5.0
alpha = 1.0
l = 1.0
gains = [0.2, 0.3]

[grid]
intervals = 20
dt = 1e-3
horizon = 0.05

[initial]
preset = "zero"

[signals]
r = {kind = "zero"}
q = [{kind = "cos", amplitude = 10.0, freq = 1.0}, {kind = "zero"}]
d0 = [{kind = "zero"}, {kind = "zero"}]
d1 = [{kind = "zero"}, {kind = "zero"}]
f = [{kind = "zero"}, {kind = "zero"}]
"""

ABORT_TOML = """
[plant]
lambda = 5.0
alpha = 1.0
l = 1.0
gains = [0.2, 0.3]

[grid]
intervals = 20
dt = 1e-3
horizon = 0.05

[initial]
preset = "zero"

[signals]
r = {kind = "zero"}
q = [{kind = "zero"}, {kind = "zero"}]
d0 = [{kind = "zero"}, {kind = "zero"}]
d1 = [{kind = "zero"}, {kind = "zero"}]
f = [{kind = "offset_plus_sin", amplitude = 1e308, offset = 10.0}, {kind = "zero"}]
"""


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# ---------------------------------------------------------------------------
# Configuration loading

def test_load_small_scenario(tmp_path):
    cfg = load_scenario(_write(tmp_path, "small.toml", SMALL_TOML))
    assert cfg.plant.lam == 5.0
    assert cfg.intervals == 40
    assert cfg.sigmas == (2.5,)
    assert cfg.knobs["A0"] == 3.0


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        load_scenario("/nonexistent/path.toml")


def test_unparsable_toml(tmp_path):
    with pytest.raises(ConfigError, match="cannot parse"):
        load_scenario(_write(tmp_path, "bad.toml", "[plant\n"))


def test_missing_lambda():
    with pytest.raises(ConfigError, match="lambda"):
        scenario_from_dict({"plant": {"alpha": 1.0, "l": 1.0, "gains": [0.1, 0.2]}})


def test_negative_dt():
    raw = {
        "plant": {"lambda": 5.0, "alpha": 1.0, "l": 1.0, "gains": [0.1, 0.2]},
        "grid": {"dt": -1e-3},
    }
    with pytest.raises(ConfigError, match="dt"):
        scenario_from_dict(raw)


def test_bad_sigma():
    raw = {
        "plant": {"lambda": 5.0, "alpha": 1.0, "l": 1.0, "gains": [0.1, 0.2]},
        "verification": {"sigma": 7.0},
    }
    with pytest.raises(ConfigError, match="sigma"):
        scenario_from_dict(raw)


def test_bad_gain_reported():
    raw = {"plant": {"lambda": 5.0, "alpha": 1.0, "l": 1.0, "gains": [0.1, 1.5]}}
    with pytest.raises(ConfigError, match="gain"):
        scenario_from_dict(raw)


def test_signal_count_mismatch():
    raw = {
        "plant": {"lambda": 5.0, "alpha": 1.0, "l": 1.0, "gains": [0.1, 0.2, 0.3]},
        "signals": {
            "r": {"kind": "zero"},
            "q": [{"kind": "zero"}] * 2,
            "d0": [{"kind": "zero"}] * 2,
            "d1": [{"kind": "zero"}] * 2,
            "f": [{"kind": "zero"}] * 2,
        },
    }
    with pytest.raises(ConfigError, match="count"):
        scenario_from_dict(raw)


def test_default_sigma_is_half_lambda():
    cfg = bench_config()
    assert cfg.sigmas == (2.5,)


def test_explicit_initial_profiles():
    raw = {
        "plant": {"lambda": 5.0, "alpha": 1.0, "l": 1.0, "gains": [0.1, 0.2]},
        "grid": {"intervals": 10},
        "initial": {
            "u0": [
                {"kind": "sin", "amplitude": 2.0, "freq": 3.0},
                {"kind": "const", "amplitude": 1.0},
            ],
            "uref0": {"kind": "cos", "amplitude": 0.5, "freq": 1.0},
            "qtilde0": [
                {"kind": "const", "amplitude": 0.3},
                {"kind": "const"},
            ],
        },
        "signals": {"preset": "zero"},
    }
    cfg = scenario_from_dict(raw)
    init = cfg.resolved_initial()
    x = cfg.grid.nodes
    np.testing.assert_allclose(init.u0[0], 2.0 * np.sin(3.0 * x))
    np.testing.assert_allclose(init.uref0, 0.5 * np.cos(x))
    # v0 reconstructed so u0 - v0 - qhat0 equals the requested qtilde0
    np.testing.assert_allclose(init.u0[0] - init.v0[0] - init.qhat0[0], 0.3)
    np.testing.assert_allclose(init.u0[1] - init.v0[1] - init.qhat0[1], 0.0)


# ---------------------------------------------------------------------------
# Runner behaviour

@pytest.fixture(scope="module")
def small_cfg():
    return bench_config(
        intervals=40,
        dt=2e-3,
        horizon=0.2,
        knobs={"D0": 1.0, "D1": 1.0, "A": 2.0, "A0": 3.0, "A1": 3.0},
    )


def test_determinism_byte_identical(tmp_path, small_cfg):
    run(small_cfg, tmp_path / "a")
    run(small_cfg, tmp_path / "b")
    for name in (
        "tracking.csv",
        "sync.csv",
        "estimation.csv",
        "qtilde.csv",
        "closed_loop.csv",
        "functionals.csv",
    ):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_csv_round_trip_verify(tmp_path, small_cfg):
    result = run(small_cfg, tmp_path / "out")
    direct = verify(result)
    loaded = load_run(tmp_path / "out", small_cfg)
    reloaded = verify(loaded)
    assert len(direct.checks) == len(reloaded.checks)
    for a, b in zip(direct.checks, reloaded.checks):
        assert a.theorem == b.theorem and a.index == b.index
        assert a.worst_margin == pytest.approx(b.worst_margin, abs=1e-12)
    assert direct.passed == reloaded.passed


def test_fault_injection_detected(tmp_path, small_cfg):
    """Corrupting the stored tracking series must flip verification to FAIL."""
    outdir = tmp_path / "out"
    result = run(small_cfg, outdir)
    assert verify(result).passed
    lines = (outdir / "tracking.csv").read_text().splitlines()
    header, first, rest = lines[0], lines[1].split(","), lines[2:]
    first[1] = "%.17g" % (float(first[1]) * 10.0 + 100.0)
    (outdir / "tracking.csv").write_text(
        "\n".join([header, ",".join(first)] + rest) + "\n"
    )
    report = verify(load_run(outdir, small_cfg))
    assert not report.passed
    bad = report.failures()
    assert all(c.theorem == 2 for c in bad)
    assert any(c.index == "1" for c in bad)
    assert all(c.worst_time == 0.0 for c in bad if c.index == "1")


def test_report_json_contents(tmp_path, small_cfg):
    run(small_cfg, tmp_path / "out")
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["n_agents"] == 5
    assert len(report["pairs"]) == 10
    assert "2.5" in report["constants"]
    assert report["constants"]["2.5"]["script_N"] == pytest.approx(0.0012)
    assert report["det_diagnostic"] > 0.0
    assert (tmp_path / "out" / "plots.gp").exists()


def test_sweep_summary(tmp_path):
    cfg = bench_config(
        intervals=40,
        dt=2e-3,
        horizon=0.1,
        sweep={"A": [0.0, 2.0]},
        knobs={"D0": 1.0, "D1": 1.0},
    )
    entries = sweep(cfg, tmp_path / "sw")
    assert len(entries) == 2
    assert [e[0]["A"] for e in entries] == [0.0, 2.0]
    summary = json.loads((tmp_path / "sw" / "sweep_summary.json").read_text())
    assert len(summary) == 2
    assert all("worst_margins" in s for s in summary)


def test_convergence_needs_levels(small_cfg):
    with pytest.raises(ValueError, match="3 levels"):
        convergence_study(small_cfg, 2)
    with pytest.raises(ValueError, match="unknown"):
        convergence_study(small_cfg, 3, problem="bogus")


# ---------------------------------------------------------------------------
# CLI

def test_cli_run_pass(tmp_path, capsys):
    cfg_path = _write(tmp_path, "small.toml", SMALL_TOML)
    code = cli.main(["run", str(cfg_path), "--out", str(tmp_path / "out")])
    out = capsys.readouterr().out
    assert code == cli.EXIT_OK
    assert "verification: PASS" in out
    assert "theorem 4" in out


def test_cli_run_verify_fail(tmp_path, capsys):
    cfg_path = _write(tmp_path, "fail.toml", FAILING_TOML)
    code = cli.main(["run", str(cfg_path), "--out", str(tmp_path / "out")])
    out = capsys.readouterr().out
    assert code == cli.EXIT_VERIFY_FAIL
    assert "verification: FAIL" in out


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_cli_solver_abort(tmp_path, capsys):
    cfg_path = _write(tmp_path, "abort.toml", ABORT_TOML)
    code = cli.main(["run", str(cfg_path), "--out", str(tmp_path / "out")])
    err = capsys.readouterr().err
    assert code == cli.EXIT_SOLVER_ABORT
    assert "solver abort" in err


def test_cli_config_error(tmp_path, capsys):
    cfg_path = _write(tmp_path, "bad.toml", "[plant]\nalpha = 1.0\n")
    code = cli.main(["run", str(cfg_path)])
    err = capsys.readouterr().err
    assert code == cli.EXIT_CONFIG_ERROR
    assert "lambda" in err


def test_cli_verify_roundtrip(tmp_path, capsys):
    cfg_path = _write(tmp_path, "small.toml", SMALL_TOML)
    assert cli.main(["run", str(cfg_path), "--out", str(tmp_path / "out")]) == 0
    capsys.readouterr()
    code = cli.main(["verify", str(tmp_path / "out"), "--config", str(cfg_path)])
    assert code == cli.EXIT_OK
    assert "verification: PASS" in capsys.readouterr().out


def test_cli_constants(tmp_path, capsys):
    cfg_path = _write(tmp_path, "small.toml", SMALL_TOML)
    assert cli.main(["constants", str(cfg_path)]) == cli.EXIT_OK
    dump = json.loads(capsys.readouterr().out)
    assert dump["2.5"]["script_N"] == pytest.approx(0.0012)
    assert dump["det_diagnostic"] > 0.0


def test_cli_converge_bad_levels(tmp_path, capsys):
    cfg_path = _write(tmp_path, "small.toml", SMALL_TOML)
    code = cli.main(["converge", str(cfg_path), "--levels", "2"])
    assert code == cli.EXIT_CONFIG_ERROR


def test_cli_output_root_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path))
    cfg_path = _write(tmp_path, "small.toml", SMALL_TOML)
    code = cli.main(["run", str(cfg_path), "--out", "rundir"])
    assert code == cli.EXIT_OK
    assert (tmp_path / "rundir" / "report.json").exists()
