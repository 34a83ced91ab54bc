import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drivendicke import cli, config as cfg
from drivendicke.errors import ConfigError
from drivendicke.model import ModelParams

SMALL = ["--override", "model.n_ph=6", "--override", "model.T=0.1"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@settings(max_examples=40, deadline=None)
@given(g=st.floats(0, 1.2), T=st.floats(0.001, 1.0), Omega=st.floats(0, 0.3),
       n_ph=st.integers(1, 40), observable=st.sampled_from(["g2", "eof", "flux"]),
       fmt=st.sampled_from(["csv", "json"]))
def test_config_roundtrip(g, T, Omega, n_ph, observable, fmt):
    config = cfg.RunConfig(model=ModelParams(g=g, T=T, Omega=Omega, n_ph=n_ph),
                           sweep=cfg.SweepSpec(observable=observable),
                           output=cfg.OutputSpec(format=fmt))
    assert cfg.loads(cfg.dumps(config)) == config


def test_overrides():
    config = cfg.apply_overrides(cfg.RunConfig(), [
        "model.g=0.5", "model.symmetric=false", "output.format=json", "sweep.observable='eof'"])
    assert config.model.g == 0.5
    assert config.model.symmetric is False
    assert config.output.format == "json"
    assert config.sweep.observable == "eof"
    assert cfg.apply_overrides(config, ["model.n_ph=12.0"]).model.n_ph == 12


@pytest.mark.parametrize("override", [
    "model.nope=1", "nosection.g=1", "model.g", "g=0.5", "model.g='x'", "model.n_ph=1.5",
    "output.format=xml", "sweep.observable=entropy", "model.g=-1",
])
def test_bad_overrides(override):
    with pytest.raises(ConfigError):
        cfg.apply_overrides(cfg.RunConfig(), [override])


def test_unknown_keys_in_file(tmp_path):
    with pytest.raises(ConfigError, match="model.typo"):
        cfg.loads("[model]\ntypo = 1\n")
    with pytest.raises(ConfigError, match="extra"):
        cfg.loads("[extra]\nx = 1\n")
    with pytest.raises(ConfigError):
        cfg.loads("[model\n")
    with pytest.raises(ConfigError):
        cfg.load(tmp_path / "missing.toml")


def test_sweep_budget():
    with pytest.raises(ConfigError):
        cfg.SweepSpec(T_steps=30, g_steps=30)


def test_spectrum_csv_and_peak_table(tmp_path):
    out = tmp_path / "spec.csv"
    code = cli.main(["spectrum", "--out", str(out), *SMALL, "--override", "model.g=0.4",
                     "--override", "spectrum.n_points=101"])
    assert code == 0
    rows = read_csv(out)
    assert len(rows) == 101
    assert all(float(r["S"]) >= 0 for r in rows)
    peaks = json.loads((tmp_path / "spec.peaks.json").read_text())
    assert peaks["metadata"]["config"]["model"]["g"] == 0.4
    assert peaks["peaks"]


def test_output_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["spectrum", "--format", "json", *SMALL, "--override", "model.g=0.4",
            "--override", "model.Omega=0.05", "--override", "spectrum.n_points=51"]
    assert cli.main([*args, "--out", str(a)]) == 0
    assert cli.main([*args, "--out", str(b)]) == 0
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    # only the echoed output path differs
    assert da["metadata"]["config"]["output"].pop("path") == str(a)
    db["metadata"]["config"]["output"].pop("path")
    assert da == db


def test_g2_curve(tmp_path):
    out = tmp_path / "g2.csv"
    code = cli.main(["g2", "--out", str(out), *SMALL, "--override", "model.g=0.5",
                     "--override", "g2.tau_max=10.0", "--override", "g2.n_tau=5"])
    assert code == 0
    rows = read_csv(out)
    assert [float(r["tau"]) for r in rows] == [0, 2.5, 5, 7.5, 10]


def test_eof_command(tmp_path):
    out = tmp_path / "eof.json"
    code = cli.main(["eof", "--format", "json", "--out", str(out), *SMALL,
                     "--override", "model.N=2", "--override", "model.g=0.4"])
    assert code == 0
    result = json.loads(out.read_text())["result"]
    assert 0 <= result["eof"] <= 1
    assert result["x_form_residual"] < 1e-8


def test_config_error_exit_code(tmp_path, capsys):
    assert cli.main(["spectrum", "--override", "model.bogus=1"]) == 1
    assert "bogus" in capsys.readouterr().err
    assert cli.main(["nonsense"]) == 1
    assert cli.main(["spectrum", "--config", str(tmp_path / "none.toml")]) == 1
    assert cli.main(["sweep", "--workers", "0"]) == 1


def test_numerical_error_exit_code(capsys):
    # a decoupled emitter leaves the stationary state undetermined
    assert cli.main(["g2", *SMALL, "--override", "model.g=0.0"]) == 2
    assert "NonUniqueStationaryStateError" in capsys.readouterr().err


def test_sweep_records_failures_and_matches_single_points(tmp_path):
    out = tmp_path / "sweep.csv"
    overrides = ["sweep.T_min=0.05", "sweep.T_max=0.1", "sweep.T_steps=2",
                 "sweep.g_min=0.0", "sweep.g_max=0.5", "sweep.g_steps=2"]
    args = ["sweep", "--out", str(out), "--override", "model.n_ph=6"]
    for o in overrides:
        args += ["--override", o]
    assert cli.main(args) == 0
    rows = read_csv(out)
    assert len(rows) == 4
    failed = [r for r in rows if r["error"]]
    assert {float(r["g"]) for r in failed} == {0.0}
    assert all(np.isnan(float(r["g2"])) for r in failed)
    ok = [r for r in rows if not r["error"]]
    for r in ok:
        single = tmp_path / "single.csv"
        assert cli.main(["g2", "--out", str(single), "--override", "model.n_ph=6",
                         "--override", f"model.g={r['g']}", "--override", f"model.T={r['T']}"]) == 0
        assert float(read_csv(single)[0]["g2_0"]) == float(r["g2"])


def test_parallel_sweep_matches_serial(tmp_path):
    base = ["sweep", "--override", "model.n_ph=5", "--override", "sweep.T_steps=2",
            "--override", "sweep.g_steps=2", "--override", "sweep.g_min=0.2"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main([*base, "--out", str(a)]) == 0
    assert cli.main([*base, "--out", str(b), "--workers", "2"]) == 0
    assert a.read_text() == b.read_text()


def test_quasienergies(tmp_path):
    out = tmp_path / "q.csv"
    code = cli.main(["quasienergies", "--out", str(out), "--override", "model.n_ph=6",
                     "--override", "model.g_prime=0.0", "--override", "quasienergies.g_steps=3",
                     "--override", "quasienergies.n_levels=6"])
    assert code == 0
    rows = read_csv(out)
    zero = [r for r in rows if float(r["g"]) == 0.0]
    # uncoupled levels are integer multiples of omega_0
    for r in zero:
        assert float(r["E"]) == pytest.approx(round(float(r["E"])), abs=1e-12)
        assert float(r["E_plus_wd"]) == pytest.approx(float(r["E"]) + 1)
    assert (tmp_path / "q.crossings.csv").exists()


def test_quasienergies_crossings_with_counter_rotating_terms(tmp_path):
    out = tmp_path / "q.csv"
    code = cli.main(["quasienergies", "--out", str(out), "--override", "model.n_ph=8",
                     "--override", "model.g=1.0", "--override", "model.g_prime=1.0",
                     "--override", "quasienergies.g_steps=21",
                     "--override", "quasienergies.n_levels=8"])
    assert code == 0
    assert read_csv(tmp_path / "q.crossings.csv")


def test_stdout_and_console_script():
    proc = subprocess.run([sys.executable, "-m", "drivendicke.cli", "g2", "--override",
                           "model.n_ph=5", "--override", "model.g=0.4"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "g2_0"
    assert float(proc.stdout.splitlines()[1]) > 0
