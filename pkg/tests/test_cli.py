import csv
import json
import math

import pytest

from qdcavity.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_PARTIAL,
    ConfigError,
    figure_configs,
    format_table,
    main,
    parse_config,
    parse_values,
    resolve,
)
from qdcavity.experiments import ExperimentResult


def write_toml(path, text):
    path.write_text(text)
    return path


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


class TestParseValues:
    def test_forms(self):
        assert parse_values(3, "x") == (3.0,)
        assert parse_values([1, "2"], "x") == (1.0, 2.0)
        assert parse_values("1:3:3", "x") == (1.0, 2.0, 3.0)
        assert parse_values("log:0.01:10:4", "x") == pytest.approx((0.01, 0.1, 1.0, 10.0))

    def test_time_units(self):
        vals = parse_values("5ps:60ps:12", "d", time_units=True)
        assert len(vals) == 12
        assert vals[0] == 0.005 and vals[-1] == 0.06
        assert parse_values("3ns", "d", time_units=True) == (3.0,)

    @pytest.mark.parametrize("spec", ["1:2", "a:b:3", "log:0:1:3", "1:2:x", "3ps", "nan"])
    def test_errors(self, spec):
        with pytest.raises(ConfigError):
            parse_values(spec, "x")


class TestParseConfig:
    def test_empty_physics_gets_defaults(self, tmp_path):
        cfg = parse_config(write_toml(tmp_path / "c.toml", """
experiment = "readout"
[physics]
[sweep]
kappa_ghz = [20]
purcell = [10]
"""))
        p = cfg.physics
        assert (p.delta_e_ghz, p.delta_h_ghz) == (35.0, 20.0)
        assert p.gamma_x_per_ns == p.gamma_y_per_ns == 1.0
        assert p.nu_y_ghz == pytest.approx(-7.5)
        params = cfg.system_params()
        assert params.delta_e == pytest.approx(2 * math.pi * 35)

    def test_negative_kappa_names_field(self, tmp_path):
        path = write_toml(tmp_path / "c.toml", """
experiment = "readout"
[sweep]
kappa_ghz = [-1]
purcell = [10]
""")
        with pytest.raises(ConfigError, match=r"sweep\.kappa_ghz.*> 0"):
            parse_config(path)

    def test_unknown_key(self, tmp_path):
        path = write_toml(tmp_path / "c.toml", """
experiment = "readout"
[physics]
kappa_x_typo = 3
""")
        with pytest.raises(ConfigError, match="kappa_x_typo"):
            parse_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "nope.toml")

    @pytest.mark.parametrize("raw, where", [
        ({"experiment": "readout", "sweep": {"kappa_ghz": 1, "purcell": 1, "g_ghz": 1}}, "sweep"),
        ({"experiment": "readout", "sweep": {"kappa_ghz": 1, "purcell": 1},
          "readout": {"eta": 1.5}}, "readout.eta"),
        ({"experiment": "pulse-init", "sweep": {"kappa_ghz": 1, "purcell": 1}}, "duration_ns"),
        ({"experiment": "teleport"}, "experiment"),
        ({"experiment": "readout", "sweep": {"kappa_ghz": 1, "purcell": 1},
          "numerics": {"n_max_idle": 1.5}}, "numerics.n_max_idle"),
    ])
    def test_validation_paths(self, raw, where):
        with pytest.raises(ConfigError) as exc:
            resolve(raw)
        assert where in str(exc.value)

    def test_explicit_splittings_win_over_field(self):
        cfg = resolve({"experiment": "readout", "sweep": {"kappa_ghz": 1, "purcell": 1},
                       "physics": {"b_field_t": 5, "g_e": 0.5, "g_h": 0.3, "delta_h_ghz": 20}})
        assert cfg.physics.delta_h_ghz == 20
        assert cfg.physics.delta_e_ghz == pytest.approx(0.5 * 13.99624 * 5, rel=1e-5)

    @pytest.mark.parametrize("raw", [
        {"experiment": "readout", "cavity": "bimodal",
         "sweep": {"kappa_ghz": [9.4, 20], "purcell": "log:1:40:5"}, "readout": {"eta": 0.3}},
        {"experiment": "pulse-init", "sweep": {"kappa_ghz": 1, "purcell": 10},
         "pulse": {"kind": "gaussian", "durations": "5ps:60ps:12"}},
        {"experiment": "dephasing", "physics": {"b_field_t": 5, "g_e": 0.5, "g_h": 0.3}},
    ])
    def test_round_trip(self, tmp_path, raw):
        cfg = resolve(raw)
        path = tmp_path / "resolved.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert parse_config(path) == cfg


class TestTables:
    def test_failed_rows_are_dropped_and_booleans_are_words(self):
        rows = [ExperimentResult({"kappa_ghz": 1.0}, "fidelity", 0.123456789123,
                                 extras={"n1": 2.0}, diagnostics={"fock_converged": True}),
                ExperimentResult({"kappa_ghz": 2.0}, "fidelity", math.nan, error="boom")]
        text = format_table(rows)
        lines = text.strip().split("\n")
        assert lines[0] == "kappa_ghz,fidelity,n1,fock_converged"
        assert lines[1] == "1,0.123456789,2,true"
        assert len(lines) == 2


def test_verify_passes(capsys):
    assert main(["verify"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and "0 failure(s)" in out


def test_readout_two_by_two(tmp_path):
    out = tmp_path / "r"
    code = main(["readout", "--axis", "kappa_ghz=1,20", "--axis", "purcell=7,19",
                 "--out", str(out)])
    assert code == EXIT_OK
    rows = read_csv(out / "readout.csv")
    assert len(rows) == 4
    assert list(rows[0])[:6] == ["kappa_ghz", "purcell", "fidelity", "n1", "n2", "threshold"]
    assert [(r["kappa_ghz"], r["purcell"]) for r in rows] == [("1", "7"), ("1", "19"),
                                                              ("20", "7"), ("20", "19")]
    assert all(r["fock_converged"] == "true" for r in rows)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["schema_version"] == 1
    assert manifest["config"]["sweep"]["kappa_ghz"] == [1.0, 20.0]
    assert manifest["tables"]["readout"]["summary"]["errors"] == []


def test_identical_runs_give_identical_csv(tmp_path):
    args = ["steady-init", "--axis", "kappa_ghz=1,20", "--axis", "g_over_kappa=log:0.01:10:4"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    a = (tmp_path / "a" / "steady_init.csv").read_bytes()
    assert a == (tmp_path / "b" / "steady_init.csv").read_bytes()


def test_partial_failure(tmp_path, capsys):
    """The g/kappa = 100 point has a numerically degenerate stationary state."""
    out = tmp_path / "p"
    code = main(["steady-init", "--axis", "kappa_ghz=20", "--axis",
                 "g_over_kappa=log:0.01:100:10", "--out", str(out)])
    assert code == EXIT_PARTIAL
    assert len(read_csv(out / "steady_init.csv")) == 9
    summary = json.loads((out / "manifest.json").read_text())["tables"]["steady_init"]["summary"]
    assert len(summary["errors"]) == 1
    assert summary["errors"][0]["point"]["g_over_kappa"] == 100.0


def test_config_error_exit_code(tmp_path, capsys):
    code = main(["readout", "--axis", "kappa_ghz=-1", "--axis", "purcell=10", "--out", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "sweep.kappa_ghz" in capsys.readouterr().err


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["steady-init", "--axis", "kappa_ghz=1", "--axis", "g_over_kappa=0.1",
                 "--out", str(blocker / "sub")]) == EXIT_CONFIG


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("QDCAVITY_OUTDIR", str(tmp_path / "env"))
    assert main(["steady-init", "--axis", "kappa_ghz=1", "--axis", "g_over_kappa=0.1"]) == EXIT_OK
    assert (tmp_path / "env" / "steady_init.csv").exists()


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["teleport"])


def test_figure_presets_resolve():
    for n in (2, 3, 4, 5, 6):
        for cavity in ("single", "bimodal"):
            for raw, _ in figure_configs(n, cavity):
                resolve(raw)
    (raw, notes), = figure_configs(4, "single")
    assert {9.4, 20.0} <= set(raw["sweep"]["kappa_ghz"])
    assert {7.0, 10.0, 19.0} <= set(raw["sweep"]["purcell"])


@pytest.mark.slow
def test_gaussian_durations_give_twelve_rows(tmp_path):
    out = tmp_path / "g"
    code = main(["pulse-init", "--pulse", "gaussian", "--durations", "5ps:60ps:12",
                 "--out", str(out)])
    assert code == EXIT_OK
    rows = read_csv(out / "pulse_init_gaussian.csv")
    assert len(rows) == 12
    assert rows[0]["duration_ns"] == "0.005" and rows[-1]["duration_ns"] == "0.06"
    assert all(r["fock_converged"] == "true" for r in rows)
