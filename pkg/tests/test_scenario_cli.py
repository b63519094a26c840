import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from bicwave import cli, runner
from bicwave.config import ConfigError, load_config, parse_config
from bicwave.export import DB_FLOOR, export_beampattern, export_spectrum, to_db
from bicwave.signal_model import ArrayScenario
from bicwave.solver import SolveReport
from bicwave.spectral_mask import build_mask

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def write(tmp_path, raw, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return path


def minimal_nullform(**overrides):
    raw = {
        "schema_version": 1,
        "mode": "nullform",
        "array": {"M": 2, "N": 2, "f_c": 1.0e9, "B": 200.0e6, "K": 5},
        "null_angles_deg": [45],
        "E_R": 0.5,
    }
    raw.update(overrides)
    return raw


def desk_nullform(**overrides):
    raw = {
        "mode": "nullform",
        "array": {"M": 4, "N": 8, "f_c": 1.0e9, "B": 200.0e6, "K": 19},
        "null_angles_deg": [30, 100],
        "protected_bands": [{"f_lo": 1.05e9, "f_hi": 1.05e9}],
        "E_R": 0.3,
        "solver": {"seed": 3},
    }
    raw.update(overrides)
    return raw


def fake_report(x):
    x = np.asarray(x, dtype=complex)
    return SolveReport(
        x_star=x, x_final=x, trace=[], converged=True, iterations_used=0, seed=0, lam=1.0, E_R=0.1,
        alignment="template", cost_final=0.0, cost_star=0.0, modulus_dev=0.0,
        spectral_error_final=0.0, spectral_error_star=0.0,
    )


class TestLoadConfig:
    def test_minimal(self, tmp_path):
        cfg = load_config(write(tmp_path, minimal_nullform()))
        assert cfg.scenario().L == 4
        assert cfg.E_R == (0.5,) and not cfg.is_sweep

    def test_vhf_scenario(self):
        cfg = load_config(SCENARIOS / "nullform_vhf.yaml")
        sc = cfg.scenario()
        assert (sc.M, sc.N) == (16, 32)
        assert cfg.desired_grid().size == 0
        mask = build_mask(sc, cfg.band_spec(), cfg.E_R[0])
        np.testing.assert_array_equal(sc.bins[mask.stop_bins], [5])
        assert cfg.null_angles_deg == (10.0, 40.0, 120.0)

    def test_reversed_band_named(self, tmp_path):
        raw = minimal_nullform(protected_bands=[{"f_lo": 1.05e9, "f_hi": 1.0e9}])
        with pytest.raises(ConfigError) as exc:
            load_config(write(tmp_path, raw))
        assert any("protected_bands[0]" in p and "f_lo > f_hi" in p for p in exc.value.problems)

    def test_all_problems_listed(self, tmp_path):
        raw = minimal_nullform(
            protected_bands=[{"f_lo": 1.2e9, "f_hi": 1.3e9}],
            null_angles_deg=[200],
            E_R=-1,
            solver={"zeta_inner": 0, "alignment": "x"},
            extra=1,
        )
        with pytest.raises(ConfigError) as exc:
            load_config(write(tmp_path, raw))
        text = " | ".join(exc.value.problems)
        for fragment in ("unknown key 'extra'", "outside", "null angle 200", "E_R must be nonnegative",
                         "stopping thresholds", "solver.alignment"):
            assert fragment in text

    def test_box_checks(self, tmp_path):
        raw = minimal_nullform(mode="beampattern", null_angles_deg=[],
                               desired_boxes=[{"theta_lo": 100, "theta_hi": 90, "f_lo": 0.95e9, "f_hi": 1.0e9},
                                              {"theta_lo": 10, "theta_hi": 190, "f_lo": 0.95e9, "f_hi": 1.0e9}])
        with pytest.raises(ConfigError) as exc:
            load_config(write(tmp_path, raw))
        text = " | ".join(exc.value.problems)
        assert "desired_boxes[0]: theta_lo > theta_hi" in text and "desired_boxes[1]: angles outside" in text

    def test_parse_error(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("mode: [unclosed\n")
        with pytest.raises(ConfigError, match="parse error"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "nope.yaml")

    def test_spacing_options(self):
        cfg = parse_config(minimal_nullform(array={"M": 2, "N": 2, "f_c": 1e9, "B": 2e8, "K": 3, "d_meters": 0.1}))
        assert cfg.scenario().d == 0.1
        cfg = parse_config(minimal_nullform(array={"M": 2, "N": 2, "f_c": 1e9, "B": 2e8, "K": 3, "d_over_halfwavelength": 2}))
        assert cfg.scenario().d == pytest.approx(299792458.0 / 1e9)

    def test_desired_grid(self):
        cfg = load_config(SCENARIOS / "boxes.yaml")
        sc = cfg.scenario()
        d = cfg.desired_grid()
        assert d.shape == (180, 32)
        assert np.sum(d ** 2) == pytest.approx(sc.K * sc.N * sc.L)
        theta = sc.angles_deg
        f = sc.bin_frequencies
        zero = d == 0
        # independent reconstruction of the two boxes
        box1 = ((theta >= 40) & (theta <= 80))[:, None] & ((f >= 943.75e6) & (f <= 981.25e6))[None, :]
        box2 = ((theta >= 120) & (theta <= 160))[:, None] & ((f >= 962.5e6) & (f <= 1.0e9))[None, :]
        np.testing.assert_array_equal(zero, box1 | box2)

    def test_round_trip(self):
        for name in ("nullform_vhf.yaml", "boxes.yaml", "mainlobe.yaml", "nullform_desk.yaml"):
            cfg = load_config(SCENARIOS / name)
            assert parse_config(yaml.safe_load(yaml.safe_dump(cfg.to_dict()))) == cfg

    def test_overrides(self):
        cfg = load_config(SCENARIOS / "nullform_desk.yaml").with_overrides(seed=9, max_iters=7, E_R=[0.1, 0.2])
        assert cfg.solver.seed == 9 and cfg.solver.max_inner_iters == 7 and cfg.solver.max_outer_iters == 7
        assert cfg.E_R == (0.1, 0.2)
        with pytest.raises(ConfigError):
            cfg.with_overrides(E_R=[-1.0])


class TestExport:
    def test_single_antenna_constant(self, tmp_path):
        sc = ArrayScenario.half_wavelength(1, 8, 1e9, 200e6, 5)
        grid, _ = export_beampattern(fake_report(np.ones(8)), sc, tmp_path)
        lines = grid.read_text().splitlines()
        assert lines[0] == "theta_deg,freq_hz,power,power_db"
        rows = np.array([list(map(float, l.split(","))) for l in lines[1:]])
        assert len(rows) == sc.K * sc.N
        nonzero = rows[rows[:, 2] > 0]
        assert set(nonzero[:, 1]) == {1e9}
        assert np.all(rows[rows[:, 2] == 0, 3] == DB_FLOOR)

    def test_normalization(self, tmp_path):
        sc = ArrayScenario.half_wavelength(3, 4, 1e9, 200e6, 7)
        x = np.exp(2j * np.pi * np.random.default_rng(0).random(sc.L))
        grid, marginal = export_beampattern(fake_report(x), sc, tmp_path)
        for path in (grid, marginal):
            db = np.array([float(l.split(",")[-1]) for l in path.read_text().splitlines()[1:]])
            assert db.max() == 0.0 and np.all(db <= 0) and np.all(np.isfinite(db))
        mean_file, per_file = export_spectrum(fake_report(x), sc, tmp_path)
        assert len(per_file.read_text().splitlines()) == 1 + sc.M * sc.N
        assert mean_file.read_text().splitlines()[0] == "bin,freq_hz,power,power_db"

    def test_floor(self):
        db = to_db(np.array([1.0, 1e-40, 0.0]))
        np.testing.assert_array_equal(db, [0.0, DB_FLOOR, DB_FLOOR])
        np.testing.assert_array_equal(to_db(np.zeros(3)), DB_FLOOR)


class TestRun:
    def test_bundle(self, tmp_path):
        cfg = parse_config(desk_nullform())
        bundle = runner.run(cfg, out_dir=tmp_path / "out")
        assert bundle.ok
        sub = bundle.runs[0].directory
        for name in ("beampattern.csv", "angle_marginal.csv", "spectrum.csv", "spectrum_antennas.csv",
                     "waveform.csv", "trace.csv", "manifest.yaml"):
            assert (sub / name).is_file()
        lines = (sub / "trace.csv").read_text().splitlines()
        header = lines[0].split(",")
        obj = np.array([float(l.split(",")[header.index("objective")]) for l in lines[1:]])
        assert np.all(np.diff(obj) <= 1e-9 * (1 + np.abs(obj[:-1])))
        manifest = yaml.safe_load(bundle.manifest.read_text())
        assert parse_config(manifest["config"]) == cfg
        assert manifest["versions"]["bicwave"]
        sub_manifest = yaml.safe_load((sub / "manifest.yaml").read_text())
        assert sub_manifest["seed"] == 3 and sub_manifest["status"] == "ok"
        summary = bundle.summary_table.read_text().splitlines()
        assert summary[0].startswith("E_R,cost_db,modulus_dev,spectral_error")
        assert len(summary) == 2

    def test_sweep_errors_isolated(self, tmp_path, monkeypatch):
        real = runner.solve_nullform

        def flaky(sc, nulls, mask, params, x0=None):
            if params.E_R == 0.2:
                raise ArithmeticError("boom")
            return real(sc, nulls, mask, params, x0)

        monkeypatch.setattr(runner, "solve_nullform", flaky)
        cfg = parse_config(desk_nullform(E_R=[0.1, 0.2, 0.4]))
        bundle = runner.run(cfg, out_dir=tmp_path, workers=1)
        assert [r.status for r in bundle.runs] == ["ok", "error", "ok"]
        assert "boom" in bundle.runs[1].error
        rows = bundle.summary_table.read_text().splitlines()[1:]
        assert rows[1].endswith(",error") and rows[0].endswith(",ok")

    def test_seed_policy(self):
        shared = parse_config(desk_nullform(E_R=[0.1, 0.2]))
        assert runner.sub_run_seed(shared, 0) == runner.sub_run_seed(shared, 1) == 3
        derived = parse_config(desk_nullform(E_R=[0.1, 0.2], solver={"seed": 3, "sweep_seed": "derived"}))
        a, b = runner.sub_run_seed(derived, 0), runner.sub_run_seed(derived, 1)
        assert a != b and a == runner.sub_run_seed(derived, 0)

    def test_concurrent_matches_serial(self, tmp_path):
        cfg = parse_config(desk_nullform(E_R=[0.2, 0.4]))
        serial = runner.run(cfg, out_dir=tmp_path / "serial", workers=1)
        pooled = runner.run(cfg, out_dir=tmp_path / "pooled", workers=2)
        for a, b in zip(serial.runs, pooled.runs):
            for name in ("waveform.csv", "trace.csv", "beampattern.csv"):
                assert (a.directory / name).read_bytes() == (b.directory / name).read_bytes()


class TestCli:
    def test_validate(self, capsys):
        assert cli.main(["validate", str(SCENARIOS / "nullform_vhf.yaml")]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["valid"] and out["L"] == 512

    def test_bad_config(self, tmp_path, capsys):
        path = write(tmp_path, minimal_nullform(protected_bands=[[1.1e9, 1.0e9]]))
        assert cli.main(["solve", str(path)]) == cli.EXIT_BAD_CONFIG
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ConfigError" and any("f_lo > f_hi" in p for p in err["problems"])

    def test_solve_and_sweep(self, tmp_path, capsys):
        path = write(tmp_path, desk_nullform())
        assert cli.main(["solve", str(path), "--out-dir", str(tmp_path / "a"), "--seed", "5", "--max-iters", "50"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["runs"][0]["status"] == "ok"
        manifest = yaml.safe_load((tmp_path / "a" / "manifest.yaml").read_text())
        assert manifest["config"]["solver"]["seed"] == 5
        assert cli.main(["sweep", str(path), "--er", "0.2,0.4", "--out-dir", str(tmp_path / "b"), "--workers", "1"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert [r["E_R"] for r in out["runs"]] == [0.2, 0.4]

    def test_bad_er_list(self, tmp_path):
        with pytest.raises(SystemExit):
            cli.main(["sweep", str(write(tmp_path, desk_nullform())), "--er", "a,b"])
