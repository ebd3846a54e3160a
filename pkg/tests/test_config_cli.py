"""Config schema round trips and the command-line pipeline end to end."""

import json
from pathlib import Path

import numpy as np
import pytest

from dispersar.cli import main
from dispersar.config import ExperimentConfig
from dispersar.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def minimal_config(**overrides):
    base = {
        "geometry": {"R": 3550.0, "H": 7300.0, "a": 130.0, "N": 32, "M": 25,
                     "f0_hz": 9.6e9, "B_hz": 6.22e8, "c": 3.0e8},
        "targets": [
            {"x_k0": 273.713, "y_k0": -346.167, "sphere": {"k0_alpha": 1.4, "n_rel": 1.4}}
        ],
        "noise": {"snr_db": 3.73, "seed": 13},
    }
    base.update(overrides)
    return base


class TestConfigSchema:
    def test_round_trip_idempotent(self):
        cfg = ExperimentConfig.from_dict(minimal_config())
        once = cfg.to_dict()
        twice = ExperimentConfig.from_dict(once).to_dict()
        assert once == twice

    def test_checked_in_configs_parse_and_round_trip(self):
        for path in sorted(CONFIGS.glob("*.json")):
            cfg = ExperimentConfig.from_file(path)
            again = ExperimentConfig.from_dict(cfg.to_dict())
            assert cfg.to_dict() == again.to_dict(), path.name

    def test_meter_coordinates(self):
        raw = minimal_config()
        raw["targets"] = [{"x_m": 1.5, "y_m": -2.0, "rho": [0.01, 0.0]}]
        cfg = ExperimentConfig.from_dict(raw)
        assert cfg.targets[0].x == 1.5 and cfg.targets[0].y == -2.0
        geometry = cfg.build_geometry()
        targets = cfg.build_targets(geometry)
        assert np.all(targets.targets[0].spectrum.values == 0.01)

    def test_k0_coordinates_converted(self):
        cfg = ExperimentConfig.from_dict(minimal_config())
        geometry = cfg.build_geometry()
        assert cfg.targets[0].x * geometry.k0 == pytest.approx(273.713, rel=1e-12)

    @pytest.mark.parametrize(
        "mutate,fragment",
        [
            (lambda d: d["geometry"].pop("R"), "geometry.R"),
            (lambda d: d["geometry"].update(R=-5.0), "geometry.R"),
            (lambda d: d["noise"].pop("seed"), "noise.seed"),
            (lambda d: d["targets"].append({"x_k0": 0.0, "y_k0": 0.0}), "targets[1]"),
            (lambda d: d["targets"][0].pop("sphere"), "targets[0]"),
            (lambda d: d["targets"][0]["sphere"].update(n_rel=-1.0), "sphere.n_rel"),
            (lambda d: d.update(imaging={"epsilon": 2.0}), "imaging.epsilon"),
            (lambda d: d.update(bogus=1), "unknown"),
            (lambda d: d["geometry"].update(f0_Hz=1.0), "geometry.*unknown"),
            (lambda d: d.update(imaging={"zoom": {"epsilom": 0.1}}), "imaging.zoom.*unknown"),
            (lambda d: d["targets"][0]["sphere"].update(nrel=1.2), "sphere.*unknown"),
        ],
    )
    def test_validation_errors_carry_field_paths(self, mutate, fragment):
        raw = minimal_config()
        mutate(raw)
        with pytest.raises(ConfigError, match=fragment.replace("[", r"\[").replace("]", r"\]")):
            ExperimentConfig.from_dict(raw)

    def test_mixed_units_rejected(self):
        raw = minimal_config()
        raw["targets"][0]["x_m"] = 1.0
        with pytest.raises(ConfigError, match="exactly one"):
            ExperimentConfig.from_dict(raw)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    ws = tmp_path_factory.mktemp("cli")
    cfg = CONFIGS / "fig2_fig3_single_target.json"
    code = main(["synthesize", "--config", str(cfg), "--out", str(ws)])
    assert code == 0
    return ws


class TestCliPipeline:
    def test_synthesize_outputs(self, workspace):
        data_csv = workspace / "data.csv"
        assert data_csv.exists()
        head = data_csv.read_text().splitlines()
        assert head[0].startswith("# geometry=")
        assert "snr_db=3.73" in head[1]
        meta = json.loads((workspace / "run_meta.json").read_text())
        assert meta["command"] == "synthesize"

    def test_synthesize_deterministic(self, workspace, tmp_path):
        cfg = CONFIGS / "fig2_fig3_single_target.json"
        assert main(["synthesize", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        assert (tmp_path / "data.csv").read_bytes() == (workspace / "data.csv").read_bytes()

    def test_image_and_zoom(self, workspace, capsys):
        cfg = CONFIGS / "fig2_fig3_single_target.json"
        code = main([
            "image", "--config", str(cfg),
            "--data", str(workspace / "data.csv"), "--out", str(workspace),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "(k0 x, k0 y)" in out
        assert (workspace / "overview.csv").exists()
        assert (workspace / "overview.png").exists()
        first = (workspace / "overview.csv").read_text().splitlines()[0]
        assert first == "x_k0,y_k0,value"

        code = main([
            "zoom", "--config", str(cfg),
            "--data", str(workspace / "data.csv"), "--out", str(workspace),
        ])
        assert code == 0
        peaks = (workspace / "zoom_peaks.csv").read_text().splitlines()
        assert peaks[0] == "zoom,x_k0,y_k0,x_m,y_m"
        # seeded realization: cross-range within one zoom cell of truth,
        # range shifted by about -3.5/k0 (30 percent band)
        _, x_k0, y_k0, _, _ = peaks[1].split(",")
        assert abs(float(x_k0) - 273.713) <= 0.2001
        assert -4.55 <= float(y_k0) - (-346.167) <= -2.45

    def test_zoom_at_eps_one_is_normalized_crop(self, workspace, tmp_path):
        raw = json.loads((CONFIGS / "fig2_fig3_single_target.json").read_text())
        raw["imaging"]["zoom"]["epsilon"] = 1.0
        raw["imaging"]["zoom"]["centers"] = "targets"
        cfg_path = tmp_path / "eps1.json"
        cfg_path.write_text(json.dumps(raw))
        code = main([
            "zoom", "--config", str(cfg_path),
            "--data", str(workspace / "data.csv"), "--out", str(tmp_path),
        ])
        assert code == 0
        rows = np.loadtxt(tmp_path / "zoom_1.csv", delimiter=",", skiprows=1)
        values = rows[:, 2]
        assert values.max() == 1.0 and values.min() >= 0.0
        assert len(np.unique(values)) > 10  # identity kept the structure

    def test_rcs_command_clean_recovery(self, workspace, tmp_path, capsys):
        cfg = CONFIGS / "fig6_single_target_rcs.json"
        code = main([
            "rcs", "--config", str(cfg),
            "--data", str(workspace / "data.csv"), "--out", str(tmp_path),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "max relative error" in out
        lines = (tmp_path / "rcs_target.csv").read_text().splitlines()
        assert lines[0] == "omega_rad_s,sigma_m2,sigma_normalized,rel_error_vs_truth"
        errors = [float(r.split(",")[-1]) for r in lines[1:]]
        assert max(errors) < 1e-2

    def test_rangeshift_command(self, tmp_path):
        raw = json.loads((CONFIGS / "fig4_fig5_sweeps.json").read_text())
        raw["analysis"]["rangeshift"].update(
            k0_alpha_start=0.4, k0_alpha_stop=0.8, k0_alpha_step=0.2, samples=801
        )
        cfg_path = tmp_path / "sweep.json"
        cfg_path.write_text(json.dumps(raw))
        assert main(["rangeshift", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
        sweep = (tmp_path / "range_shift_sweep.csv").read_text().splitlines()
        assert sweep[0] == "k0_alpha,Y_numeric,Y_estimate,y_numeric_k0units,y_estimate_k0units"
        assert len(sweep) == 4
        sizes = (tmp_path / "rcs_size_sweep.csv").read_text().splitlines()
        assert sizes[0] == "k0_alpha,sigma_m2,sigma_normalized"

    def test_multircs_command(self, tmp_path):
        cfg = CONFIGS / "fig8_fig9_fig10_three_targets.json"
        assert main(["synthesize", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        code = main([
            "multircs", "--config", str(cfg),
            "--data", str(tmp_path / "data.csv"), "--out", str(tmp_path),
        ])
        assert code == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert len(report["locations_k0"]) == 3
        assert report["condition_numbers"]["max"] < 100
        for q in (1, 2, 3):
            assert (tmp_path / f"rcs_target_{q}.csv").exists()

    def test_threads_flag_equivalent(self, workspace, tmp_path):
        cfg = CONFIGS / "fig2_fig3_single_target.json"
        a, b = tmp_path / "a", tmp_path / "b"
        for out, threads in ((a, "1"), (b, "2")):
            out.mkdir()
            code = main([
                "image", "--config", str(cfg), "--data", str(workspace / "data.csv"),
                "--out", str(out), "--threads", threads,
            ])
            assert code == 0
        assert (a / "overview.csv").read_bytes() == (b / "overview.csv").read_bytes()


class TestCliErrors:
    def test_config_error_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(minimal_config(bogus=True)))
        assert main(["synthesize", "--config", str(bad), "--out", str(tmp_path)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_seed_exit_2(self, tmp_path, capsys):
        raw = minimal_config()
        del raw["noise"]["seed"]
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(raw))
        assert main(["synthesize", "--config", str(bad), "--out", str(tmp_path)]) == 2
        assert "noise.seed" in capsys.readouterr().err

    def test_numerical_failure_exit_3(self, tmp_path, capsys):
        # zero data matrix cannot be normalized: exit code 3
        raw = minimal_config()
        del raw["noise"]
        raw["targets"] = [{"x_k0": 0.0, "y_k0": 0.0, "rho": [0.0, 0.0]}]
        cfg_path = tmp_path / "zero.json"
        cfg_path.write_text(json.dumps(raw))
        assert main(["synthesize", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
        code = main([
            "image", "--config", str(cfg_path),
            "--data", str(tmp_path / "data.csv"), "--out", str(tmp_path),
        ])
        assert code == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_dimension_mismatch_exit_2(self, tmp_path):
        raw = minimal_config()
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(raw))
        assert main(["synthesize", "--config", str(cfg_path), "--out", str(tmp_path)]) == 0
        raw["geometry"]["M"] = 16
        cfg_smaller = tmp_path / "cfg16.json"
        cfg_smaller.write_text(json.dumps(raw))
        code = main([
            "image", "--config", str(cfg_smaller),
            "--data", str(tmp_path / "data.csv"), "--out", str(tmp_path),
        ])
        assert code == 2

    def test_seed_override(self, tmp_path):
        cfg = CONFIGS / "fig2_fig3_single_target.json"
        a, b = tmp_path / "a", tmp_path / "b"
        a.mkdir(), b.mkdir()
        assert main(["synthesize", "--config", str(cfg), "--out", str(a), "--seed", "99"]) == 0
        assert main(["synthesize", "--config", str(cfg), "--out", str(b)]) == 0
        assert (a / "data.csv").read_bytes() != (b / "data.csv").read_bytes()
