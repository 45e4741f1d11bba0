"""End-to-end command-line runs against temporary directories."""

import json
import os

import numpy as np
import pytest

from phfem.cli import main

STEEL = {"E": 210e9, "nu": 0.3, "rho": 7850.0, "h": 0.01}

INVERTED_MESH = """phmesh 1
nodes 3
0 0
1 0
0 1
triangles 1
0 2 1
boundary 3
0 1 1
1 2 2
2 0 3
"""


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def plate_cfg(**extra):
    cfg = {
        "model": "mindlin",
        "mesh": {"rectangle": {"a": 1.0, "b": 1.0, "nx": 4, "ny": 4}},
        "material": dict(STEEL),
        "boundary": {"1": "clamped", "2": "clamped", "3": "clamped", "4": "clamped"},
    }
    cfg.update(extra)
    return cfg


def run_cli(action, cfg_path, out, *args):
    return main([action, "--config", cfg_path, "--out", str(out), *args])


class TestCheck:
    def test_clamped_plate_passes(self, tmp_path):
        cfg = write_cfg(tmp_path, plate_cfg())
        out = tmp_path / "run"
        assert run_cli("check", cfg, out) == 0
        report = json.loads((out / "check.json").read_text())
        assert report["ok"] is True
        assert report["skew_residual_rel"] <= 1e-12
        assert report["energy_symmetry_rel"] <= 1e-12
        assert report["dirac_max_residual_rel"] <= 1e-12
        assert all(v <= 1e-13 for v in report["constant_annihilation_rel"].values())
        assert report["n_dofs"] > 0
        assert report["constraints_kept"] + report["prescribed_inputs"] > 0

    def test_manifest_materializes_defaults(self, tmp_path):
        cfg = plate_cfg(check={})
        del cfg["boundary"]
        out = tmp_path / "run"
        assert run_cli("check", write_cfg(tmp_path, cfg), out) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        resolved = manifest["config"]
        assert resolved["formulation"] == "vectorial"
        assert resolved["strain_family"] == "p1"
        assert resolved["control_variant"] == "dynamic"
        assert resolved["boundary"] == {"1": "free", "2": "free", "3": "free", "4": "free"}
        assert resolved["check"] == {"tol": 1e-12, "samples": 100}
        assert manifest["action"] == "check"

    def test_beam_model(self, tmp_path):
        cfg = {
            "model": "timoshenko",
            "mesh": {"interval": {"length": 1.0, "n": 16}},
            "material": {"rhoA": 0.785, "Irho": 6.54e-6, "EI": 1750.0, "K": 6730.0},
            "boundary": {"1": "clamped", "2": "free"},
            "check": {"samples": 25},
        }
        out = tmp_path / "run"
        assert run_cli("check", write_cfg(tmp_path, cfg), out) == 0
        report = json.loads((out / "check.json").read_text())
        assert report["ok"] is True


class TestSimulate:
    def sim_cfg(self):
        return plate_cfg(
            simulate={
                "T": 2e-4,
                "dt": 1e-5,
                "initial": {"kind": "random", "seed": 3, "scale": 1e-3},
            }
        )

    def test_writes_trajectory_and_summary(self, tmp_path):
        out = tmp_path / "run"
        assert run_cli("simulate", write_cfg(tmp_path, self.sim_cfg()), out) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["steps"] == 20
        assert summary["dt"] == 1e-5
        assert summary["H_initial"] > 0.0
        # clamped and unforced: the discrete energy balance is exact
        assert abs(summary["delta_H"]) <= 1e-10 * summary["H_initial"]
        assert summary["max_abs_power_residual"] <= 1e-10 * summary["H_initial"]
        assert summary["max_constraint_residual"] <= 1e-8
        header = (out / "trajectory.csv").read_text().split("\n", 1)[0]
        assert header.split(",")[:4] == ["t", "H", "power_residual", "constraint_residual"]

    def test_reruns_are_bit_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, self.sim_cfg())
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli("simulate", cfg, out1, "--threads", "1") == 0
        assert run_cli("simulate", cfg, out2, "--threads", "1") == 0
        assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()
        assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()

    def test_forced_edge_columns_in_csv(self, tmp_path):
        cfg = plate_cfg(
            boundary={
                "1": {
                    "kind": "forced",
                    "signals": [
                        {"type": "sine", "amplitude": 100.0, "frequency": 50.0},
                        0,
                        0,
                    ],
                },
                "2": "clamped",
                "3": "clamped",
                "4": "clamped",
            },
            simulate={"T": 1e-4, "dt": 1e-5},
        )
        out = tmp_path / "run"
        assert run_cli("simulate", write_cfg(tmp_path, cfg), out) == 0
        header = (out / "trajectory.csv").read_text().split("\n", 1)[0]
        cols = header.split(",")
        assert any(c.startswith("u_Qn:t1:") for c in cols)
        assert any(c.startswith("y_Qn:t1:") for c in cols)
        summary = json.loads((out / "summary.json").read_text())
        assert summary["injected_work"] != 0.0


class TestModes:
    def test_modes_outputs(self, tmp_path):
        cfg = plate_cfg(modes={"n_modes": 5})
        out = tmp_path / "run"
        assert run_cli("modes", write_cfg(tmp_path, cfg), out) == 0
        lines = (out / "modes.csv").read_text().strip().split("\n")
        assert lines[0] == "mode,frequency_hz,residual"
        assert len(lines) == 6
        freqs = json.loads((out / "modes.json").read_text())["frequencies_hz"]
        assert len(freqs) == 5
        assert freqs == sorted(freqs)
        assert freqs[0] > 0.0  # fully clamped plate has no rigid motion


class TestExport:
    def test_matrix_files_and_ports(self, tmp_path):
        cfg = plate_cfg()
        out = tmp_path / "run"
        assert run_cli("export-matrices", write_cfg(tmp_path, cfg), out) == 0
        for name in ("M", "Q", "J", "B"):
            text = (out / f"{name}.txt").read_text()
            assert text.startswith("# shape ")
        ports = json.loads((out / "ports.json").read_text())
        first = ports[0]
        assert {"label", "meaning", "tag", "node", "arc", "normal"} <= set(first)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["result"]["matrices"] == ["B", "J", "M", "Q"]
        assert manifest["result"]["nnz"]["M"] > 0


class TestExitCodes:
    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["check", "--config", str(tmp_path / "nope.json")]) == 2
        assert "does not exist" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["check", "--config", str(bad)]) == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_missing_model_key(self, tmp_path):
        cfg = plate_cfg()
        del cfg["model"]
        assert run_cli("check", write_cfg(tmp_path, cfg), tmp_path / "o") == 2

    def test_unknown_top_level_key(self, tmp_path):
        assert run_cli("check", write_cfg(tmp_path, plate_cfg(bogus=1)), tmp_path / "o") == 2

    def test_unknown_model(self, tmp_path):
        assert (
            run_cli("check", write_cfg(tmp_path, plate_cfg(model="kirchhoff")), tmp_path / "o")
            == 2
        )

    def test_unknown_signal_type(self, tmp_path):
        cfg = plate_cfg(
            boundary={
                "1": {"kind": "forced", "signals": [{"type": "square"}, 0, 0]},
                "2": "clamped",
                "3": "clamped",
                "4": "clamped",
            }
        )
        assert run_cli("check", write_cfg(tmp_path, cfg), tmp_path / "o") == 2

    def test_simulate_without_section(self, tmp_path):
        assert run_cli("simulate", write_cfg(tmp_path, plate_cfg()), tmp_path / "o") == 2

    def test_nonpositive_threads(self, tmp_path):
        cfg = write_cfg(tmp_path, plate_cfg())
        assert run_cli("check", cfg, tmp_path / "o", "--threads", "0") == 2

    def test_broken_mesh_file(self, tmp_path, capsys):
        mesh_path = tmp_path / "broken.msh"
        mesh_path.write_text("not a mesh\n")
        cfg = plate_cfg(mesh={"file": str(mesh_path)})
        assert run_cli("check", write_cfg(tmp_path, cfg), tmp_path / "o") == 3
        assert "phfem: error:" in capsys.readouterr().err

    def test_locking_family_rejected_for_kinematic(self, tmp_path):
        cfg = plate_cfg(strain_family="p0", control_variant="kinematic")
        assert run_cli("check", write_cfg(tmp_path, cfg), tmp_path / "o") == 4

    def test_simulation_shorter_than_one_step(self, tmp_path):
        cfg = plate_cfg(simulate={"T": 1e-9, "dt": 1e-5})
        assert run_cli("simulate", write_cfg(tmp_path, cfg), tmp_path / "o") == 5

    def test_unknown_action_is_usage_error(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, plate_cfg())
        assert main(["explode", "--config", cfg]) == 2
        capsys.readouterr()

    def test_help_exits_cleanly(self, capsys):
        assert main(["--help"]) == 0
        assert "check" in capsys.readouterr().out


class TestOrientationRepair:
    def test_inverted_mesh_needs_flag(self, tmp_path):
        mesh_path = tmp_path / "flipped.msh"
        mesh_path.write_text(INVERTED_MESH)
        cfg_obj = plate_cfg(mesh={"file": str(mesh_path)})
        del cfg_obj["boundary"]  # single triangle carries tags 1..3, not 1..4
        cfg = write_cfg(tmp_path, cfg_obj)
        assert run_cli("check", cfg, tmp_path / "a") == 3
        assert run_cli("check", cfg, tmp_path / "b", "--fix-orientation") == 0
        manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
        assert manifest["fix_orientation"] is True


class TestThreadControl:
    def test_env_variable_is_honored(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PHFEM_THREADS", "2")
        monkeypatch.setenv("OMP_NUM_THREADS", "8")
        cfg = write_cfg(tmp_path, plate_cfg())
        out = tmp_path / "run"
        assert run_cli("check", cfg, out) == 0
        assert os.environ["OMP_NUM_THREADS"] == "2"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["threads"] == 2

    def test_flag_overrides_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PHFEM_THREADS", "4")
        cfg = write_cfg(tmp_path, plate_cfg())
        out = tmp_path / "run"
        assert run_cli("check", cfg, out, "--threads", "1") == 0
        assert os.environ["OMP_NUM_THREADS"] == "1"
