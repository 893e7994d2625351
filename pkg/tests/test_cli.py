import json
import math

import numpy as np
import pytest

from cavityphase import cli
from cavityphase.cavity import build_basis, cylindrical


class TestParseConfig:
    def test_defaults_from_empty_document(self):
        cfg = cli.parse_config("")
        assert cfg["alpha"] == 0.01
        assert cfg["epsilon"] == 0.01
        assert cfg["basis_size"] == 16
        assert cfg["geometry"] == "cylindrical"

    def test_values_and_comments(self):
        cfg = cli.parse_config("""
# a comment
epsilon = 0.02   # trailing comment
geometry = spherical
n = 3
""")
        assert cfg["epsilon"] == 0.02
        assert cfg["geometry"] == "spherical"
        assert cfg["n"] == 3

    def test_epsilon_invariant_rejected(self):
        with pytest.raises(cli.ConfigError, match="epsilon"):
            cli.parse_config("epsilon = 1.5")

    def test_unknown_key_named_with_line(self):
        with pytest.raises(cli.ConfigError, match="line 2.*frobnicate"):
            cli.parse_config("epsilon = 0.01\nfrobnicate = 3\n")

    def test_type_mismatch(self):
        with pytest.raises(cli.ConfigError, match="basis_size"):
            cli.parse_config("basis_size = sixteen")

    def test_malformed_line(self):
        with pytest.raises(cli.ConfigError, match="line 1"):
            cli.parse_config("this is not a key value pair")

    def test_round_trip_through_rendered_text(self):
        basis = build_basis(cylindrical(), 16)
        original = cli.parse_config(f"""
geometry = cylindrical
epsilon = 0.01
omega = {basis.omega_nk(4, 1)!r}
n = 4
N = 1
command = phases
""")
        again = cli.parse_config(cli.config_to_text(original))
        assert again == original


class TestRunCommands:
    def test_spin_outputs(self, tmp_path):
        cfg = cli.parse_config("alpha = 0.02\nspin_omega = 30.0\ncycles = 40\n")
        cfg["command"] = "spin"
        cli.run("spin", cfg, tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "spin"
        assert manifest["seeds"] is None
        body = (tmp_path / "spin.csv").read_text().splitlines()
        import hashlib
        digest = hashlib.sha256(
            (tmp_path / "manifest.json").read_bytes()).hexdigest()
        assert body[0] == f"# manifest_sha256={digest}"
        assert body[1] == "t_over_T,beta0,beta1"
        assert len(body) == 43  # header lines + 41 cycle rows
        assert (tmp_path / "spin_fine.csv").exists()

    def test_spin_rerun_byte_identical(self, tmp_path):
        cfg = cli.parse_config("alpha = 0.015\ncycles = 25\n")
        cfg["command"] = "spin"
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cli.run("spin", cfg, out1)
        cli.run("spin", cfg, out2)
        for name in ("manifest.json", "spin.csv", "spin_fine.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_evolve_trajectory_csv(self, tmp_path):
        cfg = cli.parse_config("""
epsilon = 0.01
omega = 12.344
t_end_periods = 3
steps_per_period = 64
coeff_stride = 64
basis_size = 8
""")
        cfg["command"] = "evolve"
        cli.run("evolve", cfg, tmp_path)
        lines = (tmp_path / "trajectory.csv").read_text().splitlines()
        header = lines[1].split(",")
        assert header[0] == "t" and header[-2:] == ["E", "norm"]
        assert len(header) == 1 + 8 + 8 + 2
        assert len(lines) == 2 + 4  # boundaries 0..3
        row = [float(x) for x in lines[2].split(",")]
        assert row[0] == 0.0
        assert row[1] == pytest.approx(1.0, abs=1e-12)  # ground state at t = 0

    def test_main_exit_codes(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("epsilon = 2.0\n")
        assert cli.main(["spin", "--config", str(bad)]) == 2
        out = json.loads(capsys.readouterr().out)
        assert out["error"] == "config"

        mismatch = tmp_path / "mismatch.cfg"
        mismatch.write_text("command = scan\n")
        assert cli.main(["spin", "--config", str(mismatch)]) == 2

        ok = tmp_path / "ok.cfg"
        ok.write_text("alpha = 0.02\ncycles = 10\n")
        assert cli.main(["spin", "--config", str(ok), "--out",
                         str(tmp_path / "out")]) == 0

    def test_numerical_failure_exit_code(self, tmp_path, capsys):
        # an impossibly tight step budget cannot happen via config, but a
        # basis too small for the requested level can
        cfg_file = tmp_path / "cfg"
        cfg_file.write_text("n = 40\nbasis_size = 16\n")
        code = cli.main(["crosscheck", "--config", str(cfg_file),
                         "--out", str(tmp_path / "out")])
        assert code == 3
        assert json.loads(capsys.readouterr().out)["error"] == "IndexError"

    def test_workers_env_override(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("CAVITYPHASE_WORKERS", "not-a-number")
        cfg = tmp_path / "cfg"
        cfg.write_text("cycles = 5\n")
        assert cli.main(["spin", "--config", str(cfg)]) == 2


class TestPhasesCommand:
    def test_pi_jump_artifacts(self, tmp_path):
        basis = build_basis(cylindrical(), 16)
        cfg = cli.parse_config(f"""
epsilon = 0.01
omega = {basis.omega_nk(2, 1)!r}
n = 2
N = 1
span_rabi = 1.25
""")
        cfg["command"] = "phases"
        cli.run("phases", cfg, tmp_path)
        report = json.loads((tmp_path / "jumps.json").read_text())
        first = [j for j in report["jumps"] if j["t_over_T"] <= 1.0]
        assert len(first) == 1
        assert first[0]["t_over_T"] == pytest.approx(0.5, abs=0.02)
        assert abs(first[0]["magnitude"]) == pytest.approx(math.pi, abs=0.15)
        lines = (tmp_path / "phases.csv").read_text().splitlines()
        assert lines[1] == "t_over_tau,theta,beta0,beta1"
        # beta0 column shows a ~pi discontinuity near t/T = 0.5
        data = np.array([[float(v) for v in line.split(",")]
                         for line in lines[2:]])
        T = report["rabi_period"]
        tau = 2 * math.pi / cfg["omega"]
        x = data[:, 0] * tau / T
        i = np.argmin(np.abs(x - first[0]["t_over_T"]))
        local = np.abs(np.diff(data[max(0, i - 2):i + 2, 2]))
        assert np.max(local) > 2.0
