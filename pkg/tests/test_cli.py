import json
import re

import numpy as np
import pytest

from burgerslab.fields import ScalarField, VectorField
from burgerslab.harness import io
from burgerslab.harness.cli import effective_config, load_trajectory, main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def error_line(err):
    return json.loads(err.strip().splitlines()[-1])


class TestGenerateInitial:
    def test_potential_zero(self, tmp_path, capsys):
        code, _, _ = run(capsys, "generate-initial", "--kind", "potential", "--psi", "zero",
                         "--n", 16, "--out", tmp_path)
        f = io.read_field(tmp_path / "initial.npbf")
        assert code == 0
        assert isinstance(f, VectorField) and np.all(f.components == 0)

    def test_same_seed_byte_identical(self, tmp_path, capsys):
        for name in ("a", "b"):
            run(capsys, "generate-initial", "--seed", 4, "--n", 32, "--out", tmp_path / name)
        assert (tmp_path / "a/initial.npbf").read_bytes() == (tmp_path / "b/initial.npbf").read_bytes()
        run(capsys, "generate-initial", "--seed", 5, "--n", 32, "--out", tmp_path / "c")
        assert (tmp_path / "a/initial.npbf").read_bytes() != (tmp_path / "c/initial.npbf").read_bytes()

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_fbs_holder_printed(self, tmp_path, capsys, seed):
        # [DERIVED] estimator on exact H = 0.5 samples
        code, out, _ = run(capsys, "generate-initial", "--kind", "fbs", "--H", 0.5, "--d", 1,
                           "--n", 1024, "--seed", seed, "--out", tmp_path)
        assert code == 0
        est = float(re.search(r"holder_exponent=(\S+)", out).group(1))
        assert 0.35 <= est <= 0.65
        assert "curl_defect=" in out

    def test_manifest_contents(self, tmp_path, capsys):
        run(capsys, "generate-initial", "--n", 32, "--seed", 2, "--out", tmp_path)
        man = io.read_manifest(tmp_path)
        assert man["command"] == "generate-initial"
        assert man["seeds"]["initial"] == 2
        assert man["config_hash"] == io.config_hash(man["config"])
        for name, digest in man["files"].items():
            assert io.sha256_file(tmp_path / name) == digest
        assert set(man["files"]) == {"initial.npbf", "summary.csv"}

    def test_bad_n_exit_2(self, tmp_path, capsys):
        code, _, err = run(capsys, "generate-initial", "--n", 7, "--out", tmp_path)
        assert code == 2
        rec = error_line(err)
        assert rec["exit_code"] == 2 and rec["message"]

    def test_size_limit_exit_2(self, tmp_path, capsys):
        # 128^2 = 16384 points exceeds the exact-synthesis limit
        code, _, err = run(capsys, "generate-initial", "--n", 128, "--method", "cholesky",
                           "--out", tmp_path)
        assert code == 2
        assert error_line(err)["error"] == "SizeError"


class TestSimulate:
    def test_zero_initial_zero_noise(self, tmp_path, capsys):
        code, out, _ = run(capsys, "simulate", "--kind", "potential", "--psi", "zero", "--n", 16,
                           "--T", 0.01, "--dt", 1e-3, "--snapshot-every", 5, "--out", tmp_path)
        assert code == 0
        head, rows = io.read_csv(tmp_path / "snapshots.csv")
        assert head[:3] == ["snapshot", "time", "sup_y"]
        assert [float(r[1]) for r in rows] == pytest.approx([0.0, 0.005, 0.01])
        assert all(float(r[2]) == 0.0 for r in rows)
        _, diag = io.read_csv(tmp_path / "diagnostics.csv")
        assert len(diag) == 11

    def test_init_file(self, tmp_path, capsys):
        run(capsys, "generate-initial", "--kind", "potential", "--psi", "cos", "--d", 1,
            "--n", 32, "--L", 6.283185307179586, "--out", tmp_path / "g")
        code, _, _ = run(capsys, "simulate", "--init", tmp_path / "g/initial.npbf", "--d", 1,
                         "--n", 32, "--T", 0.01, "--dt", 1e-3, "--out", tmp_path / "s")
        assert code == 0
        man = io.read_manifest(tmp_path / "s")
        assert man["inputs"]["init"]["sha256"] == io.sha256_file(tmp_path / "g/initial.npbf")

    def test_cfl_exit_4(self, tmp_path, capsys):
        code, _, err = run(capsys, "simulate", "--kind", "potential", "--psi", "cos",
                           "--amplitude", 50, "--n", 64, "--dt", 0.05, "--T", 0.1,
                           "--out", tmp_path)
        assert code == 4
        rec = error_line(err)
        assert rec["exit_code"] == 4 and 0 < rec["suggested_dt"] < 0.05

    def test_noisy_run_round_trip(self, tmp_path, capsys):
        code, _, _ = run(capsys, "simulate", "--d", 2, "--n", 32, "--kind", "rotational",
                         "--noise", "brownian", "--noise-seed", 2, "--T", 0.02, "--dt", 2e-3,
                         "--nu", 0.5, "--out", tmp_path)
        assert code == 0
        traj, path, cfg = load_trajectory(tmp_path)
        assert not path.is_zero
        assert np.array_equal(traj.y[-1], io.read_field(tmp_path / "y_00010.npbf").components)
        assert np.allclose(traj.y - traj.yhat, [path.field(k) for k in range(11)], atol=1e-14)

    def test_unknown_config_section(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text('{"bogus": {}}')
        code, _, err = run(capsys, "simulate", "--config", p, "--out", tmp_path / "o")
        assert code == 2


class TestVerifyColehopf:
    def test_underflow_exit_3(self, tmp_path, capsys):
        code, _, err = run(capsys, "verify-colehopf", "--amplitude", 100, "--nu", 0.01,
                           "--n", 32, "--out", tmp_path)
        assert code == 3
        assert error_line(err)["error"] == "UnderflowError"

    def test_constant_potential(self, tmp_path, capsys):
        g_dir = tmp_path / "psi"
        g_dir.mkdir()
        cfg = effective_config("verify-colehopf", overrides={"grid": {"n": 32}})
        from burgerslab.harness.config import build_grid

        g = build_grid(cfg)
        io.write_field(g_dir / "psi.npbf", ScalarField(g, np.full(g.shape, 1.25)))
        code, out, _ = run(capsys, "verify-colehopf", "--psi", g_dir / "psi.npbf", "--n", 32,
                           "--T", 0.05, "--dt", 1e-2, "--tol", 1e-12, "--out", tmp_path / "o")
        assert code == 0 and "PASS" in out
        _, rows = io.read_csv(tmp_path / "o/colehopf.csv")
        assert max(float(r[1]) for r in rows) <= 1e-12

    def test_verdict_failure_exit_5(self, tmp_path, capsys):
        code, out, _ = run(capsys, "verify-colehopf", "--n", 32, "--T", 0.1, "--dt", 1e-2,
                           "--tol", 1e-15, "--out", tmp_path)
        assert code == 5 and "FAIL" in out
        assert (tmp_path / "colehopf.csv").exists()


class TestVerifyFbsdeCli:
    def test_runs_on_simulate_output(self, tmp_path, capsys):
        run(capsys, "simulate", "--d", 2, "--n", 32, "--kind", "rotational", "--nu", 0.2,
            "--T", 0.1, "--dt", 2e-3, "--out", tmp_path / "t")
        code, out, _ = run(capsys, "verify-fbsde", "--traj", tmp_path / "t", "--points", 3,
                           "--paths", 2000, "--dt-mc", 2e-3, "--seed", 1, "--out", tmp_path / "v")
        assert code == 0
        head, rows = io.read_csv(tmp_path / "v/fbsde.csv")
        assert len(rows) == 3 and head[-1] == "pass"

    def test_tampered_trajectory(self, tmp_path, capsys):
        run(capsys, "simulate", "--d", 1, "--n", 16, "--T", 0.01, "--dt", 1e-3,
            "--out", tmp_path / "t")
        with open(tmp_path / "t/y_00000.npbf", "ab") as fh:
            fh.write(b"\0")
        code, _, err = run(capsys, "verify-fbsde", "--traj", tmp_path / "t",
                           "--out", tmp_path / "v")
        assert code == 2 and "checksum" in error_line(err)["message"]


class TestEstimateHolder:
    def test_on_generated_field(self, tmp_path, capsys):
        run(capsys, "generate-initial", "--d", 1, "--n", 1024, "--seed", 1,
            "--out", tmp_path / "g")
        code, out, _ = run(capsys, "estimate-holder", "--field", tmp_path / "g/initial.npbf",
                           "--out", tmp_path / "h")
        assert code == 0
        _, rows = io.read_csv(tmp_path / "h/holder.csv")
        assert 0.35 <= float(rows[0][1]) <= 0.65


class TestReplay:
    def test_replay_matches(self, tmp_path, capsys, monkeypatch):
        run(capsys, "check-causality", "--n", 32, "--T", 0.02, "--dt", 2e-3, "--nu", 0.5,
            "--out", tmp_path / "a")
        monkeypatch.setenv("BURGERSLAB_THREADS", "8")
        code, out, _ = run(capsys, "replay", "--manifest", tmp_path / "a/manifest.json",
                           "--out", tmp_path / "b")
        assert code == 0 and "mismatches=0" in out

    def test_replay_detects_changed_input(self, tmp_path, capsys):
        run(capsys, "generate-initial", "--d", 1, "--n", 64, "--out", tmp_path / "g")
        run(capsys, "estimate-holder", "--field", tmp_path / "g/initial.npbf",
            "--out", tmp_path / "h")
        (tmp_path / "g/initial.npbf").write_bytes(b"junk")
        code, _, err = run(capsys, "replay", "--manifest", tmp_path / "h",
                           "--out", tmp_path / "h2")
        assert code == 2 and "changed" in error_line(err)["message"]

    def test_replay_reports_mismatch(self, tmp_path, capsys):
        run(capsys, "generate-initial", "--n", 32, "--out", tmp_path / "a")
        man = io.read_manifest(tmp_path / "a")
        man["files"]["initial.npbf"] = "0" * 64
        io.write_manifest(tmp_path / "a", man)
        code, out, _ = run(capsys, "replay", "--manifest", tmp_path / "a",
                           "--out", tmp_path / "b")
        assert code == 5 and "mismatch: initial.npbf" in out


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0
    assert "0.1.0" in capsys.readouterr().out
