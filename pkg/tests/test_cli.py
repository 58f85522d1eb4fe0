import hashlib
import json

import numpy as np
import pytest

from wbanet import evalio
from wbanet.cli import main, run_selftest
from wbanet.wavelet import dwt2_numpy


def checksum(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def make_pair(tmp_path, size=32, seed=3):
    out = tmp_path / "data"
    rc = main(["synth", "--size", str(size), "--looks", "4",
               "--seed", str(seed), "-o", str(out)])
    assert rc == 0
    return out


FAST = ["--epochs", "2", "--dim", "8", "--heads", "2", "--patch", "4",
        "--n-per-class", "20"]


class TestSynth:
    def test_writes_three_pgms_and_config(self, tmp_path):
        out = make_pair(tmp_path)
        for name in ("i1.pgm", "i2.pgm", "gt.pgm", "synth_config.json"):
            assert (out / name).exists()

    def test_same_seed_identical_files(self, tmp_path):
        a = make_pair(tmp_path / "a", seed=7)
        b = make_pair(tmp_path / "b", seed=7)
        for name in ("i1.pgm", "i2.pgm", "gt.pgm"):
            assert checksum(a / name) == checksum(b / name)

    def test_oversized_ellipse_exits_2(self, tmp_path, capsys):
        rc = main(["synth", "--size", "32", "--change-fraction", "2.0",
                   "-o", str(tmp_path / "x")])
        assert rc == 2
        assert "error" in capsys.readouterr().err


class TestRun:
    def test_full_run_writes_artifacts(self, tmp_path):
        data = make_pair(tmp_path)
        out = tmp_path / "run"
        rc = main(["run", "--i1", str(data / "i1.pgm"),
                   "--i2", str(data / "i2.pgm"),
                   "--gt", str(data / "gt.pgm"),
                   "--blocks", "1", *FAST, "--seed", "0", "-o", str(out)])
        assert rc == 0
        for name in ("change_map.pgm", "checkpoint.wban",
                     "metrics.json", "run_config.json"):
            assert (out / name).exists()
        report = json.loads((out / "metrics.json").read_text())
        assert 0.0 <= report["pcc"] <= 100.0

    def test_blocks_flag_honored_in_checkpoint(self, tmp_path):
        data = make_pair(tmp_path)
        out = tmp_path / "run"
        main(["run", "--i1", str(data / "i1.pgm"), "--i2",
              str(data / "i2.pgm"), "--blocks", "2", *FAST, "-o", str(out)])
        from wbanet.model import load_checkpoint
        _, cfg = load_checkpoint(out / "checkpoint.wban")
        assert cfg.n_blocks == 2

    def test_missing_gt_skips_metrics(self, tmp_path):
        data = make_pair(tmp_path)
        out = tmp_path / "run"
        rc = main(["run", "--i1", str(data / "i1.pgm"),
                   "--i2", str(data / "i2.pgm"),
                   "--blocks", "1", *FAST, "-o", str(out)])
        assert rc == 0
        assert not (out / "metrics.json").exists()

    def test_extent_mismatch_exits_2(self, tmp_path):
        a = make_pair(tmp_path / "a", size=32)
        b = make_pair(tmp_path / "b", size=16)
        rc = main(["run", "--i1", str(a / "i1.pgm"),
                   "--i2", str(b / "i2.pgm"), "-o", str(tmp_path / "x")])
        assert rc == 2

    def test_degenerate_input_exits_3(self, tmp_path):
        flat = np.full((16, 16), 9.0)
        evalio.write_pgm(tmp_path / "f.pgm", flat)
        rc = main(["run", "--i1", str(tmp_path / "f.pgm"),
                   "--i2", str(tmp_path / "f.pgm"),
                   "-o", str(tmp_path / "x")])
        assert rc == 3

    def test_config_file_precedence(self, tmp_path):
        data = make_pair(tmp_path)
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps(
            {"epochs": 1, "dim": 8, "heads": 2, "patch": 4,
             "n_per_class": 10, "blocks": 2}))
        out = tmp_path / "run"
        # flag overrides the config file's blocks=2
        rc = main(["run", "--i1", str(data / "i1.pgm"),
                   "--i2", str(data / "i2.pgm"),
                   "--config", str(cfg_file), "--blocks", "1",
                   "-o", str(out)])
        assert rc == 0
        resolved = json.loads((out / "run_config.json").read_text())
        assert resolved["config"]["n_blocks"] == 1
        assert resolved["config"]["epochs"] == 1


class TestSweep:
    def test_csv_rows_and_determinism(self, tmp_path):
        data = make_pair(tmp_path)
        outs = []
        for name in ("s1", "s2"):
            out = tmp_path / name
            rc = main(["sweep-blocks", "--i1", str(data / "i1.pgm"),
                       "--i2", str(data / "i2.pgm"),
                       "--gt", str(data / "gt.pgm"),
                       "--blocks-from", "0", "--blocks-to", "2",
                       *FAST, "--seed", "1", "-o", str(out)])
            assert rc == 0
            outs.append((out / "pcc_vs_n.csv").read_text().splitlines())
        header, *rows = outs[0]
        assert header == "n,pcc,kc,seconds"
        assert len(rows) == 3  # N = 0, 1, 2 including the degenerate row
        # deterministic modulo the wall-clock seconds column
        for r1, r2 in zip(*outs):
            assert r1.split(",")[:3] == r2.split(",")[:3]

    def test_requires_gt(self, tmp_path):
        data = make_pair(tmp_path)
        rc = main(["sweep-blocks", "--i1", str(data / "i1.pgm"),
                   "--i2", str(data / "i2.pgm"), *FAST,
                   "-o", str(tmp_path / "x")])
        assert rc == 2


class TestSelftest:
    def test_fresh_build_passes(self):
        results = run_selftest(n_shapes=20, n_grad_seeds=5)
        assert all(ok for _, ok, _ in results)

    def test_injected_wavelet_sign_bug_detected(self):
        def buggy_dwt(a):
            s = dwt2_numpy(a)
            c = s.shape[-1] // 4
            s[..., c:2 * c] *= -1.0  # flipped LH sign
            return s

        results = run_selftest(dwt2=buggy_dwt, n_shapes=20, n_grad_seeds=2)
        recon = [ok for name, ok, _ in results if "reconstruction" in name]
        assert recon == [False]

    def test_cli_exit_code(self):
        assert main(["selftest"]) == 0
