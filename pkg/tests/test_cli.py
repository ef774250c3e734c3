import io
import os

import numpy as np
import pytest

from hpprop import cli, imagecore, report
from hpprop.denoiser import save_weights
from conftest import random_ppm_bytes
from test_denoiser import random_weights


@pytest.fixture
def ppm_dir(tmp_path, rng):
    d = tmp_path / "inputs"
    d.mkdir()
    for k in range(3):
        (d / f"img{k}.ppm").write_bytes(random_ppm_bytes(rng, 8, 6))
    return d


@pytest.fixture
def weights_file(tmp_path, rng):
    path = tmp_path / "net.hpw1"
    save_weights(random_weights(rng, scale=0.01), str(path))
    return str(path)


def run_cli(argv):
    return cli.main(argv)


class TestParseConfig:
    def test_defaults(self, ppm_dir, tmp_path):
        spec = cli.parse_config(
            ["--input", str(ppm_dir), "--output-dir", str(tmp_path / "out"),
             "--prior-mode", "knowledge"]
        )
        assert spec.config.gamma == 2.2
        assert spec.config.t_max == 4
        assert spec.mode == "enhance"
        assert len(spec.inputs) == 3

    def test_default_prior_mode_is_hybrid(self, ppm_dir, tmp_path, weights_file):
        spec = cli.parse_config(
            ["--input", str(ppm_dir), "--output-dir", str(tmp_path / "out"),
             "--weights", weights_file]
        )
        assert spec.config.prior_mode == "hybrid"

    def test_gamma_zero_rejected(self, ppm_dir, tmp_path):
        with pytest.raises(cli.ConfigError):
            cli.parse_config(
                ["--input", str(ppm_dir), "--output-dir", str(tmp_path / "o"),
                 "--prior-mode", "knowledge", "--gamma", "0"]
            )

    def test_flag_overrides_config_file(self, ppm_dir, tmp_path):
        cfg_file = tmp_path / "cfg.txt"
        cfg_file.write_text("mu_I = 5\nprior_mode = knowledge_only\n")
        spec = cli.parse_config(
            ["--input", str(ppm_dir), "--output-dir", str(tmp_path / "o"),
             "--config", str(cfg_file), "--mu-I", "12"]
        )
        assert spec.config.mu_I == 12.0
        assert spec.config.prior_mode == "knowledge_only"

    def test_unknown_config_key(self, ppm_dir, tmp_path):
        cfg_file = tmp_path / "cfg.txt"
        cfg_file.write_text("not_a_key = 1\n")
        with pytest.raises(cli.ConfigError, match="unknown config key"):
            cli.parse_config(
                ["--input", str(ppm_dir), "--output-dir", str(tmp_path / "o"),
                 "--config", str(cfg_file)]
            )

    def test_hybrid_without_weights_is_config_error(self, ppm_dir, tmp_path):
        code = run_cli(
            ["--input", str(ppm_dir), "--output-dir", str(tmp_path / "out")]
        )
        assert code == cli.EXIT_CONFIG
        assert not (tmp_path / "out").exists()

    def test_env_var_weights_fallback(self, ppm_dir, tmp_path, weights_file,
                                      monkeypatch):
        monkeypatch.setenv("HPP_WEIGHTS", weights_file)
        spec = cli.parse_config(
            ["--input", str(ppm_dir), "--output-dir", str(tmp_path / "out")]
        )
        assert spec.weights_path == weights_file


class TestRunJob:
    def test_happy_path_directory(self, ppm_dir, tmp_path):
        out_dir = tmp_path / "out"
        buf = io.StringIO()
        spec = cli.parse_config(
            ["--input", str(ppm_dir), "--output-dir", str(out_dir),
             "--prior-mode", "knowledge", "--t-max", "2"]
        )
        assert cli.run_job(spec, out=buf) == cli.EXIT_OK
        for k in range(3):
            assert (out_dir / f"img{k}_enhanced.ppm").exists()
        lines = buf.getvalue().strip().splitlines()
        assert len(lines) == 3 and all("\tok\t" in L for L in lines)

    def test_inputs_not_modified(self, ppm_dir, tmp_path):
        before = {p.name: p.read_bytes() for p in ppm_dir.iterdir()}
        run_cli(["--input", str(ppm_dir), "--output-dir", str(tmp_path / "o"),
                 "--prior-mode", "knowledge", "--t-max", "1"])
        after = {p.name: p.read_bytes() for p in ppm_dir.iterdir()}
        assert before == after

    def test_deterministic_outputs(self, ppm_dir, tmp_path, weights_file):
        outs = []
        for name in ("o1", "o2"):
            run_cli(["--input", str(ppm_dir), "--output-dir",
                     str(tmp_path / name), "--weights", weights_file,
                     "--t-max", "2"])
            outs.append({
                p.name: p.read_bytes() for p in (tmp_path / name).iterdir()
            })
        assert outs[0] == outs[1]

    def test_partial_failure_exit_code(self, ppm_dir, tmp_path):
        bad = ppm_dir / "broken.ppm"
        bad.write_bytes(b"P6\n4 4\n255\n tooshort")
        buf = io.StringIO()
        spec = cli.parse_config(
            ["--input", str(ppm_dir), "--output-dir", str(tmp_path / "o"),
             "--prior-mode", "knowledge", "--t-max", "1"]
        )
        code = cli.run_job(spec, out=buf)
        assert code == cli.EXIT_PARTIAL
        lines = buf.getvalue().strip().splitlines()
        assert sum("\tfailed\t" in L for L in lines) == 1
        assert sum("\tok\t" in L for L in lines) == 3

    def test_emit_components_and_trace(self, ppm_dir, tmp_path):
        out_dir = tmp_path / "out"
        run_cli(["--input", str(ppm_dir / "img0.ppm"), "--output-dir",
                 str(out_dir), "--prior-mode", "knowledge", "--t-max", "2",
                 "--emit-components", "--emit-trace"])
        assert (out_dir / "img0_I.ppm").exists()
        assert (out_dir / "img0_R.ppm").exists()
        assert (out_dir / "img0_trace.png").exists()
        records = report.read_trace(str(out_dir / "img0_trace.tsv"))
        assert [r.stage for r in records] == [0, 1]
        # emitted components respect the box after quantization
        comp = imagecore.load_image(str(out_dir / "img0_R.ppm"))
        assert comp.min() >= 0.0 and comp.max() <= 1.0

    def test_dehaze_mode(self, ppm_dir, tmp_path):
        out_dir = tmp_path / "out"
        code = run_cli(["--mode", "dehaze", "--input", str(ppm_dir / "img0.ppm"),
                        "--output-dir", str(out_dir), "--prior-mode",
                        "knowledge", "--t-max", "1"])
        assert code == cli.EXIT_OK
        assert (out_dir / "img0_enhanced.ppm").exists()

    def test_bad_weights_file_aborts_before_processing(self, ppm_dir, tmp_path):
        bad = tmp_path / "bad.hpw1"
        bad.write_bytes(b"JUNKJUNK")
        out_dir = tmp_path / "out"
        code = run_cli(["--input", str(ppm_dir), "--output-dir", str(out_dir),
                        "--weights", str(bad)])
        assert code == cli.EXIT_CONFIG
        assert not out_dir.exists()
