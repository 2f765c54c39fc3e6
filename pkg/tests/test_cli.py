"""End-to-end command line tests: CSV contracts, config precedence, exit
codes, determinism."""

import os

import numpy as np
import pytest

from cpmstc.cli import RunConfig, build_config, main, parse_config_file


def run_cli(args):
    return main(list(args))


class TestConfigResolution:
    def test_h_fraction_normalization(self):
        cfg = RunConfig(h="1/2")
        assert cfg.m0_p() == (1, 4)  # h = 2*m0/p
        cfg = RunConfig(h="2/3")
        assert cfg.m0_p() == (1, 3)

    def test_bad_h_rejected(self):
        with pytest.raises(ValueError):
            RunConfig(h="fast").h_fraction()
        with pytest.raises(ValueError):
            RunConfig(h="0/3").h_fraction()

    def test_grid_expansion_inclusive(self):
        assert RunConfig(ebn0="0:2:20").ebn0_grid() == tuple(float(v) for v in range(0, 21, 2))
        assert len(RunConfig(ebn0="0:2:20").ebn0_grid()) == 11

    def test_bad_grid_rejected(self):
        with pytest.raises(ValueError):
            RunConfig(ebn0="5:-1:0").ebn0_grid()

    def test_ntx_must_match_scheme(self):
        with pytest.raises(ValueError):
            RunConfig(scheme="conventional", ntx=2).scheme_obj()
        assert RunConfig(scheme="parallel-l2", ntx=2).scheme_obj().n_tx == 2

    def test_config_file_parsing(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment line\nscheme = wang-xia\nseed = 9  # trailing\n")
        values = parse_config_file(str(path))
        assert values == {"scheme": "wang-xia", "seed": "9"}

    def test_flag_beats_config_beats_default(self, tmp_path, monkeypatch):
        import argparse
        path = tmp_path / "run.cfg"
        path.write_text("seed = 5\nM = 4\n")
        monkeypatch.delenv("CPMSTC_SEED", raising=False)
        ns = argparse.Namespace(config=str(path), seed=7, M=None)
        cfg = build_config(ns)
        assert cfg.seed == 7          # flag wins
        assert cfg.M == 4             # config beats default
        assert cfg.gamma == RunConfig().gamma  # default preserved

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        import argparse
        monkeypatch.setenv("CPMSTC_SEED", "123")
        cfg = build_config(argparse.Namespace(config=None, seed=None))
        assert cfg.seed == 123
        # config file beats the environment
        path = tmp_path / "run.cfg"
        path.write_text("seed = 5\n")
        cfg = build_config(argparse.Namespace(config=str(path), seed=None))
        assert cfg.seed == 5

    def test_unknown_config_key_rejected(self, tmp_path):
        import argparse
        path = tmp_path / "run.cfg"
        path.write_text("snr = 10\n")
        with pytest.raises(ValueError):
            build_config(argparse.Namespace(config=str(path)))


class TestBerCommand:
    def test_grid_rows_and_header(self, tmp_path):
        code = run_cli(["ber", "--scheme", "parallel-l2", "--ntx", "2",
                        "--nrx", "1", "--h", "1/2", "--M", "4", "--gamma", "2",
                        "--sps", "8", "--ebn0", "0:2:20", "--seed", "42",
                        "--target-errors", "8", "--max-blocks", "6144",
                        "--outdir", str(tmp_path)])
        assert code == 0
        lines = (tmp_path / "ber.csv").read_text().splitlines()
        assert lines[0] == "scheme,n_tx,n_rx,ebn0_db,blocks,bit_errors,ber"
        assert len(lines) == 12  # header + 11 grid points

    def test_rerun_byte_identical(self, tmp_path):
        args = ["ber", "--scheme", "parallel-l2", "--nrx", "1", "--M", "4",
                "--sps", "8", "--ebn0", "4:4:8", "--seed", "1",
                "--target-errors", "5", "--max-blocks", "6144",
                "--outdir", str(tmp_path)]
        assert run_cli(args) == 0
        first = (tmp_path / "ber.csv").read_bytes()
        assert run_cli(args) == 0
        assert (tmp_path / "ber.csv").read_bytes() == first

    def test_invalid_config_exits_one_without_output(self, tmp_path, capsys):
        code = run_cli(["ber", "--scheme", "conventional", "--nrx", "2",
                        "--outdir", str(tmp_path)])
        assert code == 1
        assert "error:" in capsys.readouterr().err
        assert not (tmp_path / "ber.csv").exists()

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            run_cli(["ber", "--scheme", "nonsense"])
        assert exc.value.code == 1


class TestVerifyCommand:
    def test_orthogonal_scheme_passes(self, tmp_path):
        code = run_cli(["verify", "--scheme", "parallel-l2", "--M", "8",
                        "--gamma", "2", "--seed", "3", "--outdir", str(tmp_path)])
        assert code == 0
        text = (tmp_path / "verify.csv").read_text()
        assert "FAIL" not in text

    def test_wang_xia_passes(self, tmp_path):
        assert run_cli(["verify", "--scheme", "wang-xia", "--M", "8",
                        "--gamma", "2", "--outdir", str(tmp_path)]) == 0

    def test_repetition_fails_with_exit_two(self, tmp_path):
        code = run_cli(["verify", "--scheme", "repetition",
                        "--outdir", str(tmp_path)])
        assert code == 2
        text = (tmp_path / "verify.csv").read_text()
        assert "FAIL" in text
        # residual reported near the full correlated energy
        line = [l for l in text.splitlines() if l.startswith("max_l2")][0]
        assert float(line.split(",")[1]) > 0.4


class TestWaveformCommand:
    def test_silent_payload_is_straight_lines(self, tmp_path):
        code = run_cli(["waveform", "--scheme", "parallel-l2", "--blocks", "4",
                        "--data", "zeros", "--outdir", str(tmp_path)])
        assert code == 0
        rows = np.loadtxt(tmp_path / "waveform_tx2.csv", delimiter=",", skiprows=1)
        env = np.hypot(rows[:, 1], rows[:, 2])
        np.testing.assert_allclose(env, env[0], atol=1e-12)
        # the data-independent ramp advances phase linearly: constant slope
        ph = np.unwrap(2 * np.pi * rows[:, 3]) / (2 * np.pi)
        slopes = np.diff(ph)
        np.testing.assert_allclose(slopes, slopes[0], atol=1e-9)

    def test_envelope_constant_for_random_payload(self, tmp_path):
        assert run_cli(["waveform", "--scheme", "wang-xia", "--blocks", "6",
                        "--seed", "9", "--outdir", str(tmp_path)]) == 0
        for m in (1, 2):
            rows = np.loadtxt(tmp_path / f"waveform_tx{m}.csv", delimiter=",",
                              skiprows=1)
            env = np.hypot(rows[:, 1], rows[:, 2])
            np.testing.assert_allclose(env, env[0], atol=1e-12)

    def test_parallel_antenna_one_dump_matches_conventional(self, tmp_path):
        """Same data, same seed, per-antenna energy: the first antenna of the
        parallel code dumps the identical file as plain CPM."""
        a = tmp_path / "a"
        b = tmp_path / "b"
        for scheme, outdir in (("parallel-l2", a), ("conventional", b)):
            assert run_cli(["waveform", "--scheme", scheme, "--blocks", "5",
                            "--seed", "21", "--energy-split", "per-antenna",
                            "--outdir", str(outdir)]) == 0
        assert (a / "waveform_tx1.csv").read_bytes() == (b / "waveform_tx1.csv").read_bytes()


class TestPsdCommand:
    def test_two_antenna_output_with_shift_summary(self, tmp_path):
        code = run_cli(["psd", "--scheme", "parallel-l2", "--M", "8",
                        "--gamma", "2", "--blocks", "2048", "--seed", "3",
                        "--outdir", str(tmp_path)])
        assert code == 0
        lines = (tmp_path / "psd.csv").read_text().splitlines()
        assert lines[0].startswith("# antenna2_shift_ftd = ")
        assert lines[1] == "f_td,psd_db_tx1,psd_db_tx2"
        shift = float(lines[0].split("=")[1])
        assert 0.0 < shift < 0.5

    def test_single_antenna_omits_second_column(self, tmp_path):
        code = run_cli(["psd", "--scheme", "conventional", "--M", "8",
                        "--gamma", "2", "--blocks", "2048",
                        "--outdir", str(tmp_path)])
        assert code == 0
        lines = (tmp_path / "psd.csv").read_text().splitlines()
        assert lines[0] == "f_td,psd_db_tx1"
