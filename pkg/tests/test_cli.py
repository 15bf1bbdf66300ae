"""CLI behavior: output formats, exit codes, and run-to-run determinism.

Everything calls main(argv) in-process so the tests see real stdout and
exit codes without spawning subprocesses.
"""
import json

import numpy as np
import pytest

from percloss import (
    clean_proxy,
    load_wav,
    loss_pesq,
    mix_at_snr,
    save_wav,
    si_sdr,
    snr_db,
    white_noise,
)
from percloss.cli import main


@pytest.fixture
def wav_pair(tmp_path):
    clean = clean_proxy(1.0, 0)
    noisy, _ = mix_at_snr(clean, white_noise(1.0, 1), 5.0)
    clean_path = tmp_path / "clean.wav"
    noisy_path = tmp_path / "noisy.wav"
    save_wav(clean_path, clean)
    save_wav(noisy_path, noisy)
    return clean_path, noisy_path


class TestScore:
    def test_text_output_and_formatting(self, wav_pair, capsys):
        clean_path, noisy_path = wav_pair
        assert main(["score", str(clean_path), str(noisy_path)]) == 0
        out = capsys.readouterr().out
        for label in ("snr_db", "si_sdr_db", "pesq_loss", "stoi_loss",
                      "sdr_pesq", "sdr_stoi", "sdr_pesq_stoi"):
            assert label in out
        clean = load_wav(clean_path)
        noisy = load_wav(noisy_path)
        line = next(l for l in out.splitlines() if l.startswith("snr_db"))
        assert line.split()[1] == f"{snr_db(clean, noisy):.6g}"

    def test_json_full_precision(self, wav_pair, capsys):
        clean_path, noisy_path = wav_pair
        assert main(["score", str(clean_path), str(noisy_path),
                     "--format", "json"]) == 0
        report = json.loads(capsys.readouterr().out)
        clean = load_wav(clean_path)
        noisy = load_wav(noisy_path)
        assert report["si_sdr_db"] == si_sdr(clean, noisy)
        assert report["pesq_loss"] == loss_pesq(clean, noisy).value
        assert report["si_sdr_clamped"] is False
        assert report["alpha"] == 1.0

    def test_identical_pair_flags_clamp(self, wav_pair, capsys):
        clean_path, _ = wav_pair
        assert main(["score", str(clean_path), str(clean_path)]) == 0
        out = capsys.readouterr().out
        assert "[clamped]" in out

    def test_length_mismatch_warns_and_scores(self, wav_pair, tmp_path, capsys):
        clean_path, noisy_path = wav_pair
        short = load_wav(noisy_path)[:-4000]
        short_path = tmp_path / "short.wav"
        save_wav(short_path, short)
        assert main(["score", str(clean_path), str(short_path)]) == 0
        captured = capsys.readouterr()
        assert "length mismatch" in captured.err
        assert "truncating" in captured.err

    def test_missing_file_is_runtime_error(self, tmp_path, capsys):
        ghost = tmp_path / "missing.wav"
        assert main(["score", str(ghost), str(ghost)]) == 1
        assert "error:" in capsys.readouterr().err

    def test_unknown_format_is_usage_error(self, wav_pair):
        clean_path, noisy_path = wav_pair
        with pytest.raises(SystemExit) as excinfo:
            main(["score", str(clean_path), str(noisy_path), "--format", "xml"])
        assert excinfo.value.code == 2


class TestMix:
    def test_writes_wav_at_requested_snr(self, wav_pair, tmp_path, capsys):
        clean_path, _ = wav_pair
        noise_path = tmp_path / "noise.wav"
        save_wav(noise_path, 0.1 * white_noise(1.0, 7))
        out_path = tmp_path / "mixed.wav"
        assert main(["mix", str(clean_path), str(noise_path),
                     "--snr", "3.5", "--out", str(out_path)]) == 0
        assert f"wrote {out_path}" in capsys.readouterr().out
        clean = load_wav(clean_path)
        mixed = load_wav(out_path)
        assert snr_db(clean, mixed) == pytest.approx(3.5, abs=1e-6)

    def test_peak_warning(self, tmp_path, capsys):
        clean_path = tmp_path / "c.wav"
        noise_path = tmp_path / "n.wav"
        save_wav(clean_path, 0.9 * np.sin(2 * np.pi * 440 * np.arange(16000) / 16000))
        save_wav(noise_path, 0.1 * white_noise(1.0, 8))
        out_path = tmp_path / "hot.wav"
        assert main(["mix", str(clean_path), str(noise_path),
                     "--snr", "-20", "--out", str(out_path)]) == 0
        assert "peak amplitude" in capsys.readouterr().err


class TestGradcheck:
    def test_passes_for_sdr(self, capsys):
        assert main(["gradcheck", "--loss", "sdr", "--coords", "8"]) == 0
        out = capsys.readouterr().out
        assert "PASS (tolerance 0.0001)" in out
        assert "max_rel_error" in out

    def test_unknown_loss_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["gradcheck", "--loss", "mse"])
        assert excinfo.value.code == 2


class TestExperiment:
    def test_small_grid_outputs(self, tmp_path, capsys):
        out_dir = tmp_path / "exp"
        assert main(["experiment", "--snr=0,5", "--steps", "4",
                     "--duration", "1.0", "--out", str(out_dir)]) == 0
        out = capsys.readouterr().out
        assert "[noisy @ +0 dB]" in out
        assert "[refine-sdr-pesq @ +5 dB]" in out

        csv_lines = (out_dir / "report.csv").read_text().splitlines()
        assert csv_lines[0] == "condition,snr_db,si_sdr_db,pesq_loss,stoi_loss,steps,seed"
        # 3 oracle conditions + 3 refiners, per SNR
        assert len(csv_lines) == 1 + 6 * 2

        summary = json.loads((out_dir / "summary.json").read_text())
        assert summary["trends"]["psm_si_sdr_ge_iam"]["pass"] is True
        assert "refine_sdr_gain_at_0db" in summary["trends"]
        assert summary["config"]["steps"] == 4

    def test_json_report_format(self, tmp_path):
        out_dir = tmp_path / "expj"
        assert main(["experiment", "--snr", "5", "--steps", "2",
                     "--duration", "1.0", "--format", "json",
                     "--out", str(out_dir)]) == 0
        rows = json.loads((out_dir / "report.json").read_text())
        assert {r["condition"] for r in rows} >= {"noisy", "iam", "psm"}
        assert not (out_dir / "report.csv").exists()

    def test_byte_identical_reruns(self, tmp_path, capsys):
        args = ["experiment", "--snr=0", "--steps", "3",
                "--duration", "1.0", "--seed", "11"]
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(dir_a)]) == 0
        assert main(args + ["--out", str(dir_b)]) == 0
        capsys.readouterr()
        assert (dir_a / "report.csv").read_bytes() == (dir_b / "report.csv").read_bytes()
        assert (dir_a / "summary.json").read_bytes() == (dir_b / "summary.json").read_bytes()

    def test_bad_snr_list_is_runtime_error(self, tmp_path, capsys):
        assert main(["experiment", "--snr", "0,abc",
                     "--out", str(tmp_path / "x")]) == 1
        assert "error:" in capsys.readouterr().err


class TestParser:
    def test_no_command_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_epilog_names_tables_env_var(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--help"])
        assert excinfo.value.code == 0
        assert "PERCLOSS_PESQ_TABLES" in capsys.readouterr().out
