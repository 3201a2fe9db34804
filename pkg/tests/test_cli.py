"""Command-line surface: exit codes, stdout formats, output bundles."""

import subprocess
import sys

import pytest

from dwshell.cli import (EXIT_BAD, EXIT_INCONCLUSIVE, EXIT_INPUT, EXIT_OK,
                         main)

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_exit_code_values():
    assert (EXIT_OK, EXIT_BAD, EXIT_INCONCLUSIVE, EXIT_INPUT) == (0, 1, 2, 3)


def test_gscr_prints_value(capsys, tmp_path):
    code, out, _ = run(capsys, "gscr", "single_converter")
    assert code == EXIT_OK and out == "3.5\n"
    code, _, _ = run(capsys, "gscr", "single_converter", "--out", str(tmp_path))
    assert code == EXIT_OK
    assert "gscr: 3.5" in (tmp_path / "network.record").read_text()
    assert (tmp_path / "segment.csv").read_text().startswith("x,z\n")


def test_certify_certified_exit_zero(capsys):
    code, out, _ = run(capsys, "certify", "single_converter",
                       "--freqs", "0.5:200:50", "--no-adaptive")
    assert code == EXIT_OK
    assert out.startswith("verdict: certified_stable")
    assert "gfl1" in out


def test_certify_not_certified_exit_one(capsys):
    code, out, _ = run(capsys, "certify", "single_converter_weak")
    assert code == EXIT_BAD
    assert out.startswith("verdict: not_certified")


def test_certify_centralized_flag(capsys):
    code, out, _ = run(capsys, "certify", "single_converter", "--centralized",
                       "--freqs", "0.5:200:50", "--no-adaptive")
    assert code == EXIT_OK
    assert "mode: centralized" in out


def test_certify_csv_and_bundle(capsys, tmp_path):
    out_dir = tmp_path / "bundle"
    code, out, err = run(capsys, "certify", "single_converter",
                         "--freqs", "0.5:200:40", "--no-adaptive",
                         "--samples", "200", "--format", "csv",
                         "--out", str(out_dir))
    assert code == EXIT_OK
    assert out.splitlines()[0] == "omega_rad_s,frequency_hz,converter_index,margin,verdict"
    assert {"report.txt", "margins.csv", "segment.csv", "shell_c0_critical.csv"} \
        <= {f.name for f in out_dir.iterdir()}
    assert err.count("wrote ") == 4


def test_shell_writes_cloud(capsys, tmp_path):
    code, out, _ = run(capsys, "shell", "single_converter", "11.0", "0",
                       "--out", str(tmp_path), "--samples", "150")
    assert code == EXIT_OK
    assert (tmp_path / "shell_c0.csv").exists()
    assert "@11Hz" in (tmp_path / "shell_c0.record").read_text()
    assert out.count("wrote ") == 3


def test_shell_bad_arguments(capsys, tmp_path):
    code, _, err = run(capsys, "shell", "single_converter",
                       "--out", str(tmp_path), "--", "-5.0", "0")
    assert code == EXIT_INPUT and "error:" in err
    code, _, err = run(capsys, "shell", "single_converter", "11.0", "5",
                       "--out", str(tmp_path))
    assert code == EXIT_INPUT and "out of range" in err


def test_verify_stable_system(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "single_converter",
                       "--out", str(tmp_path))
    assert code == EXIT_OK
    assert "unstable eigenvalues: 0" in out
    assert "nyquist encirclements: 0" in out
    assert (tmp_path / "eigenvalues.csv").read_text().startswith("re,im\n")
    assert (tmp_path / "locus.csv").read_text().startswith("re,im\n")


def test_verify_unstable_system(capsys):
    code, out, _ = run(capsys, "verify", "single_converter_weak")
    assert code == EXIT_BAD
    assert "unstable eigenvalues: 2" in out
    assert "nyquist encirclements: 2" in out


def test_simulate_decaying(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "single_converter", "1.5",
                       "--out", str(tmp_path))
    assert code == EXIT_OK
    assert "verdict: decaying" in out
    assert (tmp_path / "trajectory.csv").read_text().startswith("t,state1")
    assert (tmp_path / "voltages.csv").read_text().startswith("t,v1")


def test_simulate_growing(capsys):
    code, out, _ = run(capsys, "simulate", "single_converter_weak", "1.5")
    assert code == EXIT_BAD
    assert "verdict: growing" in out
    assert "dominant frequency:" in out


def test_simulate_bad_channel(capsys):
    code, _, err = run(capsys, "simulate", "single_converter", "0.5",
                       "--channel", "9")
    assert code == EXIT_INPUT and "channel 9 out of range" in err


def test_systems_lists_bundled(capsys):
    code, out, _ = run(capsys, "systems")
    assert code == EXIT_OK
    assert out.splitlines() == ["single_converter", "single_converter_weak",
                                "three_converter", "three_converter_strong"]


def test_input_problems_exit_three(capsys, tmp_path):
    code, _, err = run(capsys, "certify", str(tmp_path / "nope.sys"))
    assert code == EXIT_INPUT and "error:" in err
    code, _, err = run(capsys, "certify", "single_converter", "--freqs", "1:2")
    assert code == EXIT_INPUT and "F_MIN:F_MAX:N" in err
    code, _, err = run(capsys, "frobnicate")
    assert code == EXIT_INPUT


def test_console_module_smoke():
    proc = subprocess.run([sys.executable, "-m", "dwshell.cli", "systems"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0
    assert "single_converter" in proc.stdout
