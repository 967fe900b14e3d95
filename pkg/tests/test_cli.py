import io
import subprocess
import sys

import pytest

from ctrg.bench import CSV_HEADER, read_csv
from ctrg.cli import main


def test_run_to_stdout(capsys):
    assert main(["run", "--method", "ctrg", "--mode", "torus", "--size", "4", "--chi", "exact",
                 "--temps", "1.0", "--reps", "2"]) == 0
    out = capsys.readouterr().out
    assert CSV_HEADER in out
    (rec,) = read_csv(io.StringIO(out))
    assert rec.err_f <= 1e-10


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("method = trg\nmode = torus\nsize = 4\nchi = 8\ntemps = 0.9, 1.1\n")
    out = tmp_path / "out.csv"
    assert main(["run", "--config", str(cfg), "--chi", "16", "--out", str(out),
                 "--deterministic"]) == 0
    records = read_csv(out.open())
    assert [r.chi for r in records] == [16, 16]
    assert all(r.method == "trg" for r in records)
    assert "deterministic = true" in out.read_text()


@pytest.mark.parametrize("argv", [
    ["run", "--bogus"],
    ["run", "--method", "hotrg"],
    ["run", "--method", "trg", "--size", "6"],
    ["run", "--chi", "eight"],
    ["run", "--config", "/nonexistent/file.cfg"],
    [],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("chi = 8\ncolour = red\n")
    assert main(["run", "--config", str(cfg)]) == 1


def test_numeric_failure_exit_code(capsys):
    # exact-mode TRG on an 8x8 torus outgrows the memory bound
    assert main(["run", "--method", "trg", "--size", "8", "--chi", "exact"]) == 2
    assert "numeric failure" in capsys.readouterr().err


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "ctrg.cli", "run", "--size", "3", "--chi", "4", "--temps", "2"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert CSV_HEADER in proc.stdout
