import subprocess
import sys

import pytest

from pbco.cli import main, parse_config_file, parse_seeds, suffixed, UsageError


def rows(path):
    return path.read_text().splitlines()


def test_run_writes_one_row_per_round(tmp_path, capsys):
    out = tmp_path / "o.csv"
    assert main(["run", "--algo", "ogd", "--env", "squared", "--d", "5", "--T", "300", "--seeds", "2",
                 "--out", str(out)]) == 0
    lines = rows(out)
    assert lines[0] == "t,cum_regret,scaled_t34,scaled_t12"
    assert len(lines) == 301 and lines[-1].startswith("300,")
    assert "R_T=" in capsys.readouterr().out


def test_config_file_with_comments_and_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# experiment\nalgo = flaxman\nenv = absolute  # inline comment\n\nd = 3\nT = 50\n"
                   "seeds = 1,4\nout = " + str(tmp_path / "from_file.csv") + "\n")
    assert parse_config_file(cfg)["seeds"] == "1,4"
    out = tmp_path / "flag.csv"
    assert main(["run", "--config", str(cfg), "--T", "40", "--out", str(out)]) == 0
    assert len(rows(out)) == 41
    assert not (tmp_path / "from_file.csv").exists()


@pytest.mark.parametrize("text", ["algo flaxman\n", "color = red\n", "d = three\n", "T =\n"])
def test_malformed_config_is_usage_error(tmp_path, text, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    assert main(["run", "--config", str(cfg)]) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_flag_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--algo", "ogd", "--bogus", "1"])
    assert exc.value.code != 0


def test_missing_setting(capsys):
    assert main(["run", "--algo", "ogd", "--env", "squared", "--d", "2"]) == 2


def test_contract_violation_exits_nonzero(capsys):
    assert main(["run", "--algo", "ogd", "--env", "lower_bound", "--d", "20", "--T", "10"]) == 1
    assert "seed 0" in capsys.readouterr().err


def test_verify_lines(capsys):
    assert main(["verify"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 5
    for line in lines:
        parts = line.split()
        assert parts[0] == "CHECK" and parts[2] in ("PASS", "FAIL") and parts[3].startswith("max_dev=")


def test_sweep_suffixes(tmp_path):
    base = tmp_path / "s.csv"
    assert main(["sweep", "--algo", "ogd", "--env", "squared", "--d", "10,20,40", "--T", "30",
                 "--out", str(base)]) == 0
    for d in (10, 20, 40):
        assert len(rows(tmp_path / f"s_d{d}.csv")) == 31


def test_helpers():
    assert parse_seeds("3") == (0, 1, 2)
    assert parse_seeds("5,9") == (5, 9)
    with pytest.raises(UsageError):
        parse_seeds("0")
    assert suffixed("out/o.csv", 20) == "out/o_d20.csv"


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "pbco.cli", "verify"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.count("PASS") == 5
