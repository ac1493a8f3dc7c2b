import json
import subprocess
import sys

import pytest

from qcf.cli import main


def run(args, tmp_path=None):
    return main(args)


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main(["nope"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["solve", "--grid-N", "4"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["verify-complex", "--bogus"])
    assert e.value.code == 2


def test_verify_complex_json(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["verify-complex", "--n", "2", "--k", "2", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["passed"] and all(c["zero"] for c in rep["report"]["composites"])
    assert "PASS" in capsys.readouterr().out


def test_symbolic_reports_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        main(["commutator-table", "--n", "2", "--out", str(p)])
    ja, jb = json.loads(a.read_text()), json.loads(b.read_text())
    ja.pop("seconds"), jb.pop("seconds")
    assert ja == jb


def test_box1_appendix_reports_printed_differences(capsys):
    code = main(["box1", "--n", "2", "--k", "2", "--convention", "appendix", "--emit", "pretty"])
    out = capsys.readouterr().out
    assert code == 1
    assert "4 entries differ" in out and "corrected: match" in out


def test_box1_tensor(capsys):
    assert main(["box1", "--n", "2", "--k", "2", "--emit", "json"]) == 0


@pytest.mark.parametrize("cmd", [
    ["verify-dd", "--n", "2", "--k", "2"],
    ["condition-h", "--n", "3"],
    ["hypersurface-check", "--n", "1", "--trials", "3"],
    ["grid-check", "--n", "1", "--grid-N", "3"],
    ["spectral-gap", "--n", "1", "--grid-N", "3", "--probes-seeds", "2"],
    ["export", "--what", "operators", "--n", "2"],
])
def test_commands_pass(cmd, tmp_path):
    assert main(cmd + ["--out", str(tmp_path / "r.json")]) == 0


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "qcf.cli", "condition-h", "--n", "1"], capture_output=True, text=True)
    assert r.returncode == 0 and "PASS" in r.stdout
