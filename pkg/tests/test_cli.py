import json
import subprocess
import sys

import pytest

from boussym.cli import main, run

POWER = "d*(a*u+b)^n + u + c"
EXP = "d*exp(a*u+b) + u + c"
PARAMS = ["--a=2", "--b=1/3", "--c=1", "--d=3/4"]

PASSING = [
    ["classify", "--f", POWER],
    ["classify", "--f", "u^2/2 + u"],
    ["determine", "--method", "nonclassical", "--f", "d*u^2 + b*u + c"],
    ["verify-generator", "--f", EXP, "--gen", "x*dx + 2*t*dt - (2/a)*du"],
    ["verify-generator", "--method", "nonclassical", "--gen", "dx + dt"],
    ["reduce", "--f", POWER, "--n=2", *PARAMS],
    ["reduce", "--f", "u^2/2 + u", "--lambda=1"],
    ["solve", "--n=3", "--a=1", "--d=1/2", "--b=1/5", "--k2=-3/10", "--k3=-1", "--h-range=0.1,0.8"],
    ["solve", "--k3=1", "--k4=0", "--t-range=1,3", "--h0=4", "--sign=-1"],
    ["residual", "--f", "0", "--u", "exp(3/5*x + 12/25*t)"],
    ["residual", "--f", "u^2/2 + u", "--lambda=1"],
    ["residual", "--f", POWER, "--n=3", "--a=1", "--b=1/2", "--c=1/5", "--d=7/10"],
]

FAILING = [
    ["verify-generator", "--f", "d*u^2 + b*u + c", "--gen", "x*dx + t*dt"],
    ["reduce", "--f", EXP, *PARAMS],  # the printed exp-family ODE does not match
    ["residual", "--f", "0", "--u", "exp(3/5*x + 1/2*t)"],
    ["solve", "--k3=1", "--k4=0", "--t-range=0,3", "--h0=4"],  # pole inside the interval
]

USAGE = [
    [],
    ["classify"],
    ["classify", "--f", "u +"],
    ["frobnicate"],
    ["verify-generator", "--f", "u^2"],
    ["solve", "--k3=1", "--t-range=3,1"],
    ["solve", "--n=2"],
    ["residual", "--f", "0", "--u", "exp(y)"],
    ["residual", "--f", "u^2", "--u", "h(x)"],
    ["classify", "--f", "u^2", "--seed", "abc"],
]


def _code(argv):
    return run(argv)[0]


@pytest.mark.parametrize("argv", PASSING, ids=lambda a: " ".join(a[:3]))
def test_passing_commands_exit_zero(argv):
    code, text, _ = run(argv)
    assert code == 0, text
    doc = json.loads(text)
    assert doc["schema"] == 1 and doc["passed"] is True
    assert doc["command"] == argv[0]


@pytest.mark.parametrize("argv", FAILING, ids=lambda a: " ".join(a[:3]))
def test_failed_checks_exit_two(argv):
    code, text, _ = run(argv)
    assert code == 2
    assert json.loads(text)["passed"] is False


@pytest.mark.parametrize("argv", USAGE, ids=lambda a: " ".join(a) or "empty")
def test_usage_errors_exit_one(argv, capsys):
    assert _code(argv) == 1
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize("argv", PASSING[:6] + FAILING[:2], ids=lambda a: " ".join(a[:3]))
def test_output_is_byte_identical(argv):
    assert run(argv)[1] == run(argv)[1]


def test_threads_do_not_change_output():
    argv = ["residual", "--f", "u^2/2 + u", "--lambda=1"]
    assert run(argv)[1] == run(argv + ["--threads", "4"])[1]


def test_seed_is_recorded():
    doc = json.loads(run(["classify", "--f", POWER, "--seed", "7"])[1])
    assert doc["seed"] == 7


def test_classify_reports_family_and_generators():
    doc = json.loads(run(["classify", "--f", POWER])[1])
    assert doc["family"]["tag"] == "power"
    assert len(doc["generators"]) == 3


def test_nonclassical_listing_has_count():
    doc = json.loads(run(["determine", "--method", "nonclassical", "--f", "d*u^2 + b*u + c"])[1])
    assert doc["system"]["count"] == len(doc["system"]["equations"]) == 14


def test_reduce_records_table_verdicts():
    doc = json.loads(run(["reduce", "--f", EXP, *PARAMS])[1])
    assert doc["printed_ode_check"]["rows"][0]["status"] == "mismatch"
    assert doc["ansatz_check"]["passed"]


def test_out_writes_file_and_not_stdout(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["classify", "--f", POWER, "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(out.read_text())["schema"] == 1


def test_main_prints_json(capsys):
    assert main(["classify", "--f", "u^2/2 + u"]) == 0
    assert json.loads(capsys.readouterr().out)["family"]["tag"] == "quadratic"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "boussym", "classify", "--f", "u^2/2 + u"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["schema"] == 1
