import json
import subprocess
import sys
from fractions import Fraction

import pytest

from liquidkit.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from liquidkit.errors import DomainError, UnknownSuite
from liquidkit.report import Report, emit_report, parse_report, read_report, write_report
from liquidkit.suites import DEFAULTS, SUITES, SuiteConfig, run_suite


def _sample() -> Report:
    rep = Report("demo", {"r": Fraction(1, 2), "seed": 3}, version="0.1.0")
    rep.add("one", "x=1", "a <= b", 0.25, 1e-9, True)
    rep.add("two", "x=2", "a <= b", "n/a", 0, None)
    return rep


def test_report_round_trip_and_summary():
    rep = _sample()
    blob = emit_report(rep, "json")
    back = parse_report(blob)
    assert back == rep and emit_report(back, "json") == blob
    doc = json.loads(blob)
    assert doc["config"]["r"] == "1/2"
    assert doc["summary"] == {"total": 2, "pass": 1, "fail": 0, "skipped-budget": 1}
    assert list(doc["rows"][0]) == ["check", "inputs", "claim", "observed", "margin", "status"]
    text = emit_report(rep, "text").decode().splitlines()
    assert text[-1] == "PASS 1/2 (1 skipped-budget)"
    assert rep.ok


def test_report_failures_and_empty():
    rep = Report("demo", {})
    assert emit_report(rep, "text").decode().splitlines()[-1] == "PASS 0/0"
    rep.add("bad", "", "", "", 0, False)
    assert not rep.ok and emit_report(rep, "text").decode().splitlines()[-1] == "FAIL 0/1"
    with pytest.raises(ValueError):
        emit_report(rep, "yaml")


def test_wall_time_only_with_timing(tmp_path):
    rep = _sample()
    rep.wall_time = 1.23456
    assert "wall_time" not in json.loads(emit_report(rep, "json"))
    assert json.loads(emit_report(rep, "json", timing=True))["wall_time"] == 1.235
    path = tmp_path / "r.json"
    write_report(rep, str(path))
    assert read_report(str(path)) == rep


def test_suite_config_validation(tmp_path):
    with pytest.raises(UnknownSuite):
        SuiteConfig("nosuch")
    with pytest.raises(DomainError):
        SuiteConfig("tinv", {"bogus": "1"})
    with pytest.raises(DomainError):
        SuiteConfig("quotient-iso", {"r": "3/2"})
    with pytest.raises(DomainError):
        SuiteConfig("tinv", seed=-1)
    ini = tmp_path / "c.ini"
    ini.write_text("[common]\nseed = 9\ncap = 50\n[tinv]\ntrials = 4\n")
    cfg = SuiteConfig.from_ini(str(ini), "tinv", overrides={"eps": "0.1"})
    assert cfg.seed == 9 and cfg.cap == 50
    assert cfg.params["trials"] == 4 and cfg.params["eps"] == 0.1
    assert SuiteConfig.from_ini(str(ini), "tinv", seed=2).seed == 2
    assert set(DEFAULTS) == set(SUITES)


def test_configured_cap_skips_exhaustive_rows(monkeypatch):
    monkeypatch.delenv("LIQUIDKIT_BUDGET_CAP", raising=False)
    rep = run_suite(SuiteConfig("quotient-iso", {"samples": "5", "m": "2"}, cap=10))
    status = {r.check: r.status for r in rep.rows}
    assert status["forward n=1 exhaustive"] == "skipped-budget"
    assert rep.ok and rep.config["cap"] == 10
    rep = run_suite(SuiteConfig("quotient-iso", {"samples": "5", "m": "2"}))
    assert {r.status for r in rep.rows} == {"pass"}


def test_cli_expand_and_theta(capsys):
    assert main(["expand", "--real", "y=3", "x=1/2", "N=2"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[0] == "1*T^-1 + 1*T^0"
    assert main(["expand", "--padic", "p=2", "x=2", "y=5", "K=3"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[0] == "1*T^0 + 1*T^2"
    assert main(["expand", "--bounded", "z=1", "r=1/2", "rp=1/4"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[0] == "1*T^0"
    assert main(["theta", "--series", "2*T^0 - 1*T^-1", "--x", "1/2"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "0"
    assert main(["generator", "--x", "1/2", "--r", "1/2", "--order", "30"]) == EXIT_OK
    assert "certificate=holds" in capsys.readouterr().out


def test_cli_errors(capsys):
    assert main(["verify", "nosuch"]) == EXIT_USAGE
    assert "unknown suite" in capsys.readouterr().err
    assert main(["theta", "--series", "1*T^0", "--x", "1"]) == EXIT_USAGE
    assert main(["expand", "--real", "y=1", "x=1/5", "N=3"]) == EXIT_USAGE
    assert main(["expand", "--real", "y=1"]) == EXIT_USAGE
    assert main(["verify", "tinv", "--set", "nokey=1"]) == EXIT_USAGE
    capsys.readouterr()


def test_cli_verify_writes_report(tmp_path, capsys):
    out = tmp_path / "tinv.json"
    assert main(["verify", "tinv", "--seed", "4", "--set", "trials=3", "--out", str(out)]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[-1].startswith("PASS ")
    rep = read_report(str(out))
    assert rep.suite == "tinv" and rep.config["seed"] == 4 and rep.ok


def test_verify_bytes_identical_across_processes(tmp_path):
    blobs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        cmd = [sys.executable, "-m", "liquidkit.cli", "verify", "tinv", "--seed", "7", "--set", "trials=3",
               "--out", str(out)]
        assert subprocess.run(cmd, capture_output=True).returncode == EXIT_OK
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1]
    assert EXIT_FAIL == 1
