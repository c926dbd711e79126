import json
from pathlib import Path

import pytest

from neverland.cli import main
from neverland.harness import standard_suite
from neverland.scenario_file import dump_scenario

ROOT = Path(__file__).resolve().parent.parent


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_suite_json(capsys):
    code, out, _ = run(capsys, "suite", "--report", "json")
    reports = json.loads(out)
    assert code == 0 and len(reports) == 8
    assert [r["scenario"] for r in reports] == sorted(r["scenario"] for r in reports)
    assert all(r["pass"] for r in reports)


def test_suite_parallel_matches_serial(capsys):
    _, serial, _ = run(capsys, "suite", "--report", "json")
    _, parallel, _ = run(capsys, "suite", "--report", "json", "--jobs", "3")
    assert serial == parallel


def test_suite_only(capsys):
    code, out, _ = run(capsys, "suite", "--only", "dkom", "--only", "ret2usr")
    assert code == 0 and "PASS dkom" in out and "PASS ret2usr" in out and "2/2" in out
    code, _, err = run(capsys, "suite", "--only", "nope")
    assert code == 2 and "nope" in err


def test_run_missing_file(capsys):
    code, _, err = run(capsys, "run", "missing.json")
    assert code == 2 and "missing.json" in err


def test_run_pass_and_mismatch(tmp_path, capsys):
    s = standard_suite()[0]
    good = tmp_path / "good.json"
    good.write_text(dump_scenario(s))
    code, out, _ = run(capsys, "run", str(good), "--report", "json")
    assert code == 0 and json.loads(out)["pass"] is True

    doc = s.to_dict()
    doc["expect"][0]["verdict"] = "Allow"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "run", str(bad))
    assert code == 1 and "FAIL" in out


def test_run_schema_error(tmp_path, capsys):
    path = tmp_path / "x.json"
    path.write_text(json.dumps({"name": "x", "expect": [{"kind": "RunsToHalt"}], "extra": True}))
    code, _, err = run(capsys, "run", str(path))
    assert code == 2 and "schema" in err
    path.write_text("{not json")
    assert run(capsys, "run", str(path))[0] == 2


def test_run_with_file_references(capsys):
    code, out, _ = run(capsys, "run", str(ROOT / "scenarios" / "custom" / "custom_boot.json"))
    assert code == 0, out


def test_shipped_scenarios_match_suite():
    for s in standard_suite():
        assert (ROOT / "scenarios" / f"{s.name}.json").read_text() == dump_scenario(s)


def test_boot_demo(capsys):
    code, out, _ = run(capsys, "boot-demo", "--report", "json")
    data = json.loads(out)
    assert code == 0 and data["run"]["status"] == "halted"
    assert data["boot"]["entries_used"] == 6 and data["boot"]["lookup_latency_cycles"] == 2
    _, out16, _ = run(capsys, "boot-demo", "--table-size", "16", "--report", "json")
    assert json.loads(out16)["boot"]["lookup_latency_cycles"] == 3


def test_boot_demo_table_too_small(capsys):
    code, _, err = run(capsys, "boot-demo", "--table-size", "4")
    assert code == 2 and "TableBudgetExceeded" in err


def test_asm(tmp_path, capsys):
    src = tmp_path / "p.s"
    src.write_text("loop: beq r1, r2, loop\nhalt\n")
    code, out, _ = run(capsys, "asm", str(src))
    assert code == 0 and "beq r1, r2, 0x0" in out and "loop = 0x0" in out
    src.write_text("halt\nbogus r1\n")
    code, _, err = run(capsys, "asm", str(src))
    assert code == 2 and "line 2" in err


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["run", "x.json", "--report", "xml"])
    assert info.value.code == 2


def test_table_size_for_run(tmp_path, capsys):
    path = tmp_path / "j.json"
    path.write_text(dump_scenario(standard_suite()[-1]))
    assert run(capsys, "run", str(path), "--table-size", "4")[0] == 2
    assert run(capsys, "run", str(path), "--table-size", "16")[0] == 0
