import json

import pytest

from nelson_workbench.cli import main
from nelson_workbench.report import Report, Section


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_validate_passes(data_dir, capsys):
    code, out = _run(capsys, "validate", "--spec", str(data_dir / "finset_principal.json"))
    assert code == 0
    report = json.loads(out)
    assert report["passed"] is True
    assert report["title"] == "finset_principal: validate"


def test_validate_reports_broken_table(data_dir, capsys):
    code, out = _run(capsys, "validate", "--spec", str(data_dir / "broken_table.json"))
    assert code == 1
    failed = [s for s in json.loads(out)["sections"] if not s["passed"]]
    assert len(failed) == 1


def test_malformed_spec_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    code, out = _run(capsys, "validate", "--spec", str(bad))
    assert code == 2
    assert out == ""


def test_missing_spec_exits_2(tmp_path, capsys):
    code, _ = _run(capsys, "validate", "--spec", str(tmp_path / "nowhere.json"))
    assert code == 2


def test_enumerate_counts_points(data_dir, capsys):
    code, out = _run(capsys, "enumerate", "--spec", str(data_dir / "finset3.json"), "--object", "X")
    assert code == 0
    sec = json.loads(out)["sections"][0]
    assert sec["notes"]["count"] == "3"


def test_enumerate_needs_an_object(data_dir, capsys):
    code, _ = _run(capsys, "enumerate", "--spec", str(data_dir / "finset3.json"))
    assert code == 2


def test_budget_exceeded_exits_3(data_dir, capsys):
    code, _ = _run(capsys, "enumerate", "--spec", str(data_dir / "finset3.json"),
                   "--object", "X", "--budget", "2")
    assert code == 3


@pytest.mark.slow
@pytest.mark.parametrize("name", ["finset_principal", "z2_regular", "adequate_b2"])
def test_check_all_passes(data_dir, capsys, name):
    code, out = _run(capsys, "check", "--spec", str(data_dir / f"{name}.json"))
    assert code == 0, out


def test_negative_control_fails(data_dir, capsys):
    code, out = _run(capsys, "check", "--spec", str(data_dir / "negative_control.json"),
                     "--suite", "soundness")
    assert code == 1
    report = json.loads(out)
    failing = [c["name"] for s in report["sections"] for c in s["checks"] if not c["passed"]]
    assert "σ at 1 is top" in failing


def test_suite_without_structure_exits_2(data_dir, capsys):
    code, _ = _run(capsys, "check", "--spec", str(data_dir / "adequate_b2.json"),
                   "--suite", "transfer")
    assert code == 2


def test_unknown_family_member_exits_2(data_dir, capsys):
    code, _ = _run(capsys, "check", "--spec", str(data_dir / "finset_principal.json"),
                   "--suite", "doctrine", "--family", "A,Nope")
    assert code == 2


def test_repeated_runs_are_byte_identical(data_dir, tmp_path, capsys):
    spec = str(data_dir / "finset_principal.json")
    outputs = []
    for n in range(2):
        path = tmp_path / f"report{n}.json"
        assert main(["check", "--spec", spec, "--suite", "transfer", "--output", str(path)]) == 0
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]
    assert capsys.readouterr().out == ""


def test_human_format(data_dir, capsys):
    code, out = _run(capsys, "validate", "--spec", str(data_dir / "finset_principal.json"),
                     "--format", "human")
    assert code == 0
    assert out.splitlines()[0].startswith("finset_principal: validate: PASS")


def test_log_jsonl_appends_one_line_per_run(data_dir, tmp_path, capsys):
    log = tmp_path / "logs" / "runs.jsonl"
    spec = str(data_dir / "finset_principal.json")
    main(["validate", "--spec", spec, "--log-jsonl", str(log)])
    main(["check", "--spec", str(data_dir / "adequate_b2.json"), "--suite", "transfer",
          "--log-jsonl", str(log)])
    capsys.readouterr()
    lines = [json.loads(l) for l in log.read_text(encoding="utf-8").splitlines()]
    assert [r["exit"] for r in lines] == [0, 2]
    assert lines[0]["command"] == "validate"
    assert lines[0]["passed"] is True
    assert "error" in lines[1]


@pytest.mark.parametrize("budget", ["8", "16", pytest.param("64", marks=pytest.mark.slow)])
def test_check_over_budget_never_passes(data_dir, capsys, budget):
    code, out = _run(capsys, "check", "--spec", str(data_dir / "finset_principal.json"),
                     "--suite", "all", "--budget", budget)
    assert code == 3
    if out:
        report = json.loads(out)
        assert report["passed"] is False
        assert report["summary"]["skipped"] > 0


def test_skipped_section_sets_budget_exit():
    rep = Report("r")
    rep.add(Section("ran")).add("fine", True)
    assert rep.exit_code() == 0
    rep.add(Section("cut")).skip("all checks", "too large")
    assert not rep.passed
    assert rep.exit_code() == 3
    rep.add(Section("broken")).add("law", False, "witness")
    assert rep.exit_code() == 1


def test_corrupted_structure_fails_its_definition(data_dir, capsys):
    code, out = _run(capsys, "check", "--spec", str(data_dir / "negative_control.json"),
                     "--suite", "transfer")
    assert code == 1
    first = json.loads(out)["sections"][0]
    assert first["name"] == "Nelson structure definition"
    assert [c["name"] for c in first["checks"] if not c["passed"]][0] == "σ at 1 is top"


def test_unclosed_subobject_exits_2(tmp_path, capsys):
    bad = tmp_path / "unclosed.json"
    bad.write_text(json.dumps({
        "builtin": "cyclic:2",
        "presheaves": {"R": {"builtin": "regular"}},
        "subobjects": {"S": {"of": "R", "parts": {"*": ["g0"]}}},
    }), encoding="utf-8")
    code, _ = _run(capsys, "enumerate", "--spec", str(bad), "--object", "R")
    assert code == 2
