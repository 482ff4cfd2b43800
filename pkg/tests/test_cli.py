"""Command-line interface: exit codes and output formats."""

import json
import re

import pytest
from conftest import LOOP_SRC, scenario_src

from graduator import __version__
from graduator.cli import main
from graduator.testkit import corpus_dir

LOOP_LINES = LOOP_SRC


def picl(tmp_path, src, name="prog.picl"):
    p = tmp_path / name
    p.write_text(src)
    return str(p)


def corpus(name):
    return str(corpus_dir() / name)


def test_check_clean_program(tmp_path, capsys):
    path = picl(tmp_path, scenario_src(ret_ann="NonNull"))
    assert main(["check", path]) == 0
    out = capsys.readouterr().out
    assert f"{path}: mode=gradual" in out
    assert re.search(r"0 warning\(s\), 0 check\(s\), 0 boundary check\(s\)", out)
    assert "1/1 dereference site(s) check-free (100%)" in out


def test_check_reports_a_check_site_without_failing(tmp_path, capsys):
    path = picl(tmp_path, scenario_src())  # unannotated return: optimistic deref
    assert main(["check", path]) == 0
    out = capsys.readouterr().out
    assert "GRADUAL_CHECK" in out
    assert "0/1 dereference site(s) check-free (0%)" in out


def test_check_warning_exits_1(tmp_path, capsys):
    path = picl(tmp_path, scenario_src(ret_ann="Nullable"))
    assert main(["check", path]) == 1
    out = capsys.readouterr().out
    assert "GRADUAL_STATIC" in out
    assert "'reversed' is Nullable, position requires NonNull" in out


def test_check_json_report(tmp_path, capsys):
    path = picl(tmp_path, scenario_src())
    assert main(["check", path, "--format", "json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["schema"] == 1
    assert report["tool"] == "graduator"
    assert report["version"] == __version__
    assert report["source"] == path
    assert report["mode"] == "gradual"
    assert report["warnings"] == []
    (c,) = report["checks"]
    assert c["category"] == "GRADUAL_CHECK" and c["variable"] == "reversed"
    assert report["summary"] == {
        "static": 0,
        "check": 1,
        "boundary": 0,
        "dereference_sites": 1,
        "eliminated": 0,
        "eliminated_pct": 0,
    }


def test_check_static_mode_needs_full_annotations(tmp_path, capsys):
    path = picl(tmp_path, scenario_src())
    assert main(["check", path, "--mode", "static"]) == 2
    assert "static mode requires a fully annotated program" in capsys.readouterr().err
    path2 = picl(tmp_path, LOOP_LINES, name="full.picl")
    assert main(["check", path2, "--mode", "static"]) == 0


def test_check_missing_file(tmp_path, capsys):
    assert main(["check", str(tmp_path / "absent.picl")]) == 2
    assert "absent.picl" in capsys.readouterr().err


def test_check_parse_error_position(tmp_path, capsys):
    path = picl(tmp_path, "main {\n    x = null;\n}\n")
    assert main(["check", path]) == 2
    err = capsys.readouterr().err
    assert f"{path}:2:" in err and "error:" in err


def test_check_surface_error(tmp_path, capsys):
    path = picl(tmp_path, "main { var x; var x; x := null; return x; }")
    assert main(["check", path]) == 2
    assert "error:" in capsys.readouterr().err


def test_run_final(tmp_path, capsys):
    path = picl(tmp_path, LOOP_LINES)
    assert main(["run", path]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 1  # no trace without --trace
    assert re.fullmatch(r"final: returned 1 in \d+ step\(s\)", out[0])


def test_run_trace(tmp_path, capsys):
    path = picl(tmp_path, LOOP_LINES)
    assert main(["run", path, "--trace"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert re.fullmatch(r"final: returned 1 in (\d+) step\(s\)", lines[-1])
    steps = int(re.search(r"in (\d+) step", lines[-1]).group(1))
    assert len(lines) == steps + 1
    assert lines[0] == "0: main/v9: main"
    assert all(re.fullmatch(r"\d+: [\w$]+/v\d+: .+", ln) for ln in lines[:-1])


def test_run_checked_error_exits_3(tmp_path, capsys):
    path = picl(tmp_path, scenario_src(null_body=True))
    assert main(["run", path]) == 3
    payload = json.loads(capsys.readouterr().out)
    assert payload["category"] == "GRADUAL_CHECK"
    assert payload["variable"] == "reversed"
    assert payload["required"] == "NonNull" and payload["found"] == "Null"
    assert payload["value"] == 0


def test_run_plain_gets_stuck_exits_4(tmp_path, capsys):
    path = picl(tmp_path, scenario_src(null_body=True))
    assert main(["run", path, "--mode", "plain"]) == 4
    out = capsys.readouterr().out
    assert re.search(r"stuck at v\d+ after \d+ step\(s\): null dereference: reversed is null", out)


def test_run_fuel_exits_5(tmp_path, capsys):
    path = picl(tmp_path, "main { var x; x := null; while (x == null) { skip; } return x; }")
    assert main(["run", path, "--max-steps", "40"]) == 5
    assert "fuel exhausted after 40 step(s)" in capsys.readouterr().out


def test_run_fuel_from_environment(tmp_path, capsys, monkeypatch):
    path = picl(tmp_path, LOOP_LINES)
    monkeypatch.setenv("GRADUATOR_MAX_STEPS", "3")
    assert main(["run", path]) == 5
    capsys.readouterr()
    # an explicit flag wins over the environment
    assert main(["run", path, "--max-steps", "1000"]) == 0
    capsys.readouterr()
    monkeypatch.setenv("GRADUATOR_MAX_STEPS", "plenty")
    assert main(["run", path]) == 2
    assert "GRADUATOR_MAX_STEPS must be an integer" in capsys.readouterr().err


def test_cfg_listing(tmp_path, capsys):
    path = picl(tmp_path, LOOP_LINES)
    assert main(["cfg", path]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 13  # bar 3, foo 6, main 4 (the literal argument gets a temp)
    assert lines[0].startswith("v0: bar: proc bar@NonNull(y@Nullable)")
    assert all(re.fullmatch(r"v\d+: [\w$]+: .+?(  -> v\d+(, v\d+)*)?", ln) for ln in lines)
    assert any("-> v5, v6" in ln or "-> v6, v5" in ln for ln in lines)  # the branch fan-out


def test_cfg_dot(tmp_path, capsys):
    path = picl(tmp_path, LOOP_LINES)
    assert main(["cfg", path, "--dot"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("digraph picl {") and out.rstrip().endswith("}")


def test_stats_table(capsys):
    files = [corpus("new_heavy.picl"), corpus("unannotated_calls.picl")]
    assert main(["stats", *files, "--ignore-annotations"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["program", "derefs", "checks", "eliminated", "pct"]
    rows = {ln.split()[0]: ln.split()[1:] for ln in lines[1:]}
    assert rows[files[0]] == ["4", "0", "4", "100%"]
    assert rows[files[1]] == ["2", "2", "0", "0%"]
    assert rows["TOTAL"] == ["6", "2", "4", "67%"]


def test_stats_without_erasure_uses_the_annotations(capsys):
    assert main(["stats", corpus("unannotated_calls.picl")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2  # no TOTAL row for a single file


def test_compare_policies(capsys):
    assert main(["compare", corpus("unannotated_calls.picl")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["policy", "warnings", "checks"]
    table = {ln.split()[0]: tuple(map(int, ln.split()[1:])) for ln in lines[1:]}
    assert table["gradual"] == (0, 2)
    assert table["nonnull-default"] == (1, 0)
    assert table["nullable-default"] == (2, 0)


def test_selftest(capsys):
    assert main(["selftest", "--trials", "300", "--programs", "6", "--seed", "0"]) == 0
    out = capsys.readouterr().out
    for name in ("lattice", "local-soundness", "propositions"):
        assert re.search(rf"PASS  {name}  \(\d+ checks\)", out)


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.strip() == f"graduator {__version__}"
