import json
import shutil

import pytest

from specforge.cli import main

from conftest import E2E, FIXTURES, LISTINGS, PROGRAMS, read


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def workspace(tmp_path, no_api_key):
    dest = tmp_path / "e2e"
    shutil.copytree(E2E, dest)
    return dest


def test_count_file(capsys):
    code, out, _ = run(capsys, "count", "--file", str(LISTINGS / "bsearch_baseline_spec.c"))
    header, row = out.splitlines()
    data = dict(zip(header.split(","), row.split(",")))
    assert code == 0 and data["requires"] == "1" and data["total"] == "6"


def test_validate_edited_pair(capsys):
    code, out, _ = run(capsys, "validate", "--original", str(PROGRAMS / "levenshtein.c"),
                       "--annotated", str(LISTINGS / "levenshtein_mutated_spec.c"))
    assert code == 2 and out.startswith("code_edited:") and "matrix[0][x]" in out
    code, out, _ = run(capsys, "validate", "--original", str(PROGRAMS / "bsearch.c"),
                       "--annotated", str(LISTINGS / "bsearch_baseline_spec.c"))
    assert code == 0 and out == "ok\n"


def test_generate_with_empty_cache_is_provider_error(capsys, workspace):
    shutil.rmtree(workspace / "cache")
    code, _, err = run(capsys, "--config", str(workspace / "config.json"), "generate", "--mode", "replay-strict")
    assert code == 4 and "12 provider errors" in err
    lines = (workspace / "out" / "records.jsonl").read_text().splitlines()
    assert len(lines) == 12
    assert all(json.loads(l)["validation"]["failures"][0]["kind"] == "provider_error" for l in lines)


def test_generate_then_report(capsys, workspace):
    cfg = str(workspace / "config.json")
    code, out, _ = run(capsys, "generate", "--config", cfg, "--mode", "replay-strict", "--json")
    summary = json.loads(out)
    assert code == 2 and summary["written"] == 12 and summary["invalid"] == 2
    code, out, _ = run(capsys, "report", "--config", cfg, "--group-by", "set,suite", "--format", "md")
    assert code == 0 and out.startswith("| set | suite |")
    report = workspace / "out" / "report.csv"
    assert run(capsys, "report", "--config", cfg, "--out", str(report))[0] == 0
    assert report.read_text().startswith("set,records,requires")
    code, out, _ = run(capsys, "count", "--config", cfg, "--store")
    assert code == 0 and len(out.splitlines()) == 13


def test_missing_artifacts_exit_3(capsys, workspace):
    (workspace / "symbolic" / "tritype.eva.txt").unlink()
    code, out, _ = run(capsys, "--json", "--config", str(workspace / "config.json"), "plan")
    doc = json.loads(out)
    assert code == 3 and doc["error_type"] == "MissingSymbolicArtifact" and "tritype/baseline/eva_set" in doc["error"]


def test_usage_errors_exit_1(capsys):
    assert run(capsys, "count")[0] == 1
    assert run(capsys, "nope")[0] == 1
    code, out, _ = run(capsys, "--json", "report", "--group-by", "colour", "--store", "/dev/null")
    assert code == 1 and json.loads(out)["ok"] is False


@pytest.mark.parametrize("argv", [[], ["count"], ["generate"], ["report"], ["prompt"], ["corpus"], ["validate"]])
def test_help_everywhere(capsys, argv):
    with pytest.raises(SystemExit) as info:
        main(argv + ["--help"])
    assert info.value.code == 0
    assert "usage:" in capsys.readouterr().out


def test_json_for_every_read_only_command(capsys, workspace):
    cfg = str(workspace / "config.json")
    commands = [
        ["plan"],
        ["corpus", "list"],
        ["prompt", "render", "--template", "eva", "--program", str(PROGRAMS / "tritype.c"),
         "--context", str(LISTINGS / "eva_report_overflow.txt"), "--intent", "intent"],
        ["count", "--file", str(LISTINGS / "tritype_eva_spec.c")],
        ["validate", "--original", str(PROGRAMS / "tritype.c"), "--annotated", str(LISTINGS / "tritype_eva_spec.c")],
        ["symbolic", "--tool", "eva", "--program", str(workspace / "programs" / "nothing.c")],
    ]
    before = {p: p.read_bytes() for p in workspace.rglob("*") if p.is_file()}
    for argv in commands:
        for _ in range(2):
            code, out, _ = run(capsys, "--json", "--config", cfg, *argv)
            doc = json.loads(out)
            assert doc["exit_code"] == code
    after = {p: p.read_bytes() for p in workspace.rglob("*") if p.is_file()}
    assert before == after


def test_prompt_render_matches_golden(capsys, tmp_path):
    prog = tmp_path / "f.c"
    prog.write_text("int f(void){return 0;}")
    code, out, _ = run(capsys, "prompt", "render", "--template", "baseline", "--program", str(prog))
    assert code == 0 and out == read(FIXTURES / "golden" / "rendered_baseline.txt")


def test_corpus_materialize(capsys, tmp_path):
    code, out, _ = run(capsys, "corpus", "materialize", "--corpus", str(FIXTURES / "corpus" / "manifest.json"),
                       "--out", str(tmp_path))
    assert code == 0 and len(out.splitlines()) == 6
    assert (tmp_path / "anonymized" / "apache.c").exists()


def test_cache_dir_env_override(capsys, workspace, tmp_path, monkeypatch):
    monkeypatch.setenv("SPECFORGE_CACHE_DIR", str(tmp_path / "elsewhere"))
    code, _, err = run(capsys, "--config", str(workspace / "config.json"), "generate", "--mode", "replay-strict")
    assert code == 4 and "12 provider errors" in err
