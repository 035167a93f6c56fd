#!/usr/bin/env python3
"""
Tests for the ttconvex command line: exit codes, JSON reports and output files
"""

import json
from pathlib import Path

from cli import SUBCOMMANDS, build_parser, example_checks, render, run
from config import RunConfig

FIXTURES = Path(__file__).parent / "fixtures"
SMALL = ["--path-length", "3", "--nielsen-edges", "6", "--nielsen-period", "1", "--bcc-edges", "2", "--samples", "200"]


def run_json(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def test_every_subcommand_is_registered():
    parser = build_parser()
    for name in SUBCOMMANDS:
        assert parser.parse_args([name] + (["--word", "a"] if name == "orbit" else [])).command == name


def test_orbit(capsys):
    code, report = run_json(capsys, "orbit", "--fixture", "f6", "--word", "d", "--N", "4")
    assert code == 0
    assert report["lengths"] == [1, 2, 5, 10, 17]
    assert report["flags"] == []


def test_orbit_on_graph_map(capsys):
    code, report = run_json(capsys, "orbit", "--input", str(FIXTURES / "fastpoly.gm"), "--word", "E", "--N", "3")
    assert code == 0
    assert report["lengths"] == [1, 2, 3, 5]


def test_convexity(capsys, tmp_path):
    table = tmp_path / "ratios.csv"
    code, report = run_json(
        capsys, "convexity", "--fixture", "identity", "--corpus", "ball(2)", "--N-max", "4", "--csv", str(table)
    )
    assert code == 0
    assert report["empirical_K"] == 0.5
    assert report["corpus_size"] == 17
    assert table.read_text().startswith("word,i,N,ratio\n")


def test_ledger(capsys):
    code, report = run_json(capsys, "ledger", "--q", "2", "--K", "2", "--M", "3", "--C", "2")
    assert code == 0
    assert report["K_word"] == 12.0
    assert report["K_prime_poly"] == [16.0, 272.0]


def test_ledger_from_json(capsys, tmp_path):
    inputs = tmp_path / "inputs.json"
    inputs.write_text(json.dumps({"q": 1, "L": 3, "k": 2, "K_prime": 6, "provenance": {"L": "heuristic"}}))
    code, report = run_json(capsys, "ledger", "--input", str(inputs))
    assert code == 0
    assert report["K_cyclic"] == 486.0
    assert report["flags"] == ["heuristic-input"]


def test_ledger_missing_inputs(capsys):
    code, report = run_json(capsys, "ledger", "--q", "2")
    assert code == 1
    assert report is None


def test_suggest_filtration(capsys):
    code, report = run_json(capsys, "suggest-filtration", "--input", str(FIXTURES / "fastpoly.gm"))
    assert code == 0
    assert report["strata"] == [["x", "y"], ["E"]]


def test_hallway_word(capsys):
    code, report = run_json(capsys, "hallway", "--fixture", "f6", "--word", "t^-5 c t^-5 b' t^10 b c'")
    assert code == 0
    assert report["hallway"]["max_slice_length"] == 7
    assert report["hallway"]["visible_edges"] == 4


def test_hallway_file(capsys, tmp_path):
    source = tmp_path / "h.hw"
    source.write_text("[hallway]\nrho0 = d\nduration = 3\n")
    code, report = run_json(capsys, "hallway", "--fixture", "f6", "--hallway", str(source))
    assert code == 0
    assert report["hallway"]["slice_lengths"] == [1, 2, 5, 10]
    assert report["nonlinear_counts"][3] == 4


def test_validate_failure_exit_code(capsys):
    code, report = run_json(capsys, "validate", "--fixture", "bad_rtt", *SMALL)
    assert code == 1
    assert "rtt(1)" in report["failures"]


def test_examples_identity(capsys, tmp_path):
    out = tmp_path / "examples.json"
    assert run(["examples", "--name", "identity", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["ok"] is True
    assert [c["name"] for c in report["checks"]] == ["identity.empirical_K"]


def test_configuration_errors_exit_2(capsys):
    assert run(["orbit", "--fixture", "nope", "--word", "a"]) == 2
    assert run(["orbit", "--fixture", "f6", "--word", "z"]) == 2
    assert run(["orbit", "--fixture", "f6"]) == 2
    assert run(["convexity", "--fixture", "f6", "--corpus", "ball(x)"]) == 2
    assert run(["validate"]) == 2
    assert run(["validate", "--fixture", "f6", "--bcc-edges", "99"]) == 2
    assert run(["examples", "--name", "nope"]) == 2


def test_render_formats():
    text = render({"value": 1 / 3, "big": float("inf"), "nested": {"flags": ["b", "a"]}})
    report = json.loads(text)
    assert report["value"] == 0.3333333333
    assert report["big"] == "inf"
    assert report["flags"] == ["a", "b"]
    table = render({"value": 2.0}, "table")
    assert table.splitlines()[1].startswith("value")


def test_convexity_report_is_byte_identical(capsys):
    argv = ["convexity", "--fixture", "f6", "--corpus", "ball(1)", "--N-max", "6"]
    assert run(argv) == 0
    first = capsys.readouterr().out
    assert run(argv) == 0
    assert capsys.readouterr().out == first
    assert json.loads(first)["corpus_size"] == 13


def test_analyze_reports_threshold_extent(capsys):
    code, report = run_json(capsys, "analyze", "--fixture", "f6", *SMALL)
    assert code == 0
    assert report["constants"]["5"]["verified_edges"] == 3
    assert report["constants"]["5"]["required_edges"] > 3
    assert "S_5-unknown-beyond-3-edges" in report["flags"]


def test_f6_worked_examples():
    checks = {c["name"]: c for c in example_checks("f6", RunConfig(subcommand="examples"))}
    for label in ("polyex", "bulgeex2", "abc_cyclic", "stabilization"):
        assert checks[f"f6.{label}"]["ok"], checks[f"f6.{label}"]["detail"]
    assert checks["f6.polyex"]["detail"]["nonlinear"] == {"c": 6, "d": 1}
