from __future__ import annotations

import json

import pytest

from bracketlab.cli import EXIT_BUDGET, EXIT_INPUT, EXIT_IO, EXIT_OK, main, payoff_table
from bracketlab.dataio import read_choices_text, write_choices
from bracketlab.model import SubjectChoices
from bracketlab.report import AnalysisConfig, classify_subject
from bracketlab.simulate import AgentSpec, simulate_subject
from bracketlab.induced import UtilityModel


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def risk_csv(tmp_path, risk):
    subs = [SubjectChoices.from_profile(risk, [3, 8, 7, 5, 3, 8, 3], "a1"), SubjectChoices.from_profile(risk, [0, 14, 7, 10, 0, 8, 0], "b1")]
    p = tmp_path / "risk.csv"
    p.write_text(write_choices(subs, risk))
    return p


def test_design_command(capsys):
    code, out, _ = run(capsys, "design", "--design", "shopping")
    assert code == EXIT_OK and json.loads(out)["schema"] == "bracketlab-design/1"


def test_design_file_round_trip(capsys, tmp_path):
    _, out, _ = run(capsys, "design", "--design", "risk")
    p = tmp_path / "d.json"
    p.write_text(out)
    code, out2, _ = run(capsys, "design", "--design", f"file:{p}")
    assert code == EXIT_OK and out2 == out


def test_unknown_design(capsys):
    code, _, err = run(capsys, "design", "--design", "moon")
    assert code == EXIT_INPUT and "unknown design" in err


def test_validate(capsys, risk_csv):
    code, out, _ = run(capsys, "validate", "--design", "risk", "--input", str(risk_csv))
    assert code == EXIT_OK and out.startswith("2 subjects")


def test_validate_reports_line_numbers(capsys, tmp_path, risk_csv):
    lines = risk_csv.read_text().splitlines()
    parts = lines[3].split(",")
    parts[4] = "99"
    lines[3] = ",".join(parts)
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, "validate", "--design", "risk", "--input", str(bad))
    assert code == EXIT_INPUT and "bad.csv:4" in err


def test_missing_input_file(capsys, tmp_path):
    code, _, _ = run(capsys, "validate", "--design", "risk", "--input", str(tmp_path / "none.csv"))
    assert code == EXIT_IO


def test_analyze_example(capsys, risk_csv):
    code, out, _ = run(capsys, "analyze", "--design", "risk", "--input", str(risk_csv), "--alpha-grid", "10")
    assert code == EXIT_OK
    rep = json.loads(out)
    a1 = rep["subjects"][0]
    assert a1["subject_id"] == "a1"
    assert a1["tests"]["nb_sarp"] and not a1["tests"]["bb_sarp"]
    assert "1" in a1["pnb_alphas"]
    assert rep["subjects"][1]["tests"]["bb_sarp"]


def test_analyze_is_worker_independent(capsys, risk_csv):
    outs = set()
    for w in ("1", "2"):
        _, out, _ = run(capsys, "analyze", "--design", "risk", "--input", str(risk_csv), "--alpha-grid", "4", "--workers", w)
        outs.add(out)
    assert len(outs) == 1


def test_analyze_unknown_test(capsys, risk_csv):
    code, _, _ = run(capsys, "analyze", "--design", "risk", "--input", str(risk_csv), "--tests", "nb_sarp,zzz")
    assert code == EXIT_INPUT


def test_areas_narrow(capsys):
    code, out, _ = run(capsys, "areas", "--design", "risk", "--model", "narrow", "--errors", "0")
    assert code == EXIT_OK and out.splitlines()[1].split(",")[:3] == ["narrow", "0", "6"]


def test_power_exact_and_budget(capsys):
    code, out, _ = run(capsys, "power", "--design", "risk", "--tests", "nb_warp.all", "--errors", "0")
    assert code == EXIT_OK and "1/2057" in out
    code, _, _ = run(capsys, "power", "--design", "risk", "--tests", "nb_sarp", "--budget", "10")
    assert code == EXIT_BUDGET


def test_power_mc_seeded(capsys):
    args = ("power", "--design", "risk", "--tests", "bb_mon.d1", "--errors", "0", "--method", "mc", "--samples", "3000", "--seed", "7")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args, "--workers", "2")
    assert a == b


def test_predict(capsys):
    code, out, _ = run(capsys, "predict", "--design", "shopping", "--model", "broad")
    d1 = json.loads(out)["predictions"]["D1"]
    assert code == EXIT_OK and [b[0] for b in d1[0]["bundles"]] == ["0", "10"]
    code, _, _ = run(capsys, "predict", "--design", "shopping", "--model", "pnb")
    assert code != EXIT_OK


def test_estimate_alpha_table(capsys):
    code, out, _ = run(capsys, "estimate-alpha", "--design", "shopping")
    rows = out.splitlines()
    assert code == EXIT_OK and len(rows) == 10
    code, _, _ = run(capsys, "estimate-alpha", "--design", "risk")
    assert code == EXIT_INPUT


def test_simulate_then_classify_round_trip(capsys, tmp_path, shopping):
    pop = {
        "seed": 3,
        "agents": [
            {"utility": {"kind": "induced_sqrt"}, "bracketing": "narrow", "tremble": 0.2, "count": 3},
            {"utility": {"kind": "induced_sqrt"}, "bracketing": "pnb", "alpha": "1/2", "count": 2},
        ],
    }
    spec = tmp_path / "pop.json"
    spec.write_text(json.dumps(pop))
    csv_path = tmp_path / "sim.csv"
    code, _, _ = run(capsys, "simulate", "--design", "shopping", "--population", str(spec), "--out", str(csv_path))
    assert code == EXIT_OK
    code, out, _ = run(capsys, "classify", "--design", "shopping", "--input", str(csv_path))
    assert code == EXIT_OK
    rep = json.loads(out)
    subjects = read_choices_text(csv_path.read_text(), shopping)
    expect = [classify_subject(shopping, s, AnalysisConfig()).label for s in subjects]
    assert [r["selten"]["assigned"] for r in rep["subjects"]] == expect
    assert sum(rep["assignments"].values()) == 5


def test_simulate_inline_flags(capsys):
    code, out, _ = run(capsys, "simulate", "--design", "risk", "--count", "2", "--bracketing", "broad")
    assert code == EXIT_OK and len(out.splitlines()) == 1 + 2 * 7
    code, _, _ = run(capsys, "simulate", "--design", "risk", "--bracketing", "pnb")
    assert code == EXIT_INPUT


def test_payoff_table(capsys):
    assert payoff_table(4, 4).splitlines()[5].split(",")[5] == "6.40"
    code, out, _ = run(capsys, "payoff-table", "--max-apples", "2", "--max-oranges", "2")
    assert code == EXIT_OK and out.splitlines()[1] == "0,0.00,0.40,0.80"
