import json
import math
from pathlib import Path

import numpy as np
import pytest

import comfort_traj as ct

DATA = Path(__file__).resolve().parent.parent / "data"


def test_gauss_rule_is_exact_for_cubics():
    pts, wts = ct.gauss_rule(2)
    assert sum(wts) == pytest.approx(1.0)
    assert sum(w * x**3 for x, w in zip(pts, wts)) == pytest.approx(0.25)


def test_problem_round_trip():
    p = ct.Problem.load(str(DATA / "straight.json"))
    q = ct.Problem.from_json(p.to_json())
    assert q.to_json() == p.to_json()
    assert json.loads(p.to_json())["format_version"] == ct.FORMAT_VERSION


def test_parse_error_names_field():
    text = (DATA / "straight.json").read_text().replace('"w_T": 1', '"w_T": "one"')
    with pytest.raises(ct.ParseError, match="w_T"):
        ct.Problem.from_json(text)
    with pytest.raises(ValueError):
        ct.Problem.from_json("{")


def test_plan_straight_line():
    p = ct.Problem.load(str(DATA / "straight.json"))
    res = ct.plan(p, n=8, samples=101)
    assert res["best"] is not None
    best = res["candidates"][res["best"]]
    assert best["success"]
    s = best["samples"]
    assert isinstance(s["t"], np.ndarray) and s["t"].shape == (101,)
    assert np.all(np.diff(s["t"]) > 0)
    assert s["x"][0] == pytest.approx(0.0, abs=1e-12)
    assert s["x"][-1] == pytest.approx(10.0, abs=1e-9)
    assert np.max(s["v"]) <= 5.0 + 1e-6
    assert best["J"] == pytest.approx(best["J_tau"] + best["J_T"] + best["J_N"])
    assert math.isclose(s["t"][-1], best["J_tau"], rel_tol=1e-6)


def test_converge_reports_gaps():
    p = ct.Problem.load(str(DATA / "straight.json"))
    rows = ct.converge(p, [2, 4])
    assert [r["n"] for r in rows] == [2, 4]
    assert all(r["converged"] for r in rows)
    assert math.isnan(rows[-1]["log_rel_gap"]) or rows[-1]["log_rel_gap"] < -10
