import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parabolic_fem import study
from parabolic_fem.study import (COLUMNS, ConvergenceReport, ReportRow, StudyConfig,
                                 StudyError, config_to_text, fit_rate, parse_config,
                                 run_study, run_time_study, with_overrides)


def test_fit_rate_exact_power_laws():
    hs = [0.5, 0.25, 0.125, 0.0625]
    for r in (0.5, 1.0, 2.0, 3.5):
        assert fit_rate(hs, [7.0 * h ** r for h in hs]) == pytest.approx(r, abs=1e-12)


def test_fit_rate_is_least_squares_slope():
    hs = np.array([1.0, 0.5, 0.25])
    errs = np.array([1.0, 0.4, 0.25])
    x, y = np.log(hs), np.log(errs)
    slope = np.sum((x - x.mean()) * (y - y.mean())) / np.sum((x - x.mean()) ** 2)
    assert fit_rate(hs, errs) == pytest.approx(slope, rel=1e-12)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_fit_rate_scale_invariance(a, b):
    hs = np.array([0.3, 0.1, 0.05, 0.02])
    errs = np.array([0.9, 0.2, 0.11, 0.03])
    assert fit_rate(a * hs, b * errs) == pytest.approx(fit_rate(hs, errs), abs=1e-9)


@pytest.mark.parametrize("hs,errs", [
    ([0.5], [0.1]), ([0.5, 0.25], [0.1, 0.0]), ([0.5, 0.25], [0.1, -1.0]),
    ([0.5, 0.25], [0.1, float("nan")]), ([0.5, 0.0], [0.1, 0.05]), ([0.5, 0.5], [0.1, 0.05])])
def test_fit_rate_rejects_bad_input(hs, errs):
    with pytest.raises(ValueError):
        fit_rate(hs, errs)


finite = st.floats(1e-12, 1e6, allow_nan=False, allow_infinity=False)
rows = st.builds(ReportRow, level=st.integers(0, 20), h=finite, tau=finite,
                 dofs=st.integers(1, 10 ** 7), e_W=finite, e_LinfL2=finite, e_L2H1=finite,
                 seconds=st.floats(0, 1e4))


@settings(max_examples=50)
@given(st.lists(rows, max_size=6))
def test_csv_round_trip(rs):
    rep = ConvergenceReport("p", tuple(rs))
    back = ConvergenceReport.from_csv(rep.to_csv(), "p")
    assert back == rep
    assert back.to_csv() == rep.to_csv()


def test_csv_header_and_malformed_input():
    rep = ConvergenceReport("p", ())
    assert rep.to_csv() == ",".join(COLUMNS) + "\n"
    with pytest.raises(ValueError):
        ConvergenceReport.from_csv("a,b\n")
    with pytest.raises(ValueError):
        ConvergenceReport.from_csv(",".join(COLUMNS) + "\n1,2\n")


def test_single_row_has_no_rate():
    row = ReportRow(0, 0.5, 0.1, 3, 1.0, 1.0, 1.0, 0.0)
    rep = ConvergenceReport("p", (row,))
    assert rep.rates() == {"e_W": None, "e_LinfL2": None, "e_L2H1": None}
    assert "-" in rep.format_table().splitlines()[-1]


def test_parse_config():
    text = """
    # a comment
    problem = checkerboard
    levels = 3          # levels 0, 1, 2
    time-mode = semi
    steps = 8
    tol_time = 1e-6
    timing = no
    eps = 0.2
    """
    cfg = parse_config(text)
    assert cfg.problem == "checkerboard"
    assert cfg.levels == (0, 1, 2)
    assert cfg.time_mode == "semi"
    assert cfg.steps == 8
    assert cfg.tol_time == 1e-6
    assert cfg.timing is False
    assert cfg.problem_options == {"eps": 0.2}
    assert parse_config("problem = smooth1d\nlevels = 1, 3,4").levels == (1, 3, 4)
    assert parse_config(text, {"levels": "2", "eps": None}).levels == (0, 1)


@pytest.mark.parametrize("text", [
    "levels = 3", "problem = smooth1d\nbogus = 1", "problem = smooth1d\nlevels = 2,1",
    "problem = smooth1d\ntime_mode = sometimes", "problem = smooth1d\ntiming = maybe",
    "problem smooth1d", "problem = smooth1d\nsteps = 0"])
def test_parse_config_rejects(text):
    with pytest.raises(ValueError):
        parse_config(text)


def test_config_text_round_trip():
    cfg = StudyConfig("spectral-p2", levels=(1, 2), time_mode="fixed", steps=32,
                      tol_time=1e-4, out="x.csv", timing=False,
                      problem_options={"eps": 0.05, "n_modes": 64})
    assert parse_config(config_to_text(cfg)) == cfg
    assert with_overrides(cfg, steps=4).steps == 4


def test_coupled_steps():
    cfg = StudyConfig("smooth1d", steps=5)
    assert [cfg.n_steps(k) for k in (0, 1, 3)] == [5, 10, 40]
    assert StudyConfig("smooth1d", steps=5, time_mode="fixed").n_steps(3) == 5


def test_partial_rows_are_flushed_on_failure(tmp_path, monkeypatch):
    out = tmp_path / "study.csv"
    real = study._solve_level

    def failing(cfg, problem, m, level):
        if level == 2:
            raise RuntimeError("boom")
        return real(cfg, problem, m, level)

    monkeypatch.setattr(study, "_solve_level", failing)
    cfg = StudyConfig("smooth1d", levels=(0, 1, 2), steps=4, out=str(out))
    with pytest.raises(StudyError) as info:
        run_study(cfg)
    assert len(info.value.report.rows) == 2
    assert [r.level for r in ConvergenceReport.read_csv(out).rows] == [0, 1]


def test_semi_discrete_study_rate_and_callbacks():
    seen = []
    cfg = StudyConfig("smooth1d", levels=(0, 1, 2), time_mode="semi", steps=8,
                      timing=False)
    rep = run_study(cfg, on_row=seen.append)
    assert [r.level for r in rep.rows] == [0, 1, 2] == [r.level for r in seen]
    assert all(r.seconds == 0.0 for r in rep.rows)
    assert 0.9 <= rep.rates()["e_W"] <= 1.1
    hs = rep.column("h")
    np.testing.assert_allclose(hs[:-1] / hs[1:], 2.0)


def test_time_study_orders_rows_by_decreasing_tau():
    rep = run_time_study("smooth1d", level=5, steps=[16, 4, 8], timing=False)
    assert list(rep.column("tau")) == [0.25, 0.125, 0.0625]
    assert math.isfinite(rep.rates("tau")["e_W"])
