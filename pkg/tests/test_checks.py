import pytest

from parabolic_fem import checks
from parabolic_fem.checks import SUITES, CheckResult, run_suite


@pytest.mark.parametrize("name", list(SUITES))
def test_suite_passes(name):
    res = run_suite(name)
    assert res.passed, res.line()
    assert res.line().startswith("PASS")


def test_projection_rates_are_textbook():
    l2, h1, hm1 = checks.projection_rates()
    assert l2 == pytest.approx(2.0, abs=0.1)
    assert h1 == pytest.approx(1.0, abs=0.1)
    assert hm1 >= 2.8


def test_crashing_suite_counts_as_failure(monkeypatch):
    def boom():
        raise RuntimeError("broken")

    monkeypatch.setitem(SUITES, "boom", boom)
    res = run_suite("boom")
    assert not res.passed
    assert "RuntimeError" in res.detail
    assert res.line().startswith("FAIL")


def test_failing_suite_is_reported(monkeypatch):
    monkeypatch.setitem(SUITES, "bad", lambda: CheckResult("bad", False, "nope"))
    assert [r.passed for r in checks.run_all(["projections", "bad"])] == [True, False]
