import pytest

from hcb.verify import (
    SuiteResult,
    bookkeeping_suite,
    complexity_suite,
    concentration_check,
    identity_suite,
    kl_suite,
    run_all,
    separation_suite,
    stream_suite,
    wedge_suite,
)


def test_identity_suite():
    result = identity_suite(7, instances=8, max_arms=6)
    assert result.passed, result.failures
    assert result.checked > 0


def test_complexity_suite():
    result = complexity_suite(7, vectors=200)
    assert result.passed, result.failures


def test_separation_suite():
    result = separation_suite(7, instances=20)
    assert result.passed, result.failures
    assert "alpha_over_e_shortfalls" in result.details


def test_bookkeeping_suite():
    result = bookkeeping_suite(7, episodes=10)
    assert result.passed, result.failures


def test_stream_suite():
    assert stream_suite(7, t_count=2, reps=200).passed


def test_concentration_check():
    result = concentration_check(7, reps=2000)
    assert result.passed, result.failures
    assert result.checked == 7


def test_failures_are_capped():
    result = SuiteResult("demo")
    for k in range(25):
        result.fail(f"failure {k}")
    assert len(result.failures) == 20
    assert result.details["suppressed"] == 5
    assert not result.passed


@pytest.mark.slow
def test_kl_suite():
    result = kl_suite(7, reps=40)
    assert result.passed, result.failures


@pytest.mark.slow
def test_wedge_suite():
    result = wedge_suite(7, reps=100)
    assert result.passed, result.failures


@pytest.mark.slow
def test_run_all_quick():
    assert all(s.passed for s in run_all(7, quick=True))
