"""Acceptance criteria 1-12, one test each.

Every test prints a single ``criterion NN [PASS|FAIL] ...`` line so the
outcome is visible in ``pytest -v`` output even without ``-s``.
"""

import pytest

from cproj_lab import suite


@pytest.fixture(scope="module")
def mobility_cache():
    return suite.mobility_results(seed=suite.SEED)


def _report(capsys, result):
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.details


def test_criterion_01_kahler_validity(capsys):
    r = suite.criterion_1()
    _report(capsys, r)
    assert r.seconds < 10


def test_criterion_02_weyl_vanishing(capsys):
    r = suite.criterion_2()
    _report(capsys, r)
    assert r.seconds < 30


def test_criterion_03_weyl_invariance(capsys):
    _report(capsys, suite.criterion_3())


def test_criterion_04_decomposition(capsys):
    _report(capsys, suite.criterion_4())


def test_criterion_05_degree_of_mobility(capsys, mobility_cache):
    r = suite.criterion_5(cache=mobility_cache)
    _report(capsys, r)
    assert r.details["fs2"]["degree"] == 9
    assert r.details["fs3"]["degree"] == 16


def test_criterion_06_mobility_residual(capsys, mobility_cache):
    _report(capsys, suite.criterion_6(cache=mobility_cache))


def test_criterion_07_conservation(capsys):
    _report(capsys, suite.criterion_7())


def test_criterion_08_jplanar_confinement(capsys):
    _report(capsys, suite.criterion_8())


def test_criterion_09_property_p_dynamics(capsys):
    _report(capsys, suite.criterion_9())


def test_criterion_10_representation(capsys):
    _report(capsys, suite.criterion_10())


def test_criterion_11_classification(capsys):
    _report(capsys, suite.criterion_11())


def test_criterion_12_proof_formulas(capsys):
    _report(capsys, suite.criterion_12())
