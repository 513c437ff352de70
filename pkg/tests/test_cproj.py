import numpy as np
import pytest

from cproj_lab.cproj import (
    ConnectionField,
    cproj_change,
    difference_tensor,
    density_change,
    random_polynomial_oneform,
    rho_tensor,
    weyl,
    weyl_at,
    weyl_discrepancy,
    weyl_invariance_check,
    weyl_norm,
)
from cproj_lab.kahler import christoffel_values, curvature_bundle
from cproj_lab.models import fs_perturbed, fubini_study
from cproj_lab.suite import fsxfs


def test_flat_weyl_zero(flat2):
    data = weyl_at(flat2.metric, np.array([0.5, 0.1, -0.3, 2.0]))
    assert np.abs(data.weyl).max() == 0.0
    assert np.abs(data.rho).max() == 0.0
    assert weyl_norm(flat2.metric, np.zeros(4)) == 0.0


def test_fs_weyl_vanishes(fs2, rng):
    for x in fs2.chart.sample(rng, 10, 0.3):
        assert weyl_norm(fs2.metric, x) <= 1e-16


def test_product_and_perturbed_have_weyl():
    assert weyl_norm(fsxfs().metric, np.array([0.3, 0.1, -0.2, 0.4])) > 1e-3
    pert = fs_perturbed(2, 0.1, 7)
    assert weyl_norm(pert.metric, np.array([0.3, 0.2, -0.25, 0.15])) > 1e-4


def test_rho_at_fs_origin_is_scaled_ricci(fs2):
    b = curvature_bundle(fs2.metric, np.zeros(4))
    assert np.allclose(rho_tensor(b), b.ricci / 3, atol=1e-14)


def test_decomposition_identity(rng):
    for model in (fubini_study(2), fsxfs()):
        for x in model.chart.sample(rng, 5, 0.2):
            assert weyl(curvature_bundle(model.metric, x)).reconstruction_error() <= 1e-12


def test_zero_upsilon_is_noop(fs2):
    x = np.array([0.1, 0.2, 0.0, -0.1])
    base = ConnectionField(fs2.metric).gamma_jet(x, 0)[..., 0]
    same = cproj_change(fs2.metric, ["0"] * 4).gamma_jet(x, 0)[..., 0]
    assert np.array_equal(base, same)
    assert weyl_discrepancy(fs2.metric, ["0"] * 4, x) == 0.0


def test_flat_difference_tensor_explicit(flat2):
    ups = ["1", "0", "0", "0"]
    gamma = cproj_change(flat2.metric, ups).gamma_jet(np.array([0.3, 0.4, 0.5, 0.6]), 0)[..., 0]
    jm = flat2.metric.jmat
    y = np.array([1.0, 0, 0, 0])
    jy = jm.T @ y
    eye = np.eye(4)
    expected = 0.5 * (np.einsum("a,bd->bad", y, eye) + np.einsum("ab,d->bad", eye, y)
                      - np.einsum("a,bd->bad", jy, jm) - np.einsum("ba,d->bad", jm, jy))
    assert np.allclose(gamma, expected, atol=1e-15)


def test_change_roundtrip(fs2):
    ups = ["x1*x2", "0.3", "x3", "-x4^2"]
    neg = ["-(x1*x2)", "-0.3", "-x3", "x4^2"]
    x = np.array([0.2, 0.1, -0.3, 0.25])
    back = cproj_change(cproj_change(fs2.metric, ups), neg)
    _, gamma = christoffel_values(fs2.metric, x)
    assert np.allclose(back.gamma_jet(x, 0)[..., 0], gamma, atol=1e-12)


def test_changed_connection_stays_complex_and_torsion_free(fs2, rng):
    conn = ConnectionField(fs2.metric, random_polynomial_oneform(4, rng))
    x = np.array([0.2, 0.1, -0.3, 0.25])
    assert conn.complex_residual(x) < 1e-12
    assert conn.torsion_residual(x) < 1e-14


def test_weyl_invariance_on_fs():
    fs = fubini_study(2)
    pts = [np.array([0.1, 0.2, -0.3, 0.1]), np.array([-0.4, 0.0, 0.2, 0.3])]
    rep = weyl_invariance_check(fs.metric, ["0", "0", "x4", "0"], pts)
    assert rep.passed
    assert rep.max_discrepancy <= 1e-8


def test_difference_tensor_linear():
    jm = fubini_study(2).metric.jmat
    a, b = np.arange(4.0), np.array([1.0, -2.0, 0.5, 3.0])
    assert np.allclose(difference_tensor(a + 2 * b, jm), difference_tensor(a, jm) + 2 * difference_tensor(b, jm))


def test_density_change_constant_upsilon():
    # parallel sigma for the changed connection satisfies d sigma = Upsilon sigma
    ups = np.array([0.3, -0.2])
    sigma = np.exp(ups @ np.array([0.5, 1.0]))
    assert density_change(ups * sigma, sigma, ups) == pytest.approx(np.zeros(2), abs=1e-15)
