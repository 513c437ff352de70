import numpy as np
import pytest

from cproj_lab.chart import Chart
from cproj_lab.kahler import (
    MetricField,
    christoffel_values,
    chsc_fit,
    curvature_bundle,
    kahler_validate,
)
from cproj_lab.models import fubini_study
from cproj_lab.suite import fsxfs


def _complex(a):
    return a[0::2] + 1j * a[1::2]


def fs_quadratic(x, a):
    """``g(a, a)`` for ``log(1 + |z|^2)`` written directly in ``z`` and ``X``."""
    z, big_x = _complex(x), _complex(a)
    s = 1.0 + np.vdot(z, z).real
    return (np.vdot(big_x, big_x).real * s - abs(np.vdot(z, big_x)) ** 2) / s**2


def fd_christoffel(metric, x, h=1e-5):
    dim = len(x)
    dg = np.zeros((dim, dim, dim))  # [c, a, b] = d_c g_ab
    for c in range(dim):
        e = np.zeros(dim)
        e[c] = h
        dg[c] = (metric.value(x + e) - metric.value(x - e)) / (2 * h)
    ginv = np.linalg.inv(metric.value(x))
    # [d, a, b] = (d_a g_db + d_b g_da - d_d g_ab) / 2
    low = 0.5 * (np.transpose(dg, (1, 0, 2)) + np.transpose(dg, (1, 2, 0)) - dg)
    return np.einsum("cd,dab->cab", ginv, low)


def test_flat_is_identity(flat2, rng):
    for x in flat2.chart.sample(rng, 5):
        assert np.array_equal(flat2.metric.value(x), np.eye(4))


def test_fs_at_origin_and_scale():
    assert np.allclose(fubini_study(2, 1.0).metric.value(np.zeros(4)), np.eye(4), atol=1e-15)
    assert np.allclose(fubini_study(2, 2.5).metric.value(np.zeros(4)), 2.5 * np.eye(4), atol=1e-15)


def test_fs_matches_closed_form(fs2, rng):
    for x in fs2.chart.sample(rng, 10, 0.5):
        g = fs2.metric.value(x)
        for _ in range(3):
            a = rng.normal(size=4)
            assert a @ g @ a == pytest.approx(fs_quadratic(x, a), rel=1e-13)


def test_christoffel_against_finite_differences(fs2, rng):
    for x in fs2.chart.sample(rng, 3, 0.4):
        _, gamma = christoffel_values(fs2.metric, x)
        assert np.allclose(gamma, fd_christoffel(fs2.metric, x), atol=1e-8)


def test_christoffel_vanishes_at_fs_origin_and_scale_invariant(rng):
    _, gamma = christoffel_values(fubini_study(2).metric, np.zeros(4))
    assert np.abs(gamma).max() < 1e-15
    x = np.array([0.2, -0.1, 0.3, 0.05])
    _, g1 = christoffel_values(fubini_study(2, 1.0).metric, x)
    _, g3 = christoffel_values(fubini_study(2, 3.0).metric, x)
    assert np.allclose(g1, g3, atol=1e-14)


def test_flat_curvature_zero(flat2):
    b = curvature_bundle(flat2.metric, np.array([1.0, 2.0, -1.0, 0.5]))
    assert np.abs(b.riemann).max() == 0.0
    assert chsc_fit(flat2.metric, np.zeros(4)) == (0.0, 0.0)


def test_fs_constant_holomorphic_sectional_curvature(rng):
    fs = fubini_study(2)
    mus = []
    for x in fs.chart.sample(rng, 20, 0.5):
        mu, resid = chsc_fit(fs.metric, x)
        assert resid <= 1e-8
        mus.append(mu)
    assert np.ptp(mus) <= 1e-8 * abs(mus[0])
    mu2, _ = chsc_fit(fubini_study(2, 2.0).metric, np.array([0.1, 0.2, 0.3, 0.4]))
    assert mu2 == pytest.approx(mus[0] / 2, rel=1e-10)


def test_product_not_constant_hsc():
    _, resid = chsc_fit(fsxfs().metric, np.array([0.3, 0.1, -0.2, 0.4]))
    assert resid > 1e-3


def test_validate_fs(fs2, rng):
    pts = Chart(2, -1, 1, radius=1.0).sample(rng, 100)
    rep = kahler_validate(fs2.metric, pts)
    assert rep.passed
    assert max(rep.residuals().values()) <= 1e-9


def test_validate_flat_exact(flat2, rng):
    rep = kahler_validate(flat2.metric, flat2.chart.sample(rng, 10))
    assert all(v == 0.0 for v in rep.residuals().values())


def test_non_hermitian_perturbation_fails(fs2, rng):
    eps = 1e-3
    comps = [["0"] * 4 for _ in range(4)]
    comps[0][0], comps[1][1] = str(eps), str(-eps)
    bad = fs2.metric.plus_components(comps)
    rep = kahler_validate(bad, fs2.chart.sample(rng, 10, 0.3))
    assert not rep.passed
    assert 1e-4 < rep.hermitian < 1e-2


def test_metric_needs_data():
    with pytest.raises(ValueError):
        MetricField(Chart(2))
    with pytest.raises(ValueError):
        MetricField(Chart(2), potential="x1", scale=-1.0)
