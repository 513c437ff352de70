import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cproj_lab.errors import DegenerateInput, DomainError
from cproj_lab.fields import IdentityField
from cproj_lab.kahler import MetricField
from cproj_lab.models import fubini_study
from cproj_lab.suite import GK_POINT, gk_setup, tphi_setup
from cproj_lab.transform import (
    PGLElement,
    PullbackMetric,
    classify_map,
    coordinates,
    density_from_solution,
    identity_pgl,
    is_non_affine,
    pgl_pullback_potential,
    pullback_density,
    pullback_eigen_dynamics,
    pullback_metric,
    scaling_map,
    solution_from_density,
    t_phi,
    table_exponents,
    tphi_spectral_report,
    gk_asymptotics_check,
)
from cproj_lab.mobility import reconstruct_metric

X = np.array([0.3, -0.2, 0.25, 0.1])
DIAG = np.diag([2.0, 1.0, 1.0]).astype(complex)


def _affine_action(matrix, x):
    z = x[0::2] + 1j * x[1::2]
    w = matrix @ np.concatenate([[1.0], z])
    q = w[1:] / w[0]
    out = np.empty_like(x)
    out[0::2], out[1::2] = q.real, q.imag
    return out


def test_singular_and_malformed_matrices():
    with pytest.raises(DegenerateInput, match="PGLElement singular"):
        PGLElement(np.diag([1.0, 0.0, 1.0]))
    with pytest.raises(DegenerateInput):
        PGLElement(np.ones((2, 3)))
    with pytest.raises(DegenerateInput):
        PGLElement.from_pairs([[1, 0], [0, 0], [0, 0]])


def test_action_matches_homogeneous_coordinates(rng):
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) + 3 * np.eye(3)
    phi = PGLElement(m)
    x = rng.normal(size=4) * 0.2
    assert np.allclose(phi(x), _affine_action(m, x), atol=1e-14)


def test_pairs_roundtrip(rng):
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    phi = PGLElement(m)
    assert np.array_equal(PGLElement.from_pairs(phi.to_pairs()).matrix, m)


def test_group_operations(rng):
    a = PGLElement(rng.normal(size=(3, 3)) + 4 * np.eye(3))
    b = PGLElement(rng.normal(size=(3, 3)) + 4 * np.eye(3))
    x = np.array([0.05, 0.02, -0.03, 0.01])
    assert np.allclose((a @ b)(x), a(b(x)))
    assert np.allclose(a.inverse()(a(x)), x)
    assert np.allclose(a.power(3)(x), a(a(a(x))))
    assert np.allclose(a.power(-2)(a.power(2)(x)), x)
    assert np.allclose(identity_pgl(2)(x), x)


def test_point_at_infinity():
    phi = PGLElement(np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]], dtype=complex))
    with pytest.raises(DomainError):
        phi(np.zeros(4))


def test_jacobian_and_holomorphy(rng):
    phi = PGLElement(np.eye(3) + 0.3 * rng.normal(size=(3, 3)))
    x = np.array([0.1, 0.05, -0.1, 0.2])
    h = 1e-6
    fd = np.column_stack([(phi(x + h * e) - phi(x - h * e)) / (2 * h) for e in np.eye(4)])
    assert np.allclose(phi.jacobian(x), fd, atol=1e-8)
    assert phi.holomorphy_residual(x) < 1e-12


def test_pullback_matches_closed_form_potential(fs2, rng):
    m = np.eye(3) + 0.3 * (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    phi = PGLElement(m)
    closed = MetricField(fs2.chart, potential=pgl_pullback_potential(m))
    via_jets = PullbackMetric(phi, fs2.metric)
    x = np.array([0.1, 0.05, -0.1, 0.2])
    assert np.allclose(closed.value(x), via_jets.value(x), atol=1e-12)
    assert np.allclose(closed.value(x), pullback_metric(phi, fs2.metric, x).components, atol=1e-12)


def test_pullback_examples(flat2, fs2):
    assert np.allclose(pullback_metric(identity_pgl(2), fs2.metric, X).components, fs2.metric.value(X))
    assert np.allclose(pullback_metric(scaling_map(2, 2.0), flat2.metric, X).components, 4 * np.eye(4))
    for name in ("unitary", "unitary_rot"):
        pb = pullback_metric(fs2.maps[name], fs2.metric, X).components
        assert np.abs(pb - fs2.metric.value(X)).max() <= 1e-10


def test_density_routes_agree_for_scaling(flat2):
    phi = scaling_map(2, 2.0)
    g = flat2.metric.value
    eta = pullback_density(phi, lambda y: density_from_solution(np.eye(4), g(y)), X)
    a = solution_from_density(eta.eta, g(X))
    assert np.allclose(a, a[0, 0] * np.eye(4))
    assert np.allclose(reconstruct_metric(a, g(X)), pullback_metric(phi, flat2.metric, X).components)


def test_density_identity_and_unitary(fs2):
    g = fs2.metric.value
    eta_at = lambda y: density_from_solution(np.eye(4), g(y))  # noqa: E731
    assert np.allclose(pullback_density(identity_pgl(2), eta_at, X).eta, eta_at(X))
    moved = pullback_density(fs2.maps["unitary_rot"], eta_at, X).eta
    assert np.abs(moved - eta_at(X)).max() <= 1e-10


def test_classification_chain(flat2, fs2, rng):
    pts = list(fs2.chart.sample(rng, 4, 0.1))
    assert classify_map(fs2.maps["unitary"], fs2.metric, pts).verdict == "isometry"
    homo = classify_map(scaling_map(2, 2.0), flat2.metric, pts)
    assert homo.verdict == "homothety"
    assert homo.homothety_constant == pytest.approx(4.0)
    cp = classify_map(PGLElement(DIAG), fs2.metric, pts)
    assert cp.verdict == "c-projective"
    assert cp.residuals["cprojective"] <= 1e-7
    assert is_non_affine(cp)


def test_eigen_dynamics_examples():
    assert pullback_eigen_dynamics(0.3, 2.0, 1.0, 0) == pytest.approx(0.3)
    assert pullback_eigen_dynamics(0.5, 2.0, 1.0, 1) == pytest.approx(2 / 3)
    for d in (0.0, 1.0):
        assert pullback_eigen_dynamics(d, 2.0, 0.5, 7) == d
    assert pullback_eigen_dynamics(0.5, 2.0, 1.0, 2000) == 1.0
    assert pullback_eigen_dynamics(0.5, 2.0, 1.0, -2000) == 0.0
    with pytest.raises(ValueError):
        pullback_eigen_dynamics(1.5, 2.0, 1.0, 1)
    with pytest.raises(ValueError):
        pullback_eigen_dynamics(0.5, -2.0, 1.0, 1)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.2, 5.0), st.floats(0.2, 5.0),
       st.integers(-6, 6), st.integers(-6, 6))
def test_eigen_dynamics_semigroup(d, alpha, beta, j, k):
    once = pullback_eigen_dynamics(d, alpha, beta, j + k)
    twice = pullback_eigen_dynamics(pullback_eigen_dynamics(d, alpha, beta, j), alpha, beta, k)
    assert once == pytest.approx(twice, rel=1e-9, abs=1e-12)


def test_spectral_report_gating():
    rep = tphi_spectral_report(np.eye(2))
    assert rep["det"] == 1.0
    assert rep["eigenvalues"] == [[1.0, 0.0], [1.0, 0.0]]
    assert not rep["distinct_positive_eigenvalues"]
    rep = tphi_spectral_report(np.diag([3.0, 1.0]), sol_dimension=2, non_affine=True)
    assert rep["distinct_positive_eigenvalues"] and rep["witness_applicable"] and rep["consistent"]
    rep = tphi_spectral_report(np.diag([-3.0, 1.0]), sol_dimension=2, non_affine=True)
    assert rep["det_sign"] == -1 and rep["consistent"]
    rep = tphi_spectral_report(np.eye(9), sol_dimension=9, non_affine=True)
    assert not rep["witness_applicable"]
    assert "consistent" not in rep


def test_table_degenerates_for_equal_eigenvalues():
    table = table_exponents(2, 1, 0, 1.7, 1.7)
    slopes = {round(v, 12) for v, _ in table.values()}
    assert len(slopes) == 1
    table = table_exponents(2, 1, 0, 1.7, 1.7, positive=False)
    assert {round(v, 12) for v, _ in table.values()} == slopes


@pytest.fixture(scope="module")
def tsetup():
    return tphi_setup()


def test_tphi_identity_and_law(tsetup):
    model, basis, pts = tsetup
    t_id = t_phi(identity_pgl(2), basis, pts).matrix
    assert np.abs(t_id - np.eye(9)).max() <= 1e-7
    phi = PGLElement(DIAG)
    lhs = t_phi(phi.power(2), basis, pts).matrix
    rhs = t_phi(phi, basis, pts).matrix
    assert np.abs(lhs - rhs @ rhs).max() <= 1e-7


def test_tphi_unitary_fixes_identity(tsetup):
    model, basis, pts = tsetup
    idc, resid = coordinates(IdentityField(model.metric), basis, pts)
    assert resid <= 1e-10
    t = t_phi(model.maps["unitary_rot"], basis, pts).matrix
    assert np.abs(t @ idc - idc).max() <= 1e-8


@pytest.fixture(scope="module")
def gk():
    return gk_setup()


def test_gk_negative_direction(gk):
    model, phi, split = gk
    x0 = np.array(GK_POINT)
    fwd = gk_asymptotics_check(phi, model.metric, x0, split.alpha, split.beta, 0, 1, range(3, 9))
    back = gk_asymptotics_check(phi, model.metric, x0, split.alpha, split.beta, 0, 1, range(-8, -2))
    assert fwd["passed"] and back["passed"]
    assert fwd["route_discrepancy"] <= 1e-9
    assert back["route_discrepancy"] <= 1e-9
    assert set(fwd["table"]) == set(back["table"])


def test_fs_chart_model_dimensions():
    fs = fubini_study(3)
    assert fs.maps["diag2"].n == 3
