import numpy as np
import pytest

from cproj_lab.fields import (
    Combination,
    IdentityField,
    MatrixField,
    PairSolution,
    ValueField,
    complex_form,
    hermitian_basis,
    hermitian_real_form,
    hermitian_residual,
    real_form,
)
from cproj_lab.kahler import MetricField
from cproj_lab.chart import complex_structure


def test_real_complex_roundtrip(rng):
    c = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert np.allclose(complex_form(real_form(c)), c)


def test_real_form_commutes_with_j(fs2, rng):
    c = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    jm = complex_structure(2)
    m = real_form(c)
    assert np.allclose(m @ jm, jm @ m)


def test_real_form_is_multiplicative(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    assert np.allclose(real_form(a @ b), real_form(a) @ real_form(b))


def test_hermitian_basis_is_symmetric_and_j_invariant(fs2):
    jm = complex_structure(2)
    basis = hermitian_basis(2)
    assert len(basis) == 4
    for h in basis:
        assert np.allclose(h, h.T)
        assert np.allclose(jm.T @ h @ jm, h)
    flat = np.array([h.ravel() for h in basis])
    assert np.linalg.matrix_rank(flat) == 4


def test_hermitian_form_of_identity():
    assert np.array_equal(hermitian_real_form(np.eye(2, dtype=complex)), np.eye(4))


def test_identity_field(fs2):
    ident = IdentityField(fs2.metric)
    jet = ident.jet(np.zeros(4), 2)
    assert np.array_equal(jet[..., 0], np.eye(4))
    assert np.abs(jet[..., 1:]).max() == 0.0


def test_matrix_field_entries(flat2):
    entries = [["x1", 0, 0, 0], [0, "x1", 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
    f = MatrixField(flat2.metric, entries)
    assert f.value(np.array([3.0, 0, 0, 0]))[0, 0] == 3.0
    with pytest.raises(ValueError):
        MatrixField(flat2.metric, np.eye(3))


def test_pair_with_itself_is_identity(fs2):
    pair = PairSolution(fs2.metric, fs2.metric)
    assert np.allclose(pair.value(np.array([0.2, 0.1, -0.3, 0.4])), np.eye(4), atol=1e-14)


def test_pair_with_scaled_metric(flat2):
    # gt = 4 g on n = 2: A = (4^4)^(1/6) / 4 Id
    pair = PairSolution(flat2.metric, flat2.metric.with_scale(4.0))
    assert np.allclose(pair.value(np.zeros(4)), 4 ** (4 / 6) / 4 * np.eye(4))


def test_combination_and_affine(fs2):
    ident = IdentityField(fs2.metric)
    combo = ident.affine(2.0, -0.5)
    assert isinstance(combo, Combination)
    assert np.allclose(combo.value(np.zeros(4)), 1.5 * np.eye(4))
    assert np.allclose((ident + ident).value(np.zeros(4)), 2 * np.eye(4))
    assert np.allclose((3 * ident).value(np.zeros(4)), 3 * np.eye(4))


def test_value_field_has_no_derivatives(flat2):
    vf = ValueField(flat2.metric, lambda x: np.eye(4))
    assert np.array_equal(vf.value(np.zeros(4)), np.eye(4))
    with pytest.raises(NotImplementedError):
        vf.jet(np.zeros(4), 1)


def test_hermitian_residual_detects_asymmetry(flat2):
    jm = complex_structure(2)
    g = np.eye(4)
    assert hermitian_residual(np.eye(4), g, jm) < 1e-15
    bad = np.eye(4)
    bad[0, 1] = 0.3
    assert hermitian_residual(bad, g, jm) > 1e-2


def test_components_only_metric(flat2):
    comps = [["1" if i == j else "0" for j in range(4)] for i in range(4)]
    m = MetricField(flat2.chart, components=comps)
    assert np.array_equal(m.value(np.ones(4)), np.eye(4))
