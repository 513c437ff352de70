"""C-projective changes of connection, the rho-tensor and the Weyl tensor."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import as_field
from .kahler import (
    CurvatureBundle,
    MetricField,
    bundle_from_gamma_jet,
    check_positive_definite,
    christoffel_jet,
    curvature_bundle,
)

INVARIANCE_TOL = 1e-8
FLAT_TOL = 1e-10


def _alt(t):
    return 0.5 * (t - np.swapaxes(t, 0, 1))


def rho_tensor(bundle: CurvatureBundle):
    """``P_ab`` assembled from the Ricci tensor of the bundle's connection."""
    ric = bundle.ricci
    jm = bundle.jmat
    n = bundle.n
    sym = 0.5 * (ric + ric.T)
    jj = jm.T @ ric @ jm  # J_a^c J_b^d Ric_cd
    jj_sym = 0.5 * (jj + jj.T)
    return (ric + (sym - jj_sym) / (n - 1)) / (n + 1)


def partial_p(p, jm):
    """The tensor ``(dP)_ab^c_d`` built from ``P`` and ``J``."""
    dim = p.shape[0]
    eye = np.eye(dim)
    pj = p @ jm  # (P J)[b, d] = P_be J_d^e
    t1 = np.einsum("ac,bd->abcd", eye, p)
    t2 = np.einsum("ca,bd->abcd", jm, pj)
    t4 = np.einsum("ba,cd->abcd", pj, jm)
    t3 = np.einsum("ab,cd->abcd", _alt(p), eye)
    return _alt(t1 - t2 - t4) - t3


@dataclass
class WeylData:
    weyl: np.ndarray
    rho: np.ndarray
    partial_p: np.ndarray
    bundle: CurvatureBundle

    def reconstruction_error(self):
        r = self.bundle.riemann
        return float(np.linalg.norm(self.weyl + self.partial_p - r) / max(np.linalg.norm(r), 1e-300))


def weyl(bundle: CurvatureBundle, p=None) -> WeylData:
    if p is None:
        p = rho_tensor(bundle)
    dp = partial_p(p, bundle.jmat)
    return WeylData(bundle.riemann - dp, p, dp, bundle)


def weyl_at(metric: MetricField, x) -> WeylData:
    return weyl(curvature_bundle(metric, x))


def _full_contraction(t, g, ginv):
    return float(np.einsum("abcd,efst,cs,ae,bf,dt->", t, t, g, ginv, ginv, ginv, optimize=True))


def weyl_norm(metric: MetricField, x, normalized=True, data=None):
    """The scalar ``F = |W|^2`` (metric contraction); divided by ``|R|^2`` when normalized."""
    w = data if data is not None else weyl_at(metric, x)
    b = w.bundle
    f = _full_contraction(w.weyl, b.g, b.ginv)
    if not normalized:
        return f
    fr = _full_contraction(b.riemann, b.g, b.ginv)
    return f / fr if fr > 0 else f


def is_cproj_flat(metric: MetricField, samples, tol=FLAT_TOL):
    """Flatness witness for metric connections: normalized ``F <= tol`` at all samples."""
    return all(weyl_norm(metric, x) <= tol for x in samples)


# -- connection changes --------------------------------------------------------


def difference_tensor(upsilon, jm):
    """``D[b, a, d]`` with ``Gamma_hat^b_ad = Gamma^b_ad + D[b, a, d]``.

    ``upsilon`` may carry a trailing jet axis.
    """
    dim = jm.shape[0]
    eye = np.eye(dim)
    jy = np.tensordot(jm.T, upsilon, axes=([1], [0]))  # J_a^c Upsilon_c
    out = (
        np.einsum("a...,bd->bad...", upsilon, eye)
        + np.einsum("ab,d...->bad...", eye, upsilon)
        - np.einsum("a...,bd->bad...", jy, jm)
        - np.einsum("ba,d...->bad...", jm, jy)
    )
    return 0.5 * out


class ConnectionField:
    """A torsion-free connection given by a metric plus an optional one-form change."""

    def __init__(self, metric: MetricField, upsilon=None):
        self.metric = metric
        self.upsilon = None if upsilon is None else [as_field(u) for u in upsilon]
        if self.upsilon is not None and len(self.upsilon) != metric.dim:
            raise ValueError(f"one-form needs {metric.dim} components")

    def gamma_jet(self, x, order):
        x = np.asarray(x, dtype=float)
        gj = self.metric.jet(x, order + 1)
        gamma = christoffel_jet(gj, order + 1)
        if self.upsilon is not None:
            ups = np.array([u.jet(x, order) for u in self.upsilon])
            gamma = gamma + difference_tensor(ups, self.metric.jmat)
        return gamma

    def bundle(self, x):
        x = np.asarray(x, dtype=float)
        g = self.metric.value(x)
        check_positive_definite(g, x)
        return bundle_from_gamma_jet(self.gamma_jet(x, 1), g, self.metric.jmat, x)

    def complex_residual(self, x):
        """``max |nabla J|`` of this connection at ``x``."""
        gamma = self.gamma_jet(x, 0)[..., 0]
        jm = self.metric.jmat
        nj = np.einsum("bad,dc->abc", gamma, jm) - np.einsum("dac,bd->abc", gamma, jm)
        return float(np.abs(nj).max())

    def torsion_residual(self, x):
        gamma = self.gamma_jet(x, 0)[..., 0]
        return float(np.abs(gamma - np.swapaxes(gamma, 1, 2)).max())


def cproj_change(connection, upsilon) -> ConnectionField:
    """Change a (metric) connection by the one-form field ``upsilon``."""
    if isinstance(connection, MetricField):
        connection = ConnectionField(connection)
    if connection.upsilon is None:
        total = [as_field(u) for u in upsilon]
    else:
        total = [a + as_field(b) for a, b in zip(connection.upsilon, upsilon)]
    return ConnectionField(connection.metric, total)


def density_change(nabla_sigma, sigma, upsilon):
    """Covariant derivative of a section of the weight bundle after the change."""
    return np.asarray(nabla_sigma, dtype=float) - np.asarray(upsilon, dtype=float) * sigma


@dataclass
class InvarianceReport:
    max_discrepancy: float
    samples: int
    tolerance: float = INVARIANCE_TOL

    @property
    def passed(self):
        return self.max_discrepancy <= self.tolerance

    def to_dict(self):
        return {"max_discrepancy": self.max_discrepancy, "samples": self.samples,
                "tolerance": self.tolerance, "passed": self.passed}


def weyl_discrepancy(metric: MetricField, upsilon, x):
    base = weyl(ConnectionField(metric).bundle(x))
    changed = weyl(ConnectionField(metric, upsilon).bundle(x))
    scale = max(np.linalg.norm(base.bundle.riemann), np.linalg.norm(changed.bundle.riemann), 1e-300)
    return float(np.linalg.norm(base.weyl - changed.weyl) / scale)


def weyl_invariance_check(metric: MetricField, upsilon, samples: Sequence, tol=INVARIANCE_TOL):
    vals = [weyl_discrepancy(metric, upsilon, x) for x in samples]
    return InvarianceReport(float(max(vals)), len(vals), tol)


def random_polynomial_oneform(dim, rng, degree=2, terms=3, scale=0.3):
    """A one-form with random low-degree polynomial components (as expressions)."""
    from .expr import ScalarField

    comps = []
    for _ in range(dim):
        f = ScalarField.const(float(rng.normal() * scale))
        for _ in range(terms):
            mono = ScalarField.const(float(rng.normal() * scale))
            for _ in range(int(rng.integers(1, degree + 1))):
                mono = mono * ScalarField.var(int(rng.integers(dim)))
            f = f + mono
        comps.append(f)
    return comps
