"""Kähler metrics on a chart: jets, Levi-Civita connection and curvature.

Index conventions used throughout the package:

* ``g[a, b]`` is the metric, ``Jmat`` acts on column vectors (``J_a^b = Jmat[b, a]``).
* ``Omega[a, b] = (Jmat.T @ g)[a, b]``.
* ``gamma[c, a, b]`` is ``Gamma^c_{ab}``.
* ``R[a, b, c, d]`` is ``R_{ab}{}^c{}_d`` with
  ``R_{ab}^c_d X^d = (nabla_a nabla_b - nabla_b nabla_a) X^c``.
* ``Ric[a, b] = R[c, a, c, b]`` and ``Rlow[a, b, c, d] = R[a, b, e, d] g[e, c]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .chart import Chart, complex_structure
from .errors import NotPositiveDefinite
from .expr import ScalarField, as_field
from .jets import jet_space
from .tensors import TensorValue

PD_TOL = 1e-12
VALIDATE_TOL = 1e-9


class MetricField:
    """A Kähler metric given by a potential, explicit components, or both (summed).

    ``potential`` yields ``g`` with ``g[u_i, u_j] = g[v_i, v_j] = Re h_ij`` and
    ``g[u_i, v_j] = -g[v_i, u_j] = Im h_ij`` where ``h_ij = d^2 K / dz_i dzbar_j``;
    ``|z|^2`` gives the identity.  ``components`` is a ``2n x 2n`` array of
    scalar fields added on top.
    """

    def __init__(self, chart: Chart, potential=None, components=None, scale=1.0, name="metric"):
        if potential is None and components is None:
            raise ValueError("a metric needs a potential or explicit components")
        if scale <= 0:
            raise ValueError("metric scale must be positive")
        self.chart = chart
        self.n = chart.n
        self.dim = chart.dim
        self.potential = None if potential is None else as_field(potential)
        if components is not None:
            comps = [[as_field(c) for c in row] for row in components]
            if len(comps) != self.dim or any(len(row) != self.dim for row in comps):
                raise ValueError(f"metric components must be {self.dim}x{self.dim}")
            components = comps
        self.components = components
        self.scale = float(scale)
        self.name = name
        self.jmat = complex_structure(self.n)

    def with_scale(self, c):
        return MetricField(self.chart, self.potential, self.components, self.scale * c, self.name)

    def with_chart(self, chart):
        return MetricField(chart, self.potential, self.components, self.scale, self.name)

    def plus_components(self, components):
        """Add explicit component fields (used to build negative controls)."""
        comps = [[as_field(c) for c in row] for row in components]
        if self.components is not None:
            comps = [[a + b for a, b in zip(r0, r1)] for r0, r1 in zip(self.components, comps)]
        return MetricField(self.chart, self.potential, comps, self.scale, self.name + "+components")

    def describe(self):
        out = {"name": self.name, "n": self.n, "scale": self.scale, "domain": self.chart.to_dict()}
        if self.potential is not None:
            out["potential"] = str(self.potential)
        if self.components is not None:
            out["components"] = [[str(c) for c in row] for row in self.components]
        return out

    # -- jets ---------------------------------------------------------------

    def jet(self, x, order):
        """Jets of ``g_ab`` at ``x``; shape ``(2n, 2n, N_order)``."""
        x = np.asarray(x, dtype=float)
        space = jet_space(self.dim, order)
        g = np.zeros((self.dim, self.dim, space.size))
        if self.potential is not None:
            g += potential_hessian_metric(self.potential.jet(x, order + 2), self.n, order + 2)
        if self.components is not None:
            memo_free = [[c.jet(x, order) for c in row] for row in self.components]
            g += np.array(memo_free)
        return g * self.scale

    def value(self, x):
        return self.jet(x, 0)[..., 0]

    def __call__(self, x):
        return self.value(x)


def potential_hessian_metric(pjet, n, order):
    """Assemble metric jets (order ``order - 2``) from a potential jet of order ``order``."""
    dim = 2 * n
    big = jet_space(dim, order)
    mid = jet_space(dim, order - 1)
    first = [big.diff(pjet, a) for a in range(dim)]
    hess = np.array([[mid.diff(first[a], b) for b in range(dim)] for a in range(dim)])
    g = np.empty_like(hess)
    for i in range(n):
        ui, vi = 2 * i, 2 * i + 1
        for j in range(n):
            uj, vj = 2 * j, 2 * j + 1
            re = 0.25 * (hess[ui, uj] + hess[vi, vj])
            im = 0.25 * (hess[ui, vj] - hess[vi, uj])
            g[ui, uj] = re
            g[vi, vj] = re
            g[ui, vj] = im
            g[vi, uj] = -im
    return g


def metric_from_potential(potential, chart: Chart, scale=1.0, name="potential"):
    """Kähler metric of a potential.  Positivity is checked by :func:`kahler_validate`."""
    return MetricField(chart, potential=potential, scale=scale, name=name)


def check_positive_definite(g, where=None):
    w = np.linalg.eigvalsh(0.5 * (g + g.T))
    if not (w[-1] > 0 and w[0] > PD_TOL * w[-1]):
        loc = "" if where is None else f" at {np.asarray(where).tolist()}"
        raise NotPositiveDefinite(f"metric is not positive definite{loc} (eigenvalues {w.min():.3g}..{w.max():.3g})")


# -- connection and curvature jets -------------------------------------------


def christoffel_jet(gjet, order):
    """``Gamma^c_ab`` jets of order ``order - 1`` from metric jets of order ``order``."""
    dim = gjet.shape[0]
    space = jet_space(dim, order)
    low = jet_space(dim, order - 1)
    ginv = low.inv(space.truncate(gjet, order - 1))
    dg = np.stack([space.diff(gjet, c) for c in range(dim)])  # dg[c, a, b] = d_c g_ab
    # lowered first kind: Gamma_{d,ab} = 1/2 (d_a g_db + d_b g_da - d_d g_ab)
    first = 0.5 * (
        np.transpose(dg, (1, 0, 2, 3))  # d_a g_db : dg[a, d, b] -> [d, a, b]
        + np.transpose(dg, (1, 2, 0, 3))  # d_b g_da : dg[b, d, a] -> [d, a, b]
        - dg  # d_d g_ab
    )
    return low.einsum("cd,dab->cab", ginv, first)


def riemann_jet(gamma, order):
    """``R_ab^c_d`` jets of order ``order - 1`` from ``Gamma`` jets of order ``order``."""
    dim = gamma.shape[0]
    space = jet_space(dim, order)
    low = jet_space(dim, order - 1)
    dgam = np.stack([space.diff(gamma, a) for a in range(dim)])  # dgam[a, c, b, d] = d_a Gamma^c_bd
    gl = space.truncate(gamma, order - 1)
    quad = low.einsum("cae,ebd->abcd", gl, gl)
    lin = np.transpose(dgam, (0, 2, 1, 3, 4))  # [a, b, c, d]
    return lin - np.transpose(lin, (1, 0, 2, 3, 4)) + quad - np.transpose(quad, (1, 0, 2, 3, 4))


@dataclass
class CurvatureBundle:
    point: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray
    riemann: np.ndarray
    riemann_low: np.ndarray
    ricci: np.ndarray
    omega: np.ndarray
    jmat: np.ndarray

    @property
    def n(self):
        return self.g.shape[0] // 2


def bundle_from_gamma_jet(gamma_jet, g, jmat, x):
    """Pointwise curvature data from an order-1 ``Gamma`` jet of any connection."""
    r = riemann_jet(gamma_jet, 1)[..., 0]
    return CurvatureBundle(
        point=np.asarray(x, dtype=float),
        g=g,
        ginv=np.linalg.inv(g),
        gamma=gamma_jet[..., 0],
        riemann=r,
        riemann_low=np.einsum("abed,ec->abcd", r, g),
        ricci=np.einsum("cacb->ab", r),
        omega=jmat.T @ g,
        jmat=jmat,
    )


def curvature_bundle(metric: MetricField, x, check=True):
    x = np.asarray(x, dtype=float)
    gj = metric.jet(x, 2)
    g0 = gj[..., 0]
    if check:
        check_positive_definite(g0, x)
    gamma = christoffel_jet(gj, 2)
    return bundle_from_gamma_jet(gamma, g0, metric.jmat, x)


def christoffel(metric: MetricField, x) -> TensorValue:
    x = np.asarray(x, dtype=float)
    gj = metric.jet(x, 1)
    check_positive_definite(gj[..., 0], x)
    return TensorValue("udd", christoffel_jet(gj, 1)[..., 0], x)


def christoffel_values(metric: MetricField, x):
    """Fast path for integrators: ``(g, Gamma)`` at ``x``."""
    gj = metric.jet(x, 1)
    return gj[..., 0], christoffel_jet(gj, 1)[..., 0]


def riemann(metric: MetricField, x) -> CurvatureBundle:
    return curvature_bundle(metric, x)


def metric_compatibility_residual(metric: MetricField, x):
    """``max |d_c g_ab - Gamma^e_ca g_eb - Gamma^e_cb g_ae|`` at ``x``."""
    gj = metric.jet(x, 1)
    space = jet_space(metric.dim, 1)
    gamma = christoffel_jet(gj, 1)[..., 0]
    g = gj[..., 0]
    dg = np.stack([space.diff(gj, c)[..., 0] for c in range(metric.dim)])
    res = dg - np.einsum("eca,eb->cab", gamma, g) - np.einsum("ecb,ae->cab", gamma, g)
    return float(np.abs(res).max())


def chsc_model(g, omega):
    return (
        np.einsum("ac,bd->abcd", g, g)
        - np.einsum("bc,ad->abcd", g, g)
        + np.einsum("ac,bd->abcd", omega, omega)
        - np.einsum("bc,ad->abcd", omega, omega)
        + 2.0 * np.einsum("ab,cd->abcd", omega, omega)
    ) / 4.0


def chsc_fit(metric: MetricField, x, bundle: Optional[CurvatureBundle] = None):
    """Least-squares holomorphic sectional curvature ``mu`` and relative residual."""
    b = bundle if bundle is not None else curvature_bundle(metric, x)
    model = chsc_model(b.g, b.omega)
    r = b.riemann_low
    rn = np.linalg.norm(r)
    scale = max(1.0, float(np.linalg.norm(b.g)) ** 2)
    if rn <= 1e-13 * scale:
        return 0.0, float(rn)
    mu = float(np.sum(r * model) / np.sum(model * model))
    return mu, float(np.linalg.norm(r - mu * model) / rn)


# -- validation ---------------------------------------------------------------


@dataclass
class ValidationReport:
    j_squared: float
    hermitian: float
    nabla_j: float
    d_omega: float
    positive_definite: bool
    samples: int
    tolerance: float = VALIDATE_TOL

    @property
    def passed(self):
        return self.positive_definite and max(self.residuals().values()) <= self.tolerance

    def residuals(self):
        return {
            "j_squared": self.j_squared,
            "hermitian": self.hermitian,
            "nabla_j": self.nabla_j,
            "d_omega": self.d_omega,
        }

    def to_dict(self):
        out = dict(self.residuals())
        out.update(positive_definite=self.positive_definite, samples=self.samples,
                   tolerance=self.tolerance, passed=self.passed)
        return out


def kahler_residuals(metric: MetricField, x):
    """Relative residuals ``(J^2+Id, Hermitian, nabla J, d Omega)`` and PD flag at ``x``."""
    jm = metric.jmat
    dim = metric.dim
    gj = metric.jet(x, 1)
    g = gj[..., 0]
    gnorm = float(np.linalg.norm(g))
    space = jet_space(dim, 1)
    try:
        check_positive_definite(g, x)
        pd = True
    except NotPositiveDefinite:
        pd = False
    j2 = float(np.abs(jm @ jm + np.eye(dim)).max())
    herm = float(np.abs(jm.T @ g @ jm - g).max()) / gnorm
    if pd:
        gamma = christoffel_jet(gj, 1)[..., 0]
        nj = np.einsum("bad,dc->abc", gamma, jm) - np.einsum("dac,bd->abc", gamma, jm)
        nabla_j = float(np.abs(nj).max())
    else:
        nabla_j = float("inf")
    dom = np.stack([jm.T @ space.diff(gj, c)[..., 0] for c in range(dim)])  # d_c Omega_ab
    # d_a Om_bc + d_b Om_ca + d_c Om_ab
    cyc = dom + np.transpose(dom, (2, 0, 1)) + np.transpose(dom, (1, 2, 0))
    d_omega = float(np.abs(cyc).max()) / gnorm
    return j2, herm, nabla_j, d_omega, pd


def kahler_validate(metric: MetricField, samples: Sequence, tol=VALIDATE_TOL) -> ValidationReport:
    vals = np.array([kahler_residuals(metric, x) for x in samples], dtype=float)
    return ValidationReport(
        j_squared=float(vals[:, 0].max()),
        hermitian=float(vals[:, 1].max()),
        nabla_j=float(vals[:, 2].max()),
        d_omega=float(vals[:, 3].max()),
        positive_definite=bool(vals[:, 4].all()),
        samples=len(samples),
        tolerance=tol,
    )


def flat_potential(n):
    from .expr import abs2

    return abs2(n)


def zero_field():
    return ScalarField.const(0.0)
