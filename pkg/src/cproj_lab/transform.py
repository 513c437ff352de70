"""Holomorphic maps, pullbacks, map classification and the action on solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import expit

from .chart import complex_structure
from .cproj import difference_tensor
from .errors import (
    DegenerateInput,
    DomainError,
    ExpressionResidualTooLarge,
    NotHolomorphic,
    OrbitExitsChart,
)
from .expr import ScalarField, as_field
from .fields import EndomorphismField
from .jets import jet_space
from .kahler import MetricField, check_positive_definite, christoffel_jet

HOLO_TOL = 1e-10
ISO_TOL = 1e-8
CPROJ_TOL = 1e-7
EXPRESSION_TOL = 1e-7
NON_AFFINE_WITNESS = 1e-3


# -- maps ----------------------------------------------------------------------


class MapSpec:
    """A chart-to-chart map with exact Taylor jets of its components."""

    dim: int

    def __call__(self, x):
        return self.jet(x, 0)[:, 0]

    def jet(self, x, order):
        raise NotImplementedError

    def jacobian(self, x):
        """``D[i, j] = d phi_i / d x_j``."""
        x = np.asarray(x, dtype=float)
        jets = self.jet(x, 1)
        space = jet_space(self.dim, 1)
        return np.array([[space.diff(jets[i], j)[0] for j in range(self.dim)] for i in range(self.dim)])

    def holomorphy_residual(self, x):
        d = self.jacobian(x)
        jm = complex_structure(self.dim // 2)
        return float(np.linalg.norm(d @ jm - jm @ d) / max(np.linalg.norm(d), 1e-300))

    def require_holomorphic(self, samples, tol=HOLO_TOL):
        worst = max(self.holomorphy_residual(x) for x in samples)
        if worst > tol:
            raise NotHolomorphic(f"Cauchy-Riemann residual {worst:.3g} exceeds {tol:g}")
        return worst


class ExpressionMap(MapSpec):
    def __init__(self, components, inverse: Optional["MapSpec"] = None):
        self.components = [as_field(c) for c in components]
        self.dim = len(self.components)
        if self.dim % 2:
            raise ValueError("a map needs an even number of real components")
        self._inverse = inverse

    def jet(self, x, order):
        x = np.asarray(x, dtype=float)
        return np.array([c.jet(x, order) for c in self.components])

    def inverse(self):
        if self._inverse is None:
            raise NotImplementedError("no inverse supplied for this expression map")
        return self._inverse

    def describe(self):
        return {"type": "expression", "components": [str(c) for c in self.components]}


def scaling_map(n, factor):
    xs = [ScalarField.var(i) for i in range(2 * n)]
    inv = ExpressionMap([x * (1.0 / factor) for x in xs])
    fwd = ExpressionMap([x * factor for x in xs], inverse=inv)
    inv._inverse = fwd
    return fwd


class PGLElement(MapSpec):
    """Projective linear map acting on the affine chart ``Z_0 = 1``: ``z -> (M Z)_i / (M Z)_0``."""

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise DegenerateInput("PGLElement needs a square matrix of size n+1 >= 2")
        size = m.shape[0]
        scale = np.linalg.norm(m)
        if scale == 0 or abs(np.linalg.det(m / scale)) < 1e-12:
            raise DegenerateInput("PGLElement singular")
        self.matrix = m
        self.n = size - 1
        self.dim = 2 * self.n
        self._build()

    @classmethod
    def from_pairs(cls, pairs):
        arr = np.asarray(pairs, dtype=float)
        k = int(round(np.sqrt(arr.shape[0])))
        if arr.ndim != 2 or arr.shape[1] != 2 or k * k != arr.shape[0]:
            raise DegenerateInput("PGLElement input must be (n+1)^2 pairs [re, im]")
        return cls((arr[:, 0] + 1j * arr[:, 1]).reshape(k, k))

    def to_pairs(self):
        return [[float(z.real), float(z.imag)] for z in self.matrix.ravel()]

    def describe(self):
        return {"type": "pgl", "matrix": self.to_pairs()}

    def _build(self):
        m = self.matrix
        xs = [ScalarField.var(i) for i in range(self.dim)]
        re, im = [], []
        for k in range(self.n + 1):
            r = ScalarField.const(m[k, 0].real)
            i = ScalarField.const(m[k, 0].imag)
            for j in range(self.n):
                u, v = xs[2 * j], xs[2 * j + 1]
                a, b = m[k, j + 1].real, m[k, j + 1].imag
                if a != 0.0:
                    r = r + a * u
                    i = i + a * v
                if b != 0.0:
                    r = r - b * v
                    i = i + b * u
            re.append(r)
            im.append(i)
        den = re[0] * re[0] + im[0] * im[0]
        self._den = den
        self._num = (re[0], im[0])
        comps = []
        for k in range(1, self.n + 1):
            comps.append((re[k] * re[0] + im[k] * im[0]) / den)
            comps.append((im[k] * re[0] - re[k] * im[0]) / den)
        self.components = comps

    def homogeneous(self, x):
        x = np.asarray(x, dtype=float)
        z = np.concatenate([[1.0 + 0j], x[0::2] + 1j * x[1::2]])
        return self.matrix @ z

    def __call__(self, x):
        w = self.homogeneous(x)
        if abs(w[0]) <= 1e-12 * np.linalg.norm(w):
            raise DomainError("point is mapped to the hyperplane at infinity")
        q = w[1:] / w[0]
        out = np.empty(self.dim)
        out[0::2] = q.real
        out[1::2] = q.imag
        return out

    def jet(self, x, order):
        x = np.asarray(x, dtype=float)
        w = self.homogeneous(x)
        if abs(w[0]) <= 1e-12 * np.linalg.norm(w):
            raise DomainError("point is mapped to the hyperplane at infinity")
        return np.array([c.jet(x, order) for c in self.components])

    def inverse(self):
        return PGLElement(np.linalg.inv(self.matrix))

    def compose(self, other):
        """``self o other``."""
        return PGLElement(self.matrix @ other.matrix)

    def power(self, k):
        if k >= 0:
            return PGLElement(np.linalg.matrix_power(self.matrix, k))
        return PGLElement(np.linalg.matrix_power(np.linalg.inv(self.matrix), -k))

    __matmul__ = compose


def identity_pgl(n):
    return PGLElement(np.eye(n + 1))


def pgl_pullback_potential(matrix, scale=1.0):
    """Potential ``scale * log(Z^* H Z)`` with ``H = M^* M`` (pullback of the FS potential)."""
    m = np.asarray(matrix, dtype=complex)
    h = m.conj().T @ m
    return hermitian_form_potential(h, scale)


def hermitian_form_potential(h, scale=1.0):
    h = np.asarray(h, dtype=complex)
    size = h.shape[0]
    n = size - 1
    xs = [ScalarField.const(1.0)] + [ScalarField.var(i) for i in range(2 * n)]
    re = [xs[0]] + [xs[1 + 2 * j] for j in range(n)]
    im = [None] + [xs[2 + 2 * j] for j in range(n)]
    total = None

    def add(t):
        nonlocal total
        total = t if total is None else total + t

    for i in range(size):
        for j in range(size):
            a, b = h[i, j].real, h[i, j].imag
            # Re(conj(Z_i) H_ij Z_j) = a (x_i x_j + y_i y_j) - b (x_i y_j - y_i x_j)
            if a != 0.0:
                add(a * (re[i] * re[j]))
                if im[i] is not None and im[j] is not None:
                    add(a * (im[i] * im[j]))
            if b != 0.0:
                if im[j] is not None:
                    add((-b) * (re[i] * im[j]))
                if im[i] is not None:
                    add(b * (im[i] * re[j]))
    return scale * ScalarField("log", (total,))


# -- pullbacks -----------------------------------------------------------------


class PullbackMetric(MetricField):
    """``phi^* g`` evaluated through composed jets."""

    def __init__(self, phi: MapSpec, metric: MetricField, chart=None, name=None):
        self.phi = phi
        self.base = metric
        self.chart = metric.chart if chart is None else chart
        self.n = metric.n
        self.dim = metric.dim
        self.potential = None
        self.components = None
        self.scale = 1.0
        self.name = name or f"pullback({metric.name})"
        self.jmat = metric.jmat

    def jet(self, x, order):
        x = np.asarray(x, dtype=float)
        space = jet_space(self.dim, order)
        pj = self.phi.jet(x, order + 1)
        y = pj[:, 0].copy()
        if not self.base.chart.contains(y):
            raise DomainError(f"image point {y.tolist()} lies outside the target chart")
        gy = self.base.jet(y, order)
        offs = space.truncate(pj, order).copy()
        offs[:, 0] = 0.0
        g_phi = space.compose(gy, offs)
        big = jet_space(self.dim, order + 1)
        dphi = np.array([[big.diff(pj[i], j) for j in range(self.dim)] for i in range(self.dim)])
        tmp = space.einsum("ij,jk->ik", g_phi, dphi)
        return space.einsum("ia,ik->ak", dphi, tmp)

    def describe(self):
        out = {"name": self.name, "pullback_of": self.base.describe()}
        if hasattr(self.phi, "describe"):
            out["map"] = self.phi.describe()
        return out


def pullback_metric(phi: MapSpec, metric: MetricField, x):
    from .tensors import TensorValue

    x = np.asarray(x, dtype=float)
    y = phi(x)
    if not metric.chart.contains(y):
        raise DomainError(f"image point {y.tolist()} lies outside the target chart")
    d = phi.jacobian(x)
    return TensorValue("dd", d.T @ metric.value(y) @ d, x)


@dataclass
class MetrisabilityDensity:
    """``eta^{ab}`` at a point (weight folded in relative to coordinate volume)."""

    eta: np.ndarray
    point: np.ndarray


def density_from_solution(m, g):
    """``eta = vol(g)^{1/(n+1)} A g^{-1}`` with ``M[b, a] = A_a^b``."""
    n = g.shape[0] // 2
    vol = np.sqrt(np.linalg.det(g))
    return vol ** (1.0 / (n + 1)) * m @ np.linalg.inv(g)


def solution_from_density(eta, g):
    n = g.shape[0] // 2
    vol = np.sqrt(np.linalg.det(g))
    return vol ** (-1.0 / (n + 1)) * eta @ g


def pullback_density(phi: MapSpec, eta_at, x):
    """``(phi^* eta)(x) = det(D)^{1/(n+1)} D^{-1} eta(phi(x)) D^{-T}`` with ``D = D phi(x)``.

    ``eta_at`` is a callable returning the density matrix at a point.
    """
    x = np.asarray(x, dtype=float)
    d = phi.jacobian(x)
    n = d.shape[0] // 2
    det = np.linalg.det(d)
    if det <= 0:
        raise DomainError("Jacobian determinant is not positive")
    dinv = np.linalg.inv(d)
    return MetrisabilityDensity(det ** (1.0 / (n + 1)) * dinv @ eta_at(phi(x)) @ dinv.T, x)


class PulledBackSolution(EndomorphismField):
    """``(phi^{-1})^* A`` as an endomorphism field for ``g`` (via densities).

    ``inverse_map`` is ``psi = phi^{-1}``; jets are computed by composition.
    """

    def __init__(self, field_: EndomorphismField, inverse_map: MapSpec):
        self.source = field_
        self.psi = inverse_map
        self.metric = field_.metric

    def jet(self, x, order):
        x = np.asarray(x, dtype=float)
        metric = self.metric
        dim, n = metric.dim, metric.n
        space = jet_space(dim, order)
        big = jet_space(dim, order + 1)
        pj = self.psi.jet(x, order + 1)
        y = pj[:, 0].copy()
        if not metric.chart.contains(y):
            raise OrbitExitsChart(f"image point {y.tolist()} leaves the chart")
        if self.source.radius is not None and not self.source.in_validity(y):
            raise OrbitExitsChart(f"image point {y.tolist()} leaves the solution's validity radius")
        offs = space.truncate(pj, order).copy()
        offs[:, 0] = 0.0
        gy = metric.jet(y, order)
        my = self.source.jet(y, order)
        e_y = space.matmul(my, space.inv(gy))
        w = 1.0 / (2 * (n + 1))
        e_y = space.mul(e_y, np.broadcast_to(space.power(space.det(gy), w), e_y.shape))
        e_x = space.compose(e_y, offs)  # E(psi(x)) as jets in x
        dpsi = np.array([[big.diff(pj[i], j) for j in range(dim)] for i in range(dim)])
        dinv = space.inv(dpsi)
        ddet = space.det(dpsi)
        if ddet[0] <= 0:
            raise DomainError("Jacobian determinant is not positive")
        e_new = space.einsum("ij,jk->ik", dinv, space.einsum("ij,kj->ik", e_x, dinv))
        e_new = space.mul(e_new, np.broadcast_to(space.power(ddet, 1.0 / (n + 1)), e_new.shape))
        gx = metric.jet(x, order)
        out = space.matmul(e_new, gx)
        return space.mul(out, np.broadcast_to(space.power(space.det(gx), -w), out.shape))


# -- classification ---------------------------------------------------------------


@dataclass
class ClassificationResult:
    verdict: str
    homothety_constant: Optional[float]
    residuals: dict
    upsilon: List[list] = field(default_factory=list)

    def to_dict(self):
        return {"verdict": self.verdict, "homothety_constant": self.homothety_constant,
                "residuals": self.residuals, "upsilon": self.upsilon}


def _upsilon_fit(dgamma, jm):
    dim = jm.shape[0]
    cols = np.array([difference_tensor(np.eye(dim)[k], jm).ravel() for k in range(dim)]).T
    target = dgamma.ravel()
    ups, *_ = np.linalg.lstsq(cols, target, rcond=None)
    tn = float(np.linalg.norm(target))
    resid = float(np.linalg.norm(cols @ ups - target)) / tn if tn > 1e-14 else 0.0
    return ups, resid


def _gammas(metric, other, x):
    g = metric.jet(x, 1)
    h = other.jet(x, 1)
    check_positive_definite(h[..., 0], x)
    return christoffel_jet(g, 1)[..., 0], christoffel_jet(h, 1)[..., 0], g[..., 0], h[..., 0]


def classify_map(phi: MapSpec, metric: MetricField, samples: Sequence, continuity_step=1e-4) -> ClassificationResult:
    """Strongest of isometry / homothety / affine / c-projective supported by the samples."""
    samples = [np.asarray(s, dtype=float) for s in samples]
    phi_ = phi
    phi_.require_holomorphic(samples)
    pb = PullbackMetric(phi_, metric)
    iso, cs, christ, cp_res, cont = 0.0, [], 0.0, 0.0, 0.0
    ups_list = []
    jm = metric.jmat
    for x in samples:
        gam, gam_pb, g, h = _gammas(metric, pb, x)
        iso = max(iso, float(np.linalg.norm(h - g) / np.linalg.norm(g)))
        cs.append(float(np.sum(h * g) / np.sum(g * g)))
        gscale = max(float(np.linalg.norm(gam)), float(np.linalg.norm(gam_pb)))
        diff = gam_pb - gam
        christ = max(christ, float(np.linalg.norm(diff)) / gscale if gscale > 1e-14 else 0.0)
        ups, res = _upsilon_fit(diff, jm)
        cp_res = max(cp_res, res)
        ups_list.append(ups.tolist())
        # continuity proxy: the fitted one-form moves by O(step) under a small displacement
        d = np.ones(len(x)) / np.sqrt(len(x))
        xn = x + continuity_step * d
        gam2, gam_pb2, _, _ = _gammas(metric, pb, xn)
        ups2, _ = _upsilon_fit(gam_pb2 - gam2, jm)
        jump = float(np.linalg.norm(ups2 - ups)) / (continuity_step * max(1.0, float(np.linalg.norm(ups))))
        cont = max(cont, jump)
    c = float(np.mean(cs))
    spread = float(np.ptp(cs) / abs(c)) if c != 0 else float("inf")
    homo = 0.0
    for x in samples:
        homo = max(homo, float(np.linalg.norm(pb.value(x) - c * metric.value(x)) / (abs(c) * np.linalg.norm(metric.value(x)))))
    residuals = {
        "isometry": iso,
        "homothety_spread": spread,
        "homothety": homo,
        "affine": christ,
        "cprojective": cp_res,
        "upsilon_lipschitz": cont,
    }
    if iso <= ISO_TOL:
        verdict, const = "isometry", 1.0
    elif spread <= ISO_TOL and homo <= ISO_TOL:
        verdict, const = "homothety", c
    elif christ <= ISO_TOL:
        verdict, const = "affine", None
    elif cp_res <= CPROJ_TOL and cont <= 1e3:
        verdict, const = "c-projective", None
    else:
        verdict, const = "none", None
    return ClassificationResult(verdict, const, residuals, ups_list)


def is_non_affine(result: ClassificationResult):
    return result.residuals["affine"] > NON_AFFINE_WITNESS


# -- representation on solutions ------------------------------------------------------


@dataclass
class TPhiMatrix:
    matrix: np.ndarray
    residual: float

    @property
    def det(self):
        return float(np.linalg.det(self.matrix))

    @property
    def eigenvalues(self):
        return np.linalg.eigvals(self.matrix)

    def to_dict(self):
        ev = self.eigenvalues
        return {"matrix": self.matrix.tolist(), "residual": self.residual, "det": self.det,
                "eigenvalues": [[float(e.real), float(e.imag)] for e in ev]}


def _stack_values(fields, points):
    return np.array([np.concatenate([f.value(p).ravel() for p in points]) for f in fields]).T


def t_phi(phi: MapSpec, basis: Sequence[EndomorphismField], points: Sequence, tol=EXPRESSION_TOL) -> TPhiMatrix:
    """Matrix of ``eta -> (phi^{-1})^* eta`` in the basis, fitted on the given points."""
    points = [np.asarray(p, dtype=float) for p in points]
    psi = phi.inverse()
    chart = basis[0].metric.chart
    for p in points:
        y = psi(p)
        if not chart.contains(y):
            raise OrbitExitsChart(f"phi^-1 maps {p.tolist()} outside the chart")
    base = _stack_values(basis, points)
    pulled = _stack_values([PulledBackSolution(b, psi) for b in basis], points)
    coef, *_ = np.linalg.lstsq(base, pulled, rcond=None)
    resid = float(np.linalg.norm(base @ coef - pulled) / max(np.linalg.norm(pulled), 1e-300))
    if resid > tol:
        raise ExpressionResidualTooLarge(f"pulled-back basis not expressible (residual {resid:.3g})")
    return TPhiMatrix(coef, resid)


def coordinates(field_: EndomorphismField, basis: Sequence[EndomorphismField], points):
    base = _stack_values(basis, points)
    target = _stack_values([field_], points)[:, 0]
    coef, *_ = np.linalg.lstsq(base, target, rcond=None)
    resid = float(np.linalg.norm(base @ coef - target) / max(np.linalg.norm(target), 1e-300))
    return coef, resid


def tphi_spectral_report(t, sol_dimension=None, non_affine=None):
    """Determinant sign, eigenvalues and the two-dimensional witness flags."""
    mat = t.matrix if isinstance(t, TPhiMatrix) else np.asarray(t, dtype=float)
    ev, vec = np.linalg.eig(mat)
    order = np.argsort(-ev.real)
    ev = ev[order]
    cond = float(np.linalg.cond(vec))
    report = {
        "det": float(np.linalg.det(mat)),
        "det_sign": int(np.sign(np.linalg.det(mat))),
        "eigenvalues": [[float(e.real), float(e.imag)] for e in ev],
        "diagonalizable": bool(cond < 1e8),
        "dimension": int(mat.shape[0]),
    }
    real_pos = bool(np.all(np.abs(ev.imag) < 1e-9) and np.all(ev.real > 0))
    distinct = bool(len(ev) == 2 and abs(ev[0] - ev[1]) > 1e-9 * max(1.0, abs(ev[0])))
    report["distinct_positive_eigenvalues"] = real_pos and distinct
    gated = sol_dimension == 2 and mat.shape[0] == 2 and bool(non_affine)
    report["witness_applicable"] = gated
    if gated:
        # positive determinant forces two distinct positive eigenvalues; otherwise det < 0
        report["consistent"] = (report["det"] < 0) or report["distinct_positive_eigenvalues"]
    return report


def pullback_eigen_dynamics(d, alpha, beta, k):
    """``alpha^k d / (alpha^k d + beta^k (1 - d))``."""
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    if not (0.0 <= d <= 1.0):
        raise ValueError("d must lie in [0, 1]")
    if d == 0.0 or d == 1.0 or k == 0:
        return float(d)
    # logistic form in log space stays finite for large |k|
    s = k * (math.log(alpha) - math.log(beta)) + math.log(d) - math.log1p(-d)
    return float(expit(s))


# -- invariant subspace and G(k) -------------------------------------------------------


@dataclass
class EigenPair:
    """Split of ``Id = D + D~`` along two ``T_phi`` eigenvalues ``alpha > beta``."""

    alpha: float
    beta: float
    d_coords: np.ndarray
    dt_coords: np.ndarray
    basis: list

    def d_field(self):
        from .fields import Combination

        return Combination(self.basis, self.d_coords)

    def dt_field(self):
        from .fields import Combination

        return Combination(self.basis, self.dt_coords)


def eigen_split(t: TPhiMatrix, id_coords, basis, tol=1e-8):
    """Decompose the identity's coordinates into ``T_phi`` eigen-components."""
    ev, vec = np.linalg.eig(t.matrix)
    comps = np.linalg.solve(vec, id_coords.astype(complex))
    groups = {}
    for k, e in enumerate(ev):
        key = None
        for g in groups:
            if abs(g - e) <= 1e-6 * max(1.0, abs(e)):
                key = g
                break
        groups.setdefault(e if key is None else key, []).append(k)
    parts = []
    for e, idx in groups.items():
        v = (vec[:, idx] @ comps[idx])
        if np.linalg.norm(v) > tol * np.linalg.norm(id_coords):
            parts.append((e, v))
    if len(parts) != 2:
        raise ValueError(f"identity splits into {len(parts)} eigen-components, expected 2")
    parts.sort(key=lambda p: -p[0].real)
    (a, va), (b, vb) = parts
    if abs(a.imag) > 1e-9 or abs(b.imag) > 1e-9 or not (a.real > b.real > 0):
        raise ValueError("eigenvalues of the split are not real with alpha > beta > 0")
    return EigenPair(float(a.real), float(b.real), va.real, vb.real, list(basis))


def g_k_eigenvalues(phi: PGLElement, metric: MetricField, x0, k):
    """Eigenvalues (ascending) of ``G(k) = g^{-1} (phi^{-k})^* g`` at ``x0``."""
    psi = phi.power(-k)
    y = psi(x0)
    if not metric.chart.contains(y):
        raise OrbitExitsChart(f"phi^-{k} maps x0 outside the chart")
    pb = pullback_metric(psi, metric, x0).components
    g = metric.value(x0)
    return np.sort(np.linalg.eigvals(np.linalg.solve(g, pb)).real)


def table_exponents(n, m, m_tilde, alpha, beta, positive=True):
    """Log-slopes (per unit ``k``) of the eigenvalue families of ``G(k)``.

    Families are present only when their block is: ``nu_i`` always (one rho
    block), ``nu`` when ``m >= 1`` and ``nu_tilde`` when ``m_tilde >= 1``.
    """
    la, lb = np.log(alpha), np.log(beta)
    if positive:
        rows = {
            "nu_i": -(n - m_tilde + 1) * la - m_tilde * lb,
            "nu": -(n - m_tilde + 1) * la - m_tilde * lb,
            "nu_tilde": -(n - m_tilde) * la - (m_tilde + 1) * lb,
        }
    else:
        rows = {
            "nu_i": -m * la - (n - m + 1) * lb,
            "nu": -(m + 1) * la - (n - m) * lb,
            "nu_tilde": -m * la - (n - m + 1) * lb,
        }
    mult = {"nu_i": 2 * (n - m - m_tilde), "nu": 2 * m, "nu_tilde": 2 * m_tilde}
    return {k: (float(v), mult[k]) for k, v in rows.items() if mult[k] > 0}


def fit_log_slopes(ks, values):
    """Least-squares slope of ``log(values[:, j])`` against ``k`` per column."""
    ks = np.asarray(ks, dtype=float)
    logs = np.log(np.asarray(values, dtype=float))
    design = np.column_stack([ks, np.ones_like(ks)])
    coef, *_ = np.linalg.lstsq(design, logs, rcond=None)
    return coef[0]


def g_k_from_solution(phi: PGLElement, metric: MetricField, x0, k):
    """``G(k) = det_R(A(k))^{-1/2} A(k)^{-1}`` with ``A(k)`` from ``(phi^{-k})^* eta_g``."""
    from .fields import IdentityField

    a = PulledBackSolution(IdentityField(metric), phi.power(-k)).value(x0)
    return np.linalg.det(a) ** -0.5 * np.linalg.inv(a)


def gk_asymptotics_check(phi: PGLElement, metric: MetricField, x0, alpha, beta, m, m_tilde,
                         k_range=range(3, 9), tol=0.05):
    """Fit log-slopes of the eigenvalues of ``G(k)`` and compare with the table."""
    ks = list(k_range)
    positive = ks[0] >= 0
    vals = np.array([g_k_eigenvalues(phi, metric, x0, k) for k in ks])
    slopes = np.sort(fit_log_slopes(ks, vals))
    n = metric.n
    table = table_exponents(n, m, m_tilde, alpha, beta, positive)
    expected = np.sort(np.concatenate([[v] * mult for v, mult in table.values()]))
    fitted_min = float(slopes[0])
    expected_min = float(expected[0])
    rel = abs(fitted_min - expected_min) / abs(expected_min) if expected_min != 0 else abs(fitted_min)
    unit = abs(np.log(alpha / beta))
    families = float(np.max(np.abs(slopes - expected) / np.maximum(np.abs(expected), unit)))
    # the two routes to G(k) agree (metric pullback versus the solution dictionary)
    g0 = metric.value(x0)
    route = 0.0
    for k in (ks[0], ks[-1]):
        direct = np.linalg.solve(g0, pullback_metric(phi.power(-k), metric, x0).components)
        via = g_k_from_solution(phi, metric, x0, k)
        route = max(route, float(np.linalg.norm(direct - via) / np.linalg.norm(direct)))
    return {
        "k": ks,
        "eigenvalues": vals.tolist(),
        "slopes": [float(s) for s in slopes],
        "table": {k: v for k, (v, _) in table.items()},
        "fitted_smallest": fitted_min,
        "expected_smallest": expected_min,
        "relative_error": float(rel),
        "families_error": families,
        "route_discrepancy": route,
        "tolerance": tol,
        "passed": bool(rel <= tol),
    }


# -- bases ---------------------------------------------------------------------------------


def hermitian_pair_basis(metric: MetricField, rng, count=None):
    """Closed-form solutions from pullbacks of the FS potential by random ``M``.

    Each ``H = M^* M + I/2`` gives the metric of ``log(Z^* H Z)``, c-projectively
    equivalent to FS; ``count`` defaults to ``(n+1)^2``.
    """
    from .fields import PairSolution

    n = metric.n
    count = (n + 1) ** 2 if count is None else count
    out = []
    for _ in range(count):
        a = rng.normal(size=(n + 1, n + 1)) + 1j * rng.normal(size=(n + 1, n + 1))
        h = a.conj().T @ a + 0.5 * np.eye(n + 1)
        other = MetricField(metric.chart, potential=hermitian_form_potential(h), name="pair")
        out.append(PairSolution(metric, other))
    return out


def orthonormalize_basis(basis, points):
    """Combinations of ``basis`` orthonormal for the sampled-value inner product."""
    from .fields import Combination

    vals = _stack_values(basis, points)
    _, r = np.linalg.qr(vals)
    rinv = np.linalg.inv(r)
    return [Combination(basis, rinv[:, j]) for j in range(len(basis))]


def constant_pattern(d_field, x0, tol=1e-7):
    """``(rho, m, m_tilde, mask)`` for the split field at ``x0``; ``mask`` flags the 0/1 eigenvalues."""
    from .mobility import spectrum

    w = spectrum(d_field, x0)[0]
    ones = np.abs(w - 1.0) < tol
    zeros = np.abs(w) < tol
    mask = ones | zeros
    if (~mask).sum() == 0:
        raise ValueError("split field has no non-constant eigenvalue at x0")
    return float(np.mean(w[~mask])), int(ones.sum()) // 2, int(zeros.sum()) // 2, mask


def orbit_dynamics_check(phi: PGLElement, split: EigenPair, x0, ks=range(9)):
    """Compare the tracked eigenvalue along ``phi^{-k}(x0)`` with :func:`pullback_eigen_dynamics`."""
    from .mobility import spectrum

    d = split.d_field()
    rho0, m, mt, mask = constant_pattern(d, x0)
    rows = []
    for k in ks:
        w = spectrum(d, phi.power(-k)(x0))[0]
        direct = float(np.mean(w[~mask]))
        formula = pullback_eigen_dynamics(rho0, split.alpha, split.beta, k)
        rows.append({"k": int(k), "direct": direct, "formula": formula})
    err = max(abs(r["direct"] - r["formula"]) for r in rows)
    return {"rho0": rho0, "m": m, "m_tilde": mt, "rows": rows, "max_error": float(err)}
