"""The mobility equation: residuals, jet-rank solver and spectral analysis."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import eigh, subspace_angles

from .errors import (
    ClusterAmbiguity,
    DegenerateInput,
    HermitianViolation,
    IllConditioned,
    NoStabilization,
    NotPropertyP,
    SingularSolution,
)
from .fields import (
    Combination,
    EndomorphismField,
    IdentityField,
    JetSolution,
    PairSolution,
    complex_form,
    hermitian_basis,
    hermitian_residual,
)
from .jets import jet_space
from .kahler import MetricField, check_positive_definite, christoffel_jet
from .rank import rank_from_singular_values
from .tensors import TensorValue

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-9
RANK_TOL = 1e-9
K_MAX_DEFAULT = 5
RESIDUAL_TARGET = 1e-9
CONST_TOL = 1e-10
NONCONST_TOL = 1e-6
CLUSTER_GAP = 1e-8
REFINE_UNKNOWNS = 1000
REFINE_MAX_ORDER = 6


# -- pointwise residual --------------------------------------------------------


@dataclass
class LocalData:
    """Jets of ``A`` and the metric at a point, with derived ``Lambda`` data."""

    x: np.ndarray
    m: np.ndarray  # A at x
    dm: np.ndarray  # dm[a, b, c] = d_a M[b, c]
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray
    lam_low: np.ndarray  # Lambda_a = d_a lambda
    lam: np.ndarray  # Lambda^a
    jmat: np.ndarray
    nabla_lam: Optional[np.ndarray] = None  # nabla_a Lambda^b stored as [b, a]

    @property
    def omega(self):
        return self.jmat.T @ self.g


def local_data(field_: EndomorphismField, x, second=False) -> LocalData:
    metric = field_.metric
    x = np.asarray(x, dtype=float)
    order = 2 if second else 1
    space = jet_space(metric.dim, order)
    mj = field_.jet(x, order)
    gj = metric.jet(x, order)
    gam_jet = christoffel_jet(gj, order)
    g = gj[..., 0]
    ginv = np.linalg.inv(g)
    lam_jet = 0.5 * np.trace(mj, axis1=0, axis2=1)
    lam_low = np.array([space.diff(lam_jet, a)[0] for a in range(metric.dim)])
    dm = np.stack([space.diff(mj, a)[..., 0] for a in range(metric.dim)])
    data = LocalData(x, mj[..., 0], dm, g, ginv, gam_jet[..., 0], lam_low, ginv @ lam_low, metric.jmat)
    if second:
        low = jet_space(metric.dim, 1)
        gl = np.asarray(low.inv(space.truncate(gj, 1)))
        lam_low_jet = np.array([space.diff(lam_jet, a) for a in range(metric.dim)])  # order 1
        lam_up_jet = low.einsum("ab,b->a", gl, lam_low_jet)
        d_lam = np.stack([low.diff(lam_up_jet, a)[..., 0] for a in range(metric.dim)], axis=1)
        # nabla_a Lambda^b = d_a Lambda^b + Gamma^b_ae Lambda^e, stored [b, a]
        data.nabla_lam = d_lam + np.einsum("bae,e->ba", data.gamma, data.lam)
    return data


def covariant_derivative(data: LocalData):
    """``nabla_a A_b^c`` as an array ``[a, b, c]``."""
    dm = data.dm  # [a, c, b] since M[c, b] = A_b^c
    t = np.transpose(dm, (0, 2, 1))
    t = t + np.einsum("cae,eb->abc", data.gamma, data.m) - np.einsum("eab,ce->abc", data.gamma, data.m)
    return t


def mobility_rhs(data: LocalData):
    g, lam_up, lam_low, jm, om = data.g, data.lam, data.lam_low, data.jmat, data.omega
    eye = np.eye(len(g))
    jlam = jm @ lam_up  # J_d^c Lambda^d
    lam_om = om.T @ lam_up  # Lambda^d Omega_db
    return 0.5 * (
        np.einsum("ab,c->abc", g, lam_up)
        + np.einsum("ac,b->abc", eye, lam_low)
        + np.einsum("ab,c->abc", om, jlam)
        + np.einsum("ca,b->abc", jm, lam_om)
    )


def mobility_residual(field_: EndomorphismField, metric: Optional[MetricField] = None, x=None) -> TensorValue:
    """``nabla_a A_b^c - RHS`` at ``x``; slots ``(a, b, c)`` with signature ``ddu``."""
    if x is None:
        x, metric = metric, None
    if metric is not None and metric is not field_.metric:
        raise ValueError("field and metric disagree")
    data = local_data(field_, x)
    check_positive_definite(data.g, x)
    herm = hermitian_residual(data.m, data.g, data.jmat)
    if herm > HERMITIAN_TOL:
        raise HermitianViolation(f"A is not Hermitian at {np.asarray(x).tolist()} (residual {herm:.3g})")
    return TensorValue("ddu", covariant_derivative(data) - mobility_rhs(data), np.asarray(x, dtype=float))


def relative_residual(field_: EndomorphismField, x):
    res = mobility_residual(field_, x=x)
    scale = max(float(np.linalg.norm(field_.value(x))), 1e-300)
    return res.norm() / scale


def lambda_two_ways(field_: EndomorphismField, x):
    """``Lambda^b`` from ``grad(tr A / 2)`` and from ``(1/n) nabla_a A_c^a g^{cb}``."""
    data = local_data(field_, x)
    nab = covariant_derivative(data)  # [a, b, c] = nabla_a A_b^c
    n = data.g.shape[0] // 2
    div = np.einsum("aca->c", nab)
    return data.lam, (data.ginv @ div) / n


# -- jet-rank solver ------------------------------------------------------------


@dataclass
class OrderStat:
    order: int
    unknowns: int
    equations: int
    kernel: int
    gap: float
    rank: int


@dataclass
class SolutionBasis:
    solutions: List[JetSolution]
    base_point: np.ndarray
    order: int
    gram: np.ndarray

    def __len__(self):
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def coordinates(self, h_coeffs):
        """Least-squares coordinates of a coefficient array in this basis."""
        mat = np.array([s.h_coeffs.ravel() for s in self.solutions]).T
        coef, *_ = np.linalg.lstsq(mat, np.asarray(h_coeffs).ravel(), rcond=None)
        resid = np.linalg.norm(mat @ coef - np.asarray(h_coeffs).ravel())
        return coef, float(resid / max(np.linalg.norm(h_coeffs), 1e-300))

    def generic(self, rng):
        """A random combination of the basis (generic element of the span)."""
        coeffs = rng.normal(size=len(self.solutions))
        return Combination(self.solutions, coeffs / np.linalg.norm(coeffs))

    def to_dict(self):
        return {
            "base_point": self.base_point.tolist(),
            "order": self.order,
            "dimension": len(self.solutions),
            "solutions": [s.to_dict() for s in self.solutions],
        }


@dataclass
class MobilityResult:
    degree: int
    basis: SolutionBasis
    stats: List[OrderStat] = field(default_factory=list)
    stabilized_at: int = 0

    def diagnostics(self):
        return {
            "degree": self.degree,
            "stabilized_at": self.stabilized_at,
            "orders": [s.__dict__ for s in self.stats],
        }


class MobilitySystem:
    """Linear system on the Taylor coefficients of ``h = g A`` at ``x0``.

    Unknown ``(s, mu)`` stands for the field ``E_s (x - x0)^mu`` where ``E_s``
    runs over a basis of Hermitian forms; rows are the Taylor coefficients
    (degree ``<= K - 1``) of the lowered residual ``nabla_a h_bc - RHS_abc``
    for ``b <= c``.
    """

    def __init__(self, metric: MetricField, x0, order, scale=1.0):
        self.metric = metric
        self.x0 = np.asarray(x0, dtype=float)
        self.order = order
        self.scale = scale
        dim = metric.dim
        self.dim = dim
        self.basis = hermitian_basis(metric.n)
        self.space = jet_space(dim, order)
        self.low = jet_space(dim, order - 1)
        gj = metric.jet(self.x0, order)
        self.gj = gj
        ginv = self.space.inv(gj)
        self.gamma = christoffel_jet(gj, order)  # order K-1
        self.pairs = [(b, c) for b in range(dim) for c in range(b, dim)]
        self._build(ginv)

    def _lin(self, w, glow, ginv_low, om_low):
        """Lowered RHS operator ``L(w)[a, b, c]`` for a one-form jet ``w[c, N]``."""
        low = self.low
        wup = low.einsum("ab,b->a", ginv_low, w)
        lw = low.einsum("da,d->a", om_low, wup)  # Lambda^d Omega_da
        t = low.einsum("ab,c->abc", glow, w)
        t = t + np.swapaxes(t, 1, 2)
        u = low.einsum("ab,c->abc", om_low, lw)
        u = u + np.swapaxes(u, 1, 2)
        return 0.5 * (t + u)

    def _build(self, ginv):
        space, low, dim = self.space, self.low, self.dim
        jm = self.metric.jmat
        glow = space.truncate(self.gj, self.order - 1)
        ginv_low = space.truncate(ginv, self.order - 1)
        om_low = np.einsum("ca,cbz->abz", jm, glow)
        bi = np.array([p[0] for p in self.pairs])
        ci = np.array([p[1] for p in self.pairs])
        p_blocks, q_blocks = [], []
        for e in self.basis:
            ell = 0.5 * np.einsum("ab,baz->z", e, ginv)  # order K
            dell = np.array([space.diff(ell, a) for a in range(dim)])  # order K-1
            ge = np.einsum("eabz,ec->abcz", self.gamma, e)  # Gamma^e_ab E_ec
            p = -ge - np.transpose(ge, (0, 2, 1, 3)) - self._lin(dell, glow, ginv_low, om_low)
            p_blocks.append(p[:, bi, ci])
            qs = []
            ell_low = space.truncate(ell, self.order - 1)
            for a in range(dim):
                w = np.zeros((dim, low.size))
                w[a] = ell_low
                q = -self._lin(w, glow, ginv_low, om_low)
                q[a, :, :, 0] += e
                qs.append(q[:, bi, ci])
            q_blocks.append(qs)
        nrow_t = dim * len(self.pairs)
        ncol = len(self.basis) * space.size
        mat = np.zeros((nrow_t, low.size, ncol))
        for s in range(len(self.basis)):
            p = p_blocks[s].reshape(nrow_t, low.size)
            for k, mu in enumerate(space.exponents):
                col = s * space.size + k
                src, dst = low.monomial_shift(mu)
                if len(src):
                    mat[:, dst, col] += p[:, src]
                for a in range(dim):
                    if mu[a] == 0:
                        continue
                    lowered = mu.copy()
                    lowered[a] -= 1
                    src, dst = low.monomial_shift(lowered)
                    q = q_blocks[s][a].reshape(nrow_t, low.size)
                    mat[:, dst, col] += mu[a] * q[:, src]
        colscale = np.tile(self.scale ** space.degree.astype(float), len(self.basis))
        self.colscale = colscale
        self.matrix = mat.reshape(nrow_t * low.size, ncol) * colscale

    def solve(self, rel_tol=RANK_TOL, check=True):
        rows, cols = self.matrix.shape
        _, sv, vt = np.linalg.svd(self.matrix, full_matrices=rows < cols)
        ncol = self.matrix.shape[1]
        full = np.zeros(ncol)
        full[: len(sv)] = sv
        # kernel dimension: columns minus numerical rank
        res = rank_from_singular_values(np.sort(full)[::-1], rel_tol, check=check)
        kernel = vt[res.rank:].T * self.colscale[:, None]
        return res, kernel

    def to_solutions(self, kernel):
        out = []
        nb = len(self.basis)
        for v in kernel.T:
            coeffs = v.reshape(nb, self.space.size)
            h = np.einsum("sk,sbc->bck", coeffs, np.array(self.basis))
            out.append(JetSolution(self.metric, self.x0, self.order, h))
        return out


def degree_of_mobility(metric: MetricField, x0, k_max=K_MAX_DEFAULT, rel_tol=RANK_TOL,
                       scale=None, radius_probe=True, rng=None, refine_limit=REFINE_UNKNOWNS) -> MobilityResult:
    """Kernel dimension of the truncated system, raised in order until it stabilizes.

    After stabilization the basis is recomputed at the highest order whose
    unknown count stays below ``refine_limit`` (longer Taylor series give a
    larger validity radius); the kernel dimension must not change there.
    """
    n = metric.n
    bound = (n + 1) ** 2
    x0 = metric.chart.require(x0)
    if scale is None:
        scale = 1.0
    stats = []
    prev = None
    for k in range(2, k_max + 1):
        system = MobilitySystem(metric, x0, k, scale)
        res, kernel = system.solve(rel_tol)
        dim_k = kernel.shape[1]
        stats.append(OrderStat(k, system.matrix.shape[1], system.matrix.shape[0], dim_k, res.gap, res.rank))
        log.info("order %d: unknowns=%d equations=%d kernel=%d gap=%.3g",
                 k, system.matrix.shape[1], system.matrix.shape[0], dim_k, res.gap)
        if prev is not None and dim_k == prev:
            if dim_k > bound:
                raise IllConditioned(f"kernel dimension {dim_k} exceeds the bound {bound}")
            system, kernel = _refine(metric, x0, system, kernel, refine_limit, scale, rel_tol)
            sols = system.to_solutions(kernel)
            if radius_probe:
                sols = [with_validity_radius(s, rng=rng) for s in sols]
            mat = np.array([s.h_coeffs.ravel() for s in sols])
            gram = mat @ mat.T
            basis = SolutionBasis(sols, x0, system.order, gram)
            return MobilityResult(dim_k, basis, stats, k)
        prev = dim_k
    raise NoStabilization(
        f"kernel dimensions {[s.kernel for s in stats]} did not stabilize up to order {k_max}"
    )


def _refine(metric, x0, system, kernel, limit, scale, rel_tol):
    dim = kernel.shape[1]
    k = system.order
    while k + 1 <= REFINE_MAX_ORDER:
        unknowns = metric.n ** 2 * jet_space(metric.dim, k + 1).size
        if unknowns > limit:
            break
        candidate = MobilitySystem(metric, x0, k + 1, scale)
        _, ker = candidate.solve(rel_tol)
        if ker.shape[1] != dim:
            log.warning("refinement to order %d changed the kernel (%d -> %d); keeping order %d",
                        k + 1, dim, ker.shape[1], k)
            break
        system, kernel, k = candidate, ker, k + 1
    return system, kernel


def truncation_radius(sol: JetSolution, target=RESIDUAL_TARGET):
    """Radius where the top-degree Taylor term drops below ``target`` (relative)."""
    sp = sol.space
    top = sp.degree == sol.order
    c_top = float(np.linalg.norm(sol.h_coeffs[..., top]))
    c0 = max(float(np.linalg.norm(sol.h_coeffs[..., 0])), 1e-300)
    ref = max(c0, float(np.linalg.norm(sol.h_coeffs)))
    if c_top <= 1e-15 * ref:
        return None
    return (target * ref / c_top) ** (1.0 / sol.order)


def with_validity_radius(sol: JetSolution, target=RESIDUAL_TARGET, probes=8, rng=None, margin=0.5):
    """Attach a radius in which the measured residual stays below ``target``."""
    chart = sol.metric.chart
    rng = np.random.default_rng(0) if rng is None else rng
    r = truncation_radius(sol, target)
    cap = chart.hi - chart.lo
    if chart.radius is not None:
        cap = min(cap, chart.radius)
    r = cap if r is None else min(4.0 * r, cap)
    dirs = rng.normal(size=(probes, sol.metric.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

    def ok(radius):
        for d in dirs:
            x = sol.base_point + radius * d
            if not chart.contains(x):
                continue
            if relative_residual(sol.with_radius(None), x) > target:
                return False
        return True

    lo = 0.0
    hi = r
    if ok(hi):
        return sol.with_radius(margin * hi)
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-3 * hi:
            break
    return sol.with_radius(margin * lo)


# -- metric pairs ----------------------------------------------------------------


def det_complex(m):
    """Complex determinant of a ``J``-commuting matrix; its imaginary part is checked."""
    d = np.linalg.det(complex_form(m))
    if abs(d.imag) > 1e-10 * max(1.0, abs(d.real)):
        raise HermitianViolation(f"complex determinant has imaginary part {d.imag:.3g}")
    return float(d.real)


def reconstruct_metric(m, g, convention="dictionary"):
    """Metric attached to an invertible solution value ``m`` relative to ``g``.

    ``convention="dictionary"`` inverts ``A = (det gt/det g)^{1/(2(n+1))} gt^{-1} g``,
    giving ``gt = det_R(A)^{-1/2} g A^{-1}``.  ``convention="displayed"`` uses
    ``det_R(A)^{+1/2}`` instead (kept for comparison; see README).
    """
    m = np.asarray(m, dtype=float)
    dc = det_complex(m)
    if abs(dc) < 1e-10:
        raise SingularSolution(f"solution is singular (|det_C| = {abs(dc):.3g})")
    det_r = dc * dc
    b = np.linalg.inv(m)
    if convention == "dictionary":
        factor = det_r ** -0.5
    elif convention == "displayed":
        factor = det_r ** 0.5
    else:
        raise ValueError(f"unknown convention {convention!r}")
    gt = factor * g @ b
    return 0.5 * (gt + gt.T)


def reconstruct_metric_at(field_: EndomorphismField, x, convention="dictionary"):
    return reconstruct_metric(field_.value(x), field_.metric.value(x), convention)


def solution_value_from_metrics(g, gt):
    """Pointwise ``A`` with ``reconstruct_metric(A, g) == gt``."""
    g = np.asarray(g, dtype=float)
    gt = np.asarray(gt, dtype=float)
    dt = np.linalg.det(gt)
    if not np.isfinite(dt) or abs(dt) < 1e-300 or np.linalg.cond(gt) > 1e14:
        raise DegenerateInput("second metric is singular")
    n = g.shape[0] // 2
    return (dt / np.linalg.det(g)) ** (1.0 / (2 * (n + 1))) * np.linalg.solve(gt, g)


def solution_from_metric_pair(metric: MetricField, other: MetricField) -> PairSolution:
    return PairSolution(metric, other)


# -- Killing data ------------------------------------------------------------------


@dataclass
class KillingReport:
    lie_g: float
    lie_j: float
    commutator: float
    samples: int
    tolerance: float = 1e-7

    @property
    def passed(self):
        return max(self.lie_g, self.lie_j, self.commutator) <= self.tolerance

    def to_dict(self):
        return {"lie_g": self.lie_g, "lie_j": self.lie_j, "commutator": self.commutator,
                "samples": self.samples, "tolerance": self.tolerance, "passed": self.passed}


def killing_residuals(field_: EndomorphismField, x):
    d = local_data(field_, x, second=True)
    jm = d.jmat
    nl = d.nabla_lam  # [b, a] = nabla_a Lambda^b
    # K = J Lambda; nabla_a K^b = J^b_e nabla_a Lambda^e
    nk = jm @ nl  # [b, a]
    nk_low = d.g @ nk  # [b, a] -> nabla_a K_b
    lie_g = nk_low + nk_low.T
    # Lie derivative of J along Lambda in terms of partials: [J, dLambda]
    dlam = nl - np.einsum("bae,e->ba", d.gamma, d.lam)
    lie_j = jm @ dlam - dlam @ jm
    comm = nl @ d.m - d.m @ nl
    mscale = float(np.linalg.norm(d.m))
    # floor at |A| so a (numerically) parallel solution does not amplify roundoff
    scale = max(float(np.linalg.norm(nl)), mscale)
    if scale == 0.0:
        return 0.0, 0.0, 0.0
    return (
        float(np.linalg.norm(lie_g)) / (scale * float(np.linalg.norm(d.g))),
        float(np.linalg.norm(lie_j)) / scale,
        float(np.linalg.norm(comm)) / (scale * max(mscale, 1e-300)),
    )


def killing_check(field_: EndomorphismField, samples: Sequence, tol=1e-7) -> KillingReport:
    vals = np.array([killing_residuals(field_, x) for x in samples])
    return KillingReport(float(vals[:, 0].max()), float(vals[:, 1].max()), float(vals[:, 2].max()),
                         len(samples), tol)


# -- spectra -----------------------------------------------------------------------


def spectrum(field_: EndomorphismField, x):
    """Eigenvalues (ascending) and ``g``-orthonormal eigenvectors of ``A`` at ``x``."""
    m = field_.value(x)
    g = field_.metric.value(x)
    h = 0.5 * (g @ m + (g @ m).T)
    return eigh(h, g)


def cluster(values, gap=CLUSTER_GAP):
    """Group sorted eigenvalues; returns list of (mean, start, stop)."""
    groups = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > gap * max(1.0, abs(values[i])):
            groups.append((float(np.mean(values[start:i])), start, i))
            start = i
    return groups


@dataclass
class Eigenvalue:
    value: float
    multiplicity: int
    constant: bool
    spread: float
    eigenspace_angle: Optional[float] = None


@dataclass
class EigenStructure:
    point: np.ndarray
    eigenvalues: List[Eigenvalue]
    regular: Optional[bool] = None

    @property
    def nonconstant(self):
        return [e for e in self.eigenvalues if not e.constant]

    def to_dict(self):
        return {
            "point": self.point.tolist(),
            "eigenvalues": [e.__dict__ for e in self.eigenvalues],
            "regular": self.regular,
        }


def _classify_spread(spread, value):
    if spread < CONST_TOL * (1.0 + abs(value)):
        return True
    if spread > NONCONST_TOL:
        return False
    raise ClusterAmbiguity(f"eigenvalue {value:.6g} has ambiguous spread {spread:.3g}")


def _track(field_, points, ref_groups):
    """Values of each reference cluster (by sorted position) at the given points."""
    out = np.zeros((len(points), len(ref_groups)))
    for i, p in enumerate(points):
        w, _ = spectrum(field_, p)
        out[i] = [np.mean(w[a:b]) for _, a, b in ref_groups]
    return out


def eigenvalue_gradient(field_: EndomorphismField, x, vecs):
    """Gradient ``g^{-1} d rho`` of an eigenvalue with ``g``-orthonormal eigenvectors ``vecs``."""
    metric = field_.metric
    space = jet_space(metric.dim, 1)
    mj = field_.jet(x, 1)
    g = metric.value(x)
    dm = [space.diff(mj, a)[..., 0] for a in range(metric.dim)]
    k = vecs.shape[1]
    drho = np.array([np.trace(vecs.T @ g @ d @ vecs) / k for d in dm])
    return np.linalg.solve(g, drho)


def eigenstructure(field_: EndomorphismField, x, probe_radius=1e-2, probes=12, rng=None):
    """Eigenvalues, multiplicities and local constancy of ``A`` at ``x``."""
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(1) if rng is None else rng
    w, v = spectrum(field_, x)
    groups = cluster(w)
    for _, a, b in groups:
        if (b - a) % 2:
            raise ClusterAmbiguity(f"odd multiplicity {b - a} at {x.tolist()}")
    chart = field_.metric.chart
    pts = []
    while len(pts) < probes:
        d = rng.normal(size=len(x))
        p = x + probe_radius * rng.uniform(0.2, 1.0) * d / np.linalg.norm(d)
        if chart.contains(p):
            pts.append(p)
    vals = _track(field_, pts, groups)
    out = []
    jm = field_.metric.jmat
    for k, (mean, a, b) in enumerate(groups):
        spread = float(np.ptp(np.concatenate([[mean], vals[:, k]])))
        const = _classify_spread(spread, mean)
        angle = None
        if not const and b - a == 2:
            vecs = v[:, a:b]
            grad = eigenvalue_gradient(field_, x, vecs)
            if np.linalg.norm(grad) > 1e-12:
                span = np.column_stack([grad, jm @ grad])
                angle = float(np.max(subspace_angles(vecs, span)))
        out.append(Eigenvalue(mean, b - a, const, spread, angle))
    return EigenStructure(x, out)


def regular_classify(field_: EndomorphismField, x, radius=1e-2, probes=16, rng=None):
    """``"regular"``, ``"non-regular"`` or ``"undecided"`` at ``x``."""
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(2) if rng is None else rng
    chart = field_.metric.chart
    w0, v0 = spectrum(field_, x)
    groups0 = cluster(w0)
    counts = []
    pts = []
    while len(pts) < probes:
        d = rng.normal(size=len(x))
        p = x + radius * rng.uniform(0.1, 1.0) * d / np.linalg.norm(d)
        if chart.contains(p):
            pts.append(p)
    for p in pts:
        counts.append(len(cluster(spectrum(field_, p)[0])))
    if any(c != len(groups0) for c in counts):
        return "non-regular"
    vals = _track(field_, pts, groups0)
    undecided = False
    for k, (mean, a, b) in enumerate(groups0):
        variation = float(np.ptp(np.concatenate([[mean], vals[:, k]])))
        if variation < CONST_TOL * (1.0 + abs(mean)):
            continue
        grad = eigenvalue_gradient(field_, x, v0[:, a:b])
        dn = float(np.sqrt(grad @ field_.metric.value(x) @ grad))
        if dn > 1e-8:
            continue
        if variation > NONCONST_TOL:
            return "non-regular"
        undecided = True
    return "undecided" if undecided else "regular"


# -- property (P) ------------------------------------------------------------------


@dataclass
class PropertyPReport:
    m: int
    m_tilde: int
    renormalization: tuple
    rho_range: tuple
    lemma_residual: float
    samples: int
    tolerance: float = 1e-7

    @property
    def passed(self):
        return self.lemma_residual <= self.tolerance

    def to_dict(self):
        return {"m": self.m, "m_tilde": self.m_tilde, "renormalization": list(self.renormalization),
                "rho_range": list(self.rho_range), "lemma_residual": self.lemma_residual,
                "samples": self.samples, "tolerance": self.tolerance, "passed": self.passed}


def _spectral_pattern(field_, samples):
    spectra = [spectrum(field_, x)[0] for x in samples]
    n2 = len(spectra[0])
    # columns = sorted eigenvalues; constant columns have tiny spread
    arr = np.array(spectra)
    spread = np.ptp(arr, axis=0)
    const = spread < CONST_TOL * (1.0 + np.abs(arr).max(axis=0))
    nonconst = spread > NONCONST_TOL
    if np.any(~const & ~nonconst):
        raise ClusterAmbiguity("eigenvalue spread between the constancy thresholds")
    return arr, const, n2


def derive_renormalization(field_, samples):
    """An affine map ``t -> a t + b`` putting the sampled spectrum into (P) form."""
    arr, const, _ = _spectral_pattern(field_, samples)
    cvals = sorted({round(float(v), 9) for v in arr[:, const].ravel()})
    consts = []
    for c in cvals:
        if not consts or abs(c - consts[-1]) > 1e-6 * max(1.0, abs(c)):
            consts.append(c)
    free = arr[:, ~const]
    if free.size == 0:
        raise NotPropertyP("no non-constant eigenvalue")
    lo, hi = float(free.min()), float(free.max())
    if len(consts) == 2:
        c0, c1 = consts
        if c0 < lo and hi < c1:
            return 1.0 / (c1 - c0), -c0 / (c1 - c0)
        if c1 > hi and c0 > hi or c0 < lo and c1 < lo:
            raise NotPropertyP("non-constant eigenvalue does not lie between the constant ones")
        raise NotPropertyP("non-constant eigenvalue crosses a constant eigenvalue")
    if len(consts) == 1:
        c = consts[0]
        width = hi - lo
        if c > hi:
            t0 = lo - max(width, 1e-3 * max(1.0, abs(lo)))  # mapped to 0, outside the sampled range
            return 1.0 / (c - t0), -t0 / (c - t0)
        if c < lo:
            t1 = hi + max(width, 1e-3 * max(1.0, abs(hi)))  # mapped to 1
            return 1.0 / (t1 - c), -c / (t1 - c)
        raise NotPropertyP("non-constant eigenvalue crosses the constant eigenvalue")
    if len(consts) == 0:
        raise NotPropertyP("no constant eigenvalue")
    raise NotPropertyP(f"{len(consts)} distinct constant eigenvalues (at most two allowed)")


def property_P_check(field_: EndomorphismField, samples, renormalization=None, tol=1e-7):
    """Decide property (P) on the samples and evaluate the ``|Lambda|^2`` derivative test."""
    samples = [np.asarray(s, dtype=float) for s in samples]
    n = field_.metric.n
    if renormalization is None:
        renormalization = derive_renormalization(field_, samples)
    a, b = renormalization
    d = field_.affine(a, b)
    arr, const, n2 = _spectral_pattern(d, samples)
    nonconst_cols = np.nonzero(~const)[0]
    if len(nonconst_cols) == 0:
        raise NotPropertyP("no non-constant eigenvalue")
    if len(nonconst_cols) != 2:
        raise NotPropertyP(f"non-constant eigenvalue multiplicity {len(nonconst_cols)} != 2")
    cvals = arr[0, const]
    ones = np.abs(cvals - 1.0) < 1e-7
    zeros = np.abs(cvals) < 1e-7
    if not np.all(ones | zeros):
        raise NotPropertyP(f"constant eigenvalues {np.unique(np.round(cvals, 9)).tolist()} are not in {{0, 1}}")
    m = int(ones.sum()) // 2
    mt = int(zeros.sum()) // 2
    if n - m - mt != 1:
        raise NotPropertyP(f"n - m - m~ = {n - m - mt}, expected 1")
    rho = arr[:, nonconst_cols[0]]
    if not (rho.min() > 0.0 and rho.max() < 1.0):
        raise NotPropertyP(f"rho range [{rho.min():.6g}, {rho.max():.6g}] leaves (0, 1)")
    resid = max(lemma_norm_derivative(d, x) for x in samples)
    return PropertyPReport(m, mt, (float(a), float(b)), (float(rho.min()), float(rho.max())),
                           float(resid), len(samples), tol)


def lemma_norm_derivative(field_: EndomorphismField, x):
    """Relative derivative of ``g(Lambda, Lambda)`` along ``J Lambda`` and the 0/1 eigenvectors."""
    data = local_data(field_, x, second=True)
    lam = data.lam
    g = data.g
    nl = data.nabla_lam  # [b, a]
    lam_norm = float(np.sqrt(lam @ g @ lam))
    if lam_norm < 1e-12:
        return 0.0
    w, v = eigh(0.5 * (g @ data.m + (g @ data.m).T), g)
    dirs = [data.jmat @ lam / lam_norm]
    for k in range(len(w)):
        if abs(w[k]) < 1e-7 or abs(w[k] - 1.0) < 1e-7:
            dirs.append(v[:, k])
    scale = 2.0 * float(np.linalg.norm(nl)) * lam_norm
    out = 0.0
    for X in dirs:
        df = 2.0 * float((nl @ X) @ g @ lam)
        out = max(out, abs(df) / max(scale, 1e-300))
    return out


def identity_field(metric):
    return IdentityField(metric)
