"""Endomorphism fields ``A`` on a chart, evaluable as jets.

Every field stores ``A`` as column matrices ``M[b, a] = A_a^b`` and exposes
``jet(x, order)`` with shape ``(2n, 2n, N_order)``.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .expr import as_field
from .jets import jet_space
from .kahler import MetricField


class EndomorphismField:
    metric: MetricField
    base_point = None
    radius = None  # ``None`` means globally evaluable on the chart

    def jet(self, x, order):
        raise NotImplementedError

    def value(self, x):
        return self.jet(np.asarray(x, dtype=float), 0)[..., 0]

    def in_validity(self, x):
        if not self.metric.chart.contains(x):
            return False
        if self.radius is None:
            return True
        return float(np.linalg.norm(np.asarray(x) - self.base_point)) <= self.radius

    def __add__(self, other):
        return Combination([self, other], [1.0, 1.0])

    def __mul__(self, c):
        return Combination([self], [float(c)])

    __rmul__ = __mul__

    def affine(self, a, b):
        """The field ``a A + b Id``."""
        return Combination([self, IdentityField(self.metric)], [float(a), float(b)])


class IdentityField(EndomorphismField):
    def __init__(self, metric):
        self.metric = metric

    def jet(self, x, order):
        space = jet_space(self.metric.dim, order)
        return space.constant(np.eye(self.metric.dim))


class MatrixField(EndomorphismField):
    """Explicit ``M[b, a]`` entries: numbers or scalar expressions."""

    def __init__(self, metric, entries):
        self.metric = metric
        dim = metric.dim
        arr = np.asarray(entries, dtype=object)
        if arr.shape != (dim, dim):
            raise ValueError(f"matrix field must be {dim}x{dim}")
        self.entries = [[as_field(e) if not isinstance(e, (int, float, np.floating)) else float(e)
                         for e in row] for row in arr]

    def jet(self, x, order):
        space = jet_space(self.metric.dim, order)
        out = np.zeros((self.metric.dim, self.metric.dim, space.size))
        for b, row in enumerate(self.entries):
            for a, e in enumerate(row):
                if isinstance(e, float):
                    out[b, a, 0] = e
                else:
                    out[b, a] = e.jet(x, order)
        return out


class JetSolution(EndomorphismField):
    """``A = g^{-1} h`` with ``h`` a polynomial (truncated Taylor series) about ``x0``."""

    def __init__(self, metric, base_point, order, h_coeffs, radius=None):
        self.metric = metric
        self.base_point = np.asarray(base_point, dtype=float)
        self.order = int(order)
        self.h_coeffs = np.asarray(h_coeffs, dtype=float)
        self.radius = radius
        self.space = jet_space(metric.dim, self.order)

    def with_radius(self, radius):
        return JetSolution(self.metric, self.base_point, self.order, self.h_coeffs, radius)

    def h_jet(self, x, order):
        x = np.asarray(x, dtype=float)
        target = jet_space(self.metric.dim, order)
        inner = target.variables(x - self.base_point)
        return target.compose(self.h_coeffs, inner)

    def jet(self, x, order):
        x = np.asarray(x, dtype=float)
        space = jet_space(self.metric.dim, order)
        ginv = space.inv(self.metric.jet(x, order))
        return space.matmul(ginv, self.h_jet(x, order))

    def to_dict(self):
        return {
            "base_point": self.base_point.tolist(),
            "order": self.order,
            "radius": self.radius,
            "exponents": self.space.exponents.tolist(),
            "h_coefficients": self.h_coeffs.tolist(),
        }


class PairSolution(EndomorphismField):
    """Closed-form solution attached to a second metric ``gt`` on the same chart.

    ``A = (det gt / det g)^{1/(2(n+1))} gt^{-1} g``.
    """

    def __init__(self, metric, other):
        if other.dim != metric.dim:
            raise ValueError("metric pair must share the chart dimension")
        self.metric = metric
        self.other = other

    def jet(self, x, order):
        x = np.asarray(x, dtype=float)
        space = jet_space(self.metric.dim, order)
        g = self.metric.jet(x, order)
        gt = self.other.jet(x, order)
        n = self.metric.n
        ratio = space.mul(space.det(gt), space.reciprocal(space.det(g)))
        if ratio[0] <= 0:
            raise DomainError("metric pair has a non-positive determinant ratio")
        scale = space.power(ratio, 1.0 / (2 * (n + 1)))
        return space.mul(space.matmul(space.inv(gt), g), np.broadcast_to(scale, g.shape))


class Combination(EndomorphismField):
    def __init__(self, fields, coeffs):
        if not fields:
            raise ValueError("empty combination")
        self.fields = list(fields)
        self.coeffs = [float(c) for c in coeffs]
        self.metric = self.fields[0].metric
        radii = [f.radius for f in self.fields if f.radius is not None]
        self.radius = min(radii) if radii else None
        bases = [f.base_point for f in self.fields if f.base_point is not None]
        self.base_point = bases[0] if bases else None

    def jet(self, x, order):
        out = None
        for f, c in zip(self.fields, self.coeffs):
            if c == 0.0:
                continue
            t = c * f.jet(x, order)
            out = t if out is None else out + t
        if out is None:
            space = jet_space(self.metric.dim, order)
            out = np.zeros((self.metric.dim, self.metric.dim, space.size))
        return out


class ValueField(EndomorphismField):
    """Pointwise-only field given by a callable ``x -> M`` (no derivatives)."""

    def __init__(self, metric, func):
        self.metric = metric
        self.func = func

    def jet(self, x, order):
        if order > 0:
            raise NotImplementedError("value-only field has no derivative data")
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)[..., None]


def hermitian_residual(m, g, jm):
    """Relative violation of ``g``-self-adjointness and ``J``-commutation."""
    scale = max(float(np.linalg.norm(m)), 1e-300)
    sa = float(np.linalg.norm(m.T @ g - g @ m)) / (scale * max(float(np.linalg.norm(g)), 1e-300))
    jc = float(np.linalg.norm(m @ jm - jm @ m)) / scale
    return max(sa, jc)


def complex_form(m):
    """The ``n x n`` complex matrix of a ``J``-commuting real matrix."""
    return m[0::2, 0::2] + 1j * m[1::2, 0::2]


def real_form(c):
    n = c.shape[0]
    out = np.zeros((2 * n, 2 * n))
    out[0::2, 0::2] = c.real
    out[1::2, 1::2] = c.real
    out[1::2, 0::2] = c.imag
    out[0::2, 1::2] = -c.imag
    return out


def hermitian_basis(n):
    """Real basis of Hermitian ``n x n`` matrices, as real symmetric ``J``-invariant forms."""
    out = []
    for i in range(n):
        for j in range(i, n):
            h = np.zeros((n, n), dtype=complex)
            h[i, j] = h[j, i] = 1.0
            out.append(h)
            if i != j:
                h = np.zeros((n, n), dtype=complex)
                h[i, j] = 1j
                h[j, i] = -1j
                out.append(h)
    return [hermitian_real_form(h) for h in out]


def hermitian_real_form(h):
    """``g``-style real form of a Hermitian matrix (``|z|^2`` convention)."""
    n = h.shape[0]
    out = np.zeros((2 * n, 2 * n))
    out[0::2, 0::2] = h.real
    out[1::2, 1::2] = h.real
    out[0::2, 1::2] = h.imag
    out[1::2, 0::2] = -h.imag
    return out
