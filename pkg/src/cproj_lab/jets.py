"""Truncated multivariate Taylor arithmetic.

A jet of order ``K`` in ``d`` variables is stored as a trailing array axis of
length ``N = C(K + d, d)``: entry ``k`` is the coefficient of the monomial
``exponents[k]``, i.e. ``d^mu f / mu!``.  Monomials are graded by total degree,
so the jets of lower order form a prefix of the coefficient axis.  Leading
axes carry tensor indices and broadcast like ordinary numpy arrays.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

MAX_ORDER = 8


def _monomials(dim, order):
    out = []
    for deg in range(order + 1):
        # descending lexicographic order inside each degree
        stack = [((), deg)]
        layer = []
        while stack:
            prefix, left = stack.pop()
            if len(prefix) == dim - 1:
                layer.append(prefix + (left,))
                continue
            for e in range(left + 1):
                stack.append((prefix + (e,), left - e))
        layer.sort(reverse=True)
        out.extend(layer)
    return np.array(out, dtype=np.int64).reshape(-1, dim)


class JetSpace:
    """Monomial bookkeeping and arithmetic for jets of a fixed order."""

    def __init__(self, dim, order):
        if order < 0 or order > MAX_ORDER:
            raise ValueError(f"jet order must lie in [0, {MAX_ORDER}], got {order}")
        self.dim = dim
        self.order = order
        self.exponents = _monomials(dim, order)
        self.size = len(self.exponents)
        self.degree = self.exponents.sum(axis=1)
        self.counts = np.array([int(np.sum(self.degree <= k)) for k in range(order + 1)])
        self._base = order + 1
        self.keys = self.exponents @ (self._base ** np.arange(dim))
        self._sorter = np.argsort(self.keys)
        self.index = {tuple(int(e) for e in row): k for k, row in enumerate(self.exponents)}
        self.factorials = np.array(
            [math.prod(math.factorial(int(e)) for e in row) for row in self.exponents], dtype=float
        )
        self._build_products()
        self._build_derivatives()
        self._build_parents()

    # -- tables ---------------------------------------------------------------

    def lookup(self, keys):
        pos = np.searchsorted(self.keys, keys, sorter=self._sorter)
        pos = np.clip(pos, 0, self.size - 1)
        return self._sorter[pos]

    def _build_products(self):
        pi, pj, pk = [], [], []
        for i in range(self.size):
            room = self.order - self.degree[i]
            js = np.nonzero(self.degree <= room)[0]
            pi.append(np.full(len(js), i))
            pj.append(js)
            pk.append(self.lookup(self.keys[i] + self.keys[js]))
        pi, pj, pk = (np.concatenate(a) for a in (pi, pj, pk))
        perm = np.lexsort((pi, pk))
        self._pi, self._pj, self._pk = pi[perm], pj[perm], pk[perm]
        self._starts = np.searchsorted(self._pk, np.arange(self.size))

    def _build_derivatives(self):
        self._dsrc, self._dfac = [], []
        if self.order == 0:
            return
        lower = self.exponents[self.degree <= self.order - 1]
        for v in range(self.dim):
            up = lower.copy()
            up[:, v] += 1
            src = self.lookup(up @ (self._base ** np.arange(self.dim)))
            self._dsrc.append(src)
            self._dfac.append(up[:, v].astype(float))

    def _build_parents(self):
        self._parent = np.zeros(self.size, dtype=np.int64)
        self._pvar = np.zeros(self.size, dtype=np.int64)
        for k in range(1, self.size):
            v = int(np.nonzero(self.exponents[k])[0][-1])
            e = self.exponents[k].copy()
            e[v] -= 1
            self._parent[k] = self.index[tuple(int(x) for x in e)]
            self._pvar[k] = v

    # -- construction -----------------------------------------------------------

    def constant(self, value, shape=None):
        value = np.asarray(value, dtype=float)
        if shape is None:
            shape = value.shape
        out = np.zeros(tuple(shape) + (self.size,))
        out[..., 0] = value
        return out

    def variables(self, point):
        """Jets of the coordinate functions ``x_v`` expanded at ``point``."""
        out = np.zeros((self.dim, self.size))
        out[:, 0] = point
        if self.order >= 1:
            for v in range(self.dim):
                e = [0] * self.dim
                e[v] = 1
                out[v, self.index[tuple(e)]] = 1.0
        return out

    def monomial_shift(self, exponent):
        """Index maps implementing multiplication by ``x^exponent``.

        Returns ``(src, dst)`` such that ``out[..., dst] = a[..., src]``.
        """
        exponent = np.asarray(exponent)
        room = self.order - int(exponent.sum())
        if room < 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        src = np.nonzero(self.degree <= room)[0]
        key = int(exponent @ (self._base ** np.arange(self.dim)))
        return src, self.lookup(self.keys[src] + key)

    # -- arithmetic -------------------------------------------------------------

    def truncate(self, a, order):
        return a[..., : self.counts[order]]

    def mul(self, a, b):
        prod = a[..., self._pi] * b[..., self._pj]
        return np.add.reduceat(prod, self._starts, axis=-1)

    def einsum(self, subscripts, a, b):
        """Two-operand einsum over tensor axes with jet multiplication."""
        lhs, out = subscripts.replace(" ", "").split("->")
        sa, sb = lhs.split(",")
        prod = np.einsum(f"{sa}z,{sb}z->{out}z", a[..., self._pi], b[..., self._pj])
        return np.add.reduceat(prod, self._starts, axis=-1)

    def matmul(self, a, b):
        return self.einsum("...ij,...jk->...ik", a, b)

    def diff(self, a, v):
        """Formal partial derivative; the result lives one order lower."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        return a[..., self._dsrc[v]] * self._dfac[v]

    def gradient(self, a):
        """Stack of partials along a new axis placed before the jet axis."""
        return np.stack([self.diff(a, v) for v in range(self.dim)], axis=-2)

    def _series(self, h, coeffs):
        # sum_k coeffs[k] h^k for a jet h with vanishing constant term (Horner)
        out = self.constant(coeffs[-1], h.shape[:-1])
        for c in reversed(coeffs[:-1]):
            out = self.mul(out, h)
            out[..., 0] += c
        return out

    def reciprocal(self, a):
        a0 = a[..., 0]
        if np.any(a0 == 0):
            raise ZeroDivisionError("reciprocal of a jet with zero constant term")
        h = a.copy()
        h[..., 0] = 0.0
        h = h / a0[..., None]
        series = self._series(h, [(-1.0) ** k for k in range(self.order + 1)])
        return series / a0[..., None]

    def exp(self, a):
        a0 = a[..., 0]
        h = a.copy()
        h[..., 0] = 0.0
        series = self._series(h, [1.0 / math.factorial(k) for k in range(self.order + 1)])
        return series * np.exp(a0)[..., None]

    def log(self, a):
        a0 = a[..., 0]
        if np.any(a0 <= 0):
            raise ValueError("log of a jet with non-positive constant term")
        h = a.copy()
        h[..., 0] = 0.0
        h = h / a0[..., None]
        coeffs = [0.0] + [(-1.0) ** (k + 1) / k for k in range(1, self.order + 1)]
        out = self._series(h, coeffs)
        out[..., 0] += np.log(a0)
        return out

    def power(self, a, p):
        """Real power ``a**p`` for jets with positive constant term."""
        return self.exp(p * self.log(a))

    def ipow(self, a, k):
        if k < 0:
            return self.ipow(self.reciprocal(a), -k)
        out = self.constant(1.0, a.shape[:-1])
        base = a
        while k:
            if k & 1:
                out = self.mul(out, base)
            k >>= 1
            if k:
                base = self.mul(base, base)
        return out

    def inv(self, a):
        """Inverse of a matrix-valued jet ``(..., m, m, N)``."""
        a0 = a[..., 0]
        inv0 = np.linalg.inv(a0)
        x = -np.einsum("...ij,...jkz->...ikz", inv0, a)
        x[..., 0] = 0.0
        eye = np.broadcast_to(np.eye(a.shape[-2]), a0.shape)
        r = self.constant(eye)
        for _ in range(self.order):
            r = self.matmul(x, r)
            r[..., 0] += eye
        return np.einsum("...ijz,...jk->...ikz", r, inv0)

    def det(self, a):
        """Determinant of a matrix-valued jet via ``det(A0) exp(tr log(1 + Y))``."""
        a0 = a[..., 0]
        y = np.einsum("...ij,...jkz->...ikz", np.linalg.inv(a0), a)
        y[..., 0] = 0.0
        logm = np.zeros_like(y)
        term = y
        for k in range(1, self.order + 1):
            logm = logm + ((-1.0) ** (k + 1) / k) * term
            if k < self.order:
                term = self.matmul(term, y)
        tr = np.trace(logm, axis1=-3, axis2=-2)
        return self.exp(tr) * np.linalg.det(a0)[..., None]

    def compose(self, outer, inner):
        """Substitute jets ``inner`` (shape ``(d_outer, N)``) into polynomial ``outer``.

        ``outer`` holds coefficients of a polynomial in the offsets
        ``y - y0``; ``inner[v]`` must be the jet of ``y_v - y0_v`` in this
        space.  Exact for polynomial ``outer`` of degree at most ``order``.
        """
        outer_space = jet_space(inner.shape[0], _order_from_size(inner.shape[0], outer.shape[-1]))
        mono = np.zeros((outer_space.size, self.size))
        mono[0, 0] = 1.0
        for k in range(1, outer_space.size):
            mono[k] = self.mul(mono[outer_space._parent[k]], inner[outer_space._pvar[k]])
        return np.tensordot(outer, mono, axes=([-1], [0]))

    def evaluate(self, a, offset):
        """Evaluate the polynomial with coefficients ``a`` at ``x0 + offset``."""
        powers = np.prod(np.asarray(offset, dtype=float) ** self.exponents, axis=1)
        return a @ powers

    def coefficient(self, a, exponent):
        return a[..., self.index[tuple(exponent)]]

    def derivative_values(self, a):
        """Convert Taylor coefficients to partial derivatives ``d^mu f``."""
        return a * self.factorials


def _order_from_size(dim, size):
    k = 0
    while math.comb(k + dim, dim) < size:
        k += 1
    if math.comb(k + dim, dim) != size:
        raise ValueError(f"size {size} is not a jet size for dimension {dim}")
    return k


@lru_cache(maxsize=64)
def jet_space(dim, order):
    return JetSpace(dim, order)


class JetPolynomial:
    """Tensor-valued truncated Taylor polynomial at a base point."""

    def __init__(self, base_point, order, coefficients):
        self.base_point = np.asarray(base_point, dtype=float)
        self.order = int(order)
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.space = jet_space(len(self.base_point), self.order)
        if self.coefficients.shape[-1] != self.space.size:
            raise ValueError("coefficient axis does not match the jet order")

    @property
    def shape(self):
        return self.coefficients.shape[:-1]

    def value(self):
        return self.coefficients[..., 0]

    def coefficient(self, exponent):
        return self.space.coefficient(self.coefficients, exponent)

    def as_dict(self):
        """Mapping ``multi-index -> coefficient`` for scalar jets (nonzero entries)."""
        out = {}
        for k, row in enumerate(self.space.exponents):
            c = self.coefficients[..., k]
            if np.any(c != 0):
                out[tuple(int(e) for e in row)] = c if c.shape else float(c)
        return out

    def diff(self, v):
        return JetPolynomial(self.base_point, self.order - 1, self.space.diff(self.coefficients, v))

    def __call__(self, x):
        return self.space.evaluate(self.coefficients, np.asarray(x, dtype=float) - self.base_point)

    def __mul__(self, other):
        if not isinstance(other, JetPolynomial):
            return JetPolynomial(self.base_point, self.order, self.coefficients * other)
        order = min(self.order, other.order)
        space = jet_space(len(self.base_point), order)
        a = self.space.truncate(self.coefficients, order) if self.order > order else self.coefficients
        b = other.space.truncate(other.coefficients, order) if other.order > order else other.coefficients
        return JetPolynomial(self.base_point, order, space.mul(a, b))

    __rmul__ = __mul__
