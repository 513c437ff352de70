"""Geodesics, J-planar curves and the integrals of the geodesic flow attached to a solution."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.integrate import RK45
from scipy.linalg import eigh

from .errors import BoundaryExit, NonRegularPoint, NotPropertyP, StepLimit
from .fields import EndomorphismField, complex_form, real_form
from .kahler import MetricField, christoffel_values
from .mobility import local_data

DRIFT_FLOOR = 1e-12


@dataclass
class IntegratorConfig:
    """Adaptive Runge-Kutta 5(4) settings."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_steps: int = 200000
    margin: float = 0.0
    first_step: Optional[float] = None

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("integrator tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass
class CurveState:
    t: float
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.v.shape:
            raise ValueError(f"state shapes differ: x {self.x.shape}, v {self.v.shape}")


@dataclass
class CurveTrace:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    channels: Dict[str, np.ndarray] = field(default_factory=dict)
    status: str = "complete"
    config: Optional[IntegratorConfig] = None

    def __len__(self):
        return len(self.t)

    def states(self):
        for t, x, v in zip(self.t, self.x, self.v):
            yield CurveState(float(t), x, v)

    def state(self, i):
        return CurveState(float(self.t[i]), self.x[i], self.v[i])

    def monitor(self, name, func):
        """Evaluate ``func(state)`` along the trace and store it as a channel."""
        self.channels[name] = np.array([func(s) for s in self.states()])
        return self.channels[name]

    def drift(self, name):
        return relative_drift(self.channels[name])

    def drift_summary(self):
        return {k: relative_drift(v) for k, v in self.channels.items()}

    def write_csv(self, path):
        dim = self.x.shape[1]
        header = ["t"] + [f"x{i + 1}" for i in range(dim)] + [f"v{i + 1}" for i in range(dim)]
        header += [f"channel_{k}" for k in self.channels]
        rows = np.column_stack([self.t, self.x, self.v] + [self.channels[k] for k in self.channels])
        _atomic_write(path, lambda fh: _write_rows(fh, header, rows))

    def write_sidecar(self, path, extra=None):
        data = {
            "status": self.status,
            "steps": len(self.t),
            "config": asdict(self.config) if self.config else None,
            "drift": self.drift_summary(),
        }
        if extra:
            data.update(extra)
        _atomic_write(path, lambda fh: json.dump(data, fh, indent=2))


def _write_rows(fh, header, rows):
    w = csv.writer(fh)
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) for v in r])


def _atomic_write(path, writer):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def relative_drift(values):
    """Max deviation from the initial value over the trace's max magnitude."""
    values = np.asarray(values, dtype=float)
    dev = float(np.max(np.abs(values - values[0])))
    return dev / max(float(np.max(np.abs(values))), DRIFT_FLOOR)


# -- integration --------------------------------------------------------------------


def _integrate(metric: MetricField, state0: CurveState, T, accel, cfg: IntegratorConfig):
    chart = metric.chart
    dim = metric.dim
    if not chart.contains(state0.x, cfg.margin):
        raise BoundaryExit("initial point is not interior to the chart")

    def rhs(t, y):
        x, v = y[:dim], y[dim:]
        return np.concatenate([v, accel(t, x, v)])

    y0 = np.concatenate([state0.x, state0.v])
    kwargs = {"rtol": cfg.rel_tol, "atol": cfg.abs_tol}
    if cfg.first_step is not None:
        kwargs["first_step"] = cfg.first_step
    solver = RK45(rhs, state0.t, y0, state0.t + T, **kwargs)
    ts, ys = [state0.t], [y0]
    steps = 0
    while solver.status == "running":
        if steps >= cfg.max_steps:
            trace = _trace(ts, ys, dim, "step_limit", cfg)
            raise StepLimit(f"step limit {cfg.max_steps} reached at t={ts[-1]:.6g}", trace)
        try:
            solver.step()
        except Exception as exc:
            # chart guards raised inside the right-hand side mean the step left the domain
            trace = _trace(ts, ys, dim, "boundary", cfg)
            raise BoundaryExit(f"integration left the domain near t={ts[-1]:.6g}: {exc}", trace) from exc
        steps += 1
        if solver.status == "failed":
            raise RuntimeError("integrator failed")
        if not chart.contains(solver.y[:dim], cfg.margin):
            trace = _trace(ts, ys, dim, "boundary", cfg)
            raise BoundaryExit(f"curve reached the chart boundary near t={solver.t:.6g}", trace)
        ts.append(solver.t)
        ys.append(solver.y.copy())
    return _trace(ts, ys, dim, "complete", cfg)


def _trace(ts, ys, dim, status, cfg):
    ys = np.array(ys)
    return CurveTrace(np.array(ts), ys[:, :dim], ys[:, dim:], {}, status, cfg)


def geodesic_acceleration(metric: MetricField):
    def accel(t, x, v):
        _, gamma = christoffel_values(metric, x)
        return -np.einsum("cab,a,b->c", gamma, v, v)

    return accel


def geodesic(metric: MetricField, state0: CurveState, T, cfg: Optional[IntegratorConfig] = None,
             monitor_energy=True) -> CurveTrace:
    """Solve ``x'' + Gamma(x)(x', x') = 0`` on ``[t0, t0 + T]``."""
    cfg = cfg or IntegratorConfig()
    trace = _integrate(metric, state0, T, geodesic_acceleration(metric), cfg)
    if monitor_energy:
        trace.monitor("energy", lambda s: energy(metric, s))
    return trace


def _as_fn(f):
    if callable(f):
        return f
    c = float(f)
    return lambda t: c


def jplanar(metric: MetricField, state0: CurveState, alpha_fn, beta_fn, T,
            cfg: Optional[IntegratorConfig] = None) -> CurveTrace:
    """Solve ``nabla_{x'} x' = alpha(t) x' + beta(t) J x'``."""
    cfg = cfg or IntegratorConfig()
    a_fn, b_fn = _as_fn(alpha_fn), _as_fn(beta_fn)
    base = geodesic_acceleration(metric)
    jm = metric.jmat

    def accel(t, x, v):
        return base(t, x, v) + a_fn(t) * v + b_fn(t) * (jm @ v)

    return _integrate(metric, state0, T, accel, cfg)


def energy(metric: MetricField, state: CurveState):
    return float(state.v @ metric.value(state.x) @ state.v)


def complex_line_distance(x, base, direction):
    """Euclidean distance (in the chart) from ``x`` to ``base + C * direction``."""
    z = np.asarray(x)[0::2] + 1j * np.asarray(x)[1::2]
    z0 = np.asarray(base)[0::2] + 1j * np.asarray(base)[1::2]
    w = np.asarray(direction)[0::2] + 1j * np.asarray(direction)[1::2]
    w = w / np.linalg.norm(w)
    d = z - z0
    return float(np.linalg.norm(d - np.vdot(w, d) * w))


# -- integrals -------------------------------------------------------------------------


def complex_adjugate(c):
    """Adjugate of a complex square matrix via cofactors (defined for singular input)."""
    size = c.shape[0]
    if size == 1:
        return np.ones((1, 1), dtype=complex)
    adj = np.empty_like(c, dtype=complex)
    for i in range(size):
        for j in range(size):
            minor = np.delete(np.delete(c, j, axis=0), i, axis=1)
            adj[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return adj


def adjugate_real(m, t):
    """Real form of ``det_C(A(t)) A(t)^{-1}`` with ``A(t) = t Id - A``."""
    dim = m.shape[0]
    c = complex_form(t * np.eye(dim) - m)
    return real_form(complex_adjugate(c))


def _hermitian_at(field_: EndomorphismField, x):
    m = field_.value(x)
    g = field_.metric.value(x)
    return m, g


def integral_It(field_: EndomorphismField, state: CurveState, t):
    """``I_t(X) = g(det_C(A(t)) A(t)^{-1} X, X)``."""
    m, g = _hermitian_at(field_, state.x)
    adj = adjugate_real(m, t)
    v = state.v
    return float(v @ g @ (adj @ v))


def integral_It_polynomial(field_: EndomorphismField, state: CurveState):
    """Coefficients (highest degree first) of ``t -> I_t`` at a fixed state, fitted through ``n`` points."""
    n = field_.metric.n
    ts = np.arange(n, dtype=float)
    vals = [integral_It(field_, state, t) for t in ts]
    return np.polyfit(ts, vals, n - 1) if n > 1 else np.array(vals)


def lambda_vector(field_: EndomorphismField, x):
    return local_data(field_, x).lam


def integral_linear(field_: EndomorphismField, state: CurveState):
    """``g(J Lambda, v)``, conserved along geodesics when ``J Lambda`` is Killing."""
    data = local_data(field_, state.x)
    k = data.jmat @ data.lam
    return float(k @ data.g @ state.v)


def alpha_flag(ell):
    return 1 if ell >= 1 else 0


@dataclass
class AdaptedFrame:
    """``g``-orthonormal ``J``-aligned eigenframe ordered (rho block, 1-block, 0-block)."""

    vectors: np.ndarray  # columns
    rho: float
    m: int
    m_tilde: int


def _j_align(vecs, g, jm):
    """Orthonormal basis ``(e1, J e1, e2, J e2, ...)`` of a J-invariant subspace."""
    out = []
    space = vecs.copy()
    while len(out) < space.shape[1]:
        # pick the candidate with the largest component off the current span
        best, best_norm = None, -1.0
        for k in range(space.shape[1]):
            w = space[:, k].copy()
            for e in out:
                w = w - (e @ g @ w) * e
            nw = float(np.sqrt(max(w @ g @ w, 0.0)))
            if nw > best_norm + 1e-12:
                best, best_norm = w, nw
        e1 = best / best_norm
        # deterministic orientation: positive projection on the first coordinate axis with weight
        idx = int(np.argmax(np.abs(e1) > 1e-12))
        if e1[idx] < 0:
            e1 = -e1
        e2 = jm @ e1
        for e in out:
            e2 = e2 - (e @ g @ e2) * e
        e2 = e2 - (e1 @ g @ e2) * e1
        e2 = e2 / np.sqrt(e2 @ g @ e2)
        out.extend([e1, e2])
    return np.array(out).T


def adapted_frame(field_: EndomorphismField, x, m, m_tilde, tol=1e-7) -> AdaptedFrame:
    m_val, g = _hermitian_at(field_, x)
    jm = field_.metric.jmat
    h = 0.5 * (g @ m_val + (g @ m_val).T)
    w, v = eigh(h, g)
    ones = np.abs(w - 1.0) < tol
    zeros = np.abs(w) < tol
    rest = ~(ones | zeros)
    if ones.sum() != 2 * m or zeros.sum() != 2 * m_tilde or rest.sum() != 2:
        raise NotPropertyP(
            f"spectrum {np.round(w, 9).tolist()} does not match m={m}, m~={m_tilde} with one rho block")
    rho_vals = w[rest]
    if abs(rho_vals[0] - rho_vals[1]) > 1e-6 * max(1.0, abs(rho_vals[0])):
        raise NonRegularPoint("rho eigenvalue is not J-invariant (split pair)")
    rho = float(np.mean(rho_vals))
    if min(abs(rho), abs(rho - 1.0)) < tol:
        raise NonRegularPoint("rho collides with a constant eigenvalue")
    blocks = [v[:, rest], v[:, ones], v[:, zeros]]
    frame = np.column_stack([_j_align(b, g, jm) for b in blocks if b.shape[1]])
    return AdaptedFrame(frame, rho, m, m_tilde)


def integral_normalized(field_: EndomorphismField, state: CurveState, t, m, m_tilde, frame=None):
    """``I~_t`` in an adapted frame for a solution in (P) form."""
    if frame is None:
        frame = adapted_frame(field_, state.x, m, m_tilde)
    g = field_.metric.value(state.x)
    xi = frame.vectors.T @ g @ state.v
    n = field_.metric.n
    am, amt = alpha_flag(m), alpha_flag(m_tilde)
    rho = frame.rho
    s_rho = float(xi[0] ** 2 + xi[1] ** 2)
    s_one = float(np.sum(xi[2:2 * m + 2] ** 2))
    s_zero = float(np.sum(xi[2 * m + 2:2 * n] ** 2))
    return (
        (t - 1) ** am * t ** amt * s_rho
        + (t - rho) * t ** amt * s_one
        + (t - rho) * (t - 1) ** am * s_zero
    )


def normalized_prefactor(t, m, m_tilde):
    return (t - 1) ** (alpha_flag(m) * (m - 1)) * t ** (alpha_flag(m_tilde) * (m_tilde - 1))


def factorization_residual(field_: EndomorphismField, state: CurveState, t, m, m_tilde):
    """``|I_t - prefactor * I~_t| / |I_t|``."""
    full = integral_It(field_, state, t)
    fac = normalized_prefactor(t, m, m_tilde) * integral_normalized(field_, state, t, m, m_tilde)
    return abs(full - fac) / max(abs(full), DRIFT_FLOOR)


def normalized_flags(field_: EndomorphismField, state: CurveState, m, m_tilde):
    """``I~_0`` and ``I~_1`` at the state (both vanish along curves tangent to Lambda when applicable)."""
    frame = adapted_frame(field_, state.x, m, m_tilde)
    return {
        "I0": integral_normalized(field_, state, 0.0, m, m_tilde, frame),
        "I1": integral_normalized(field_, state, 1.0, m, m_tilde, frame),
        "rho": frame.rho,
    }


def lambda_angle(field_: EndomorphismField, state: CurveState):
    """Angle between ``v`` and ``Lambda`` measured in ``g``; ``None`` when ``Lambda`` is tiny."""
    data = local_data(field_, state.x)
    g, lam, v = data.g, data.lam, state.v
    nl = float(np.sqrt(lam @ g @ lam))
    nv = float(np.sqrt(v @ g @ v))
    if nl <= 1e-6 or nv == 0.0:
        return None
    c = abs(float(lam @ g @ v)) / (nl * nv)
    return float(np.arccos(min(1.0, c)))


# -- monitors ----------------------------------------------------------------------------


def monitor_integrals(trace: CurveTrace, field_: EndomorphismField, ts=(0.0, 0.25, 0.5, 0.75, 1.0),
                      linear=True):
    for t in ts:
        trace.monitor(f"I_{t:g}", lambda s, t=t: integral_It(field_, s, t))
    if linear:
        trace.monitor("linear", lambda s: integral_linear(field_, s))
    return trace.drift_summary()


def unit_state(metric: MetricField, x, v, t=0.0):
    v = np.asarray(v, dtype=float)
    norm = np.sqrt(v @ metric.value(x) @ v)
    return CurveState(t, np.asarray(x, dtype=float), v / norm)


def random_states(metric: MetricField, rng, count, scale=0.5):
    """Unit-speed states at random chart points (shrunk by ``scale``)."""
    pts = metric.chart.sample(rng, count, scale)
    return [unit_state(metric, p, rng.normal(size=metric.dim)) for p in pts]

