"""The acceptance criteria as runnable checks.

Each ``criterion_<k>`` returns a :class:`CriterionResult`; :func:`run_suite`
runs them all.  Seeds are fixed so every number is reproducible.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .cproj import (
    ConnectionField,
    random_polynomial_oneform,
    weyl,
    weyl_invariance_check,
    weyl_norm,
)
from .dynamics import (
    CurveState,
    IntegratorConfig,
    complex_line_distance,
    factorization_residual,
    geodesic,
    jplanar,
    lambda_angle,
    lambda_vector,
    monitor_integrals,
    unit_state,
)
from .expr import ScalarField
from .fields import IdentityField, MatrixField, PairSolution
from .kahler import MetricField, kahler_validate
from .mobility import (
    degree_of_mobility,
    killing_check,
    property_P_check,
    relative_residual,
)
from .models import flat, fs_perturbed, fubini_study, product
from .transform import (
    PGLElement,
    classify_map,
    coordinates,
    eigen_split,
    gk_asymptotics_check,
    hermitian_pair_basis,
    is_non_affine,
    orbit_dynamics_check,
    orthonormalize_basis,
    pgl_pullback_potential,
    scaling_map,
    t_phi,
)

log = logging.getLogger(__name__)

SEED = 20240611
GK_RADIUS = 400.0  # chart holding the G(k) orbit (FS is defined on all of C^n)
GK_POINT = (0.6, 0.3, 0.4, -0.2)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} [{status}] {self.title} ({self.seconds:.1f}s)"

    def to_dict(self):
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "seconds": self.seconds, "details": self.details}


def _timed(number, title, func, budget=None):
    t0 = time.perf_counter()
    passed, details = func()
    secs = time.perf_counter() - t0
    if budget is not None:
        details["runtime_budget"] = budget
        details["within_budget"] = secs < budget
        passed = passed and secs < budget
    return CriterionResult(number, title, bool(passed), details, secs)


def fs_pair(n=2, diag=2.0, radius=3.0):
    """FS model and the closed-form solution from the ``diag(diag, 1, ..., 1)`` pullback."""
    model = fubini_study(n, 1.0, radius)
    m = np.eye(n + 1, dtype=complex)
    m[0, 0] = diag
    other = MetricField(model.chart, potential=pgl_pullback_potential(m), name="fs_pullback")
    return model, PairSolution(model.metric, other), PGLElement(m)


def fsxfs():
    return product(fubini_study(1, 1.0, allow_small=True), fubini_study(1, 1.0, allow_small=True))


# -- criteria -------------------------------------------------------------------------------


def criterion_1(seed=SEED):
    def run():
        rng = np.random.default_rng(seed)
        models = {"flat2": flat(2), "fs2_c1": fubini_study(2, 1.0), "fs2_c2": fubini_study(2, 2.0),
                  "fsxfs": fsxfs()}
        out, ok = {}, True
        for name, model in models.items():
            rep = kahler_validate(model.metric, model.chart.sample(rng, 100), 1e-9)
            out[name] = rep.to_dict()
            ok &= rep.passed
        return ok, out

    return _timed(1, "Kahler validity", run, budget=10.0)


def criterion_2(seed=SEED):
    def run():
        rng = np.random.default_rng(seed)
        out, ok = {}, True
        for name, model in {"fs2": fubini_study(2), "fs3": fubini_study(3)}.items():
            vals = [weyl_norm(model.metric, p) for p in model.chart.sample(rng, 50)]
            out[name] = {"max_weyl_norm": max(vals)}
            ok &= max(vals) <= 1e-16
        for name, model in {"fsxfs": fsxfs(), "fs_pert": fs_perturbed(2, 0.1, 7)}.items():
            vals = [weyl_norm(model.metric, p) for p in model.chart.sample(rng, 10)]
            out[name] = {"max_weyl_norm": max(vals)}
            ok &= max(vals) > 1e-4
        return ok, out

    return _timed(2, "Weyl tensor vanishing and non-vanishing", run, budget=30.0)


def criterion_3(seed=SEED):
    def run():
        rng = np.random.default_rng(seed)
        out, ok = {}, True
        for name, model in {"fs2": fubini_study(2), "flat2": flat(2)}.items():
            pts = model.chart.sample(rng, 20, 0.3)
            worst = 0.0
            for _ in range(3):
                ups = random_polynomial_oneform(model.chart.dim, rng)
                rep = weyl_invariance_check(model.metric, ups, pts, 1e-8)
                worst = max(worst, rep.max_discrepancy)
            out[name] = {"max_discrepancy": worst}
            ok &= worst <= 1e-8
        return ok, out

    return _timed(3, "Weyl tensor invariance under connection change", run)


def criterion_4(seed=SEED):
    def run():
        rng = np.random.default_rng(seed)
        cases = {"fs2": fubini_study(2), "fsxfs": fsxfs(), "fs_pert": fs_perturbed(2, 0.1, 7), "flat2": flat(2)}
        out, ok = {}, True
        for name, model in cases.items():
            pts = model.chart.sample(rng, 10, 0.3)
            ups = random_polynomial_oneform(model.chart.dim, rng)
            worst = 0.0
            for conn in (ConnectionField(model.metric), ConnectionField(model.metric, ups)):
                for p in pts:
                    worst = max(worst, weyl(conn.bundle(p)).reconstruction_error())
            out[name] = {"max_reconstruction_error": worst}
            ok &= worst <= 1e-12
        return ok, out

    return _timed(4, "Curvature decomposition R = W + dP", run)


KILLING_RADIUS_FRACTION = 0.1

MOBILITY_CASES = {
    "flat2": (lambda: flat(2), (0.1, 0.2, -0.1, 0.05), 9),
    "fs2": (lambda: fubini_study(2), (0.1, 0.2, -0.1, 0.05), 9),
    "fs3": (lambda: fubini_study(3), (0.1, 0.2, -0.1, 0.05, 0.02, -0.03), 16),
    "fs_pert": (lambda: fs_perturbed(2, 0.1, 7), (0.1, 0.2, -0.1, 0.05), 1),
}


def mobility_results(names=None, radius_probe=True, seed=SEED):
    out = {}
    for name, (build, x0, expected) in MOBILITY_CASES.items():
        if names is not None and name not in names:
            continue
        model = build()
        res = degree_of_mobility(model.metric, np.array(x0), radius_probe=radius_probe,
                                 rng=np.random.default_rng(seed))
        out[name] = (model, res, expected)
    return out


def criterion_5(seed=SEED, cache=None):
    def run():
        results = cache if cache is not None else mobility_results(seed=seed)
        out, ok = {}, True
        for name, (_, res, expected) in results.items():
            diag = res.diagnostics()
            stats = diag["orders"]
            last = stats[-2:]
            stable = len(last) == 2 and last[0]["kernel"] == last[1]["kernel"]
            gap = min(s["gap"] for s in last)
            out[name] = {"degree": res.degree, "expected": expected, "stabilized": stable,
                         "min_gap": gap, "orders": [s["order"] for s in stats]}
            ok &= res.degree == expected and stable and gap >= 1e3
        return ok, out

    return _timed(5, "Degree of mobility", run, budget=300.0)


def criterion_6(seed=SEED, cache=None):
    def run():
        rng = np.random.default_rng(seed)
        results = cache if cache is not None else mobility_results(seed=seed)
        out, ok = {}, True
        for name, (model, res, _) in results.items():
            if name not in MOBILITY_CASES:
                continue
            worst, kill = 0.0, None
            for sol in res.basis:
                pts = _ball_points(rng, sol.base_point, sol.radius, 50, model.chart)
                worst = max(worst, max(relative_residual(sol, p) for p in pts))
            # Killing-type checks use one more derivative than the residual, so the
            # truncation error grows faster; sample well inside the validity radius
            combo = res.basis.generic(rng)
            kpts = _ball_points(rng, combo.base_point, KILLING_RADIUS_FRACTION * combo.radius, 10, model.chart)
            kill = killing_check(combo, kpts, 1e-7)
            out[name] = {"max_residual": worst, "radius": min(s.radius for s in res.basis),
                         "killing": kill.to_dict()}
            ok &= worst <= 1e-9 and kill.passed
        model, pair, _ = fs_pair()
        pts = model.chart.sample(rng, 20, 0.5)
        res_pair = max(relative_residual(pair, p) for p in pts)
        kill = killing_check(pair, pts, 1e-7)
        out["fs2_pullback_solution"] = {"max_residual": res_pair, "killing": kill.to_dict()}
        ok &= res_pair <= 1e-9 and kill.passed
        return ok, out

    return _timed(6, "Mobility residual and Killing checks", run)


def _ball_points(rng, center, radius, count, chart=None):
    """Uniform points in a ball, optionally restricted to a chart."""
    dim = len(center)
    pts = []
    while len(pts) < count:
        v = rng.normal(size=dim)
        v *= radius * rng.uniform() ** (1.0 / dim) / np.linalg.norm(v)
        p = center + v
        if chart is None or chart.contains(p):
            pts.append(p)
    return pts


def conservation_starts(metric, rng, count=10, radius=0.2):
    """Unit-speed states in ``|x| < radius``; unit-speed FS geodesics from there stay in ``|z| < 3`` for ``T = 1``."""
    out = []
    for p in _ball_points(rng, np.zeros(metric.dim), radius, count):
        out.append(unit_state(metric, p, rng.normal(size=metric.dim)))
    return out


def criterion_7(seed=SEED):
    def run():
        rng = np.random.default_rng(seed)
        model, pair, _ = fs_pair()
        metric = model.metric
        cfg = IntegratorConfig(1e-10, 1e-10)
        ts = (0.0, 0.25, 0.5, 0.75, 1.0)
        worst_it, worst_lin, worst_neg = 0.0, 0.0, np.inf
        x = [ScalarField.var(i) for i in range(metric.dim)]
        bump = 1.0 + x[0] * x[0] + 0.5 * x[3]
        negative = MatrixField(metric, [[bump if i == j else 0.0 for j in range(metric.dim)]
                                        for i in range(metric.dim)])
        for state in conservation_starts(metric, rng):
            trace = geodesic(metric, state, 1.0, cfg)
            drift = monitor_integrals(trace, pair, ts)
            worst_it = max(worst_it, max(drift[f"I_{t:g}"] for t in ts))
            worst_lin = max(worst_lin, drift["linear"])
            trace.channels.clear()
            neg = monitor_integrals(trace, negative, ts, linear=False)
            worst_neg = min(worst_neg, max(neg.values()))
        out = {"max_It_drift": worst_it, "max_linear_drift": worst_lin,
               "negative_control_min_drift": worst_neg}
        return worst_it <= 1e-7 and worst_lin <= 1e-7 and worst_neg > 1e-3, out

    return _timed(7, "Conservation of the integrals along geodesics", run)


def criterion_8(seed=SEED, speed=0.1):
    def run():
        rng = np.random.default_rng(seed)
        model = fubini_study(2)
        metric = model.metric
        worst = 0.0
        for _ in range(10):
            v = rng.normal(size=metric.dim)
            v *= speed / np.linalg.norm(v)
            a, b = rng.uniform(-1, 1, 2)
            trace = jplanar(metric, CurveState(0.0, np.zeros(metric.dim), v), a, b, 2.0)
            worst = max(worst, max(complex_line_distance(x, np.zeros(metric.dim), v) for x in trace.x))
        return worst <= 1e-6, {"max_distance": worst, "initial_speed": speed}

    return _timed(8, "J-planar curves stay in complex lines", run)


def criterion_9(seed=SEED):
    def run():
        rng = np.random.default_rng(seed)
        model, pair, _ = fs_pair()
        metric = model.metric
        pts = model.chart.sample(rng, 20, 0.3)
        rep = property_P_check(pair, pts)
        d = pair.affine(*rep.renormalization)
        # geodesic started along Lambda
        x0 = pts[0]
        state = unit_state(metric, x0, lambda_vector(d, x0))
        trace = geodesic(metric, state, 1.0)
        angles = [a for a in (lambda_angle(d, s) for s in trace.states()) if a is not None]
        fac = []
        for i in range(5):
            s = unit_state(metric, pts[i + 1], rng.normal(size=metric.dim))
            t = float(rng.uniform(-1.0, 2.0))
            fac.append(factorization_residual(d, s, t, rep.m, rep.m_tilde))
        out = {"property_P": rep.to_dict(), "max_angle": max(angles), "angle_points": len(angles),
               "max_factorization": max(fac)}
        ok = rep.passed and max(angles) <= 1e-5 and max(fac) <= 1e-9
        return ok, out

    return _timed(9, "Property (P) and geodesics tangent to Lambda", run)


def tphi_setup(seed=SEED, radius=3.0):
    model = fubini_study(2, 1.0, radius)
    rng = np.random.default_rng(seed)
    pts = list(model.chart.sample(rng, 8, 0.08))
    basis = orthonormalize_basis(hermitian_pair_basis(model.metric, rng), pts)
    return model, basis, pts


def criterion_10(seed=SEED):
    def run():
        model, basis, pts = tphi_setup(seed)
        maps = model.maps
        eye = np.eye(len(basis))
        t_id = t_phi(PGLElement(np.eye(3)), basis, pts).matrix
        out = {"identity": float(np.abs(t_id - eye).max())}
        pairs = [("diag2", "unitary"), ("shear", "diag2"), ("unitary_rot", "shear")]
        law = 0.0
        for a, b in pairs:
            pa, pb = maps[a], maps[b]
            lhs = t_phi(pa @ pb, basis, pts).matrix
            rhs = t_phi(pa, basis, pts).matrix @ t_phi(pb, basis, pts).matrix
            law = max(law, float(np.abs(lhs - rhs).max()))
        out["representation_law"] = law
        phi = maps["diag2"]
        inv = float(np.abs(t_phi(phi.inverse(), basis, pts).matrix @ t_phi(phi, basis, pts).matrix - eye).max())
        out["inverse"] = inv
        idc, _ = coordinates(IdentityField(model.metric), basis, pts)
        fix = 0.0
        for name in ("unitary", "unitary_rot"):
            t = t_phi(maps[name], basis, pts).matrix
            fix = max(fix, float(np.abs(t @ idc - idc).max()))
        out["unitary_fixes_fs"] = fix
        ok = out["identity"] <= 1e-7 and law <= 1e-7 and inv <= 1e-7 and fix <= 1e-8
        return ok, out

    return _timed(10, "Representation on the solution space", run)


def criterion_11(seed=SEED):
    def run():
        rng = np.random.default_rng(seed)
        fs = fubini_study(2)
        fl = flat(2)
        pts = list(fs.chart.sample(rng, 5, 0.1))
        uni = classify_map(fs.maps["unitary"], fs.metric, pts)
        homo = classify_map(scaling_map(2, 2.0), fl.metric, list(fl.chart.sample(rng, 5, 0.1)))
        cp = classify_map(fs.maps["diag2"], fs.metric, pts)
        out = {"unitary": uni.to_dict(), "scaling": homo.to_dict(), "diag2": cp.to_dict()}
        ok = (uni.verdict == "isometry"
              and homo.verdict == "homothety" and abs(homo.homothety_constant - 4.0) <= 1e-8
              and cp.verdict == "c-projective" and cp.residuals["cprojective"] <= 1e-7
              and is_non_affine(cp))
        return ok, out

    return _timed(11, "Classification chain of maps", run)


def gk_setup(seed=SEED):
    """T_phi eigen-split for ``diag(2,1,1)`` on a chart large enough for the orbit."""
    model, basis, pts = tphi_setup(seed, radius=GK_RADIUS)
    phi = model.maps["diag2"]
    t = t_phi(phi, basis, pts)
    idc, _ = coordinates(IdentityField(model.metric), basis, pts)
    split = eigen_split(t, idc, basis)
    return model, phi, split


def criterion_12(seed=SEED):
    def run():
        model, phi, split = gk_setup(seed)
        x0 = np.array(GK_POINT)
        dyn = orbit_dynamics_check(phi, split, x0)
        gk = gk_asymptotics_check(phi, model.metric, x0, split.alpha, split.beta, dyn["m"],
                                  dyn["m_tilde"], range(3, 9))
        out = {"alpha": split.alpha, "beta": split.beta, "dynamics": dyn, "gk": gk}
        return dyn["max_error"] <= 1e-8 and gk["passed"], out

    return _timed(12, "Eigenvalue iteration and G(k) asymptotics", run)


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11, 12: criterion_12,
}


def run_suite(seed=SEED, numbers=None, echo=print):
    results = []
    for k, func in CRITERIA.items():
        if numbers is not None and k not in numbers:
            continue
        res = func(seed)
        if echo:
            echo(res.line())
        results.append(res)
    return results
