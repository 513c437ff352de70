"""Command-line entry point: ``cproj-lab <subcommand> --manifest <path> --out <dir>``.

Exit codes: 0 when every gated check passes, 2 when a check fails, 1 on input errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .cproj import weyl, weyl_norm
from .dynamics import (
    IntegratorConfig,
    complex_line_distance,
    geodesic,
    jplanar,
    monitor_integrals,
    unit_state,
)
from .errors import BoundaryExit, CProjError, DegenerateInput, DomainError, StepLimit
from .fields import IdentityField, MatrixField, PairSolution
from .kahler import MetricField, chsc_fit, curvature_bundle, kahler_validate
from .manifest import ManifestError, load
from .mobility import (
    degree_of_mobility,
    eigenstructure,
    property_P_check,
    relative_residual,
)
from .report import build_report, dumps, write_report
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
    t_phi,
    tphi_spectral_report,
)

log = logging.getLogger("cproj_lab")

SUBCOMMANDS = ("validate", "curvature", "mobility", "geodesic", "jplanar", "integrals", "transform", "suite")


class InputError(Exception):
    pass


def _threads():
    raw = os.environ.get("CPROJ_LAB_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise InputError(f"CPROJ_LAB_THREADS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise InputError("CPROJ_LAB_THREADS must be a positive integer")
    return value


def _point(manifest, model, key_section=None, key="x0"):
    sec = manifest.section(key_section) if key_section else manifest.data
    raw = sec.get(key) if key_section else manifest.data.get("point")
    if raw is None:
        return None
    x = np.asarray(raw, dtype=float)
    if x.shape != (model.chart.dim,):
        raise InputError(f"point has {x.size} coordinates, expected {model.chart.dim}")
    if not model.chart.contains(x):
        raise InputError(f"point {x.tolist()} lies outside the chart domain")
    return x


def _rng(manifest):
    return np.random.default_rng(manifest.seed)


# -- subcommands ----------------------------------------------------------------------


def cmd_validate(manifest, model, out_dir):
    tol = manifest.tolerances["kahler"]
    pts = model.chart.sample(_rng(manifest), manifest.data["samples"] if "samples" in manifest.data else 100)
    rep = kahler_validate(model.metric, pts, tol)
    return {"model": model.describe(), "report": rep.to_dict()}, rep.passed, [
        f"kahler_validate: {'passed' if rep.passed else 'FAILED'} on {len(pts)} points"]


def cmd_curvature(manifest, model, out_dir):
    tol = manifest.tolerances["decomposition"]
    x = _point(manifest, model)
    pts = [x] if x is not None else list(model.chart.sample(_rng(manifest), manifest.data["samples"], 0.5))
    rows, worst = [], 0.0
    for p in pts:
        bundle = curvature_bundle(model.metric, p)
        data = weyl(bundle)
        mu, resid = chsc_fit(model.metric, p, bundle)
        err = data.reconstruction_error()
        worst = max(worst, err)
        rows.append({
            "point": p,
            "riemann_norm": float(np.linalg.norm(bundle.riemann)),
            "ricci": bundle.ricci,
            "mu": mu,
            "chsc_residual": resid,
            "weyl_norm": weyl_norm(model.metric, p, data=data),
            "decomposition_error": err,
        })
    passed = worst <= tol
    return {"model": model.describe(), "points": rows, "max_decomposition_error": worst}, passed, [
        f"curvature at {len(rows)} points; max decomposition error {worst:.3g}",
        f"max weyl_norm {max(r['weyl_norm'] for r in rows):.3g}"]


def cmd_mobility(manifest, model, out_dir):
    sec = manifest.section("mobility")
    tol = manifest.tolerances["mobility_residual"]
    rng = _rng(manifest)
    x0 = _point(manifest, model)
    if x0 is None:
        x0 = model.chart.sample(rng, 1, 0.3)[0]
    res = degree_of_mobility(model.metric, x0, k_max=sec["k_max"], rng=rng)
    worst = 0.0
    for sol in res.basis:
        for _ in range(sec["residual_points"]):
            v = rng.normal(size=model.chart.dim)
            p = x0 + sol.radius * rng.uniform() ** (1 / len(v)) * v / np.linalg.norm(v)
            if model.chart.contains(p):
                worst = max(worst, relative_residual(sol, p))
    results = {"model": model.describe(), "degree": res.degree, "diagnostics": res.diagnostics(),
               "max_basis_residual": worst}
    passed = worst <= tol
    if "expected_degree" in sec:
        results["expected_degree"] = sec["expected_degree"]
        passed = passed and res.degree == sec["expected_degree"]
    generic = res.basis.generic(rng)
    try:
        results["eigenstructure"] = eigenstructure(generic, x0, probe_radius=0.25 * generic.radius,
                                                   rng=rng).to_dict()
    except CProjError as exc:
        results["eigenstructure"] = {"error": f"{type(exc).__name__}: {exc}"}
    try:
        pts = [x0 + 0.25 * generic.radius * rng.uniform(-1, 1, model.chart.dim)
               for _ in range(sec["property_samples"])]
        results["property_P"] = property_P_check(generic, pts).to_dict()
    except CProjError as exc:
        results["property_P"] = {"error": f"{type(exc).__name__}: {exc}"}
    basis_path = write_report(out_dir, "mobility_basis", res.basis.to_dict())
    results["basis_file"] = os.path.basename(basis_path)
    return results, passed, [f"degree of mobility {res.degree}", f"max basis residual {worst:.3g}"]


def _curve_start(manifest, model, rng):
    sec = manifest.section("curve")
    x0 = _point(manifest, model, "curve", "x0")
    if x0 is None:
        x0 = np.zeros(model.chart.dim) if model.chart.contains(np.zeros(model.chart.dim)) \
            else model.chart.sample(rng, 1, 0.2)[0]
    v0 = sec.get("v0")
    if v0 is None:
        v0 = rng.normal(size=model.chart.dim)
    v0 = np.asarray(v0, dtype=float)
    if v0.shape != (model.chart.dim,) or not np.any(v0):
        raise InputError(f"v0 must be a non-zero vector with {model.chart.dim} entries")
    state = unit_state(model.metric, x0, v0)
    state.v = state.v * sec["speed"]
    return state


def _config(manifest):
    tol = manifest.tolerances
    return IntegratorConfig(tol["integrator_abs"], tol["integrator_rel"], manifest.section("curve")["max_steps"])


def _run_curve(kind, manifest, model, out_dir):
    sec = manifest.section("curve")
    rng = _rng(manifest)
    state = _curve_start(manifest, model, rng)
    cfg = _config(manifest)
    status = "complete"
    try:
        if kind == "geodesic":
            trace = geodesic(model.metric, state, sec["T"], cfg)
        else:
            trace = jplanar(model.metric, state, sec["alpha"], sec["beta"], sec["T"], cfg)
            trace.monitor("line_distance", lambda s: complex_line_distance(s.x, state.x, state.v))
    except (BoundaryExit, StepLimit) as exc:
        trace = exc.trace
        status = trace.status if trace is not None else "boundary"
        if trace is not None and kind == "geodesic" and len(trace) > 0:
            trace.monitor("energy", lambda s: float(s.v @ model.metric.value(s.x) @ s.v))
        log.warning("%s", exc)
    results = {"model": model.describe(), "status": status, "x0": state.x, "v0": state.v,
               "steps": 0 if trace is None else len(trace)}
    passed = status == "complete"
    if trace is not None:
        csv_path = os.path.join(out_dir, f"{kind}.csv")
        trace.write_csv(csv_path)
        drift = trace.drift_summary()
        results["drift"] = drift
        results["trace_file"] = os.path.basename(csv_path)
        trace.write_sidecar(os.path.join(out_dir, f"{kind}_trace.json"),
                            {"x0": state.x.tolist(), "v0": state.v.tolist()})
        if kind == "geodesic":
            passed = passed and drift.get("energy", 0.0) <= manifest.tolerances["energy_drift"]
        else:
            results["max_line_distance"] = float(np.max(trace.channels["line_distance"]))
    return results, passed, [f"{kind}: {status}, {results['steps']} steps"]


def cmd_geodesic(manifest, model, out_dir):
    return _run_curve("geodesic", manifest, model, out_dir)


def cmd_jplanar(manifest, model, out_dir):
    return _run_curve("jplanar", manifest, model, out_dir)


def _solution(spec, model):
    kind = spec["type"]
    if kind == "identity":
        return IdentityField(model.metric)
    if kind == "pair":
        if "matrix" not in spec:
            raise InputError("pair solution needs a matrix")
        m = PGLElement.from_pairs(spec["matrix"])
        if m.n != model.n:
            raise InputError(f"matrix acts on CP^{m.n}, model has n={model.n}")
        other = MetricField(model.chart, potential=pgl_pullback_potential(m.matrix), name="pullback")
        return PairSolution(model.metric, other)
    if "entries" not in spec:
        raise InputError("entries solution needs an entries matrix")
    return MatrixField(model.metric, spec["entries"])


def cmd_integrals(manifest, model, out_dir):
    sec = manifest.section("integrals")
    tol = manifest.tolerances["integral_drift"]
    rng = _rng(manifest)
    field_ = _solution(sec["solution"], model)
    cfg = _config(manifest)
    starts = []
    for _ in range(sec["count"]):
        v = rng.normal(size=model.chart.dim)
        p = sec["start_radius"] * rng.uniform() ** (1 / len(v)) * v / np.linalg.norm(v)
        if not model.chart.contains(p):
            raise InputError("start_radius reaches outside the chart")
        starts.append(unit_state(model.metric, p, rng.normal(size=model.chart.dim)))

    def one(state):
        trace = geodesic(model.metric, state, sec["T"], cfg)
        return monitor_integrals(trace, field_, sec["t_grid"])

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        drifts = list(pool.map(one, starts))
    table = [{"x0": s.x, "v0": s.v, "drift": d} for s, d in zip(starts, drifts)]
    worst = {k: max(d[k] for d in drifts) for k in drifts[0] if k != "energy"}
    passed = all(v <= tol for v in worst.values())
    return {"model": model.describe(), "curves": table, "max_drift": worst}, passed, [
        f"max I_t drift {max(v for k, v in worst.items() if k.startswith('I_')):.3g}",
        f"max linear drift {worst.get('linear', 0.0):.3g}"]


def cmd_transform(manifest, model, out_dir):
    sec = manifest.section("transform")
    tol = manifest.tolerances
    rng = _rng(manifest)
    if "matrix" not in sec:
        raise InputError("transform needs transform.matrix")
    phi = PGLElement.from_pairs(sec["matrix"])
    if phi.n != model.n:
        raise InputError(f"matrix acts on CP^{phi.n}, model has n={model.n}")
    pts = list(model.chart.sample(rng, sec["samples"], sec["sample_scale"]))
    cls = classify_map(phi, model.metric, pts)
    results = {"model": model.describe(), "map": phi.describe(), "classification": cls.to_dict(),
               "non_affine": is_non_affine(cls)}
    lines = [f"classification: {cls.verdict}"]
    passed = cls.verdict != "none"
    if model.name != "fs":
        results["t_phi"] = {"skipped": "the representation needs a closed-form basis (fs models only)"}
        return results, passed, lines
    basis = orthonormalize_basis(hermitian_pair_basis(model.metric, rng), pts)
    t = t_phi(phi, basis, pts, tol["expression"])
    results["t_phi"] = t.to_dict()
    results["spectral_report"] = tphi_spectral_report(t, len(basis), is_non_affine(cls))
    lines.append(f"T_phi: det {t.det:.6g}, expression residual {t.residual:.3g}")
    if sec["gk"]:
        x0 = _point(manifest, model, "transform", "x0")
        if x0 is None:
            raise InputError("transform.gk needs transform.x0")
        idc, _ = coordinates(IdentityField(model.metric), basis, pts)
        try:
            split = eigen_split(t, idc, basis)
        except ValueError as exc:
            results["gk"] = {"error": str(exc)}
            return results, False, lines + [f"G(k): {exc}"]
        lo, hi = sec["k_range"]
        dyn = orbit_dynamics_check(phi, split, x0)
        gk = gk_asymptotics_check(phi, model.metric, x0, split.alpha, split.beta, dyn["m"], dyn["m_tilde"],
                                  range(lo, hi + 1), tol["gk_slope"])
        results["dynamics"] = dyn
        results["gk"] = gk
        passed = passed and gk["passed"]
        lines.append(f"G(k): smallest slope {gk['fitted_smallest']:.6g} vs {gk['expected_smallest']:.6g}")
    return results, passed, lines


def cmd_suite(manifest, model, out_dir):
    from .suite import run_suite

    lines = []
    results = run_suite(manifest.seed, manifest.section("suite")["criteria"], echo=lines.append)
    # timings go to stdout only so the report stays reproducible
    data = {str(r.number): {k: v for k, v in r.to_dict().items() if k != "seconds"} for r in results}
    return {"criteria": data}, all(r.passed for r in results), lines


HANDLERS = {
    "validate": cmd_validate,
    "curvature": cmd_curvature,
    "mobility": cmd_mobility,
    "geodesic": cmd_geodesic,
    "jplanar": cmd_jplanar,
    "integrals": cmd_integrals,
    "transform": cmd_transform,
    "suite": cmd_suite,
}


# -- entry point ---------------------------------------------------------------------------


def _parse_overrides(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise InputError(f"--tol-override expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise InputError(f"--tol-override value for {k!r} is not a number") from None
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="cproj-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--manifest", required=True, help="UTF-8 JSON manifest")
    parser.add_argument("--out", required=True, help="output directory for reports and traces")
    parser.add_argument("--seed", type=int, default=None, help="override the manifest seed")
    parser.add_argument("--tol-override", action="append", metavar="KEY=VALUE",
                        help="override one tolerance (repeatable)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _threads()
        manifest = load(args.manifest, args.seed, _parse_overrides(args.tol_override))
        model = manifest.model()
        os.makedirs(args.out, exist_ok=True)
        results, passed, lines = HANDLERS[args.subcommand](manifest, model, args.out)
    except (ManifestError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DegenerateInput, DomainError) as exc:
        print(f"error: {args.manifest}:1: {exc}", file=sys.stderr)
        return 1
    except CProjError as exc:
        report = build_report(args.subcommand, manifest, {"error": f"{type(exc).__name__}: {exc}"}, False)
        write_report(args.out, args.subcommand, report)
        print(f"check failed: {type(exc).__name__}: {exc}", file=stdout)
        return 2
    report = build_report(args.subcommand, manifest, results, passed)
    path = write_report(args.out, args.subcommand, report)
    for line in lines:
        print(line, file=stdout)
    print(f"{'PASS' if passed else 'FAIL'}: report written to {path}", file=stdout)
    return 0 if passed else 2


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()


__all__ = ["main", "run", "build_parser", "dumps"]
