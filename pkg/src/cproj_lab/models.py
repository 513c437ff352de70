"""Built-in manifolds and maps used by tests, the suite and the CLI."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .chart import MAX_N, Chart
from .errors import DomainError, NotPositiveDefinite
from .expr import ScalarField, abs2, shift_variables
from .kahler import MetricField, check_positive_definite
from .transform import MapSpec, PGLElement, scaling_map

log = logging.getLogger(__name__)

FS_RADIUS = 3.0
FLAT_BOX = 10.0
SHRINK_FACTOR = 0.8
PD_PROBES = 200


@dataclass
class Model:
    name: str
    params: dict
    chart: Chart
    metric: MetricField
    maps: Dict[str, MapSpec] = field(default_factory=dict)
    notes: list = field(default_factory=list)
    potential: Optional[ScalarField] = None

    @property
    def n(self):
        return self.chart.n

    def describe(self):
        return {
            "name": self.name,
            "params": self.params,
            "domain": self.chart.to_dict(),
            "metric": self.metric.describe(),
            "maps": sorted(self.maps),
            "notes": list(self.notes),
        }


def _check_n(n, lo=2, hi=MAX_N):
    if not (lo <= n <= hi):
        raise ValueError(f"complex dimension {n} outside [{lo}, {hi}]")


def flat(n=2, box=FLAT_BOX, allow_small=False):
    """Flat space with potential ``|z|^2`` on the box ``[-box, box]^{2n}``."""
    _check_n(n, 1 if allow_small else 2)
    chart = Chart(n, -box, box, allow_small=allow_small)
    pot = abs2(n)
    metric = MetricField(chart, potential=pot, name=f"flat{n}")
    maps = {"scale2": scaling_map(n, 2.0)} if n >= 1 else {}
    return Model("flat", {"n": n}, chart, metric, maps, potential=pot)


def fs_potential(n, offset=0):
    return ScalarField("log", (1.0 + abs2(n, offset),))


def canonical_maps(n):
    """``diag(2, 1, ..., 1)``, two unitary elements and a shear, as PGL elements."""
    size = n + 1
    d = np.eye(size, dtype=complex)
    d[0, 0] = 2.0
    theta = 0.7
    u = np.eye(size, dtype=complex)
    c, s = np.cos(theta), np.sin(theta)
    u[0, 0], u[0, 1], u[1, 0], u[1, 1] = c, -s, s, c
    u[size - 1, size - 1] = np.exp(0.3j)
    maps = {
        "diag2": PGLElement(d),
        "unitary": PGLElement(u),
        "shear": PGLElement(np.eye(size) + 0.2 * np.eye(size, k=1)),
    }
    if n >= 2:
        # fixes the origin, so orbits of chart points stay bounded
        rot = np.eye(size, dtype=complex)
        a, b = np.cos(1.1), np.sin(1.1)
        rot[1:3, 1:3] = [[a, -b * np.exp(0.4j)], [b * np.exp(-0.4j), a]]
        maps["unitary_rot"] = PGLElement(rot)
    return maps


def fubini_study(n=2, c=1.0, radius=FS_RADIUS, allow_small=False):
    """``c * log(1 + |z|^2)`` on the ball ``|z| < radius`` (``g(0) = c Id``)."""
    _check_n(n, 1 if allow_small else 2, 4 if not allow_small else MAX_N)
    if c <= 0:
        raise ValueError("FS scale must be positive")
    chart = Chart(n, -radius, radius, radius=radius, allow_small=allow_small)
    pot = fs_potential(n)
    metric = MetricField(chart, potential=pot, scale=c, name=f"fs{n}")
    maps = canonical_maps(n) if n >= 1 else {}
    return Model("fs", {"n": n, "c": float(c), "radius": float(radius)}, chart, metric, maps,
                 potential=c * pot if c != 1.0 else pot)


def random_perturbation(n, rng, terms=3, degree=4):
    """Sum of random monomials of degree 3..``degree`` in ``(u, v)``; never pluriharmonic in practice."""
    dim = 2 * n
    out = None
    for _ in range(terms):
        coef = float(rng.uniform(0.5, 1.0) * rng.choice([-1.0, 1.0]))
        mono = ScalarField.const(coef)
        deg = int(rng.integers(3, degree + 1))
        for _ in range(deg):
            mono = mono * ScalarField.var(int(rng.integers(dim)))
        out = mono if out is None else out + mono
    return out


def _pd_on_chart(metric, chart, rng):
    pts = chart.sample(rng, PD_PROBES)
    try:
        for p in pts:
            check_positive_definite(metric.value(p), p)
    except (NotPositiveDefinite, DomainError):
        return False
    return True


def fs_perturbed(n=2, eps=0.1, seed=7, radius=1.0, max_shrinks=10):
    """FS plus ``eps`` times a seeded polynomial whose Levi form is not zero.

    The domain starts as ``|z| < radius`` and shrinks until positivity holds at
    the probe points; every shrink is recorded in ``notes``.
    """
    _check_n(n, 2, 4)
    if not (0.0 <= eps <= 0.3):
        raise ValueError("eps must lie in [0, 0.3]")
    rng = np.random.default_rng(seed)
    pert = random_perturbation(n, rng)
    base = fs_potential(n)
    pot = base if eps == 0.0 else base + eps * pert
    notes = []
    chart = Chart(n, -radius, radius, radius=radius)
    metric = MetricField(chart, potential=pot, name=f"fs_pert{n}")
    probe = np.random.default_rng(seed + 1)
    shrinks = 0
    while not _pd_on_chart(metric, chart, probe):
        if shrinks >= max_shrinks:
            raise NotPositiveDefinite("perturbed metric is not positive definite after shrinking")
        chart = chart.shrink(SHRINK_FACTOR)
        metric = metric.with_chart(chart)
        shrinks += 1
        notes.append(f"domain shrunk to radius {chart.radius:.6g} (not positive definite)")
        log.info(notes[-1])
    params = {"n": n, "eps": float(eps), "seed": int(seed), "radius": float(chart.radius),
              "perturbation": str(pert)}
    return Model("fs_pert", params, chart, metric, canonical_maps(n), notes, potential=pot)


def product(first: Model, second: Model):
    """Block-diagonal product; the potential is the sum in separate variables."""
    n = first.n + second.n
    _check_n(n, 2)
    if first.potential is None or second.potential is None:
        raise ValueError("products need potential-defined factors")
    lo = max(first.chart.lo, second.chart.lo)
    hi = min(first.chart.hi, second.chart.hi)
    radii = [r for r in (first.chart.radius, second.chart.radius) if r is not None]
    chart = Chart(n, lo, hi, radius=min(radii) if radii else None)
    pot = first.potential + shift_variables(second.potential, 2 * first.n)
    metric = MetricField(chart, potential=pot, name=f"{first.metric.name}x{second.metric.name}")
    return Model("product", {"factors": [first.name, second.name], "first": first.params,
                             "second": second.params}, chart, metric, {}, potential=pot)


def _factor(name, params):
    if name == "fs":
        return fubini_study(int(params.get("n", 1)), float(params.get("c", 1.0)),
                            float(params.get("radius", FS_RADIUS)), allow_small=True)
    if name == "flat":
        return flat(int(params.get("n", 1)), float(params.get("box", FLAT_BOX)), allow_small=True)
    raise ValueError(f"unknown product factor {name!r}")


def parse_params(text):
    out = {}
    if not text:
        return out
    for item in text.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise ValueError(f"model parameter {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


MODEL_KEYS = {
    "flat": {"n", "box"},
    "fs": {"n", "c", "radius"},
    "fs_pert": {"n", "eps", "seed", "radius"},
}


def _check_keys(name, params):
    extra = set(params) - MODEL_KEYS[name]
    if extra:
        raise ValueError(f"unknown parameter(s) {sorted(extra)} for model {name!r}")


def from_spec(spec: str) -> Model:
    """Build a model from ``name:key=value,...``.

    Products are written ``product:fs:n=1,c=1+fs:n=1,c=1``.
    """
    spec = spec.strip()
    name, _, rest = spec.partition(":")
    if name == "product":
        parts = rest.split("+")
        if len(parts) != 2:
            raise ValueError("product needs exactly two factors joined by '+'")
        factors = []
        for p in parts:
            fname, _, ftext = p.partition(":")
            params = parse_params(ftext)
            if fname not in ("fs", "flat"):
                raise ValueError(f"unknown product factor {fname!r}")
            _check_keys(fname, params)
            factors.append(_factor(fname, params))
        return product(*factors)
    if name not in MODEL_KEYS:
        raise ValueError(f"unknown model {name!r}")
    params = parse_params(rest)
    _check_keys(name, params)
    if name == "flat":
        return flat(int(params.get("n", 2)), float(params.get("box", FLAT_BOX)))
    if name == "fs":
        return fubini_study(int(params.get("n", 2)), float(params.get("c", 1.0)),
                            float(params.get("radius", FS_RADIUS)))
    return fs_perturbed(int(params.get("n", 2)), float(params.get("eps", 0.1)),
                        int(params.get("seed", 7)), float(params.get("radius", 1.0)))


CATALOG = ("flat", "fs", "fs_pert", "product")
