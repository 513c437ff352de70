"""Manifest loading: JSON parsing, schema validation and default materialization."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import jsonschema

from .chart import Chart
from .kahler import MetricField
from .models import Model, from_spec

DEFAULT_TOLERANCES = {
    "kahler": 1e-9,
    "decomposition": 1e-12,
    "mobility_residual": 1e-9,
    "killing": 1e-7,
    "energy_drift": 1e-8,
    "integral_drift": 1e-7,
    "integrator_abs": 1e-10,
    "integrator_rel": 1e-10,
    "isometry": 1e-8,
    "cprojective": 1e-7,
    "expression": 1e-7,
    "gk_slope": 0.05,
}

DEFAULTS = {
    "seed": 0,
    "samples": 20,
    "mobility": {"k_max": 5, "residual_points": 50, "property_samples": 20},
    "curve": {"T": 1.0, "alpha": 0.0, "beta": 0.0, "speed": 1.0, "max_steps": 200000},
    "integrals": {"solution": {"type": "identity"}, "t_grid": [0.0, 0.25, 0.5, 0.75, 1.0],
                  "count": 10, "T": 1.0, "start_radius": 0.2},
    "transform": {"samples": 8, "sample_scale": 0.08, "gk": False, "k_range": [3, 8]},
    "suite": {"criteria": list(range(1, 13))},
}


class ManifestError(ValueError):
    """Input error with a ``path:line`` anchor."""

    def __init__(self, message, path="<manifest>", line=1):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def _schema():
    text = resources.files("cproj_lab").joinpath("data/manifest.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _line_of(text, path):
    """Best-effort source line of a JSON path (line of the last key mentioned)."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return 1
    needle = json.dumps(keys[-1]) + ":"
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line.replace('" :', '":'):
            return i
    return 1


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class Manifest:
    data: dict
    path: str = "<manifest>"

    @property
    def seed(self):
        return int(self.data["seed"])

    @property
    def tolerances(self):
        return self.data["tolerances"]

    def section(self, name):
        return self.data.get(name, {})

    def digest(self):
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def model(self) -> Model:
        return build_model(self.data["model"], self.path)


def materialize(raw, seed=None, overrides=None, path="<manifest>"):
    data = _merge(DEFAULTS, raw)
    data["tolerances"] = _merge(DEFAULT_TOLERANCES, raw.get("tolerances", {}))
    unknown = set(data["tolerances"]) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ManifestError(f"unknown tolerance key(s) {sorted(unknown)}", path)
    if seed is not None:
        data["seed"] = int(seed)
    for key, value in (overrides or {}).items():
        if key not in DEFAULT_TOLERANCES:
            raise ManifestError(f"--tol-override: unknown tolerance {key!r}", path)
        if not value > 0:
            raise ManifestError(f"--tol-override: tolerance {key!r} must be positive", path)
        data["tolerances"][key] = float(value)
    return Manifest(data, path)


def parse_text(text, path="<manifest>", seed=None, overrides=None) -> Manifest:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"invalid JSON: {exc.msg} (column {exc.colno})", path, exc.lineno) from None
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ManifestError(f"schema violation at {where}: {err.message}", path,
                            _line_of(text, list(err.absolute_path)))
    return materialize(raw, seed, overrides, path)


def load(path, seed=None, overrides=None) -> Manifest:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest: {exc.strerror}", path) from None
    return parse_text(text, path, seed, overrides)


def build_model(spec, path="<manifest>") -> Model:
    if isinstance(spec, str):
        try:
            return from_spec(spec)
        except ValueError as exc:
            raise ManifestError(f"model {spec!r}: {exc}", path) from None
    n = int(spec["n"])
    dom = spec.get("domain", {})
    try:
        chart = Chart(n, float(dom.get("lo", -10.0)), float(dom.get("hi", 10.0)), dom.get("radius"))
        metric = MetricField(chart, potential=spec.get("potential"), components=spec.get("components"),
                             scale=float(spec.get("scale", 1.0)), name=spec.get("name", "inline"))
    except ValueError as exc:
        raise ManifestError(f"inline model: {exc}", path) from None
    return Model("inline", {"n": n}, chart, metric, {}, potential=metric.potential)
