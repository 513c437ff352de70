"""Deterministic JSON emission with 17 significant digits for every float."""

from __future__ import annotations

import json
import math
import os
import tempfile

import numpy as np

from . import __version__

TOOL = "cproj-lab"


def _scalar(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        text = format(x, ".17g")
        # keep floats distinguishable from integers on re-read
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(x, complex):
        return f"[{_scalar(x.real)}, {_scalar(x.imag)}]"
    return json.dumps(str(x))


def dumps(obj, indent=2, _level=0):
    """Serialize ``obj`` (dicts, lists, arrays, numbers, strings)."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    return _scalar(obj)


def atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_report(subcommand, manifest, results, passed, extra=None):
    report = {
        "tool": TOOL,
        "version": __version__,
        "subcommand": subcommand,
        "manifest_hash": manifest.digest(),
        "seed": manifest.seed,
        "tolerances": manifest.tolerances,
        "manifest": manifest.data,
        "passed": bool(passed),
        "results": results,
    }
    if extra:
        report.update(extra)
    return report


def write_report(out_dir, name, report):
    path = os.path.join(out_dir, f"{name}.json")
    atomic_write_text(path, dumps(report) + "\n")
    return path
