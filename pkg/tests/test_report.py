import json
import os

import numpy as np

from cproj_lab import __version__
from cproj_lab.manifest import parse_text
from cproj_lab.report import atomic_write_text, build_report, dumps, write_report


def test_floats_use_17_digits():
    x = 0.1 + 0.2
    text = dumps({"x": x})
    assert "0.30000000000000004" in text
    assert json.loads(text)["x"] == x


def test_integral_floats_stay_floats():
    assert dumps([1.0, 2]) == "[1.0, 2]"
    assert isinstance(json.loads(dumps(1e20)), float)


def test_numpy_and_special_values():
    data = {"a": np.arange(3.0), "b": np.float32(0.5), "c": np.int64(3), "d": float("nan"),
            "e": np.bool_(True), "f": None, "g": [], "h": {}}
    back = json.loads(dumps(data))
    assert back == {"a": [0.0, 1.0, 2.0], "b": 0.5, "c": 3, "d": "nan", "e": True, "f": None,
                    "g": [], "h": {}}


def test_roundtrip_is_exact(rng):
    vals = rng.normal(size=20).tolist()
    assert json.loads(dumps(vals)) == vals


def test_report_embeds_reproducibility_data(tmp_path):
    m = parse_text('{"model": "flat:n=2", "seed": 4}')
    rep = build_report("validate", m, {"r": 1.0}, True)
    assert rep["version"] == __version__
    assert rep["manifest_hash"] == m.digest()
    assert rep["seed"] == 4
    assert rep["tolerances"] == m.tolerances
    path = write_report(str(tmp_path), "validate", rep)
    assert json.loads(open(path).read())["passed"] is True


def test_atomic_write_leaves_no_temp(tmp_path):
    p = tmp_path / "sub" / "f.txt"
    atomic_write_text(str(p), "hello")
    assert p.read_text() == "hello"
    assert os.listdir(tmp_path / "sub") == ["f.txt"]
