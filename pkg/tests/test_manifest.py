import json

import pytest

from cproj_lab.manifest import DEFAULT_TOLERANCES, ManifestError, load, parse_text


def test_defaults_materialized():
    m = parse_text('{"model": "flat:n=2"}')
    assert m.seed == 0
    assert m.tolerances == DEFAULT_TOLERANCES
    assert m.section("curve")["T"] == 1.0
    assert m.model().n == 2


def test_seed_and_overrides():
    m = parse_text('{"model": "fs:n=2", "seed": 3}', seed=11, overrides={"kahler": 1e-6})
    assert m.seed == 11
    assert m.tolerances["kahler"] == 1e-6
    with pytest.raises(ManifestError):
        parse_text('{"model": "fs:n=2"}', overrides={"nope": 1.0})
    with pytest.raises(ManifestError):
        parse_text('{"model": "fs:n=2"}', overrides={"kahler": 0.0})


def test_unknown_key_rejected_with_line():
    text = '{\n  "model": "flat:n=2",\n  "colour": "red"\n}'
    with pytest.raises(ManifestError) as info:
        parse_text(text, path="m.json")
    assert str(info.value).startswith("m.json:1:")
    assert "colour" in str(info.value)


def test_nested_error_line():
    text = '{\n  "model": "flat:n=2",\n  "curve": {\n    "T": "long"\n  }\n}'
    with pytest.raises(ManifestError) as info:
        parse_text(text, path="m.json")
    assert info.value.line == 4


def test_invalid_json_line():
    with pytest.raises(ManifestError) as info:
        parse_text('{\n  "model": "flat:n=2",\n  oops\n}', path="m.json")
    assert info.value.line == 3


def test_unknown_tolerance_rejected():
    with pytest.raises(ManifestError):
        parse_text('{"model": "flat:n=2", "tolerances": {"speed": 1}}')


def test_bad_model_name():
    m = parse_text('{"model": "sphere:n=2"}')
    with pytest.raises(ManifestError):
        m.model()


def test_inline_model():
    m = parse_text(json.dumps({"model": {"n": 2, "potential": "x1^2+x2^2+x3^2+x4^2",
                                         "domain": {"lo": -2, "hi": 2}}}))
    model = m.model()
    assert model.chart.hi == 2.0


def test_digest_stable_and_sensitive():
    a = parse_text('{"model": "flat:n=2", "seed": 1}')
    b = parse_text('{"seed": 1, "model": "flat:n=2"}')
    c = parse_text('{"model": "flat:n=2", "seed": 2}')
    assert a.digest() == b.digest() != c.digest()


def test_missing_file(tmp_path):
    with pytest.raises(ManifestError):
        load(str(tmp_path / "absent.json"))
