import numpy as np
import pytest

from cproj_lab.cproj import weyl_norm
from cproj_lab.kahler import curvature_bundle, kahler_validate
from cproj_lab.models import CATALOG, flat, from_spec, fs_perturbed, fubini_study, product


@pytest.mark.parametrize("spec", [
    "flat:n=2", "fs:n=2,c=1", "fs:n=3,c=2", "fs_pert:n=2,eps=0.1,seed=7",
    "product:fs:n=1,c=1+fs:n=1,c=1", "product:flat:n=1+fs:n=1",
])
def test_catalog_models_are_kahler(spec):
    model = from_spec(spec)
    rng = np.random.default_rng(5)
    pts = model.chart.sample(rng, 100)
    rep = kahler_validate(model.metric, pts)
    assert rep.passed, rep.to_dict()


def test_spec_parsing():
    m = from_spec("fs:n=3,c=2.5")
    assert (m.name, m.n, m.params["c"]) == ("fs", 3, 2.5)
    assert from_spec("flat").n == 2


@pytest.mark.parametrize("spec", [
    "sphere:n=2", "fs:n=2,q=1", "fs:n=2,c", "product:fs:n=1", "product:fs:n=1+torus:n=1",
    "fs:n=2,c=-1", "flat:n=9",
])
def test_bad_specs(spec):
    with pytest.raises(ValueError):
        from_spec(spec)


def test_flat_curvature_zero():
    m = flat(2)
    assert np.abs(curvature_bundle(m.metric, np.array([1.0, 2.0, 3.0, 4.0])).riemann).max() == 0.0


def test_fs_origin_value():
    assert np.allclose(fubini_study(2, 3.0).metric.value(np.zeros(4)), 3 * np.eye(4))


def test_fs_pert_zero_eps_is_fs():
    a = fs_perturbed(2, 0.0, 7)
    b = fubini_study(2)
    x = np.array([0.2, 0.1, -0.3, 0.2])
    assert np.array_equal(a.metric.value(x), b.metric.value(x))


def test_fs_pert_has_weyl():
    m = fs_perturbed(2, 0.1, 7)
    assert weyl_norm(m.metric, np.array([0.3, 0.2, -0.25, 0.15])) > 1e-4
    with pytest.raises(ValueError):
        fs_perturbed(2, 0.5)


def test_flat_times_flat_is_flat():
    m = product(flat(1, allow_small=True), flat(1, allow_small=True))
    assert np.array_equal(m.metric.value(np.array([0.3, 1.0, -2.0, 0.5])), np.eye(4))


def test_product_blocks():
    m = from_spec("product:fs:n=1,c=1+fs:n=1,c=2")
    g = m.metric.value(np.array([0.3, 0.1, -0.2, 0.4]))
    assert np.abs(g[:2, 2:]).max() == 0.0
    assert np.allclose(g[:2, :2], np.eye(2) / (1 + 0.1) ** 2)
    assert np.allclose(g[2:, 2:], 2 * np.eye(2) / (1 + 0.2) ** 2)


def test_describe_is_serializable():
    import json

    for name in CATALOG:
        spec = "product:fs:n=1+flat:n=1" if name == "product" else name
        json.dumps(from_spec(spec).describe())
