import numpy as np
import pytest

from cproj_lab.errors import IllConditioned
from cproj_lab.rank import numeric_rank


def test_identity():
    r = numeric_rank(np.eye(3))
    assert r.rank == 3


def test_zero_matrix():
    assert numeric_rank(np.zeros((3, 4))).rank == 0


def test_small_singular_value_dropped():
    r = numeric_rank(np.diag([1.0, 1e-12]), 1e-8)
    assert r.rank == 1
    assert r.gap == pytest.approx(1e12)


def test_unpacks_as_pair():
    rank, sv = numeric_rank(np.diag([2.0, 1.0]))
    assert rank == 2
    assert sv.tolist() == [2.0, 1.0]


def test_ambiguous_gap_raises():
    with pytest.raises(IllConditioned):
        numeric_rank(np.diag([1.0, 2e-8, 5e-9]), 1e-8)
    assert numeric_rank(np.diag([1.0, 2e-8, 5e-9]), 1e-8, check=False).rank == 2


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        numeric_rank(np.array([[np.nan]]))
