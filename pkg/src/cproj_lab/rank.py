"""Numerical rank decisions with an explicit singular-value gap."""

from dataclasses import dataclass

import numpy as np

from .errors import IllConditioned

MIN_GAP = 1e3


@dataclass(frozen=True)
class RankResult:
    rank: int
    singular_values: np.ndarray
    gap: float

    def __iter__(self):
        # allows ``rank, sv = numeric_rank(...)``
        return iter((self.rank, self.singular_values))


def rank_from_singular_values(sv, rel_tol, check=True):
    sv = np.asarray(sv, dtype=float)
    if sv.size == 0 or sv[0] == 0.0:
        return RankResult(0, sv, float("inf"))
    keep = sv >= rel_tol * sv[0]
    rank = int(np.count_nonzero(keep))
    if rank == sv.size:
        gap = float("inf")
    else:
        dropped = sv[rank]
        gap = float("inf") if dropped == 0 else float(sv[rank - 1] / dropped)
    if check and gap < MIN_GAP:
        raise IllConditioned(
            f"no clean rank decision: gap ratio {gap:.3g} < {MIN_GAP:g} at rank {rank}"
        )
    return RankResult(rank, sv, gap)


def numeric_rank(m, rel_tol=1e-8, check=True):
    """Rank of ``m`` counting singular values above ``rel_tol * sigma_max``.

    Raises :class:`IllConditioned` when the retained/discarded ratio is
    below ``MIN_GAP`` (pass ``check=False`` to only report it).
    """
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    sv = np.linalg.svd(m, compute_uv=False) if m.size else np.zeros(0)
    return rank_from_singular_values(sv, rel_tol, check=check)
