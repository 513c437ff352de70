"""Pointwise tensors with an explicit variance signature."""

from dataclasses import dataclass, field

import numpy as np

from .errors import SignatureError

UP = "u"
DOWN = "d"


@dataclass(frozen=True)
class TensorValue:
    """Dense components; ``signature[k]`` is ``"u"`` or ``"d"`` for slot ``k``."""

    signature: str
    components: np.ndarray
    base_point: np.ndarray = field(default=None)

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        object.__setattr__(self, "components", comps)
        if any(s not in (UP, DOWN) for s in self.signature):
            raise SignatureError(f"invalid signature {self.signature!r}")
        if comps.ndim != len(self.signature):
            raise SignatureError(
                f"signature {self.signature!r} has rank {len(self.signature)} "
                f"but components have rank {comps.ndim}"
            )
        if comps.ndim and len(set(comps.shape)) != 1:
            raise SignatureError(f"components must be square, got shape {comps.shape}")

    @property
    def rank(self):
        return len(self.signature)

    def norm(self):
        return float(np.linalg.norm(self.components))

    def __add__(self, other):
        if other.signature != self.signature:
            raise SignatureError("cannot add tensors of different signature")
        return TensorValue(self.signature, self.components + other.components, self.base_point)

    def __sub__(self, other):
        if other.signature != self.signature:
            raise SignatureError("cannot subtract tensors of different signature")
        return TensorValue(self.signature, self.components - other.components, self.base_point)

    def __mul__(self, c):
        return TensorValue(self.signature, self.components * c, self.base_point)

    __rmul__ = __mul__


def contract(t, i, j):
    """Trace over slots ``i`` and ``j``, which must have opposite variance."""
    if i == j or not (0 <= i < t.rank and 0 <= j < t.rank):
        raise SignatureError(f"invalid slots {i}, {j} for a rank-{t.rank} tensor")
    if t.signature[i] == t.signature[j]:
        raise SignatureError(
            f"cannot contract slots {i} and {j}: both are {'up' if t.signature[i] == UP else 'down'}"
        )
    comps = np.trace(t.components, axis1=i, axis2=j)
    sig = "".join(s for k, s in enumerate(t.signature) if k not in (i, j))
    return TensorValue(sig, comps, t.base_point)


def outer(a, b):
    return TensorValue(
        a.signature + b.signature, np.multiply.outer(a.components, b.components), a.base_point
    )


def transpose(t, perm):
    sig = "".join(t.signature[p] for p in perm)
    return TensorValue(sig, np.transpose(t.components, perm), t.base_point)
