"""Coordinate charts on complex manifolds written in real coordinates."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError

MAX_N = 6


@dataclass(frozen=True)
class Chart:
    """Box ``[lo, hi]^{2n}``, optionally intersected with the ball ``|x| < radius``.

    Coordinates are ordered ``(u1, v1, ..., un, vn)`` with ``z_j = u_j + i v_j``.
    """

    n: int
    lo: float = -10.0
    hi: float = 10.0
    radius: Optional[float] = None
    allow_small: bool = False

    def __post_init__(self):
        if self.n > MAX_N:
            raise ValueError(f"complex dimension {self.n} exceeds the supported maximum {MAX_N}")
        if self.n < (1 if self.allow_small else 2):
            raise ValueError(f"complex dimension must be at least 2, got {self.n}")
        if not self.hi > self.lo:
            raise ValueError("chart box is empty")
        if self.radius is not None and self.radius <= 0:
            raise ValueError("chart radius must be positive")

    @property
    def dim(self):
        return 2 * self.n

    def contains(self, x, margin=0.0):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        if np.any(x <= self.lo + margin) or np.any(x >= self.hi - margin):
            return False
        if self.radius is not None and np.linalg.norm(x) >= self.radius - margin:
            return False
        return True

    def require(self, x):
        if not self.contains(x):
            raise DomainError(f"point {np.asarray(x).tolist()} lies outside the chart domain")
        return np.asarray(x, dtype=float)

    def sample(self, rng, count, scale=1.0):
        """Uniform samples from the domain shrunk by ``scale`` about the origin."""
        out = []
        lo, hi = self.lo * scale, self.hi * scale
        r = None if self.radius is None else self.radius * scale
        while len(out) < count:
            if r is not None:
                v = rng.normal(size=self.dim)
                v *= r * rng.uniform() ** (1.0 / self.dim) / np.linalg.norm(v)
                v = np.clip(v, lo, hi)
            else:
                v = rng.uniform(lo, hi, size=self.dim)
            if self.contains(v):
                out.append(v)
        return np.array(out)

    def shrink(self, factor):
        return Chart(
            self.n,
            self.lo * factor,
            self.hi * factor,
            None if self.radius is None else self.radius * factor,
            self.allow_small,
        )

    def to_dict(self):
        return {"n": self.n, "box": [self.lo, self.hi], "radius": self.radius}


def complex_structure(n):
    """Standard ``J`` acting on column vectors: ``J d/du = d/dv``."""
    j = np.zeros((2 * n, 2 * n))
    for i in range(n):
        j[2 * i + 1, 2 * i] = 1.0
        j[2 * i, 2 * i + 1] = -1.0
    return j
