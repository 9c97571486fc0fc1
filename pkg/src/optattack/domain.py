"""Feature vectors, labels and box constraints on the input domain."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidInputError


def as_vector(x, dim=None, name="x"):
    """Coerce ``x`` to a contiguous float64 vector and validate it."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise InvalidInputError(f"{name} must be a non-empty 1-d vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise InvalidInputError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not kernels.active.all_finite(arr):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def _bound_array(value, dim, fill):
    if value is None:
        return np.full(dim, fill)
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        return np.full(dim, float(arr))
    if arr.shape != (dim,):
        raise ValueError(f"bound has shape {arr.shape}, expected ({dim},)")
    # JSON null inside a list means unbounded on that coordinate
    return np.where(np.isnan(arr), fill, arr)


@dataclass(frozen=True)
class DomainBounds:
    """Per-coordinate box ``lower <= x <= upper``; infinite entries are unbounded."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.ascontiguousarray(self.lower, dtype=np.float64)
        hi = np.ascontiguousarray(self.upper, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be 1-d vectors of equal length")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unbounded(cls, dim):
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @classmethod
    def box(cls, dim, lower=None, upper=None):
        """Build bounds from scalars, vectors or None (unbounded)."""
        return cls(_bound_array(lower, dim, -np.inf), _bound_array(upper, dim, np.inf))

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def is_bounded(self):
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def diameter(self):
        if not self.is_bounded:
            return float("inf")
        return float(np.linalg.norm(self.upper - self.lower))

    def to_dict(self):
        def enc(a):
            return [None if not np.isfinite(v) else float(v) for v in a]

        return {"lower": enc(self.lower), "upper": enc(self.upper)}


def clamp_to_domain(x, bounds):
    """Project ``x`` onto the box; a None bound leaves ``x`` unchanged."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if bounds is None:
        return arr.copy()
    if arr.shape != bounds.lower.shape:
        raise InvalidInputError(f"x has shape {arr.shape}, bounds have dimension {bounds.dim}")
    return kernels.active.clip(arr, bounds.lower, bounds.upper)
