"""Axis-aligned interval vectors.

Used for neuron range bounds, interval-valued biases of reduced networks,
and perturbed-image input boxes.
"""

from __future__ import annotations

import numpy as np


class Interval:
    """A vector of closed intervals [lo_i, hi_i]."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError(f"interval bounds must be 1-D and congruent, got {lo.shape} vs {hi.shape}")
        if np.any(lo > hi):
            raise ValueError("interval has lo > hi")
        self.lo = lo
        self.hi = hi

    @classmethod
    def point(cls, x) -> "Interval":
        x = np.asarray(x, dtype=float)
        return cls(x, x.copy())

    @classmethod
    def zeros(cls, n: int) -> "Interval":
        return cls(np.zeros(n), np.zeros(n))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def rad(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def contains_interval(self, other: "Interval", tol: float = 0.0) -> bool:
        return bool(np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol))

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(np.maximum(self.lo, other.lo), np.minimum(self.hi, other.hi))

    def hull_union(self, other: "Interval") -> "Interval":
        """Smallest box containing both operands."""
        return Interval(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def __getitem__(self, idx) -> "Interval":
        return Interval(self.lo[idx], self.hi[idx])

    def __add__(self, other):
        if isinstance(other, Interval):
            return Interval(self.lo + other.lo, self.hi + other.hi)
        other = np.asarray(other, dtype=float)
        return Interval(self.lo + other, self.hi + other)

    __radd__ = __add__

    def relu(self) -> "Interval":
        return Interval(np.maximum(self.lo, 0.0), np.maximum(self.hi, 0.0))

    def matmul(self, W) -> "Interval":
        """Image of the box under the linear map ``W`` (exact interval arithmetic)."""
        W = np.asarray(W, dtype=float)
        mid = W @ self.mid
        rad = np.abs(W) @ self.rad
        return Interval(mid - rad, mid + rad)

    def sample(self, k: int, rng: np.random.Generator) -> np.ndarray:
        """k uniform samples, one per row."""
        u = rng.uniform(size=(k, self.dim))
        return self.lo + u * self.width

    def __repr__(self):
        return f"Interval(lo={self.lo!r}, hi={self.hi!r})"
