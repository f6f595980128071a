"""Dense float64 helpers, seeded random numbers and a finite-difference oracle.

Matrices are plain 2D ``numpy.ndarray`` objects with dtype float64. The random
generator is numpy's PCG64 (O'Neill 2014, 128-bit LCG state with XSL-RR
output), seeded from a 64-bit integer, which gives the same stream on every
platform numpy supports.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class EvaluationError(ArithmeticError):
    """A function evaluated inside an oracle returned a non-finite value."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


def as_matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2D matrix, got shape {a.shape}")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product ``a @ b`` with an explicit shape check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def transpose(a) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(a, dtype=np.float64).T)


class Rng:
    """Seeded generator; equal seeds give equal streams."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, lo: float, hi: float, size=None):
        if not lo < hi:
            raise ValueError(f"invalid range: lo={lo} must be < hi={hi}")
        return self._gen.uniform(lo, hi, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def spawn_seed(self) -> int:
        return int(self._gen.integers(0, 2**63 - 1))


def uniform_matrix(rng: Rng, rows: int, cols: int, lo: float, hi: float) -> np.ndarray:
    """``rows x cols`` matrix of i.i.d. draws from [lo, hi)."""
    return rng.uniform(lo, hi, (rows, cols))


def finite_diff_grad(f, theta, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``theta``.

    Raises :class:`EvaluationError` carrying the coordinate index when ``f``
    is not finite at one of the probe points.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    theta = np.array(theta, dtype=np.float64).ravel()
    grad = np.empty_like(theta)
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + h
        fp = float(f(theta.copy()))
        theta[i] = orig - h
        fm = float(f(theta.copy()))
        theta[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EvaluationError(f"non-finite function value at coordinate {i}", index=i)
        grad[i] = (fp - fm) / (2.0 * h)
    return grad
