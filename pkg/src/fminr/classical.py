"""Nyquist limits, the orthonormal DST-II and orthogonal-basis reconstruction.

The DST is computed from an explicit basis matrix (O(N^2)), which is plenty for
the image sizes used here and keeps the basis available for inspection.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class SamplingInfo:
    sample_counts: tuple
    sample_rate: float | None = None

    def __post_init__(self):
        counts = tuple(int(c) for c in self.sample_counts)
        if not counts or any(c < 2 for c in counts):
            raise ValueError(f"need at least 2 samples per dimension, got {counts}")
        object.__setattr__(self, "sample_counts", counts)


@dataclass(frozen=True)
class BasisSet:
    matrix: np.ndarray  # N x M, column m is basis function m sampled on the grid
    frequencies: np.ndarray


class DegenerateBasisError(ValueError):
    pass


def nyquist_frequency(info: SamplingInfo) -> float:
    """Half the sample rate in Hz, or half the smallest per-axis count in cycles/signal."""
    if info.sample_rate is not None:
        return info.sample_rate / 2.0
    return min(info.sample_counts) / 2.0


@lru_cache(maxsize=16)
def _dst_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    i = np.arange(n)[:, None]
    phi = np.sqrt(2.0 / n) * np.sin(np.pi * (k + 1) * (2 * i + 1) / (2.0 * n))
    phi[:, -1] /= np.sqrt(2.0)
    phi.setflags(write=False)
    return phi


def dst_basis(n: int) -> BasisSet:
    """Orthonormal DST-II basis on ``n`` samples; column k oscillates (k+1)/2 cycles."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return BasisSet(_dst_matrix(n), (np.arange(n) + 1) / 2.0)


def dst_forward(signal) -> np.ndarray:
    x = np.asarray(signal, dtype=np.float64).ravel()
    return _dst_matrix(x.size).T @ x


def dst_inverse(coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=np.float64).ravel()
    return _dst_matrix(c.size) @ c


def dst2_forward(image) -> np.ndarray:
    x = np.asarray(image, dtype=np.float64)
    h, w = x.shape
    return _dst_matrix(h).T @ x @ _dst_matrix(w)


def dst2_inverse(coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=np.float64)
    h, w = c.shape
    return _dst_matrix(h) @ c @ _dst_matrix(w).T


def keep_largest(coeffs, m: int) -> np.ndarray:
    """Zero all but the ``m`` largest-magnitude entries; ties go to the lower flat index."""
    c = np.asarray(coeffs, dtype=np.float64)
    flat = c.ravel()
    order = np.argsort(-np.abs(flat), kind="stable")
    out = np.zeros_like(flat)
    out[order[:m]] = flat[order[:m]]
    return out.reshape(c.shape)


def dst2_truncated_reconstruct(image, m: int) -> np.ndarray:
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {x.shape}")
    if not 1 <= m <= x.size:
        raise ValueError(f"coefficient budget {m} outside [1, {x.size}]")
    return dst2_inverse(keep_largest(dst2_forward(x), m))


def project_coefficients(signal, basis: BasisSet) -> np.ndarray:
    """Per-column projection ``<f, phi_m> / <phi_m, phi_m>``; exact for orthogonal bases."""
    f = np.asarray(signal, dtype=np.float64).ravel()
    phi = basis.matrix
    if phi.shape[0] != f.size:
        raise ValueError(f"basis has {phi.shape[0]} rows for a signal of length {f.size}")
    norms = np.einsum("nm,nm->m", phi, phi)
    if np.any(norms == 0):
        raise DegenerateBasisError(f"zero-norm basis column(s) {np.flatnonzero(norms == 0).tolist()}")
    return (phi.T @ f) / norms


def synthesize(coeffs, basis: BasisSet) -> np.ndarray:
    """Linear combination of basis columns."""
    return basis.matrix @ np.asarray(coeffs, dtype=np.float64)
