"""Activation families, per-neuron frequency multipliers and positional encoding."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .numerics import ShapeError


class Kind(str, enum.Enum):
    SINE = "sine"
    FINER = "finer"
    FM_SINE = "fm_sine"
    FM_FINER = "fm_finer"
    GAUSS = "gauss"
    LINEAR = "linear"
    RELU = "relu"


PERIODIC = {Kind.SINE, Kind.FINER, Kind.FM_SINE, Kind.FM_FINER}
FM_KINDS = {Kind.FM_SINE, Kind.FM_FINER}
FINER_KINDS = {Kind.FINER, Kind.FM_FINER}


class ActivationSpecError(ValueError):
    pass


@dataclass(frozen=True)
class ActivationSpec:
    kind: Kind
    omega0: float = 30.0
    scale: float = 16.0
    multipliers: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind in FM_KINDS:
            if self.multipliers is None:
                raise ActivationSpecError(f"{self.kind.value} needs per-neuron multipliers")
            m = np.asarray(self.multipliers, dtype=np.float64).ravel()
            if np.any(m < 0) or np.any(np.diff(m) < 0):
                raise ActivationSpecError("multipliers must be non-negative and non-decreasing")
            m.setflags(write=False)
            object.__setattr__(self, "multipliers", m)
        elif self.multipliers is not None:
            raise ActivationSpecError(f"{self.kind.value} takes no multipliers")
        if self.kind in (Kind.SINE, Kind.FINER) and not self.omega0 > 0:
            raise ActivationSpecError("omega0 must be positive")

    def frequencies(self, width: int):
        """Frequency factor broadcast over a ``(n, width)`` pre-activation."""
        if self.kind in FM_KINDS:
            if self.multipliers.shape[0] != width:
                raise ActivationSpecError(
                    f"{len(self.multipliers)} multipliers for a layer of width {width}"
                )
            return self.multipliers
        return self.omega0

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "omega0": self.omega0, "scale": self.scale}
        if self.multipliers is not None:
            d["multipliers"] = [float(x) for x in self.multipliers]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ActivationSpec":
        m = d.get("multipliers")
        return cls(Kind(d["kind"]), float(d["omega0"]), float(d["scale"]),
                   None if m is None else np.asarray(m, dtype=np.float64))


def make_fm_multipliers(width: int, f_nyquist: float, factor: float = 1.0,
                        k_offset: int = 0, angular_scale: float = 1.0) -> np.ndarray:
    """Neuron ``k`` gets ``(k + k_offset) * factor * f_nyquist / width``.

    ``angular_scale`` multiplies every entry; it is 1 unless a caller wants to
    read ``f_nyquist`` in angular units over the [-1, 1] domain.
    """
    if width < 1:
        raise ValueError(f"invalid width {width}: need at least one neuron")
    if not f_nyquist > 0:
        raise ValueError("f_nyquist must be positive")
    if not 0 < factor <= 1:
        raise ValueError(f"nyquist factor {factor} outside (0, 1]")
    k = np.arange(width, dtype=np.float64) + k_offset
    return angular_scale * (k * factor * f_nyquist / width)


def _check(z):
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ShapeError(f"pre-activations must be 2D, got {z.shape}")
    return z


def activate(spec: ActivationSpec, z) -> np.ndarray:
    z = _check(z)
    kind = spec.kind
    if kind is Kind.LINEAR:
        return z.copy()
    if kind is Kind.RELU:
        return np.maximum(z, 0.0)
    if kind is Kind.GAUSS:
        return np.exp(-(spec.scale * z) ** 2)
    w = spec.frequencies(z.shape[1])
    if kind in FINER_KINDS:
        return np.sin(w * (np.abs(z) + 1.0) * z)
    return np.sin(w * z)


def activate_grad(spec: ActivationSpec, z) -> np.ndarray:
    """Element-wise derivative of :func:`activate` with respect to ``z``."""
    z = _check(z)
    kind = spec.kind
    if kind is Kind.LINEAR:
        return np.ones_like(z)
    if kind is Kind.RELU:
        return (z > 0).astype(np.float64)
    if kind is Kind.GAUSS:
        s2 = spec.scale ** 2
        return -2.0 * s2 * z * np.exp(-s2 * z * z)
    w = spec.frequencies(z.shape[1])
    if kind in FINER_KINDS:
        absz = np.abs(z)
        # d/dz [(|z|+1) z] = 2|z| + 1
        return w * (2.0 * absz + 1.0) * np.cos(w * (absz + 1.0) * z)
    return w * np.cos(w * z)


@dataclass(frozen=True)
class PositionalEncodingSpec:
    levels_per_dim: int
    scale: int
    input_dim: int

    def __post_init__(self):
        if self.levels_per_dim < 1 or self.input_dim < 1 or self.scale < 1:
            raise ValueError("levels, scale and input_dim must be >= 1")

    @property
    def total_embed(self) -> int:
        return 2 * self.levels_per_dim * self.input_dim

    @property
    def frequencies(self) -> np.ndarray:
        """Geometric ladder from 2**0 to 2**(scale - 1) with ``levels_per_dim`` rungs."""
        L = self.levels_per_dim
        if L == 1:
            return np.ones(1)
        return 2.0 ** (np.arange(L) * (self.scale - 1) / (L - 1))

    @classmethod
    def for_embedding(cls, input_dim: int, embed_size: int = 256, scale: int = 15):
        """Largest per-dimension level count whose embedding fits ``embed_size``."""
        return cls(max(1, embed_size // (2 * input_dim)), scale, input_dim)

    def to_dict(self) -> dict:
        return {"levels_per_dim": self.levels_per_dim, "scale": self.scale,
                "input_dim": self.input_dim}


def positional_encode(spec: PositionalEncodingSpec, coords) -> np.ndarray:
    """Columns ordered dim-major, level-minor, sin before cos."""
    x = np.asarray(coords, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ShapeError(f"coords {x.shape} do not match input_dim {spec.input_dim}")
    arg = np.pi * x[:, :, None] * spec.frequencies[None, None, :]  # n, d, L
    out = np.stack([np.sin(arg), np.cos(arg)], axis=-1)  # n, d, L, 2
    return out.reshape(x.shape[0], spec.total_embed)
