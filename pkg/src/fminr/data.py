"""Coordinate grids, synthetic signals and file I/O for audio, images and voxel grids.

Occupancy files (``.occ``): three little-endian int32 axis sizes followed by
one byte per voxel (0 or 1), axis-0-major, matching :func:`make_grid` order.
"""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass

import numpy as np

from .classical import SamplingInfo


class DataError(ValueError):
    pass


class AliasingError(DataError):
    pass


class FormatError(DataError):
    pass


@dataclass
class SignalDataset:
    coords: np.ndarray
    targets: np.ndarray
    sampling: SamplingInfo
    value_range: tuple
    shape: tuple  # signal layout before flattening, e.g. (H, W, C)

    @property
    def max_value(self) -> float:
        return float(self.value_range[1] - self.value_range[0])

    def reshape(self, values) -> np.ndarray:
        return np.asarray(values).reshape(self.shape)


@dataclass
class OccupancyGrid:
    resolution: tuple
    values: np.ndarray  # flat uint8

    def to_dataset(self) -> SignalDataset:
        return SignalDataset(make_grid(self.resolution), self.values.astype(np.float64)[:, None],
                             SamplingInfo(self.resolution), (0.0, 1.0), tuple(self.resolution))

    @property
    def occupied_fraction(self) -> float:
        return float(self.values.mean())


def make_grid(dims) -> np.ndarray:
    """Evenly spaced points on [-1, 1] per axis, endpoints included, axis-0-major rows."""
    dims = [int(d) for d in dims]
    if not dims or any(d < 2 for d in dims):
        raise DataError(f"each grid axis needs at least 2 points, got {dims}")
    axes = [np.linspace(-1.0, 1.0, d) for d in dims]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


# -- synthetic signals ---------------------------------------------------------


def synth_audio(duration_s: float, rate: float, components) -> SignalDataset:
    """Sum of sines ``amp * sin(2 pi f t)`` sampled at ``rate`` Hz."""
    n = int(round(duration_s * rate))
    if n < 2:
        raise DataError("clip shorter than two samples")
    for freq, _ in components:
        if freq >= rate / 2:
            raise AliasingError(
                f"component at {freq} Hz is at or above the Nyquist limit {rate / 2} Hz"
            )
        if freq < 0:
            raise DataError(f"negative frequency {freq}")
    t = np.arange(n) / rate
    y = np.zeros(n)
    for freq, amp in components:
        y += amp * np.sin(2 * np.pi * freq * t)
    return SignalDataset(make_grid([n]), y[:, None], SamplingInfo((n,), float(rate)),
                         (-1.0, 1.0), (n,))


def circles_image(size: int, ring_count: int) -> np.ndarray:
    coords = make_grid([size, size])
    r = np.sqrt(np.sum(coords ** 2, axis=1))
    return np.clip(0.5 + 0.5 * np.sin(ring_count * np.pi * r), 0.0, 1.0).reshape(size, size)


def synth_circles_image(size: int = 64, ring_count: int = 24) -> SignalDataset:
    """Concentric rings ``0.5 + 0.5 sin(ring_count pi r)``, grayscale."""
    if size < 16:
        raise DataError("image size must be >= 16")
    img = circles_image(size, ring_count)
    return image_dataset(img[:, :, None])


def synth_occupancy(resolution: int, shape: str = "sphere", radius: float = 0.5,
                    major: float = 0.5, minor: float = 0.25) -> OccupancyGrid:
    """Voxel centres inside a sphere (``radius``) or torus (``major``, ``minor``)."""
    if resolution < 8:
        raise DataError("resolution must be >= 8")
    p = make_grid([resolution] * 3)
    if shape == "sphere":
        if not radius > 0:
            raise DataError(f"degenerate sphere radius {radius}")
        inside = np.sqrt(np.sum(p ** 2, axis=1)) <= radius
    elif shape == "torus":
        if not (major > 0 and minor > 0):
            raise DataError(f"degenerate torus radii R={major}, r={minor}")
        ring = np.sqrt(p[:, 0] ** 2 + p[:, 1] ** 2) - major
        inside = np.sqrt(ring ** 2 + p[:, 2] ** 2) <= minor
    else:
        raise DataError(f"unknown shape {shape!r}")
    return OccupancyGrid((resolution,) * 3, inside.astype(np.uint8))


# -- audio ---------------------------------------------------------------------


def load_wav(path) -> SignalDataset:
    """PCM16 WAV (first channel if several) scaled to [-1, 1) by 1/32768."""
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate, frames = (w.getnchannels(), w.getsampwidth(),
                                             w.getframerate(), w.getnframes())
            if w.getcomptype() != "NONE":
                raise FormatError(f"{path}: compression type {w.getcomptype()!r} unsupported")
            raw = w.readframes(frames)
    except wave.Error as exc:
        # the wave module only reports the format tag as "unknown format: N"
        raise FormatError(f"{path}: unsupported audio format tag ({exc})") from exc
    except EOFError as exc:
        raise FormatError(f"{path}: truncated RIFF header") from exc
    if width != 2:
        raise FormatError(f"{path}: sample width {8 * width} bits, need 16-bit PCM")
    if channels < 1:
        raise FormatError(f"{path}: channel count {channels}")
    samples = np.frombuffer(raw, dtype="<i2").reshape(-1, channels)[:, 0]
    if samples.size < 2:
        raise FormatError(f"{path}: fewer than two frames")
    y = samples.astype(np.float64) / 32768.0
    return SignalDataset(make_grid([y.size]), y[:, None], SamplingInfo((y.size,), float(rate)),
                         (-1.0, 1.0), (y.size,))


def save_wav(path, samples, rate: int) -> None:
    y = np.asarray(samples, dtype=np.float64).ravel()
    pcm = np.clip(np.round(y * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(rate))
        w.writeframes(pcm.tobytes())


# -- images ----------------------------------------------------------------------


def image_dataset(img) -> SignalDataset:
    """Dataset from an ``H x W x C`` array of values in [0, 1]."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    h, w, c = img.shape
    return SignalDataset(make_grid([h, w]), img.reshape(h * w, c), SamplingInfo((h, w)),
                         (0.0, 1.0), (h, w, c))


def _read_token(raw: bytes, pos: int):
    n = len(raw)
    while pos < n:
        if raw[pos:pos + 1].isspace():
            pos += 1
        elif raw[pos:pos + 1] == b"#":
            while pos < n and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
        pos += 1
    return raw[start:pos], start, pos


def read_pnm(path) -> np.ndarray:
    """Binary PGM (P5) or PPM (P6) with maxval 255 as a uint8 ``H x W x C`` array."""
    with open(path, "rb") as fh:
        raw = fh.read()
    magic = raw[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: bad magic {magic!r} at byte offset 0, need P5 or P6")
    channels = 1 if magic == b"P5" else 3
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        tok, start, pos = _read_token(raw, pos)
        if not tok.isdigit() or int(tok) <= 0:
            raise FormatError(f"{path}: malformed {name} {tok!r} at byte offset {start}")
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise FormatError(f"{path}: maxval {maxval} at byte offset {start}, only 8-bit (255) supported")
    if pos >= len(raw) or not raw[pos:pos + 1].isspace():
        raise FormatError(f"{path}: missing whitespace after header at byte offset {pos}")
    pos += 1
    need = width * height * channels
    if len(raw) - pos < need:
        raise FormatError(f"{path}: pixel data truncated at byte offset {len(raw)}, need {need} bytes from {pos}")
    data = np.frombuffer(raw, dtype=np.uint8, count=need, offset=pos)
    return data.reshape(height, width, channels)


def write_pnm(path, pixels) -> None:
    px = np.asarray(pixels, dtype=np.uint8)
    if px.ndim == 2:
        px = px[:, :, None]
    h, w, c = px.shape
    if c not in (1, 3):
        raise FormatError(f"cannot write {c} channels; need 1 (PGM) or 3 (PPM)")
    magic = b"P5" if c == 1 else b"P6"
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(px).tobytes())


def to_uint8(values) -> np.ndarray:
    """[0, 1] floats to 8-bit with round-half-up."""
    v = np.asarray(values, dtype=np.float64)
    return np.clip(np.floor(v * 255.0 + 0.5), 0, 255).astype(np.uint8)


def load_image(path) -> SignalDataset:
    return image_dataset(read_pnm(path).astype(np.float64) / 255.0)


def save_image(path, img) -> None:
    write_pnm(path, to_uint8(img))


# -- occupancy files -------------------------------------------------------------


def save_occupancy(path, grid: OccupancyGrid) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<3i", *grid.resolution))
        fh.write(np.asarray(grid.values, dtype=np.uint8).tobytes())


def load_occupancy(path) -> OccupancyGrid:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12:
        raise FormatError(f"{path}: header truncated at byte offset {len(raw)}")
    res = struct.unpack("<3i", raw[:12])
    if any(r < 2 for r in res):
        raise FormatError(f"{path}: bad resolution {res} at byte offset 0")
    n = res[0] * res[1] * res[2]
    if len(raw) != 12 + n:
        raise FormatError(f"{path}: expected {n} voxel bytes after offset 12, found {len(raw) - 12}")
    values = np.frombuffer(raw, dtype=np.uint8, offset=12).copy()
    if np.any(values > 1):
        raise FormatError(f"{path}: voxel values must be 0 or 1")
    return OccupancyGrid(res, values)
