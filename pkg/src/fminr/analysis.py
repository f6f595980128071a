"""Reconstruction metrics and hidden-feature redundancy."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .network import Model, forward
from .numerics import ShapeError
from .training import mse_loss


class UndefinedMetricError(ValueError):
    pass


def mse(a, b) -> float:
    return mse_loss(a, b)[0]


def psnr(pred, target, max_value: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical inputs."""
    if not max_value > 0:
        raise ValueError("max_value must be positive")
    err = mse(pred, target)
    if err == 0:
        return float("inf")
    return float(10.0 * np.log10(max_value ** 2 / err))


def ssim_global(a, b, max_value: float = 1.0) -> float:
    """SSIM from whole-image mean, variance and covariance (a single window)."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {y.shape}")
    if not max_value > 0:
        raise ValueError("max_value must be positive")
    c1 = (0.01 * max_value) ** 2
    c2 = (0.03 * max_value) ** 2
    mx, my = x.mean(), y.mean()
    vx = ((x - mx) ** 2).mean()
    vy = ((y - my) ** 2).mean()
    cxy = ((x - mx) * (y - my)).mean()
    return float((2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)))


def ssim_windowed(a, b, max_value: float = 1.0, size: int = 11, sigma: float = 1.5) -> float:
    """Mean SSIM over Gaussian windows. Reported as an extra; not the headline metric."""
    from scipy.ndimage import gaussian_filter

    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {y.shape}")
    c1 = (0.01 * max_value) ** 2
    c2 = (0.03 * max_value) ** 2
    truncate = (size // 2) / sigma
    sig = [sigma] * 2 + [0] * (x.ndim - 2)

    def blur(v):
        return gaussian_filter(v, sig, truncate=truncate)

    mx, my = blur(x), blur(y)
    vx = blur(x * x) - mx * mx
    vy = blur(y * y) - my * my
    cxy = blur(x * y) - mx * my
    m = (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    return float(m.mean())


def iou(pred_occupancy, gt_occupancy, threshold: float = 0.5) -> float:
    """Voxel intersection over union after thresholding both grids at ``threshold``."""
    p = np.asarray(pred_occupancy, dtype=np.float64)
    g = np.asarray(gt_occupancy, dtype=np.float64)
    if p.shape != g.shape:
        raise ShapeError(f"shape mismatch: {p.shape} vs {g.shape}")
    p = p >= threshold
    g = g >= threshold
    union = np.count_nonzero(p | g)
    if union == 0:
        raise UndefinedMetricError("IoU undefined: both grids are empty")
    return np.count_nonzero(p & g) / union


@dataclass
class RedundancyReport:
    layer_index: int
    covariance: np.ndarray
    frobenius: float
    n_samples: int

    @property
    def width(self) -> int:
        return self.covariance.shape[0]

    def summary(self) -> dict:
        return {"layer_index": self.layer_index, "width": self.width,
                "n_samples": self.n_samples, "frobenius": self.frobenius}


def uniform_sampler(seed: int = 0):
    """Coordinates drawn uniformly from [-1, 1]^d with a fixed seed."""
    def draw(n: int, dim: int) -> np.ndarray:
        return np.random.Generator(np.random.PCG64(seed)).uniform(-1.0, 1.0, (n, dim))
    return draw


def layer_features(model: Model, layer_index: int, coords) -> np.ndarray:
    if not 0 <= layer_index < len(model.layers):
        raise IndexError(f"layer {layer_index} out of range for a {len(model.layers)}-layer model")
    return forward(model, coords).post[layer_index]


def hidden_covariance(model: Model, layer_index: int = 0, sampler=None,
                      n_samples: int = 10000, batch_size: int = 20000) -> RedundancyReport:
    """Sample covariance (n - 1 denominator) of one layer's neuron outputs."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    if not 0 <= layer_index < len(model.layers):
        raise IndexError(f"layer {layer_index} out of range for a {len(model.layers)}-layer model")
    sampler = sampler or uniform_sampler(0)
    coords = sampler(n_samples, model.input_dim)
    feats = np.concatenate([layer_features(model, layer_index, coords[i:i + batch_size])
                            for i in range(0, n_samples, batch_size)])
    centered = feats - feats.mean(axis=0)
    cov = centered.T @ centered / (n_samples - 1)
    cov = 0.5 * (cov + cov.T)
    return RedundancyReport(layer_index, cov, float(np.sqrt(np.sum(cov * cov))), n_samples)


def redundancy_reduction(baseline: RedundancyReport, fm: RedundancyReport) -> float:
    """Percentage drop of the covariance Frobenius norm relative to ``baseline``."""
    if baseline.width != fm.width:
        raise ValueError(f"layer widths differ: {baseline.width} vs {fm.width}")
    if baseline.frobenius == 0:
        raise UndefinedMetricError("baseline covariance is zero; reduction undefined")
    return 100.0 * (baseline.frobenius - fm.frobenius) / baseline.frobenius


def write_covariance_csv(report: RedundancyReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"n{j}" for j in range(report.width)])
        for row in report.covariance:
            writer.writerow([repr(float(v)) for v in row])
