"""PNG figures written next to the CSV reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.dpi": 110,
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def loss_curve(losses, path, title=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        ax.semilogy(np.arange(len(losses)), np.maximum(losses, 1e-300))
        ax.set_xlabel("epoch")
        ax.set_ylabel("MSE")
        if title:
            ax.set_title(title)
        _save(fig, path)


def image_comparison(target, recon, path, title=None):
    """Ground truth, reconstruction and absolute error side by side."""
    target = np.squeeze(target)
    recon = np.squeeze(np.clip(recon, 0, 1))
    gray = target.ndim == 2
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(9, 3.2))
        kw = {"cmap": "gray", "vmin": 0, "vmax": 1} if gray else {}
        axes[0].imshow(target, **kw)
        axes[0].set_title("target")
        axes[1].imshow(recon, **kw)
        axes[1].set_title(title or "reconstruction")
        err = np.abs(target - recon)
        im = axes[2].imshow(err if gray else err.mean(axis=-1), cmap="magma")
        axes[2].set_title("|error|")
        fig.colorbar(im, ax=axes[2], fraction=0.046)
        for ax in axes:
            ax.set_axis_off()
        _save(fig, path)


def waveform_comparison(target, recon, rate, path, title=None, max_samples=4000):
    target = np.ravel(target)[:max_samples]
    recon = np.ravel(recon)[:max_samples]
    t = np.arange(target.size) / rate
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7, 3))
        ax.plot(t, target, color="tab:red", lw=0.8, label="target")
        ax.plot(t, recon, color="tab:blue", lw=0.8, label="reconstruction")
        ax.plot(t, target - recon, color="black", lw=0.6, label="error")
        ax.set_xlabel("time [s]")
        ax.legend(loc="upper right", frameon=False)
        if title:
            ax.set_title(title)
        _save(fig, path)


def volume_slices(target, pred, path, title=None):
    """Central z-slice of ground truth and thresholded prediction."""
    k = target.shape[2] // 2
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(6, 3.2))
        axes[0].imshow(target[:, :, k], cmap="gray", vmin=0, vmax=1)
        axes[0].set_title("target (mid slice)")
        axes[1].imshow(pred[:, :, k] >= 0.5, cmap="gray", vmin=0, vmax=1)
        axes[1].set_title(title or "prediction >= 0.5")
        for ax in axes:
            ax.set_axis_off()
        _save(fig, path)


def covariance_map(cov, path, frobenius=None, title=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 3.6))
        lim = float(np.max(np.abs(cov))) or 1.0
        im = ax.imshow(cov, cmap="RdBu_r", vmin=-lim, vmax=lim)
        ax.set_xlabel("neuron")
        ax.set_ylabel("neuron")
        if frobenius is not None:
            ax.text(0.98, 0.98, f"{frobenius:.2f}", transform=ax.transAxes, ha="right",
                    va="top", fontsize=8, bbox={"fc": "white", "ec": "none", "alpha": 0.8})
        if title:
            ax.set_title(title)
        fig.colorbar(im, ax=ax, fraction=0.046)
        _save(fig, path)


def sweep_curve(values, metric, path, xlabel, ylabel):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        ax.plot(range(len(values)), metric, marker="o")
        ax.set_xticks(range(len(values)))
        ax.set_xticklabels([str(v) for v in values])
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        _save(fig, path)
