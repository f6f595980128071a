"""Command-line entry point: ``fminr train | analyze | dst | sweep``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 diverged run.
The default output root is ``$FMINR_OUTPUT_ROOT`` (falls back to ``./runs``).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .analysis import (
    hidden_covariance, iou, mse, psnr, redundancy_reduction, ssim_global, uniform_sampler,
    write_covariance_csv,
)
from .classical import dst2_truncated_reconstruct, nyquist_frequency
from .config import (
    ConfigError, ExperimentConfig, build_config, load_dataset, parse_number, parse_synthetic,
    read_config_file,
)
from .data import (
    DataError, OccupancyGrid, image_dataset, load_image, save_image, save_occupancy, save_wav,
)
from .network import BuildError, CheckpointError, build_model, load_checkpoint, param_count, \
    predict, save_checkpoint
from .training import DivergedError, train

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4

METRIC_FIELDS = ["task", "model", "param_count", "final_loss", "mse", "psnr", "ssim", "iou"]
HISTORY_FIELDS = ["epoch", "lr", "loss", "seconds"]
SWEEP_FIELDS = ["axis", "value", "param_count", "final_loss", "mse", "psnr", "ssim", "iou",
                "wall_time_s"]
PREDICT_BATCH = 32768


def output_root() -> Path:
    return Path(os.environ.get("FMINR_OUTPUT_ROOT", "runs"))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path, fields, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in fields})


def versions() -> dict:
    import matplotlib
    import scipy

    return {"fminr": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__}


# -- train -----------------------------------------------------------------------


def evaluate(task, ds, pred) -> dict:
    out = {"mse": mse(pred, ds.targets), "psnr": None, "ssim": None, "iou": None}
    if task == "image":
        out["psnr"] = psnr(pred, ds.targets, ds.max_value)
        out["ssim"] = ssim_global(ds.reshape(pred), ds.reshape(ds.targets), ds.max_value)
    elif task == "shape":
        out["iou"] = iou(pred, ds.targets)
    return out


def run_experiment(cfg: ExperimentConfig, run_dir: Path, figures: bool = True):
    """Train one configuration and write every artifact into ``run_dir``."""
    cfg = cfg.resolved()
    ds = load_dataset(cfg)
    f_n = nyquist_frequency(ds.sampling)
    model = build_model(ds.coords.shape[1], cfg.widths, ds.targets.shape[1], cfg.model,
                        cfg.hyperparams(), f_n, cfg.seed)
    run_dir.mkdir(parents=True, exist_ok=True)
    model, report = train(model, ds, cfg.train_config())
    pred = predict(model, ds.coords, PREDICT_BATCH)
    metrics = evaluate(cfg.task, ds, pred)
    row = {"task": cfg.task, "model": cfg.model, "param_count": param_count(model),
           "final_loss": report.final_loss, **metrics}
    report.metrics = row

    if cfg.task == "audio":
        recon_path = run_dir / "reconstruction.wav"
        save_wav(recon_path, np.clip(pred[:, 0], -1, 1), int(round(ds.sampling.sample_rate)))
    elif cfg.task == "image":
        recon_path = run_dir / ("reconstruction.pgm" if ds.shape[2] == 1 else "reconstruction.ppm")
        save_image(recon_path, np.clip(ds.reshape(pred), 0, 1))
    else:
        recon_path = run_dir / "reconstruction.occ"
        save_occupancy(recon_path, OccupancyGrid(ds.shape, (pred[:, 0] >= 0.5).astype(np.uint8)))
    save_checkpoint(model, run_dir / "model.ckpt")
    write_csv(run_dir / "metrics.csv", METRIC_FIELDS, [row])
    write_csv(run_dir / "loss_history.csv", HISTORY_FIELDS, report.history_rows())
    manifest = {
        "config": cfg.to_dict(),
        "f_nyquist": f_n,
        "param_count": param_count(model),
        "dataset": {"shape": list(ds.shape), "samples": int(ds.coords.shape[0]),
                    "sample_counts": list(ds.sampling.sample_counts),
                    "sample_rate": ds.sampling.sample_rate},
        "metrics": {k: v for k, v in row.items() if k not in ("task", "model")},
        "versions": versions(),
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    report.artifacts = {"reconstruction": str(recon_path), "checkpoint": str(run_dir / "model.ckpt")}

    if figures:
        title = f"{cfg.model}"
        plotting.loss_curve(report.losses, run_dir / "loss.png", title)
        if cfg.task == "image":
            plotting.image_comparison(ds.reshape(ds.targets), ds.reshape(pred),
                                      run_dir / "reconstruction.png",
                                      f"{cfg.model}  {metrics['psnr']:.2f} dB")
        elif cfg.task == "audio":
            plotting.waveform_comparison(ds.targets, pred, ds.sampling.sample_rate,
                                         run_dir / "reconstruction.png",
                                         f"{cfg.model}  MSE {metrics['mse']:.3e}")
        else:
            plotting.volume_slices(ds.reshape(ds.targets), ds.reshape(pred),
                                   run_dir / "reconstruction.png",
                                   f"{cfg.model}  IoU {metrics['iou']:.4f}")
    return model, report


def _config_from_args(args) -> ExperimentConfig:
    file_values = read_config_file(args.config) if args.config else {}
    flags = {f.name: getattr(args, f.name, None) for f in dataclasses.fields(ExperimentConfig)}
    if args.first_layer_only:
        flags["first_layer_only"] = True
    else:
        flags["first_layer_only"] = None
    return build_config(file_values, flags)


def _run_dir(cfg: ExperimentConfig, name: str) -> Path:
    return Path(cfg.out) if cfg.out else output_root() / name


def cmd_train(args) -> int:
    cfg = _config_from_args(args).resolved()
    run_dir = _run_dir(cfg, f"{cfg.task}-{cfg.model}-s{cfg.seed}")
    _, report = run_experiment(cfg, run_dir, figures=not args.no_figures)
    m = report.metrics
    summary = ", ".join(f"{k}={m[k]:.6g}" for k in ("mse", "psnr", "ssim", "iou") if m[k] is not None)
    print(f"{cfg.model} on {cfg.task}: {summary} -> {run_dir}")
    return EXIT_OK


# -- analyze ---------------------------------------------------------------------


def cmd_analyze(args) -> int:
    paths = args.checkpoint
    if len(paths) > 2:
        raise ConfigError("--checkpoint: give one checkpoint, or two (baseline then FM)")
    models = []
    for p in paths:
        try:
            models.append(load_checkpoint(p))
        except (OSError, CheckpointError, ValueError, KeyError) as exc:
            raise ConfigError(f"--checkpoint: cannot load {p}: {exc}") from exc
    for m in models:
        if not 0 <= args.layer < len(m.layers) - 1:
            raise ConfigError(f"--layer: {args.layer} is not a hidden layer of a "
                              f"{len(m.layers)}-layer model")
    if len(models) == 2:
        w0, w1 = models[0].layers[args.layer].fan_out, models[1].layers[args.layer].fan_out
        if w0 != w1 or models[0].input_dim != models[1].input_dim:
            raise ConfigError(f"--checkpoint: incompatible checkpoints (layer widths {w0} vs {w1})")
    out = Path(args.out) if args.out else output_root() / "analysis"
    out.mkdir(parents=True, exist_ok=True)
    rows, reports = [], []
    for i, (p, m) in enumerate(zip(paths, models)):
        rep = hidden_covariance(m, args.layer, uniform_sampler(args.seed), args.n_samples)
        reports.append(rep)
        write_covariance_csv(rep, out / f"covariance_{i}.csv")
        rows.append({"index": i, "checkpoint": str(p), "model": m.kind, **rep.summary()})
        if not args.no_figures:
            plotting.covariance_map(rep.covariance, out / f"covariance_{i}.png", rep.frobenius,
                                    m.kind)
        print(f"[{i}] {m.kind} layer {args.layer}: frobenius {rep.frobenius:.6g} "
              f"({rep.width}x{rep.width}, {rep.n_samples} samples)")
    write_csv(out / "redundancy.csv",
              ["index", "checkpoint", "model", "layer_index", "width", "n_samples", "frobenius"],
              rows)
    if len(reports) == 2:
        pct = redundancy_reduction(reports[0], reports[1])
        write_csv(out / "reduction.csv", ["baseline", "fm", "layer_index", "reduction_percent"],
                  [{"baseline": models[0].kind, "fm": models[1].kind,
                    "layer_index": args.layer, "reduction_percent": pct}])
        print(f"redundancy reduction: {pct:.2f}%")
    return EXIT_OK


# -- dst -------------------------------------------------------------------------


def cmd_dst(args) -> int:
    if args.input:
        ds = load_image(args.input)
    else:
        ds = parse_synthetic(args.synthetic or "circles:64:24", "image")
    img = ds.reshape(ds.targets)
    h, w, c = img.shape
    m = args.coefficients
    if not 1 <= m <= h * w:
        raise ConfigError(f"--coefficients: {m} outside [1, {h * w}] for a {h}x{w} image")
    recon = np.stack([dst2_truncated_reconstruct(img[:, :, k], m) for k in range(c)], axis=-1)
    out = Path(args.out) if args.out else output_root() / "dst"
    out.mkdir(parents=True, exist_ok=True)
    save_image(out / ("dst_reconstruction.pgm" if c == 1 else "dst_reconstruction.ppm"),
               np.clip(recon, 0, 1))
    row = {"coefficients": m, "coefficients_total": m * c,
           "mse": mse(recon, img), "psnr": psnr(recon, img, ds.max_value),
           "ssim": ssim_global(recon, img, ds.max_value)}
    write_csv(out / "dst_metrics.csv", list(row), [row])
    if not args.no_figures:
        plotting.image_comparison(img, recon, out / "dst_reconstruction.png",
                                  f"DST, {m} coeff.  {row['psnr']:.2f} dB")
    print(f"DST with {m} coefficients per channel: PSNR {row['psnr']:.4f} dB, MSE {row['mse']:.6g}")
    return EXIT_OK


# -- sweep -----------------------------------------------------------------------


def sweep_configs(base: ExperimentConfig, axis: str, values):
    base = base.resolved()
    for v in values:
        if axis == "width":
            yield v, dataclasses.replace(base, widths=[int(v)] * len(base.widths))
        elif axis == "depth":
            yield v, dataclasses.replace(base, widths=[base.widths[0]] * int(v))
        else:
            yield v, dataclasses.replace(base, nyquist_factor=float(v))


def cmd_sweep(args) -> int:
    if not args.values:
        raise ConfigError("--values: empty list")
    try:
        values = [parse_number(v) if args.axis == "nyquist_factor" else int(v)
                  for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--values: cannot parse {args.values!r}") from exc
    if not values:
        raise ConfigError("--values: empty list")
    base = _config_from_args(args)
    if args.axis == "nyquist_factor" and base.model not in ("fm-siren", "fm-finer"):
        raise ConfigError(f"--axis nyquist_factor needs an FM model, got {base.model!r}")
    if args.axis in ("width", "depth") and any(v < 1 for v in values):
        raise ConfigError("--values: widths and depths must be >= 1")
    resolved = base.resolved()
    root = _run_dir(resolved, f"sweep-{resolved.task}-{resolved.model}-{args.axis}")
    rows = []
    for v, cfg in sweep_configs(base, args.axis, values):
        label = f"{v:.6g}" if isinstance(v, float) else str(v)
        run_dir = root / f"{args.axis}-{label}"
        cfg = dataclasses.replace(cfg, out=str(run_dir))
        start = time.perf_counter()
        _, report = run_experiment(cfg, run_dir, figures=not args.no_figures)
        m = report.metrics
        rows.append({"axis": args.axis, "value": v, "param_count": m["param_count"],
                     "final_loss": m["final_loss"], "mse": m["mse"], "psnr": m["psnr"],
                     "ssim": m["ssim"], "iou": m["iou"],
                     "wall_time_s": time.perf_counter() - start})
        print(f"{args.axis}={label}: loss {m['final_loss']:.6g}")
    write_csv(root / "sweep.csv", SWEEP_FIELDS, rows)
    if not args.no_figures:
        key = "psnr" if resolved.task == "image" else ("iou" if resolved.task == "shape" else "mse")
        plotting.sweep_curve(values, [r[key] for r in rows], root / "sweep.png", args.axis, key)
    print(f"wrote {root / 'sweep.csv'}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def _add_experiment_flags(p):
    p.add_argument("--config", help="INI file with an [experiment] section; flags override it")
    p.add_argument("--task", choices=["audio", "image", "shape"])
    p.add_argument("--model", help="siren, finer, fm-siren, fm-finer, gauss or pe")
    p.add_argument("--widths", type=lambda s: [int(x) for x in s.split(",") if x],
                   help="hidden widths, comma separated (e.g. 256,256)")
    p.add_argument("--omega0", type=float, help="fixed frequency (rad per unit pre-activation)")
    p.add_argument("--gauss-scale", dest="gauss_scale", type=float, help="Gaussian width s")
    p.add_argument("--nyquist-factor", dest="nyquist_factor", type=parse_number,
                   help="top multiplier as a fraction of the Nyquist frequency, in (0, 1]")
    p.add_argument("--angular-scale", dest="angular_scale", type=float,
                   help="extra factor on every per-neuron multiplier (default 1)")
    p.add_argument("--k-offset", dest="k_offset", type=int, help="first neuron index k (default 0)")
    p.add_argument("--first-layer-only", dest="first_layer_only", action="store_true",
                   help="per-neuron multipliers on the first hidden layer only")
    p.add_argument("--outermost-linear", dest="outermost_linear",
                   action=argparse.BooleanOptionalAction, default=None,
                   help="force a linear (or, with --no-, activated) output layer")
    p.add_argument("--pe-scale", dest="pe_scale", type=int, help="largest PE exponent + 1")
    p.add_argument("--embed-size", dest="embed_size", type=int, help="PE embedding width")
    p.add_argument("--lr", dest="learning_rate", type=float, help="initial learning rate")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr-decay-gamma", dest="lr_decay_gamma", type=float)
    p.add_argument("--lr-decay-every", dest="lr_decay_every", type=int, help="epochs per decay")
    p.add_argument("--batch-size", dest="batch_size",
                   type=lambda s: s if s == "full" else int(s), help="'full' or samples per step")
    p.add_argument("--seed", type=int)
    p.add_argument("--input", help="WAV (audio), PGM/PPM (image) or .occ (shape) file")
    p.add_argument("--synthetic", help="audio:DUR:RATE:F/A,..  circles:SIZE:RINGS  "
                                       "sphere:RES:RADIUS  torus:RES:R:r")
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-figures", action="store_true", help="skip PNG figures")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fminr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit one model and write reconstruction + reports")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("analyze", help="hidden-feature covariance of trained checkpoints")
    p.add_argument("--checkpoint", action="append", required=True,
                   help="checkpoint path; pass twice (baseline, then FM) for a reduction")
    p.add_argument("--layer", type=int, default=0, help="hidden layer index (default 0)")
    p.add_argument("--n-samples", dest="n_samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0, help="coordinate sampler seed")
    p.add_argument("--out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("dst", help="truncated 2D DST baseline on an image")
    p.add_argument("--input", help="PGM/PPM image")
    p.add_argument("--synthetic", help="circles:SIZE:RINGS (default circles:64:24)")
    p.add_argument("--coefficients", "-M", type=int, default=2049,
                   help="coefficients kept per channel (default 2049)")
    p.add_argument("--out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_dst)

    p = sub.add_parser("sweep", help="one seeded run per value of width, depth or nyquist_factor")
    _add_experiment_flags(p)
    p.add_argument("--axis", required=True, choices=["width", "depth", "nyquist_factor"])
    p.add_argument("--values", required=True, help="comma separated, e.g. 1/3,2/5,1/2,2/3,1")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BuildError) as exc:
        print(f"fminr: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"fminr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergedError as exc:
        print(f"fminr: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
