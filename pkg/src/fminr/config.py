"""Experiment configuration: per-task defaults, config files and dataset specs.

Config files are INI-style with a single ``[experiment]`` section whose keys
are :class:`ExperimentConfig` field names. Command-line flags override them.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from .data import (
    DataError, SignalDataset, load_image, load_occupancy, load_wav, synth_audio,
    synth_circles_image, synth_occupancy,
)
from .network import MODEL_KINDS, Hyperparams
from .training import TrainConfig

TASKS = ("audio", "image", "shape")


class ConfigError(ValueError):
    pass


# Experiment-specific values for the desk-scale tasks. omega0 by model family;
# families without a listed value fall back to 30.
TASK_DEFAULTS = {
    "audio": {
        "learning_rate": 1e-4, "epochs": 500, "widths": [256, 256],
        "omega0": {"siren": 800.0, "fm-siren": 800.0, "finer": 700.0, "fm-finer": 700.0},
        "batch_size": "full", "synthetic": "audio:1.0:4000:200/0.5,650/0.3,1500/0.2",
    },
    "image": {
        "learning_rate": 1e-3, "epochs": 500, "widths": [256, 256], "omega0": {},
        "batch_size": "full", "synthetic": "circles:64:24",
    },
    "shape": {
        "learning_rate": 1e-3, "epochs": 75, "widths": [256, 256, 256], "omega0": {},
        "batch_size": 16384, "synthetic": "sphere:64:0.5",
    },
}


@dataclass
class ExperimentConfig:
    task: str = "image"
    model: str = "fm-siren"
    widths: list | None = None
    omega0: float | None = None
    gauss_scale: float = 16.0
    nyquist_factor: float | None = None
    angular_scale: float = 1.0
    k_offset: int = 0
    first_layer_only: bool = False
    outermost_linear: bool | None = None  # None -> family default
    pe_scale: int = 15
    embed_size: int = 256
    learning_rate: float | None = None
    epochs: int | None = None
    lr_decay_gamma: float = 0.1
    lr_decay_every: int = 100
    batch_size: int | str | None = None
    seed: int = 0
    input: str | None = None
    synthetic: str | None = None
    out: str | None = None
    extras: dict = field(default_factory=dict)

    def resolved(self) -> "ExperimentConfig":
        """Copy with every default materialized and values validated."""
        if self.task not in TASKS:
            raise ConfigError(f"--task: unknown task {self.task!r}; choose from {', '.join(TASKS)}")
        if self.model not in MODEL_KINDS:
            raise ConfigError(
                f"--model: unknown model kind {self.model!r}; choose from {', '.join(MODEL_KINDS)}"
            )
        d = TASK_DEFAULTS[self.task]
        c = dataclasses.replace(self)
        c.widths = list(c.widths) if c.widths else list(d["widths"])
        if any(int(w) < 1 for w in c.widths):
            raise ConfigError(f"--widths: widths must be positive, got {c.widths}")
        c.widths = [int(w) for w in c.widths]
        if c.omega0 is None:
            c.omega0 = d["omega0"].get(c.model, 30.0)
        if c.learning_rate is None:
            c.learning_rate = d["learning_rate"]
        if c.epochs is None:
            c.epochs = d["epochs"]
        if c.batch_size is None:
            c.batch_size = d["batch_size"]
        if c.nyquist_factor is None and c.model in ("fm-siren", "fm-finer"):
            c.nyquist_factor = 2.0 / 3.0 if c.model == "fm-finer" else 1.0
        if c.nyquist_factor is not None and not 0 < c.nyquist_factor <= 1:
            raise ConfigError(f"--nyquist-factor: {c.nyquist_factor} outside (0, 1]")
        if c.input is None and c.synthetic is None:
            c.synthetic = d["synthetic"]
        if c.epochs < 0:
            raise ConfigError("--epochs: must be >= 0")
        try:
            c.train_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return c

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(omega0=self.omega0, gauss_scale=self.gauss_scale,
                           nyquist_factor=self.nyquist_factor, angular_scale=self.angular_scale,
                           k_offset=self.k_offset, first_layer_only=self.first_layer_only,
                           outermost_linear=self.outermost_linear, pe_scale=self.pe_scale,
                           embed_size=self.embed_size)

    def train_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, epochs=self.epochs,
                           lr_decay_gamma=self.lr_decay_gamma, lr_decay_every=self.lr_decay_every,
                           batch_size=self.batch_size, seed=self.seed)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("extras")
        return d


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig) if f.name != "extras"}


def coerce(name: str, value):
    """Parse a string config value for field ``name``."""
    if not isinstance(value, str):
        return value
    v = value.strip()
    if v.lower() in ("", "none", "null"):
        return None
    try:
        if name == "widths":
            return [int(x) for x in v.replace(" ", "").split(",") if x]
        if name in ("first_layer_only", "outermost_linear"):
            if v.lower() in ("1", "true", "yes", "on"):
                return True
            if v.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(v)
        if name == "batch_size":
            return "full" if v == "full" else int(v)
        if name in ("k_offset", "pe_scale", "embed_size", "epochs", "lr_decay_every", "seed"):
            return int(v)
        if name in ("omega0", "gauss_scale", "nyquist_factor", "angular_scale",
                    "learning_rate", "lr_decay_gamma"):
            return parse_number(v)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {value!r}") from exc
    return v


def parse_number(text: str) -> float:
    """Float, also accepting a simple fraction such as ``2/3``."""
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def read_config_file(path) -> dict:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"--config: cannot read {path}: {exc}") from exc
    if not parser.has_section("experiment"):
        raise ConfigError(f"--config: {path} has no [experiment] section")
    out = {}
    for key, value in parser.items("experiment"):
        if key not in _FIELDS:
            raise ConfigError(f"--config: unknown key {key!r} in {path}")
        out[key] = coerce(key, value)
    return out


def build_config(file_values: dict, flag_values: dict) -> ExperimentConfig:
    """Merge config-file values with command-line values; flags win."""
    merged = dict(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None and k in _FIELDS})
    return ExperimentConfig(**merged)


# -- datasets -----------------------------------------------------------------


def parse_synthetic(spec: str, task: str):
    """Build a synthetic dataset from ``kind:arg:arg...``.

    ``audio:DURATION:RATE:F/A,F/A,...``, ``circles:SIZE:RINGS``,
    ``sphere:RES:RADIUS`` and ``torus:RES:R:r``.
    """
    parts = spec.split(":")
    kind = parts[0]
    try:
        if kind == "audio":
            comps = [tuple(float(x) for x in c.split("/")) for c in parts[3].split(",") if c]
            if any(len(c) != 2 for c in comps):
                raise ValueError("components must be FREQ/AMP")
            ds = synth_audio(float(parts[1]), float(parts[2]), comps)
            expected = "audio"
        elif kind == "circles":
            ds = synth_circles_image(int(parts[1]), int(parts[2]))
            expected = "image"
        elif kind == "sphere":
            ds = synth_occupancy(int(parts[1]), "sphere", radius=float(parts[2])).to_dataset()
            expected = "shape"
        elif kind == "torus":
            ds = synth_occupancy(int(parts[1]), "torus", major=float(parts[2]),
                                 minor=float(parts[3])).to_dataset()
            expected = "shape"
        else:
            raise ConfigError(f"--synthetic: unknown generator {kind!r}")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise ConfigError(f"--synthetic: cannot parse {spec!r} ({exc})") from exc
    if expected != task:
        raise ConfigError(f"--synthetic: {kind!r} generates {expected} data, task is {task}")
    return ds


def load_dataset(cfg: ExperimentConfig) -> SignalDataset:
    if cfg.input:
        if cfg.task == "audio":
            return load_wav(cfg.input)
        if cfg.task == "image":
            return load_image(cfg.input)
        return load_occupancy(cfg.input).to_dataset()
    return parse_synthetic(cfg.synthetic, cfg.task)
