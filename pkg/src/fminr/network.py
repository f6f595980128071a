"""Coordinate MLPs: assembly, initialization, forward/backward and checkpoints."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .activations import (
    FINER_KINDS,
    FM_KINDS,
    ActivationSpec,
    Kind,
    PositionalEncodingSpec,
    make_fm_multipliers,
    positional_encode,
    activate,
    activate_grad,
)
from .numerics import Rng, ShapeError, matmul


MODEL_KINDS = ("siren", "finer", "fm-siren", "fm-finer", "gauss", "pe")

# (hidden activation, periodic init, outermost linear)
_FAMILY = {
    "siren": (Kind.SINE, True, True),
    "fm-siren": (Kind.FM_SINE, True, True),
    "finer": (Kind.FINER, True, False),
    "fm-finer": (Kind.FM_FINER, True, False),
    "gauss": (Kind.GAUSS, False, True),
    "pe": (Kind.RELU, False, True),
}


class BuildError(ValueError):
    pass


class CacheError(RuntimeError):
    """A forward cache was used with a model it was not produced by."""


@dataclass
class Hyperparams:
    omega0: float = 30.0
    gauss_scale: float = 16.0
    nyquist_factor: float | None = None  # None -> 1 for fm-siren, 2/3 for fm-finer
    angular_scale: float = 1.0
    k_offset: int = 0
    first_layer_only: bool = False
    outermost_linear: bool | None = None  # None -> family default
    pe_scale: int = 15
    embed_size: int = 256

    def resolved_factor(self, kind: str) -> float:
        if self.nyquist_factor is not None:
            return self.nyquist_factor
        return 2.0 / 3.0 if kind == "fm-finer" else 1.0


@dataclass
class Layer:
    weights: np.ndarray  # fan_out x fan_in
    bias: np.ndarray | None
    activation: ActivationSpec

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float64)
            if self.bias.shape != (self.fan_out,):
                raise BuildError(f"bias of length {self.bias.shape} for {self.fan_out} outputs")
        if self.activation.kind in FM_KINDS:
            self.activation.frequencies(self.fan_out)

    @property
    def fan_in(self) -> int:
        return self.weights.shape[1]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[0]


@dataclass
class Model:
    layers: list
    input_dim: int
    encoder: PositionalEncodingSpec | None = None
    outermost_linear: bool = False
    kind: str = "custom"
    meta: dict = field(default_factory=dict)
    version: int = 0

    def __post_init__(self):
        first_in = self.encoder.total_embed if self.encoder else self.input_dim
        if self.encoder is not None and self.encoder.input_dim != self.input_dim:
            raise BuildError("encoder input_dim differs from model input_dim")
        if self.layers[0].fan_in != first_in:
            raise BuildError(f"first layer expects {self.layers[0].fan_in} inputs, got {first_in}")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.fan_out != b.fan_in:
                raise BuildError(f"layer dims do not chain: {a.fan_out} -> {b.fan_in}")
        if self.outermost_linear and self.layers[-1].activation.kind is not Kind.LINEAR:
            raise BuildError("outermost_linear model must end in a linear layer")

    @property
    def output_dim(self) -> int:
        return self.layers[-1].fan_out

    @property
    def widths(self) -> list:
        return [layer.fan_out for layer in self.layers[:-1]]

    def params(self) -> list:
        """Parameter arrays in fixed order (W0, b0, W1, b1, ...); views, not copies."""
        out = []
        for layer in self.layers:
            out.append(layer.weights)
            if layer.bias is not None:
                out.append(layer.bias)
        return out

    def touch(self):
        """Mark parameters as changed, invalidating outstanding caches."""
        self.version += 1


@dataclass
class ForwardCache:
    inputs: np.ndarray
    pre: list
    post: list
    model_id: int
    version: int

    @property
    def output(self) -> np.ndarray:
        return self.post[-1]


def _init_range(rng: Rng, shape, bound: float) -> np.ndarray:
    return rng.uniform(-bound, bound, shape)


def build_model(input_dim: int, hidden: list, output_dim: int, kind: str = "siren",
                hp: Hyperparams | None = None, f_nyquist: float | None = None,
                rng: Rng | int = 0, encode: bool | None = None) -> Model:
    """Assemble and initialize a model of the given family.

    Positional-encoding models get a bias-free projection from the embedding to
    the first hidden width ahead of the hidden stack.
    """
    if kind not in _FAMILY:
        raise BuildError(f"unknown model kind {kind!r}; choose from {', '.join(MODEL_KINDS)}")
    hp = hp or Hyperparams()
    rng = rng if isinstance(rng, Rng) else Rng(rng)
    hidden = list(hidden)
    if not hidden or any(int(w) < 1 for w in hidden):
        raise BuildError(f"hidden widths must be non-empty and positive, got {hidden}")
    if input_dim < 1 or output_dim < 1:
        raise BuildError("input_dim and output_dim must be positive")
    act_kind, periodic, outermost_linear = _FAMILY[kind]
    if hp.outermost_linear is not None:
        outermost_linear = hp.outermost_linear
    if act_kind in FM_KINDS and not (f_nyquist and f_nyquist > 0):
        raise BuildError(f"{kind} needs a positive f_nyquist")
    if not hp.omega0 > 0:
        raise BuildError("omega0 must be positive")

    encode = (kind == "pe") if encode is None else encode
    encoder = None
    fan_in = input_dim
    if encode:
        encoder = PositionalEncodingSpec.for_embedding(input_dim, hp.embed_size, hp.pe_scale)
        fan_in = encoder.total_embed
        hidden = [hidden[0]] + hidden

    def hidden_spec(width, index):
        if act_kind in FM_KINDS and (index == 0 or not hp.first_layer_only):
            mult = make_fm_multipliers(width, f_nyquist, hp.resolved_factor(kind),
                                       hp.k_offset, hp.angular_scale)
            return ActivationSpec(act_kind, hp.omega0, hp.gauss_scale, mult)
        if act_kind in FM_KINDS:
            plain = Kind.FINER if act_kind is Kind.FM_FINER else Kind.SINE
            return ActivationSpec(plain, hp.omega0, hp.gauss_scale)
        return ActivationSpec(act_kind, hp.omega0, hp.gauss_scale)

    if outermost_linear:
        out_spec = ActivationSpec(Kind.LINEAR, hp.omega0, hp.gauss_scale)
    else:
        # a width-1 or width-3 multiplier ladder would zero the first output channel
        plain = {Kind.FM_FINER: Kind.FINER, Kind.FM_SINE: Kind.SINE}.get(act_kind, act_kind)
        out_spec = ActivationSpec(plain, hp.omega0, hp.gauss_scale)

    layers = []
    dims = hidden + [output_dim]
    for i, fan_out in enumerate(dims):
        if i == 0:
            w = _init_range(rng, (fan_out, fan_in), 1.0 / fan_in)
        elif periodic:
            w = _init_range(rng, (fan_out, fan_in), math.sqrt(6.0 / fan_in) / hp.omega0)
        else:
            w = _init_range(rng, (fan_out, fan_in), math.sqrt(6.0 / fan_in))
        if i == 0 and encoder is not None:
            b = None
        elif i == 0 and act_kind in FINER_KINDS:
            b = _init_range(rng, fan_out, 1.0)
        else:
            b = _init_range(rng, fan_out, 1.0 / math.sqrt(fan_in))
        spec = out_spec if i == len(dims) - 1 else hidden_spec(fan_out, i)
        layers.append(Layer(w, b, spec))
        fan_in = fan_out

    meta = {"f_nyquist": f_nyquist, "seed": rng.seed, "hyperparams": vars(hp).copy()}
    return Model(layers, input_dim, encoder, outermost_linear, kind, meta)


def param_count(model: Model) -> int:
    return sum(p.size for p in model.params())


def closed_form_param_count(fan_ins, fan_outs, biases) -> int:
    return sum(o * i + (o if b else 0) for i, o, b in zip(fan_ins, fan_outs, biases))


def forward(model: Model, coords) -> ForwardCache:
    x = np.asarray(coords, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ShapeError(f"coords of shape {x.shape} for a model with input_dim {model.input_dim}")
    a = positional_encode(model.encoder, x) if model.encoder is not None else x
    inputs = a
    pre, post = [], []
    for layer in model.layers:
        z = matmul(a, layer.weights.T)
        if layer.bias is not None:
            z += layer.bias
        a = activate(layer.activation, z)
        pre.append(z)
        post.append(a)
    return ForwardCache(inputs, pre, post, id(model), model.version)


def predict(model: Model, coords, batch_size: int | None = None) -> np.ndarray:
    x = np.asarray(coords, dtype=np.float64)
    if batch_size is None or x.shape[0] <= batch_size:
        return forward(model, x).output
    return np.concatenate([forward(model, x[i:i + batch_size]).output
                           for i in range(0, x.shape[0], batch_size)])


def backward(model: Model, cache: ForwardCache, grad_output) -> list:
    """Gradients in :meth:`Model.params` order for a loss with the given output gradient."""
    if cache.model_id != id(model) or cache.version != model.version \
            or len(cache.pre) != len(model.layers):
        raise CacheError("forward cache does not belong to this model state")
    g = np.asarray(grad_output, dtype=np.float64)
    if g.shape != cache.output.shape:
        raise ShapeError(f"grad_output {g.shape} vs output {cache.output.shape}")
    grads = []
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        dz = g * activate_grad(layer.activation, cache.pre[i])
        a_prev = cache.post[i - 1] if i > 0 else cache.inputs
        if layer.bias is not None:
            grads.append(dz.sum(axis=0))
        grads.append(matmul(dz.T, a_prev))
        if i > 0:
            g = matmul(dz, layer.weights)
    grads.reverse()
    return grads


def loss_and_grads(model: Model, coords, targets):
    """Mean squared error and its parameter gradients for one batch."""
    from .training import mse_loss

    cache = forward(model, coords)
    loss, dout = mse_loss(cache.output, targets)
    return loss, backward(model, cache, dout), cache


# -- checkpoints ---------------------------------------------------------------
#
# Layout: 8-byte magic b"FMINRCK\x01", little-endian uint32 header length,
# UTF-8 JSON header (sorted keys), then every parameter array in params()
# order as little-endian float64, row-major.

MAGIC = b"FMINRCK\x01"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _header(model: Model) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "input_dim": model.input_dim,
        "outermost_linear": model.outermost_linear,
        "encoder": model.encoder.to_dict() if model.encoder else None,
        "layers": [
            {"fan_in": l.fan_in, "fan_out": l.fan_out, "bias": l.bias is not None,
             "activation": l.activation.to_dict()}
            for l in model.layers
        ],
        "meta": model.meta,
    }


def checkpoint_bytes(model: Model) -> bytes:
    header = json.dumps(_header(model), sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in model.params())
    return MAGIC + struct.pack("<I", len(header)) + header + body


def save_checkpoint(model: Model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(model))


def load_checkpoint(path) -> Model:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint (bad magic)")
    (n,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12:12 + n].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format_version {header.get('format_version')}")
    offset = 12 + n
    layers = []
    for spec in header["layers"]:
        count = spec["fan_out"] * spec["fan_in"]
        w = np.frombuffer(raw, "<f8", count, offset).reshape(spec["fan_out"], spec["fan_in"])
        offset += 8 * count
        b = None
        if spec["bias"]:
            b = np.frombuffer(raw, "<f8", spec["fan_out"], offset)
            offset += 8 * spec["fan_out"]
        layers.append(Layer(w.astype(np.float64), None if b is None else b.astype(np.float64),
                            ActivationSpec.from_dict(spec["activation"])))
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    enc = header["encoder"]
    return Model(layers, header["input_dim"],
                 PositionalEncodingSpec(**enc) if enc else None,
                 header["outermost_linear"], header["kind"], header["meta"])
