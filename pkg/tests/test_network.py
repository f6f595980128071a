import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fminr.activations import ActivationSpec, Kind
from fminr.network import (
    BuildError, CacheError, Hyperparams, Layer, Model, backward, build_model,
    checkpoint_bytes, closed_form_param_count, forward, load_checkpoint, param_count,
    save_checkpoint,
)
from fminr.training import mse_loss

from gradcheck import gradient_relative_error, small_model

NON_PE = ["siren", "finer", "fm-siren", "fm-finer", "gauss"]


@pytest.mark.parametrize("kind", NON_PE)
def test_audio_size(kind):
    assert param_count(build_model(1, [256, 256], 1, kind, f_nyquist=2000.0)) == 66_561


@pytest.mark.parametrize("kind", NON_PE)
def test_image_size(kind):
    assert param_count(build_model(2, [256, 256], 3, kind, f_nyquist=256.0)) == 67_331


@pytest.mark.parametrize("kind", NON_PE)
def test_shape_size(kind):
    assert param_count(build_model(3, [256] * 3, 1, kind, f_nyquist=256.0)) == 132_865


def test_pe_sizes():
    assert param_count(build_model(1, [256, 256], 1, "pe")) == 197_377
    assert param_count(build_model(2, [256, 256], 3, "pe")) == 197_891


def test_single_layer_budget():
    assert param_count(build_model(2, [512], 1, "fm-siren", f_nyquist=32.0)) == 2_049


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.lists(st.integers(1, 12), min_size=1, max_size=4),
       st.integers(1, 3), st.sampled_from(NON_PE + ["pe"]))
def test_param_count_closed_form(d, widths, out, kind):
    hp = Hyperparams(embed_size=12)
    m = build_model(d, widths, out, kind, hp, f_nyquist=8.0)
    fan_ins = [l.fan_in for l in m.layers]
    fan_outs = [l.fan_out for l in m.layers]
    biases = [l.bias is not None for l in m.layers]
    assert param_count(m) == closed_form_param_count(fan_ins, fan_outs, biases)


def test_init_bounds():
    m = build_model(2, [64, 64], 1, "siren", Hyperparams(omega0=30.0), rng=3)
    assert np.abs(m.layers[0].weights).max() <= 0.5
    assert np.abs(m.layers[1].weights).max() <= np.sqrt(6 / 64) / 30
    assert np.abs(m.layers[1].bias).max() <= 1 / 8


def test_finer_first_bias_wide():
    m = build_model(2, [256, 16], 1, "finer", rng=0)
    assert np.abs(m.layers[0].bias).max() > 0.9


def test_pe_first_layer_biasless():
    m = build_model(2, [32, 32], 1, "pe")
    assert m.layers[0].bias is None and m.layers[0].fan_in == 256


def test_fm_multipliers_attached():
    m = build_model(2, [8, 8], 1, "fm-finer", f_nyquist=30.0)
    for layer in m.layers[:2]:
        assert layer.activation.kind is Kind.FM_FINER
        np.testing.assert_allclose(layer.activation.multipliers, np.arange(8) * (2 / 3) * 30 / 8)
    assert m.layers[2].activation.kind is Kind.FINER


def test_first_layer_only():
    m = build_model(2, [8, 8], 1, "fm-siren", Hyperparams(first_layer_only=True), f_nyquist=30.0)
    assert m.layers[0].activation.kind is Kind.FM_SINE
    assert m.layers[1].activation.kind is Kind.SINE


def test_outermost_linear_by_family():
    assert build_model(1, [4], 1, "siren").layers[-1].activation.kind is Kind.LINEAR
    assert build_model(1, [4], 1, "finer").layers[-1].activation.kind is Kind.FINER


@pytest.mark.parametrize("bad", [dict(hidden=[]), dict(hidden=[0]), dict(kind="wire"),
                                 dict(kind="fm-siren", f_nyquist=None)])
def test_build_errors(bad):
    args = dict(input_dim=2, hidden=[4], output_dim=1, kind="siren", f_nyquist=None)
    args.update(bad)
    with pytest.raises(BuildError):
        build_model(**args)


def test_same_seed_same_params():
    a = build_model(2, [16, 16], 1, "fm-siren", f_nyquist=8.0, rng=11)
    b = build_model(2, [16, 16], 1, "fm-siren", f_nyquist=8.0, rng=11)
    assert checkpoint_bytes(a) == checkpoint_bytes(b)


def test_zero_weight_single_layer(rng):
    spec = ActivationSpec(Kind.SINE, 2.0)
    m = Model([Layer(np.zeros((3, 2)), np.array([0.1, 0.2, 0.3]), spec)], 2)
    out = forward(m, rng.normal(size=(5, 2))).output
    np.testing.assert_allclose(out, np.tile(np.sin(2.0 * np.array([0.1, 0.2, 0.3])), (5, 1)))


def test_linear_layer_is_affine(rng):
    w, b = rng.normal(size=(2, 3)), rng.normal(size=2)
    m = Model([Layer(w, b, ActivationSpec(Kind.LINEAR))], 3, outermost_linear=True)
    x = rng.normal(size=(7, 3))
    np.testing.assert_allclose(forward(m, x).output, x @ w.T + b, atol=1e-14)


def test_fm_dead_neuron(rng):
    m = build_model(2, [16], 1, "fm-siren", f_nyquist=32.0)
    feats = forward(m, rng.uniform(-1, 1, (100, 2))).post[0]
    assert np.all(feats[:, 0] == 0.0)


def test_forward_deterministic(rng):
    m = build_model(2, [32, 32], 1, "fm-finer", f_nyquist=16.0)
    x = rng.uniform(-1, 1, (64, 2))
    assert np.array_equal(forward(m, x).output, forward(m, x).output)


def test_zero_output_grad_gives_zero_grads(rng):
    m = build_model(2, [8, 8], 1, "siren")
    cache = forward(m, rng.uniform(-1, 1, (10, 2)))
    for g in backward(m, cache, np.zeros((10, 1))):
        assert not np.any(g)


def test_linear_regression_gradient(rng):
    w, b = rng.normal(size=(1, 3)), rng.normal(size=1)
    m = Model([Layer(w, b, ActivationSpec(Kind.LINEAR))], 3, outermost_linear=True)
    x, y = rng.normal(size=(20, 3)), rng.normal(size=(20, 1))
    cache = forward(m, x)
    _, dout = mse_loss(cache.output, y)
    dw, db = backward(m, cache, dout)
    resid = cache.output - y
    np.testing.assert_allclose(dw, 2 / 20 * resid.T @ x, atol=1e-13)
    np.testing.assert_allclose(db, 2 / 20 * resid.sum(axis=0), atol=1e-13)


def test_stale_cache_rejected(rng):
    m = build_model(2, [8], 1, "siren")
    cache = forward(m, rng.uniform(-1, 1, (4, 2)))
    m.touch()
    with pytest.raises(CacheError):
        backward(m, cache, np.ones((4, 1)))
    other = build_model(2, [8], 1, "siren")
    with pytest.raises(CacheError):
        backward(other, forward(m, np.zeros((4, 2))), np.ones((4, 1)))


def test_fm_finer_gradient_small(rng):
    m = build_model(1, [2, 2], 1, "fm-finer", f_nyquist=6.0, rng=4)
    x, y = rng.uniform(-1, 1, (16, 1)), rng.uniform(-1, 1, (16, 1))
    err, _ = gradient_relative_error(m, x, y)
    assert err < 1e-5


@pytest.mark.parametrize("encode", [False, True])
@pytest.mark.parametrize("kind", [Kind.SINE, Kind.FINER, Kind.FM_SINE, Kind.FM_FINER,
                                  Kind.GAUSS, Kind.LINEAR, Kind.RELU])
def test_gradient_check(kind, encode, rng):
    m = small_model(kind, 0, encode)
    x, y = rng.uniform(-1, 1, (12, 2)), rng.uniform(-1, 1, (12, 1))
    err, g = gradient_relative_error(m, x, y)
    assert np.linalg.norm(g) > 1e-6
    assert err < 1e-5


def test_checkpoint_roundtrip(tmp_path, rng):
    m = build_model(2, [8, 8], 3, "pe", Hyperparams(embed_size=16), rng=2)
    path = tmp_path / "m.ckpt"
    save_checkpoint(m, path)
    back = load_checkpoint(path)
    assert back.kind == "pe" and back.encoder == m.encoder
    for p, q in zip(m.params(), back.params()):
        assert np.array_equal(p, q)
    x = rng.uniform(-1, 1, (5, 2))
    assert np.array_equal(forward(m, x).output, forward(back, x).output)


def test_checkpoint_preserves_multipliers(tmp_path):
    m = build_model(2, [8], 1, "fm-finer", f_nyquist=7.3)
    save_checkpoint(m, tmp_path / "m.ckpt")
    back = load_checkpoint(tmp_path / "m.ckpt")
    assert np.array_equal(back.layers[0].activation.multipliers, m.layers[0].activation.multipliers)
    assert checkpoint_bytes(back) == checkpoint_bytes(m)
