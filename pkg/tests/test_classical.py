import numpy as np
import pytest
import scipy.fft
from hypothesis import given, settings, strategies as st

from fminr.classical import (
    BasisSet, DegenerateBasisError, SamplingInfo, dst2_forward, dst2_truncated_reconstruct,
    dst_basis, dst_forward, dst_inverse, nyquist_frequency, project_coefficients, synthesize,
)


def test_nyquist_audio():
    assert nyquist_frequency(SamplingInfo((4000,), 4000.0)) == 2000.0


@pytest.mark.parametrize("counts,expected", [((512, 768), 256.0), ((321, 481), 160.5)])
def test_nyquist_images(counts, expected):
    assert nyquist_frequency(SamplingInfo(counts)) == expected


def test_sampling_needs_two_samples():
    with pytest.raises(ValueError):
        SamplingInfo((1, 5))


@pytest.mark.parametrize("n", [4, 16, 64, 257])
def test_basis_orthogonal(n):
    phi = dst_basis(n).matrix
    gram = phi.T @ phi
    off = gram - np.diag(np.diag(gram))
    norms = np.sqrt(np.diag(gram))
    assert np.all(np.abs(off) < 1e-9 * np.outer(norms, norms))
    np.testing.assert_allclose(np.diag(gram), 1.0, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 7, 64, 255])
def test_dst_matches_scipy(n, rng):
    x = rng.normal(size=n)
    np.testing.assert_allclose(dst_forward(x), scipy.fft.dst(x, type=2, norm="ortho"), atol=1e-12)


def test_dst_zero():
    assert not np.any(dst_forward(np.zeros(9)))
    assert not np.any(dst_inverse(np.zeros(9)))


def test_dst_one_hot():
    phi = dst_basis(12).matrix
    c = dst_forward(phi[:, 5])
    expected = np.zeros(12)
    expected[5] = 1.0
    np.testing.assert_allclose(c, expected, atol=1e-10)
    np.testing.assert_allclose(dst_inverse(expected), phi[:, 5], atol=1e-15)


def test_parseval(rng):
    x = rng.normal(size=16)
    assert np.sum(dst_forward(x) ** 2) == pytest.approx(np.sum(x ** 2), abs=1e-10)


@pytest.mark.parametrize("n", [128, 1000, 4096])
def test_roundtrip(n, rng):
    x = rng.normal(size=n)
    assert np.max(np.abs(dst_inverse(dst_forward(x)) - x)) < 1e-10


def brute_truncate(img, m):
    """Independent path: scipy's separable DST, sort by magnitude, zero the tail."""
    c = scipy.fft.dstn(img, type=2, norm="ortho")
    flat = c.ravel()
    entries = sorted(range(flat.size), key=lambda i: (-abs(flat[i]), i))
    kept = np.zeros_like(flat)
    for i in entries[:m]:
        kept[i] = flat[i]
    return scipy.fft.idstn(kept.reshape(c.shape), type=2, norm="ortho")


def test_truncated_matches_brute_force(rng):
    img = rng.uniform(size=(16, 16))
    ours = dst2_truncated_reconstruct(img, 64)
    ref = brute_truncate(img, 64)
    assert abs(np.mean((ours - img) ** 2) - np.mean((ref - img) ** 2)) < 1e-12
    assert np.max(np.abs(ours - ref)) < 1e-12


def test_full_budget_identity(rng):
    img = rng.uniform(size=(9, 13))
    np.testing.assert_allclose(dst2_truncated_reconstruct(img, img.size), img, atol=1e-9)


def test_single_basis_image():
    ph, pw = dst_basis(8).matrix, dst_basis(6).matrix
    img = 2.5 * np.outer(ph[:, 3], pw[:, 1])
    np.testing.assert_allclose(dst2_truncated_reconstruct(img, 1), img, atol=1e-9)


def test_truncation_tie_break():
    # equal magnitudes: the lower (row, col) index wins
    ph = dst_basis(4).matrix
    img = np.outer(ph[:, 0], ph[:, 2]) + np.outer(ph[:, 1], ph[:, 0])
    c = dst2_forward(dst2_truncated_reconstruct(img, 1))
    assert abs(c[0, 2] - 1) < 1e-12 and abs(c[1, 0]) < 1e-12


def test_truncation_error_monotone(rng):
    img = rng.uniform(size=(12, 12))
    errs = [np.mean((dst2_truncated_reconstruct(img, m) - img) ** 2) for m in range(1, 145, 7)]
    assert all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize("m", [0, 17])
def test_budget_range(m):
    with pytest.raises(ValueError):
        dst2_truncated_reconstruct(np.zeros((4, 4)), m)


def test_project_scaled_column():
    basis = dst_basis(10)
    c = project_coefficients(3 * basis.matrix[:, 2], basis)
    expected = np.zeros(10)
    expected[2] = 3
    np.testing.assert_allclose(c, expected, atol=1e-10)


def test_project_orthogonal_signal():
    full = dst_basis(8).matrix
    basis = BasisSet(full[:, :4], np.arange(4))
    np.testing.assert_allclose(project_coefficients(full[:, 6], basis), 0, atol=1e-14)


def test_project_matches_normal_equations(rng):
    full = dst_basis(32).matrix
    cols = rng.choice(32, 8, replace=False)
    phi = full[:, cols] * rng.uniform(0.5, 3.0, 8)  # orthogonal, not normalized
    basis = BasisSet(phi, cols.astype(float))
    f = rng.normal(size=32)
    lsq = np.linalg.solve(phi.T @ phi, phi.T @ f)
    np.testing.assert_allclose(project_coefficients(f, basis), lsq, atol=1e-9)


def test_project_degenerate():
    with pytest.raises(DegenerateBasisError):
        project_coefficients(np.ones(3), BasisSet(np.zeros((3, 2)), np.zeros(2)))


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 64), st.integers(0, 2**32))
def test_span_roundtrip(n, seed):
    r = np.random.default_rng(seed)
    basis = dst_basis(n)
    keep = BasisSet(basis.matrix[:, : max(1, n // 2)], basis.frequencies[: max(1, n // 2)])
    f = keep.matrix @ r.normal(size=keep.matrix.shape[1])
    np.testing.assert_allclose(synthesize(project_coefficients(f, keep), keep), f, atol=1e-9)
