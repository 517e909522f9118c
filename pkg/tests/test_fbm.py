import warnings

import numpy as np
import pytest
from scipy import stats

from carnotsig import fbm
from carnotsig.fbm import (
    CHUNK,
    circulant_eigenvalues,
    fbm_cov,
    fbm_cov_matrix,
    fgn_autocov,
    increment_chunks,
    sample_fbm_cholesky,
    sample_fbm_circulant,
)

from conftest import covariance_z_scores


def test_covariance_formula():
    assert fbm_cov(0.5, 0.5, 0.3) == pytest.approx(0.5**0.6)
    assert fbm_cov(1.0, 0.5, 0.5) == pytest.approx(0.5)  # Brownian min(s, t)
    assert fbm_cov(1.0, 0.25, 0.75) == pytest.approx(0.5 * (1 + 0.25**1.5 - 0.75**1.5))
    with pytest.raises(ValueError):
        fbm_cov(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        fbm_cov(-1.0, 1.0, 0.5)


@pytest.mark.parametrize("H", [0.1, 0.3, 0.5, 0.75, 0.95])
def test_covariance_is_positive_definite(H):
    grid = np.arange(1, 33) / 32
    assert np.linalg.eigvalsh(fbm_cov_matrix(grid, H)).min() > 0


@pytest.mark.parametrize("H", [0.2, 0.5, 0.8])
def test_fgn_autocov_is_increment_covariance(H):
    t = np.arange(0, 12, dtype=float)
    R = fbm_cov_matrix(t[1:], H)
    R = np.pad(R, ((1, 0), (1, 0)))
    inc = R[1:, 1:] - R[:-1, 1:] - R[1:, :-1] + R[:-1, :-1]
    assert np.allclose(inc[0], fgn_autocov(np.arange(11), H), atol=1e-12)


@pytest.mark.parametrize("H", [0.05, 0.3, 0.5, 0.75, 0.99])
def test_circulant_embedding_nonnegative(H):
    eig = circulant_eigenvalues(256, H)
    assert eig.min() > -1e-10 * eig.max()


@pytest.mark.parametrize("H", [0.3, 0.5, 0.75])
@pytest.mark.parametrize("sampler", ["circulant", "cholesky"])
def test_empirical_covariance(H, sampler):
    grid = np.arange(1, 9) / 8
    if sampler == "circulant":
        batch = sample_fbm_circulant(8, H, 1, 100_000, seed=11)
    else:
        batch = sample_fbm_cholesky(grid, H, 1, 100_000, seed=11)
    z = covariance_z_scores(batch.samples[:, :, 0], fbm_cov_matrix(grid, H))
    assert z.max() < 3.0


def test_cross_coordinate_independence():
    batch = sample_fbm_circulant(16, 0.3, 3, 50_000, seed=5)
    ends = batch.samples[:, -1, :]
    corr = np.corrcoef(ends.T)
    assert np.max(np.abs(corr - np.eye(3))) < 4 / np.sqrt(50_000)


def test_two_time_covariance_at_low_hurst():
    batch = sample_fbm_circulant(2, 0.3, 1, 100_000, seed=3)
    prod = batch.samples[:, 0, 0] * batch.samples[:, 1, 0]
    se = prod.std(ddof=1) / np.sqrt(prod.size)
    assert abs(prod.mean() - fbm_cov(1.0, 0.5, 0.3)) < 3 * se


@pytest.mark.parametrize("H", [0.3, 0.75])
def test_samplers_agree_in_distribution(H):
    circ = sample_fbm_circulant(64, H, 2, 10_000, seed=1)
    chol = sample_fbm_cholesky(circ.grid, H, 2, 10_000, seed=2)
    for c in range(2):
        assert stats.ks_2samp(circ.samples[:, -1, c], chol.samples[:, -1, c]).pvalue > 0.01
        assert stats.ks_2samp(circ.samples[:, 20, c], chol.samples[:, 20, c]).pvalue > 0.01


def test_brownian_increments_are_independent():
    inc = sample_fbm_circulant(32, 0.5, 1, 50_000, seed=9).increments[:, :, 0]
    corr = np.corrcoef(inc[:, :8].T)
    assert np.max(np.abs(corr - np.eye(8))) < 4.5 / np.sqrt(50_000)
    assert np.allclose(inc.var(axis=0).mean(), 1 / 32, rtol=0.02)


def test_determinism_and_threads():
    a = sample_fbm_circulant(64, 0.7, 3, 2 * CHUNK + 5, seed=42)
    b = sample_fbm_circulant(64, 0.7, 3, 2 * CHUNK + 5, seed=42, threads=3)
    c = sample_fbm_circulant(64, 0.7, 3, 2 * CHUNK + 5, seed=43)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)
    grid = np.linspace(0.1, 1, 10)
    x = sample_fbm_cholesky(grid, 0.3, 2, CHUNK + 1, seed=1)
    y = sample_fbm_cholesky(grid, 0.3, 2, CHUNK + 1, seed=1, threads=2)
    assert np.array_equal(x.samples, y.samples)


@pytest.mark.parametrize("method", ["circulant", "cholesky"])
def test_streaming_chunks_match_batch(method):
    count = CHUNK + 300
    parts = np.concatenate(list(increment_chunks(32, 0.6, 2, count, seed=8, T=2.0, method=method)))
    if method == "circulant":
        batch = sample_fbm_circulant(32, 0.6, 2, count, seed=8, T=2.0)
    else:
        batch = sample_fbm_cholesky(2.0 * np.arange(1, 33) / 32, 0.6, 2, count, seed=8)
    assert np.allclose(parts, batch.increments, atol=1e-13)


def test_self_similarity_of_horizon():
    a = sample_fbm_circulant(16, 0.7, 1, 1000, seed=4, T=1.0)
    b = sample_fbm_circulant(16, 0.7, 1, 1000, seed=4, T=3.0)
    assert np.allclose(b.samples, 3.0**0.7 * a.samples, rtol=1e-12)


def test_fallback_to_cholesky(monkeypatch):
    monkeypatch.setattr(fbm, "_circulant_ok", lambda steps, H: False)
    with pytest.warns(RuntimeWarning):
        batch = fbm.sample_fbm_circulant(8, 0.5, 1, 10, seed=0)
    assert np.array_equal(batch.samples, sample_fbm_cholesky(batch.grid, 0.5, 1, 10, seed=0).samples)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        sample_fbm_circulant(8, 1.2, 1, 10, seed=0)
    with pytest.raises(ValueError):
        sample_fbm_cholesky([0.5, 0.2], 0.5, 1, 10, seed=0)
    with pytest.raises(ValueError):
        list(increment_chunks(8, 0.5, 1, 10, seed=0, method="spectral"))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sample_fbm_circulant(4, 0.5, 1, 3, seed=0)
