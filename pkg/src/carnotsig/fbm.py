"""Exact-law sampling of d-dimensional fractional Brownian motion.

Both samplers produce samples in fixed chunks of ``CHUNK`` rows, and every
chunk draws from its own Philox streams keyed by ``(seed, chunk, index)``
(the Cholesky sampler uses one stream per coordinate, the circulant sampler
one per coordinate pair). Output therefore does not depend on how many
worker threads consume the chunks.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

__all__ = [
    "FbmBatch",
    "fbm_cov",
    "fbm_cov_matrix",
    "fgn_autocov",
    "circulant_eigenvalues",
    "sample_fbm_cholesky",
    "sample_fbm_circulant",
    "increment_chunks",
    "chunk_generator",
    "CHUNK",
]

logger = logging.getLogger(__name__)

CHUNK = 4096


def _check_hurst(H: float):
    if not 0.0 < H < 1.0:
        raise ValueError(f"Hurst parameter must lie in (0, 1), got {H}")


def fbm_cov(s, t, H: float):
    """``R(s, t) = (s^2H + t^2H - |t - s|^2H) / 2``."""
    _check_hurst(H)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("fBm covariance needs nonnegative times")
    out = 0.5 * (s ** (2 * H) + t ** (2 * H) - np.abs(t - s) ** (2 * H))
    return float(out) if out.ndim == 0 else out


def fbm_cov_matrix(grid, H: float) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    return fbm_cov(grid[:, None], grid[None, :], H)


def fgn_autocov(k, H: float) -> np.ndarray:
    """Autocovariance of unit-step fractional Gaussian noise at lags ``k``."""
    k = np.abs(np.asarray(k, dtype=float))
    return 0.5 * ((k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))


@lru_cache(maxsize=32)
def circulant_eigenvalues(steps: int, H: float) -> np.ndarray:
    """Eigenvalues of the size-``2 steps`` circulant embedding of fGn."""
    row = fgn_autocov(np.arange(steps + 1), H)
    circ = np.concatenate([row, row[-2:0:-1]])
    eig = np.fft.fft(circ).real
    eig.setflags(write=False)
    return eig


@dataclass(frozen=True, eq=False)
class FbmBatch:
    """Sampled fBm trajectories, ``samples[i, j, c] = B^c(grid[j])`` for draw ``i``."""

    H: float
    grid: np.ndarray
    samples: np.ndarray
    seed: int

    def __post_init__(self):
        _check_hurst(self.H)
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid[0] <= 0 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be increasing and start after 0")
        if self.samples.ndim != 3 or self.samples.shape[1] != grid.size:
            raise ValueError(f"samples must have shape (count, {grid.size}, d)")

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[2]

    @property
    def increments(self) -> np.ndarray:
        """Increments over ``[0, grid[0]], [grid[0], grid[1]], ...``."""
        return np.diff(self.samples, axis=1, prepend=0.0)


def chunk_generator(seed: int, chunk: int, coord: int) -> np.random.Generator:
    """Independent Philox stream for one (chunk, coordinate) cell."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, chunk, coord])
    return np.random.Generator(np.random.Philox(ss))


@lru_cache(maxsize=32)
def _cholesky_factor(grid: tuple, H: float) -> np.ndarray:
    cov = fbm_cov_matrix(np.array(grid), H)
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"fBm covariance is not numerically positive definite on this grid "
            f"(condition number {np.linalg.cond(cov):.3e})"
        ) from exc
    L.setflags(write=False)
    return L


def _cholesky_chunk(L: np.ndarray, d: int, rows: int, seed: int, chunk: int) -> np.ndarray:
    out = np.empty((rows, L.shape[0], d))
    for c in range(d):
        z = chunk_generator(seed, chunk, c).standard_normal((rows, L.shape[0]))
        out[:, :, c] = z @ L.T
    return out


ROW_BLOCK = 256


def _circulant_chunk(steps: int, H: float, T: float, d: int, rows: int, seed: int, chunk: int) -> np.ndarray:
    # Returns increments. With W = FFT(sqrt(eig / 2m) (Z1 + i Z2)), Re W and Im W
    # are independent with the circulant covariance, so one FFT serves a pair
    # of coordinates; pair p draws from stream (seed, chunk, p). Rows go in
    # small blocks so FFT temporaries stay in recycled memory.
    eig = np.clip(circulant_eigenvalues(steps, H), 0.0, None)
    scale = np.sqrt(eig / (2 * steps)) * (T / steps) ** H
    out = np.empty((rows, steps, d))
    for pair in range((d + 1) // 2):
        g = chunk_generator(seed, chunk, pair)
        for r in range(0, rows, ROW_BLOCK):
            k = min(ROW_BLOCK, rows - r)
            z = g.standard_normal((k, 2 * steps)) + 1j * g.standard_normal((k, 2 * steps))
            w = np.fft.fft(scale * z, axis=1)[:, :steps]
            out[r : r + k, :, 2 * pair] = w.real
            if 2 * pair + 1 < d:
                out[r : r + k, :, 2 * pair + 1] = w.imag
    return out


def _chunks(count: int) -> list[tuple[int, int]]:
    return [(i, min(CHUNK, count - i * CHUNK)) for i in range((count + CHUNK - 1) // CHUNK)]


def _run_chunks(fn, count: int, threads: int | None) -> list[np.ndarray]:
    jobs = _chunks(count)
    if threads is None or threads <= 1 or len(jobs) == 1:
        return [fn(rows, chunk) for chunk, rows in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(job[1], job[0]), jobs))


def sample_fbm_cholesky(grid, H: float, d: int, count: int, seed: int, threads: int | None = None) -> FbmBatch:
    """Exact sampling on an arbitrary grid via the Cholesky factor of ``R``."""
    _check_hurst(H)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid[0] <= 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be increasing and start after 0")
    if count < 1 or d < 1:
        raise ValueError("count and d must be positive")
    L = _cholesky_factor(tuple(grid.tolist()), float(H))
    parts = _run_chunks(lambda rows, chunk: _cholesky_chunk(L, d, rows, seed, chunk), count, threads)
    return FbmBatch(H, grid, np.concatenate(parts), seed)


def _circulant_ok(steps: int, H: float) -> bool:
    eig = circulant_eigenvalues(steps, H)
    return bool(eig.min() >= -1e-10 * eig.max())


def sample_fbm_circulant(
    steps: int, H: float, d: int, count: int, seed: int, T: float = 1.0, threads: int | None = None
) -> FbmBatch:
    """Davies-Harte sampling on the uniform grid ``T/steps, ..., T``.

    Falls back to the Cholesky sampler (with a warning) if the circulant
    embedding has a negative eigenvalue.
    """
    _check_hurst(H)
    if steps < 1 or count < 1 or d < 1:
        raise ValueError("steps, count and d must be positive")
    grid = T * np.arange(1, steps + 1) / steps
    if not _circulant_ok(steps, H):
        warnings.warn("circulant embedding not nonnegative; falling back to Cholesky", RuntimeWarning)
        return sample_fbm_cholesky(grid, H, d, count, seed, threads)
    parts = _run_chunks(
        lambda rows, chunk: _circulant_chunk(steps, H, T, d, rows, seed, chunk), count, threads
    )
    return FbmBatch(H, grid, np.cumsum(np.concatenate(parts), axis=1), seed)


def increment_chunks(
    steps: int, H: float, d: int, count: int, seed: int, T: float = 1.0, method: str = "circulant"
) -> Iterator[np.ndarray]:
    """Yield increment blocks ``(rows, steps, d)`` chunk by chunk.

    Used by the Monte Carlo layer to stream large sample counts without
    materialising every path. Chunk ``i`` is identical to rows
    ``i*CHUNK:(i+1)*CHUNK`` of the matching ``sample_fbm_*`` batch.
    """
    _check_hurst(H)
    if method == "circulant" and not _circulant_ok(steps, H):
        warnings.warn("circulant embedding not nonnegative; falling back to Cholesky", RuntimeWarning)
        method = "cholesky"
    if method == "circulant":
        for chunk, rows in _chunks(count):
            yield _circulant_chunk(steps, H, T, d, rows, seed, chunk)
    elif method == "cholesky":
        grid = T * np.arange(1, steps + 1) / steps
        L = _cholesky_factor(tuple(grid.tolist()), float(H))
        for chunk, rows in _chunks(count):
            yield np.diff(_cholesky_chunk(L, d, rows, seed, chunk), axis=1, prepend=0.0)
    else:
        raise ValueError(f"unknown sampling method {method!r}")
