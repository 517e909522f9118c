"""Discrete Cameron-Martin norms of fractional Brownian motion.

A grid function ``h`` (values at ``0 < t_1 < ... < t_m``, with ``h(0) = 0``)
is measured by ``sqrt(sum_c h_c^T G^{-1} h_c)`` where ``G`` is the fBm
covariance on the grid. This is the RKHS norm of the minimal-norm
interpolant of the grid values, so it never exceeds the continuum norm and
increases under grid refinement.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_triangular

from .fbm import fbm_cov_matrix

__all__ = [
    "GridFunction",
    "RescaleReport",
    "cm_gram",
    "cm_factor",
    "cm_whiten",
    "cm_norm_discrete",
    "dirichlet_norm",
    "concat_grid_paths",
    "rescale_check",
    "uniform_grid",
]

logger = logging.getLogger(__name__)

JITTER_REL = 1e-12


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size < 1 or grid[0] <= 0 or np.any(np.diff(grid) <= 0) or not np.all(np.isfinite(grid)):
        raise ValueError("grid must be finite, strictly increasing and start after 0")
    return grid


def uniform_grid(m: int, T: float = 1.0) -> np.ndarray:
    """``T/m, 2T/m, ..., T``."""
    if m < 1 or T <= 0:
        raise ValueError("need m >= 1 and T > 0")
    return T * np.arange(1, m + 1) / m


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Path values ``h(grid[j])`` in R^d; ``h(0) = 0`` is implicit.

    Attributes
    ----------
    grid : ndarray, shape (m,)
    values : ndarray, shape (m, d)
    H : float
        Hurst parameter defining the norm.
    """

    grid: np.ndarray
    values: np.ndarray
    H: float

    def __post_init__(self):
        grid = _check_grid(self.grid)
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != grid.size:
            raise ValueError(f"values must have shape ({grid.size}, d), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        if not 0.0 < self.H < 1.0:
            raise ValueError(f"Hurst parameter must lie in (0, 1), got {self.H}")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    @property
    def endpoint(self) -> np.ndarray:
        return self.values[-1]

    def points(self) -> np.ndarray:
        """Breakpoints including the origin, shape ``(m + 1, d)``."""
        return np.vstack([np.zeros((1, self.d)), self.values])

    def times(self) -> np.ndarray:
        return np.concatenate([[0.0], self.grid])

    def norm(self) -> float:
        return cm_norm_discrete(self)


def cm_gram(grid, H: float) -> np.ndarray:
    """Gram matrix ``G[j, k] = R(t_j, t_k)`` of fBm on ``grid``."""
    return fbm_cov_matrix(_check_grid(grid), H)


@lru_cache(maxsize=64)
def _factor(grid: tuple, H: float) -> tuple[np.ndarray, float]:
    G = cm_gram(np.array(grid), H)
    try:
        L = np.linalg.cholesky(G)
        jitter = 0.0
    except np.linalg.LinAlgError:
        jitter = JITTER_REL * np.trace(G) / G.shape[0]
        logger.warning("Gram matrix needed jitter %.3e (condition number %.3e)", jitter, np.linalg.cond(G))
        try:
            L = np.linalg.cholesky(G + jitter * np.eye(G.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                f"Gram matrix is singular on this grid (condition number {np.linalg.cond(G):.3e})"
            ) from exc
    L.setflags(write=False)
    return L, jitter


def cm_factor(grid, H: float) -> tuple[np.ndarray, float]:
    """Cached lower Cholesky factor of the Gram matrix and the jitter used (0 if none)."""
    grid = _check_grid(grid)
    return _factor(tuple(grid.tolist()), float(H))


def cm_whiten(grid, H: float, values: np.ndarray) -> np.ndarray:
    """``L^{-1} values``; the squared norm of the result is the discrete CM energy."""
    L, _ = cm_factor(grid, H)
    return solve_triangular(L, np.asarray(values, dtype=float), lower=True)


def cm_norm_discrete(h: GridFunction) -> float:
    """``sqrt(sum_c h_c^T G^{-1} h_c)``."""
    z = cm_whiten(h.grid, h.H, h.values)
    return float(np.sqrt(np.sum(z**2)))


def dirichlet_norm(h: GridFunction) -> float:
    """``sqrt(sum |dh|^2 / dt)``, the Brownian (H = 1/2) norm written through increments."""
    inc = np.diff(h.points(), axis=0)
    dt = np.diff(h.times())
    return float(np.sqrt(np.sum(inc**2 / dt[:, None])))


def concat_grid_paths(h1: GridFunction, h2: GridFunction) -> GridFunction:
    """Run ``h2`` (translated to start at ``h1(T1)``) after ``h1``."""
    if h1.d != h2.d:
        raise ValueError(f"dimension mismatch: {h1.d} vs {h2.d}")
    if h1.H != h2.H:
        raise ValueError(f"Hurst mismatch: {h1.H} vs {h2.H}")
    grid = np.concatenate([h1.grid, h1.T + h2.grid])
    values = np.vstack([h1.values, h1.endpoint + h2.values])
    return GridFunction(grid, values, h1.H)


@dataclass(frozen=True)
class RescaleReport:
    norm_before: float
    norm_after: float
    ratio: float
    expected: float


def rescale_check(h: GridFunction, T2: float) -> RescaleReport:
    """Compare ``h`` on ``[0, T1]`` with ``t -> h(T1 t / T2)`` on ``[0, T2]``.

    The rescaled Gram matrix is ``(T2/T1)^(2H)`` times the original, so the
    ratio of norms is ``(T1/T2)^H`` exactly.
    """
    if T2 <= 0:
        raise ValueError(f"T2 must be positive, got {T2}")
    T1 = h.T
    stretched = GridFunction(h.grid * (T2 / T1), h.values, h.H)
    before, after = cm_norm_discrete(h), cm_norm_discrete(stretched)
    ratio = after / before if before > 0 else 1.0
    return RescaleReport(before, after, ratio, (T1 / T2) ** h.H)
