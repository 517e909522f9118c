"""Signatures and log-signatures of piecewise-linear paths.

The signature of a piecewise-linear path is the ordered product of the
exponentials of its increments. Batched signatures are accumulated level by
level with cumulative sums along the segment axis, in row blocks small enough
that temporaries are recycled by the allocator instead of freshly mapped.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .free_lie import HallBasis, HallTree, bracket_to_tensor, build_hall_basis
from .group import GroupElement
from .tensor import (
    TruncatedTensor,
    _outer,
    levels_log,
    levels_segment_exp,
    word_index,
)

__all__ = [
    "PLPath",
    "sig_segment",
    "sig_pl_path",
    "log_sig_pl_path",
    "chen_strichartz_logsig",
    "iterated_integral_word",
    "sig_levels_from_increments",
    "logsig_from_increments",
]


@dataclass(frozen=True, eq=False)
class PLPath:
    """Piecewise-linear path through breakpoints ``(times[j], values[j])``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        x = np.array(self.values, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] != t.size:
            raise ValueError(f"values must have shape ({t.size}, d), got {x.shape}")
        if t.size < 2:
            raise ValueError("a path needs at least two breakpoints")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x))):
            raise ValueError("path breakpoints must be finite")
        if np.any(np.diff(t) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        t.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", x)

    @classmethod
    def from_points(cls, points, T: float = 1.0) -> "PLPath":
        """Breakpoints at equally spaced times on ``[0, T]``."""
        points = np.asarray(points, dtype=float)
        return cls(np.linspace(0.0, T, len(points)), points)

    @classmethod
    def from_increments(cls, increments, T: float = 1.0) -> "PLPath":
        increments = np.asarray(increments, dtype=float)
        start = np.zeros((1, increments.shape[1]))
        return cls.from_points(np.concatenate([start, np.cumsum(increments, axis=0)]), T)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def concat(self, other: "PLPath") -> "PLPath":
        """Run ``other`` after ``self``, translated to start at this path's endpoint."""
        if other.d != self.d:
            raise ValueError("cannot concatenate paths of different dimension")
        t = np.concatenate([self.times, self.times[-1] + other.times[1:] - other.times[0]])
        x = np.concatenate([self.values, self.values[-1] + other.values[1:] - other.values[0]])
        return PLPath(t, x)


def sig_segment(v, N: int) -> TruncatedTensor:
    """Signature of a straight segment with increment ``v``: ``exp(v)``."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError("segment increment must be finite")
    return TruncatedTensor(v.size, N, tuple(levels_segment_exp(v, N)))


ROW_BLOCK = 256


def _sig_levels_block(increments: np.ndarray, N: int) -> list[np.ndarray]:
    """Signature levels of one row block.

    Level ``k`` is the cumulative sum over segments of
    ``sum_i S_i(before segment) (x) v^(k-i)/(k-i)!``, so each level costs a
    few vectorised products regardless of ``m``.
    """
    seg = levels_segment_exp(increments, N)
    batch = increments.shape[:-2]
    out = [np.ones(batch + (1,))]
    before = [None]
    for k in range(1, N + 1):
        c = seg[k].copy() if k > 1 else seg[1]
        for i in range(1, k):
            c += _outer(before[i], seg[k - i])
        running = np.cumsum(c, axis=-2)
        out.append(running[..., -1, :].copy())
        if k < N:
            shifted = np.zeros_like(running)
            shifted[..., 1:, :] = running[..., :-1, :]
            before.append(shifted)
    return out


def sig_levels_from_increments(increments: np.ndarray, N: int) -> list[np.ndarray]:
    """Batched signature levels of PL paths given increments ``(..., m, d)``."""
    increments = np.asarray(increments, dtype=float)
    if increments.ndim < 2 or increments.shape[-2] < 1:
        raise ValueError("increments must have shape (..., m, d) with m >= 1")
    batch = increments.shape[:-2]
    flat = increments.reshape((-1,) + increments.shape[-2:])
    if flat.shape[0] <= ROW_BLOCK:
        return _sig_levels_block(increments, N)
    blocks = [_sig_levels_block(flat[i : i + ROW_BLOCK], N) for i in range(0, flat.shape[0], ROW_BLOCK)]
    return [np.concatenate([b[k] for b in blocks]).reshape(batch + (-1,)) for k in range(N + 1)]


def logsig_from_increments(increments: np.ndarray, basis: HallBasis, check: bool = False) -> np.ndarray:
    """Batched log-signature coordinates ``(..., n)`` of PL paths."""
    increments = np.asarray(increments, dtype=float)
    if increments.ndim < 2 or increments.shape[-2] < 1:
        raise ValueError("increments must have shape (..., m, d) with m >= 1")
    batch = increments.shape[:-2]
    flat = increments.reshape((-1,) + increments.shape[-2:])
    out = np.empty((flat.shape[0], basis.n))
    for i in range(0, flat.shape[0], ROW_BLOCK):
        levels = _sig_levels_block(flat[i : i + ROW_BLOCK], basis.N)
        size = np.sqrt(sum(np.sum(lv**2, axis=-1) for lv in levels[1:])) if check else None
        out[i : i + ROW_BLOCK] = basis.levels_to_coords(levels_log(levels), check=check, reference=size)
    return out.reshape(batch + (basis.n,))


def sig_pl_path(path: PLPath, N: int) -> TruncatedTensor:
    levels = sig_levels_from_increments(path.increments, N)
    return TruncatedTensor(path.d, N, tuple(levels))


def log_sig_pl_path(path: PLPath, basis: HallBasis) -> GroupElement:
    if path.d != basis.d:
        raise ValueError(f"path dimension {path.d} does not match basis d={basis.d}")
    return GroupElement(basis, logsig_from_increments(path.increments, basis, check=True))


def iterated_integral_word(path: PLPath, word: Sequence[int]) -> float:
    """Iterated integral of ``word`` over the ordered simplex, by exact
    polynomial integration segment by segment."""
    word = tuple(word)
    for letter in word:
        if not 1 <= letter <= path.d:
            raise ValueError(f"letter {letter} outside alphabet 1..{path.d}")
    k = len(word)
    vals = np.zeros(k + 1)
    vals[0] = 1.0
    for v in path.increments:
        polys = [np.array([1.0])]
        for j in range(1, k + 1):
            integral = P.polyint(polys[-1]) * v[word[j - 1] - 1]
            integral[0] += vals[j]
            polys.append(integral)
        vals = np.array([P.polyval(1.0, p) for p in polys])
    return float(vals[k])


def _descents(perm: Sequence[int]) -> int:
    return sum(1 for j in range(len(perm) - 1) if perm[j] > perm[j + 1])


def _right_nested(word: Sequence[int]) -> HallTree:
    tree = HallTree.leaf(word[-1])
    for letter in reversed(word[:-1]):
        tree = HallTree.node(HallTree.leaf(letter), tree)
    return tree


def chen_strichartz_logsig(path: PLPath, basis: HallBasis) -> GroupElement:
    """Log-signature assembled from the Chen-Strichartz expansion (N <= 3).

    ``log S = sum_I Lambda_I e_I`` with ``e_I`` the right-nested bracket and
    ``Lambda_I`` a signed, descent-weighted sum of iterated integrals over
    permuted letter positions. Iterated integrals come from
    ``iterated_integral_word``, so no tensor logarithm is involved.
    """
    N, d = basis.N, basis.d
    if N > 3:
        raise ValueError("chen_strichartz_logsig supports N <= 3 only")
    if path.d != d:
        raise ValueError(f"path dimension {path.d} does not match basis d={d}")
    cache: dict = {}

    def integral(w):
        if w not in cache:
            cache[w] = iterated_integral_word(path, w)
        return cache[w]

    levels = [np.zeros(d**k) for k in range(N + 1)]
    for k in range(1, N + 1):
        perms = list(itertools.permutations(range(k)))
        for word in itertools.product(range(1, d + 1), repeat=k):
            lam = 0.0
            for sigma in perms:
                e = _descents(sigma)
                inv = np.argsort(sigma)
                permuted = tuple(word[inv[j]] for j in range(k))
                lam += (-1) ** e / (k * k * comb(k - 1, e)) * integral(permuted)
            if lam != 0.0:
                levels[k] += lam * bracket_to_tensor(_right_nested(word), d, N).levels[k]
    coords = basis.levels_to_coords(levels, check=True)
    return GroupElement(basis, coords)


def word_coefficient(levels: Sequence[np.ndarray], word: Sequence[int], d: int) -> np.ndarray:
    """Batched coefficient of ``word`` in signature levels."""
    return np.asarray(levels[len(word)])[..., word_index(word, d)]


def logsig_of_points(points: np.ndarray, d: int, N: int) -> np.ndarray:
    """Log-signature coordinates of the PL path through ``points`` (starting anywhere)."""
    return logsig_from_increments(np.diff(np.asarray(points, dtype=float), axis=-2), build_hall_basis(d, N))
