"""Truncated tensor algebra T_N(R^d).

Elements are stored densely, one flat block per level. Block ``k`` holds the
``d**k`` coefficients of words of length ``k`` in row-major order, so the
word ``(i1, ..., ik)`` (letters 1-based) sits at index
``sum((i_j - 1) * d**(k - j))``.

The module-level helpers prefixed ``levels_`` work on plain lists of arrays
with arbitrary leading batch dimensions; ``TruncatedTensor`` wraps a single
unbatched element. Everything above (signatures, group law, Monte Carlo)
is built on the batched helpers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "TruncatedTensor",
    "tensor_mul",
    "tensor_exp",
    "tensor_log",
    "tensor_inverse",
    "tensor_word_coeff",
    "word_index",
    "levels_mul",
    "levels_exp",
    "levels_log",
    "levels_segment_exp",
    "levels_unit",
]

_SCALAR_TOL = 1e-12


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched flattened outer product over the last axis."""
    out = a[..., :, None] * b[..., None, :]
    return out.reshape(out.shape[:-2] + (a.shape[-1] * b.shape[-1],))


def levels_unit(d: int, N: int, batch_shape: tuple = ()) -> list[np.ndarray]:
    levels = [np.zeros(batch_shape + (d**k,)) for k in range(N + 1)]
    levels[0][...] = 1.0
    return levels


def levels_mul(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Truncated product of two batched elements (batch dims broadcast)."""
    N = len(a) - 1
    out = []
    for k in range(N + 1):
        acc = None
        for i in range(k + 1):
            j = k - i
            if i == 0:
                term = a[0] * b[j]
            elif j == 0:
                term = a[i] * b[0]
            else:
                term = _outer(a[i], b[j])
            acc = term if acc is None else acc + term
        out.append(acc)
    return out


def levels_exp(z: Sequence[np.ndarray]) -> list[np.ndarray]:
    """exp of a batched element with zero scalar part."""
    N = len(z) - 1
    y = [np.zeros_like(z[0])] + list(z[1:])
    # Horner: exp(y) = 1 + y(1 + y/2(1 + y/3(...)))
    acc = [np.ones_like(z[0])] + [np.zeros_like(zk) for zk in z[1:]]
    for m in range(N, 0, -1):
        prod = levels_mul(y, acc)
        acc = [np.ones_like(z[0])] + [p / m for p in prod[1:]]
    return acc


def levels_log(x: Sequence[np.ndarray]) -> list[np.ndarray]:
    """log of a batched element with unit scalar part."""
    N = len(x) - 1
    y = [np.zeros_like(x[0])] + list(x[1:])
    # Horner: log(1+y) = y(1 - y(1/2 - y(1/3 - ...)))
    acc = [np.full_like(x[0], (-1.0) ** (N + 1) / N)] + [np.zeros_like(xk) for xk in x[1:]]
    for m in range(N - 1, 0, -1):
        acc = levels_mul(y, acc)
        acc[0] = acc[0] + (-1.0) ** (m + 1) / m
    return levels_mul(y, acc)


def levels_segment_exp(v: np.ndarray, N: int) -> list[np.ndarray]:
    """exp of batched first-level elements ``v`` of shape (..., d)."""
    v = np.asarray(v, dtype=float)
    out = [np.ones(v.shape[:-1] + (1,))]
    if N == 0:
        return out
    out.append(v.copy())
    for k in range(2, N + 1):
        out.append(_outer(out[-1], v) / k)
    return out


def word_index(word: Sequence[int], d: int) -> int:
    idx = 0
    for letter in word:
        if not 1 <= letter <= d:
            raise ValueError(f"letter {letter} outside alphabet 1..{d}")
        idx = idx * d + (letter - 1)
    return idx


@dataclass(frozen=True, eq=False)
class TruncatedTensor:
    """An element of T_N(R^d) with dense per-level storage."""

    d: int
    N: int
    levels: tuple

    def __post_init__(self):
        if self.d < 1 or self.N < 0:
            raise ValueError(f"invalid (d, N) = ({self.d}, {self.N})")
        if len(self.levels) != self.N + 1:
            raise ValueError(f"expected {self.N + 1} levels, got {len(self.levels)}")
        fixed = []
        for k, block in enumerate(self.levels):
            block = np.asarray(block, dtype=float).reshape(-1)
            if block.size != self.d**k:
                raise ValueError(f"level {k} must have {self.d**k} entries, got {block.size}")
            if not np.all(np.isfinite(block)):
                raise ValueError(f"level {k} has non-finite entries")
            block.setflags(write=False)
            fixed.append(block)
        object.__setattr__(self, "levels", tuple(fixed))

    @classmethod
    def unit(cls, d: int, N: int) -> "TruncatedTensor":
        return cls(d, N, tuple(levels_unit(d, N)))

    @classmethod
    def zero(cls, d: int, N: int) -> "TruncatedTensor":
        return cls(d, N, tuple(np.zeros(d**k) for k in range(N + 1)))

    @classmethod
    def letter(cls, i: int, d: int, N: int, coeff: float = 1.0) -> "TruncatedTensor":
        """The degree-one element ``coeff * e_i``."""
        levels = [np.zeros(d**k) for k in range(N + 1)]
        if N >= 1:
            levels[1][word_index([i], d)] = coeff
        return cls(d, N, tuple(levels))

    @classmethod
    def from_words(cls, coeffs: dict, d: int, N: int) -> "TruncatedTensor":
        """Build from a ``{word tuple: coefficient}`` mapping."""
        levels = [np.zeros(d**k) for k in range(N + 1)]
        for word, c in coeffs.items():
            if len(word) > N:
                raise ValueError(f"word {word} longer than N={N}")
            levels[len(word)][word_index(word, d)] += c
        return cls(d, N, tuple(levels))

    @property
    def scalar(self) -> float:
        return float(self.levels[0][0])

    def _check(self, other: "TruncatedTensor"):
        if not isinstance(other, TruncatedTensor):
            raise TypeError(f"expected TruncatedTensor, got {type(other).__name__}")
        if (self.d, self.N) != (other.d, other.N):
            raise ValueError(
                f"shape mismatch: (d={self.d}, N={self.N}) vs (d={other.d}, N={other.N})"
            )

    def __add__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        self._check(other)
        return TruncatedTensor(self.d, self.N, tuple(a + b for a, b in zip(self.levels, other.levels)))

    def __sub__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        self._check(other)
        return TruncatedTensor(self.d, self.N, tuple(a - b for a, b in zip(self.levels, other.levels)))

    def __neg__(self) -> "TruncatedTensor":
        return TruncatedTensor(self.d, self.N, tuple(-a for a in self.levels))

    def scale(self, c: float) -> "TruncatedTensor":
        return TruncatedTensor(self.d, self.N, tuple(c * a for a in self.levels))

    def __matmul__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        return tensor_mul(self, other)

    def flat(self) -> np.ndarray:
        return np.concatenate(self.levels)

    def norm(self) -> float:
        return float(np.linalg.norm(self.flat()))

    def allclose(self, other: "TruncatedTensor", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.max(np.abs(self.flat() - other.flat())) <= atol)

    def homogeneous_part(self, k: int) -> "TruncatedTensor":
        levels = [np.zeros(self.d**j) for j in range(self.N + 1)]
        levels[k] = self.levels[k].copy()
        return TruncatedTensor(self.d, self.N, tuple(levels))

    def __repr__(self) -> str:
        return f"TruncatedTensor(d={self.d}, N={self.N}, levels={[lv.tolist() for lv in self.levels]})"


def tensor_mul(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    """Truncated tensor product; degrees above N are dropped."""
    a._check(b)
    return TruncatedTensor(a.d, a.N, tuple(levels_mul(a.levels, b.levels)))


def tensor_exp(z: TruncatedTensor) -> TruncatedTensor:
    if abs(z.scalar) > _SCALAR_TOL:
        raise ValueError(f"exp requires zero scalar part, got {z.scalar!r}")
    return TruncatedTensor(z.d, z.N, tuple(levels_exp(z.levels)))


def tensor_log(x: TruncatedTensor) -> TruncatedTensor:
    if abs(x.scalar - 1.0) > _SCALAR_TOL:
        raise ValueError(f"log requires unit scalar part, got {x.scalar!r}")
    return TruncatedTensor(x.d, x.N, tuple(levels_log(x.levels)))


def tensor_inverse(x: TruncatedTensor) -> TruncatedTensor:
    """Group inverse ``exp(-log x)``."""
    return tensor_exp(-tensor_log(x))


def tensor_word_coeff(x: TruncatedTensor, word: Sequence[int]) -> float:
    word = tuple(word)
    if len(word) > x.N:
        raise ValueError(f"word {word} longer than N={x.N}")
    return float(x.levels[len(word)][word_index(word, x.d)])

