"""Free nilpotent Lie algebra g_N(R^d) in the Lyndon basis.

Basis elements are Lyndon words bracketed by their standard factorization
(``w = uv`` with ``v`` the longest proper Lyndon suffix). They are ordered
by degree, then lexicographically by word. Coordinates of a Lie element
are recovered degree by degree with a least-squares solve against the
expanded brackets, which doubles as a membership test for the Lie subspace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .tensor import TruncatedTensor, _outer, levels_unit

__all__ = [
    "NotLieElementError",
    "HallTree",
    "HallBasis",
    "LogCoordinates",
    "mobius",
    "layer_dims",
    "hausdorff_dim",
    "lyndon_words",
    "build_hall_basis",
    "bracket_to_tensor",
    "tensor_to_log_coords",
    "log_coords_to_tensor",
]

PROJECTION_RTOL = 1e-9


class NotLieElementError(ValueError):
    """Raised when a tensor does not lie in the free Lie subspace."""


def mobius(n: int) -> int:
    if n < 1:
        raise ValueError("mobius is defined for n >= 1")
    result, p, m = 1, 2, n
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            result = -result
        p += 1
    if m > 1:
        result = -result
    return result


def layer_dims(d: int, N: int) -> list[int]:
    """Witt dimensions ``dim V_j = (1/j) sum_{i | j} mu(i) d^(j/i)``."""
    if d < 1 or N < 1:
        raise ValueError(f"need d >= 1 and N >= 1, got d={d}, N={N}")
    dims = []
    for j in range(1, N + 1):
        total = sum(mobius(i) * d ** (j // i) for i in range(1, j + 1) if j % i == 0)
        dims.append(total // j)
    return dims


def hausdorff_dim(d: int, N: int) -> int:
    """Homogeneous dimension ``sum_j j * dim V_j``."""
    return sum(j * n for j, n in enumerate(layer_dims(d, N), start=1))


def lyndon_words(d: int, N: int) -> list[tuple[int, ...]]:
    """Lyndon words of length <= N over 1..d (Duval's generation order)."""
    words = []
    w = [0]
    while w:
        words.append(tuple(x + 1 for x in w))
        # extend periodically to length N, then strip maximal letters and bump
        m = len(w)
        while len(w) < N:
            w.append(w[len(w) - m])
        while w and w[-1] == d - 1:
            w.pop()
        if w:
            w[-1] += 1
    return words


def _is_lyndon(word: Sequence[int]) -> bool:
    word = tuple(word)
    return all(word < word[i:] + word[:i] for i in range(1, len(word))) if len(word) > 1 else True


@dataclass(frozen=True)
class HallTree:
    """A bracket tree: a leaf letter or an ordered pair of subtrees."""

    letter: Optional[int] = None
    left: Optional["HallTree"] = None
    right: Optional["HallTree"] = None

    def __post_init__(self):
        if (self.letter is None) == (self.left is None or self.right is None):
            raise ValueError("HallTree is either a leaf or a (left, right) pair")

    @classmethod
    def leaf(cls, letter: int) -> "HallTree":
        return cls(letter=letter)

    @classmethod
    def node(cls, left: "HallTree", right: "HallTree") -> "HallTree":
        return cls(left=left, right=right)

    @property
    def is_leaf(self) -> bool:
        return self.letter is not None

    @property
    def degree(self) -> int:
        return 1 if self.is_leaf else self.left.degree + self.right.degree

    @property
    def word(self) -> tuple[int, ...]:
        return (self.letter,) if self.is_leaf else self.left.word + self.right.word

    @property
    def label(self) -> str:
        if self.is_leaf:
            return str(self.letter)
        return f"[{self.left.label},{self.right.label}]"

    def __str__(self) -> str:
        return self.label


def _standard_bracketing(word: tuple[int, ...]) -> HallTree:
    if len(word) == 1:
        return HallTree.leaf(word[0])
    for split in range(1, len(word)):
        if _is_lyndon(word[split:]):
            return HallTree.node(_standard_bracketing(word[:split]), _standard_bracketing(word[split:]))
    raise ValueError(f"{word} is not a Lyndon word")


def bracket_to_tensor(tree: HallTree, d: int, N: int) -> TruncatedTensor:
    """Expand a bracket tree with ``[a, b] = a b - b a``."""
    if tree.degree > N:
        raise ValueError(f"bracket of degree {tree.degree} exceeds N={N}")
    levels = [np.zeros(d**k) for k in range(N + 1)]
    levels[tree.degree] = _expand(tree, d)
    return TruncatedTensor(d, N, tuple(levels))


def _expand(tree: HallTree, d: int) -> np.ndarray:
    if tree.is_leaf:
        if not 1 <= tree.letter <= d:
            raise ValueError(f"letter {tree.letter} outside alphabet 1..{d}")
        out = np.zeros(d)
        out[tree.letter - 1] = 1.0
        return out
    a, b = _expand(tree.left, d), _expand(tree.right, d)
    return _outer(a, b) - _outer(b, a)


@dataclass(frozen=True, eq=False)
class HallBasis:
    """Ordered Lyndon bracket basis of g_N(R^d).

    Attributes
    ----------
    trees : tuple of HallTree
        Basis brackets ordered by degree, then by Lyndon word.
    degrees : ndarray of int, shape (n,)
        Layer index of each coordinate.
    """

    d: int
    N: int
    trees: tuple
    degrees: np.ndarray = field(repr=False)
    _blocks: tuple = field(repr=False)
    _pinvs: tuple = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.trees)

    @property
    def labels(self) -> list[str]:
        return [t.label for t in self.trees]

    @property
    def layer_slices(self) -> list[slice]:
        """Coordinate slice of each layer 1..N (index 0 is layer 1)."""
        out, start = [], 0
        for k in range(1, self.N + 1):
            stop = start + int(np.sum(self.degrees == k))
            out.append(slice(start, stop))
            start = stop
        return out

    def expansion_matrix(self, k: int) -> np.ndarray:
        """Columns are the degree-k basis brackets expanded in T_N."""
        return self._blocks[k - 1]

    def to_json(self) -> str:
        return json.dumps({"d": self.d, "N": self.N, "basis": self.labels})

    # batched chart maps on raw arrays; the public functions wrap these

    def coords_to_levels(self, coords: np.ndarray) -> list[np.ndarray]:
        coords = np.asarray(coords, dtype=float)
        batch = coords.shape[:-1]
        levels = [np.zeros(batch + (1,))]
        for k, sl in enumerate(self.layer_slices, start=1):
            levels.append(coords[..., sl] @ self._blocks[k - 1].T)
        return levels

    def levels_to_coords(
        self, levels: Sequence[np.ndarray], check: bool = True, reference: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """Project degree by degree onto the basis.

        With ``check`` the projection residual must stay below
        ``1e-9 (1 + scale)``, where ``scale`` is the Euclidean size of
        ``levels`` or, if larger, ``reference`` (per batch entry). Callers pass
        the size of the tensor the Lie element was computed from, since
        cancellation in a logarithm leaves roundoff relative to its input.
        """
        batch = np.shape(levels[0])[:-1]
        parts, worst, scale = [], np.zeros(batch), np.zeros(batch)
        for k in range(1, self.N + 1):
            block = np.asarray(levels[k])
            c = block @ self._pinvs[k - 1].T
            if check:
                resid = block - c @ self._blocks[k - 1].T
                worst = np.maximum(worst, np.max(np.abs(resid), axis=-1))
                scale = scale + np.sum(block**2, axis=-1)
            parts.append(c)
        if check:
            scale = np.sqrt(scale)
            if reference is not None:
                scale = np.maximum(scale, reference)
            bound = PROJECTION_RTOL * (1.0 + scale)
            if np.any(worst > bound):
                bad = float(np.max(worst - bound))
                raise NotLieElementError(
                    f"tensor is not a Lie element: projection residual exceeds tolerance by {bad:.3e}"
                )
        return np.concatenate(parts, axis=-1)


@lru_cache(maxsize=64)
def build_hall_basis(d: int, N: int) -> HallBasis:
    if d < 1 or N < 1:
        raise ValueError(f"need d >= 1 and N >= 1, got d={d}, N={N}")
    words = sorted(lyndon_words(d, N), key=lambda w: (len(w), w))
    trees = tuple(_standard_bracketing(w) for w in words)
    degrees = np.array([t.degree for t in trees], dtype=int)
    degrees.setflags(write=False)
    blocks, pinvs = [], []
    for k in range(1, N + 1):
        cols = [_expand(t, d) for t in trees if t.degree == k]
        mat = np.stack(cols, axis=1) if cols else np.zeros((d**k, 0))
        mat.setflags(write=False)
        pinv = np.linalg.pinv(mat) if cols else np.zeros((0, d**k))
        pinv.setflags(write=False)
        blocks.append(mat)
        pinvs.append(pinv)
    return HallBasis(d, N, trees, degrees, tuple(blocks), tuple(pinvs))


@dataclass(frozen=True, eq=False)
class LogCoordinates:
    """Coordinates of a Lie element over a ``HallBasis``."""

    basis: HallBasis
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1)
        if c.size != self.basis.n:
            raise ValueError(f"expected {self.basis.n} coordinates, got {c.size}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coordinates must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)


def tensor_to_log_coords(x: TruncatedTensor, basis: HallBasis) -> LogCoordinates:
    """Coordinates of a Lie element; raises ``NotLieElementError`` otherwise."""
    if (x.d, x.N) != (basis.d, basis.N):
        raise ValueError(f"tensor (d={x.d}, N={x.N}) does not match basis (d={basis.d}, N={basis.N})")
    if abs(x.scalar) > 1e-12:
        raise NotLieElementError(f"Lie elements have zero scalar part, got {x.scalar!r}")
    return LogCoordinates(basis, basis.levels_to_coords(x.levels))


def log_coords_to_tensor(u: LogCoordinates) -> TruncatedTensor:
    b = u.basis
    return TruncatedTensor(b.d, b.N, tuple(b.coords_to_levels(u.coords)))


def unit_levels(basis: HallBasis, batch_shape: tuple = ()) -> list[np.ndarray]:
    return levels_unit(basis.d, basis.N, batch_shape)
