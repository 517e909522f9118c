"""The free Carnot group G_N(R^d) in exponential coordinates of the first kind.

A point is a coordinate vector over the Lyndon basis; the product is computed
through the tensor chart, ``u * v = log(exp(u) exp(v))``. Layer ``k``
coordinates scale by ``lambda**k`` under dilation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .free_lie import HallBasis, LogCoordinates, build_hall_basis
from .tensor import TruncatedTensor, levels_exp, levels_log, levels_mul

__all__ = [
    "GroupElement",
    "identity",
    "group_mul",
    "group_inv",
    "dilate",
    "homogeneous_norm",
    "right_translation_jacobian",
    "group_from_tensor",
    "group_to_tensor",
    "mul_coords",
    "dilate_coords",
    "homogeneous_norm_coords",
]

JACOBIAN_STEP = 1e-5


@dataclass(frozen=True, eq=False)
class GroupElement(LogCoordinates):
    """A point of (R^n, *) over ``basis``; ``layers`` gives each coordinate's degree."""

    @property
    def layers(self) -> np.ndarray:
        return self.basis.degrees

    @classmethod
    def from_coords(cls, coords, d: int, N: int) -> "GroupElement":
        return cls(build_hall_basis(d, N), coords)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return group_mul(self, other)

    def __repr__(self) -> str:
        return f"GroupElement(d={self.basis.d}, N={self.basis.N}, coords={self.coords.tolist()})"


def identity(basis: HallBasis) -> GroupElement:
    return GroupElement(basis, np.zeros(basis.n))


def _same_basis(u: GroupElement, v: GroupElement):
    if (u.basis.d, u.basis.N) != (v.basis.d, v.basis.N):
        raise ValueError(
            f"basis mismatch: (d={u.basis.d}, N={u.basis.N}) vs (d={v.basis.d}, N={v.basis.N})"
        )


def mul_coords(basis: HallBasis, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Batched group law on raw coordinate arrays (batch dims broadcast)."""
    x = levels_exp(basis.coords_to_levels(u))
    y = levels_exp(basis.coords_to_levels(v))
    return basis.levels_to_coords(levels_log(levels_mul(x, y)), check=False)


def dilate_coords(basis: HallBasis, lam, u: np.ndarray) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError(f"dilation factor must be >= 0, got {lam}")
    return np.asarray(u, dtype=float) * lam[..., None] ** basis.degrees


def homogeneous_norm_coords(basis: HallBasis, u: np.ndarray) -> np.ndarray:
    """``max_i |u_i|^(1/k_i)`` over the last axis."""
    return np.max(np.abs(np.asarray(u, dtype=float)) ** (1.0 / basis.degrees), axis=-1)


def group_mul(u: GroupElement, v: GroupElement) -> GroupElement:
    _same_basis(u, v)
    return GroupElement(u.basis, mul_coords(u.basis, u.coords, v.coords))


def group_inv(u: GroupElement) -> GroupElement:
    # first-kind coordinates: exp(-X) inverts exp(X)
    return GroupElement(u.basis, -u.coords)


def dilate(lam: float, u: GroupElement) -> GroupElement:
    if lam < 0:
        raise ValueError(f"dilation factor must be >= 0, got {lam}")
    return GroupElement(u.basis, dilate_coords(u.basis, lam, u.coords))


def homogeneous_norm(u: GroupElement) -> float:
    return float(homogeneous_norm_coords(u.basis, u.coords))


def right_translation_jacobian(x: GroupElement, u: GroupElement, step: float = JACOBIAN_STEP) -> np.ndarray:
    """Jacobian of ``x -> x * u`` at ``x``, by central differences.

    All ``2n`` perturbed products are evaluated as one batch.
    """
    _same_basis(x, u)
    n = x.basis.n
    eye = np.eye(n) * step
    points = np.concatenate([x.coords + eye, x.coords - eye], axis=0)
    images = mul_coords(x.basis, points, u.coords[None, :])
    return ((images[:n] - images[n:]) / (2 * step)).T


def group_from_tensor(x: TruncatedTensor, basis: HallBasis | None = None) -> GroupElement:
    """Chart map from a grouplike tensor to exponential coordinates."""
    if basis is None:
        basis = build_hall_basis(x.d, x.N)
    if (x.d, x.N) != (basis.d, basis.N):
        raise ValueError(f"tensor (d={x.d}, N={x.N}) does not match basis (d={basis.d}, N={basis.N})")
    if abs(x.scalar - 1.0) > 1e-12:
        raise ValueError(f"grouplike tensors have unit scalar part, got {x.scalar!r}")
    return GroupElement(basis, basis.levels_to_coords(levels_log(x.levels)))


def group_to_tensor(u: GroupElement) -> TruncatedTensor:
    b = u.basis
    return TruncatedTensor(b.d, b.N, tuple(levels_exp(b.coords_to_levels(u.coords))))
