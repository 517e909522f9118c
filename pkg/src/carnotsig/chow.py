"""Horizontal paths reaching prescribed group elements, and distance estimates.

Three constructions share one endpoint map, ``node values -> log-signature
of the piecewise-linear path through them``:

* ``second_kind_solve`` writes ``g`` as a product of one-letter exponentials
  by damped Gauss-Newton with minimum-norm steps;
* ``cc_norm_estimate`` minimises path length (through uniform-speed energy)
  subject to reaching ``g``;
* ``controlling_distance`` minimises the discrete Cameron-Martin norm
  subject to reaching ``u``, optionally requiring a non-degenerate endpoint
  differential.

The two optimisation problems are solved as penalised nonlinear least
squares with a continuation in the penalty weight, multi-starts, and a final
minimum-norm Newton projection onto the constraint. Every returned value is
an upper bound certified by the attached path and its endpoint residual.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import least_squares

from .cameron_martin import GridFunction, cm_factor, cm_norm_discrete, uniform_grid
from .free_lie import HallBasis
from .group import GroupElement, dilate_coords, homogeneous_norm_coords
from .signature import PLPath, _sig_levels_block
from .tensor import levels_log

__all__ = [
    "SecondKindSolve",
    "DistanceEstimate",
    "ChowSolveError",
    "endpoint_coords",
    "endpoint_jacobian",
    "second_kind_solve",
    "chow_path",
    "cc_norm_estimate",
    "controlling_distance",
    "distance_equivalence_scan",
]

logger = logging.getLogger(__name__)

FD_STEP = 1e-5
SECOND_KIND_TOL = 1e-8
FEASIBILITY_TOL = 1e-6
RANK_TOL = 1e-6
AMPLITUDE_CAP = 50.0
PENALTY_SCHEDULE = (1e2, 1e3, 1e4, 1e5, 1e6, 1e7)
DEFAULT_STARTS = 8


class ChowSolveError(RuntimeError):
    """No path reaching the target was found within tolerance."""


def endpoint_coords(basis: HallBasis, nodes: np.ndarray) -> np.ndarray:
    """Log-signature of PL paths from the origin through ``nodes`` ``(..., m, d)``."""
    nodes = np.asarray(nodes, dtype=float)
    inc = np.diff(nodes, axis=-2, prepend=np.zeros(nodes.shape[:-2] + (1, nodes.shape[-1])))
    flat = inc.reshape((-1,) + inc.shape[-2:])
    coords = basis.levels_to_coords(levels_log(_sig_levels_block(flat, basis.N)), check=False)
    return coords.reshape(nodes.shape[:-2] + (basis.n,))


def endpoint_jacobian(basis: HallBasis, nodes: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian ``(n, m*d)`` of ``endpoint_coords`` at ``nodes``.

    Columns follow the row-major flattening of ``nodes``.
    """
    nodes = np.asarray(nodes, dtype=float)
    size = nodes.size
    eye = np.eye(size).reshape((size,) + nodes.shape) * step
    batch = np.concatenate([nodes + eye, nodes - eye])
    images = endpoint_coords(basis, batch)
    return ((images[:size] - images[size:]) / (2 * step)).T


def _letter_increments(letters: np.ndarray, s: np.ndarray, d: int) -> np.ndarray:
    inc = np.zeros(np.shape(s) + (d,))
    np.put_along_axis(inc, (letters - 1)[None, :, None] if inc.ndim == 3 else (letters - 1)[:, None],
                      np.asarray(s)[..., None], axis=-1)
    return inc


def _second_kind_map(basis: HallBasis, letters: np.ndarray, s: np.ndarray) -> np.ndarray:
    s = np.atleast_2d(s)
    inc = _letter_increments(letters, s, basis.d)
    return basis.levels_to_coords(levels_log(_sig_levels_block(inc, basis.N)), check=False)


def _second_kind_jacobian(basis: HallBasis, letters: np.ndarray, s: np.ndarray, step: float = FD_STEP):
    m = s.size
    eye = np.eye(m) * step
    images = _second_kind_map(basis, letters, np.concatenate([s + eye, s - eye]))
    return ((images[:m] - images[m:]) / (2 * step)).T


@dataclass(frozen=True)
class SecondKindSolve:
    """``g = exp(s_1 e_{i_1}) ... exp(s_m e_{i_m})`` up to ``residual``."""

    letters: tuple
    amplitudes: np.ndarray
    residual: float
    jacobian_rank: int
    restarts: int = 0

    def to_dict(self) -> dict:
        return {
            "letters": list(self.letters),
            "amplitudes": self.amplitudes.tolist(),
            "residual": self.residual,
            "jacobian_rank": self.jacobian_rank,
            "restarts": self.restarts,
        }


def _cyclic_letters(d: int, length: int) -> np.ndarray:
    return np.arange(length) % d + 1


def _gauss_newton(F: Callable, J: Callable, x0: np.ndarray, tol: float, max_iter: int = 100):
    """Damped Gauss-Newton with minimum-norm (lstsq) steps and backtracking."""
    x = x0.copy()
    r = F(x)
    cost = float(np.linalg.norm(r))
    for _ in range(max_iter):
        if cost <= tol:
            break
        step = np.linalg.lstsq(J(x), -r, rcond=None)[0]
        alpha = 1.0
        while alpha > 1e-6:
            trial = x + alpha * step
            r_trial = F(trial)
            c_trial = float(np.linalg.norm(r_trial))
            if c_trial < cost:
                x, r, cost = trial, r_trial, c_trial
                break
            alpha *= 0.5
        else:
            break
    return x, cost


def second_kind_solve(
    g: GroupElement,
    letters=None,
    max_restarts: int = 20,
    seed: int = 0,
    tol: float = SECOND_KIND_TOL,
) -> SecondKindSolve:
    """Amplitudes of one-letter exponentials whose product is ``g``.

    Without explicit ``letters`` a cyclic sequence ``1..d,1..d,...`` of length
    ``n + d`` is used and extended until its endpoint Jacobian has full rank
    ``n`` at a random start.
    """
    basis = g.basis
    target = g.coords
    scale = float(homogeneous_norm_coords(basis, target))
    bound = tol * (1.0 + scale)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EC0]))
    if letters is None:
        length = basis.n + basis.d
        while True:
            letters = _cyclic_letters(basis.d, length)
            probe = rng.standard_normal(length)
            if np.linalg.matrix_rank(_second_kind_jacobian(basis, letters, probe), tol=1e-8) == basis.n:
                break
            length += 1
    letters = np.asarray(letters, dtype=int)
    if np.any(letters < 1) or np.any(letters > basis.d):
        raise ValueError(f"letters must lie in 1..{basis.d}")

    F = lambda s: _second_kind_map(basis, letters, s)[0] - target
    J = lambda s: _second_kind_jacobian(basis, letters, s)

    # Converged solutions with huge cancelling amplitudes are valid but lose
    # digits in every later signature evaluation, so restarts continue until
    # the total amplitude is moderate; otherwise the smallest one is kept.
    cap = AMPLITUDE_CAP * (1.0 + scale)
    best_s, best_res, best_size = None, np.inf, np.inf
    fallback_res = np.inf
    for attempt in range(max_restarts + 1):
        s0 = rng.standard_normal(letters.size) * (scale + 0.1)
        # iterate well past the acceptance bound so accepted residuals are not marginal
        s, res = _gauss_newton(F, J, s0, bound * 1e-4)
        size = float(np.sum(np.abs(s)))
        if res <= bound and size < best_size:
            best_s, best_res, best_size = s, res, size
        fallback_res = min(fallback_res, res)
        if best_size <= cap:
            break
    if best_s is None:
        raise ChowSolveError(
            f"second-kind solve did not converge after {max_restarts} restarts (best residual {fallback_res:.3e})"
        )
    rank = int(np.linalg.matrix_rank(J(best_s), tol=1e-8))
    return SecondKindSolve(tuple(int(c) for c in letters), best_s, float(best_res), rank, attempt)


def chow_path(g: GroupElement, seed: int = 0, **kwargs) -> PLPath:
    """PL path from the origin whose log-signature is ``g`` (one segment per letter)."""
    basis = g.basis
    if not np.any(g.coords):
        return PLPath.from_points(np.zeros((2, basis.d)))
    sol = second_kind_solve(g, seed=seed, **kwargs)
    inc = _letter_increments(np.array(sol.letters), sol.amplitudes, basis.d)
    return PLPath.from_increments(inc)


@dataclass(frozen=True, eq=False)
class DistanceEstimate:
    """Upper bound of a distance-like quantity with its certificate path.

    Attributes
    ----------
    value : float
        Objective at the certificate (PL length for ``cc_upper``, discrete
        Cameron-Martin norm for ``d_value`` and ``dR_value``).
    kind : str
        ``"cc_upper"``, ``"d_value"`` or ``"dR_value"``.
    certificate : GridFunction
        Optimised node values on the grid.
    residual : float
        Sup-norm mismatch between the certificate's log-signature and the target.
    nondegenerate : bool or None
        Whether the endpoint Jacobian has full rank at the certificate (``dR`` mode).
    """

    value: float
    kind: str
    certificate: GridFunction
    residual: float
    nondegenerate: Optional[bool] = None
    target: np.ndarray = field(default=None, repr=False)
    min_singular_value: float = float("nan")
    converged_starts: int = 0
    start_values: tuple = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "u": None if self.target is None else self.target.tolist(),
            "value": self.value,
            "residual": self.residual,
            "nondegenerate": self.nondegenerate,
            "min_singular_value": self.min_singular_value,
            "converged_starts": self.converged_starts,
            "start_values": list(self.start_values),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class _StartResult:
    index: int
    nodes: np.ndarray
    value: float
    residual: float
    sigma_min: float = float("nan")


def _initial_nodes(rng: np.random.Generator, grid: np.ndarray, target_layer1: np.ndarray, amp: float) -> np.ndarray:
    # straight chord plus a random low-frequency loop, so the area map is not degenerate
    t = grid / grid[-1]
    nodes = t[:, None] * target_layer1[None, :]
    for k in range(1, 4):
        a, b = rng.standard_normal((2, target_layer1.size)) * amp / k
        nodes = nodes + np.sin(np.pi * k * t)[:, None] * a + (1 - np.cos(2 * np.pi * k * t))[:, None] * b / 2
    return nodes


def _project(basis: HallBasis, nodes: np.ndarray, target: np.ndarray, bound: float, max_iter: int = 30):
    """Minimum-norm Newton projection of ``nodes`` onto ``{endpoint = target}``."""
    x = nodes.ravel().copy()
    shape = nodes.shape
    F = lambda v: endpoint_coords(basis, v.reshape(shape)) - target
    J = lambda v: endpoint_jacobian(basis, v.reshape(shape))
    x, _ = _gauss_newton(F, J, x, bound * 1e-6, max_iter)
    return x.reshape(shape)


def _optimise(
    basis: HallBasis,
    target: np.ndarray,
    whitener: np.ndarray,
    grid: np.ndarray,
    value_fn: Callable[[np.ndarray], float],
    starts: int,
    seed: int,
    penalties=PENALTY_SCHEDULE,
) -> list[_StartResult]:
    m, d = grid.size, basis.d
    scale = float(homogeneous_norm_coords(basis, target))
    bound = FEASIBILITY_TOL * (1.0 + scale)
    lin = np.kron(whitener, np.eye(d))
    layer1 = target[basis.layer_slices[0]]

    def residuals(x, mu):
        nodes = x.reshape(m, d)
        return np.concatenate([lin @ x, np.sqrt(mu) * (endpoint_coords(basis, nodes) - target)])

    def jac(x, mu):
        return np.vstack([lin, np.sqrt(mu) * endpoint_jacobian(basis, x.reshape(m, d))])

    results = []
    for k in range(starts):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), k, 0xC40]))
        x = _initial_nodes(rng, grid, layer1, max(scale, 1e-3)).ravel()
        for mu in penalties:
            sol = least_squares(residuals, x, jac=jac, args=(mu,), method="trf", xtol=1e-12, ftol=1e-12,
                                gtol=1e-12, max_nfev=200)
            x = sol.x
        nodes = _project(basis, x.reshape(m, d), target, bound)
        res = float(np.max(np.abs(endpoint_coords(basis, nodes) - target)))
        results.append(_StartResult(k, nodes, value_fn(nodes), res))
    return results


def _select(results: list[_StartResult], bound: float) -> list[_StartResult]:
    ok = [r for r in results if r.residual <= bound and np.isfinite(r.value)]
    return sorted(ok, key=lambda r: (r.value, r.residual, r.index))


def _difference_whitener(m: int) -> np.ndarray:
    # energy of uniform-speed PL paths on [0, 1]: sum |dx|^2 / (1/m)
    D = np.eye(m) - np.eye(m, k=-1)
    return np.sqrt(m) * D


def _path_length(nodes: np.ndarray) -> float:
    inc = np.diff(nodes, axis=0, prepend=np.zeros((1, nodes.shape[1])))
    return float(np.sum(np.linalg.norm(inc, axis=1)))


def cc_norm_estimate(g: GroupElement, segments: int = 64, starts: int = DEFAULT_STARTS, seed: int = 0) -> DistanceEstimate:
    """Upper bound on ``||g||_CC``: the length of an optimised PL path reaching ``g``.

    Minimising energy over uniformly timed nodes minimises length as well
    (Cauchy-Schwarz, with equality at constant speed), and the energy is
    smooth where length is not. The reported value is the path length.
    """
    basis = g.basis
    if segments < basis.n:
        raise ValueError(f"need at least n={basis.n} segments, got {segments}")
    grid = uniform_grid(segments)
    target = g.coords
    bound = FEASIBILITY_TOL * (1.0 + float(homogeneous_norm_coords(basis, target)))
    if not np.any(target):
        cert = GridFunction(grid, np.zeros((segments, basis.d)), 0.5)
        return DistanceEstimate(0.0, "cc_upper", cert, 0.0, None, target.copy(), converged_starts=starts)
    results = _optimise(basis, target, _difference_whitener(segments), grid, _path_length, starts, seed)
    ranked = _select(results, bound)
    if not ranked:
        worst = min(r.residual for r in results)
        raise ChowSolveError(f"no feasible path found (best residual {worst:.3e})")
    best = ranked[0]
    cert = GridFunction(grid, best.nodes, 0.5)
    return DistanceEstimate(
        best.value, "cc_upper", cert, best.residual, None, target.copy(),
        converged_starts=len(ranked), start_values=tuple(r.value for r in results),
    )


def scaled_min_singular_value(basis: HallBasis, nodes: np.ndarray, scale: float) -> float:
    """Smallest singular value of the endpoint Jacobian, layer-``k`` rows scaled by ``scale^(1-k)``."""
    J = endpoint_jacobian(basis, nodes)
    s = max(scale, 1e-12)
    J = J * (s ** (1.0 - basis.degrees))[:, None]
    return float(np.linalg.svd(J, compute_uv=False)[-1])


def controlling_distance(
    u: GroupElement,
    H: float,
    grid_size: int = 32,
    mode: str = "d",
    starts: int = DEFAULT_STARTS,
    seed: int = 0,
    T: float = 1.0,
) -> DistanceEstimate:
    """Upper bound on the controlling distance ``d(u)`` (or ``d_R(u)``).

    Minimises the discrete Cameron-Martin norm over node values on a uniform
    grid of ``[0, T]`` subject to the PL log-signature equalling ``u``.
    In ``dR`` mode only certificates with a full-rank (row-scaled) endpoint
    Jacobian are admissible; the best such start is returned and
    ``nondegenerate`` is False if none qualifies.
    """
    if not 0.25 < H < 1.0:
        raise ValueError(f"controlling distances need H in (1/4, 1), got {H}")
    if mode not in ("d", "dR"):
        raise ValueError(f"mode must be 'd' or 'dR', got {mode!r}")
    basis = u.basis
    if grid_size < basis.n:
        raise ValueError(f"need grid_size >= n={basis.n}, got {grid_size}")
    grid = uniform_grid(grid_size, T)
    L, _ = cm_factor(grid, H)
    whitener = np.linalg.inv(L)
    target = u.coords
    scale = float(homogeneous_norm_coords(basis, target))
    bound = FEASIBILITY_TOL * (1.0 + scale)
    norm = lambda nodes: cm_norm_discrete(GridFunction(grid, nodes, H))
    if not np.any(target) and mode == "d":
        cert = GridFunction(grid, np.zeros((grid_size, basis.d)), H)
        return DistanceEstimate(0.0, "d_value", cert, 0.0, None, target.copy(), converged_starts=starts)
    results = _optimise(basis, target, whitener, grid, norm, starts, seed)
    ranked = _select(results, bound)
    if not ranked:
        worst = min(r.residual for r in results)
        raise ChowSolveError(f"no feasible control found (best residual {worst:.3e})")
    for r in ranked:
        r.sigma_min = scaled_min_singular_value(basis, r.nodes, max(scale, 1e-3))
    if mode == "dR":
        admissible = [r for r in ranked if r.sigma_min > RANK_TOL]
        best = admissible[0] if admissible else ranked[0]
        nondeg = bool(admissible)
    else:
        best = ranked[0]
        nondeg = bool(best.sigma_min > RANK_TOL)
    cert = GridFunction(grid, best.nodes, H)
    return DistanceEstimate(
        best.value, "d_value" if mode == "d" else "dR_value", cert, best.residual, nondeg, target.copy(),
        min_singular_value=best.sigma_min, converged_starts=len(ranked),
        start_values=tuple(r.value for r in results),
    )


def unit_sphere_samples(basis: HallBasis, count: int, seed: int) -> np.ndarray:
    """Random points with homogeneous norm 1 (Gaussian directions, dilated)."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5FE]))
    raw = rng.standard_normal((count, basis.n))
    return dilate_coords(basis, 1.0 / homogeneous_norm_coords(basis, raw), raw)


def distance_equivalence_scan(
    H: float,
    samples_on_sphere: int,
    d: int = 2,
    N: int = 2,
    grid_size: int = 32,
    segments: int = 32,
    starts: int = 4,
    seed: int = 0,
    homogeneity_lambda: Optional[float] = None,
) -> dict:
    """Empirical equivalence constants of ``d``, ``d_R`` and ``||.||_CC`` on the unit sphere.

    Failures are recorded per sample. With ``homogeneity_lambda`` each
    sample's ``d`` is recomputed at the dilated point and the ratio reported.
    """
    from .free_lie import build_hall_basis

    basis = build_hall_basis(d, N)
    points = unit_sphere_samples(basis, samples_on_sphere, seed)
    rows = []
    for i, coords in enumerate(points):
        u = GroupElement(basis, coords)
        row = {"index": i, "u": coords.tolist(), "homogeneous_norm": 1.0}
        try:
            est_d = controlling_distance(u, H, grid_size, "d", starts, seed + i)
            est_r = controlling_distance(u, H, grid_size, "dR", starts, seed + i)
            est_cc = cc_norm_estimate(u, segments, starts, seed + i)
            row.update(
                d=est_d.value, dR=est_r.value, cc=est_cc.value, residual=max(est_d.residual, est_r.residual),
                nondegenerate=est_r.nondegenerate, failed=False,
            )
            if homogeneity_lambda is not None:
                lam = float(homogeneity_lambda)
                scaled = GroupElement(basis, dilate_coords(basis, lam, coords))
                est_s = controlling_distance(scaled, H, grid_size, "d", starts, seed + i)
                row["homogeneity_ratio"] = est_s.value / (lam * est_d.value)
        except (ChowSolveError, np.linalg.LinAlgError) as exc:
            row.update(failed=True, error=str(exc))
        rows.append(row)
    ok = [r for r in rows if not r["failed"]]
    summary = {}
    for key in ("d", "dR", "cc"):
        vals = np.array([r[key] for r in ok])
        summary[key] = {
            "min": float(vals.min()) if vals.size else float("nan"),
            "max": float(vals.max()) if vals.size else float("nan"),
            "spread": float(vals.max() / vals.min()) if vals.size and vals.min() > 0 else float("inf"),
        }
    bounded = bool(ok) and all(
        np.isfinite(summary[k]["spread"]) and summary[k]["min"] > 0 for k in ("d", "dR", "cc")
    )
    return {
        "H": H, "d": d, "N": N, "grid_size": grid_size, "segments": segments, "starts": starts, "seed": seed,
        "samples": rows, "summary": summary, "failures": len(rows) - len(ok), "bounded": bounded,
    }
