"""Monte Carlo estimates of the log-signature density and its quantitative checks.

Samples of ``U_t`` are log-signatures of piecewise-linear interpolations of
exact-law fBm draws. Densities are estimated with a product Gaussian kernel
whose per-coordinate bandwidth follows the coordinate's spread, so it scales
with dilations. Standard errors come from 16 contiguous batch means.

Small-noise densities ``p_eps(u)`` far from the bulk are estimated by
importance sampling: paths are shifted by a control ``h`` reaching ``u`` and
reweighted with the exact Gaussian likelihood ratio on the sampling grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .cameron_martin import cm_factor
from .chow import controlling_distance, distance_equivalence_scan
from .fbm import fbm_cov, increment_chunks
from .free_lie import build_hall_basis, hausdorff_dim
from .group import GroupElement, dilate_coords, homogeneous_norm_coords
from .signature import logsig_from_increments

__all__ = [
    "LogSigSampleSet",
    "DensityEstimate",
    "derive_seed",
    "default_steps",
    "mc_logsig_samples",
    "conditional_logsig_samples",
    "conditional_density",
    "kde_density",
    "scaling_check",
    "tail_check",
    "local_lower_bound_check",
    "varadhan_check",
    "control_multiplier",
]

logger = logging.getLogger(__name__)

BATCHES = 16
QUERY_BLOCK = 16
DEFAULT_EPS = (0.5, 0.4, 0.3, 0.25, 0.2)


def derive_seed(seed: int, *keys) -> int:
    """Deterministic 63-bit sub-seed from a master seed and float/int keys."""
    words = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    for k in keys:
        bits = int(np.float64(k).view(np.uint64))
        words += [bits & 0xFFFFFFFF, bits >> 32]
    state = np.random.SeedSequence(words).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def default_steps(H: float) -> int:
    return 256 if H >= 0.5 else 1024


def _check_density_hurst(H: float):
    if not 0.25 < H < 1.0:
        raise ValueError(f"density experiments need H in (1/4, 1), got {H}")


@dataclass(frozen=True, eq=False)
class LogSigSampleSet:
    """Draws of the (possibly scaled, possibly shifted) log-signature ``U_t``.

    Attributes
    ----------
    samples : ndarray, shape (count, n)
    log_weights : ndarray or None
        Log likelihood ratios when the draws come from a shifted law.
    """

    H: float
    t: float
    d: int
    N: int
    steps: int
    count: int
    seed: int
    samples: np.ndarray = field(repr=False)
    eps: float = 1.0
    log_weights: Optional[np.ndarray] = field(default=None, repr=False)
    endpoint: Optional[np.ndarray] = None

    def __post_init__(self):
        n = build_hall_basis(self.d, self.N).n
        if self.samples.shape != (self.count, n):
            raise ValueError(f"samples must have shape ({self.count}, {n}), got {self.samples.shape}")

    @property
    def basis(self):
        return build_hall_basis(self.d, self.N)

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    def metadata(self) -> dict:
        return {
            "H": self.H, "t": self.t, "d": self.d, "N": self.N, "steps": self.steps,
            "count": self.count, "seed": self.seed, "eps": self.eps, "weighted": self.log_weights is not None,
            "endpoint": None if self.endpoint is None else self.endpoint.tolist(),
        }

    def dilated(self, lam: float) -> "LogSigSampleSet":
        """Same draws pushed through ``Delta_lam``; equals the law of ``lam``-scaled paths."""
        samples = dilate_coords(self.basis, lam, self.samples)
        endpoint = None if self.endpoint is None else lam * self.endpoint
        return LogSigSampleSet(self.H, self.t, self.d, self.N, self.steps, self.count, self.seed,
                               samples, self.eps * lam, self.log_weights, endpoint)


@lru_cache(maxsize=8)
def _cached_samples(H, t, d, N, steps, count, seed) -> np.ndarray:
    basis = build_hall_basis(d, N)
    out = np.empty((count, basis.n))
    row = 0
    for inc in increment_chunks(steps, H, d, count, seed, T=t):
        out[row : row + len(inc)] = logsig_from_increments(inc, basis)
        row += len(inc)
    out.setflags(write=False)
    return out


def mc_logsig_samples(
    H: float, t: float, d: int, N: int, steps: Optional[int] = None, count: int = 100_000, seed: int = 0,
    eps: float = 1.0,
) -> LogSigSampleSet:
    """``count`` i.i.d. draws of the log-signature of ``eps * B`` on ``[0, t]``.

    Samples are cached in-process per configuration, so checks sharing a
    configuration reuse the same draws.
    """
    _check_density_hurst(H)
    steps = default_steps(H) if steps is None else int(steps)
    if steps < 32:
        raise ValueError(f"need steps >= 32, got {steps}")
    if t <= 0 or count < 1 or eps <= 0:
        raise ValueError("t, count and eps must be positive")
    base = _cached_samples(float(H), float(t), int(d), int(N), steps, int(count), int(seed))
    samples = base if eps == 1.0 else dilate_coords(build_hall_basis(d, N), eps, base)
    return LogSigSampleSet(H, t, d, N, steps, count, seed, samples, eps)


def _fine_control(h_nodes: np.ndarray, coarse_grid: np.ndarray, steps: int, T: float) -> np.ndarray:
    # PL interpolation of the control onto the sampling grid keeps its log-signature
    fine = T * np.arange(1, steps + 1) / steps
    t = np.concatenate([[0.0], coarse_grid])
    pts = np.vstack([np.zeros((1, h_nodes.shape[1])), h_nodes])
    return np.stack([np.interp(fine, t, pts[:, c]) for c in range(pts.shape[1])], axis=1)


def _rotation_orbit(basis, control: np.ndarray, grid: np.ndarray, target: np.ndarray, k: int) -> list[np.ndarray]:
    """Planar rotations of ``control`` that still reach ``target`` (d = 2 only)."""
    from .chow import endpoint_coords

    if basis.d != 2 or k <= 1:
        return [control]
    out = []
    tol = 1e-9 * (1.0 + np.max(np.abs(target)))
    for theta in 2 * np.pi * np.arange(k) / k:
        c, s = np.cos(theta), np.sin(theta)
        rotated = control @ np.array([[c, s], [-s, c]])
        if np.max(np.abs(endpoint_coords(basis, rotated) - target)) <= tol:
            out.append(rotated)
    return out


def conditional_logsig_samples(
    H: float, d: int, N: int, eps: float, endpoint, controls: Sequence[np.ndarray], control_grid,
    steps: Optional[int] = None, count: int = 100_000, seed: int = 0,
) -> LogSigSampleSet:
    """Weighted draws of ``log S(eps B)`` conditioned on ``eps B_1 = endpoint``.

    The conditioned path is ``m + eps (B - r B_1)`` with ``r(s) = R(s, 1)``
    and ``m = r * endpoint`` (exact Gaussian conditioning). Draws are taken
    from the equal mixture of the shifted laws ``h_k + eps (B - r B_1)``,
    one component per control (controls must end at ``endpoint``), with
    components assigned round-robin. The log weights are the exact
    likelihood ratios on the sampling grid,
    ``-log mean_k exp(<d_k, X - m>/eps^2 - |d_k|^2/(2 eps^2))`` with
    ``d_k = h_k - m`` and ``<a, b> = a^T G^{-1} b``.
    """
    _check_density_hurst(H)
    steps = default_steps(H) if steps is None else int(steps)
    basis = build_hall_basis(d, N)
    endpoint = np.asarray(endpoint, dtype=float).reshape(d)
    fine = np.arange(1, steps + 1) / steps
    r = fbm_cov(fine, 1.0, H)
    mean = r[:, None] * endpoint[None, :]
    hs = []
    for c in controls:
        h = _fine_control(np.asarray(c, dtype=float), np.asarray(control_grid, dtype=float), steps, 1.0)
        hs.append(h - r[:, None] * (h[-1] - endpoint)[None, :])
    deltas = np.stack([h - mean for h in hs])
    L, _ = cm_factor(fine, H)
    D = np.stack([np.linalg.solve(L.T, np.linalg.solve(L, dk)) for dk in deltas]).reshape(len(hs), -1)
    energies = np.einsum("kx,kx->k", D, deltas.reshape(len(hs), -1))
    cross = D @ deltas.reshape(len(hs), -1).T
    K = len(hs)
    out = np.empty((count, basis.n))
    logw = np.empty(count)
    row = 0
    for inc in increment_chunks(steps, H, d, count, seed):
        k = len(inc)
        b = np.cumsum(inc, axis=1)
        bridge = b - r[None, :, None] * b[:, -1:, :]
        comp = (row + np.arange(k)) % K
        # <d_k, X - m> = eps <d_k, B> + <d_k, d_j>; <d_k, r> vanishes since d_k(1) = 0
        proj = eps * (b.reshape(k, -1) @ D.T) + cross[:, comp].T
        logw[row : row + k] = np.log(K) - logsumexp(proj / eps**2 - energies / (2 * eps**2), axis=1)
        paths = eps * bridge + np.stack(hs)[comp]
        out[row : row + k] = logsig_from_increments(np.diff(paths, axis=1, prepend=0.0), basis)
        row += k
    return LogSigSampleSet(H, 1.0, d, N, steps, count, seed, out, eps, logw, endpoint)


@dataclass(frozen=True)
class DensityEstimate:
    point: np.ndarray
    value: float
    stderr: float
    bandwidth: np.ndarray
    log_value: float = float("nan")

    def to_dict(self) -> dict:
        return {"point": self.point.tolist(), "value": self.value, "stderr": self.stderr,
                "bandwidth": self.bandwidth.tolist(), "log_value": self.log_value}


def scott_bandwidth(samples: np.ndarray) -> np.ndarray:
    """Per-coordinate ``std_i * count^(-1/(n+4))``."""
    count, n = samples.shape
    sd = samples.std(axis=0)
    if np.any(sd <= 0) or not np.all(np.isfinite(sd)):
        raise ValueError("degenerate sample spread: a coordinate has zero variance")
    return sd * count ** (-1.0 / (n + 4))


def _log_kernel_sums(samples, log_weights, points, bw, batches, tilt=None) -> np.ndarray:
    """``log sum_j w_j exp(tilt.(X_j - p)) K(p - X_j)`` per batch, shape ``(q, batches)``."""
    count, n = samples.shape
    edges = np.linspace(0, count, batches + 1).astype(int)
    log_norm = -np.sum(np.log(bw)) - 0.5 * n * np.log(2 * np.pi)
    out = np.empty((len(points), batches))
    scaled = samples / bw
    for q0 in range(0, len(points), QUERY_BLOCK):
        p = points[q0 : q0 + QUERY_BLOCK] / bw
        for b in range(batches):
            x = scaled[edges[b] : edges[b + 1]]
            logk = -0.5 * np.sum((p[:, None, :] - x[None, :, :]) ** 2, axis=-1)
            if log_weights is not None:
                logk = logk + log_weights[edges[b] : edges[b + 1]][None, :]
            if tilt is not None:
                raw = samples[edges[b] : edges[b + 1]]
                logk = logk + (raw @ tilt)[None, :] - (points[q0 : q0 + QUERY_BLOCK] @ tilt)[:, None]
            out[q0 : q0 + len(p), b] = logsumexp(logk, axis=1) + log_norm
    return out


def kde_density(S: LogSigSampleSet, u, bandwidth="auto", batches: int = BATCHES, tilt=None):
    """Product-Gaussian KDE of the sample law at ``u`` (one point or ``(q, n)``).

    The estimate is the mean over ``batches`` contiguous sample blocks; the
    standard error is the batch-means standard deviation over ``sqrt(batches)``.
    Weighted sample sets give the importance-sampling estimator.

    ``tilt`` (a vector ``g``) estimates ``p(u)`` as the kernel average of
    ``p(y) exp(g.(y - u))``. When ``g`` is minus the log-gradient of ``p`` at
    ``u`` the integrand is locally flat, which removes the
    ``exp(sum bw_i^2 g_i^2 / 2)`` smoothing bias of steep densities.
    """
    points = np.atleast_2d(np.asarray(u, dtype=float))
    if points.shape[1] != S.n:
        raise ValueError(f"query points need {S.n} coordinates, got {points.shape[1]}")
    if isinstance(bandwidth, str):
        if bandwidth != "auto":
            raise ValueError(f"unknown bandwidth rule {bandwidth!r}")
        bw = scott_bandwidth(np.asarray(S.samples))
    else:
        bw = np.broadcast_to(np.asarray(bandwidth, dtype=float), (S.n,)).copy()
        if np.any(bw <= 0):
            raise ValueError("bandwidths must be positive")
    sizes = np.diff(np.linspace(0, S.count, batches + 1).astype(int))
    tilt = None if tilt is None else np.asarray(tilt, dtype=float).reshape(S.n)
    logs = _log_kernel_sums(np.asarray(S.samples), S.log_weights, points, bw, batches, tilt) - np.log(sizes)
    shift = logs.max(axis=1, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    per_batch = np.exp(logs - shift)
    means = per_batch.mean(axis=1)
    errs = per_batch.std(axis=1, ddof=1) / np.sqrt(batches)
    scale = np.exp(shift[:, 0])
    estimates = []
    for i, p in enumerate(points):
        value = float(means[i] * scale[i])
        log_value = float(np.log(means[i]) + shift[i, 0]) if means[i] > 0 else -np.inf
        estimates.append(DensityEstimate(p, value, float(errs[i] * scale[i]), bw, log_value))
    return estimates[0] if np.ndim(u) == 1 else estimates


def conditional_density(S: LogSigSampleSet, u, tilt=None, batches: int = BATCHES) -> DensityEstimate:
    """``p(u) = phi(u_1) p(u_rest | u_1)`` from a conditioned sample set.

    ``phi`` is the exact Gaussian density of the first layer (variance
    ``(eps t^H)^2`` per axis); the conditional factor is a weighted KDE over
    the higher-layer coordinates, optionally tilted by ``tilt`` (a vector
    over those coordinates).
    """
    if S.endpoint is None:
        raise ValueError("sample set is not conditioned on its first layer")
    u = np.asarray(u, dtype=float).reshape(S.n)
    first = S.basis.layer_slices[0]
    if not np.allclose(u[first], S.endpoint, rtol=0, atol=1e-12):
        raise ValueError("query point's first layer differs from the conditioning endpoint")
    var = (S.eps * S.t**S.H) ** 2
    log_phi = -0.5 * S.d * np.log(2 * np.pi * var) - np.sum(u[first] ** 2) / (2 * var)
    rest = np.asarray(S.samples)[:, first.stop :]
    sub = _RestSamples(rest, S.log_weights)
    est = kde_density(sub, u[first.stop :], batches=batches, tilt=tilt)
    scale = np.exp(log_phi)
    return DensityEstimate(u, est.value * scale, est.stderr * scale, est.bandwidth, est.log_value + log_phi)


@dataclass(frozen=True, eq=False)
class _RestSamples:
    samples: np.ndarray
    log_weights: Optional[np.ndarray]

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def count(self) -> int:
        return self.samples.shape[0]


# ---------------------------------------------------------------- checks


def _bulk_points(basis, sd: np.ndarray) -> np.ndarray:
    """Three points near the mode: the origin and two quarter-spread offsets."""
    a = np.zeros(basis.n)
    b = 0.25 * sd * np.where(np.arange(basis.n) % 2 == 0, 1.0, 0.0)
    c = 0.25 * sd * np.where(np.arange(basis.n) % 2 == 0, -1.0, 1.0)
    return np.stack([a, b, c])


def scaling_exponent(H: float, d: int, N: int) -> float:
    """``H * nu``: the Jacobian exponent of ``Delta_{t^H}``, which scales layer k by ``t^(kH)``.

    From ``Delta_{t^H} U_1 = U_t`` in law, ``p_t(u) = t^(-H nu) p_1(Delta_{t^-H} u)``.
    At ``H = 1/2`` this is the familiar ``t^(-nu/2)``.
    """
    return H * hausdorff_dim(d, N)


def scaling_check(
    H: float, t_list: Sequence[float], u=None, d: int = 2, N: int = 2, count: int = 1_000_000,
    seed: int = 0, steps: Optional[int] = None, tol: float = 0.15, exponent: Optional[float] = None,
) -> dict:
    """Compare ``t^a p_t(Delta_{t^H} u)`` with ``p_1(u)`` for each ``t``.

    ``a`` defaults to ``scaling_exponent(H, d, N) = H nu``; pass ``nu / 2`` to
    test the Brownian-normalised form. Each ``t`` uses an independent stream.
    A row passes when the relative deviation is below ``tol`` and the two
    3-stderr intervals overlap.
    """
    basis = build_hall_basis(d, N)
    nu = hausdorff_dim(d, N)
    a = scaling_exponent(H, d, N) if exponent is None else float(exponent)
    ref = mc_logsig_samples(H, 1.0, d, N, steps, count, derive_seed(seed, H, 1.0))
    points = _bulk_points(basis, np.asarray(ref.samples).std(axis=0)) if u is None else np.atleast_2d(u)
    ref_est = kde_density(ref, points)
    rows = []
    for t in t_list:
        S = ref if t == 1.0 else mc_logsig_samples(H, t, d, N, steps, count, derive_seed(seed, H, t))
        est = kde_density(S, dilate_coords(basis, t**H, points))
        for j, (e, r) in enumerate(zip(est, ref_est)):
            scaled, scaled_se = t**a * e.value, t**a * e.stderr
            dev = abs(scaled / r.value - 1.0) if t != 1.0 else 0.0
            overlap = abs(scaled - r.value) <= 3 * (scaled_se + r.stderr) if t != 1.0 else True
            rows.append({
                "t": t, "point": j, "u": points[j].tolist(), "p_t_scaled": scaled, "stderr_t": scaled_se,
                "p_1": r.value, "stderr_1": r.stderr, "deviation": dev, "overlap": bool(overlap),
                "passed": bool(dev < tol and overlap),
            })
    return {
        "check": "scaling", "H": H, "t_list": list(t_list), "d": d, "N": N, "nu": nu, "exponent": a,
        "count": count, "seed": seed, "steps": ref.steps, "tol": tol, "rows": rows,
        "max_deviation": max(r["deviation"] for r in rows), "passed": all(r["passed"] for r in rows),
    }


def _fit_quadratic(r: np.ndarray, log_s: np.ndarray, weights: np.ndarray):
    A = np.stack([r**2, r, np.ones_like(r)], axis=1)
    w = np.sqrt(weights)
    coef, *_ = np.linalg.lstsq(A * w[:, None], log_s * w, rcond=None)
    return coef


def tail_check(
    H: float, d: int = 2, N: int = 2, count: int = 1_000_000, r_grid=None, seed: int = 0,
    steps: Optional[int] = None, points: int = 12, min_exceed: int = 20,
) -> dict:
    """Fit ``log P(|||U_1||| > r) = a r^2 + b r + c`` over ``r_grid``.

    The default grid spans the empirical 0.5 to 0.9999 quantiles of the
    homogeneous norm. Passes when ``a < 0`` and ``|a| r_max^2 > |b| r_max``.
    Points are weighted by their exceedance counts (inverse binomial
    variance of the log survival).
    """
    basis = build_hall_basis(d, N)
    S = mc_logsig_samples(H, 1.0, d, N, steps, count, derive_seed(seed, H, 1.0))
    norms = np.sort(homogeneous_norm_coords(basis, np.asarray(S.samples)))
    if r_grid is None:
        lo, hi = np.quantile(norms, [0.5, 0.9999])
        r_grid = np.linspace(lo, hi, points)
    r_grid = np.asarray(r_grid, dtype=float)
    exceed = count - np.searchsorted(norms, r_grid, side="right")
    if np.any(exceed < min_exceed):
        raise ValueError(
            f"insufficient tail samples: only {int(exceed.min())} draws beyond r={r_grid[np.argmin(exceed)]:.4g}"
        )
    surv = exceed / count
    log_s = np.log(surv)
    weights = exceed / (1.0 - surv)
    a, b, c = _fit_quadratic(r_grid, log_s, weights)
    r_max = float(r_grid[-1])
    monotone = bool(np.all(np.diff(surv) <= 0))
    passed = bool(a < 0 and abs(a) * r_max**2 > abs(b) * r_max and monotone)
    rows = [{"r": float(r), "survival": float(s), "exceed": int(e)} for r, s, e in zip(r_grid, surv, exceed)]
    return {
        "check": "tail", "H": H, "d": d, "N": N, "count": count, "seed": seed, "steps": S.steps,
        "a": float(a), "b": float(b), "c": float(c), "r_max": r_max, "monotone": monotone,
        "rows": rows, "passed": passed,
    }


def local_lower_bound_check(
    H: float, d: int = 2, N: int = 2, t_list: Sequence[float] = (0.25, 0.5, 1.0), count: int = 1_000_000,
    seed: int = 0, steps: Optional[int] = None, points: int = 8, radius: float = 0.9, factor: float = 3.0,
    exponent: Optional[float] = None,
) -> dict:
    """Floors of ``t^a p_t(u)`` over ``|||u||| <= t^H`` across ``t``.

    ``a`` defaults to ``scaling_exponent(H, d, N) = H nu`` (``nu / 2`` at
    ``H = 1/2``). Query points are the origin plus uniform draws from the box
    ``[-radius, radius]^n`` (the homogeneous ball of that radius), dilated by
    ``t^H``. Passes when all floors agree within ``factor`` and every
    estimate at ``t = 1`` exceeds three standard errors.
    """
    basis = build_hall_basis(d, N)
    a = scaling_exponent(H, d, N) if exponent is None else float(exponent)
    rng = np.random.default_rng(derive_seed(seed, 0x10B))
    v = np.vstack([np.zeros(basis.n), rng.uniform(-1, 1, (points - 1, basis.n))])
    v = dilate_coords(basis, radius, v)
    rows, floors, positive = [], {}, True
    for t in t_list:
        S = mc_logsig_samples(H, t, d, N, steps, count, derive_seed(seed, H, t))
        ests = kde_density(S, dilate_coords(basis, t**H, v))
        scaled = [t**a * e.value for e in ests]
        floors[t] = min(scaled)
        for j, e in enumerate(ests):
            margin = e.value > 3 * e.stderr
            if t == 1.0 and not margin:
                positive = False
            rows.append({"t": t, "point": j, "u": e.point.tolist(), "p_t": e.value, "stderr": e.stderr,
                         "scaled": scaled[j], "three_se_positive": bool(margin)})
    vals = np.array(list(floors.values()))
    spread = float(vals.max() / vals.min()) if vals.min() > 0 else float("inf")
    return {
        "check": "lower_bound", "H": H, "d": d, "N": N, "t_list": list(t_list), "count": count,
        "seed": seed, "exponent": a, "radius": radius, "floors": {str(k): float(v) for k, v in floors.items()},
        "floor_spread": spread, "positive_at_t1": positive, "rows": rows,
        "passed": bool(spread <= factor and positive and 1.0 in floors),
    }


def _varadhan_fit(eps: np.ndarray, logp: np.ndarray, se_logp: np.ndarray):
    """Weighted fit of ``log p = A/eps^2 + B log eps + C``; returns ``A`` and its stderr."""
    y = eps**2 * logp
    sy = eps**2 * se_logp
    X = np.stack([np.ones_like(eps), eps**2 * np.log(eps), eps**2], axis=1)
    w = 1.0 / np.maximum(sy, 1e-12)
    coef, *_ = np.linalg.lstsq(X * w[:, None], y * w, rcond=None)
    cov = np.linalg.pinv((X * w[:, None]).T @ (X * w[:, None]))
    return float(coef[0]), float(np.sqrt(cov[0, 0])), coef


def control_multiplier(basis, control: np.ndarray, grid: np.ndarray, H: float) -> tuple[np.ndarray, float]:
    """Lagrange multiplier ``lam`` of the minimal-norm control, ``G^{-1} h = J^T lam``.

    ``lam`` is the gradient of ``d^2/2`` at the target wherever that is
    differentiable; the second value is the relative stationarity residual.
    """
    from .chow import endpoint_jacobian

    L, _ = cm_factor(grid, H)
    grad = np.linalg.solve(L.T, np.linalg.solve(L, control)).ravel()
    J = endpoint_jacobian(basis, control)
    lam, *_ = np.linalg.lstsq(J.T, grad, rcond=None)
    resid = float(np.linalg.norm(J.T @ lam - grad) / max(np.linalg.norm(grad), 1e-300))
    return lam, resid


def varadhan_check(
    u, H: float = 0.5, eps_list: Sequence[float] = DEFAULT_EPS, d: int = 2, N: int = 2,
    count: int = 1_000_000, seed: int = 0, steps: Optional[int] = None, grid_size: int = 32,
    starts: int = 8, c_lower: Optional[float] = None, scan_samples: int = 6,
    homogeneity_lambda: Optional[float] = 1.25, homogeneity_count: Optional[int] = None,
    orbit: int = 16,
) -> dict:
    """Bracket the small-noise limit of ``eps^2 log p_eps(u)``.

    ``p_eps(u)`` is the exact first-layer Gaussian density times a
    conditional density of the higher layers. The conditional factor comes
    from bridge samples shifted along the optimal control of ``d(u)`` (and
    its rotations that still reach ``u`` when d = 2), reweighted exactly, and
    smoothed by a KDE tilted by the control's Lagrange multiplier. The limit
    ``A`` is extrapolated from the fit ``log p_eps = A/eps^2 + B log eps + C``.

    The bracket is ``[-d_R^2/2 - slack, -(c |||u|||)^2/2 + slack]`` with
    ``d``, ``d_R`` from the optimiser, ``c`` the smallest ``d/|||.|||`` ratio
    of an equivalence scan, and ``slack = 3 se(A) + 0.05 d_R^2/2``.
    """
    _check_density_hurst(H)
    basis = build_hall_basis(d, N)
    u = np.asarray(u, dtype=float)
    if u.shape != (basis.n,):
        raise ValueError(f"u must have {basis.n} coordinates")
    eps_arr = np.asarray(eps_list, dtype=float)
    if eps_arr.size < 3 or np.any(np.diff(eps_arr) >= 0) or np.any(eps_arr <= 0):
        raise ValueError("eps_list must hold at least three strictly decreasing positive values")
    g = GroupElement(basis, u)
    est_d = controlling_distance(g, H, grid_size, "d", starts, seed)
    est_r = controlling_distance(g, H, grid_size, "dR", starts, seed)
    hnorm = float(homogeneous_norm_coords(basis, u))
    scan = None
    if c_lower is None:
        scan = distance_equivalence_scan(H, scan_samples, d, N, grid_size, grid_size, 2, seed)
        c_lower = scan["summary"]["d"]["min"]
    grid = est_d.certificate.grid
    first = basis.layer_slices[0]

    def run(target, control, n_samples):
        controls = _rotation_orbit(basis, control, grid, target, orbit)
        lam, stationarity = control_multiplier(basis, control, grid, H)
        rows = []
        for e in eps_arr:
            S = conditional_logsig_samples(H, d, N, e, target[first], controls, grid, steps, n_samples,
                                           derive_seed(seed, H, 0xE))
            est = conditional_density(S, target, tilt=lam[first.stop :] / e**2)
            rel = est.stderr / est.value if est.value > 0 else np.inf
            rows.append({"eps": float(e), "p": est.value, "stderr": est.stderr, "log_p": est.log_value,
                         "scaled_log_p": float(e**2 * est.log_value) if est.value > 0 else None,
                         "excluded": bool(not est.value > 0 or not np.isfinite(rel))})
        kept = [r for r in rows if not r["excluded"]]
        if len(kept) < 3:
            raise ValueError("fewer than three usable eps values; increase count")
        e = np.array([r["eps"] for r in kept])
        logp = np.array([r["log_p"] for r in kept])
        se = np.array([r["stderr"] / r["p"] for r in kept])
        A, seA, coef = _varadhan_fit(e, logp, se)
        info = {"orbit_size": len(controls), "multiplier": lam.tolist(), "stationarity": stationarity}
        return rows, A, seA, coef, info

    rows, A, seA, coef, info = run(u, np.asarray(est_d.certificate.values), count)
    half_dr2 = 0.5 * est_r.value**2
    d_low = c_lower * hnorm
    slack = 3 * seA + 0.05 * half_dr2
    lower, upper = -half_dr2 - slack, -0.5 * d_low**2 + slack
    scaled = [r["scaled_log_p"] for r in rows if r["scaled_log_p"] is not None]
    report = {
        "check": "varadhan", "u": u.tolist(), "H": H, "eps_list": eps_arr.tolist(), "d": d, "N": N,
        "count": count, "seed": seed, "steps": default_steps(H) if steps is None else steps,
        "grid_size": grid_size, "d_upper": est_d.value, "dR_upper": est_r.value,
        "dR_nondegenerate": est_r.nondegenerate, "c_lower": c_lower, "d_low": d_low,
        "homogeneous_norm": hnorm, "limit": A, "limit_stderr": seA, "fit": [float(c) for c in coef],
        "slack": slack, "bracket": [lower, upper], "rows": rows, **info,
        "trend_decreasing": bool(np.all(np.diff(scaled) < 0)) if len(scaled) > 1 else None,
        "in_bracket": bool(lower <= A <= upper),
    }
    passed = report["in_bracket"]
    if homogeneity_lambda is not None:
        lam = float(homogeneity_lambda)
        rows_l, A_l, seA_l, _, _ = run(dilate_coords(basis, lam, u), lam * np.asarray(est_d.certificate.values),
                                       homogeneity_count or count)
        ratio = A_l / (lam**2 * A)
        report.update(homogeneity_lambda=lam, homogeneity_limit=A_l, homogeneity_stderr=seA_l,
                      homogeneity_ratio=ratio, homogeneity_rows=rows_l,
                      homogeneity_ok=bool(abs(ratio - 1) < 0.2))
        passed = passed and report["homogeneity_ok"]
    if scan is not None:
        report["scan_summary"] = scan["summary"]
    report["passed"] = bool(passed)
    return report
