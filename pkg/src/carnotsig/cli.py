"""Command-line experiment runner.

Every subcommand resolves its parameters from built-in defaults, then an
optional ``--config`` file of ``key = value`` lines, then explicit flags.
The resolved configuration is written next to the outputs (``config.txt``
in ``--out``) or embedded under ``"config"`` in the JSON printed to stdout,
and rerunning with ``--config`` on that file reproduces the report byte for
byte. Reports never contain timings; those go to the log on stderr.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import io
from .chow import (
    ChowSolveError,
    cc_norm_estimate,
    chow_path,
    controlling_distance,
    distance_equivalence_scan,
    second_kind_solve,
)
from .density import (
    DEFAULT_EPS,
    kde_density,
    local_lower_bound_check,
    mc_logsig_samples,
    scaling_check,
    tail_check,
    varadhan_check,
)
from .fbm import sample_fbm_cholesky, sample_fbm_circulant
from .free_lie import build_hall_basis, hausdorff_dim, layer_dims
from .group import GroupElement
from .signature import PLPath, log_sig_pl_path, sig_pl_path

logger = logging.getLogger("carnotsig")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


def _float_list(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    parts = [p for p in str(text).replace(" ", "").split(",") if p]
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_float(text) -> Optional[float]:
    if text is None or str(text).strip().lower() in ("", "none", "off"):
        return None
    return float(text)


_TYPE_NAMES = {int: "int", float: "float", str: "str", _float_list: "list of floats",
               _bool: "bool", _optional_float: "float or none"}


@dataclass(frozen=True)
class Param:
    name: str
    kind: Callable
    default: object
    help: str


def _p(name, kind, default, help):
    return Param(name, kind, default, help)


D = _p("d", int, 2, "path dimension (alphabet size)")
NLEV = _p("N", int, 2, "truncation level / nilpotency step")
SEED = _p("seed", int, 0, "master seed; every random stream derives from it")
H = _p("H", float, 0.5, "Hurst parameter")
COUNT = _p("count", int, 1_000_000, "number of Monte Carlo paths")
STEPS = _p("steps", int, 0, "fBm grid steps (0 picks 256 for H >= 1/2, else 1024)")
U = _p("u", _float_list, None, "target log-signature coordinates, comma separated (use --u=-1,0,0 for a leading minus)")
STARTS = _p("starts", int, 8, "optimiser multistarts")
EXPONENT = _p("exponent", _optional_float, None, "density rescaling exponent a (none means H*nu)")
GRID = _p("grid_size", int, 32, "nodes of the control grid")


def _steps(cfg) -> Optional[int]:
    return None if cfg["steps"] == 0 else cfg["steps"]


def _group(cfg) -> GroupElement:
    basis = build_hall_basis(cfg["d"], cfg["N"])
    if cfg["u"] is None:
        raise ConfigError("--u is required")
    if len(cfg["u"]) != basis.n:
        raise ConfigError(f"--u needs {basis.n} coordinates for d={cfg['d']}, N={cfg['N']}, got {len(cfg['u'])}")
    return GroupElement(basis, np.array(cfg["u"]))


# ---------------------------------------------------------------- commands


def cmd_dims(cfg, out):
    rows = [{"N": k, "layer_dims": layer_dims(cfg["d"], k), "n": sum(layer_dims(cfg["d"], k)),
             "nu": hausdorff_dim(cfg["d"], k)} for k in range(1, cfg["N"] + 1)]
    return {"d": cfg["d"], "N": cfg["N"], "layer_dims": rows[-1]["layer_dims"], "n": rows[-1]["n"],
            "nu": rows[-1]["nu"], "rows": rows}, {"dims.csv": rows}


def cmd_basis(cfg, out):
    basis = build_hall_basis(cfg["d"], cfg["N"])
    rows = [{"index": i, "label": tree.label, "degree": tree.degree, "word": "".join(map(str, tree.word))}
            for i, tree in enumerate(basis.trees)]
    return {"d": cfg["d"], "N": cfg["N"], "n": basis.n, "elements": rows}, {"basis.csv": rows}


def cmd_signature(cfg, out):
    if not cfg["path"]:
        raise ConfigError("--path is required")
    try:
        path = io.read_path_csv(cfg["path"])
    except OSError as exc:
        raise ConfigError(f"cannot read {cfg['path']}: {exc}") from exc
    if cfg["d"] != path.d:
        raise ConfigError(f"--d {cfg['d']} but {cfg['path']} has {path.d} coordinates")
    basis = build_hall_basis(path.d, cfg["N"])
    logsig = log_sig_pl_path(path, basis)
    report = {"d": path.d, "N": cfg["N"], "points": len(path.times), "labels": basis.labels,
              "logsig": logsig.coords.tolist()}
    if cfg["full"]:
        report["signature"] = [lv.tolist() for lv in sig_pl_path(path, cfg["N"]).levels]
    return report, {"logsig.csv": [{"label": l, "value": v} for l, v in zip(basis.labels, logsig.coords)]}


def cmd_sample(cfg, out):
    steps = _steps(cfg)
    S = mc_logsig_samples(cfg["H"], cfg["t"], cfg["d"], cfg["N"], steps, cfg["count"], cfg["seed"])
    samples = np.asarray(S.samples)
    report = {**S.metadata(), "labels": S.basis.labels, "mean": samples.mean(axis=0).tolist(),
              "std": samples.std(axis=0).tolist()}
    if out is not None:
        io.write_samples_csv(S, out / "samples.csv")
        io.write_samples_binary(S, out / "samples.bin")
        if cfg["paths"]:
            sampler = sample_fbm_circulant if cfg["method"] == "circulant" else None
            if sampler is None:
                grid = cfg["t"] * np.arange(1, S.steps + 1) / S.steps
                batch = sample_fbm_cholesky(grid, cfg["H"], cfg["d"], cfg["count"], cfg["seed"], cfg["threads"])
            else:
                batch = sampler(S.steps, cfg["H"], cfg["d"], cfg["count"], cfg["seed"], cfg["t"], cfg["threads"])
            io.write_fbm_binary(batch, out / "fbm.bin")
    return report, {}


def cmd_density(cfg, out):
    g = _group(cfg)
    S = mc_logsig_samples(cfg["H"], cfg["t"], cfg["d"], cfg["N"], _steps(cfg), cfg["count"], cfg["seed"], cfg["eps"])
    est = kde_density(S, g.coords)
    return {**S.metadata(), "estimate": est.to_dict()}, {}


def cmd_scaling(cfg, out):
    rep = scaling_check(cfg["H"], cfg["t"], None, cfg["d"], cfg["N"], cfg["count"], cfg["seed"], _steps(cfg), cfg["tol"],
                        cfg["exponent"])
    return rep, {"scaling.csv": rep["rows"]}


def cmd_tail(cfg, out):
    rep = tail_check(cfg["H"], cfg["d"], cfg["N"], cfg["count"], None, cfg["seed"], _steps(cfg), cfg["points"])
    return rep, {"tail.csv": rep.get("rows", [])}


def cmd_lower_bound(cfg, out):
    rep = local_lower_bound_check(cfg["H"], cfg["d"], cfg["N"], cfg["t"], cfg["count"], cfg["seed"], _steps(cfg),
                                  cfg["points"], cfg["radius"], cfg["factor"], cfg["exponent"])
    return rep, {"lower_bound.csv": rep["rows"]}


def cmd_varadhan(cfg, out):
    g = _group(cfg)
    rep = varadhan_check(g.coords, cfg["H"], cfg["eps"], cfg["d"], cfg["N"], cfg["count"], cfg["seed"], _steps(cfg),
                         cfg["grid_size"], cfg["starts"], None, cfg["scan_samples"], cfg["homogeneity_lambda"],
                         None, cfg["orbit"])
    return rep, {"varadhan.csv": rep["rows"]}


def cmd_chow(cfg, out):
    g = _group(cfg)
    sol = second_kind_solve(g, seed=cfg["seed"])
    if out is not None:
        io.write_path_csv(chow_path(g, seed=cfg["seed"]), out / "path.csv")
    return {"u": g.coords.tolist(), **sol.to_dict()}, {}


def _distance_report(est, out):
    if out is not None:
        c = est.certificate
        io.write_path_csv(PLPath(c.times(), c.points()), out / "certificate.csv")
    return est.to_dict(), {}


def cmd_ccdist(cfg, out):
    return _distance_report(cc_norm_estimate(_group(cfg), cfg["segments"], cfg["starts"], cfg["seed"]), out)


def cmd_cdist(cfg, out):
    if cfg["mode"] not in ("d", "dR"):
        raise ConfigError(f"--mode must be d or dR, got {cfg['mode']!r}")
    est = controlling_distance(_group(cfg), cfg["H"], cfg["grid_size"], cfg["mode"], cfg["starts"], cfg["seed"])
    return _distance_report(est, out)


def cmd_equiv_scan(cfg, out):
    rep = distance_equivalence_scan(cfg["H"], cfg["samples"], cfg["d"], cfg["N"], cfg["grid_size"], cfg["segments"],
                                    cfg["starts"], cfg["seed"], cfg["homogeneity_lambda"])
    return rep, {"equiv_scan.csv": rep["samples"]}


@dataclass(frozen=True)
class Command:
    name: str
    run: Callable
    params: tuple
    help: str
    schema: str


COMMANDS = [
    Command("dims", cmd_dims, (D, _p("N", int, 5, "largest truncation level"), SEED),
            "layer dimensions, coordinate count n and homogeneous dimension nu",
            "report: d, N, layer_dims, n, nu, rows[{N, layer_dims, n, nu}] for each level up to N; dims.csv"),
    Command("basis", cmd_basis, (D, NLEV, SEED), "Lyndon bracket basis of the free nilpotent Lie algebra",
            "report: d, N, n, elements[{index, label, degree, word}]; basis.csv"),
    Command("signature", cmd_signature,
            (_p("path", str, "", "PL path CSV with header t,x1,...,xd"), D, NLEV,
             _p("full", _bool, False, "also report the tensor signature levels"), SEED),
            "log-signature of a piecewise-linear path",
            "report: d, N, points, labels, logsig[, signature]; logsig.csv"),
    Command("sample", cmd_sample,
            (H, D, NLEV, _p("t", float, 1.0, "time horizon"), STEPS, _p("count", int, 1000, "number of paths"),
             SEED, _p("method", str, "circulant", "fBm sampler for --paths: circulant or cholesky"),
             _p("paths", _bool, False, "also dump the raw fBm paths to fbm.bin")),
            "Monte Carlo log-signature samples of fBm",
            "report: sample metadata, labels, mean, std; samples.csv, samples.bin[, fbm.bin]"),
    Command("density", cmd_density,
            (U, H, D, NLEV, _p("t", float, 1.0, "time horizon"), _p("eps", float, 1.0, "noise scale"), COUNT,
             STEPS, SEED),
            "kernel density estimate of the log-signature law at one point",
            "report: sample metadata, estimate{point, value, stderr, bandwidth, log_value}"),
    Command("scaling-check", cmd_scaling,
            (H, _p("t", _float_list, (0.25, 1.0), "horizons to compare with t = 1"), D, NLEV, COUNT, STEPS, SEED,
             _p("tol", float, 0.15, "largest allowed relative deviation"), EXPONENT),
            "compare t^a p_t(dilated u) with p_1(u) near the mode",
            "report: exponent, rows[{t, point, u, p_t_scaled, stderr_t, p_1, stderr_1, deviation, overlap, passed}], "
            "max_deviation, passed; scaling.csv"),
    Command("tail", cmd_tail,
            (H, D, NLEV, COUNT, STEPS, SEED, _p("points", int, 12, "radii in the fitted range")),
            "quadratic fit of the log survival function of the homogeneous norm",
            "report: fitted coefficients a, b, c, radii, survival values, passed; tail.csv"),
    Command("lower-bound", cmd_lower_bound,
            (H, D, NLEV, _p("t", _float_list, (0.25, 0.5, 1.0), "horizons"), COUNT, STEPS, SEED,
             _p("points", int, 8, "query points per horizon"), _p("radius", float, 0.9, "homogeneous radius of the query box"),
             _p("factor", float, 3.0, "largest allowed floor ratio"), EXPONENT),
            "floors of the rescaled density over the homogeneous ball and positivity",
            "report: exponent, floors{t: value}, floor_spread, positive_at_t1, rows, passed; lower_bound.csv"),
    Command("varadhan", cmd_varadhan,
            (U, H, _p("eps", _float_list, DEFAULT_EPS, "decreasing noise scales"), D, NLEV, COUNT, STEPS, SEED,
             GRID, STARTS, _p("scan_samples", int, 6, "sphere samples for the lower equivalence constant"),
             _p("homogeneity_lambda", _optional_float, 1.25, "dilation for the homogeneity rerun (none to skip)"),
             _p("orbit", int, 16, "rotation-orbit mixture size")),
            "bracket the small-noise limit of eps^2 log p_eps(u)",
            "report: limit, limit_stderr, bracket, rows[{eps, p, stderr, log_p, scaled_log_p}], d_upper, dR_upper, "
            "homogeneity_ratio, passed; varadhan.csv"),
    Command("chow", cmd_chow, (U, D, NLEV, SEED), "piecewise-linear path reaching u (coordinates of the second kind)",
            "report: u, letters, amplitudes, residual, jacobian_rank, restarts; path.csv"),
    Command("ccdist", cmd_ccdist,
            (U, D, NLEV, _p("segments", int, 64, "path segments"), STARTS, SEED),
            "upper estimate of the Carnot-Caratheodory norm",
            "report: kind, u, value, residual, converged_starts, start_values; certificate.csv"),
    Command("cdist", cmd_cdist,
            (U, H, D, NLEV, GRID, _p("mode", str, "d", "d (all controls) or dR (nondegenerate controls)"), STARTS, SEED),
            "upper estimate of the controlling distance through Cameron-Martin controls",
            "report: kind, u, value, residual, nondegenerate, min_singular_value, start_values; certificate.csv"),
    Command("equiv-scan", cmd_equiv_scan,
            (H, D, NLEV, _p("samples", int, 10, "points on the unit homogeneous sphere"), GRID,
             _p("segments", int, 32, "segments for the CC estimate"), _p("starts", int, 4, "optimiser multistarts"),
             SEED, _p("homogeneity_lambda", _optional_float, None, "dilation for a homogeneity ratio (none to skip)")),
            "empirical equivalence constants of d, d_R and the CC norm on the unit sphere",
            "report: samples[{index, u, d, dR, cc, residual, nondegenerate, failed}], summary, failures, bounded; "
            "equiv_scan.csv"),
]
_BY_NAME = {c.name: c for c in COMMANDS}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carnotsig", description="Log-signature experiments for fractional Brownian motion.",
        epilog="Exit codes: 0 success, 2 invalid input, 3 numerical failure.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for cmd in COMMANDS:
        p = sub.add_parser(cmd.name, help=cmd.help, description=cmd.help,
                           epilog=f"Output schema. {cmd.schema}. Numbers carry 17 significant digits.",
                           argument_default=argparse.SUPPRESS)
        for prm in cmd.params:
            default = io._config_value(prm.default) if prm.default is not None else "none"
            p.add_argument(f"--{prm.name.replace('_', '-')}", dest=prm.name, type=str,
                           help=f"{prm.help} ({_TYPE_NAMES[prm.kind]}, default: {default})")
        p.add_argument("--config", type=str, help="key = value file; flags override its entries")
        p.add_argument("--out", type=str, help="output directory (default: print the JSON report to stdout)")
        p.add_argument("--threads", type=str,
                       help="worker threads for path sampling (int, default: machine parallelism); "
                            "results do not depend on it")
        p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    return parser


def resolve_config(cmd: Command, args: argparse.Namespace) -> dict:
    """Defaults, then the ``--config`` file, then explicit flags, each typed."""
    raw = {prm.name: prm.default for prm in cmd.params}
    raw["threads"] = None
    known = set(raw)
    if getattr(args, "config", None):
        try:
            fileconf = io.read_config(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        command = fileconf.pop("command", cmd.name)
        if command != cmd.name:
            raise ConfigError(f"config {args.config} is for '{command}', not '{cmd.name}'")
        unknown = set(fileconf) - known
        if unknown:
            raise ConfigError(f"unknown config keys for {cmd.name}: {', '.join(sorted(unknown))}")
        raw.update(fileconf)
    for name in known:
        if hasattr(args, name):
            raw[name] = getattr(args, name)
    cfg = {}
    kinds = {prm.name: prm.kind for prm in cmd.params}
    kinds["threads"] = lambda v: None if v in (None, "", "none") else int(v)
    for name, value in raw.items():
        if value is None or not isinstance(value, str):
            cfg[name] = value
            continue
        try:
            cfg[name] = kinds[name](value)
        except ValueError as exc:
            raise ConfigError(f"invalid value for {name}: {value!r} ({exc})") from exc
    return cfg


def _emitted_config(cmd: Command, cfg: dict) -> dict:
    # threads is left out so reports regenerate identically on any core count; unset optional
    # values are kept (as none) so a rerun cannot fall back to a different default
    return {"command": cmd.name, **{prm.name: cfg[prm.name] for prm in cmd.params}}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    cmd = _BY_NAME[args.command]
    try:
        cfg = resolve_config(cmd, args)
        if cfg["threads"] is None:
            cfg["threads"] = os.cpu_count() or 1
        out = None
        if getattr(args, "out", None):
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
        started = time.perf_counter()
        report, tables = cmd.run(cfg, out)
        logger.info("%s finished in %.2f s", cmd.name, time.perf_counter() - started)
        config = _emitted_config(cmd, cfg)
        if out is None:
            print(io.dumps_json({"command": cmd.name, "config": config, "report": report}))
        else:
            io.write_config(config, out / "config.txt")
            io.write_json(report, out / "report.json")
            for fname, rows in tables.items():
                if rows:
                    io.write_rows_csv(rows, out / fname)
            print(f"wrote {out / 'report.json'}")
        return EXIT_OK
    except (ChowSolveError, np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"carnotsig {cmd.name}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError, TypeError) as exc:
        print(f"carnotsig {cmd.name}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main(argv: Optional[Sequence[str]] = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
