"""Command-line front end.

Usage::

    lowrank-maps solve    --x X.csv --y Y.csv -k 2 -p 2 --out report.json
    lowrank-maps weighted --x X.csv --y Y.csv -k 2 --config cfg.json --out r.json
    lowrank-maps dmd      --x series.csv -k 2 --out r.json
    lowrank-maps kernel-dmd --x xp.csv --y yp.csv -k 3 --config cfg.json --out r.json
    lowrank-maps continuous -k 2 --config cfg.json --out r.json
    lowrank-maps verify   --x X.csv --y Y.csv -k 2 --seed 7 --out r.json
    lowrank-maps sweep    --x X.csv --y Y.csv --kmax 5 --out r.json

Exit codes: 0 success, 2 invalid input or config, 3 dimension mismatch,
4 numerical failure, 5 closed form beaten during ``verify``.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field
import json
import math
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .continuous import (
    composite_trapezoid,
    continuous_lowrank,
    gauss_legendre,
    polynomial_kernel,
    refine_to_convergence,
)
from .dmd import SnapshotSeries, dmd_modes, snapshot_pairs
from .errors import DimensionMismatch, InputError, NotConverged, NumericalError
from .io import atomic_write, dumps_report, format_float, matrix_digest, read_matrix_csv
from .kernel import KernelSpec, kernel_lowrank_solve
from .linalg import ToleranceConfig, check_p
from .oracle import consistency_report, optimality_certificate
from .solver import solve_lowrank, solve_weighted, spectral_gap

COMMANDS = ("solve", "weighted", "dmd", "kernel-dmd", "continuous", "verify", "sweep")

EXIT_OK, EXIT_INPUT, EXIT_DIMENSION, EXIT_NUMERICAL, EXIT_MARGIN = 0, 2, 3, 4, 5


@dataclass
class RunConfig:
    command: str
    x: str | None = None
    y: str | None = None
    k: int = 1
    p: float = 2.0
    out: str | None = None
    seed: int = 0
    kmax: int | None = None
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 0:
            raise InputError(f"k must be a nonnegative integer, got {self.k!r}")
        self.k = int(self.k)
        self.p = check_p(self.p)
        if not 0 <= int(self.seed) < 2**64:
            raise InputError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        for name in ("x", "y"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise InputError(f"--{name} file {path} does not exist")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lowrank-maps", description="Optimal low-rank linear-map regression.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--x", help="input matrix CSV (snapshot series for dmd, points for kernel-dmd)")
    ap.add_argument("--y", help="output matrix CSV")
    ap.add_argument("-k", type=int, default=None, help="rank budget")
    ap.add_argument("-p", default=None, help="Schatten order, a positive real or 'inf'")
    ap.add_argument("--out", help="report path (stdout when omitted)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--rank-rtol", type=float, default=None)
    ap.add_argument("--kmax", type=int, default=None)
    ap.add_argument("--config", help="JSON config with command-specific settings")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def load_config(args) -> RunConfig:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise InputError("config must be a JSON object")
    cfg = dict(cfg)
    tol_cfg = dict(cfg.pop("tolerances", {}) or {})
    if args.rank_rtol is not None:
        tol_cfg["rank_rtol"] = args.rank_rtol
    try:
        tolerances = ToleranceConfig(**tol_cfg)
    except TypeError as exc:
        raise InputError(f"bad tolerances: {exc}") from exc

    def pick(flag, key, default):
        if flag is not None:
            return flag
        return cfg.pop(key, default)

    base = Path(args.config).parent if args.config else Path(".")

    def cfg_path(value):
        return str(base / value) if value is not None and not Path(value).is_absolute() else value

    x = args.x if args.x is not None else cfg_path(cfg.pop("x", None))
    y = args.y if args.y is not None else cfg_path(cfg.pop("y", None))
    cfg.pop("x", None)
    cfg.pop("y", None)
    for key in ("weight",):
        if key in cfg:
            cfg[key] = cfg_path(cfg[key])
    return RunConfig(
        command=args.command,
        x=x,
        y=y,
        k=pick(args.k, "k", 1),
        p=pick(args.p, "p", 2.0),
        out=pick(args.out, "out", None),
        seed=pick(args.seed, "seed", 0),
        kmax=pick(args.kmax, "kmax", None),
        tolerances=tolerances,
        extra=cfg,
    )


def _p_out(p):
    return "inf" if math.isinf(p) else p


def _require(path, flag):
    if path is None:
        raise InputError(f"command needs --{flag}")
    return read_matrix_csv(path)


def _base_report(cfg: RunConfig, inputs: dict, mats: dict) -> dict:
    return {
        "command": cfg.command,
        "inputs": inputs,
        "digests": {name: matrix_digest(m) for name, m in mats.items()},
        "k": cfg.k,
        "p": _p_out(cfg.p),
        "rank_x": None,
        "z_sigma": [],
        "achieved_error": None,
        "predicted_error": None,
        "spectral_gap": None,
        "oracle": None,
        "seed": cfg.seed,
        "tolerances": {
            "rank_rtol": cfg.tolerances.rank_rtol,
            "psd_atol": cfg.tolerances.psd_atol,
            "recon_rtol": cfg.tolerances.recon_rtol,
        },
        "version": __version__,
        "details": {"warnings": ["p < 1: Schatten quasi-norm"] if cfg.p < 1 else []},
    }


def _fill_solution(report, sol):
    report["rank_x"] = sol.rank_x
    report["z_sigma"] = sol.z_sigma
    report["achieved_error"] = sol.achieved_error
    report["predicted_error"] = sol.predicted_error
    report["spectral_gap"] = sol.spectral_gap
    report["details"]["k_effective"] = sol.k_effective
    report["details"]["m_star"] = sol.m_star


def _eig_list(lam):
    return [[float(z.real), float(z.imag)] for z in lam]


def _cmd_solve(cfg):
    x, y = _require(cfg.x, "x"), _require(cfg.y, "y")
    report = _base_report(cfg, {"x": cfg.x, "y": cfg.y}, {"x": x, "y": y})
    _fill_solution(report, solve_lowrank(x, y, cfg.k, cfg.p, cfg.tolerances))
    return report, EXIT_OK


def _cmd_weighted(cfg):
    x, y = _require(cfg.x, "x"), _require(cfg.y, "y")
    if "weight" not in cfg.extra:
        raise InputError("weighted needs a 'weight' matrix path in the config")
    w = read_matrix_csv(cfg.extra["weight"])
    report = _base_report(cfg, {"x": cfg.x, "y": cfg.y, "weight": cfg.extra["weight"]}, {"x": x, "y": y, "weight": w})
    _fill_solution(report, solve_weighted(x, y, w, cfg.k, cfg.p, cfg.tolerances))
    return report, EXIT_OK


def _cmd_dmd(cfg):
    states = _require(cfg.x, "x")
    series = SnapshotSeries(states)
    x, y = snapshot_pairs(series)
    report = _base_report(cfg, {"series": cfg.x}, {"series": states})
    sol = solve_lowrank(x, y, cfg.k, cfg.p, cfg.tolerances)
    _fill_solution(report, sol)
    summary = dmd_modes(sol, x, y, cfg.tolerances)
    report["details"]["eigenvalues"] = _eig_list(summary.eigenvalues)
    report["details"]["mode_residuals"] = summary.residuals
    return report, EXIT_OK


def _cmd_kernel(cfg):
    xp, yp = _require(cfg.x, "x"), _require(cfg.y, "y")
    kernel = KernelSpec.from_dict(cfg.extra.get("kernel", {"kind": "linear"}))
    jitter = float(cfg.extra.get("jitter", 0.0))
    report = _base_report(cfg, {"x": cfg.x, "y": cfg.y}, {"x": xp, "y": yp})
    if cfg.p != 2:
        report["details"]["warnings"].append("kernel-dmd reports Hilbert-Schmidt (p=2) errors only")
    sol = kernel_lowrank_solve(kernel, xp, yp, cfg.k, cfg.tolerances, jitter=jitter)
    report["rank_x"] = sol.rank_x
    report["z_sigma"] = sol.z_sigma
    report["achieved_error"] = math.sqrt(sol.achieved_error_sq)
    report["predicted_error"] = math.sqrt(sol.predicted_error_sq)
    report["spectral_gap"] = spectral_gap(sol.z_sigma, cfg.k)
    report["details"].update(
        kernel=kernel.to_dict(),
        jitter=jitter,
        k_effective=sol.k_effective,
        eigenvalues=_eig_list(sol.eigenvalues),
        eigfn_coeffs_real=sol.eigfn_coeffs.real,
        eigfn_coeffs_imag=sol.eigfn_coeffs.imag,
    )
    return report, EXIT_OK


def _rule_family(qcfg):
    family = qcfg.get("family", "gauss-legendre")
    a, b = qcfg.get("interval", [0.0, 1.0])
    if family == "gauss-legendre":
        return lambda q: gauss_legendre(q, a, b)
    if family == "composite-trapezoid":
        return lambda q: composite_trapezoid(q, a, b)
    raise InputError(f"unknown quadrature family {family!r}")


def _cmd_continuous(cfg):
    if "kx" not in cfg.extra or "ky" not in cfg.extra:
        raise InputError("continuous needs 'kx' and 'ky' polynomial coefficient matrices in the config")
    kx = polynomial_kernel(cfg.extra["kx"])
    ky = polynomial_kernel(cfg.extra["ky"])
    qcfg = dict(cfg.extra.get("quadrature", {}))
    family = _rule_family(qcfg)
    report = _base_report(cfg, {"quadrature": qcfg}, {"kx": np.asarray(cfg.extra["kx"], float),
                                                       "ky": np.asarray(cfg.extra["ky"], float)})
    if qcfg.get("refine", False):
        sol, trace = refine_to_convergence(
            kx, ky, cfg.k, cfg.p, family,
            q_start=int(qcfg.get("q", 2)), q_max=int(qcfg.get("q_max", 1024)),
            conv_rtol=float(qcfg.get("conv_rtol", 1e-10)), tol=cfg.tolerances)
        report["details"]["refinement_trace"] = [[q, e] for q, e in trace]
    else:
        sol = continuous_lowrank(kx, ky, family(int(qcfg.get("q", 8))), cfg.k, cfg.p, cfg.tolerances)
    _fill_solution(report, sol)
    report["details"]["quadrature"] = sol.extras.get("quadrature")
    return report, EXIT_OK


def _cmd_verify(cfg):
    x, y = _require(cfg.x, "x"), _require(cfg.y, "y")
    report = _base_report(cfg, {"x": cfg.x, "y": cfg.y}, {"x": x, "y": y})
    _fill_solution(report, solve_lowrank(x, y, cfg.k, cfg.p, cfg.tolerances))
    cert = optimality_certificate(
        x, y, cfg.k,
        n_samples=int(cfg.extra.get("n_samples", 1000)),
        n_starts=int(cfg.extra.get("n_starts", 10)),
        seed=cfg.seed, tol=cfg.tolerances)
    cons = consistency_report(x, y, cfg.k, seed=cfg.seed, tol=cfg.tolerances)
    rel = cert.margin / cert.closed_form_error if cert.closed_form_error > 0 else 0.0
    report["oracle"] = {
        "p": 2.0,
        "closed_form_error": cert.closed_form_error,
        "best_candidate_error": cert.best_candidate_error,
        "margin": cert.margin,
        "relative_margin": rel,
        "n_candidates": cert.n_candidates,
        "n_refinements": cert.n_refinements,
        "best_candidate_index": cert.best_candidate_index,
        "flagged": cert.flagged,
        "instance_digest": cert.instance_digest,
        "per_p_formula_gap": cons.per_p_formula_gap,
        "pythagorean_max_rel_dev": cons.details["pythagorean_max_rel_dev"],
        "alternative_projector_excess": cons.details["alternative_projector_excess"],
    }
    return report, EXIT_MARGIN if cert.flagged else EXIT_OK


def _cmd_sweep(cfg):
    x, y = _require(cfg.x, "x"), _require(cfg.y, "y")
    kmax = cfg.kmax if cfg.kmax is not None else y.shape[0]
    if kmax < 0:
        raise InputError("kmax must be >= 0")
    report = _base_report(cfg, {"x": cfg.x, "y": cfg.y}, {"x": x, "y": y})
    rows = []
    sol = None
    for k in range(kmax + 1):
        s = solve_lowrank(x, y, k, cfg.p, cfg.tolerances)
        rows.append((k, s.achieved_error, s.predicted_error))
        if k == cfg.k:
            sol = s
    _fill_solution(report, sol if sol is not None else s)
    if cfg.extra.get("sweep_csv"):
        csv_path = Path(cfg.extra["sweep_csv"])
    elif cfg.out:
        csv_path = Path(cfg.out).with_suffix(".csv")
    else:
        csv_path = Path("sweep.csv")
    text = "k,achieved_error,predicted_error\n" + "".join(
        f"{k},{format_float(a)},{format_float(b)}\n" for k, a, b in rows)
    atomic_write(csv_path, text)
    report["details"]["sweep_csv"] = str(csv_path)
    report["details"]["sweep"] = [list(r) for r in rows]
    return report, EXIT_OK


_DISPATCH = {
    "solve": _cmd_solve,
    "weighted": _cmd_weighted,
    "dmd": _cmd_dmd,
    "kernel-dmd": _cmd_kernel,
    "continuous": _cmd_continuous,
    "verify": _cmd_verify,
    "sweep": _cmd_sweep,
}


def run(cfg: RunConfig) -> int:
    """Execute one command and write its report; returns the exit code."""
    report, code = _DISPATCH[cfg.command](cfg)
    text = dumps_report(report)
    if cfg.out:
        atomic_write(cfg.out, text)
    else:
        sys.stdout.write(text)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        return run(cfg)
    except DimensionMismatch as exc:
        print(f"error: dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        if isinstance(exc, NotConverged):
            print(f"refinement trace: {exc.trace}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
