"""Command-line entry point: ``topoproj <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import bench, ccsa, synthetic
from .geomcon import LengthscaleConfig, ruler_min_lengthscale
from .grid import GridSpec, make_conic_kernel
from .homogenize import MaterialPair, Tensor2, conductivity_field, homogenize_kappa
from .io import read_field, write_field, write_pgm
from .projection import Method, ProjectionConfig, forward

log = logging.getLogger("topoproj")


class UsageError(Exception):
    pass


def parse_beta(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def parse_length(text: str, dx: float) -> float:
    """``"0.5px"`` is in pixels; a bare number is in length units."""
    t = text.strip().lower()
    if t.endswith("px"):
        return float(t[:-2]) * dx
    return float(t)


def parse_sweep(text: str) -> np.ndarray:
    """``start:stop:count`` (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"bad sweep {text!r}, expected start:stop:count")
        return np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))
    return np.array([float(v) for v in text.split(",") if v.strip()])


def _projection(args, grid: GridSpec) -> ProjectionConfig:
    cfg = ProjectionConfig(beta=parse_beta(args.beta), eta=args.eta,
                           r_hat=parse_length(args.rhat, grid.dx), method=Method(args.method))
    cfg.check_grid(grid)
    return cfg


def cmd_project(args) -> int:
    rho, grid = read_field(args.infile)
    cfg = _projection(args, grid)
    pipe = forward(rho, make_conic_kernel(args.radius), grid, cfg)
    if args.out:
        write_field(args.out, pipe.rho_hat, grid)
    gray = int(np.sum((pipe.rho_hat > 0.01) & (pipe.rho_hat < 0.99)))
    print(f"gray pixels: {gray} of {grid.size} ({gray / grid.size:.4%})")
    return 0


def cmd_synthetic(args) -> int:
    if args.kind == "parabola":
        values = parse_sweep(args.sweep or "0.3:0.7:401")
        cfg = ProjectionConfig(beta=parse_beta(args.beta), eta=args.eta, r_hat=args.rhat)
        table = synthetic.sweep_alpha(cfg, values)
    else:
        values = parse_sweep(args.sweep or "0.5:1.5:401")
        cfg = ProjectionConfig(beta=parse_beta(args.beta), eta=args.eta, r_hat=args.rhat)
        table = synthetic.sweep_cassini(cfg, values)
    if args.csv:
        synthetic.write_table(table, args.csv)
    else:
        keys = list(table)
        print(",".join(keys))
        for row in zip(*(table[k] for k in keys)):
            print(",".join(f"{v:.10g}" for v in row))
    return 0


def cmd_homogenize(args) -> int:
    rho_hat, grid = read_field(args.structure)
    if not grid.periodic:
        raise UsageError("homogenization needs a periodic structure")
    mats = MaterialPair(kappa1=args.k1, kappa2=args.k2)
    h = homogenize_kappa(conductivity_field(rho_hat, mats), method=args.solver)
    out = {"xx": h.tensor.xx, "xy": h.tensor.xy, "yy": h.tensor.yy, "residuals": list(h.residuals)}
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _load_config(path) -> bench.ExperimentConfig:
    if path is None:
        return bench.ExperimentConfig()
    try:
        return bench.load_config(path)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc


def cmd_optimize(args) -> int:
    cfg = _load_config(args.config)
    if args.kappa1 is not None:
        cfg.materials = MaterialPair(kappa1=args.kappa1, kappa2=cfg.materials.kappa2)
    if args.constrained:
        cfg = cfg.with_constraints()
    if args.init:
        rho0, grid = read_field(args.init)
        if grid.shape != cfg.grid.shape:
            raise UsageError(f"init field is {grid.nx}x{grid.ny}, config grid is {cfg.grid.nx}x{cfg.grid.ny}")
    else:
        rho0 = bench.random_init(cfg.grid, args.seed, cfg.rng_seed_base)
    run = bench.run_single(cfg, args.method, args.seed, rho0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bench.write_run_csv(run, out / f"run_{run.method}_{run.seed}.csv")
    if run.final_rho is not None:
        write_field(out / "final.raw", run.final_rho, cfg.grid)
        write_field(out / "final_projected.raw", run.final_rho_hat, cfg.grid)
        write_pgm(out / "final.pgm", run.final_rho_hat)
    print(f"{run.method} seed {run.seed}: converged={run.converged} iters={run.iters_to_converge} "
          f"best_loss={run.best_loss:.3e}" + (f" error={run.error}" if run.error else ""))
    return 0


def cmd_bench(args) -> int:
    cfg = _load_config(args.config)
    if args.seeds is not None:
        cfg.n_seeds = args.seeds
    study = bench.run_study(cfg, workers=args.workers)
    bench.report(study, args.out)
    print(json.dumps(study.summary()["outcomes"]))
    return 0


def cmd_ruler(args) -> int:
    values, _ = read_field(args.structure)
    binary = values >= args.threshold
    phases = ("solid", "void") if args.phase == "both" else (args.phase,)
    out = {}
    for ph in phases:
        v = ruler_min_lengthscale(binary, ph)
        out[f"{ph}_px"] = None if math.isinf(v) else v
    print(json.dumps(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="topoproj", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="filter and project a design field")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--method", choices=[m.value for m in Method], default="ssp2")
    p.add_argument("--beta", default="inf")
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--rhat", default="0.5px")
    p.add_argument("--radius", type=float, default=5.0, help="filter radius in pixels")
    p.add_argument("--out")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("synthetic", help="parabola or Cassini parameter sweeps")
    p.add_argument("kind", choices=["parabola", "cassini"])
    p.add_argument("--sweep", help="start:stop:count or comma list")
    p.add_argument("--beta", default="inf")
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--rhat", type=float, default=0.5)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_synthetic)

    p = sub.add_parser("homogenize", help="effective conductivity of a periodic structure")
    p.add_argument("--structure", required=True)
    p.add_argument("--k1", type=float, default=1e-4)
    p.add_argument("--k2", type=float, default=1.0)
    p.add_argument("--solver", choices=["direct", "pcg"], default="direct")
    p.add_argument("--out")
    p.set_defaults(func=cmd_homogenize)

    p = sub.add_parser("optimize", help="single thermal metamaterial optimization")
    p.add_argument("--config")
    p.add_argument("--method", choices=["ssp1", "ssp2", "tanh"], default="ssp2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", help="initial design field file")
    p.add_argument("--kappa1", type=float)
    p.add_argument("--constrained", action="store_true", help="add lengthscale constraints (c = 64 R~^2)")
    p.add_argument("--out", default="opt_out")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("bench", help="multi-seed SSP1 vs SSP2 study")
    p.add_argument("--config")
    p.add_argument("--seeds", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="bench_out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ruler", help="minimum feature size of a binary structure")
    p.add_argument("--structure", required=True)
    p.add_argument("--phase", choices=["solid", "void", "both"], default="both")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_ruler)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, TypeError, UsageError) as exc:
        print(f"topoproj: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
