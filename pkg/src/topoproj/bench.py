"""Multi-seed optimization studies for the thermal metamaterial problem."""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import ccsa
from .geomcon import LengthscaleConfig, constraint_solid, constraint_void
from .grid import Boundary, GridSpec, make_conic_kernel
from .homogenize import KAPPA_FLOOR, MaterialPair, Tensor2, loss_and_grad
from .io import write_field, write_pgm
from .projection import Method, ProjectionConfig, forward

log = logging.getLogger(__name__)

METHODS = (Method.SSP1, Method.SSP2)
OUTCOMES = ("both", "neither", "ssp2_only", "ssp1_only")


@dataclass
class ExperimentConfig:
    grid: GridSpec = field(default_factory=lambda: GridSpec(61, 61, 1.0 / 61))
    kernel_radius_px: float = 5.0
    projection: ProjectionConfig = field(default_factory=lambda: ProjectionConfig(r_hat=0.5 / 61))
    materials: MaterialPair = field(default_factory=MaterialPair.porous)
    target: Tensor2 = field(default_factory=lambda: Tensor2.diag(0.2, 0.4))
    n_seeds: int = 20
    max_outer: int = 150
    loss_threshold: float = 1e-7
    constraints: LengthscaleConfig | None = None
    rng_seed_base: int = 20250101
    ccsa: ccsa.CcsaOptions = field(default_factory=ccsa.CcsaOptions)

    def __post_init__(self):
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")
        if not self.loss_threshold > 0 or self.max_outer < 1:
            raise ValueError("loss_threshold and max_outer must be positive")
        if not self.grid.periodic:
            raise ValueError("thermal studies need a periodic grid")
        self.projection.check_grid(self.grid)

    @property
    def r_tilde(self) -> float:
        return self.kernel_radius_px * self.grid.dx

    def with_constraints(self, c_factor: float = 64.0, eps: float = 1e-8) -> "ExperimentConfig":
        d = dict(self.__dict__)
        d["constraints"] = LengthscaleConfig.from_filter_radius(self.r_tilde, c_factor=c_factor, eps=eps)
        return ExperimentConfig(**d)

    def effective_ccsa(self) -> ccsa.CcsaOptions:
        # an explicit ccsa.f_target lets a run continue past loss_threshold (threshold-sensitivity studies)
        stop = self.loss_threshold if math.isinf(self.ccsa.f_target) else self.ccsa.f_target
        return ccsa.CcsaOptions(**{**self.ccsa.metadata(), "max_outer": self.max_outer, "f_target": stop})

    def metadata(self) -> dict:
        def conv(v):
            if isinstance(v, float) and math.isinf(v):
                return "inf" if v > 0 else "-inf"
            if hasattr(v, "value"):
                return v.value
            return v

        d = {
            "grid": {k: conv(v) for k, v in asdict(self.grid).items()},
            "kernel_radius_px": self.kernel_radius_px,
            "projection": {k: conv(v) for k, v in asdict(self.projection).items()},
            "materials": asdict(self.materials),
            "target": asdict(self.target),
            "n_seeds": self.n_seeds,
            "max_outer": self.max_outer,
            "loss_threshold": self.loss_threshold,
            "constraints": asdict(self.constraints) if self.constraints else None,
            "rng_seed_base": self.rng_seed_base,
            "random_init": "iid uniform [0,1], Philox keyed by (rng_seed_base, seed), pixel order",
            "ccsa": {k: conv(v) for k, v in self.effective_ccsa().metadata().items()},
        }
        return d


def load_config(path) -> ExperimentConfig:
    """Read a TOML file whose tables mirror :class:`ExperimentConfig` field names."""
    import tomli

    with open(path, "rb") as fh:
        raw = tomli.load(fh)
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    g = dict(raw.pop("grid", {}))
    nx = int(g.get("nx", 61))
    ny = int(g.get("ny", nx))
    grid = GridSpec(nx, ny, float(g.get("dx", 1.0 / nx)), Boundary(g.get("boundary", "periodic")))
    p = dict(raw.pop("projection", {}))
    beta = p.get("beta", math.inf)
    if "r_hat_px" in p:
        p["r_hat"] = p.pop("r_hat_px") * grid.dx
    proj = ProjectionConfig(
        beta=math.inf if str(beta).lower() in ("inf", "infinity") else float(beta),
        eta=float(p.get("eta", 0.5)),
        r_hat=float(p.get("r_hat", 0.5 * grid.dx)),
        method=Method(p.get("method", "ssp2")),
    )
    mats = MaterialPair(**raw.pop("materials", {"kappa1": KAPPA_FLOOR, "kappa2": 1.0}))
    target = Tensor2(**{"xx": 0.2, "xy": 0.0, "yy": 0.4, **raw.pop("target", {})})
    radius = float(raw.pop("kernel_radius_px", 5.0))
    cons = raw.pop("constraints", None)
    if cons is not None:
        cons = dict(cons)
        if "c" not in cons:
            cons["c"] = float(cons.pop("c_factor", 64.0)) * (radius * grid.dx) ** 2
        cons = LengthscaleConfig(**cons)
    opts = ccsa.CcsaOptions(**raw.pop("ccsa", {}))
    return ExperimentConfig(grid=grid, kernel_radius_px=radius, projection=proj, materials=mats,
                            target=target, constraints=cons, ccsa=opts, **raw)


def random_init(grid: GridSpec, seed: int, base: int = 0) -> np.ndarray:
    """Deterministic iid uniform [0, 1] field from a counter-based (Philox) stream."""
    key = np.array([base & 0xFFFFFFFFFFFFFFFF, seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.random(grid.size).reshape(grid.shape)


@dataclass
class RunRecord:
    seed: int
    method: str
    loss: list[float]
    constraints: list[list[float]]
    accepted: list[bool]
    sigma_mean: list[float]
    converged: bool
    iters_to_converge: int | None
    final_rho: np.ndarray | None = field(default=None, repr=False)
    final_rho_hat: np.ndarray | None = field(default=None, repr=False)
    n_evals: int = 0
    error: str | None = None

    @property
    def final_loss(self) -> float:
        return self.loss[-1] if self.loss else math.nan

    @property
    def best_loss(self) -> float:
        return min(self.loss) if self.loss else math.nan


class ThermalProblem:
    """Objective and lengthscale constraints sharing one forward pass per design."""

    def __init__(self, cfg: ExperimentConfig, method: Method):
        self.cfg = cfg
        self.grid = cfg.grid
        self.kernel = make_conic_kernel(cfg.kernel_radius_px)
        self.proj = cfg.projection.replace(method=Method(method))
        self._key = None
        self._val = None

    def evaluate(self, x: np.ndarray):
        key = x.tobytes()
        if key != self._key:
            rho = x.reshape(self.grid.shape)
            ev = loss_and_grad(rho, self.kernel, self.grid, self.proj, self.cfg.materials, self.cfg.target)
            cons = []
            if self.cfg.constraints is not None:
                pipe = forward(rho, self.kernel, self.grid, self.proj)
                for fn in (constraint_solid, constraint_void):
                    v, g = fn(rho, self.kernel, self.grid, self.proj, self.cfg.constraints, pipe=pipe)
                    cons.append((v, g.ravel()))
            self._key, self._val = key, (ev.loss, ev.grad.ravel(), cons, ev.rho_hat)
        return self._val

    def objective(self, x):
        f, g, _, _ = self.evaluate(x)
        return f, g

    def constraint(self, i):
        def fn(x):
            return self.evaluate(x)[2][i]
        return fn

    def problem(self) -> ccsa.OptProblem:
        m = 2 if self.cfg.constraints is not None else 0
        return ccsa.OptProblem(self.grid.size, self.objective, [self.constraint(i) for i in range(m)])


def run_single(cfg: ExperimentConfig, method, seed: int, rho0: np.ndarray | None = None) -> RunRecord:
    method = Method(method)
    if rho0 is None:
        rho0 = random_init(cfg.grid, seed, cfg.rng_seed_base)
    tp = ThermalProblem(cfg, method)
    opts = cfg.effective_ccsa()
    try:
        x, hist = ccsa.minimize(tp.problem(), rho0.ravel(), opts)
    except Exception as exc:  # a failed run is data, not a reason to stop the study
        log.warning("run %s/%d failed: %s", method.value, seed, exc)
        return RunRecord(seed, method.value, [], [], [], [], False, None, error=repr(exc))
    rho = x.reshape(cfg.grid.shape)
    rho_hat = tp.evaluate(x)[3]
    run = RunRecord(
        seed=seed, method=method.value, loss=hist.loss, constraints=hist.constraints,
        accepted=hist.accepted, sigma_mean=hist.sigma_mean, converged=False,
        iters_to_converge=None, final_rho=rho, final_rho_hat=rho_hat, n_evals=hist.n_evals,
    )
    run.iters_to_converge = iters_at_threshold(run, cfg.loss_threshold)
    run.converged = run.iters_to_converge is not None
    return run


def _run_job(args):
    return run_single(*args)


@dataclass
class StudyReport:
    config: ExperimentConfig
    methods: tuple
    runs: list[RunRecord]

    def run(self, method, seed) -> RunRecord:
        for r in self.runs:
            if r.method == Method(method).value and r.seed == seed:
                return r
        raise KeyError((method, seed))

    @property
    def seeds(self) -> list[int]:
        return sorted({r.seed for r in self.runs})

    def converged_count(self, method) -> int:
        return sum(r.converged for r in self.runs if r.method == Method(method).value)

    def outcome_counts(self) -> dict:
        counts = dict.fromkeys(OUTCOMES, 0)
        for s in self.seeds:
            a = self.run(Method.SSP1, s).converged
            b = self.run(Method.SSP2, s).converged
            key = "both" if a and b else "ssp1_only" if a else "ssp2_only" if b else "neither"
            counts[key] += 1
        return counts

    def cumulative(self) -> dict:
        """Fraction of runs per method converged within each iteration count."""
        its = np.arange(self.config.max_outer + 1)
        out = {"iteration": its}
        for m in self.methods:
            runs = [r for r in self.runs if r.method == m.value]
            hit = np.array([r.iters_to_converge for r in runs if r.iters_to_converge is not None])
            frac = [(hit <= k).sum() / len(runs) if runs else 0.0 for k in its]
            out[m.value] = np.array(frac, dtype=float)
        return out

    def summary(self) -> dict:
        per_method = {}
        for m in self.methods:
            runs = [r for r in self.runs if r.method == m.value]
            its = [r.iters_to_converge for r in runs if r.iters_to_converge is not None]
            per_method[m.value] = {
                "runs": len(runs),
                "converged": sum(r.converged for r in runs),
                "failed": sum(r.error is not None for r in runs),
                "median_iters_to_converge": float(np.median(its)) if its else None,
                "median_final_loss": float(np.median([r.best_loss for r in runs])) if runs else None,
            }
        counts = self.outcome_counts() if set(self.methods) == set(METHODS) else None
        return {"outcomes": counts, "methods": per_method, "config": self.config.metadata()}


def run_study(cfg: ExperimentConfig, methods=METHODS, init_fields: dict | None = None,
              workers: int = 1) -> StudyReport:
    """Run every (method, seed) pair from a shared initial field per seed."""
    methods = tuple(Method(m) for m in methods)
    if init_fields is None:
        seeds = list(range(cfg.n_seeds))
        init_fields = {s: random_init(cfg.grid, s, cfg.rng_seed_base) for s in seeds}
    jobs = [(cfg, m, s, init_fields[s]) for m in methods for s in sorted(init_fields)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            runs = list(pool.map(_run_job, jobs))
    else:
        runs = [_run_job(j) for j in jobs]
    runs.sort(key=lambda r: (r.method, r.seed))
    return StudyReport(cfg, methods, runs)


def iters_at_threshold(run: RunRecord, threshold: float) -> int | None:
    """First iteration with loss below ``threshold`` and all constraints satisfied."""
    for k, (f, g) in enumerate(zip(run.loss, run.constraints)):
        if f < threshold and all(v <= 0 for v in g):
            return k
    return None


def converged_counts(study: "StudyReport", threshold: float) -> dict:
    return {m.value: sum(iters_at_threshold(r, threshold) is not None for r in study.runs if r.method == m.value)
            for m in study.methods}


def select_converged(study: StudyReport, k: int, method=Method.SSP1, seed: int = 0) -> dict:
    """Randomly pick ``k`` converged designs of ``method`` as ``{seed: rho}``."""
    pool = [r for r in study.runs if r.method == Method(method).value and r.converged]
    rng = np.random.default_rng(seed)
    idx = sorted(rng.choice(len(pool), size=min(k, len(pool)), replace=False))
    return {pool[i].seed: pool[i].final_rho for i in idx}


def write_run_csv(run: RunRecord, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "loss", "g0", "g1", "accepted", "sigma_mean"])
        for k, f in enumerate(run.loss):
            g = run.constraints[k] + [math.nan] * (2 - len(run.constraints[k]))
            w.writerow([k, repr(f), repr(g[0]), repr(g[1]), int(run.accepted[k]), repr(run.sigma_mean[k])])


def report(study: StudyReport, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(study.summary(), indent=2, sort_keys=True) + "\n")
    cum = study.cumulative()
    with open(out / "cumulative.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        keys = list(cum)
        w.writerow(keys)
        for row in zip(*(cum[k] for k in keys)):
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
    for r in study.runs:
        stem = f"run_{r.method}_{r.seed}"
        write_run_csv(r, out / f"{stem}.csv")
        if r.final_rho is not None:
            write_field(out / f"final_{r.method}_{r.seed}.raw", r.final_rho, study.config.grid)
            write_field(out / f"final_{r.method}_{r.seed}_projected.raw", r.final_rho_hat, study.config.grid)
            write_pgm(out / f"final_{r.method}_{r.seed}.pgm", r.final_rho_hat)
    return out


def gray_fraction(rho_hat: np.ndarray, lo: float = 0.01, hi: float = 0.99) -> float:
    r = np.asarray(rho_hat)
    return float(np.mean((r > lo) & (r < hi)))


def interface_pixel_count(rho_hat: np.ndarray) -> int:
    """Pixels whose thresholded phase differs from a periodic 4-neighbor."""
    b = np.asarray(rho_hat) >= 0.5
    edge = np.zeros_like(b)
    for ax in (0, 1):
        for sh in (1, -1):
            edge |= b != np.roll(b, sh, axis=ax)
    return int(edge.sum())
