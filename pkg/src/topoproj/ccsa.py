"""Quadratic-model CCSA (conservative convex separable approximation).

Each outer iteration minimizes separable quadratic models

    g~_i(x) = g_i(x_k) + grad g_i . (x - x_k) + 1/2 sum_j rho_i (x_j - x_kj)^2 / sigma_j^2

inside the trust box ``|x_j - x_kj| <= sigma_j`` intersected with the bounds.
The subproblem is solved through its concave dual in the constraint
multipliers; elastic slack variables keep it feasible when the current
point violates constraints.  Inner iterations raise ``rho_i`` until every
model is conservative at the candidate.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

log = logging.getLogger(__name__)

FuncGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


class OptimizerError(RuntimeError):
    pass


@dataclass
class OptProblem:
    n_vars: int
    objective: FuncGrad
    constraints: Sequence[FuncGrad] = ()
    lower: np.ndarray | float = 0.0
    upper: np.ndarray | float = 1.0

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.broadcast_to(np.asarray(self.lower, dtype=np.float64), (self.n_vars,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=np.float64), (self.n_vars,)).copy()
        if np.any(lo >= hi):
            raise ValueError("every lower bound must be below its upper bound")
        return lo, hi


@dataclass
class CcsaOptions:
    max_outer: int = 150
    ftol_rel: float = 0.0
    f_target: float = -math.inf
    sigma_init: float = 0.25
    sigma_grow: float = 1.2
    sigma_shrink: float = 0.7
    rho_init: float = 1e-5
    rho_min: float = 1e-5
    rho_decay: float = 0.5
    max_inner: int = 30
    elastic_c: float = 1e3

    def metadata(self) -> dict:
        return asdict(self)


@dataclass
class CcsaState:
    x: np.ndarray
    sigma: np.ndarray
    rho_pen: np.ndarray
    iter: int = 0


@dataclass
class OptHistory:
    loss: list[float] = field(default_factory=list)
    constraints: list[list[float]] = field(default_factory=list)
    accepted: list[bool] = field(default_factory=list)
    sigma_mean: list[float] = field(default_factory=list)
    n_evals: int = 0
    converged: bool = False
    reason: str = ""
    options: dict = field(default_factory=dict)

    def rows(self):
        for k, (f, g, a, s) in enumerate(zip(self.loss, self.constraints, self.accepted, self.sigma_mean)):
            yield k, f, g, a, s


def _feasible(gvals) -> bool:
    return all(g <= 0.0 for g in gvals)


def _infeasibility(gvals) -> float:
    return max([0.0] + [float(g) for g in gvals])


class _Subproblem:
    """Separable quadratic models around ``x0`` and their dual."""

    def __init__(self, x0, f0, df, g0, dg, sigma, rho, lo, hi, elastic_c):
        self.x0 = x0
        self.f0 = f0
        self.df = df
        self.g0 = np.asarray(g0, dtype=np.float64)
        self.dg = dg  # (m, n)
        self.inv_s2 = 1.0 / sigma**2
        self.rho = rho  # (m + 1,)
        self.lo = np.maximum(lo, x0 - sigma)
        self.hi = np.minimum(hi, x0 + sigma)
        self.c = elastic_c

    def primal(self, lam):
        a = (self.rho[0] + self.rho[1:] @ lam) * self.inv_s2
        b = self.df + lam @ self.dg
        return np.clip(self.x0 - b / a, self.lo, self.hi)

    def models(self, x):
        dx = x - self.x0
        w = 0.5 * np.sum(dx * dx * self.inv_s2)
        fm = self.f0 + self.df @ dx + self.rho[0] * w
        gm = self.g0 + self.dg @ dx + self.rho[1:] * w
        return fm, gm, w

    def _neg_dual(self, lam):
        x = self.primal(lam)
        fm, gm, _ = self.models(x)
        y = np.maximum(0.0, lam - self.c)
        val = fm + lam @ gm + np.sum(self.c * y + 0.5 * y * y - lam * y)
        return -val, -(gm - y)

    def solve(self, lam0):
        m = len(self.g0)
        if m == 0:
            return self.primal(np.zeros(0)), np.zeros(0)
        res = optimize.minimize(
            self._neg_dual,
            lam0,
            jac=True,
            method="L-BFGS-B",
            bounds=[(0.0, None)] * m,
            options={"ftol": 1e-15, "gtol": 1e-13, "maxiter": 500},
        )
        lam = np.maximum(res.x, 0.0)
        return self.primal(lam), lam


def minimize(
    problem: OptProblem,
    x0,
    options: CcsaOptions | None = None,
    callback: Callable[[int, np.ndarray, float, list], None] | None = None,
) -> tuple[np.ndarray, OptHistory]:
    """Minimize ``problem`` from ``x0``; returns the best point found and the history."""
    opt = options or CcsaOptions()
    lo, hi = problem.bounds()
    x = np.asarray(x0, dtype=np.float64).ravel().copy()
    if x.size != problem.n_vars:
        raise ValueError(f"x0 has {x.size} entries, expected {problem.n_vars}")
    x = np.clip(x, lo, hi)
    m = len(problem.constraints)
    hist = OptHistory(options=opt.metadata())

    def evaluate(xe):
        f, df = problem.objective(xe)
        gs, dgs = [], []
        for con in problem.constraints:
            g, dg = con(xe)
            gs.append(float(g))
            dgs.append(np.asarray(dg, dtype=np.float64).ravel())
        hist.n_evals += 1
        df = np.asarray(df, dtype=np.float64).ravel()
        if not (math.isfinite(f) and np.all(np.isfinite(df)) and np.all(np.isfinite(gs))
                and all(np.all(np.isfinite(d)) for d in dgs)):
            raise OptimizerError(f"non-finite objective or gradient at evaluation {hist.n_evals}")
        dg = np.array(dgs).reshape(m, x.size)
        return float(f), df, np.array(gs), dg

    f, df, g, dg = evaluate(x)
    rng = hi - lo
    state = CcsaState(
        x=x,
        sigma=opt.sigma_init * rng,
        rho_pen=np.array([opt.rho_init * max(1.0, abs(f))] + [opt.rho_init * max(1.0, abs(v)) for v in g]),
    )
    rho_floor = np.full(m + 1, opt.rho_min)
    best = (x.copy(), f, g.copy())
    x_prev = None
    lam = np.zeros(m)

    def better(fc, gc):
        _, fb, gb = best
        if _feasible(gc):
            return not _feasible(gb) or fc < fb
        return not _feasible(gb) and _infeasibility(gc) < _infeasibility(gb)

    def record(accepted):
        hist.loss.append(f)
        hist.constraints.append([float(v) for v in g])
        hist.accepted.append(accepted)
        hist.sigma_mean.append(float(np.mean(state.sigma)))

    record(True)
    if _feasible(g) and f < opt.f_target:
        hist.converged, hist.reason = True, "f_target"
        return best[0], hist

    while state.iter < opt.max_outer:
        state.iter += 1
        accepted = False
        for _ in range(opt.max_inner):
            sub = _Subproblem(state.x, f, df, g, dg, state.sigma, state.rho_pen, lo, hi, opt.elastic_c)
            xc, lam = sub.solve(lam)
            fm, gm, w = sub.models(xc)
            fc, dfc, gc, dgc = evaluate(xc)
            if better(fc, gc):
                best = (xc.copy(), fc, gc.copy())
            true = np.concatenate([[fc], gc])
            model = np.concatenate([[fm], gm])
            slack = 1e-14 * np.maximum(1.0, np.abs(true))
            if np.all(true <= model + slack) or w == 0.0:
                accepted = True
                break
            for i in np.nonzero(true > model + slack)[0]:
                bump = 1.1 * (state.rho_pen[i] + (true[i] - model[i]) / w)
                state.rho_pen[i] = min(10.0 * state.rho_pen[i], max(2.0 * state.rho_pen[i], bump))
        if accepted:
            step = xc - state.x
            if x_prev is not None:
                trend = step * (state.x - x_prev)
                gamma = np.where(trend > 0, opt.sigma_grow, np.where(trend < 0, opt.sigma_shrink, 1.0))
                state.sigma = np.clip(state.sigma * gamma, 1e-8 * rng, 10.0 * rng)
            x_prev = state.x
            f_old = f
            state.x, f, df, g, dg = xc, fc, dfc, gc, dgc
        state.rho_pen = np.maximum(state.rho_pen * opt.rho_decay, rho_floor)
        record(accepted)
        if callback is not None:
            callback(state.iter, state.x, f, list(g))
        if _feasible(g) and f < opt.f_target:
            hist.converged, hist.reason = True, "f_target"
            break
        if accepted and opt.ftol_rel > 0 and abs(f - f_old) <= opt.ftol_rel * abs(f_old):
            hist.reason = "ftol_rel"
            break
    else:
        hist.reason = "max_outer"
    return best[0], hist
