"""Analytic filtered fields with exact jets: the parabola and Cassini ovals.

Both families exhibit a topology change (two interfaces merging) as one
parameter crosses a critical value, which is where SSP1 and SSP2 differ.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .calculus import JetField
from .grid import Boundary, GridSpec
from .projection import Method, ProjectionConfig, project_jet


@dataclass(frozen=True)
class ParabolaSpec:
    alpha: float
    r_tilde: float = 6.0

    def __post_init__(self):
        if not self.r_tilde > 0:
            raise ValueError("r_tilde must be positive")


@dataclass(frozen=True)
class CassiniSpec:
    b: float
    a: float = 1.0
    eta: float = 0.5

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("focal half-distance a must be positive")

    @property
    def e(self) -> float:
        return abs(self.b / self.a)

    @classmethod
    def from_e(cls, e: float, a: float = 1.0, eta: float = 0.5) -> "CassiniSpec":
        return cls(b=e * a, a=a, eta=eta)


# ---------------------------------------------------------------------------
# parabola


def parabola_jet(spec: ParabolaSpec, x) -> JetField:
    x = np.asarray(x, dtype=np.float64)
    z = np.zeros_like(x)
    rt2 = spec.r_tilde**2
    return JetField(
        value=spec.alpha + 0.5 * x * x / rt2,
        gx=x / rt2,
        gy=z,
        hxx=np.full_like(x, 1.0 / rt2),
        hxy=z.copy(),
        hyy=z.copy(),
    )


def strip_grid(nx: int, dx: float) -> GridSpec:
    """Clamped ``nx x 3`` strip; x is centered on the middle column."""
    return GridSpec(nx=nx, ny=3, dx=dx, boundary=Boundary.CLAMPED)


def centered_coords(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    x = (np.arange(grid.nx) - 0.5 * (grid.nx - 1)) * grid.dx
    y = (np.arange(grid.ny) - 0.5 * (grid.ny - 1)) * grid.dx
    return np.meshgrid(x, y)


def parabola_field(spec: ParabolaSpec, grid: GridSpec) -> tuple[np.ndarray, JetField]:
    """``alpha + (x/R)^2 / 2`` sampled on a grid centered at x = 0, with its exact jet."""
    x, _ = centered_coords(grid)
    j = parabola_jet(spec, x)
    return j.value.copy(), j


def parabola_profile(spec: ParabolaSpec, r_hat: float, beta: float, x, eta: float = 0.5) -> dict:
    """Projections of the parabola at positions ``x``; ``x_hat = x / r_hat`` included."""
    j = parabola_jet(spec, x)
    out = {"x_hat": np.asarray(x) / r_hat, "rho_tilde": j.value}
    for m in Method:
        if m is Method.TANH and math.isinf(beta):
            out["tanh"] = np.where(j.value > eta, 1.0, np.where(j.value < eta, 0.0, 0.5))
            continue
        out[m.value] = project_jet(j, ProjectionConfig(beta=beta, eta=eta, r_hat=r_hat, method=m))
    return out


# ---------------------------------------------------------------------------
# Cassini ovals


def cassini_jet(spec: CassiniSpec, x, y) -> JetField:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    a2 = spec.a**2
    s = x * x + y * y + a2
    return JetField(
        value=s * s - 4.0 * a2 * x * x - spec.b**4 + spec.eta,
        gx=4.0 * x * s - 8.0 * a2 * x,
        gy=4.0 * y * s,
        hxx=4.0 * s + 8.0 * x * x - 8.0 * a2,
        hxy=8.0 * x * y,
        hyy=4.0 * s + 8.0 * y * y,
    )


def cassini_grid(n: int = 11, half_width: float = 2.5) -> GridSpec:
    """Clamped ``n x n`` grid whose pixel centers span ``[-half_width, half_width]^2``."""
    return GridSpec(nx=n, ny=n, dx=2.0 * half_width / (n - 1), boundary=Boundary.CLAMPED)


def cassini_field(spec: CassiniSpec, grid: GridSpec) -> tuple[np.ndarray, JetField]:
    x, y = centered_coords(grid)
    if x.max() < 2.5 - 1e-12 or y.max() < 2.5 - 1e-12:
        raise ValueError("Cassini grid must cover [-2.5, 2.5]^2")
    j = cassini_jet(spec, x, y)
    return j.value.copy(), j


# ---------------------------------------------------------------------------
# parameter sweeps


def _fd_columns(p: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central first and second differences on a possibly non-uniform parameter grid."""
    d1 = np.full_like(v, np.nan)
    d2 = np.full_like(v, np.nan)
    if len(p) >= 3:
        hl = p[1:-1] - p[:-2]
        hr = p[2:] - p[1:-1]
        d1[1:-1] = (v[2:] * hl**2 - v[:-2] * hr**2 + v[1:-1] * (hr**2 - hl**2)) / (hl * hr * (hl + hr))
        d2[1:-1] = 2.0 * (v[2:] * hl - v[1:-1] * (hl + hr) + v[:-2] * hr) / (hl * hr * (hl + hr))
    return d1, d2


def _sweep(param, jets, cfg: ProjectionConfig, name: str) -> dict:
    param = np.asarray(param, dtype=np.float64)
    r1 = np.array([float(project_jet(j, cfg.replace(method=Method.SSP1))) for j in jets])
    r2 = np.array([float(project_jet(j, cfg.replace(method=Method.SSP2))) for j in jets])
    d1, d2 = _fd_columns(param, r2)
    return {name: param, "ssp1": r1, "ssp2": r2, "ssp2_d1": d1, "ssp2_d2": d2}


def sweep_alpha(cfg: ProjectionConfig, alphas, r_tilde: float | None = None) -> dict:
    """SSP1/SSP2 at x = 0 of the parabola as a function of ``alpha``.

    ``r_tilde`` defaults to ``6 * cfg.r_hat``.
    """
    rt = 6.0 * cfg.r_hat if r_tilde is None else r_tilde
    jets = [parabola_jet(ParabolaSpec(a, rt), 0.0) for a in alphas]
    return _sweep(alphas, jets, cfg, "alpha")


def sweep_cassini(cfg: ProjectionConfig, e_values, a: float = 1.0) -> dict:
    """SSP1/SSP2 at the origin of the Cassini field as a function of ``e = |b/a|``."""
    jets = [cassini_jet(CassiniSpec.from_e(e, a, cfg.eta), 0.0, 0.0) for e in e_values]
    return _sweep(e_values, jets, cfg, "e")


def write_table(table: dict, path) -> None:
    keys = list(table)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for row in zip(*(np.asarray(table[k]) for k in keys)):
            w.writerow([repr(float(v)) for v in row])
