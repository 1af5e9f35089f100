"""Per-pixel value, gradient and Hessian of a gridded field.

Derivatives are the node values of the cubic-consistent interpolant's
derivatives, realized as fixed finite-difference stencils: 5-point
4th-order centered stencils in the interior, one-sided 3rd-order stencils
near clamped edges, and the tensor product of first-derivative stencils for
the mixed term.  Forward application uses the difference form
``sum_k w_k (f[i+k] - f[i])`` so constant fields give exactly zero
derivatives.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .grid import GridSpec

CHANNELS = ("value", "gx", "gy", "hxx", "hxy", "hyy")


@dataclass
class JetField:
    """Value, gradient (1/length) and symmetric Hessian (1/length^2) per pixel.

    Also used to hold cotangents with respect to each channel.
    """

    value: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    hxx: np.ndarray
    hxy: np.ndarray
    hyy: np.ndarray

    def channels(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))

    @classmethod
    def zeros(cls, shape) -> "JetField":
        return cls(*(np.zeros(shape) for _ in CHANNELS))

    def grad_norm2(self) -> np.ndarray:
        return self.gx**2 + self.gy**2

    def hess_frob2(self) -> np.ndarray:
        return self.hxx**2 + 2.0 * self.hxy**2 + self.hyy**2


def _lagrange_weights(nodes: tuple[int, ...], x0: int, order: int) -> list[Fraction]:
    """Exact weights of the ``order``-th derivative at ``x0`` of the interpolant through ``nodes``."""
    weights = []
    for k, xk in enumerate(nodes):
        # basis polynomial coefficients, lowest degree first
        coef = [Fraction(1)]
        denom = Fraction(1)
        for j, xj in enumerate(nodes):
            if j == k:
                continue
            coef = [Fraction(0)] + coef
            for d in range(len(coef) - 1):
                coef[d] -= xj * coef[d + 1]
            denom *= xk - xj
        for _ in range(order):
            coef = [d * c for d, c in enumerate(coef)][1:]
        value = sum((c * Fraction(x0) ** d for d, c in enumerate(coef)), Fraction(0))
        weights.append(value / denom)
    return weights


@lru_cache(maxsize=64)
def _stencil(n: int, order: int, periodic: bool) -> tuple[np.ndarray, np.ndarray]:
    """Neighbor indices and unit-spacing weights, each shaped ``(n, width)``."""
    if periodic:
        offs = (-2, -1, 0, 1, 2)
        w = np.array([float(v) for v in _lagrange_weights(offs, 0, order)])
        idx = (np.arange(n)[:, None] + np.array(offs)[None, :]) % n
        return idx, np.broadcast_to(w, (n, len(offs))).copy()
    edge = 4 if order == 1 else 5
    idx = np.zeros((n, 5), dtype=np.int64)
    wts = np.zeros((n, 5))
    for i in range(n):
        if n < 5:
            nodes = tuple(range(n))
        elif i < 2:
            nodes = tuple(range(edge))
        elif i > n - 3:
            nodes = tuple(range(n - edge, n))
        else:
            nodes = tuple(range(i - 2, i + 3))
        w = _lagrange_weights(tuple(x - i for x in nodes), 0, order)
        idx[i, : len(nodes)] = nodes
        idx[i, len(nodes):] = i
        wts[i, : len(nodes)] = [float(v) for v in w]
    return idx, wts


@lru_cache(maxsize=64)
def _dense(n: int, order: int, periodic: bool) -> np.ndarray:
    idx, wts = _stencil(n, order, periodic)
    mat = np.zeros((n, n))
    for i in range(n):
        for j, w in zip(idx[i], wts[i]):
            mat[i, j] += w
            mat[i, i] -= w
    return mat


def _apply_x(f: np.ndarray, order: int, grid: GridSpec) -> np.ndarray:
    idx, wts = _stencil(grid.nx, order, grid.periodic)
    diff = f[:, idx] - f[:, :, None]
    return np.einsum("yis,is->yi", diff, wts) / grid.dx**order


def _apply_y(f: np.ndarray, order: int, grid: GridSpec) -> np.ndarray:
    idx, wts = _stencil(grid.ny, order, grid.periodic)
    diff = f[idx, :] - f[:, None, :]
    return np.einsum("isx,is->ix", diff, wts) / grid.dx**order


def derivative_matrices(grid: GridSpec) -> dict[str, np.ndarray]:
    """Dense 1D operators (physical units) along each axis; used by tests."""
    return {
        "d1x": _dense(grid.nx, 1, grid.periodic) / grid.dx,
        "d2x": _dense(grid.nx, 2, grid.periodic) / grid.dx**2,
        "d1y": _dense(grid.ny, 1, grid.periodic) / grid.dx,
        "d2y": _dense(grid.ny, 2, grid.periodic) / grid.dx**2,
    }


def jet(rho_tilde: np.ndarray, grid: GridSpec) -> JetField:
    f = grid.check(rho_tilde)
    gx = _apply_x(f, 1, grid)
    return JetField(
        value=f.copy(),
        gx=gx,
        gy=_apply_y(f, 1, grid),
        hxx=_apply_x(f, 2, grid),
        hxy=_apply_y(gx, 1, grid),
        hyy=_apply_y(f, 2, grid),
    )


def mixed_yx(rho_tilde: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Mixed derivative with the stencils applied y first, then x."""
    f = grid.check(rho_tilde)
    return _apply_x(_apply_y(f, 1, grid), 1, grid)


def jet_transpose(cot: JetField, grid: GridSpec) -> np.ndarray:
    """Pull per-channel cotangents back to a cotangent on the field itself."""
    m = derivative_matrices(grid)
    out = grid.check(cot.value).copy()
    out += cot.gx @ m["d1x"]
    out += m["d1y"].T @ cot.gy
    out += cot.hxx @ m["d2x"]
    out += m["d2y"].T @ cot.hyy
    out += m["d1y"].T @ cot.hxy @ m["d1x"]
    return out
