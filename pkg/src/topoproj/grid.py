"""Uniform 2D grids and the conic density filter.

Fields are plain ``numpy`` arrays of shape ``(ny, nx)`` (y outer, x inner);
the accompanying :class:`GridSpec` carries pixel size and boundary handling.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _jit


class Boundary(str, enum.Enum):
    PERIODIC = "periodic"
    CLAMPED = "clamped"


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    dx: float = 1.0
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3x3 pixels, got {self.nx}x{self.ny}")
        if not (self.dx > 0 and math.isfinite(self.dx)):
            raise ValueError(f"dx must be positive and finite, got {self.dx}")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel-center coordinates ``(X, Y)`` with the origin at the first pixel center."""
        x = np.arange(self.nx) * self.dx
        y = np.arange(self.ny) * self.dx
        return np.meshgrid(x, y)

    def check(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.shape:
            raise ValueError(f"field shape {values.shape} does not match grid {self.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        return values


@dataclass(frozen=True)
class ConicKernel:
    radius_px: float
    weights: np.ndarray  # (2h+1, 2h+1), centered

    @property
    def half_width(self) -> int:
        return self.weights.shape[0] // 2


def make_conic_kernel(radius_px: float) -> ConicKernel:
    """Conic filter taps ``max(0, 1 - r/R)`` at integer offsets, normalized to unit sum."""
    if not radius_px >= 1.0:
        raise ValueError(f"conic filter radius must be >= 1 pixel, got {radius_px}")
    h = int(math.floor(radius_px))
    i = np.arange(-h, h + 1, dtype=np.float64)
    r = np.hypot(i[:, None], i[None, :])
    w = np.maximum(0.0, 1.0 - r / radius_px)
    w /= w.sum()
    return ConicKernel(float(radius_px), w)


# ---------------------------------------------------------------------------
# correlation kernels: out[p] = sum_o w[o] * f[p + o], plus the in-domain weight
# sum (all ones when periodic).


@_jit.njit
def _correlate_padded_nb(fp, mp, w, ny, nx):
    h = w.shape[0] // 2
    out = np.zeros((ny, nx))
    norm = np.zeros((ny, nx))
    for oy in range(2 * h + 1):
        for ox in range(2 * h + 1):
            wk = w[oy, ox]
            if wk == 0.0:
                continue
            for iy in range(ny):
                for ix in range(nx):
                    out[iy, ix] += wk * fp[iy + oy, ix + ox]
                    norm[iy, ix] += wk * mp[iy + oy, ix + ox]
    return out, norm


def _pad(f, h, periodic):
    if periodic:
        fp = np.pad(f, h, mode="wrap")
        return fp, np.ones_like(fp)
    return np.pad(f, h), np.pad(np.ones_like(f), h)


def _correlate_nb(f, w, periodic):
    fp, mp = _pad(np.asarray(f, dtype=np.float64), w.shape[0] // 2, periodic)
    return _correlate_padded_nb(fp, mp, w, f.shape[0], f.shape[1])


def _correlate_np(f, w, periodic):
    ny, nx = f.shape
    h = w.shape[0] // 2
    fp, mp = _pad(f, h, periodic)
    out = np.zeros((ny, nx))
    norm = np.zeros((ny, nx))
    for oy in range(-h, h + 1):
        for ox in range(-h, h + 1):
            wk = w[oy + h, ox + h]
            if wk == 0.0:
                continue
            sl = (slice(h + oy, h + oy + ny), slice(h + ox, h + ox + nx))
            out += wk * fp[sl]
            norm += wk * mp[sl]
    return out, norm


def _correlate(f, w, periodic):
    if _jit.USE_NUMBA:
        return _correlate_nb(f, w, periodic)
    return _correlate_np(f, w, periodic)


def filter_field(rho: np.ndarray, kernel: ConicKernel, grid: GridSpec) -> np.ndarray:
    """Filtered density ``kernel * rho``.

    Clamped grids renormalize by the in-domain tap weight so constants pass
    through unchanged.
    """
    rho = grid.check(rho)
    out, norm = _correlate(rho, kernel.weights, grid.periodic)
    if grid.periodic:
        return out
    return out / norm


def filter_transpose(cotangent: np.ndarray, kernel: ConicKernel, grid: GridSpec) -> np.ndarray:
    """Exact transpose of :func:`filter_field`."""
    y = grid.check(cotangent)
    if grid.periodic:
        out, _ = _correlate(y, kernel.weights, True)
        return out
    _, norm = _correlate(np.zeros_like(y), kernel.weights, False)
    out, _ = _correlate(y / norm, kernel.weights, False)
    return out


def filter_matrix(kernel: ConicKernel, grid: GridSpec) -> np.ndarray:
    """Dense ``(N, N)`` matrix of the filter; for tests and small grids only."""
    n = grid.size
    mat = np.empty((n, n))
    e = np.zeros(n)
    for k in range(n):
        e[k] = 1.0
        mat[:, k] = filter_field(e.reshape(grid.shape), kernel, grid).ravel()
        e[k] = 0.0
    return mat
