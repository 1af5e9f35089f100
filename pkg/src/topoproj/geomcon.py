"""Minimum-lengthscale inequality constraints and a morphological feature-size ruler."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .calculus import JetField
from .grid import ConicKernel, GridSpec
from .projection import Pipeline, ProjectionConfig, forward

NO_FEATURES = math.inf


@dataclass(frozen=True)
class LengthscaleConfig:
    c: float
    eps: float = 1e-8
    eta_e: float = 0.75
    eta_d: float = 0.25

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("decay constant c must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not 0.0 < self.eta_d < 0.5 < self.eta_e < 1.0:
            raise ValueError("need 0 < eta_d < 0.5 < eta_e < 1")

    @classmethod
    def from_filter_radius(cls, r_tilde: float, c_factor: float = 64.0, **kw) -> "LengthscaleConfig":
        """``c = c_factor * r_tilde**2`` with ``r_tilde`` in physical length units."""
        return cls(c=c_factor * r_tilde**2, **kw)


def _constraint(pipe: Pipeline, lc: LengthscaleConfig, solid: bool) -> tuple[float, np.ndarray]:
    rt = pipe.rho_tilde
    gx, gy = pipe.jet.gx, pipe.jet.gy
    decay = np.exp(-lc.c * (gx * gx + gy * gy))
    phase = pipe.rho_hat if solid else 1.0 - pipe.rho_hat
    viol = np.minimum(rt - lc.eta_e, 0.0) if solid else np.minimum(lc.eta_d - rt, 0.0)
    n = rt.size
    raw = float(np.sum(phase * decay * viol**2) / n)
    assert raw >= 0.0
    sgn = 1.0 if solid else -1.0
    cot_hat = sgn * decay * viol**2 / n
    cot_val = sgn * 2.0 * phase * decay * viol / n
    dgrad = -2.0 * lc.c * phase * decay * viol**2 / n
    z = np.zeros_like(rt)
    cot_jet = JetField(cot_val, dgrad * gx, dgrad * gy, z, z, z)
    return raw - lc.eps, pipe.vjp(cot_hat, cot_jet)


def constraint_solid(rho, kernel: ConicKernel, grid: GridSpec, cfg: ProjectionConfig, lc: LengthscaleConfig,
                     pipe: Pipeline | None = None):
    """Solid-phase lengthscale constraint value (feasible if <= 0) and gradient."""
    pipe = pipe or forward(rho, kernel, grid, cfg)
    return _constraint(pipe, lc, solid=True)


def constraint_void(rho, kernel: ConicKernel, grid: GridSpec, cfg: ProjectionConfig, lc: LengthscaleConfig,
                    pipe: Pipeline | None = None):
    pipe = pipe or forward(rho, kernel, grid, cfg)
    return _constraint(pipe, lc, solid=False)


# ---------------------------------------------------------------------------
# ruler


def disc_offsets(diameter: int) -> np.ndarray:
    """Integer offsets of a pixel-center-rasterized disc; even diameters center on a pixel corner."""
    r = diameter / 2.0
    c = 0.0 if diameter % 2 else 0.5
    h = int(math.ceil(r)) + 1
    i = np.arange(-h, h + 1)
    yy, xx = np.meshgrid(i, i, indexing="ij")
    inside = (yy + c) ** 2 + (xx + c) ** 2 <= r * r + 1e-9
    return np.stack([yy[inside], xx[inside]], axis=1)


def _erode(mask: np.ndarray, offs: np.ndarray) -> np.ndarray:
    out = np.ones_like(mask)
    for dy, dx in offs:
        out &= np.roll(mask, (-dy, -dx), axis=(0, 1))
    return out


def _dilate(mask: np.ndarray, offs: np.ndarray) -> np.ndarray:
    out = np.zeros_like(mask)
    for dy, dx in offs:
        out |= np.roll(mask, (dy, dx), axis=(0, 1))
    return out


def opening(mask: np.ndarray, offs: np.ndarray) -> np.ndarray:
    """Periodic binary opening: union of all translates of the element that fit in ``mask``."""
    return _dilate(_erode(mask, offs), offs)


def _interior(mask: np.ndarray) -> np.ndarray:
    return _erode(mask, np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]]))


def ruler_min_lengthscale(binary: np.ndarray, phase: str = "solid", max_diameter: int | None = None) -> float:
    """Minimum feature diameter (pixels) of one phase of a periodic binary image.

    Sweeps disc diameters upward; a diameter whose opening removes a pixel
    is a violation, except for rim pixels next to a surviving pixel.  Because pixel-rasterized discs
    of odd and even diameter do not nest, a violation only counts when the
    next diameter also violates; the diameter before it is returned.
    ``inf`` means the phase is empty or no persistent violation exists up
    to ``max_diameter``.
    """
    img = np.asarray(binary, dtype=np.float64) >= 0.5
    if phase == "void":
        img = ~img
    elif phase != "solid":
        raise ValueError(f"phase must be 'solid' or 'void', got {phase!r}")
    if not img.any():
        return NO_FEATURES
    interior = _interior(img)
    dmax = max_diameter or min(img.shape)

    rim = img & ~interior
    cross = np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]])

    def violates(d):
        kept = opening(img, disc_offsets(d))
        # removed rim pixels touching a kept pixel are rasterization noise
        noise = rim & _dilate(kept, cross)
        return bool(np.any(img & ~kept & ~noise))

    prev = False
    for d in range(2, dmax + 2):
        cur = violates(d)
        if prev and cur:
            return float(d - 2)
        prev = cur
    return NO_FEATURES
