"""Tanh, first-order (SSP1) and second-order (SSP2) subpixel-smoothed projections.

All three share the per-pixel kernel :func:`project_pixels`, which returns
the projected density together with its partials with respect to the six
jet channels (value, gx, gy, hxx, hxy, hyy).  ``beta = inf`` is a legal
steepness and selects the Heaviside limit.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _jit
from .calculus import JetField, jet, jet_transpose
from .grid import ConicKernel, GridSpec, filter_field, filter_transpose

# |d_hat| assigned where the distance denominator vanishes; any value >= 1
# routes the pixel to the plain tanh / Heaviside branch.
SATURATED_D = 2.0


class Method(str, enum.Enum):
    TANH = "tanh"
    SSP1 = "ssp1"
    SSP2 = "ssp2"

    @property
    def code(self) -> int:
        return {"tanh": 0, "ssp1": 1, "ssp2": 2}[self.value]


@dataclass(frozen=True)
class ProjectionConfig:
    beta: float = math.inf
    eta: float = 0.5
    r_hat: float = 0.5
    method: Method = Method.SSP2

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "beta", float(self.beta))
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        if not (self.r_hat > 0 and math.isfinite(self.r_hat)):
            raise ValueError(f"r_hat must be positive, got {self.r_hat}")

    @classmethod
    def for_grid(cls, grid: GridSpec, method="ssp2", beta=math.inf, eta=0.5, r_hat_px=0.5):
        return cls(beta=beta, eta=eta, r_hat=r_hat_px * grid.dx, method=Method(method))

    def check_grid(self, grid: GridSpec) -> None:
        if self.r_hat > grid.dx * (1 + 1e-12):
            raise ValueError(f"r_hat={self.r_hat} exceeds the pixel size dx={grid.dx}")

    def replace(self, **kw) -> "ProjectionConfig":
        d = dict(beta=self.beta, eta=self.eta, r_hat=self.r_hat, method=self.method)
        d.update(kw)
        return ProjectionConfig(**d)


# ---------------------------------------------------------------------------
# scalar building blocks


def smooth_step(s):
    """Quintic fill-factor step: 1 for s <= -1, 0 for s >= 1, C2 at the seams."""
    s = np.asarray(s, dtype=np.float64)
    poly = 0.5 - (15.0 / 16.0) * s + (5.0 / 8.0) * s**3 - (3.0 / 16.0) * s**5
    out = np.where(s <= -1.0, 1.0, np.where(s >= 1.0, 0.0, poly))
    return out[()] if out.ndim == 0 else out


def smooth_step_d1(s):
    s = np.asarray(s, dtype=np.float64)
    out = np.where(np.abs(s) < 1.0, -(15.0 / 16.0) * (1.0 - s * s) ** 2, 0.0)
    return out[()] if out.ndim == 0 else out


def smooth_step_d2(s):
    s = np.asarray(s, dtype=np.float64)
    out = np.where(np.abs(s) < 1.0, (15.0 / 4.0) * s * (1.0 - s * s), 0.0)
    return out[()] if out.ndim == 0 else out


def tanh_project(rho_tilde, beta: float, eta: float):
    """Tanh threshold projection; raises for infinite ``beta`` (use :func:`heaviside`)."""
    if math.isinf(beta):
        raise ValueError("tanh projection at beta=inf is the Heaviside limit; use heaviside()")
    x = np.asarray(rho_tilde, dtype=np.float64)
    num = math.tanh(beta * eta) + np.tanh(beta * (x - eta))
    out = num / (math.tanh(beta * eta) + math.tanh(beta * (1.0 - eta)))
    return out[()] if out.ndim == 0 else out


def heaviside(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x > 0, 1.0, np.where(x < 0, 0.0, 0.5))
    return out[()] if out.ndim == 0 else out


def _tanh_pair_np(x, beta, eta):
    """Tanh projection and its derivative, with the beta=inf limit folded in."""
    if math.isinf(beta):
        return heaviside(x - eta), np.zeros_like(x)
    den = math.tanh(beta * eta) + math.tanh(beta * (1.0 - eta))
    t = np.tanh(beta * (x - eta))
    return (math.tanh(beta * eta) + t) / den, beta * (1.0 - t * t) / den


# ---------------------------------------------------------------------------
# per-pixel kernels


def _project_pixels_np(value, gx, gy, hxx, hxy, hyy, beta, eta, r_hat, method):
    zeros = np.zeros_like(value)
    t0, dt0 = _tanh_pair_np(value, beta, eta)
    if method == 0:
        out = t0
        d_val = dt0
        d_d = zeros
    else:
        q = gx * gx + gy * gy
        if method == 2:
            q = q + r_hat * r_hat * (hxx * hxx + 2.0 * hxy * hxy + hyy * hyy)
        dn = np.sqrt(q)
        num = eta - value
        pos = dn > 0
        safe = np.where(pos, dn, 1.0)
        dh = np.where(pos, num / (r_hat * safe), np.where(num == 0, 0.0, np.copysign(SATURATED_D, num)))
        band = np.abs(dh) < 1.0
        ddh_dval = np.where(pos, -1.0 / (r_hat * safe), 0.0)
        ddh_dd = np.where(pos, -dh / safe, 0.0)
        fm = smooth_step(dh)
        dfm = smooth_step_d1(dh)
        if math.isinf(beta):
            out = fm
            d_val = dfm * ddh_dval
            d_d = dfm * ddh_dd
        else:
            fp = smooth_step(-dh)
            dfp = smooth_step_d1(-dh)
            rp = value + r_hat * fp * dn
            rm = value - r_hat * fm * dn
            tp, dtp = _tanh_pair_np(rp, beta, eta)
            tm, dtm = _tanh_pair_np(rm, beta, eta)
            blend = (1.0 - fm) * tm + fm * tp
            drp_dval = 1.0 + dfp
            drm_dval = 1.0 + dfm
            drp_dd = r_hat * (fp + dh * dfp)
            drm_dd = -r_hat * (fm - dh * dfm)
            bl_val = dfm * ddh_dval * (tp - tm) + (1.0 - fm) * dtm * drm_dval + fm * dtp * drp_dval
            bl_d = dfm * ddh_dd * (tp - tm) + (1.0 - fm) * dtm * drm_dd + fm * dtp * drp_dd
            out = np.where(band, blend, t0)
            d_val = np.where(band, np.where(pos, bl_val, 0.0), dt0)
            d_d = np.where(band & pos, bl_d, 0.0)
    clipped = (out < 0.0) | (out > 1.0)
    out = np.clip(out, 0.0, 1.0)
    d_val = np.where(clipped, 0.0, d_val)
    d_d = np.where(clipped, 0.0, d_d)
    if method == 0:
        return out, (d_val, zeros, zeros, zeros, zeros, zeros)
    inv = np.where(dn > 0, d_d / np.where(dn > 0, dn, 1.0), 0.0)
    parts = [d_val, inv * gx, inv * gy]
    if method == 2:
        r2 = r_hat * r_hat
        parts += [inv * r2 * hxx, inv * 2.0 * r2 * hxy, inv * r2 * hyy]
    else:
        parts += [zeros, zeros, zeros]
    return out, tuple(parts)


@_jit.njit
def _F(s):
    if s <= -1.0:
        return 1.0
    if s >= 1.0:
        return 0.0
    return 0.5 - (15.0 / 16.0) * s + (5.0 / 8.0) * s**3 - (3.0 / 16.0) * s**5


@_jit.njit
def _dF(s):
    if abs(s) < 1.0:
        return -(15.0 / 16.0) * (1.0 - s * s) ** 2
    return 0.0


@_jit.njit
def _tanh_pair(x, beta, eta):
    if np.isinf(beta):
        if x > eta:
            return 1.0, 0.0
        if x < eta:
            return 0.0, 0.0
        return 0.5, 0.0
    den = np.tanh(beta * eta) + np.tanh(beta * (1.0 - eta))
    t = np.tanh(beta * (x - eta))
    return (np.tanh(beta * eta) + t) / den, beta * (1.0 - t * t) / den


@_jit.njit
def _project_pixels_nb(value, gx, gy, hxx, hxy, hyy, beta, eta, r_hat, method):
    n = value.size
    out = np.empty(n)
    parts = np.zeros((6, n))
    inf_beta = np.isinf(beta)
    r2 = r_hat * r_hat
    for k in range(n):
        v = value[k]
        t0, dt0 = _tanh_pair(v, beta, eta)
        if method == 0:
            o = t0
            dv = dt0
            dd = 0.0
            dn = 0.0
        else:
            q = gx[k] * gx[k] + gy[k] * gy[k]
            if method == 2:
                q += r2 * (hxx[k] * hxx[k] + 2.0 * hxy[k] * hxy[k] + hyy[k] * hyy[k])
            dn = np.sqrt(q)
            num = eta - v
            if dn > 0:
                dh = num / (r_hat * dn)
                ddh_dval = -1.0 / (r_hat * dn)
                ddh_dd = -dh / dn
            else:
                dh = 0.0 if num == 0 else (SATURATED_D if num > 0 else -SATURATED_D)
                ddh_dval = 0.0
                ddh_dd = 0.0
            fm = _F(dh)
            dfm = _dF(dh)
            if inf_beta:
                o = fm
                dv = dfm * ddh_dval
                dd = dfm * ddh_dd
            elif abs(dh) < 1.0:
                fp = _F(-dh)
                dfp = _dF(-dh)
                tp, dtp = _tanh_pair(v + r_hat * fp * dn, beta, eta)
                tm, dtm = _tanh_pair(v - r_hat * fm * dn, beta, eta)
                o = (1.0 - fm) * tm + fm * tp
                if dn > 0:
                    dv = dfm * ddh_dval * (tp - tm) + (1.0 - fm) * dtm * (1.0 + dfm) + fm * dtp * (1.0 + dfp)
                    dd = (dfm * ddh_dd * (tp - tm) - (1.0 - fm) * dtm * r_hat * (fm - dh * dfm)
                          + fm * dtp * r_hat * (fp + dh * dfp))
                else:
                    dv = 0.0
                    dd = 0.0
            else:
                o = t0
                dv = dt0
                dd = 0.0
        if o < 0.0 or o > 1.0:
            o = min(max(o, 0.0), 1.0)
            dv = 0.0
            dd = 0.0
        out[k] = o
        parts[0, k] = dv
        if method != 0 and dn > 0:
            inv = dd / dn
            parts[1, k] = inv * gx[k]
            parts[2, k] = inv * gy[k]
            if method == 2:
                parts[3, k] = inv * r2 * hxx[k]
                parts[4, k] = inv * 2.0 * r2 * hxy[k]
                parts[5, k] = inv * r2 * hyy[k]
    return out, parts


def project_pixels(j: JetField, cfg: ProjectionConfig, use_numba: bool | None = None):
    """Projected density and its partials w.r.t. the jet channels.

    Returns ``(rho_hat, partials)`` where ``partials`` is a :class:`JetField`
    of per-pixel derivatives.
    """
    use_numba = _jit.USE_NUMBA if use_numba is None else use_numba
    shape = np.shape(j.value)
    chans = [np.ascontiguousarray(np.broadcast_to(c, shape), dtype=np.float64).ravel() for c in j.channels()]
    args = (cfg.beta, cfg.eta, cfg.r_hat, cfg.method.code)
    if use_numba and _jit.HAS_NUMBA:
        out, parts = _project_pixels_nb(*chans, *args)
        parts = list(parts)
    else:
        out, parts = _project_pixels_np(*chans, *args)
    return out.reshape(shape), JetField(*(np.asarray(p).reshape(shape) for p in parts))


# ---------------------------------------------------------------------------
# distances and probes


def _distance(j: JetField, cfg: ProjectionConfig, second: bool) -> np.ndarray:
    q = j.grad_norm2()
    if second:
        q = q + cfg.r_hat**2 * j.hess_frob2()
    dn = np.sqrt(q)
    num = cfg.eta - np.asarray(j.value, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = num / dn
    d = np.where(dn > 0, d, np.where(num == 0, 0.0, np.copysign(np.inf, num)))
    return d / cfg.r_hat


def distance_first(j: JetField, cfg: ProjectionConfig) -> np.ndarray:
    """Normalized first-order signed distance ``d1 / r_hat`` (positive in void)."""
    return _distance(j, cfg, second=False)


def distance_second(j: JetField, cfg: ProjectionConfig) -> np.ndarray:
    """Normalized Hessian-regularized signed distance ``d2 / r_hat``."""
    return _distance(j, cfg, second=True)


def rho_plus_minus(j: JetField, d_hat, cfg: ProjectionConfig):
    """Filtered values at the two probe points straddling the interface."""
    d_hat = np.asarray(d_hat, dtype=np.float64)
    if np.any(np.abs(d_hat) >= 1.0):
        raise ValueError("probe points are only defined on the smoothing band |d_hat| < 1")
    q = j.grad_norm2()
    if cfg.method is Method.SSP2:
        q = q + cfg.r_hat**2 * j.hess_frob2()
    elif cfg.method is not Method.SSP1:
        raise ValueError("probe points exist only for the SSP methods")
    dn = np.sqrt(q)
    plus = j.value + cfg.r_hat * smooth_step(-d_hat) * dn
    minus = j.value - cfg.r_hat * smooth_step(d_hat) * dn
    return plus, minus


# ---------------------------------------------------------------------------
# field-level API


def project_jet(j: JetField, cfg: ProjectionConfig) -> np.ndarray:
    return project_pixels(j, cfg)[0]


def project(rho_tilde: np.ndarray, grid: GridSpec, cfg: ProjectionConfig) -> np.ndarray:
    """Project a filtered field; SSP methods differentiate it internally."""
    cfg.check_grid(grid)
    rho_tilde = grid.check(rho_tilde)
    if cfg.method is Method.TANH:
        z = np.zeros_like(rho_tilde)
        return project_pixels(JetField(rho_tilde, z, z, z, z, z), cfg)[0]
    return project_pixels(jet(rho_tilde, grid), cfg)[0]


@dataclass
class Pipeline:
    """Forward pass ``rho -> rho_tilde -> jet -> rho_hat`` with what the backward pass needs."""

    grid: GridSpec
    kernel: ConicKernel
    cfg: ProjectionConfig
    rho: np.ndarray
    rho_tilde: np.ndarray
    jet: JetField
    rho_hat: np.ndarray
    partials: JetField

    def vjp(self, cot_rho_hat, cot_jet: JetField | None = None) -> np.ndarray:
        """Gradient w.r.t. ``rho`` given cotangents on ``rho_hat`` and optionally on the jet."""
        g = self.grid.check(cot_rho_hat)
        cot = JetField(*(g * p for p in self.partials.channels()))
        if cot_jet is not None:
            cot = JetField(*(a + b for a, b in zip(cot.channels(), cot_jet.channels())))
        return filter_transpose(jet_transpose(cot, self.grid), self.kernel, self.grid)


def forward(rho: np.ndarray, kernel: ConicKernel, grid: GridSpec, cfg: ProjectionConfig) -> Pipeline:
    cfg.check_grid(grid)
    rho = grid.check(rho)
    rt = filter_field(rho, kernel, grid)
    j = jet(rt, grid)
    rho_hat, parts = project_pixels(j, cfg)
    return Pipeline(grid, kernel, cfg, rho, rt, j, rho_hat, parts)


def project_vjp(rho, kernel: ConicKernel, grid: GridSpec, cfg: ProjectionConfig, cotangent) -> np.ndarray:
    """``dL/drho`` for a cotangent ``dL/drho_hat`` through filter, jet and projection."""
    return forward(rho, kernel, grid, cfg).vjp(cotangent)
