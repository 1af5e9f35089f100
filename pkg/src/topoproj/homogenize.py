"""Periodic finite-volume conduction cell problems and the effective conductivity tensor.

Pixels are finite volumes on a periodic lattice.  Face conductivities are
harmonic means of the two adjacent pixels.  All solves are done in lattice
units (dx = 1); the effective tensor is independent of the cell size.

For an imposed unit average gradient ``e`` the total temperature is
``-e.x + T`` with ``T`` periodic.  Writing ``g_f(e) = (e.n_f) - (T_q - T_p)``
for the drop across face ``f`` (from pixel p to its +x or +y neighbor q),
the effective tensor is the energy form

    K_ij = (1/N) sum_f k_f g_f(e_i) g_f(e_j),

which is symmetric by construction, and whose derivative with respect to a
face conductivity is ``g_f(e_i) g_f(e_j) / N`` because each cell solution is
stationary for its own energy.  The adjoint solves are therefore the
forward solves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import ConicKernel, GridSpec
from .projection import ProjectionConfig, forward

KAPPA_FLOOR = 1e-4
LOSS_WEIGHTS = (1.0, 2.0, 1.0)  # xx, xy, yy


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class MaterialPair:
    kappa1: float = KAPPA_FLOOR
    kappa2: float = 1.0
    kappa0: float = 1.0

    def __post_init__(self):
        if not self.kappa2 > 0:
            raise ValueError("kappa2 must be positive")
        if not self.kappa1 > 0:
            raise ValueError("kappa1 must be positive; use a small floor for the porous phase")

    @classmethod
    def porous(cls, floor: float = KAPPA_FLOOR) -> "MaterialPair":
        return cls(kappa1=floor, kappa2=1.0)

    @classmethod
    def composite(cls) -> "MaterialPair":
        return cls(kappa1=0.1, kappa2=1.0)


@dataclass(frozen=True)
class Tensor2:
    xx: float
    xy: float
    yy: float

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.xx, self.xy], [self.xy, self.yy]])

    def components(self) -> np.ndarray:
        return np.array([self.xx, self.xy, self.yy])

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.as_matrix())

    @classmethod
    def diag(cls, a: float, b: float) -> "Tensor2":
        return cls(a, 0.0, b)


POROUS_TARGET = Tensor2.diag(0.2, 0.4)


@dataclass
class CellProblemSolution:
    T: np.ndarray
    flux_avg: np.ndarray
    residual: float
    drops_x: np.ndarray = field(repr=False)
    drops_y: np.ndarray = field(repr=False)


def conductivity_field(rho_hat: np.ndarray, mats: MaterialPair) -> np.ndarray:
    """Relative conductivity ``kappa1 + rho_hat (kappa2 - kappa1)`` per pixel."""
    return mats.kappa1 + np.asarray(rho_hat, dtype=np.float64) * (mats.kappa2 - mats.kappa1)


def face_conductivities(kappa: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Harmonic-mean conductivities of the +x and +y faces of every pixel."""
    kx = np.roll(kappa, -1, axis=1)
    ky = np.roll(kappa, -1, axis=0)
    return 2.0 * kappa * kx / (kappa + kx), 2.0 * kappa * ky / (kappa + ky)


def assemble(kappa: np.ndarray) -> sp.csr_matrix:
    """Symmetric positive semidefinite conduction operator ``sum_f k_f (e_p - e_q)(e_p - e_q)^T``."""
    ny, nx = kappa.shape
    fx, fy = face_conductivities(kappa)
    idx = np.arange(ny * nx).reshape(ny, nx)
    p = np.concatenate([idx.ravel(), idx.ravel()])
    q = np.concatenate([np.roll(idx, -1, axis=1).ravel(), np.roll(idx, -1, axis=0).ravel()])
    k = np.concatenate([fx.ravel(), fy.ravel()])
    rows = np.concatenate([p, q, p, q])
    cols = np.concatenate([p, q, q, p])
    vals = np.concatenate([k, k, -k, -k])
    return sp.coo_matrix((vals, (rows, cols)), shape=(nx * ny, nx * ny)).tocsr()


def _rhs(fx: np.ndarray, fy: np.ndarray, direction) -> np.ndarray:
    # A T = -b with b_p = sum_f k_f (e.n_f)(delta_{p,left} - delta_{p,right})
    ex, ey = direction
    b = ex * (fx - np.roll(fx, 1, axis=1)) + ey * (fy - np.roll(fy, 1, axis=0))
    return -b.ravel()


def pcg(A, b, tol: float = 1e-10, maxiter: int = 20000):
    """Jacobi-preconditioned CG on the zero-mean subspace of a singular SPSD operator."""
    diag = A.diagonal()
    inv = np.where(diag > 0, 1.0 / diag, 0.0)
    b = b - b.mean()
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b)
    if bnorm == 0:
        return x, 0.0, 0
    r = b.copy()
    z = inv * r
    z -= z.mean()
    d = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ad = A @ d
        step = rz / (d @ Ad)
        x += step * d
        r -= step * Ad
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            x -= x.mean()
            return x, res, it
        z = inv * r
        z -= z.mean()
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    x -= x.mean()
    raise SolverError(f"PCG did not converge in {maxiter} iterations", res)


class CellSolver:
    """Cell problems for one conductivity field; factorizes once, solves any direction."""

    def __init__(self, kappa: np.ndarray, method: str = "direct", tol: float = 1e-10):
        self.kappa = np.asarray(kappa, dtype=np.float64)
        if np.any(self.kappa <= 0) or not np.all(np.isfinite(self.kappa)):
            raise ValueError("conductivity must be positive and finite everywhere")
        self.shape = self.kappa.shape
        self.n = self.kappa.size
        self.fx, self.fy = face_conductivities(self.kappa)
        self.A = assemble(self.kappa)
        self.method = method
        self.tol = tol
        self._lu = None
        if method == "direct":
            # gauge: pin pixel 0; the pinned equation holds since rows and rhs sum to zero
            self._lu = spla.splu(self.A[1:, 1:].tocsc())
        elif method != "pcg":
            raise ValueError(f"unknown solver {method!r}")

    def solve(self, direction) -> CellProblemSolution:
        direction = np.asarray(direction, dtype=np.float64)
        b = _rhs(self.fx, self.fy, direction)
        bnorm = np.linalg.norm(b)
        if self.method == "direct":
            t = np.zeros(self.n)
            if bnorm > 0:
                t[1:] = self._lu.solve(b[1:])
            t -= t.mean()
        else:
            t, _, _ = pcg(self.A, b, tol=self.tol)
        res = float(np.linalg.norm(self.A @ t - b) / bnorm) if bnorm > 0 else 0.0
        if res > self.tol:
            raise SolverError("cell problem not solved to tolerance", res)
        T = t.reshape(self.shape)
        gx = direction[0] - (np.roll(T, -1, axis=1) - T)
        gy = direction[1] - (np.roll(T, -1, axis=0) - T)
        flux = np.array([np.mean(self.fx * gx), np.mean(self.fy * gy)])
        return CellProblemSolution(T=T, flux_avg=flux, residual=res, drops_x=gx, drops_y=gy)


def solve_cell(kappa: np.ndarray, direction, method: str = "direct") -> CellProblemSolution:
    return CellSolver(kappa, method).solve(direction)


@dataclass
class Homogenized:
    tensor: Tensor2
    solutions: tuple
    residuals: tuple
    symmetry_error: float
    consistency_error: float


def homogenize_kappa(kappa: np.ndarray, method: str = "direct", check: bool = True) -> Homogenized:
    solver = CellSolver(kappa, method)
    sx = solver.solve((1.0, 0.0))
    sy = solver.solve((0.0, 1.0))
    K = np.column_stack([sx.flux_avg, sy.flux_avg])
    sols = [sx, sy]
    consistency = 0.0
    if check:
        d = np.array([1.0, 1.0]) / math.sqrt(2.0)
        sd = solver.solve(d)
        consistency = float(np.max(np.abs(sd.flux_avg - K @ d)))
        sols.append(sd)
    sym = 0.5 * (K + K.T)
    return Homogenized(
        tensor=Tensor2(float(sym[0, 0]), float(sym[0, 1]), float(sym[1, 1])),
        solutions=tuple(sols),
        residuals=tuple(s.residual for s in sols),
        symmetry_error=float(abs(K[0, 1] - K[1, 0])),
        consistency_error=consistency,
    )


def effective_tensor(rho_hat: np.ndarray, mats: MaterialPair, method: str = "direct") -> Tensor2:
    return homogenize_kappa(conductivity_field(rho_hat, mats), method).tensor


def tensor_loss(K: Tensor2, target: Tensor2) -> float:
    diff = K.components() - target.components()
    return float(np.dot(LOSS_WEIGHTS, diff**2))


@dataclass
class LossEval:
    loss: float
    grad: np.ndarray
    tensor: Tensor2
    rho_hat: np.ndarray


def loss_and_grad(
    rho: np.ndarray,
    kernel: ConicKernel,
    grid: GridSpec,
    cfg: ProjectionConfig,
    mats: MaterialPair,
    target: Tensor2,
    method: str = "direct",
) -> LossEval:
    """Weighted squared mismatch of the effective tensor and its gradient w.r.t. the design."""
    if not grid.periodic:
        raise ValueError("homogenization requires a periodic grid")
    pipe = forward(rho, kernel, grid, cfg)
    kappa = conductivity_field(pipe.rho_hat, mats)
    solver = CellSolver(kappa, method)
    sx = solver.solve((1.0, 0.0))
    sy = solver.solve((0.0, 1.0))
    n = kappa.size
    # energy form; equals the averaged fluxes at the solution
    kxx = np.sum(solver.fx * sx.drops_x**2 + solver.fy * sx.drops_y**2) / n
    kyy = np.sum(solver.fx * sy.drops_x**2 + solver.fy * sy.drops_y**2) / n
    kxy = np.sum(solver.fx * sx.drops_x * sy.drops_x + solver.fy * sx.drops_y * sy.drops_y) / n
    K = Tensor2(float(kxx), float(kxy), float(kyy))
    diff = K.components() - target.components()
    loss = float(np.dot(LOSS_WEIGHTS, diff**2))
    cxx, cxy, cyy = 2.0 * np.asarray(LOSS_WEIGHTS) * diff
    dfx = (cxx * sx.drops_x**2 + cxy * sx.drops_x * sy.drops_x + cyy * sy.drops_x**2) / n
    dfy = (cxx * sx.drops_y**2 + cxy * sx.drops_y * sy.drops_y + cyy * sy.drops_y**2) / n
    # harmonic mean k = 2ab/(a+b): dk/da = 2 b^2/(a+b)^2
    ax = np.roll(kappa, -1, axis=1)
    ay = np.roll(kappa, -1, axis=0)
    sx2 = (kappa + ax) ** 2
    sy2 = (kappa + ay) ** 2
    dk = dfx * 2.0 * ax**2 / sx2 + dfy * 2.0 * ay**2 / sy2
    dk += np.roll(dfx * 2.0 * kappa**2 / sx2, 1, axis=1)
    dk += np.roll(dfy * 2.0 * kappa**2 / sy2, 1, axis=0)
    grad = pipe.vjp(dk * (mats.kappa2 - mats.kappa1))
    return LossEval(loss=loss, grad=grad, tensor=K, rho_hat=pipe.rho_hat)
