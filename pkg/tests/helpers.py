"""Central-difference oracles shared by the gradient tests."""
import numpy as np


def fd_probe(fun, x, grad, rng, n_probes=20, h=1e-6, pixels=None):
    """Compare ``grad`` with central differences of scalar ``fun`` along unit pixel directions.

    Returns the worst relative error, using ``max(|fd|, 1e-3 * max|grad|)`` as scale.
    """
    flat = x.ravel()
    g = grad.ravel()
    if pixels is None:
        pixels = rng.choice(flat.size, size=n_probes, replace=False)
    scale_floor = 1e-3 * np.max(np.abs(g))
    worst = 0.0
    for p in pixels:
        xp = flat.copy()
        xm = flat.copy()
        xp[p] += h
        xm[p] -= h
        fd = (fun(xp.reshape(x.shape)) - fun(xm.reshape(x.shape))) / (2 * h)
        worst = max(worst, abs(fd - g[p]) / max(abs(fd), scale_floor))
    return worst


def smooth_random_field(rng, shape, modes=3):
    """Sum of a few periodic cosines, mapped into (0, 1)."""
    ny, nx = shape
    y, x = np.mgrid[0:ny, 0:nx]
    f = np.zeros(shape)
    for _ in range(modes):
        kx, ky = rng.integers(-2, 3, size=2)
        f += rng.normal() * np.cos(2 * np.pi * (kx * x / nx + ky * y / ny) + rng.uniform(0, 2 * np.pi))
    f = (f - f.min()) / (f.max() - f.min() + 1e-300)
    return 0.1 + 0.8 * f
