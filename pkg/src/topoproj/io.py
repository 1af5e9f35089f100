"""Field files: raw little-endian float64, row-major (y outer), plus a JSON sidecar.

The sidecar for ``name.raw`` is ``name.raw.json`` and holds
``{"nx", "ny", "dx", "boundary"}``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .calculus import CHANNELS, JetField
from .grid import Boundary, GridSpec

JET_SUFFIXES = dict(zip(CHANNELS, (".val", ".dx", ".dy", ".dxx", ".dxy", ".dyy")))


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_field(path, values: np.ndarray, grid: GridSpec) -> None:
    path = Path(path)
    values = grid.check(values)
    try:
        path.write_bytes(np.ascontiguousarray(values, dtype="<f8").tobytes())
        meta = {"nx": grid.nx, "ny": grid.ny, "dx": grid.dx, "boundary": grid.boundary.value}
        sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write field file {path}: {exc}") from exc


def read_field(path) -> tuple[np.ndarray, GridSpec]:
    path = Path(path)
    try:
        meta = json.loads(sidecar_path(path).read_text())
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read field file {path}: {exc}") from exc
    grid = GridSpec(nx=int(meta["nx"]), ny=int(meta["ny"]), dx=float(meta["dx"]),
                    boundary=Boundary(meta.get("boundary", "periodic")))
    values = np.frombuffer(raw, dtype="<f8")
    if values.size != grid.size:
        raise ValueError(f"{path}: {values.size} values but sidecar declares {grid.nx}x{grid.ny}")
    return values.reshape(grid.shape).astype(np.float64), grid


def dump_jet(stem, j: JetField, grid: GridSpec) -> list[Path]:
    """Write each jet channel as ``<stem><suffix>`` in the field format."""
    paths = []
    for name, arr in zip(CHANNELS, j.channels()):
        p = Path(str(stem) + JET_SUFFIXES[name])
        write_field(p, arr, grid)
        paths.append(p)
    return paths


def write_pgm(path, values: np.ndarray, threshold: float = 0.5) -> None:
    """Binary P5 preview; solid (>= threshold) is black."""
    img = np.where(np.asarray(values) >= threshold, 0, 255).astype(np.uint8)
    ny, nx = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
