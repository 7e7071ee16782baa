"""Field serialization: flat little-endian binary container and plotting CSV.

Binary layout (all little-endian, 8 bytes each):
    r_inner, r_outer, center_x, center_y   float64
    n_theta, n_radial, n_components, d_max int64
followed by the values as float64 in row-major (component, radial, theta) order.
"""
from __future__ import annotations

import csv
import struct

import numpy as np

from .grid import AnnulusSpec, Field, LogPolarGrid

_HEADER = struct.Struct("<4d4q")


def to_bytes(f: Field) -> bytes:
    g = f.grid
    head = _HEADER.pack(g.spec.r_inner, g.spec.r_outer, g.spec.center[0], g.spec.center[1],
                        g.n_theta, g.n_radial, f.n_components, g.d_max)
    return head + np.ascontiguousarray(f.values, dtype="<f8").tobytes()


def from_bytes(buf: bytes) -> Field:
    r_in, r_out, cx, cy, n_theta, n_radial, n_comp, d_max = _HEADER.unpack_from(buf, 0)
    n = n_theta * n_radial * n_comp
    payload = np.frombuffer(buf, dtype="<f8", count=n, offset=_HEADER.size)
    if payload.size != n:
        raise ValueError("truncated field payload")
    spec = AnnulusSpec(r_in, r_out, (cx, cy))
    grid = LogPolarGrid(spec, n_theta, n_radial, d_max=d_max if d_max > 0 else 24)
    return Field(grid, payload.reshape(n_comp, n_radial, n_theta).astype(float))


def write_field(path, f: Field):
    with open(path, "wb") as fh:
        fh.write(to_bytes(f))


def read_field(path) -> Field:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


def write_field_csv(path, f: Field):
    """One row per node: t, theta, then each component."""
    g = f.grid
    tt, th = np.meshgrid(g.t, g.theta, indexing="ij")
    cols = [tt.ravel(), th.ravel()] + [f.values[c].ravel() for c in range(f.n_components)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "theta"] + [f"c{c}" for c in range(f.n_components)])
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])


def read_field_csv(path, grid: LogPolarGrid) -> Field:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n_comp = data.shape[1] - 2
    vals = data[:, 2:].T.reshape(n_comp, grid.n_radial, grid.n_theta)
    return Field(grid, vals)
