"""Log-polar grids on disks and annuli.

Nodes live at uniformly spaced t = log(rho) and uniformly spaced theta.
Each node owns the dual cell [t - dt/2, t + dt/2] x [theta - dth/2, theta + dth/2]
clipped to the domain, and its quadrature weight is the exact area of that
cell.  For a disk the innermost ring also owns the small central disk.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import RectBivariateSpline


@dataclass(frozen=True)
class AnnulusSpec:
    """Annulus r_inner < |z - center| < r_outer (r_inner = 0 is a disk)."""

    r_inner: float
    r_outer: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not (0.0 <= self.r_inner < self.r_outer):
            raise ValueError(f"need 0 <= r_inner < r_outer, got {self.r_inner}, {self.r_outer}")
        if not np.isfinite(self.r_outer):
            raise ValueError("r_outer must be finite")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def is_disk(self) -> bool:
        return self.r_inner == 0.0

    @property
    def modulus(self) -> float:
        """Conformal modulus log(r_outer / r_inner); infinite for a disk."""
        if self.is_disk:
            return np.inf
        return float(np.log(self.r_outer / self.r_inner))

    @property
    def area(self) -> float:
        return float(np.pi * (self.r_outer**2 - self.r_inner**2))

    def concentric_with(self, other: "AnnulusSpec", tol: float = 1e-14) -> bool:
        scale = max(self.r_outer, other.r_outer)
        return (abs(self.center[0] - other.center[0]) <= tol * scale
                and abs(self.center[1] - other.center[1]) <= tol * scale)


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


class LogPolarGrid:
    """Tensor grid in (t, theta) with t = log(rho).

    For an annulus the radial nodes include both boundary circles.  For a
    disk the nodes run from rho = r_outer / 2**d_max up to r_outer and the
    central disk below the first ring is lumped into the first ring's cells.
    """

    def __init__(self, spec: AnnulusSpec, n_theta: int, n_radial: int, d_max: int = 24):
        if not _is_pow2(int(n_theta)):
            raise ValueError(f"n_theta must be a power of two, got {n_theta}")
        if n_radial < 2:
            raise ValueError("n_radial must be at least 2")
        self.spec = spec
        self.n_theta = int(n_theta)
        self.n_radial = int(n_radial)
        self.d_max = int(d_max) if spec.is_disk else 0

        t_out = np.log(spec.r_outer)
        t_in = t_out - self.d_max * np.log(2.0) if spec.is_disk else np.log(spec.r_inner)
        self.t = np.linspace(t_in, t_out, self.n_radial)
        # pin the end nodes so that boundary radii are reproduced exactly
        self.rho = np.exp(self.t)
        self.rho[-1] = spec.r_outer
        if not spec.is_disk:
            self.rho[0] = spec.r_inner
        self.dt = float(self.t[1] - self.t[0])
        self.dtheta = 2.0 * np.pi / self.n_theta
        self.theta = self.dtheta * np.arange(self.n_theta)

        lo = np.maximum(self.t - 0.5 * self.dt, self.t[0])
        hi = np.minimum(self.t + 0.5 * self.dt, self.t[-1])
        if spec.is_disk:
            lo[0] = -np.inf
        self._t_lo = lo
        self._t_hi = hi
        # exact area of each dual cell, per unit angle (times dtheta below)
        self.ring_weight = 0.5 * self.dtheta * (np.exp(2.0 * hi) - np.exp(2.0 * lo))

    # ------------------------------------------------------------------ basics
    @property
    def shape(self):
        return (self.n_radial, self.n_theta)

    @property
    def t_inner(self) -> float:
        return float(self.t[0])

    @property
    def t_outer(self) -> float:
        return float(self.t[-1])

    @property
    def cell_area(self) -> np.ndarray:
        return np.repeat(self.ring_weight[:, None], self.n_theta, axis=1)

    def xy(self):
        """Cartesian coordinates of the nodes, shape (n_radial, n_theta) each."""
        cx, cy = self.spec.center
        r = self.rho[:, None]
        return cx + r * np.cos(self.theta)[None, :], cy + r * np.sin(self.theta)[None, :]

    def z(self) -> np.ndarray:
        x, y = self.xy()
        return x + 1j * y

    def same_as(self, other: "LogPolarGrid") -> bool:
        return (self.spec == other.spec and self.n_theta == other.n_theta
                and self.n_radial == other.n_radial and self.d_max == other.d_max)

    def __repr__(self):
        return (f"LogPolarGrid({self.spec}, n_theta={self.n_theta}, "
                f"n_radial={self.n_radial}, d_max={self.d_max})")

    # ------------------------------------------------------------- quadrature
    def region_weights(self, region: Optional[AnnulusSpec] = None) -> np.ndarray:
        """Cell areas clipped to ``region``.

        Concentric regions are clipped exactly in t.  Off-center disks and
        annuli are clipped by sub-sampling each boundary cell.
        """
        if region is None:
            return self.cell_area
        s = self.spec
        if region.concentric_with(s):
            if region.r_outer > s.r_outer * (1 + 1e-12) or region.r_inner < s.r_inner * (1 - 1e-12):
                raise ValueError(f"region {region} exceeds grid {s}")
            a = np.log(region.r_inner) if region.r_inner > 0 else -np.inf
            b = np.log(region.r_outer)
            lo = np.clip(self._t_lo, a, b)
            hi = np.clip(self._t_hi, a, b)
            w = 0.5 * self.dtheta * (np.exp(2.0 * hi) - np.exp(2.0 * lo))
            return np.repeat(w[:, None], self.n_theta, axis=1)
        dx = region.center[0] - s.center[0]
        dy = region.center[1] - s.center[1]
        d = np.hypot(dx, dy)
        if d + region.r_outer > s.r_outer * (1 + 1e-12):
            raise ValueError(f"region {region} exceeds grid {s}")
        if not s.is_disk and d - region.r_outer < s.r_inner and d + region.r_outer > s.r_inner:
            raise ValueError(f"region {region} overlaps the grid's hole")
        return self.cell_area * self.ball_fraction(region.center, region.r_outer, region.r_inner)

    def ball_fraction(self, center, r_outer: float, r_inner: float = 0.0, sub: int = 4) -> np.ndarray:
        """Fraction of each cell inside the annulus r_inner < |z - center| < r_outer."""
        cx, cy = center
        x, y = self.xy()
        dist = np.hypot(x - cx, y - cy)
        # a cell's diameter is bounded by rho * max(dt, dtheta) up to a small factor
        h = self.rho[:, None] * (self.dt + self.dtheta) + np.zeros_like(dist)
        frac = ((dist < r_outer) & (dist >= r_inner)).astype(float)
        edge = (np.abs(dist - r_outer) < h) | ((r_inner > 0) & (np.abs(dist - r_inner) < h))
        if self.spec.is_disk:
            edge[0, :] |= dist[0, :] < r_outer + self.rho[0]
        if not np.any(edge):
            return frac
        jj, kk = np.nonzero(edge)
        off = (np.arange(sub) + 0.5) / sub - 0.5
        ts = self.t[jj][:, None, None] + self.dt * off[None, :, None]
        ts = np.clip(ts, self._t_lo[jj][:, None, None], self._t_hi[jj][:, None, None])
        ths = self.theta[kk][:, None, None] + self.dtheta * off[None, None, :]
        r = np.exp(ts)
        xs = self.spec.center[0] + r * np.cos(ths)
        ys = self.spec.center[1] + r * np.sin(ths)
        ds = np.hypot(xs - cx, ys - cy)
        inside = (ds < r_outer) & (ds >= r_inner)
        # weight sub-samples by their share of the cell area (rho^2 in t)
        wsub = np.broadcast_to(r**2, inside.shape)
        frac[jj, kk] = (inside * wsub).sum(axis=(1, 2)) / wsub.sum(axis=(1, 2))
        return frac


@dataclass
class Field:
    """Real vector-valued samples on a grid; values have shape (n_components, n_radial, n_theta)."""

    grid: LogPolarGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[None]
        if v.shape[1:] != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_components(self) -> int:
        return self.values.shape[0]

    def component(self, i: int) -> "Field":
        return Field(self.grid, self.values[i:i + 1])

    def norm(self) -> "Field":
        """Pointwise Euclidean norm over components."""
        return Field(self.grid, np.sqrt(np.sum(self.values**2, axis=0)))

    def __add__(self, other):
        if isinstance(other, Field):
            _check_same_grid(self, other)
            return Field(self.grid, self.values + other.values)
        return Field(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, Field):
            _check_same_grid(self, other)
            return Field(self.grid, self.values - other.values)
        return Field(self.grid, self.values - other)

    def __mul__(self, c):
        if isinstance(c, Field):
            _check_same_grid(self, c)
            return Field(self.grid, self.values * c.values)
        return Field(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)


def _check_same_grid(f: Field, g: Field):
    if not (f.grid is g.grid or f.grid.same_as(g.grid)):
        raise ValueError("fields live on different grids")


def sample(grid: LogPolarGrid, fn) -> Field:
    """Sample ``fn(x, y)`` (scalar or stacked components) at the grid nodes."""
    x, y = grid.xy()
    return Field(grid, np.asarray(fn(x, y), dtype=float))


def from_polar(grid: LogPolarGrid, fn) -> Field:
    """Sample ``fn(rho, theta)`` at the grid nodes (rho relative to the center)."""
    r = grid.rho[:, None] + np.zeros(grid.shape)
    th = grid.theta[None, :] + np.zeros(grid.shape)
    return Field(grid, np.asarray(fn(r, th), dtype=float))


# ---------------------------------------------------------------- calculus
def d_theta(values: np.ndarray) -> np.ndarray:
    """Spectral derivative along the last (theta) axis; Nyquist mode dropped."""
    n = values.shape[-1]
    fh = np.fft.rfft(values, axis=-1)
    k = np.arange(fh.shape[-1])
    ik = 1j * k
    if n % 2 == 0:
        ik[-1] = 0.0
    return np.fft.irfft(fh * ik, n=n, axis=-1)


def d_t(values: np.ndarray, dt: float) -> np.ndarray:
    """Fourth-order finite difference along the radial (second to last) axis."""
    f = np.moveaxis(values, -2, 0)
    n = f.shape[0]
    if n < 8:
        raise ValueError(f"need at least 8 radial nodes for the stencil, got {n}")
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * dt)
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * dt)
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * dt)
    out[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]) / (12.0 * dt)
    out[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]) / (12.0 * dt)
    return np.moveaxis(out, 0, -2)


def polar_derivatives(f: Field):
    """Return (rho * d_rho f, d_theta f), i.e. derivatives in (t, theta)."""
    if f.grid.n_radial < 8:
        raise ValueError("grid too coarse: n_radial < 8")
    return d_t(f.values, f.grid.dt), d_theta(f.values)


def to_cartesian(grid: LogPolarGrid, ft: np.ndarray, fth: np.ndarray):
    """Map (t, theta) derivatives to Cartesian (d_x, d_y) components."""
    inv = np.exp(-grid.t)[:, None]
    c = np.cos(grid.theta)[None, :]
    s = np.sin(grid.theta)[None, :]
    dr = ft * inv
    da = fth * inv
    return c * dr - s * da, s * dr + c * da


def gradient(f: Field) -> Field:
    """Cartesian gradient, components ordered (d_x f_0, d_y f_0, d_x f_1, ...)."""
    ft, fth = polar_derivatives(f)
    gx, gy = to_cartesian(f.grid, ft, fth)
    out = np.empty((2 * f.n_components,) + f.grid.shape)
    out[0::2] = gx
    out[1::2] = gy
    return Field(f.grid, out)


def angular_radial_split(f: Field):
    """Split the gradient into d_rho f and rho^-1 d_theta f (per component)."""
    if f.grid.spec.is_disk:
        raise ValueError("angular/radial split needs an annulus; restrict the field first")
    ft, fth = polar_derivatives(f)
    inv = np.exp(-f.grid.t)[:, None]
    return Field(f.grid, ft * inv), Field(f.grid, fth * inv)


def integrate(f: Field, region: Optional[AnnulusSpec] = None) -> float:
    """Integral of a scalar field over ``region`` (default: the whole grid)."""
    if f.n_components != 1:
        raise ValueError("integrate expects a scalar field")
    w = f.grid.region_weights(region)
    return float(np.sum(w * f.values[0]))


def dirichlet_energy(f: Field, region: Optional[AnnulusSpec] = None) -> float:
    """Integral of |grad f|^2 summed over components."""
    g = gradient(f)
    return integrate(Field(f.grid, np.sum(g.values**2, axis=0)), region)


def gradient_l2(f: Field, region: Optional[AnnulusSpec] = None) -> float:
    return float(np.sqrt(dirichlet_energy(f, region)))


# ------------------------------------------------------- restrict / extend
def restrict_extend(f: Field, target: LogPolarGrid) -> Field:
    """Transfer ``f`` to a concentric ``target`` grid.

    Overlapping nodes are interpolated with bicubic splines in (t, theta).
    Below the source's inner circle the field is extended by even reflection
    in t, blended to the source's (t, theta)-mean by a smooth cutoff over one
    reflected period; deeper nodes take that mean.  The ratio of Dirichlet
    energies (target over source) is stored in ``meta['energy_ratio']``.
    """
    src = f.grid
    if not target.spec.concentric_with(src.spec):
        raise ValueError("target grid must be concentric with the source")
    if target.spec.r_outer > src.spec.r_outer * (1 + 1e-12):
        raise ValueError("extension beyond the outer circle is not supported")
    if target.spec.r_outer <= src.spec.r_inner:
        raise ValueError("target does not overlap the source")
    t_in, t_out = src.t_inner, src.t_outer
    period = t_out - t_in
    if not target.spec.is_disk and target.t_inner < t_in - period * (1 + 1e-12):
        raise ValueError("extension requested beyond one reflected period")

    pad = 4
    th = np.concatenate([src.theta[-pad:] - 2 * np.pi, src.theta, src.theta[:pad] + 2 * np.pi])
    tt = target.t
    inside = tt >= t_in - 1e-13
    t_eval = np.where(inside, tt, 2 * t_in - tt)
    t_eval = np.clip(t_eval, t_in, t_out)
    # cutoff: 1 on the source, smooth step to 0 one period below t_in
    s = np.clip((t_in - tt) / period, 0.0, 1.0)
    chi = 1.0 - s**3 * (10 - 15 * s + 6 * s**2)
    out = np.empty((f.n_components,) + target.shape)
    tgt_th = np.mod(target.theta, 2 * np.pi)
    # the spline wants increasing abscissae; reflected radii fold back onto the source
    t_uniq, t_inv = np.unique(t_eval, return_inverse=True)
    th_order = np.argsort(tgt_th)
    th_inv = np.argsort(th_order)
    for c in range(f.n_components):
        vals = np.concatenate([f.values[c][:, -pad:], f.values[c], f.values[c][:, :pad]], axis=1)
        spl = RectBivariateSpline(src.t, th, vals, kx=3, ky=3, s=0)
        v = spl(t_uniq, tgt_th[th_order], grid=True)[t_inv][:, th_inv]
        mean = float(np.mean(f.values[c]))
        ext = mean + chi[:, None] * (v - mean)
        out[c] = np.where(inside[:, None], v, ext)
    res = Field(target, out)
    e_src = dirichlet_energy(f)
    e_tgt = dirichlet_energy(res)
    res.meta["energy_ratio"] = e_tgt / e_src if e_src > 0 else 0.0
    return res


def annulus_grid(r_inner: float, r_outer: float, n_theta: int = 128, per_octave: int = 64,
                 center=(0.0, 0.0), min_radial: int = 16) -> LogPolarGrid:
    """Convenience constructor: radial resolution scales with log2(r_outer / r_inner)."""
    spec = AnnulusSpec(r_inner, r_outer, center)
    octaves = np.log2(r_outer / r_inner)
    n_radial = max(min_radial, int(np.ceil(per_octave * octaves)) + 1)
    return LogPolarGrid(spec, n_theta, n_radial)


def disk_grid(r_outer: float, n_theta: int = 128, per_octave: int = 32, d_max: int = 24,
              center=(0.0, 0.0)) -> LogPolarGrid:
    spec = AnnulusSpec(0.0, r_outer, center)
    return LogPolarGrid(spec, n_theta, per_octave * d_max + 1, d_max=d_max)


def ring_index(grid: LogPolarGrid, r: float):
    """Index of the ring nearest to radius ``r`` and whether it had to snap."""
    j = int(np.argmin(np.abs(grid.rho - r)))
    snapped = abs(grid.rho[j] - r) > 1e-12 * max(r, 1e-300)
    return j, snapped


def mode_coefficients(values: np.ndarray) -> np.ndarray:
    """Normalized real-FFT coefficients along theta: f = sum c_n e^{i n theta}."""
    return np.fft.rfft(values, axis=-1) / values.shape[-1]
