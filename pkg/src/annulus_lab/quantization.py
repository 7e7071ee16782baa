"""Energy profiles on dyadic annuli, radii partitions, Pohozaev checks and
bubble-tree decomposition of synthetic concentrating sequences.

Synthetic sequences are stereographic lifts of rational maps

    f_k(z) = g(z) + sum_i (mu_k^i / (z - a_k^i))^{d_i}

so every bubble is an exact harmonic sphere map of energy 8 pi d_i.  Ball
energies used for detection come from the boundary form of the pulled-back
area element (exact for rational maps, robust for off-center tiny bubbles);
all region energies in the tree are area quadratures on log-polar grids
centered at the detected points.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .grid import (AnnulusSpec, Field, LogPolarGrid, annulus_grid, disk_grid, gradient, ring_index)
from .lorentz import lorentz_norm
from .spheremaps import PoleTerm, RationalMap, energy_density_pq, lift_gradient

FOUR_PI = 4.0 * np.pi
EIGHT_PI = 8.0 * np.pi


# ------------------------------------------------------------ densities
def energy_density(u: Field, grad_u: Optional[Field] = None) -> np.ndarray:
    """|grad u|^2 at the nodes (summed over components)."""
    gv = gradient(u).values if grad_u is None else grad_u.values
    return np.sum(gv**2, axis=0)


def omega_density(u: Field, grad_u: Optional[Field] = None) -> Field:
    """|Omega|^2 for Omega^i_j = u^i grad u^j - u^j grad u^i (sum over i, j)."""
    gv = gradient(u).values if grad_u is None else grad_u.values
    m = u.n_components
    out = np.zeros(u.grid.shape)
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            wx = u.values[i] * gv[2 * j] - u.values[j] * gv[2 * i]
            wy = u.values[i] * gv[2 * j + 1] - u.values[j] * gv[2 * i + 1]
            out += wx**2 + wy**2
    return Field(u.grid, out)


def _unit_frame(grid: LogPolarGrid, center=None):
    """Radial and angular unit vectors about ``center`` (default: grid center)."""
    x, y = grid.xy()
    cx, cy = grid.spec.center if center is None else center
    X, Y = x - cx, y - cy
    r = np.hypot(X, Y)
    r = np.where(r > 0, r, 1.0)
    er = np.stack([X / r, Y / r])
    return er, np.stack([-er[1], er[0]])


def radial_angular_density(grad_u: np.ndarray, grid: LogPolarGrid, center=None):
    """(|d_rho u|^2, |rho^-1 d_theta u|^2) from a Cartesian gradient array."""
    er, et = _unit_frame(grid, center)
    m = grad_u.shape[0] // 2
    rad = sum((er[0] * grad_u[2 * c] + er[1] * grad_u[2 * c + 1]) ** 2 for c in range(m))
    ang = sum((et[0] * grad_u[2 * c] + et[1] * grad_u[2 * c + 1]) ** 2 for c in range(m))
    return rad, ang


# ------------------------------------------------------- dyadic profile
@dataclass
class DyadicEnergyProfile:
    """Energies e_j of B_{2 rho_j} \\ B_{rho_j}, rho_j = r 2^{j * step}."""

    radii: np.ndarray
    energies: np.ndarray
    r_inner: float
    r_outer: float
    total: float
    step: float = 0.5

    @property
    def sup_e(self) -> float:
        return float(np.max(self.energies)) if self.energies.size else 0.0

    @property
    def overlap(self) -> int:
        """How many windows cover a generic point."""
        return int(round(1.0 / self.step))

    def rows(self):
        return [dict(rho=float(r), energy=float(e)) for r, e in zip(self.radii, self.energies)]


def dyadic_radii(r: float, R: float, step: float = 0.5) -> np.ndarray:
    n = int(np.floor(np.log2(R / (2 * r)) / step + 1e-9))
    return r * 2.0 ** (step * np.arange(n + 1))


def dyadic_profile(u: Field, spec: Optional[AnnulusSpec] = None, grad_u: Optional[Field] = None,
                   density: Optional[np.ndarray] = None, step: float = 0.5) -> DyadicEnergyProfile:
    """Energies on the overlapping dyadic annuli of ``spec`` (default: the grid's annulus).

    Windows start every ``step`` octaves, so the sup over r < rho < R/2 is
    sampled twice per octave; each point lies in 1/step windows.
    """
    g = u.grid
    spec = g.spec if spec is None else spec
    if spec.is_disk or spec.r_outer / spec.r_inner < 4:
        raise ValueError(f"dyadic profile needs r_outer / r_inner >= 4, got {spec}")
    dens = energy_density(u, grad_u) if density is None else np.asarray(density)
    radii = dyadic_radii(spec.r_inner, spec.r_outer, step)
    e = np.array([float(np.sum(dens * g.region_weights(AnnulusSpec(r, 2 * r, spec.center))))
                  for r in radii])
    total = float(np.sum(dens * g.region_weights(spec)))
    return DyadicEnergyProfile(radii, e, spec.r_inner, spec.r_outer, total, step)


@dataclass
class WeakL2Report:
    lhs: float    # ||grad u||_{2, inf}
    rhs: float    # sup_e^{1/2}
    ratio: float


def weak_l2_check(u: Field, spec: Optional[AnnulusSpec] = None, grad_u: Optional[Field] = None,
                  step: float = 0.5) -> WeakL2Report:
    """Weak-L^2 norm of grad u against the largest dyadic energy."""
    gu = gradient(u) if grad_u is None else grad_u
    prof = dyadic_profile(u, spec, gu, step=step)
    if prof.sup_e == 0.0:
        return WeakL2Report(0.0, 0.0, 0.0)
    lhs = lorentz_norm(gu, 2, np.inf, spec).value
    rhs = np.sqrt(prof.sup_e)
    return WeakL2Report(lhs, float(rhs), float(lhs / rhs))


# ------------------------------------------------------ radii partition
def radial_masses(density: Field, r: Optional[float] = None, R: Optional[float] = None):
    """Ring edges and ring masses of a density, clipped to r < rho < R."""
    g = density.grid
    r = g.spec.r_inner if r is None else r
    R = g.spec.r_outer if R is None else R
    region = AnnulusSpec(r, R, g.spec.center)
    w = g.region_weights(region)
    masses = np.sum(np.asarray(density.values[0]) * w, axis=1)
    lo = np.clip(np.exp(g._t_lo), r, R)
    hi = np.clip(np.exp(g._t_hi), r, R)
    return lo, hi, masses


class _Cumulative:
    """E(rho) = mass of r < |z| < rho, linear in area inside each ring."""

    def __init__(self, lo, hi, masses):
        keep = hi > lo
        self.lo, self.hi, self.m = lo[keep], hi[keep], np.maximum(masses[keep], 0.0)
        self.cum = np.concatenate([[0.0], np.cumsum(self.m)])

    def __call__(self, rho: float) -> float:
        j = int(np.searchsorted(self.hi, rho, side="left"))
        if j >= self.m.size:
            return float(self.cum[-1])
        lo, hi = self.lo[j], self.hi[j]
        frac = 0.0 if rho <= lo else (rho**2 - lo**2) / (hi**2 - lo**2)
        return float(self.cum[j] + frac * self.m[j])


def radii_partition(density: Union[Field, Tuple[np.ndarray, np.ndarray, np.ndarray]], r: float, R: float,
                    eps0: float, rel_tol: float = 1e-13) -> np.ndarray:
    """Radii r = r_0 < r_1 < ... < r_N = R with at most eps0 of mass on each annulus.

    Each leg's outer radius is found by bisection (in log rho) as the largest
    radius keeping the leg's mass <= eps0.  ``density`` is a scalar Field of
    |Omega|^2 values or a tuple (ring inner radii, ring outer radii, ring masses).
    """
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    if not 0 <= r < R:
        raise ValueError(f"need 0 <= r < R, got {r}, {R}")
    lo, hi, masses = radial_masses(density, r, R) if isinstance(density, Field) else density
    E = _Cumulative(np.asarray(lo, float), np.asarray(hi, float), np.asarray(masses, float))
    radii = [r]
    cur = r
    while True:
        base = E(cur)
        if E(R) - base <= eps0:
            radii.append(R)
            break
        a = np.log(cur) if cur > 0 else np.log(R) - 200.0
        b = np.log(R)
        while b - a > rel_tol * max(1.0, abs(b)):
            mid = 0.5 * (a + b)
            if E(np.exp(mid)) - base <= eps0:
                a = mid
            else:
                b = mid
        nxt = float(np.exp(a))
        if nxt <= cur:  # a single point carries more than eps0: cannot happen for a continuous E
            nxt = float(np.nextafter(cur, R))
        radii.append(nxt)
        cur = nxt
    return np.array(radii)


def partition_masses(density, radii: np.ndarray) -> np.ndarray:
    lo, hi, masses = radial_masses(density, radii[0], radii[-1]) if isinstance(density, Field) else density
    E = _Cumulative(np.asarray(lo, float), np.asarray(hi, float), np.asarray(masses, float))
    cum = np.array([E(x) for x in radii])
    return np.diff(cum)


# ----------------------------------------------- angular quantization
@dataclass
class AngularReport:
    lhs: float               # ||rho^-1 d_theta u||^2 on B_{R/2} \ B_{2r}
    rhs: float               # ||grad u||_2 * sup_e^{1/2}
    ratio: float
    sup_omega: float         # sup over dyadic annuli of int |Omega|^2
    hypothesis_ok: bool


def angular_quantization_check(u: Field, spec: Optional[AnnulusSpec] = None,
                               omega: Optional[Field] = None, delta: float = np.inf,
                               grad_u: Optional[Field] = None) -> AngularReport:
    """Angular energy on the inner part of the annulus against ||grad u||_2 sup_e^{1/2}.

    When the dyadic sup of |Omega|^2 exceeds ``delta`` the report is returned
    with ``hypothesis_ok = False`` rather than raising.
    """
    g = u.grid
    spec = g.spec if spec is None else spec
    gu = gradient(u) if grad_u is None else grad_u
    rad, ang = radial_angular_density(gu.values, g, spec.center)
    lhs = 0.0
    if 4 * spec.r_inner < spec.r_outer:
        inner = AnnulusSpec(2 * spec.r_inner, spec.r_outer / 2, spec.center)
        lhs = float(np.sum(ang * g.region_weights(inner)))
    prof = dyadic_profile(u, spec, gu)
    energy = prof.total
    rhs = float(np.sqrt(energy) * np.sqrt(prof.sup_e))
    if omega is None:
        sup_om = 0.0
    else:
        sup_om = dyadic_profile(u, spec, density=omega.values[0]).sup_e
    ratio = lhs / rhs if rhs > 0 else 0.0
    return AngularReport(lhs, rhs, float(ratio), float(sup_om), bool(sup_om <= delta))


# ------------------------------------------------------------ Pohozaev
def pohozaev_profile(u: Field, grad_u: Optional[Field] = None):
    """Per-ring (radial, angular) circle integrals of |d_rho u|^2 and |rho^-1 d_theta u|^2."""
    g = u.grid
    gv = gradient(u).values if grad_u is None else grad_u.values
    rad, ang = radial_angular_density(gv, g)
    ds = g.rho * g.dtheta
    return rad.sum(axis=1) * ds, ang.sum(axis=1) * ds


def pohozaev_residual(u: Field, r: float, grad_u: Optional[Field] = None, signed: bool = False) -> float:
    """|int (|d_rho u|^2 - |rho^-1 d_theta u|^2) ds| / int |grad u|^2 ds on the ring nearest r.

    Off-grid radii are snapped to the nearest ring with a warning.  With
    ``signed`` the sign is kept: +1 for purely radial and -1 for purely
    angular gradients.
    """
    g = u.grid
    j, snapped = ring_index(g, r)
    if snapped:
        warnings.warn(f"radius {r} is off-grid; snapped to ring {j} at {g.rho[j]:.6g}", stacklevel=2)
    rad, ang = pohozaev_profile(u, grad_u)
    tot = rad[j] + ang[j]
    if tot == 0:
        return 0.0
    val = (rad[j] - ang[j]) / tot
    return float(val if signed else abs(val))


# ---------------------------------------------------- synthetic sequences
@dataclass
class BubbleSpec:
    """A bubble of the sequence: (scale / (z - center_k))^degree.

    scale_k = scale * 2^{-k * power}; center_k = center + drift * scale_k,
    or, with ``parent`` set, parent's center_k + parent's scale_k * offset.
    """

    center: complex = 0.0
    degree: int = 1
    scale: float = 1.0
    power: float = 1.0
    drift: complex = 0.0
    parent: Optional[int] = None
    offset: complex = 0.0


@dataclass
class SyntheticSequence:
    background: Tuple[complex, ...] = (0.1, 0.2)
    bubbles: List[BubbleSpec] = field(default_factory=list)

    def __post_init__(self):
        for i, b in enumerate(self.bubbles):
            if b.power <= 0 or b.scale <= 0:
                raise ValueError("scales must decrease strictly in k")
            if b.parent is not None and not 0 <= b.parent < i:
                raise ValueError("a parent must be listed before its child")

    def scale(self, i: int, k: int) -> float:
        b = self.bubbles[i]
        return float(b.scale * 2.0 ** (-k * b.power))

    def center(self, i: int, k: int) -> complex:
        b = self.bubbles[i]
        if b.parent is None:
            return complex(b.center + b.drift * self.scale(i, k))
        return complex(self.center(b.parent, k) + self.scale(b.parent, k) * b.offset)

    def depth(self, i: int) -> int:
        d, b = 1, self.bubbles[i]
        while b.parent is not None:
            d += 1
            b = self.bubbles[b.parent]
        return d

    def terms(self, k: int) -> List[PoleTerm]:
        return [PoleTerm(self.center(i, k), complex(self.scale(i, k)), b.degree)
                for i, b in enumerate(self.bubbles)]

    def map(self, k: int) -> RationalMap:
        return RationalMap(self.background, self.terms(k))

    def limit_map(self) -> RationalMap:
        return RationalMap(self.background, [])

    def bubble_map(self, i: int, k: int) -> RationalMap:
        """omega^i_k: the i-th pole term plus the value of everything else at its center."""
        terms = self.terms(k)
        rest = RationalMap(self.background, [t for j, t in enumerate(terms) if j != i])
        c = complex(rest(np.array([terms[i].a]))[0])
        return RationalMap((c,), [terms[i]])

    def total_degree(self) -> int:
        return sum(b.degree for b in self.bubbles)

    def density(self, k: int) -> Callable:
        f = self.map(k)

        def dens(x, y):
            return energy_density_pq(*f.pq(np.asarray(x) + 1j * np.asarray(y)))
        return dens

    def field(self, k: int, grid: LogPolarGrid) -> Field:
        from .spheremaps import map_field
        return map_field(self.map(k), grid)

    def gradient(self, k: int, grid: LogPolarGrid) -> Field:
        return Field(grid, lift_gradient(*self.map(k).pq(grid.z())))

    def remainder_gradient(self, k: int, grid: LogPolarGrid) -> np.ndarray:
        """grad(u_k - u_inf - sum_i omega^i_k) at the grid nodes."""
        z = grid.z()
        out = lift_gradient(*self.map(k).pq(z)) - lift_gradient(*self.limit_map().pq(z))
        for i in range(len(self.bubbles)):
            out = out - lift_gradient(*self.bubble_map(i, k).pq(z))
        return out

    def ball_energy(self, k: int, center: complex, radius: float) -> float:
        return contour_energy(self.map(k), center, radius)


def one_bubble(center: complex = 0.3 + 0.2j, degree: int = 1, background=(0.1, 0.2)) -> SyntheticSequence:
    return SyntheticSequence(background, [BubbleSpec(center, degree, drift=0.5 + 0.5j)])


def bubble_on_bubble(center: complex = 0.3 + 0.2j, p: complex = 0.5, background=(0.1, 0.2)) -> SyntheticSequence:
    """A bubble of scale 2^-k with a second one of scale 2^-2k sitting at center + 2^-k p."""
    return SyntheticSequence(background, [BubbleSpec(center, 1),
                                          BubbleSpec(degree=1, power=2.0, parent=0, offset=p)])


def two_bubbles(separation: float = 0.5, background=(0.1, 0.2)) -> SyntheticSequence:
    c = 0.1 + 0.1j
    return SyntheticSequence(background, [BubbleSpec(c - separation / 2), BubbleSpec(c + separation / 2)])


# --------------------------------------------------- boundary-form energy
_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(16)


def _contour_panels(f: RationalMap, center: complex, radius: float, base: int = 32) -> np.ndarray:
    """Panel breakpoints in theta, graded geometrically toward nearby poles."""
    pts = list(np.linspace(0.0, 2 * np.pi, base + 1))
    for p in f.poles:
        w = p.a - center
        dist = abs(abs(w) - radius)
        if dist > 0.5 * radius:
            continue
        th0 = float(np.angle(w)) % (2 * np.pi)
        h = max(dist, 1e-15 * radius) / radius
        while h < np.pi:
            for s in (-1.0, 1.0):
                pts.append((th0 + s * h) % (2 * np.pi))
            h *= 2.0
        pts.append(th0)
    return np.unique(np.array(pts))


def contour_energy(f: RationalMap, center: complex, radius: float) -> float:
    """Dirichlet energy of the lift of f on the disk B(center, radius).

    The lift's energy density is twice the pulled-back sphere area element,
    whose primitive 2|w|^2/(1+|w|^2) d arg w is smooth away from w = inf;
    Stokes gives 8 pi (poles inside, with order) plus a circle integral of
    4 Im(conj(f) f' dz) / (1 + |f|^2), computed by graded Gauss-Legendre panels.
    """
    pts = _contour_panels(f, complex(center), float(radius))
    a, b = pts[:-1], pts[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    th = (mid[:, None] + half[:, None] * _GL16_X[None, :]).ravel()
    wts = (half[:, None] * _GL16_W[None, :]).ravel()
    e = np.exp(1j * th)
    z = center + radius * e
    P, Pd, Q, Qd = f.pq(z)
    S = np.abs(P) ** 2 + np.abs(Q) ** 2
    W = Pd * Q - P * Qd
    dz = 1j * radius * e
    integrand = np.imag(np.conj(P) * W * dz / (Q * S))
    n_in = sum(p.d for p in f.poles if abs(p.a - center) < radius)
    return float(EIGHT_PI * n_in + 4.0 * np.sum(wts * integrand))


# -------------------------------------------------------- area quadrature
def patch_grid(center: complex, radius: float, finest: float, n_theta: int = 128,
               per_octave: int = 32) -> LogPolarGrid:
    """Disk grid on B(center, radius) whose innermost ring is below finest / 64."""
    d_max = int(np.clip(np.ceil(np.log2(radius / max(finest, 1e-300))) + 6, 4, 60))
    return disk_grid(radius, n_theta=n_theta, per_octave=per_octave, d_max=d_max,
                     center=(float(np.real(center)), float(np.imag(center))))


def _xy(c) -> Tuple[float, float]:
    return float(np.real(c)), float(np.imag(c))


# ----------------------------------------------------------- detection
def detect_concentration(seq: SyntheticSequence, k: int, eps0: float, frame: Optional[Tuple[complex, float]] = None,
                         floor: float = 2.0**-40, max_levels: int = 60) -> List[Tuple[complex, float]]:
    """Minimal balls B(c, R 2^-m) inside ``frame`` carrying energy >= eps0.

    The scan goes from large to small radii on the geometric ladder; every hit
    is refined by a lattice of half-size balls (spacing a quarter radius),
    hits are thinned per level, and a hit with no hitting sub-ball is minimal.
    Overlapping minimal balls are disjointified by keeping the smaller one
    (larger energy on ties).  Returns (center, radius) pairs.
    """
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    f = seq.map(k)
    c0, R0 = (0j, 1.0) if frame is None else (complex(frame[0]), float(frame[1]))
    e0 = contour_energy(f, c0, R0)
    if e0 < eps0:
        return []
    offs = np.array([i + 1j * j for i in range(-4, 5) for j in range(-4, 5) if i * i + j * j <= 16]) / 4.0
    level = [(c0, R0, e0)]
    minimal = []
    for _ in range(max_levels):
        nxt = []
        for c, rho, e in level:
            r2 = rho / 2
            hits = []
            if r2 >= floor:
                for o in offs:
                    cc = c + rho * o
                    if abs(cc - c0) + r2 > R0 * (1 + 1e-12):
                        continue
                    en = contour_energy(f, cc, r2)
                    if en >= eps0:
                        hits.append((cc, r2, en))
            if not hits:
                minimal.append((c, rho, e))
            nxt.extend(hits)
        if not nxt:
            break
        # thin: strongest first, drop hits whose centers sit inside a kept ball
        nxt.sort(key=lambda h: -h[2])
        kept = []
        for h in nxt:
            if all(abs(h[0] - q[0]) >= h[1] for q in kept):
                kept.append(h)
        level = kept
    minimal.sort(key=lambda h: (h[1], -h[2]))
    out = []
    for c, rho, e in minimal:
        if all(abs(c - q[0]) >= rho + q[1] for q in out):
            out.append((c, rho))
    return out


# -------------------------------------------------------- center/scale
@dataclass
class ScaleInfo:
    iterations: int
    outer_energy: float
    ball_energy: float


def _ball_moments(grid: LogPolarGrid, dens: np.ndarray, center: complex, radius: float):
    w = grid.cell_area * grid.ball_fraction(_xy(center), radius, sub=8) * dens
    z = grid.z()
    m = float(np.sum(w))
    return m, complex(np.sum(w * z)) / m if m > 0 else complex(center)


def center_and_scale(density: Callable, ball: Tuple[complex, float], eps0: float, delta: float,
                     finest: Optional[float] = None, n_theta: int = 128, per_octave: int = 32,
                     refine: int = 5) -> Tuple[complex, float, ScaleInfo]:
    """Energy centroid a of the ball and scale lam with E(ball \\ B(a, lam)) = min(delta, eps0/2).

    All integrals use one log-polar grid centered at the ball's center; the
    centroid is then recomputed on B(a, 8 lam) (clipped to the ball) until it
    settles, which removes the pull of any smooth background.
    """
    c, r = complex(ball[0]), float(ball[1])
    grid = patch_grid(c, r, r * 1e-6 if finest is None else finest, n_theta, per_octave)
    x, y = grid.xy()
    dens = density(x, y)
    target = min(delta, eps0 / 2)
    total = float(np.sum(grid.cell_area * dens))
    if total < target:
        raise ValueError(f"ball energy {total:.4g} is below the neck budget {target:.4g}")
    _, a = _ball_moments(grid, dens, c, r)
    lam = r
    it = 0
    for it in range(refine + 1):
        lam = _scale_bisect(grid, dens, a, c, r, total, target)
        if it == refine:
            break
        rad = min(8 * lam, r - abs(a - c))
        if rad <= 0:
            break
        _, a_new = _ball_moments(grid, dens, a, rad)
        moved = abs(a_new - a)
        a = a_new
        if moved < 1e-3 * lam:
            lam = _scale_bisect(grid, dens, a, c, r, total, target)
            break
    return a, lam, ScaleInfo(it, total - _inside(grid, dens, a, lam), total)


def _inside(grid, dens, a, lam) -> float:
    return float(np.sum(grid.cell_area * dens * grid.ball_fraction(_xy(a), lam, sub=8)))


def _scale_bisect(grid, dens, a, c, r, total, target) -> float:
    hi = r - abs(a - c)
    lo = hi * 1e-12
    out_lo = total - _inside(grid, dens, a, lo)
    out_hi = total - _inside(grid, dens, a, hi)
    if out_hi > target or out_lo < target:
        raise ValueError("neck budget not bracketed inside the ball")
    prev = out_lo
    for _ in range(80):
        mid = np.sqrt(lo * hi)
        out = total - _inside(grid, dens, a, mid)
        if out > prev + 1e-9 * total:
            raise RuntimeError("annulus energy is not monotone: quadrature corrupted")
        if out > target:
            lo, prev = mid, out
        else:
            hi = mid
        if hi / lo < 1 + 1e-10:
            break
    return float(np.sqrt(lo * hi))


# ------------------------------------------------------------ bubble tree
@dataclass
class BubbleNode:
    center: complex                 # energy centroid a
    scale: float                    # lambda
    patch_center: complex           # detection center c
    patch_radius: float             # B(c, r) is removed from the parent region
    depth: int
    children: List["BubbleNode"] = field(default_factory=list)
    neck_energy: float = 0.0        # B(c, r) \ B(a, lambda)
    bubble_energy: float = 0.0      # B(a, lambda) minus the children's patches

    def walk(self):
        yield self
        for ch in self.children:
            yield from ch.walk()


@dataclass
class BubbleTree:
    k: int
    eps0: float
    delta: float
    nodes: List[BubbleNode]         # top-level bubble nodes
    thick_energy: float = 0.0
    total_energy: float = 0.0       # boundary-form value on B_1, independent of the regions
    partial: bool = False
    notes: List[str] = field(default_factory=list)

    def all_nodes(self) -> List[BubbleNode]:
        return [n for top in self.nodes for n in top.walk()]

    @property
    def depth(self) -> int:
        return max((n.depth for n in self.all_nodes()), default=0)

    @property
    def region_sum(self) -> float:
        return self.thick_energy + sum(n.neck_energy + n.bubble_energy for n in self.all_nodes())

    @property
    def ledger_residual(self) -> float:
        return abs(self.region_sum - self.total_energy) / max(self.total_energy, 1e-300)

    def to_dict(self) -> dict:
        def node(n: BubbleNode) -> dict:
            bub = dict(tag="bubble", center=list(_xy(n.center)), scale=n.scale, energy=n.bubble_energy,
                       children=[node(ch) for ch in n.children])
            return dict(tag="neck", center=list(_xy(n.patch_center)), scale=n.patch_radius,
                        energy=n.neck_energy, children=[bub])
        root = dict(tag="thick", center=[0.0, 0.0], scale=1.0, energy=self.thick_energy,
                    children=[node(n) for n in self.nodes])
        return dict(k=self.k, eps0=self.eps0, delta=self.delta, total_energy=self.total_energy,
                    ledger_residual=self.ledger_residual, partial=self.partial, notes=self.notes, tree=root)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _patch_radii(dets, frame_c: complex, frame_r: float, fraction: float) -> List[float]:
    out = []
    for i, (c, rho) in enumerate(dets):
        r = fraction * frame_r
        r = min(r, 0.5 * (frame_r - abs(c - frame_c)))
        for j, (c2, _) in enumerate(dets):
            if j != i:
                r = min(r, 0.5 * abs(c - c2))
        out.append(r)
    return out


def build_bubble_tree(seq: SyntheticSequence, k: int, eps0: float = FOUR_PI, delta: float = 2 * np.pi,
                      max_depth: int = 6, patch_fraction: float = 0.25, concentration_ratio: float = 1 / 16,
                      floor: float = 4 * 2.0**-40, n_theta: int = 128, per_octave: int = 32) -> BubbleTree:
    """Recursive bubble-tree decomposition of u_k on B_1.

    In each frame (B_1, then B(a, lambda) of every bubble) concentration
    points are minimal eps0-balls of radius at most ``concentration_ratio``
    times the frame radius; each gets a patch B(c, r) with r = patch_fraction
    times the frame radius (kept disjoint and inside the frame), a centroid a
    and a scale lambda, and the search recurses into B(a, lambda).  Regions:
    thick = B_1 minus top patches, neck = patch minus B(a, lambda), bubble =
    B(a, lambda) minus the children's patches.
    """
    dens = seq.density(k)
    tree = BubbleTree(k, eps0, delta, [])
    tree.total_energy = contour_energy(seq.map(k), 0j, 1.0)

    def expand(frame_c: complex, frame_r: float, depth: int) -> List[BubbleNode]:
        dets = [d for d in detect_concentration(seq, k, eps0, (frame_c, frame_r))
                if d[1] <= concentration_ratio * frame_r]
        if not dets:
            return []
        if depth > max_depth:
            tree.partial = True
            tree.notes.append(f"depth cap {max_depth} reached; {len(dets)} concentration(s) left unresolved")
            return []
        nodes = []
        for (c, rho), rp in zip(dets, _patch_radii(dets, frame_c, frame_r, patch_fraction)):
            a, lam, _ = center_and_scale(dens, (c, rp), eps0, delta, finest=rho, n_theta=n_theta,
                                         per_octave=per_octave)
            if lam < floor:
                tree.partial = True
                tree.notes.append(f"scale {lam:.3g} below the resolution floor at depth {depth}")
                continue
            if abs(a - c) + lam >= rp:
                tree.partial = True
                tree.notes.append(f"bubble disk leaves its patch at depth {depth}")
            node = BubbleNode(a, lam, c, rp, depth)
            node.children = expand(a, lam, depth + 1)
            for ch in node.children:
                if not ch.scale < lam:
                    tree.partial = True
                    tree.notes.append("child scale not below parent scale")
            _node_energies(node, dens, rho, n_theta, per_octave)
            nodes.append(node)
        return nodes

    tree.nodes = expand(0j, 1.0, 1)
    g = disk_grid(1.0, n_theta=256, per_octave=32, d_max=24)
    x, y = g.xy()
    w = g.cell_area.copy()
    for n in tree.nodes:
        w = w * (1.0 - g.ball_fraction(_xy(n.patch_center), n.patch_radius, sub=8))
    tree.thick_energy = float(np.sum(w * dens(x, y)))
    return tree


def _node_energies(node: BubbleNode, dens: Callable, finest: float, n_theta: int, per_octave: int):
    g = patch_grid(node.patch_center, node.patch_radius, min(finest, node.scale), n_theta, per_octave)
    x, y = g.xy()
    d = dens(x, y)
    inside = g.ball_fraction(_xy(node.center), node.scale, sub=8)
    keep = np.ones(g.shape)
    for ch in node.children:
        keep = keep * (1.0 - g.ball_fraction(_xy(ch.patch_center), ch.patch_radius, sub=8))
    node.neck_energy = float(np.sum(g.cell_area * d * (1.0 - inside)))
    node.bubble_energy = float(np.sum(g.cell_area * d * inside * keep))


# ----------------------------------------------------------- neck report
def _neck_vector_field(tree: BubbleTree, grid: LogPolarGrid) -> np.ndarray:
    """X_k = rot of d_k, d_k = min_i (lambda_i + |x - a_i|) over the tree's bubbles."""
    x, y = grid.xy()
    best = np.full(grid.shape, np.inf)
    X = np.zeros((2,) + grid.shape)
    for n in tree.all_nodes():
        ax, ay = _xy(n.center)
        dx, dy = x - ax, y - ay
        r = np.hypot(dx, dy)
        d = n.scale + r
        sel = d < best
        best = np.where(sel, d, best)
        r = np.where(r > 0, r, 1.0)
        X[0] = np.where(sel, -dy / r, X[0])
        X[1] = np.where(sel, dx / r, X[1])
    return X


def _directional_energy(grad: np.ndarray, V: np.ndarray, w: np.ndarray) -> float:
    m = grad.shape[0] // 2
    s = sum((V[0] * grad[2 * c] + V[1] * grad[2 * c + 1]) ** 2 for c in range(m))
    return float(np.sum(w * s))


def neck_report(tree: BubbleTree, seq: SyntheticSequence, k: Optional[int] = None, r: float = 0.5,
                n_theta: int = 128, per_octave: int = 32) -> List[dict]:
    """Energies on the necks N(r) = B(a, r * patch_radius) \\ B(a, lambda / r).

    ``neck_angular`` and ``neck_radial`` measure the remainder
    grad(u_k - u_inf - sum omega^i_k) along X_k and across it; the raw
    counterparts of u_k itself are reported alongside (for conformal maps the
    raw radial and angular parts agree ring by ring).
    """
    k = tree.k if k is None else k
    rows = []
    for node_id, n in enumerate(tree.all_nodes()):
        row = dict(k=k, node_id=node_id, r=r, neck_total=0.0, neck_angular=0.0, neck_radial=0.0,
                   neck_angular_raw=0.0, neck_radial_raw=0.0, ledger_residual=tree.ledger_residual,
                   empty=True)
        inner, outer = n.scale / r, r * n.patch_radius
        if inner < outer:
            g = annulus_grid(inner, outer, n_theta=n_theta, per_octave=per_octave, center=_xy(n.center))
            w = g.cell_area
            gu = seq.gradient(k, g).values
            rem = seq.remainder_gradient(k, g)
            X = _neck_vector_field(tree, g)
            Y = np.stack([X[1], -X[0]])
            row.update(neck_total=float(np.sum(w * np.sum(gu**2, axis=0))),
                       neck_angular=_directional_energy(rem, X, w),
                       neck_radial=_directional_energy(rem, Y, w),
                       neck_angular_raw=_directional_energy(gu, X, w),
                       neck_radial_raw=_directional_energy(gu, Y, w), empty=False)
        rows.append(row)
    return rows


# ----------------------------------------------------- quantization ledger
def limit_energy(seq: SyntheticSequence, n_theta: int = 128, per_octave: int = 32) -> float:
    """Energy of u_inf on B_1 by area quadrature."""
    g = disk_grid(1.0, n_theta=n_theta, per_octave=per_octave, d_max=12)
    x, y = g.xy()
    f = seq.limit_map()
    return float(np.sum(g.cell_area * energy_density_pq(*f.pq(x + 1j * y))))


def quantization_residual(tree: BubbleTree, seq: SyntheticSequence) -> float:
    """|E(u_k) - E(u_inf) - sum 8 pi deg_i| with E(u_k) summed over the tree's regions."""
    return float(abs(tree.region_sum - limit_energy(seq) - EIGHT_PI * seq.total_degree()))
