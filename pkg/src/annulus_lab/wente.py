"""Poisson and Wente solvers on disks and annuli, Hodge splitting, first-order
systems and conservation-law potentials of sphere-valued maps.

The Poisson solver works in t = log(rho): per Fourier mode n,

    phi_n'' - n^2 phi_n = e^{2t} rhs_n,

discretized with three-point differences in t.  The n^2 term is replaced by
its exponentially fitted value (2 cosh(n dt) - 2) / dt^2, which makes the
scheme exact on rho^{+-n} e^{i n theta} (and on log rho for n = 0) while
keeping it second order for everything else.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sps
from scipy.integrate import cumulative_simpson
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu

from .grid import (AnnulusSpec, Field, LogPolarGrid, _check_same_grid, annulus_grid, d_t, d_theta,
                   dirichlet_energy, disk_grid, gradient, gradient_l2, integrate, polar_derivatives)
from .lorentz import lorentz_norm

KINDS = ("zero", "dirichlet", "neumann", "mean-zero-free")


@dataclass
class Side:
    """Condition on one boundary circle.

    ``trace`` holds Dirichlet values or the normal derivative d_rho phi
    (for ``neumann``) at the ring's angles; ``mean`` is the prescribed circle
    mean for ``mean-zero-free``, whose oscillating modes are left free.
    """

    kind: str = "zero"
    trace: Optional[np.ndarray] = None
    mean: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind in ("dirichlet", "neumann") and self.trace is None:
            raise ValueError(f"{self.kind} side needs a trace")


@dataclass
class BoundaryCondition:
    outer: Side = field(default_factory=Side)
    inner: Optional[Side] = None
    K: Optional[float] = None  # bound on the outer mean, recorded only

    @classmethod
    def zero(cls, disk: bool = False):
        return cls(Side("zero"), None if disk else Side("zero"))

    @classmethod
    def dirichlet(cls, inner, outer):
        inner_side = None if inner is None else Side("dirichlet", np.asarray(inner, float))
        return cls(Side("dirichlet", np.asarray(outer, float)), inner_side)

    @classmethod
    def mean_free(cls, inner_mean: float = 0.0, outer_mean: float = 0.0, K: Optional[float] = None):
        if K is not None and abs(outer_mean) > K:
            raise ValueError(f"outer mean {outer_mean} exceeds K = {K}")
        return cls(Side("mean-zero-free", mean=outer_mean), Side("mean-zero-free", mean=inner_mean), K)

    def validate(self, grid: LogPolarGrid):
        if grid.spec.is_disk and self.inner is not None:
            raise ValueError("disk grids carry only an outer condition")
        if not grid.spec.is_disk and self.inner is None:
            raise ValueError("annulus grids need an inner condition")
        for s in (self.inner, self.outer):
            if s is not None and s.trace is not None and len(s.trace) != grid.n_theta:
                raise ValueError("boundary trace length must equal n_theta")


def fitted_kappa(n: np.ndarray, dt: float) -> np.ndarray:
    return (2.0 * np.cosh(n * dt) - 2.0) / dt**2


def _side_modes(side: Side, n_modes: int, n_theta: int) -> np.ndarray:
    if side.trace is None:
        return np.zeros(n_modes, complex)
    return np.fft.rfft(np.asarray(side.trace, float)) / n_theta


def poisson_solve(rhs: Field, bc: BoundaryCondition, grid: Optional[LogPolarGrid] = None,
                  flux_tol: float = 1e-6) -> Field:
    """Solve Laplace(phi) = rhs on the grid of ``rhs`` with boundary condition ``bc``."""
    grid = rhs.grid if grid is None else grid
    if rhs.n_components != 1:
        raise ValueError("poisson_solve expects a scalar right-hand side")
    if not grid.same_as(rhs.grid):
        raise ValueError("rhs lives on a different grid")
    bc.validate(grid)
    N, M = grid.n_radial, grid.n_theta
    dt = grid.dt
    e2t = np.exp(2.0 * grid.t)
    F = np.fft.rfft(rhs.values[0] * e2t[:, None], axis=1) / M  # (N, n_modes)
    n_modes = F.shape[1]
    outer_hat = _side_modes(bc.outer, n_modes, M)
    inner_hat = None if bc.inner is None else _side_modes(bc.inner, n_modes, M)
    out = np.zeros((N, n_modes), complex)
    idt2 = 1.0 / dt**2
    for n in range(n_modes):
        kap = fitted_kappa(n, dt)
        ab = np.zeros((3, N), complex)
        ab[0, 1:] = idt2          # super-diagonal
        ab[1, :] = -2.0 * idt2 - kap
        ab[2, :-1] = idt2         # sub-diagonal
        b = F[:, n].astype(complex).copy()
        fix_mean = False
        # ---- inner end
        if grid.spec.is_disk:
            if n == 0:
                # smooth at the origin: rho d_rho phi ~ rho^2 rhs / 2 on the first ring
                g = 0.5 * grid.rho[0] ** 2 * rhs.values[0][0].mean()
                ab[0, 1] = 2.0 * idt2
                b[0] += 2.0 * g / dt
            else:
                ab[1, 0] += np.exp(-n * dt) * idt2
        else:
            s = bc.inner
            kind = s.kind
            if kind == "mean-zero-free":
                kind = "dirichlet" if n == 0 else "neumann"
            if kind in ("zero", "dirichlet"):
                val = 0.0 if s.kind == "zero" else (s.mean if s.kind == "mean-zero-free" else inner_hat[n])
                ab[1, 0] = 1.0
                ab[0, 1] = 0.0
                b[0] = val
            else:
                g = inner_hat[n] if s.kind == "neumann" else 0.0
                ab[0, 1] = 2.0 * idt2
                b[0] += 2.0 * grid.rho[0] * g / dt
        # ---- outer end
        s = bc.outer
        kind = s.kind
        if kind == "mean-zero-free":
            kind = "dirichlet" if n == 0 else "neumann"
        if kind in ("zero", "dirichlet"):
            val = 0.0 if s.kind == "zero" else (s.mean if s.kind == "mean-zero-free" else outer_hat[n])
            ab[1, -1] = 1.0
            ab[2, -2] = 0.0
            b[-1] = val
        else:
            g = outer_hat[n] if s.kind == "neumann" else 0.0
            ab[2, -2] = 2.0 * idt2
            b[-1] -= 2.0 * grid.rho[-1] * g / dt
        if n == 0 and _pure_neumann(bc, grid):
            _check_flux(F[:, 0], bc, grid, inner_hat, outer_hat, flux_tol)
            ab[1, 0] = 1.0
            ab[0, 1] = 0.0
            b[0] = 0.0
            fix_mean = True
        out[:, n] = solve_banded((1, 1), ab, b)
        if fix_mean:
            w = grid.ring_weight
            out[:, 0] -= np.sum(w * out[:, 0]) / np.sum(w)
    phi = np.fft.irfft(out * M, n=M, axis=1)
    return Field(grid, phi)


def _pure_neumann(bc: BoundaryCondition, grid: LogPolarGrid) -> bool:
    outer_free = bc.outer.kind == "neumann"
    inner_free = grid.spec.is_disk or (bc.inner is not None and bc.inner.kind == "neumann")
    return outer_free and inner_free


def _check_flux(F0, bc, grid, inner_hat, outer_hat, tol):
    # integral of the rhs must equal the net boundary flux
    wts = np.full(grid.n_radial, grid.dt)
    wts[0] = wts[-1] = 0.5 * grid.dt
    total = float(np.real(np.sum(wts * F0)))
    flux = float(np.real(grid.rho[-1] * outer_hat[0]))
    if inner_hat is not None:
        flux -= float(np.real(grid.rho[0] * inner_hat[0]))
    scale = max(abs(total), abs(flux), float(np.sum(wts * np.abs(F0))), 1e-300)
    if abs(total - flux) > tol * scale:
        raise ValueError(f"incompatible Neumann data: source {total:.6g} vs boundary flux {flux:.6g}")


def discrete_laplacian(f: Field) -> Field:
    """Apply the solver's discrete Laplacian at interior rings (boundary rings set to 0)."""
    grid = f.grid
    M = grid.n_theta
    out = np.zeros(f.values.shape)
    for c in range(f.n_components):
        fh = np.fft.rfft(f.values[c], axis=1)
        kap = fitted_kappa(np.arange(fh.shape[1]), grid.dt)
        lap = np.zeros_like(fh)
        lap[1:-1] = (fh[2:] - 2 * fh[1:-1] + fh[:-2]) / grid.dt**2 - kap[None, :] * fh[1:-1]
        out[c] = np.fft.irfft(lap, n=M, axis=1) * np.exp(-2.0 * grid.t)[:, None]
    return Field(grid, out)


def poisson_residual(phi: Field, rhs: Field) -> float:
    """max |L phi - rhs| over interior rings, relative to max |rhs| (or 1 if rhs = 0)."""
    _check_same_grid(phi, rhs)
    lap = discrete_laplacian(phi).values[0][1:-1]
    r = rhs.values[0][1:-1]
    scale = max(float(np.max(np.abs(r))), 1.0) if np.any(r) else 1.0
    return float(np.max(np.abs(lap - r)) / scale)


# ------------------------------------------------------------------ Wente
def jacobian(a: Field, b: Field) -> Field:
    """a_x b_y - a_y b_x."""
    _check_same_grid(a, b)
    if a.n_components != 1 or b.n_components != 1:
        raise ValueError("jacobian expects scalar fields")
    ga = gradient(a).values
    gb = gradient(b).values
    return Field(a.grid, ga[0] * gb[1] - ga[1] * gb[0])


@dataclass
class WenteReport:
    epsilon: float
    lam: float
    grad_a: float
    grad_b: float
    phi_inf: float
    grad_phi_l2: float
    grad_phi_l21: float
    ratio: float
    variant: str = "disk"

    def __post_init__(self):
        for k, v in asdict(self).items():
            if isinstance(v, float) and not (np.isfinite(v) and v >= 0):
                raise ValueError(f"report entry {k} = {v} must be finite and non-negative")

    def row(self) -> dict:
        return asdict(self)


def restricted_region(spec: AnnulusSpec, lam: float) -> Optional[AnnulusSpec]:
    """B_R \\ B_{lam r} for lam > 1, B_{lam R} \\ B_{r / lam} for lam < 1 (None on disks)."""
    if spec.is_disk:
        return None if lam >= 1 else AnnulusSpec(0.0, lam * spec.r_outer, spec.center)
    if lam > 1:
        return AnnulusSpec(lam * spec.r_inner, spec.r_outer, spec.center)
    return AnnulusSpec(spec.r_inner / lam, lam * spec.r_outer, spec.center)


def wente_solve(a: Field, b: Field, bc: BoundaryCondition, grid: Optional[LogPolarGrid] = None,
                lam: float = 2.0, grad_a: Optional[float] = None, grad_b: Optional[float] = None,
                variant: str = "zero-trace") -> Tuple[Field, WenteReport]:
    """Solve Laplace(phi) = a_x b_y - a_y b_x and measure phi.

    ``grad_a`` / ``grad_b`` override the gradient norms (e.g. when a, b were
    normalized on the whole disk but are sampled on an annulus).
    """
    _check_same_grid(a, b)
    grid = a.grid if grid is None else grid
    phi = poisson_solve(jacobian(a, b), bc, grid)
    ga = gradient_l2(a) if grad_a is None else grad_a
    gb = gradient_l2(b) if grad_b is None else grad_b
    gphi = gradient(phi)
    region = restricted_region(grid.spec, lam)
    l21 = lorentz_norm(gphi, 2, 1, region).value
    den = ga * gb
    rep = WenteReport(float(grid.spec.r_inner / grid.spec.r_outer), float(lam), float(ga), float(gb),
                      float(np.max(np.abs(phi.values))), float(gradient_l2(phi)), float(l21),
                      float(l21 / den) if den > 0 else 0.0, variant)
    return phi, rep


# ------------------------------------------------------ random test data
@dataclass
class Poly2D:
    """Real polynomial sum c[i, j] x^i y^j with an analytic gradient."""

    coef: np.ndarray

    def __call__(self, x, y):
        return np.polynomial.polynomial.polyval2d(x, y, self.coef)

    def grad(self, x, y):
        cx = np.polynomial.polynomial.polyder(self.coef, axis=0)
        cy = np.polynomial.polynomial.polyder(self.coef, axis=1)
        return (np.polynomial.polynomial.polyval2d(x, y, cx), np.polynomial.polynomial.polyval2d(x, y, cy))

    def scaled(self, s):
        return Poly2D(self.coef * s)


def random_polynomial(rng: np.random.Generator, degree: int = 4) -> Poly2D:
    c = rng.standard_normal((degree + 1, degree + 1))
    i, j = np.indices(c.shape)
    c[i + j > degree] = 0.0
    c[0, 0] = 0.0
    return Poly2D(c)


_NORM_GRID = None


def disk_gradient_norm(p: Poly2D) -> float:
    """||grad p||_{L^2(B_1)} by quadrature of the analytic gradient."""
    global _NORM_GRID
    if _NORM_GRID is None:
        _NORM_GRID = disk_grid(1.0, n_theta=64, per_octave=32, d_max=16)
    x, y = _NORM_GRID.xy()
    gx, gy = p.grad(x, y)
    return float(np.sqrt(np.sum(_NORM_GRID.cell_area * (gx**2 + gy**2))))


def normalized_pair(rng: np.random.Generator, degree: int = 4) -> Tuple[Poly2D, Poly2D]:
    a = random_polynomial(rng, degree)
    b = random_polynomial(rng, degree)
    return a.scaled(1.0 / disk_gradient_norm(a)), b.scaled(1.0 / disk_gradient_norm(b))


def random_trace_modes(rng: np.random.Generator, n_modes: int = 8, scale: float = 1.0) -> np.ndarray:
    """Fourier data of a random real trace; entry 0 is the mean."""
    k = np.arange(n_modes + 1)
    c = (rng.standard_normal(n_modes + 1) + 1j * rng.standard_normal(n_modes + 1)) / np.maximum(k, 1) ** 2
    c[0] = c[0].real
    return scale * c


def trace_from_modes(modes: np.ndarray, n_theta: int) -> np.ndarray:
    full = np.zeros(n_theta // 2 + 1, complex)
    m = min(len(modes), len(full) - 1)
    full[:m] = modes[:m]
    return np.fft.irfft(full * n_theta, n=n_theta)


def sweep_grid(eps: float, n_theta: int = 64, per_octave: int = 64) -> LogPolarGrid:
    return LogPolarGrid(AnnulusSpec(eps, 1.0), n_theta, max(16, int(round(per_octave * np.log2(1 / eps)))))


def _sample_pair(a: Poly2D, b: Poly2D, grid: LogPolarGrid):
    x, y = grid.xy()
    return Field(grid, a(x, y)), Field(grid, b(x, y))


def zero_trace_instance(a: Poly2D, b: Poly2D, eps: float, lam: float = 2.0, n_theta: int = 64,
                per_octave: int = 64) -> WenteReport:
    """Zero traces on both circles; ratio over B_1 \\ B_{lam eps}."""
    g = sweep_grid(eps, n_theta, per_octave)
    fa, fb = _sample_pair(a, b, g)
    _, rep = wente_solve(fa, fb, BoundaryCondition.zero(), g, lam, 1.0, 1.0, "zero-trace")
    return rep


def mean_free_instance(a: Poly2D, b: Poly2D, eps: float, outer_mean: float, K: float = 1.0,
                     lam: float = 0.5, n_theta: int = 64, per_octave: int = 64) -> dict:
    """Inner mean zero, outer mean prescribed; ratio against ||grad a|| ||grad b|| + ||grad phi||_2 + 1."""
    g = sweep_grid(eps, n_theta, per_octave)
    fa, fb = _sample_pair(a, b, g)
    phi, rep = wente_solve(fa, fb, BoundaryCondition.mean_free(0.0, outer_mean, K), g, lam, 1.0, 1.0, "mean-free")
    den = rep.grad_a * rep.grad_b + rep.grad_phi_l2 + 1.0
    return dict(variant="mean-free", epsilon=eps, lam=lam, numerator=rep.grad_phi_l21, denominator=den,
                ratio=rep.grad_phi_l21 / den)


def dirichlet_instance(a: Poly2D, b: Poly2D, eps: float, inner_modes: np.ndarray, outer_modes: np.ndarray,
                 lam: float = 0.5, n_theta: int = 64, per_octave: int = 64) -> dict:
    """Given traces on both circles; ratio against ||grad a|| ||grad b|| + ||phi||_inf."""
    g = sweep_grid(eps, n_theta, per_octave)
    fa, fb = _sample_pair(a, b, g)
    bc = BoundaryCondition.dirichlet(trace_from_modes(inner_modes, n_theta), trace_from_modes(outer_modes, n_theta))
    phi, rep = wente_solve(fa, fb, bc, g, lam, 1.0, 1.0, "dirichlet")
    den = rep.grad_a * rep.grad_b + rep.phi_inf
    return dict(variant="dirichlet", epsilon=eps, lam=lam, numerator=rep.grad_phi_l21, denominator=den,
                ratio=rep.grad_phi_l21 / den)


def radial_mean(f: Field) -> Field:
    return Field(f.grid, np.repeat(f.values.mean(axis=2, keepdims=True), f.grid.n_theta, axis=2))


def ring_flux(v: Field) -> np.ndarray:
    """Outward flux of grad v through each ring: int d_t v dtheta (rho-independent form)."""
    vt, _ = polar_derivatives(v)
    return vt[0].sum(axis=1) * v.grid.dtheta


def weak_gradient_solve(a: Field, b: Field, phi: Field, lam: float = 0.5, grad_b: Optional[float] = None) -> dict:
    """Measure the L^2 gradient bound for phi solving Laplace(phi) = J(a, b) with given traces.

    The harmonic part v = phi - phi_zero (phi_zero: zero traces) minus its
    radial mean has zero flux through every circle; the worst relative flux is
    reported as ``flux_max``.
    """
    _check_same_grid(a, phi)
    grid = phi.grid
    if grid.spec.is_disk:
        raise ValueError("weak_gradient_solve works on annuli")
    phi0 = radial_mean(phi)
    gphi0 = dirichlet_energy(phi0)
    if not np.isfinite(gphi0):
        raise ValueError("radial-mean energy diverges")
    region = restricted_region(grid.spec, lam)
    gphi = gradient(phi)
    lhs = float(np.sqrt(np.sum(grid.region_weights(region) * np.sum(gphi.values**2, axis=0))))
    ga_weak = lorentz_norm(gradient(a), 2, np.inf).value
    gb = gradient_l2(b) if grad_b is None else grad_b
    gphi_weak = lorentz_norm(gphi, 2, np.inf).value
    rhs = ga_weak * gb + np.sqrt(gphi0) + gphi_weak
    phi_zero = poisson_solve(jacobian(a, b), BoundaryCondition.zero(), grid)
    psi = phi - phi_zero
    v = psi - radial_mean(psi)
    flux = np.abs(ring_flux(v))
    vt, vth = polar_derivatives(v)
    scale = np.sqrt(vt[0] ** 2 + vth[0] ** 2).sum(axis=1) * grid.dtheta
    fl = flux / np.maximum(scale, 1e-300)
    fl[scale < 1e-14] = 0.0
    return dict(variant="weak-gradient", epsilon=grid.spec.r_inner, lam=lam, numerator=lhs, denominator=rhs,
                ratio=lhs / rhs if rhs > 0 else 0.0, grad_a_weak=ga_weak, grad_b=gb,
                grad_phi0=float(np.sqrt(gphi0)), grad_phi_weak=gphi_weak, flux_max=float(fl.max()))


def weak_gradient_instance(a: Poly2D, b: Poly2D, eps: float, alpha: float, inner_modes, outer_modes,
                 lam: float = 0.5, n_theta: int = 64, per_octave: int = 64) -> dict:
    """a = poly + alpha cos(theta) so that grad a lies in weak L^2 only."""
    g = sweep_grid(eps, n_theta, per_octave)
    x, y = g.xy()
    r = np.hypot(x, y)
    fa = Field(g, a(x, y) + alpha * x / r)
    fb = Field(g, b(x, y))
    bc = BoundaryCondition.dirichlet(trace_from_modes(inner_modes, n_theta), trace_from_modes(outer_modes, n_theta))
    phi = poisson_solve(jacobian(fa, fb), bc, g)
    return weak_gradient_solve(fa, fb, phi, lam, grad_b=1.0)


def wente_sweep(variant: str, eps_list: Sequence[float], seeds: Sequence[int], lam: Optional[float] = None,
                n_theta: int = 64, per_octave: int = 64, K: float = 1.0) -> List[dict]:
    """Rows keyed by (variant, seed, epsilon); random data are drawn once per seed."""
    rows = []
    for seed in seeds:
        rng = np.random.Generator(np.random.PCG64(seed))
        a, b = normalized_pair(rng)
        inner, outer = random_trace_modes(rng), random_trace_modes(rng)
        mean = float(rng.uniform(-K, K))
        alpha = float(rng.uniform(0.5, 1.5))
        for eps in eps_list:
            if variant == "zero-trace":
                rep = zero_trace_instance(a, b, eps, lam or 2.0, n_theta, per_octave)
                row = dict(variant="zero-trace", epsilon=eps, lam=rep.lam, numerator=rep.grad_phi_l21,
                           denominator=rep.grad_a * rep.grad_b, ratio=rep.ratio, phi_inf=rep.phi_inf,
                           grad_phi_l2=rep.grad_phi_l2)
            elif variant == "mean-free":
                row = mean_free_instance(a, b, eps, mean, K, lam or 0.5, n_theta, per_octave)
            elif variant == "dirichlet":
                row = dirichlet_instance(a, b, eps, inner, outer, lam or 0.5, n_theta, per_octave)
            elif variant == "weak-gradient":
                row = weak_gradient_instance(a, b, eps, alpha, inner, outer, lam or 0.5, n_theta, per_octave)
            else:
                raise ValueError(f"unknown variant {variant!r}")
            row["seed"] = seed
            rows.append(row)
    return rows


def wente_constants(seeds: Sequence[int], n_theta: int = 64, per_octave: int = 16, d_max: int = 12) -> dict:
    """Sup over random normalized pairs on B_1 of ||phi||_inf and ||grad phi||_{2,1}."""
    g = disk_grid(1.0, n_theta=n_theta, per_octave=per_octave, d_max=d_max)
    sup_inf, sup_l21 = 0.0, 0.0
    for seed in seeds:
        rng = np.random.Generator(np.random.PCG64(seed))
        a, b = normalized_pair(rng)
        fa, fb = _sample_pair(a, b, g)
        _, rep = wente_solve(fa, fb, BoundaryCondition.zero(disk=True), g, 1.0, 1.0, 1.0, "disk")
        sup_inf = max(sup_inf, rep.phi_inf)
        sup_l21 = max(sup_l21, rep.grad_phi_l21)
    return {"sup_phi_inf": sup_inf, "sup_grad_phi_l21": sup_l21}


# ------------------------------------------------------------------ Hodge
def sbp_first_derivative(n: int, h: float):
    """Diagonal-norm summation-by-parts first derivative (4th order inside, 2nd at the ends).

    Returns (D, H) with H D + (H D)^T = diag(-1, 0, ..., 0, 1), so the
    discrete integration by parts holds exactly in the H inner product.
    """
    if n < 8:
        raise ValueError("need at least 8 radial nodes")
    H = np.ones(n)
    hb = np.array([17 / 48, 59 / 48, 43 / 48, 49 / 48])
    H[:4] = hb
    H[-4:] = hb[::-1]
    rows, cols, vals = [], [], []
    inner = [1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12]
    for j in range(4, n - 4):
        for k, c in zip(range(-2, 3), inner):
            if c:
                rows.append(j), cols.append(j + k), vals.append(c)
    B = np.array([[-24 / 17, 59 / 34, -4 / 17, -3 / 34, 0, 0],
                  [-1 / 2, 0, 1 / 2, 0, 0, 0],
                  [4 / 43, -59 / 86, 0, 59 / 86, -4 / 43, 0],
                  [3 / 98, 0, -59 / 98, 0, 32 / 49, -4 / 49]])
    for i in range(4):
        for k in range(6):
            if B[i, k]:
                rows.append(i), cols.append(k), vals.append(B[i, k])
                rows.append(n - 1 - i), cols.append(n - 1 - k), vals.append(-B[i, k])
    D = sps.csr_matrix((vals, (rows, cols)), shape=(n, n)) / h
    return D, H * h


def _polar_components(F: Field):
    """(P, Q) = rho * (F_rho, F_theta) for a 2-component field."""
    g = F.grid
    x, y = g.xy()
    cx, cy = g.spec.center
    X, Y = x - cx, y - cy
    Fx, Fy = F.values[0], F.values[1]
    return X * Fx + Y * Fy, -Y * Fx + X * Fy


def _from_polar_components(grid: LogPolarGrid, P, Q) -> np.ndarray:
    x, y = grid.xy()
    cx, cy = grid.spec.center
    X, Y = x - cx, y - cy
    r2 = X**2 + Y**2
    return np.stack([(X * P - Y * Q) / r2, (Y * P + X * Q) / r2])


def _ik(M: int) -> np.ndarray:
    ik = 1j * np.arange(M // 2 + 1)
    if M % 2 == 0:
        ik[-1] = 0.0  # Nyquist derivative dropped, as in the grid gradient
    return ik


def sbp_gradient(f: Field) -> Field:
    """Gradient with the summation-by-parts operator in t and spectral theta.

    This is the discrete gradient under which ``hodge_decompose`` is exactly
    orthogonal.
    """
    g = f.grid
    D, _ = sbp_first_derivative(g.n_radial, g.dt)
    out = np.empty((2 * f.n_components,) + g.shape)
    for c in range(f.n_components):
        ft = D @ f.values[c]
        fth = d_theta(f.values[c])
        inv = np.exp(-g.t)[:, None]
        co, si = np.cos(g.theta)[None, :], np.sin(g.theta)[None, :]
        out[2 * c] = co * ft * inv - si * fth * inv
        out[2 * c + 1] = si * ft * inv + co * fth * inv
    return Field(g, out)


def sbp_weights(grid: LogPolarGrid) -> np.ndarray:
    """Per-node area weights rho^2 H_j dtheta of the summation-by-parts norm."""
    _, H = sbp_first_derivative(grid.n_radial, grid.dt)
    return np.repeat((H * grid.rho**2 * grid.dtheta)[:, None], grid.n_theta, axis=1)


def hodge_decompose(F: Field) -> Tuple[Field, Field]:
    """F = grad C + rot D on a disk, C = 0 on the boundary circle.

    Per Fourier mode, C is the least-squares gradient part of F and D the
    least-squares rotated-gradient part of the remainder, both for the
    summation-by-parts gradient (``sbp_gradient``) and its norm
    (``sbp_weights``).  In that discrete structure grad C and rot D are
    exactly orthogonal, so the energy split holds up to the (truncation-level)
    residual.  Non-zero modes of C are pinned to 0 on the innermost ring.
    Energies, the cross term and the relative residual are stored in C.meta.
    """
    g = F.grid
    if not g.spec.is_disk:
        raise ValueError("hodge_decompose works on disks; annuli carry periods")
    if F.n_components != 2:
        raise ValueError("F must have two components")
    N, M = g.n_radial, g.n_theta
    P, Q = _polar_components(F)
    Ph = np.fft.rfft(P, axis=1)
    Qh = np.fft.rfft(Q, axis=1)
    Dt, H = sbp_first_derivative(N, g.dt)
    Hm = sps.diags(H)
    DtH = (Dt.T @ Hm).tocsr()
    DtHDt = (DtH @ Dt).tocsc()
    ik = _ik(M)
    Ch = np.zeros((N, len(ik)), complex)
    Dh = np.zeros((N, len(ik)), complex)
    for n in range(len(ik)):
        A = (DtHDt + abs(ik[n]) ** 2 * Hm).tocsc()
        keepC = np.arange(N - 1) if n == 0 else np.arange(1, N - 1)
        rhsC = DtH @ Ph[:, n] + np.conj(ik[n]) * (H * Qh[:, n])
        Ch[keepC, n] = _solve_real(splu(A[keepC][:, keepC].tocsc()), rhsC[keepC])
        RP = Ph[:, n] - Dt @ Ch[:, n]
        RQ = Qh[:, n] - ik[n] * Ch[:, n]
        rhsD = DtH @ RQ - np.conj(ik[n]) * (H * RP)
        keepD = np.arange(N - 1) if n == 0 else np.arange(N)
        Dh[keepD, n] = _solve_real(splu(A[keepD][:, keepD].tocsc()), rhsD[keepD])
    C = Field(g, np.fft.irfft(Ch, n=M, axis=1))
    D = Field(g, np.fft.irfft(Dh, n=M, axis=1))
    hodge_identities(F, C, D, store=True)
    return C, D


def hodge_identities(F: Field, C: Field, D: Field, store: bool = False) -> dict:
    """Energies, cross term and residual of F = grad C + rot D in the SBP structure."""
    w = sbp_weights(F.grid)
    gC = sbp_gradient(C).values
    gD = sbp_gradient(D).values
    rotD = np.stack([-gD[1], gD[0]])
    res = F.values - gC - rotD
    eF = float(np.sum(w * np.sum(F.values**2, axis=0)))
    out = dict(energy_F=eF, energy_C=float(np.sum(w * np.sum(gC**2, axis=0))),
               energy_D=float(np.sum(w * np.sum(gD**2, axis=0))),
               cross=float(np.sum(w * np.sum(gC * rotD, axis=0))),
               residual=float(np.sqrt(np.sum(w * np.sum(res**2, axis=0)) / max(eF, 1e-300))))
    if store:
        C.meta.update(out)
    return out


def _solve_real(lu, rhs):
    rhs = np.asarray(rhs)
    return lu.solve(np.ascontiguousarray(rhs.real)) + 1j * lu.solve(np.ascontiguousarray(rhs.imag))


def rot_gradient(f: Field) -> Field:
    """rot f = (-f_y, f_x) for a scalar field."""
    gv = gradient(f).values
    return Field(f.grid, np.stack([-gv[1], gv[0]]))


# --------------------------------------------------- first-order systems
@dataclass
class PotentialInfo:
    compatibility: float
    period: float
    d0: float
    c0: float


def potential_from_gradient(G: Field) -> Tuple[Field, PotentialInfo]:
    """Integrate a closed 2-component field: G = grad phi + (period / 2 pi) grad theta.

    The radial mean of phi comes from integrating rho G_rho in t, the other
    modes from the angular component.  ``d0`` is the least-squares slope of the
    radial mean against log(rho).
    """
    g = G.grid
    P, Q = _polar_components(G)
    Pt = d_t(Q, g.dt) - d_theta(P)
    w = (g.ring_weight / g.rho**2)[:, None]
    num = np.sqrt(np.sum(w * Pt**2))
    den = np.sqrt(np.sum(w * (P**2 + Q**2)))
    compat = float(num / den) if den > 0 else 0.0
    M = g.n_theta
    Ph = np.fft.rfft(P, axis=1) / M
    Qh = np.fft.rfft(Q, axis=1) / M
    out = np.zeros_like(Ph)
    out[:, 0] = cumulative_simpson(Ph[:, 0].real, dx=g.dt, initial=0.0)
    n = np.arange(1, Ph.shape[1])
    out[:, 1:] = Qh[:, 1:] / (1j * n[None, :])
    if M % 2 == 0:
        out[:, -1] = 0.0
    period = float(2 * np.pi * np.mean(Qh[:, 0].real))
    phi = np.fft.irfft(out * M, n=M, axis=1)
    mean = out[:, 0].real
    d0, c0 = np.polyfit(g.t, mean, 1)
    return Field(g, phi), PotentialInfo(compat, period, float(d0), float(c0))


def first_order_field(pairs) -> Field:
    """G = sum_i a_i rot(b_i)."""
    a0 = pairs[0][0]
    G = np.zeros((2,) + a0.grid.shape)
    for a, b in pairs:
        _check_same_grid(a, b)
        G += a.values[0][None] * rot_gradient(b).values
    return Field(a0.grid, G)


def first_order_reconstruct(pairs, spec: Optional[AnnulusSpec] = None, tol: float = 1e-4,
                            G: Optional[Field] = None):
    """Recover phi with grad phi = sum a_i rot(b_i); returns (phi, compatibility).

    ``phi.meta`` holds d0, the period and the relative gradient mismatch.
    Raises ValueError when the field is not closed to within ``tol``.
    """
    G = first_order_field(pairs) if G is None else G
    if spec is not None and G.grid.spec != spec:
        raise ValueError("pairs do not live on the given domain")
    phi, info = potential_from_gradient(G)
    if info.compatibility > tol:
        raise ValueError(f"field is not closed: compatibility defect {info.compatibility:.3g} > {tol}")
    gphi = gradient(phi).values
    theta_part = info.period / (2 * np.pi) * _grad_theta(G.grid)
    mismatch = np.sqrt(np.sum(G.grid.cell_area * np.sum((gphi + theta_part - G.values) ** 2, axis=0)))
    scale = np.sqrt(np.sum(G.grid.cell_area * np.sum(G.values**2, axis=0)))
    phi.meta.update(d0=info.d0, period=info.period, grad_mismatch=float(mismatch / max(scale, 1e-300)))
    return phi, info.compatibility


def _grad_theta(grid: LogPolarGrid) -> np.ndarray:
    x, y = grid.xy()
    cx, cy = grid.spec.center
    X, Y = x - cx, y - cy
    r2 = X**2 + Y**2
    return np.stack([-Y / r2, X / r2])


def first_order_bound_ratio(phi: Field, pairs) -> float:
    """|d0(phi)| log(1/eps) / sum ||grad a_i||_2 ||grad b_i||_2 on the annulus."""
    g = phi.grid
    den = sum(gradient_l2(a) * gradient_l2(b) for a, b in pairs)
    return float(abs(phi.meta["d0"]) * np.log(g.spec.r_outer / g.spec.r_inner) / den) if den > 0 else 0.0


# ---------------------------------------------- sphere-map conservation law
@dataclass
class ConservationPotential:
    """b[i, j] with grad b^{ij} = rot-dual of w^{ij} = u^i grad u^j - u^j grad u^i."""

    b: Field                 # m*m components, b[i*m + j], antisymmetric
    period: np.ndarray       # flux of w^{ij} through circles (the period of b^{ij})
    circulation: np.ndarray  # circle integral of w^{ij} . tangent
    m: int

    def entry(self, i: int, j: int) -> Field:
        return self.b.component(i * self.m + j)

    def grad_entry(self, i: int, j: int) -> np.ndarray:
        """Gradient of the multivalued b^{ij}, including the period part."""
        gb = gradient(self.entry(i, j)).values
        return gb + self.period[i, j] / (2 * np.pi) * _grad_theta(self.b.grid)


def _ring_integrals(V: np.ndarray, grid: LogPolarGrid):
    """Per-ring flux and circulation of a Cartesian 2-vector field."""
    x, y = grid.xy()
    cx, cy = grid.spec.center
    X, Y = x - cx, y - cy
    flux = (X * V[0] + Y * V[1]).sum(axis=1) * grid.dtheta
    circ = (-Y * V[0] + X * V[1]).sum(axis=1) * grid.dtheta
    return flux, circ


def conservation_law_potential(u: Field, grad_u: Optional[Field] = None, tol: float = 1e-6,
                               sphere_tol: float = 1e-6) -> ConservationPotential:
    """Potentials b^{ij} of the closed forms star(u^i du^j - u^j du^i) on an annulus."""
    g = u.grid
    if np.max(np.abs(np.sum(u.values**2, axis=0) - 1.0)) > sphere_tol:
        raise ValueError("u is not sphere-valued")
    gu = gradient(u).values if grad_u is None else grad_u.values
    m = u.n_components
    B = np.zeros((m * m,) + g.shape)
    period = np.zeros((m, m))
    circ = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            wx = u.values[i] * gu[2 * j] - u.values[j] * gu[2 * i]
            wy = u.values[i] * gu[2 * j + 1] - u.values[j] * gu[2 * i + 1]
            fl, ci = _ring_integrals(np.stack([wx, wy]), g)
            scale = max(float(np.mean(np.abs(fl))), float(np.mean(np.abs(ci))),
                        float(np.mean(np.sqrt(wx**2 + wy**2).sum(axis=1) * g.dtheta * g.rho)), 1e-300)
            if np.ptp(fl) > tol * scale:
                raise ValueError(f"period of ({i},{j}) varies with the radius by {np.ptp(fl) / scale:.3g}")
            bij, info = potential_from_gradient(Field(g, np.stack([-wy, wx])))
            B[i * m + j] = bij.values[0]
            B[j * m + i] = -bij.values[0]
            period[i, j], period[j, i] = info.period, -info.period
            circ[i, j], circ[j, i] = ci.mean(), -ci.mean()
    return ConservationPotential(Field(g, B), period, circ, m)


def conservation_decomposition(u: Field, pot: ConservationPotential, grad_u: Optional[Field] = None):
    """Fit grad u^i = sum_j u^j rot b^{ij} + rot c^i + d^i grad log(rho).

    Returns (c, d, residual) with residual ||.||_2 / ||grad u||_2 per component.
    """
    g = u.grid
    gu = gradient(u).values if grad_u is None else grad_u.values
    m = pot.m
    x, y = g.xy()
    X, Y = x - g.spec.center[0], y - g.spec.center[1]
    r2 = X**2 + Y**2
    glog = np.stack([X / r2, Y / r2])
    cs, ds, res = [], [], []
    for i in range(m):
        V = gu[2 * i:2 * i + 2].copy()
        for j in range(m):
            if j == i:
                continue
            gb = pot.grad_entry(i, j)
            V -= u.values[j][None] * np.stack([-gb[1], gb[0]])
        fl, _ = _ring_integrals(V, g)
        d = float(fl.mean() / (2 * np.pi))
        Vp = V - d * glog
        c, _ = potential_from_gradient(Field(g, np.stack([Vp[1], -Vp[0]])))
        rc = rot_gradient(c).values
        r = V - rc - d * glog
        num = np.sqrt(np.sum(g.cell_area * np.sum(r**2, axis=0)))
        den = np.sqrt(np.sum(g.cell_area * np.sum(gu[2 * i:2 * i + 2] ** 2, axis=0)))
        cs.append(c)
        ds.append(d)
        res.append(float(num / den) if den > 0 else 0.0)
    return cs, np.array(ds), np.array(res)


def sphere_first_order_instance(f, eps: float, n_theta: int = 128, per_octave: int = 128) -> dict:
    """Run the first-order reconstruction on the conservation-law form of a sphere map.

    For a harmonic sphere map u (here the lift of a rational map)
    grad u^i = sum_j u^j rot b^{ij}; the pairs (u^j, b^{ij}) are fed to
    ``first_order_reconstruct`` and the result is compared with u^i itself.
    """
    from .spheremaps import map_field, map_gradient

    g = annulus_grid(eps, 1.0, n_theta=n_theta, per_octave=per_octave)
    u = map_field(f, g)
    gu = map_gradient(f, g)
    pot = conservation_law_potential(u, gu)
    m = pot.m
    err, compat, ratio, d0 = 0.0, 0.0, 0.0, []
    for i in range(m):
        pairs = [(u.component(j), pot.entry(i, j)) for j in range(m) if j != i]
        G = np.zeros((2,) + g.shape)
        for j in range(m):
            if j != i:
                gb = pot.grad_entry(i, j)
                G += u.values[j][None] * np.stack([-gb[1], gb[0]])
        phi, c = first_order_reconstruct(pairs, G=Field(g, G))
        diff = phi.values[0] - u.values[i]
        err = max(err, float(np.max(np.abs(diff - np.mean(diff)))))
        compat = max(compat, c)
        ratio = max(ratio, first_order_bound_ratio(phi, pairs))
        d0.append(phi.meta["d0"])
    return dict(epsilon=eps, recon_error=err, compatibility=compat, d0_ratio=ratio,
                d0_max=float(np.max(np.abs(d0))))


def first_order_sweep(eps_list: Sequence[float], seeds: Sequence[int], inner_pole: bool = True,
                      n_theta: int = 128, per_octave: int = 128) -> List[dict]:
    """Random rational maps, one per seed, reused across the eps ladder."""
    from .spheremaps import random_rational_map

    rows = []
    for seed in seeds:
        for eps in eps_list:
            rng = np.random.Generator(np.random.PCG64(seed))
            f = random_rational_map(rng, inner_eps=eps if inner_pole else 0.0)
            row = sphere_first_order_instance(f, eps, n_theta, per_octave)
            row["seed"] = seed
            rows.append(row)
    return rows
