"""Harmonic functions on annuli described by their Fourier data.

A real harmonic function on r < rho < R is

    h = c0 + d0 log(rho) + 2 Re sum_{n >= 1} (c_n rho^n + d_n rho^-n) e^{i n theta}

so ``modes[n] = (c_n, d_n)`` with n > 0 and the negative modes implied by
conjugation.  With this convention Re z has c_1 = 1/2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.integrate import quad

from .grid import AnnulusSpec, Field, LogPolarGrid, annulus_grid, mode_coefficients
from .lorentz import lorentz_norm

MAX_EXPONENT = 700.0


@dataclass
class HarmonicAnnulusFunction:
    c0: float = 0.0
    d0: float = 0.0
    modes: Dict[int, Tuple[complex, complex]] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for n, (c, d) in self.modes.items():
            n = int(n)
            if n == 0:
                raise ValueError("mode 0 is carried by c0, d0")
            if n < 0:  # fold onto n > 0 by conjugation
                n, c, d = -n, np.conj(c), np.conj(d)
            clean[n] = (complex(c), complex(d))
        self.modes = clean

    @property
    def max_mode(self) -> int:
        return max(self.modes, default=0)

    def copy(self, **kw) -> "HarmonicAnnulusFunction":
        args = dict(c0=self.c0, d0=self.d0, modes=dict(self.modes))
        args.update(kw)
        return HarmonicAnnulusFunction(**args)

    def scaled(self, s: float) -> "HarmonicAnnulusFunction":
        return HarmonicAnnulusFunction(self.c0 * s, self.d0 * s,
                                       {n: (c * s, d * s) for n, (c, d) in self.modes.items()})

    def _check_range(self, rho_min: float, rho_max: float):
        span = max(abs(np.log(rho_min)), abs(np.log(rho_max)))
        if self.max_mode * span > MAX_EXPONENT:
            raise OverflowError(f"mode {self.max_mode} overflows on [{rho_min}, {rho_max}]; truncate the series")

    def energy(self, r_inner: float, r_outer: float) -> float:
        """Exact Dirichlet energy on r_inner < rho < r_outer."""
        a, b = r_inner, r_outer
        e = 2 * np.pi * self.d0**2 * np.log(b / a)
        for n, (c, d) in self.modes.items():
            e += 4 * np.pi * n * (abs(c) ** 2 * (b ** (2 * n) - a ** (2 * n))
                                  + abs(d) ** 2 * (a ** (-2 * n) - b ** (-2 * n)))
        return float(e)

    def mean_at(self, rho: float) -> float:
        return float(self.c0 + self.d0 * np.log(rho))


def _traces_to_modes(trace: np.ndarray) -> np.ndarray:
    a = mode_coefficients(np.asarray(trace, dtype=float))
    if len(trace) % 2 == 0:
        a[-1] *= 0.5  # the Nyquist cosine is counted once, not twice
    return a


def fit_harmonic(inner_trace, outer_trace, spec: AnnulusSpec, tol: float = 0.0) -> HarmonicAnnulusFunction:
    """Harmonic function on ``spec`` with the given traces at equispaced angles."""
    inner_trace = np.asarray(inner_trace, dtype=float)
    outer_trace = np.asarray(outer_trace, dtype=float)
    if inner_trace.shape != outer_trace.shape:
        raise ValueError("traces must be sampled at the same angles")
    if spec.is_disk:
        raise ValueError("fit_harmonic needs an annulus (r_inner > 0)")
    r, R = spec.r_inner, spec.r_outer
    L = np.log(R / r)
    A = _traces_to_modes(inner_trace)
    B = _traces_to_modes(outer_trace)
    d0 = float((B[0].real - A[0].real) / L)
    c0 = float(A[0].real - d0 * np.log(r))
    modes = {}
    scale = max(np.max(np.abs(A)), np.max(np.abs(B)), 1e-300)
    for n in range(1, len(A)):
        if abs(A[n]) <= tol * scale and abs(B[n]) <= tol * scale:
            continue
        if A[n] == 0 and B[n] == 0:
            continue
        if n * L > MAX_EXPONENT:
            raise OverflowError(f"mode {n} with log(R/r) = {L:.3g} is overflow-prone; truncate the traces")
        # c rho^n = al (rho/R)^n, d rho^-n = be (r/rho)^n, s = r/R
        s = np.exp(-n * L)
        det = s * s - 1.0
        al = (A[n] * s - B[n]) / det
        be = (B[n] * s - A[n]) / det
        modes[n] = (al * R ** (-n), be * r ** n)
    return HarmonicAnnulusFunction(c0, d0, modes)


def _polar(grid: LogPolarGrid):
    return grid.rho[:, None], grid.theta[None, :]


def sample(h: HarmonicAnnulusFunction, grid: LogPolarGrid) -> Field:
    """Evaluate the series at the grid nodes (polar coordinates about the grid center)."""
    h._check_range(grid.rho[0], grid.rho[-1])
    rho, th = _polar(grid)
    out = h.c0 + h.d0 * np.log(rho) + np.zeros(grid.shape)
    for n, (c, d) in h.modes.items():
        amp = c * rho**n + d * rho ** (-n)
        out = out + 2.0 * np.real(amp * np.exp(1j * n * th))
    return Field(grid, out)


def polar_gradient_exact(h: HarmonicAnnulusFunction, grid: LogPolarGrid):
    """(d_rho h, rho^-1 d_theta h) from the series."""
    h._check_range(grid.rho[0], grid.rho[-1])
    rho, th = _polar(grid)
    hr = h.d0 / rho + np.zeros(grid.shape)
    ha = np.zeros(grid.shape)
    for n, (c, d) in h.modes.items():
        e = np.exp(1j * n * th)
        up = c * rho ** (n - 1)
        dn = d * rho ** (-n - 1)
        hr = hr + 2.0 * np.real(n * (up - dn) * e)
        ha = ha + 2.0 * np.real(1j * n * (up + dn) * e)
    return hr, ha


def gradient_exact(h: HarmonicAnnulusFunction, grid: LogPolarGrid) -> Field:
    hr, ha = polar_gradient_exact(h, grid)
    c = np.cos(grid.theta)[None, :]
    s = np.sin(grid.theta)[None, :]
    return Field(grid, np.stack([c * hr - s * ha, s * hr + c * ha]))


# ------------------------------------------------------------- power norms
def power_norm_l21(m: int, spec: AnnulusSpec, lam: float) -> float:
    """Exact level-set L^{2,1} norm of rho^m on B_lam \\ B_{eps/lam}, eps = spec.r_inner.

    Uses |{rho^m >= s}| in closed form and integrates in rho.
    """
    eps = spec.r_inner
    r, R = eps / lam, lam * spec.r_outer
    if not (0 < r < R):
        raise ValueError(f"empty annulus B_{R} \\ B_{r}")
    area = np.pi * (R * R - r * r)
    sp = np.sqrt(np.pi)
    if m == 0:
        return float(4 * np.sqrt(area))
    if m > 0:
        base = r**m * np.sqrt(area)
        integrand = lambda x: sp * np.sqrt(max(R * R - x * x, 0.0)) * m * x ** (m - 1)
    else:
        base = R**m * np.sqrt(area)
        integrand = lambda x: sp * np.sqrt(max(x * x - r * r, 0.0)) * (-m) * x ** (m - 1)
    # integrate in log rho so that each octave gets equal attention
    g = lambda u: integrand(np.exp(u)) * np.exp(u)
    pts = np.linspace(np.log(r), np.log(R), int(np.ceil(np.log2(R / r))) + 2)
    tot = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        tot += quad(g, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
    return float(4 * (base + tot))


def power_norm_bounds(m: int, spec: AnnulusSpec, lam: float) -> dict:
    """Reference bounds for ``power_norm_l21``.

    ``stated`` is the classical form of the bound, which omits the factor 4
    of the level-set formula; ``sharp`` follows from sqrt(x^2 - 1) <= x and holds
    for every m != -1.
    """
    eps = spec.r_inner
    r, R = eps / lam, lam * spec.r_outer
    sp = np.sqrt(np.pi)
    if m < -1:
        return {"stated": 2 * sp * r ** (m + 1),
                "sharp": 4 * sp * ((-m) / (-m - 1) * r ** (m + 1) + R ** (m + 1))}
    if m >= 0:
        return {"stated": sp * R**m, "sharp": 4 * sp * R ** (m + 1)}
    return {"stated": np.nan, "sharp": 4 * sp * (np.log(R / r) + 1.0)}


# ------------------------------------------------------ normalizations
def check_zero_outer(h: HarmonicAnnulusFunction, tol: float = 1e-10):
    """Zero outer trace and zero inner mean: c0 = d0 = 0 and c_n + d_n = 0."""
    if abs(h.c0) > tol:
        raise ValueError(f"zero-outer normalization: outer mean c0 = {h.c0} must vanish")
    if abs(h.d0) > tol:
        raise ValueError(f"zero-outer normalization: inner mean forces d0 = 0, got {h.d0}")
    for n, (c, d) in h.modes.items():
        if abs(c + d) > tol * max(1.0, abs(c)):
            raise ValueError(f"zero-outer normalization: mode {n} violates c_n + d_n = 0")


def project_zero_outer(h: HarmonicAnnulusFunction) -> HarmonicAnnulusFunction:
    return HarmonicAnnulusFunction(0.0, 0.0, {n: (c, -c) for n, (c, d) in h.modes.items()})


def check_bounded_mean(h: HarmonicAnnulusFunction, eps: float, K: float, tol: float = 1e-10):
    """Zero inner mean (c0 + d0 log eps = 0) and |outer mean| = |c0| <= K."""
    if abs(h.c0 + h.d0 * np.log(eps)) > tol * max(1.0, abs(h.c0)):
        raise ValueError("bounded-mean normalization: inner mean c0 + d0 log(eps) must vanish")
    if abs(h.c0) > K * (1 + tol):
        raise ValueError(f"bounded-mean normalization: |c0| = {abs(h.c0)} exceeds K = {K}")


def project_bounded_mean(h: HarmonicAnnulusFunction, eps: float, K: float) -> HarmonicAnnulusFunction:
    c0 = float(np.clip(h.c0, -K, K))
    return h.copy(c0=c0, d0=-c0 / np.log(eps))


def restricted_l21(h: HarmonicAnnulusFunction, r_inner: float, r_outer: float,
                   n_theta: int = 128, per_octave: int = 64) -> float:
    """||grad h||_{2,1} on r_inner < rho < r_outer from the exact gradient on a fresh grid."""
    g = annulus_grid(r_inner, r_outer, n_theta=n_theta, per_octave=per_octave)
    return lorentz_norm(gradient_exact(h, g), 2, 1).value


def zero_outer_ratio(h: HarmonicAnnulusFunction, eps: float, lam: float, n_theta: int = 128,
                   per_octave: int = 64, with_parts: bool = False):
    """||grad h||_{2,1}(B_1 \\ B_{lam eps}) / ||grad h||_2(B_1 \\ B_eps), lam > 1."""
    if lam <= 1:
        raise ValueError("zero-outer ratio needs lam > 1")
    check_zero_outer(h)
    num = restricted_l21(h, lam * eps, 1.0, n_theta, per_octave)
    den = np.sqrt(h.energy(eps, 1.0))
    ratio = num / den if den > 0 else 0.0
    return (ratio, num, den) if with_parts else ratio


def bounded_mean_ratio(h: HarmonicAnnulusFunction, eps: float, lam: float, K: float,
                   n_theta: int = 128, per_octave: int = 64, with_parts: bool = False):
    """||grad h||_{2,1}(B_lam \\ B_{eps/lam}) / (||grad h||_2(B_1 \\ B_eps) + 1), lam < 1."""
    if not (0 < lam < 1):
        raise ValueError("bounded-mean ratio needs 0 < lam < 1")
    check_bounded_mean(h, eps, K)
    num = restricted_l21(h, eps / lam, lam, n_theta, per_octave)
    den = np.sqrt(h.energy(eps, 1.0)) + 1.0
    ratio = num / den
    return (ratio, num, den) if with_parts else ratio


def counterexample_ratio(eps: float, lam: float = 2.0, n_theta: int = 64, per_octave: int = 64) -> float:
    """||grad phi||_{2,1}(B_1 \\ B_{lam eps}) / ||grad phi||_2(B_1 \\ B_eps) for
    phi = log(rho/eps)/log(1/eps); grows like log(1/eps)^{1/2}."""
    L = np.log(1.0 / eps)
    h = HarmonicAnnulusFunction(1.0, 1.0 / L)
    return restricted_l21(h, lam * eps, 1.0, n_theta, per_octave) / np.sqrt(h.energy(eps, 1.0))


# ------------------------------------------------------------- families
def _random_coeffs(rng: np.random.Generator, n_modes: int) -> np.ndarray:
    n = np.arange(1, n_modes + 1)
    return (rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes)) / n


def random_zero_outer_function(rng: np.random.Generator, eps: float, n_modes: int = 32,
                       coeffs: Optional[np.ndarray] = None) -> HarmonicAnnulusFunction:
    """Zero outer trace; the inner trace has the given (eps-independent) Fourier data."""
    g = _random_coeffs(rng, n_modes) if coeffs is None else coeffs
    modes = {}
    for n, gn in enumerate(g, start=1):
        # c (eps^n - eps^-n) = g with c = -d; written to avoid overflow
        c = -gn * eps**n / (1.0 - eps ** (2 * n))
        modes[n] = (c, -c)
    return HarmonicAnnulusFunction(0.0, 0.0, modes)


def random_bounded_mean_function(rng: np.random.Generator, eps: float, K: float = 1.0, n_modes: int = 32,
                       data: Optional[tuple] = None) -> HarmonicAnnulusFunction:
    """Zero inner mean, outer mean in [-K, K], random inner and outer oscillation."""
    if data is None:
        data = (rng.uniform(-K, K), _random_coeffs(rng, n_modes), _random_coeffs(rng, n_modes))
    c0, gin, gout = data
    modes = {}
    for n in range(1, len(gin) + 1):
        s = eps**n
        det = s * s - 1.0
        al = (gin[n - 1] * s - gout[n - 1]) / det
        be = (gout[n - 1] * s - gin[n - 1]) / det
        modes[n] = (al, be * eps**n)
    return HarmonicAnnulusFunction(float(c0), -float(c0) / np.log(eps), modes)


def harmonic_sweep(variant: str, eps_list, lam: float, seeds, n_modes: int = 32, K: float = 1.0,
                   n_theta: int = 128, per_octave: int = 64):
    """Rows (variant, epsilon, lambda, seed, n_modes, ratio, numerator, denominator).

    The coefficient data are drawn once per seed and reused across the eps ladder.
    """
    rows = []
    for seed in seeds:
        rng = np.random.Generator(np.random.PCG64(seed))
        if variant == "zero-outer":
            data = _random_coeffs(rng, n_modes)
        elif variant == "bounded-mean":
            data = (rng.uniform(-K, K), _random_coeffs(rng, n_modes), _random_coeffs(rng, n_modes))
        else:
            raise ValueError(f"unknown variant {variant!r}")
        for eps in eps_list:
            if variant == "zero-outer":
                h = random_zero_outer_function(rng, eps, n_modes, coeffs=data)
                ratio, num, den = zero_outer_ratio(h, eps, lam, n_theta, per_octave, with_parts=True)
            else:
                h = random_bounded_mean_function(rng, eps, K, n_modes, data=data)
                ratio, num, den = bounded_mean_ratio(h, eps, lam, K, n_theta, per_octave, with_parts=True)
            rows.append(dict(variant=variant, epsilon=eps, **{"lambda": lam}, seed=seed, n_modes=n_modes,
                             ratio=ratio, numerator=num, denominator=den))
    return rows
