"""Sphere-valued test maps: stereographic lifts of rational functions.

For f = P/Q the lift is

    u = (2 Re(P conj Q), 2 Im(P conj Q), |P|^2 - |Q|^2) / (|P|^2 + |Q|^2)

which stays bounded through the poles of f.  Gradients are assembled with
the product rule from P, P', Q, Q' so nothing is divided by a small number.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .grid import Field, LogPolarGrid


@dataclass
class PoleTerm:
    """(mu / (z - a))^d."""

    a: complex
    mu: complex
    d: int = 1


@dataclass
class RationalMap:
    """f(z) = g(z) + sum_i (mu_i / (z - a_i))^{d_i} with g a polynomial.

    ``g`` holds ascending polynomial coefficients.
    """

    g: Sequence[complex] = (0.0,)
    poles: List[PoleTerm] = field(default_factory=list)

    @property
    def degree(self) -> int:
        return max(len(np.trim_zeros(np.asarray(self.g, complex), "b")) - 1, 0) + sum(p.d for p in self.poles)

    def pq(self, z: np.ndarray):
        """Return P, P', Q, Q' with f = P / Q, in factored form."""
        z = np.asarray(z, dtype=complex)
        g = np.polynomial.polynomial.polyval(z, np.asarray(self.g, complex))
        gd = np.polynomial.polynomial.polyval(z, np.polynomial.polynomial.polyder(np.asarray(self.g, complex)))
        Q = np.ones_like(z)
        Qd = np.zeros_like(z)
        # numerators of each pole term over the common denominator
        facs = []
        for p in self.poles:
            w = z - p.a
            fv = w ** p.d
            fd = p.d * w ** (p.d - 1)
            facs.append((fv, fd))
            Qd = Qd * fv + Q * fd
            Q = Q * fv
        P = g * Q
        Pd = gd * Q + g * Qd
        for i, p in enumerate(self.poles):
            rest = np.ones_like(z)
            rest_d = np.zeros_like(z)
            for j, (fv, fd) in enumerate(facs):
                if j == i:
                    continue
                rest_d = rest_d * fv + rest * fd
                rest = rest * fv
            c = p.mu ** p.d
            P = P + c * rest
            Pd = Pd + c * rest_d
        return P, Pd, Q, Qd

    def __call__(self, z):
        P, _, Q, _ = self.pq(z)
        return P / Q


def lift(P, Q) -> np.ndarray:
    S = np.abs(P) ** 2 + np.abs(Q) ** 2
    W = P * np.conj(Q)
    return np.stack([2 * W.real, 2 * W.imag, np.abs(P) ** 2 - np.abs(Q) ** 2]) / S


def lift_gradient(P, Pd, Q, Qd) -> np.ndarray:
    """Cartesian gradient of the lift, ordered (dx u0, dy u0, dx u1, ...)."""
    S = np.abs(P) ** 2 + np.abs(Q) ** 2
    W = P * np.conj(Q)
    N = [2 * W.real, 2 * W.imag, np.abs(P) ** 2 - np.abs(Q) ** 2]
    # d/dx and d/dy of P are P' and i P'
    out = []
    for dP, dQ in ((Pd, Qd), (1j * Pd, 1j * Qd)):
        dW = dP * np.conj(Q) + P * np.conj(dQ)
        dPP = 2 * np.real(dP * np.conj(P))
        dQQ = 2 * np.real(dQ * np.conj(Q))
        dS = dPP + dQQ
        dN = [2 * dW.real, 2 * dW.imag, dPP - dQQ]
        out.append([(dn * S - n * dS) / S**2 for n, dn in zip(N, dN)])
    gx, gy = out
    res = np.empty((6,) + np.shape(P))
    for c in range(3):
        res[2 * c] = gx[c]
        res[2 * c + 1] = gy[c]
    return res


def energy_density_pq(P, Pd, Q, Qd) -> np.ndarray:
    """|grad u|^2 = 8 |P'Q - PQ'|^2 / (|P|^2 + |Q|^2)^2."""
    S = np.abs(P) ** 2 + np.abs(Q) ** 2
    return 8.0 * np.abs(Pd * Q - P * Qd) ** 2 / S**2


def map_field(f: RationalMap, grid: LogPolarGrid) -> Field:
    P, _, Q, _ = f.pq(grid.z())
    return Field(grid, lift(P, Q))


def map_gradient(f: RationalMap, grid: LogPolarGrid) -> Field:
    return Field(grid, lift_gradient(*f.pq(grid.z())))


def map_density(f: RationalMap) -> Callable:
    """Vectorized energy density (x, y) -> |grad u|^2."""
    def dens(x, y):
        return energy_density_pq(*f.pq(np.asarray(x) + 1j * np.asarray(y)))
    return dens


def bubble(degree: int = 1, scale: float = 1.0, center: complex = 0.0) -> RationalMap:
    """Stereographic lift of (scale/(z - center))^degree, energy 8 pi degree."""
    return RationalMap(g=(0.0,), poles=[PoleTerm(complex(center), complex(scale), int(degree))])


def equator_field(grid: LogPolarGrid) -> Field:
    x, y = grid.xy()
    cx, cy = grid.spec.center
    r = np.hypot(x - cx, y - cy)
    return Field(grid, np.stack([(x - cx) / r, (y - cy) / r, np.zeros_like(r)]))


def random_rational_map(rng: np.random.Generator, n_poles: int = 2, inner_eps: float = 0.0) -> RationalMap:
    """Linear polynomial plus simple poles with |a| in (1.5, 3).

    With ``inner_eps`` > 0 a small pole (mu = 0.1 eps at distance 0.3 eps from
    the origin) is added, so the map also has structure inside B_eps.
    """
    g = tuple(0.3 * (rng.standard_normal(2) + 1j * rng.standard_normal(2)))
    poles = []
    for _ in range(n_poles):
        a = rng.uniform(1.5, 3.0) * np.exp(2j * np.pi * rng.uniform())
        poles.append(PoleTerm(a, complex(rng.uniform(0.3, 1.0)), 1))
    if inner_eps > 0:
        poles.append(PoleTerm(0.3 * inner_eps * np.exp(2j * np.pi * rng.uniform()), 0.1 * inner_eps, 1))
    return RationalMap(g, poles)
