"""Decreasing rearrangements and Lorentz norms of sampled fields.

A sampled field with quadrature weights is a step function, so its
decreasing rearrangement f* is a staircase and f**(s) = (1/s) int_0^s f*
is exactly ``v_k + c_k / s`` on the k-th step (and ``S / s`` past the total
measure).  All norms below integrate those pieces in closed form.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from math import comb
from typing import Optional, Union

import numpy as np

from .grid import AnnulusSpec, Field, _check_same_grid


@dataclass(frozen=True)
class StepRearrangement:
    """Staircase f*: ``values`` strictly decreasing (>= 0), ``measures`` > 0."""

    values: np.ndarray
    measures: np.ndarray

    @property
    def total_measure(self) -> float:
        return float(np.sum(self.measures))

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.measures)

    def __len__(self):
        return len(self.values)

    def steps(self):
        return list(zip(self.values.tolist(), self.measures.tolist()))

    def scaled(self, c: float) -> "StepRearrangement":
        c = abs(float(c))
        if c == 0:
            return StepRearrangement(np.zeros(1), np.array([self.total_measure]))
        return StepRearrangement(self.values * c, self.measures)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cumulative_measure", "value"])
            for m, v in zip(self.cumulative, self.values):
                w.writerow([repr(float(m)), repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "StepRearrangement":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        cum, vals = data[:, 0], data[:, 1]
        return cls(vals, np.diff(np.concatenate([[0.0], cum])))


@dataclass(frozen=True)
class LorentzNorm:
    p: float
    q: float
    value: float
    method: str  # "maximal-function" or "level-set"

    def __float__(self):
        return self.value


def rearrange_values(values: np.ndarray, weights: np.ndarray) -> StepRearrangement:
    """Staircase of |values| against cell ``weights``; equal values are merged."""
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    keep = w > 0
    v, w = v[keep], w[keep]
    if v.size == 0:
        raise ValueError("empty region")
    uniq, inv = np.unique(v, return_inverse=True)
    meas = np.bincount(inv, weights=w, minlength=uniq.size)
    return StepRearrangement(uniq[::-1].copy(), meas[::-1].copy())


def rearrange(f: Field, region: Optional[AnnulusSpec] = None) -> StepRearrangement:
    """Decreasing rearrangement of |f| (pointwise Euclidean norm for vector fields)."""
    vals = f.values[0] if f.n_components == 1 else np.sqrt(np.sum(f.values**2, axis=0))
    return rearrange_values(vals, f.grid.region_weights(region))


def _staircase(x, region) -> StepRearrangement:
    if isinstance(x, StepRearrangement):
        return x
    return rearrange(x, region)


def _pieces(st: StepRearrangement):
    v = st.values
    mu = st.measures
    T = np.cumsum(mu)
    T0 = T - mu
    T0[0] = 0.0
    S = np.cumsum(v * mu)
    S0 = S - v * mu
    S0[0] = 0.0
    c = np.maximum(S0 - v * T0, 0.0)  # f** = v + c/s on (T0, T]
    return v, mu, T0, T, c, S[-1]


def _power_integral(s0, mu, e):
    """int_{s0}^{s0+mu} s^{e-1} ds for s0 > 0, computed without cancellation."""
    lr = np.log1p(mu / s0)
    if e == 0:
        return lr
    return s0**e * np.expm1(e * lr) / e


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _piece_integral_general(v, c, s0, mu, a, q):
    """int s^{a-1} (v + c/s)^q ds over (s0, s0+mu) by Gauss-Legendre in log s."""
    lr = np.log1p(mu / s0)
    nsub = np.maximum(1, np.ceil(lr / 0.25)).astype(int)
    idx = np.repeat(np.arange(v.size), nsub)
    part = np.concatenate([np.arange(n) for n in nsub]) if idx.size else np.zeros(0, int)
    h = lr[idx] / nsub[idx]
    u0 = np.log(s0[idx]) + part * h
    uu = u0[:, None] + 0.5 * h[:, None] * (_GL_X[None, :] + 1.0)
    s = np.exp(uu)
    integrand = s**a * (v[idx, None] + c[idx, None] / s) ** q  # ds = s du
    vals = 0.5 * h * (integrand @ _GL_W)
    return np.bincount(idx, weights=vals, minlength=v.size)


def lorentz_value(st: StepRearrangement, p: float, q: float) -> float:
    if not (1.0 < p < np.inf):
        raise ValueError(f"p must lie in (1, inf), got {p}")
    if not (q >= 1.0):
        raise ValueError(f"q must be >= 1, got {q}")
    v, mu, T0, T, c, S = _pieces(st)
    A = T[-1]
    if S == 0.0:
        return 0.0
    if np.isinf(q):
        # t^{1/p} f** has no interior maximum on a step: check breakpoints
        Sk = np.cumsum(v * mu)
        return float(np.max(Sk * T ** (1.0 / p - 1.0)))
    a = q / p
    total = v[0] ** q * T[0] ** a / a  # first step: f** = v_0
    if v.size > 1:
        vv, cc, ss, mm = v[1:], c[1:], T0[1:], mu[1:]
        if float(q).is_integer():
            qi = int(q)
            acc = np.zeros_like(vv)
            for j in range(qi + 1):
                acc += comb(qi, j) * vv ** (qi - j) * cc**j * _power_integral(ss, mm, a - j)
            total += float(np.sum(acc))
        else:
            total += float(np.sum(_piece_integral_general(vv, cc, ss, mm, a, q)))
    total += S**q * A ** (a - q) / (q - a)  # tail: f** = S/s
    return float(total ** (1.0 / q))


def lorentz_norm(f: Union[Field, StepRearrangement], p: float, q: float,
                 region: Optional[AnnulusSpec] = None) -> LorentzNorm:
    """||f||_{p,q} from the f** definition, exact on the staircase."""
    st = _staircase(f, region)
    return LorentzNorm(float(p), float(q), lorentz_value(st, p, q), "maximal-function")


def l21_levelset(f: Union[Field, StepRearrangement], region: Optional[AnnulusSpec] = None) -> LorentzNorm:
    """||f||_{2,1} = 4 int_0^inf |{|f| >= s}|^{1/2} ds, exact on the staircase."""
    st = _staircase(f, region)
    v = st.values
    drops = v - np.append(v[1:], 0.0)
    val = 4.0 * float(np.sum(np.sqrt(st.cumulative) * drops))
    return LorentzNorm(2.0, 1.0, val, "level-set")


def l2_norm(f: Union[Field, StepRearrangement], region: Optional[AnnulusSpec] = None) -> float:
    st = _staircase(f, region)
    return float(np.sqrt(np.sum(st.values**2 * st.measures)))


def _pointwise_abs(f: Field) -> np.ndarray:
    return np.abs(f.values[0]) if f.n_components == 1 else np.sqrt(np.sum(f.values**2, axis=0))


def duality_pairing(f: Field, g: Field, region: Optional[AnnulusSpec] = None) -> float:
    """int |f g| over the region (pointwise norms for vector fields)."""
    _check_same_grid(f, g)
    w = f.grid.region_weights(region)
    return float(np.sum(w * _pointwise_abs(f) * _pointwise_abs(g)))


def duality_bound(f: Field, g: Field, region: Optional[AnnulusSpec] = None) -> float:
    """||f||_{2,1} ||g||_{2,inf}, which dominates ``duality_pairing``."""
    _check_same_grid(f, g)
    return lorentz_norm(f, 2, 1, region).value * lorentz_norm(g, 2, np.inf, region).value
