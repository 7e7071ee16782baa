"""Command-line front end: sweeps, CSV emission and regression baselines.

Every experiment writes ``<out>/<experiment>.csv`` (a ``#`` comment line with
the generator and seeds, then a header row) and merges its assertions into
``<out>/summary.csv`` with columns experiment, metric, value, bound, pass.

Exit codes: 0 success, 2 invalid configuration, 3 failed assertion,
4 regression against a baseline.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import partial
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .quantization import bubble_on_bubble, one_bubble, two_bubbles

EXPERIMENTS = ("lorentz-check", "wente-sweep", "harmonic-sweep", "lr1-sweep", "first-order-sweep",
               "weak-l2", "partition-fuzz", "bubble-demo", "pohozaev")
EXIT_OK, EXIT_CONFIG, EXIT_ASSERTION, EXIT_REGRESSION = 0, 2, 3, 4
GENERATOR = "numpy.random.PCG64"
SUMMARY_FIELDS = ("experiment", "metric", "value", "bound", "pass")
LEADING = ("variant", "family", "check", "seed", "case", "k", "node_id", "r", "epsilon", "neck_total",
           "neck_angular", "neck_radial", "ledger_residual")
DEFAULT_LADDER = [2.0**-j for j in range(6, 13)]


class ConfigError(ValueError):
    pass


def _is_pow2(x: float) -> bool:
    if x <= 0:
        return False
    m, _ = math.frexp(x)
    return m == 0.5


@dataclass
class SweepConfig:
    experiment: str
    eps: List[float] = field(default_factory=lambda: list(DEFAULT_LADDER))
    lam: Optional[float] = None
    n_theta: int = 64
    per_octave: int = 64
    seeds: List[int] = field(default_factory=lambda: list(range(20)))
    out: str = "results"
    baseline: Optional[str] = None
    variant: Optional[str] = None
    ks: List[int] = field(default_factory=lambda: list(range(5, 13)))
    radii: List[float] = field(default_factory=lambda: [0.5])
    cases: Optional[int] = None
    family: str = "one-bubble"

    def validate(self) -> "SweepConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if not self.eps:
            raise ConfigError("empty epsilon ladder")
        for e in self.eps:
            if not (isinstance(e, (int, float)) and 0 < e <= 0.25 and _is_pow2(float(e))):
                raise ConfigError(f"epsilon {e!r} must be a power of two in (0, 1/4]")
        for name in ("n_theta", "per_octave"):
            v = getattr(self, name)
            if not (isinstance(v, int) and 64 <= v <= 4096 and _is_pow2(v)):
                raise ConfigError(f"{name} = {v!r} must be a power of two in [64, 4096]")
        if not self.seeds or any(not isinstance(s, int) or s < 0 for s in self.seeds):
            raise ConfigError("seeds must be a non-empty list of non-negative integers")
        if self.lam is not None and not self.lam > 0:
            raise ConfigError("lam must be positive")
        if self.cases is not None and self.cases < 1:
            raise ConfigError("cases must be positive")
        if not self.ks or any(not isinstance(k, int) or k < 1 for k in self.ks):
            raise ConfigError("ks must be a non-empty list of positive integers")
        if any(not 0 < r < 1 for r in self.radii):
            raise ConfigError("neck radii must lie in (0, 1)")
        if self.family not in BUBBLE_FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if "experiment" not in d:
            raise ConfigError("config needs an experiment")
        d = dict(d)
        if isinstance(d.get("seeds"), int):
            d["seeds"] = list(range(d["seeds"]))
        return cls(**d).validate()


@dataclass
class BaselineRecord:
    experiment: str
    metric: str
    value: float
    tolerance: float

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ConfigError(f"baseline tolerance for {self.experiment}/{self.metric} must be positive")


@dataclass
class Result:
    rows: List[dict]
    assertions: List[dict]
    files: Dict[str, str] = field(default_factory=dict)


# ---------------------------------------------------------------- helpers
def workers() -> int:
    try:
        return max(1, int(os.environ.get("ANNULAB_WORKERS", "1")))
    except ValueError:
        return 1


def pmap(fn: Callable, items: Sequence) -> list:
    """Map over independent cells, in a process pool when ANNULAB_WORKERS > 1."""
    n = workers()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def assertion(experiment: str, metric: str, value: float, bound: float, ok: bool) -> dict:
    return {"experiment": experiment, "metric": metric, "value": float(value), "bound": float(bound),
            "pass": bool(ok)}


def plateau(rows: List[dict], key: str = "ratio", group: str = "seed") -> float:
    """max over groups of max_eps value(eps) / value(largest eps)."""
    worst = 0.0
    for g in sorted({r[group] for r in rows}):
        sel = sorted((r for r in rows if r[group] == g), key=lambda r: -r["epsilon"])
        ref = sel[0][key]
        if ref > 0:
            worst = max(worst, max(r[key] for r in sel) / ref)
    return worst


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, complex):
        return repr(v)
    return str(v)


def _parse(v: str):
    if v in ("true", "false"):
        return v == "true"
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


def write_csv(path: Path, rows: List[dict], comment: Optional[str] = None, keys: Optional[Sequence[str]] = None):
    if not keys:
        present = {k for r in rows for k in r}
        keys = [k for k in LEADING if k in present] + sorted(present - set(LEADING))
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r.get(k, "")) for k in keys])


def read_csv(path: Path) -> List[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return [{k: _parse(v) for k, v in r.items()} for r in csv.DictReader(lines)]


def _sort_rows(rows: List[dict]) -> List[dict]:
    def key(r):
        return tuple((k, str(type(r[k]).__name__), r[k] if not isinstance(r[k], complex) else abs(r[k]))
                     for k in ("variant", "family", "check", "seed", "k", "node_id", "r", "epsilon", "case")
                     if k in r)
    return sorted(rows, key=key)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# ------------------------------------------------------------ experiments
def _lorentz_case(seed: int, n_theta: int, per_octave: int) -> dict:
    from .grid import Field, annulus_grid
    from .lorentz import duality_bound, duality_pairing, l2_norm, lorentz_norm

    rng = _rng(seed)
    g = annulus_grid(0.25, 1.0, n_theta=n_theta, per_octave=per_octave)
    rho = g.rho[:, None]

    def field_():
        return Field(g, rng.standard_normal(g.shape) * rho ** (-rng.uniform(0, 0.9)))

    f, h = field_(), field_()
    n21, n22, ninf = (lorentz_norm(f, 2, q).value for q in (1, 2, np.inf))
    l2 = l2_norm(f)
    c = float(rng.uniform(0.1, 10))
    tol = 1e-12
    return dict(seed=seed,
                duality=int(duality_pairing(f, h) > duality_bound(f, h) * (1 + tol)),
                nesting=int(ninf > n22 * (1 + tol) or n22 > n21 * (1 + tol)),
                sandwich=int(l2 > n22 * (1 + tol) or n22 > 2 * l2 * (1 + tol)),
                homogeneity=int(abs(lorentz_norm(f * c, 2, 1).value - c * n21) > 1e-12 * c * n21),
                constant_error=_constant_error(g, c))


def _constant_error(g, c: float) -> float:
    from .grid import Field
    from .lorentz import lorentz_norm

    A = float(np.sum(g.cell_area))
    exact = 4 * c * np.sqrt(A)
    return abs(lorentz_norm(Field(g, np.full(g.shape, c)), 2, 1).value - exact) / exact


def run_lorentz_check(cfg: SweepConfig) -> Result:
    n = cfg.cases or 100
    rows = pmap(partial(_lorentz_case, n_theta=cfg.n_theta, per_octave=cfg.per_octave),
                [cfg.seeds[0] * 100000 + i for i in range(n)])
    ex = cfg.experiment
    out = [assertion(ex, f"{m}_violations", sum(r[m] for r in rows), 0, sum(r[m] for r in rows) == 0)
           for m in ("duality", "nesting", "sandwich", "homogeneity")]
    ce = max(r["constant_error"] for r in rows)
    out.append(assertion(ex, "constant_field_rel_error", ce, 1e-10, ce <= 1e-10))
    return Result(rows, out)


def _wente_seed(seed: int, variant: str, eps: List[float], lam, n_theta: int, per_octave: int) -> List[dict]:
    from .wente import zero_trace_instance, normalized_pair, wente_sweep

    if variant != "zero-trace":
        return wente_sweep(variant, eps, [seed], lam, n_theta, per_octave)
    a, b = normalized_pair(_rng(seed))
    return [dict(seed=seed, **zero_trace_instance(a, b, e, lam or 2.0, n_theta, per_octave).row()) for e in eps]


def run_wente_sweep(cfg: SweepConfig) -> Result:
    variant = cfg.variant or "zero-trace"
    if variant not in ("zero-trace", "mean-free", "dirichlet", "weak-gradient"):
        raise ConfigError(f"wente-sweep variant must be zero-trace, mean-free, dirichlet or weak-gradient, got {variant!r}")
    fn = partial(_wente_seed, variant=variant, eps=cfg.eps, lam=cfg.lam, n_theta=cfg.n_theta,
                 per_octave=cfg.per_octave)
    rows = [r for rs in pmap(fn, cfg.seeds) for r in rs]
    p = plateau(rows)
    return Result(rows, [assertion(cfg.experiment, f"{variant}_plateau", p, 1.25, p <= 1.25)])


def run_weak_gradient_sweep(cfg: SweepConfig) -> Result:
    cfg = SweepConfig(**{**asdict(cfg), "variant": "weak-gradient"})
    res = run_wente_sweep(cfg)
    flux = max(r["flux_max"] for r in res.rows)
    res.assertions.append(assertion(cfg.experiment, "weak-gradient_flux_max", flux, 1e-6, flux <= 1e-6))
    return res


def _harmonic_seed(seed: int, variant: str, eps, lam, n_theta, per_octave) -> List[dict]:
    from .harmonic import harmonic_sweep

    return harmonic_sweep(variant, eps, lam, [seed], n_theta=max(n_theta, 128), per_octave=per_octave)


def run_harmonic_sweep(cfg: SweepConfig) -> Result:
    variant = cfg.variant or "zero-outer"
    if variant not in ("zero-outer", "bounded-mean"):
        raise ConfigError(f"harmonic-sweep variant must be zero-outer or bounded-mean, got {variant!r}")
    lam = cfg.lam or (2.0 if variant == "zero-outer" else 0.5)
    fn = partial(_harmonic_seed, variant=variant, eps=cfg.eps, lam=lam, n_theta=cfg.n_theta,
                 per_octave=cfg.per_octave)
    rows = [r for rs in pmap(fn, cfg.seeds) for r in rs]
    p = plateau(rows)
    return Result(rows, [assertion(cfg.experiment, f"{variant}_plateau", p, 1.25, p <= 1.25)])


def _first_order_seed(seed: int, eps, n_theta, per_octave) -> List[dict]:
    from .wente import first_order_sweep

    return first_order_sweep(eps, [seed], n_theta=n_theta, per_octave=per_octave)


def run_first_order_sweep(cfg: SweepConfig) -> Result:
    fn = partial(_first_order_seed, eps=cfg.eps, n_theta=max(cfg.n_theta, 128),
                 per_octave=max(cfg.per_octave, 128))
    rows = [r for rs in pmap(fn, cfg.seeds) for r in rs]
    ex = cfg.experiment
    err = max(r["recon_error"] for r in rows)
    comp = max(r["compatibility"] for r in rows)
    p = plateau(rows, "d0_ratio")
    return Result(rows, [assertion(ex, "recon_error_max", err, 1e-4, err <= 1e-4),
                         assertion(ex, "compatibility_max", comp, 1e-4, comp <= 1e-4),
                         assertion(ex, "d0_ratio_plateau", p, 1.5, p <= 1.5)])


def _weak_l2_case(eps: float, n_theta: int, per_octave: int) -> List[dict]:
    from .grid import annulus_grid, from_polar
    from .quantization import angular_quantization_check, omega_density, weak_l2_check
    from .spheremaps import bubble, map_field, map_gradient

    g = annulus_grid(eps, 1.0, n_theta=n_theta, per_octave=per_octave)
    rows = []
    fams = {"log": lambda r, t: np.log(r), "mode1": lambda r, t: (r + eps / r) * np.cos(t)}
    for name, fn in fams.items():
        rep = weak_l2_check(from_polar(g, fn))
        rows.append(dict(check="weak-l2", family=name, epsilon=eps, lhs=rep.lhs, rhs=rep.rhs, ratio=rep.ratio))
    # neck restriction of a bubble of scale eps: 8 eps < rho < 1/8
    if 64 * eps <= 1 / 16:
        gn = annulus_grid(8 * eps, 0.125, n_theta=n_theta, per_octave=per_octave)
        f = bubble(1, eps)
        u, gu = map_field(f, gn), map_gradient(f, gn)
        rep = angular_quantization_check(u, grad_u=gu, omega=omega_density(u, gu))
        rows.append(dict(check="angular", family="bubble-neck", epsilon=eps, lhs=rep.lhs, rhs=rep.rhs,
                         ratio=rep.ratio))
    return rows


def run_weak_l2(cfg: SweepConfig) -> Result:
    rows = [r for rs in pmap(partial(_weak_l2_case, n_theta=cfg.n_theta, per_octave=cfg.per_octave), cfg.eps)
            for r in rs]
    ex = cfg.experiment
    out = []
    log = [r["ratio"] for r in rows if r["family"] == "log"]
    spread = max(log) / min(log) - 1
    out.append(assertion(ex, "log_ratio_spread", spread, 0.05, spread <= 0.05))
    lhs = max(abs(r["lhs"] / (2 * np.sqrt(np.pi)) - 1) for r in rows if r["family"] == "log")
    out.append(assertion(ex, "log_lhs_rel_error", lhs, 0.02, lhs <= 0.02))
    for fam in ("mode1", "bubble-neck"):
        sel = [r for r in rows if r["family"] == fam]
        if sel:
            p = plateau(sel, group="family")
            out.append(assertion(ex, f"{fam}_plateau", p, 1.25, p <= 1.25))
    return Result(rows, out)


def random_partition_case(rng: np.random.Generator):
    """A random ring density (ring edges, masses), annulus (r, R) and budget eps0."""
    r = float(10 ** rng.uniform(-4, -1))
    R = float(rng.uniform(0.5, 2.0))
    n = int(rng.integers(8, 400))
    edges = np.sort(np.concatenate([[r, R], r * (R / r) ** rng.uniform(0, 1, n - 1)]))
    lo, hi = edges[:-1], edges[1:]
    kind = int(rng.integers(0, 4))
    if kind == 0:
        m = hi**2 - lo**2
    elif kind == 1:
        m = rng.exponential(1.0, n)
    elif kind == 2:
        m = np.where(rng.uniform(size=n) < 0.05, rng.exponential(10.0, n), 1e-3 * rng.uniform(size=n))
    else:
        m = np.zeros(n)
        j = int(rng.integers(0, n))
        m[j: j + int(rng.integers(1, 5))] = 1.0
    total = float(m.sum())
    eps0 = float(rng.uniform(0.05, 1.0)) * max(total, 1e-3)
    return (lo, hi, m), r, R, eps0


def run_partition_fuzz(cfg: SweepConfig) -> Result:
    from .quantization import partition_masses, radii_partition

    rng = _rng(cfg.seeds[0])
    rows = []
    for case in range(cfg.cases or 1000):
        dens, r, R, eps0 = random_partition_case(rng)
        radii = radii_partition(dens, r, R, eps0)
        masses = partition_masses(dens, radii)
        total = float(np.sum(dens[2]))
        bound = math.ceil(total / eps0) + 1
        rows.append(dict(case=case, total=total, eps0=eps0, n_annuli=len(radii) - 1, count_bound=bound,
                         max_mass=float(masses.max()),
                         ok=bool(masses.max() <= eps0 * (1 + 1e-9) and len(radii) - 1 <= bound)))
    bad = sum(not r["ok"] for r in rows)
    return Result(rows, [assertion(cfg.experiment, "violations", bad, 0, bad == 0)])


def _bubble_k(k: int, family: str, radii: Sequence[float]):
    from .quantization import build_bubble_tree, neck_report, quantization_residual

    seq = BUBBLE_FAMILIES[family]()
    tree = build_bubble_tree(seq, k)
    q = quantization_residual(tree, seq)
    rows = []
    for r in radii:
        for row in neck_report(tree, seq, k, r):
            row["quantization_residual"] = q
            rows.append(row)
    return tree.to_dict(), rows


def run_bubble_demo(cfg: SweepConfig) -> Result:
    res = pmap(partial(_bubble_k, family=cfg.family, radii=cfg.radii), sorted(cfg.ks))
    trees = [t for t, _ in res]
    rows = [r for _, rs in res for r in rs]
    ex = cfg.experiment
    kmax = max(cfg.ks)
    r0 = max(cfg.radii)
    ang = {k: max((r["neck_angular"] for r in rows if r["k"] == k and r["r"] == r0), default=0.0)
           for k in cfg.ks}
    mono = sum(1 for k in cfg.ks if k + 2 in ang and ang[k + 2] > ang[k])
    ledger = max(t["ledger_residual"] for t in trees)
    quant = max(r["quantization_residual"] for r in rows if r["k"] == kmax) if rows else float("inf")
    out = [assertion(ex, "final_neck_angular", ang[kmax], 1e-2, ang[kmax] <= 1e-2),
           assertion(ex, "neck_angular_monotone_violations", mono, 0, mono == 0),
           assertion(ex, "ledger_residual_max", ledger, 1e-3, ledger <= 1e-3),
           assertion(ex, "final_quantization_residual", quant, 5e-2, quant <= 5e-2)]
    return Result(rows, out, {"bubble-tree.json": json.dumps(trees, indent=1)})


def run_pohozaev(cfg: SweepConfig) -> Result:
    from .grid import annulus_grid, from_polar
    from .quantization import pohozaev_profile
    from .spheremaps import bubble, equator_field, map_field, map_gradient

    eps = min(cfg.eps)
    g = annulus_grid(eps, 1.0, n_theta=cfg.n_theta, per_octave=cfg.per_octave)
    cases = {}
    for d in (1, 2):
        f = bubble(d, 0.1)
        cases[f"bubble-degree-{d}"] = (map_field(f, g), map_gradient(f, g))
    cases["log"] = (from_polar(g, lambda r, t: np.log(r)), None)
    cases["equator"] = (equator_field(g), None)
    rows = []
    for name, (u, gu) in cases.items():
        rad, ang = pohozaev_profile(u, gu)
        s = (rad - ang) / (rad + ang)
        rows.append(dict(family=name, max_residual=float(np.max(np.abs(s))), min_signed=float(s.min()),
                         max_signed=float(s.max())))
    ex = cfg.experiment
    out = []
    for r in rows:
        if r["family"].startswith("bubble"):
            out.append(assertion(ex, f"{r['family']}_max_residual", r["max_residual"], 1e-6,
                                 r["max_residual"] <= 1e-6))
    lg = next(r for r in rows if r["family"] == "log")
    eq = next(r for r in rows if r["family"] == "equator")
    out.append(assertion(ex, "log_signed_min", lg["min_signed"], 1.0, abs(lg["min_signed"] - 1) <= 1e-12))
    out.append(assertion(ex, "equator_signed_max", eq["max_signed"], -1.0, abs(eq["max_signed"] + 1) <= 1e-12))
    return Result(rows, out)


RUNNERS = {"lorentz-check": run_lorentz_check, "wente-sweep": run_wente_sweep,
           "harmonic-sweep": run_harmonic_sweep, "lr1-sweep": run_weak_gradient_sweep,
           "first-order-sweep": run_first_order_sweep, "weak-l2": run_weak_l2,
           "partition-fuzz": run_partition_fuzz, "bubble-demo": run_bubble_demo, "pohozaev": run_pohozaev}


BUBBLE_FAMILIES = {"one-bubble": one_bubble, "bubble-on-bubble": bubble_on_bubble, "two-bubbles": two_bubbles}


# ------------------------------------------------------------ run/report
def run(cfg: SweepConfig) -> Result:
    """Run one experiment and write its CSV, extra files and the merged summary."""
    cfg.validate()
    res = RUNNERS[cfg.experiment](cfg)
    res.rows = _sort_rows(res.rows)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    comment = f"generator={GENERATOR} seeds={','.join(map(str, cfg.seeds))}"
    write_csv(out / f"{cfg.experiment}.csv", res.rows, comment)
    for name, text in res.files.items():
        (out / name).write_text(text)
    summary = out / "summary.csv"
    old = [r for r in read_csv(summary) if r["experiment"] != cfg.experiment] if summary.exists() else []
    merged = sorted(old + res.assertions, key=lambda r: (r["experiment"], r["metric"]))
    write_csv(summary, merged, comment, SUMMARY_FIELDS)
    return res


def load_baselines(path) -> List[BaselineRecord]:
    data = json.loads(Path(path).read_text())
    return [BaselineRecord(**d) for d in data]


def compare_baseline(results: List[dict], baselines: List[BaselineRecord]) -> dict:
    """Per-metric comparison of summary rows with frozen values.

    Metrics without a baseline produce warnings, not failures.
    """
    base = {(b.experiment, b.metric): b for b in baselines}
    report = dict(passed=[], failed=[], warnings=[])
    for r in results:
        key = (r["experiment"], r["metric"])
        b = base.get(key)
        if b is None:
            report["warnings"].append(f"no baseline for {key[0]}/{key[1]}")
            continue
        drift = abs(float(r["value"]) - b.value)
        (report["passed"] if drift <= b.tolerance else report["failed"]).append(
            dict(experiment=key[0], metric=key[1], value=float(r["value"]), baseline=b.value,
                 tolerance=b.tolerance, drift=drift))
    return report


def _finish(rows: List[dict], baseline: Optional[str]) -> int:
    for r in rows:
        print(f"{'PASS' if r['pass'] else 'FAIL'} {r['experiment']} {r['metric']} = {r['value']:.6g} (bound {r['bound']:.6g})")
    code = EXIT_OK if all(r["pass"] for r in rows) else EXIT_ASSERTION
    if baseline:
        rep = compare_baseline(rows, load_baselines(baseline))
        for w in rep["warnings"]:
            warnings.warn(w)
            print(f"warning: {w}", file=sys.stderr)
        for f in rep["failed"]:
            print(f"REGRESSION {f['experiment']} {f['metric']}: {f['value']:.6g} vs {f['baseline']:.6g} "
                  f"(tol {f['tolerance']:.3g})")
        if rep["failed"]:
            code = EXIT_REGRESSION
    return code


def _config_error(msg: str) -> int:
    print(json.dumps({"error": "config", "message": msg}), file=sys.stderr)
    return EXIT_CONFIG


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="annulus-lab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=EXPERIMENTS + ("report",))
    ap.add_argument("--config", help="JSON file with SweepConfig fields")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seeds", type=int, help="use seeds 0..n-1")
    ap.add_argument("--baseline", help="JSON list of baseline records")
    args = ap.parse_args(argv)

    try:
        d = json.loads(Path(args.config).read_text()) if args.config else {}
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        if args.command == "report":
            out = Path(args.out or d.get("out", "results"))
            summary = out / "summary.csv"
            if not summary.exists():
                raise ConfigError(f"no summary at {summary}")
            baseline = args.baseline or d.get("baseline")
            if baseline:
                load_baselines(baseline)
            return _finish(read_csv(summary), baseline)
        d.setdefault("experiment", args.command)
        if d["experiment"] != args.command:
            raise ConfigError(f"config is for {d['experiment']!r}, not {args.command!r}")
        if args.out:
            d["out"] = args.out
        if args.seeds is not None:
            if args.seeds < 1:
                raise ConfigError("--seeds must be positive")
            d["seeds"] = list(range(args.seeds))
        if args.baseline:
            d["baseline"] = args.baseline
        cfg = SweepConfig.from_dict(d)
        if cfg.baseline:
            load_baselines(cfg.baseline)
        res = run(cfg)
    except (ConfigError, json.JSONDecodeError, TypeError, OSError) as e:
        return _config_error(str(e))
    return _finish(res.assertions, cfg.baseline)


if __name__ == "__main__":
    sys.exit(main())
