"""Acceptance checks shared by the test suite and the ``selftest`` subcommand."""
from __future__ import annotations

import json
import math
import statistics
import time
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .experiments import NsConfig, ns_curve, sigma_rho_invariance
from .gauss import lclt_sup_error, lclt_tv_error
from .hodge import covariance
from .measures import (
    Measure,
    generator_measure,
    lazy_uniform,
    noised_pair,
    power,
    powers,
)
from .network import build_network
from .transfer import SpectralScanConfig, hessian_check, spectral_scan, transfer_char_gap
from .weyl import BUILTIN_NAMES, Group, builtin_group, multiply, product_group
from .zm import gaussian_tv, lazy_simple_walk, liminf_bound, pair_tv

LAZIES = (0.2, 1 / 3, 0.6)
# measure on the affine A1 group whose harmonic correction is nonzero
SHARP_A1 = {"s1": 0.5, "s2": 0.2}


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: value={self.value:.6g} threshold={self.threshold:.6g} {self.detail}".rstrip()


def _timed(fn):
    def run(*args, **kwargs):
        start = time.perf_counter()
        res = fn(*args, **kwargs)
        return CheckResult(**{**asdict(res), "seconds": time.perf_counter() - start})
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


def pair_measure(group: Group, lazy, rho=1.0, probs=None) -> Measure:
    """``pi^rho`` for a built-in product, from the factor's step measure."""
    f1, f2 = group.factors
    mu = generator_measure(f1, probs, lazy=lazy) if probs else lazy_uniform(f1, lazy)
    return noised_pair(mu, rho, group)


def default_measure(group: Group, lazy) -> Measure:
    if group.factors is not None and group.factors[0] is group.factors[1]:
        return pair_measure(group, lazy)
    return lazy_uniform(group, lazy)


def within_band(values, factor: float = 2.0) -> tuple[bool, float]:
    """Whether every value lies within ``factor`` of the median; also the worst ratio."""
    med = statistics.median(values)
    ratio = max(max(v / med, med / v) for v in values)
    return ratio <= factor, ratio


# -- 1 ----------------------------------------------------------------------------

@_timed
def check_covariance_regressions() -> CheckResult:
    a1xa1 = builtin_group("A1xA1")
    worst, slowest = 0.0, 0.0
    for lz in LAZIES:
        p, q = 0.6 * (1 - lz), 0.4 * (1 - lz)
        cases = [
            (a1xa1, pair_measure(a1xa1, lz), (1 - lz) / 4),
            (a1xa1, pair_measure(a1xa1, lz, probs={"s1": p, "s2": q}), p * q / (1 - lz)),
            (builtin_group("A2"), lazy_uniform(builtin_group("A2"), lz), math.sqrt(3) / 27 * (1 - lz)),
            (builtin_group("C2"), lazy_uniform(builtin_group("C2"), lz), (1 - lz) / 24),
        ]
        for g, mu, val in cases:
            start = time.perf_counter()
            S = covariance(build_network(g, mu)).mat
            slowest = max(slowest, time.perf_counter() - start)
            worst = max(worst, float(np.max(np.abs(S - val * np.eye(g.m)))))
    ok = worst < 1e-10 and slowest < 1.0
    return CheckResult("1 covariance regressions", ok, worst, 1e-10,
                       f"slowest case {slowest:.3f}s")


# -- 2 ----------------------------------------------------------------------------

@_timed
def check_hessian() -> CheckResult:
    worst, odd = 0.0, 0.0
    for name in BUILTIN_NAMES:
        g = builtin_group(name)
        net = build_network(g, default_measure(g, Fraction(1, 3)))
        rep = hessian_check(net, covariance(net), raise_on_fail=False)
        worst = max(worst, rep.rel_error)
        odd = max(odd, rep.max_first, rep.max_third)
    ok = worst < 1e-4 and odd < 1e-6
    return CheckResult("2 Hessian identity", ok, worst, 1e-4, f"max odd derivative {odd:.3g} (< 1e-6)")


# -- 3 ----------------------------------------------------------------------------

@_timed
def check_transfer_char(seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in ("A1", "A2"):
        g = builtin_group(name)
        mu = lazy_uniform(g, 1 / 3)
        net = build_network(g, mu)
        vs = rng.uniform(-1.0, 1.0, size=(20, g.m))
        for n, mu_n in powers(mu, (10, 50, 200)):
            for v in vs:
                worst = max(worst, transfer_char_gap(net, mu_n, n, v))
    return CheckResult("3 transfer-character identity", worst < 1e-10, worst, 1e-10)


# -- 4 ----------------------------------------------------------------------------

@_timed
def check_spectral_gap() -> CheckResult:
    worst, where = 0.0, ""
    cfg = SpectralScanConfig(delta=0.05, grid=64)
    for name in BUILTIN_NAMES:
        g = builtin_group(name)
        res = spectral_scan(build_network(g, default_measure(g, 1 / 3)), cfg, raise_on_violation=False)
        if res.max_abs > worst:
            worst, where = res.max_abs, name
    return CheckResult("4 spectral gap", worst < 1 - 1e-3, worst, 1 - 1e-3, f"max attained on {where}")


# -- 5 ----------------------------------------------------------------------------

LCLT_NS = (50, 100, 200, 400, 800)


def lclt_sequences(mu: Measure, ns=LCLT_NS):
    g = mu.group
    sigma = covariance(build_network(g, mu))
    sup_norm, tv_norm = [], []
    for n, mu_n in powers(mu, ns):
        sup_norm.append(lclt_sup_error(g, mu, sigma, n, mu_n=mu_n) * n ** ((g.m + 1) / 2))
        tv_norm.append(lclt_tv_error(g, mu, sigma, n, mu_n=mu_n) * math.sqrt(n) / math.log(n) ** (g.m / 2))
    return sup_norm, tv_norm


@_timed
def check_lclt_scaling() -> CheckResult:
    a1 = builtin_group("A1")
    sup_n, tv_n = lclt_sequences(generator_measure(a1, SHARP_A1, lazy=0.3))
    ok1, r1 = within_band(sup_n)
    ok2, r2 = within_band(tv_n)
    usup, utv = lclt_sequences(lazy_uniform(a1, 1 / 3))
    _, ur1 = within_band(usup)
    _, ur2 = within_band(utv)
    detail = (f"mu=(0.5,0.2,0.3): sup ratio {r1:.3f}, tv ratio {r2:.3f}; "
              f"uniform lazy 1/3 (harmonic, faster decay): sup ratio {ur1:.3f}, tv ratio {ur2:.3f}")
    return CheckResult("5 LCLT scaling", ok1 and ok2, max(r1, r2), 2.0, detail)


# -- 6 ----------------------------------------------------------------------------

@_timed
def check_noise_sensitivity(ns=(32, 64, 128, 256), jobs: int = 1) -> CheckResult:
    res = ns_curve(NsConfig(group="A1", lazy=1 / 3, rhos=(0.1, 0.3, 1.0), ns=ns, jobs=jobs))
    rho1 = max(r.tv for r in res.column(1.0))
    decreasing, band_ok, ratios, scaled = True, True, [], []
    for rho in (0.1, 0.3):
        col = res.column(rho)
        tvs = [r.tv for r in col]
        decreasing &= all(b < a for a, b in zip(tvs, tvs[1:]))
        ok, ratio = within_band([r.normalized for r in col])
        band_ok &= ok
        ratios.append(ratio)
        scaled.append(", ".join(f"{r.tv * r.n:.3f}" for r in col))
    ok = rho1 <= 1e-14 and decreasing and band_ok
    detail = (f"rho=1 max {rho1:.3g}; strictly decreasing {decreasing}; "
              f"band ratios {ratios[0]:.3f}, {ratios[1]:.3f}; n*tv: [{scaled[0]}] / [{scaled[1]}]")
    return CheckResult("6 noise sensitivity", ok, max(ratios), 2.0, detail)


# -- 7 ----------------------------------------------------------------------------

@_timed
def check_sigma_invariance() -> CheckResult:
    rhos = (0.1, 0.25, 0.5, 0.75, 1.0)
    worst = 0.0
    for name, lz in (("A1", 1 / 3), ("A2", 1 / 4)):
        g = builtin_group(name)
        dev, _ = sigma_rho_invariance(g, lazy_uniform(g, lz), rhos)
        worst = max(worst, dev)
    return CheckResult("7 Sigma^rho invariance", worst < 1e-10, worst, 1e-10)


# -- 8 ----------------------------------------------------------------------------

@_timed
def check_zm_study(n: int = 2000) -> CheckResult:
    mu = lazy_simple_walk()
    rhos = (0.01, 0.1, 0.5, 0.99, 1.0)
    tvs = [pair_tv(mu, r, n) for r in rhos]
    bound = liminf_bound(0.01)
    low = tvs[0] >= bound
    high = tvs[3] < 0.1
    mono = all(b <= a + 1e-12 for a, b in zip(tvs, tvs[1:]))
    detail = f"tv(0.01)={tvs[0]:.4f} >= {bound:.4f}: {low}; tv(0.99)={tvs[3]:.4g} < 0.1: {high}; monotone {mono}"
    return CheckResult("8 integer-lattice study", low and high and mono, tvs[0], bound, detail)


# -- 9 ----------------------------------------------------------------------------

def path_oracle(mu: Measure, n: int) -> dict:
    """``mu_n`` by enumerating every length-``n`` sequence of atoms (exact arithmetic)."""
    atoms = list(mu.atoms().items())
    out: dict = {}

    def walk(prefix, weight, depth):
        if depth == n:
            out[prefix] = out.get(prefix, Fraction(0)) + weight
            return
        for g, p in atoms:
            walk(multiply(prefix, g), weight * p, depth + 1)

    walk(mu.group.identity(), Fraction(1), 0)
    return {g: p for g, p in out.items() if p != 0}


@_timed
def check_oracle(max_n: int = 6, rho=Fraction(1, 2)) -> CheckResult:
    a1 = builtin_group("A1")
    pair = product_group(a1, a1)
    mu = lazy_uniform(a1, Fraction(1, 3), exact=True)
    pi = noised_pair(mu, rho, pair)
    mismatches = 0
    for n in range(max_n + 1):
        if power(mu, n).atoms() != path_oracle(mu, n):
            mismatches += 1
        if power(pi, n).atoms() != path_oracle(pi, n):
            mismatches += 1
    return CheckResult("9 oracle equivalence", mismatches == 0, mismatches, 0,
                       f"n = 0..{max_n}, rational mode, rho = {rho}")


# -- 10 ---------------------------------------------------------------------------

@_timed
def check_sharpness_probe() -> CheckResult:
    mu = lazy_simple_walk()
    vals = [n * gaussian_tv(mu, n) for n in (100, 200, 400, 800, 1600)]
    lo, hi = min(vals), max(vals)
    ok = lo > 0 and hi / lo < 10
    return CheckResult("10 sharpness probe", ok, hi / lo, 10.0,
                       f"n*TV in [{lo:.5f}, {hi:.5f}]")


CHECKS = (
    check_covariance_regressions,
    check_hessian,
    check_transfer_char,
    check_spectral_gap,
    check_lclt_scaling,
    check_noise_sensitivity,
    check_sigma_invariance,
    check_zm_study,
    check_oracle,
    check_sharpness_probe,
)


def run_all(only=None) -> list[CheckResult]:
    results = []
    for i, fn in enumerate(CHECKS, start=1):
        if only and i not in only:
            continue
        results.append(fn())
    return results


def summary_json(results) -> str:
    return json.dumps(
        {r.name: {"passed": bool(r.passed), "value": float(r.value), "threshold": float(r.threshold)}
         for r in results},
        indent=2,
    )
