"""Noise-sensitivity curves, covariance invariance under noise, and tail checks."""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import RhoOutOfRange, RhoZeroInExactNS
from .hodge import covariance
from .measures import (
    Measure,
    generator_measure,
    lazy_uniform,
    noised_pair,
    power,
    powers,
    product_measure,
    sample_walks,
    tv_distance,
)
from .network import build_network
from .weyl import Group, product_group, resolve_group

MODES = ("exact", "monte-carlo")


@dataclass(frozen=True)
class NsConfig:
    group: str = "A1"
    lazy: float = 1 / 3
    rhos: tuple = (0.1, 0.3, 1.0)
    ns: tuple = (32, 64, 128, 256)
    mode: str = "exact"
    samples: int = 100_000
    seed: int = 0
    probs: dict | None = None   # per-generator weights; overrides the uniform split
    allow_rho_zero: bool = False
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "rhos", tuple(float(r) for r in self.rhos))
        object.__setattr__(self, "ns", tuple(int(n) for n in self.ns))
        if not 0.0 < float(self.lazy) < 1.0:
            from .errors import LazinessOutOfRange
            raise LazinessOutOfRange(f"laziness must lie in (0, 1), got {self.lazy!r}")
        for r in self.rhos:
            if not 0.0 <= r <= 1.0:
                raise RhoOutOfRange(f"rho must lie in [0, 1], got {r!r}")
            if r == 0.0 and not self.allow_rho_zero:
                raise RhoZeroInExactNS("rho = 0 gives the diagonal walk; pass allow_rho_zero")
        if list(self.ns) != sorted(self.ns) or any(n < 0 for n in self.ns):
            raise ValueError("n list must be ascending and nonnegative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.samples < 2:
            raise ValueError("samples must be at least 2")

    def measure(self) -> Measure:
        return step_measure(resolve_group(self.group), self.lazy, self.probs)


def step_measure(group: Group, lazy, probs: dict | None = None) -> Measure:
    if probs:
        return generator_measure(group, probs, lazy=lazy)
    return lazy_uniform(group, lazy)


def normalized_tv(tv: float, n: int, m: int) -> float:
    """``tv sqrt(n) / (log n)^m``; undefined (nan) for ``n <= 1``."""
    if n <= 1:
        return math.nan
    return tv * math.sqrt(n) / math.log(n) ** m


@dataclass(frozen=True)
class NsRow:
    group: str
    lazy: float
    rho: float
    n: int
    tv: float
    normalized: float
    mode: str
    samples: int
    stderr: float
    seconds: float


@dataclass
class NsResult:
    rows: list = field(default_factory=list)

    def column(self, rho: float) -> list[NsRow]:
        return sorted((r for r in self.rows if r.rho == rho), key=lambda r: r.n)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["group", "lazy", "rho", "n", "tv", "normalized", "mode", "samples",
                         "stderr", "seconds"])
        for r in sorted(self.rows, key=lambda r: (r.rho, r.n)):
            writer.writerow([r.group, f"{r.lazy:.17g}", f"{r.rho:.17g}", r.n, f"{r.tv:.17g}",
                             f"{r.normalized:.17g}", r.mode, r.samples, f"{r.stderr:.17g}",
                             f"{r.seconds:.3f}"])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _exact_column(cfg: NsConfig, ri: int) -> list[NsRow]:
    rho = cfg.rhos[ri]
    group = resolve_group(cfg.group)
    mu = cfg.measure()
    pair = product_group(group, group)
    rows = []
    start = time.perf_counter()
    if rho == 1.0:
        for n in cfg.ns:
            rows.append(NsRow(cfg.group, float(cfg.lazy), rho, n, 0.0, 0.0 if n > 1 else math.nan,
                              "exact", 0, 0.0, time.perf_counter() - start))
        return rows
    marg = dict(powers(mu, cfg.ns))
    for n, pin in powers(noised_pair(mu, rho, pair), cfg.ns):
        tv = tv_distance(pin, product_measure(marg[n], marg[n], pair))
        rows.append(NsRow(cfg.group, float(cfg.lazy), rho, n, tv,
                          normalized_tv(tv, n, group.m), "exact", 0, 0.0,
                          time.perf_counter() - start))
    return rows


def tv_lower_bound_estimate(pair_mu: Measure, target: Measure, n: int, samples: int, seed) -> tuple[float, float]:
    """Sample-splitting lower-bound estimate of ``||pair_mu_n - target||_TV``.

    The first half of the samples picks ``A = {x : empirical(x) > target(x)}``;
    the second half estimates ``P(A) - target(A)``, which is an unbiased
    estimate of a quantity never exceeding the TV distance.
    """
    g = pair_mu.group
    w, t = sample_walks(pair_mu, n, samples, seed)
    keys = g.encode(w, t)
    half = samples // 2
    first, second = keys[:half], keys[half:]
    uk, counts = np.unique(first, return_counts=True)
    emp = counts / half
    pos = np.clip(np.searchsorted(target.keys, uk), 0, max(len(target) - 1, 0))
    tgt = np.where(target.keys[pos] == uk, np.asarray(target.p, float)[pos], 0.0)
    A = uk[emp > tgt]
    q_A = float(np.sum(tgt[emp > tgt]))
    hits = np.isin(second, A)
    p_hat = float(hits.mean())
    se = math.sqrt(max(p_hat * (1 - p_hat), 1e-300) / len(second))
    return p_hat - q_A, se


def _mc_column(cfg: NsConfig, ri: int) -> list[NsRow]:
    rho = cfg.rhos[ri]
    group = resolve_group(cfg.group)
    mu = cfg.measure()
    pair = product_group(group, group)
    pi = noised_pair(mu, rho, pair)
    rows = []
    for ni, n in enumerate(cfg.ns):
        start = time.perf_counter()
        mn = power(mu, n)
        target = product_measure(mn, mn, pair)
        est, se = tv_lower_bound_estimate(pi, target, n, cfg.samples, [cfg.seed, ri, ni])
        rows.append(NsRow(cfg.group, float(cfg.lazy), rho, n, est, normalized_tv(est, n, group.m),
                          "monte-carlo", cfg.samples, se, time.perf_counter() - start))
    return rows


def _column(args):
    cfg, ri = args
    return (_exact_column if cfg.mode == "exact" else _mc_column)(cfg, ri)


def ns_curve(cfg: NsConfig) -> NsResult:
    tasks = [(cfg, i) for i in range(len(cfg.rhos))]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            cols = list(pool.map(_column, tasks))
    else:
        cols = [_column(t) for t in tasks]
    return NsResult([row for col in cols for row in col])


def sigma_rho_invariance(group: Group, mu: Measure, rhos) -> tuple[float, dict]:
    """Max over ``rho`` of ``||Sigma^rho - blockdiag(Sigma, Sigma)||_inf`` and the per-rho matrices."""
    sigma = covariance(build_network(group, mu)).mat
    m = group.m
    block = np.zeros((2 * m, 2 * m))
    block[:m, :m] = sigma
    block[m:, m:] = sigma
    pair = product_group(group, group)
    worst, mats = 0.0, {}
    for rho in rhos:
        s_rho = covariance(build_network(pair, noised_pair(mu, rho, pair))).mat
        mats[float(rho)] = s_rho
        worst = max(worst, float(np.max(np.abs(s_rho - block))))
    return worst, mats


@dataclass(frozen=True)
class TailCheck:
    r: np.ndarray
    prob: np.ndarray
    slope: float
    intercept: float
    margin: float
    r_squared: float

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["r", "prob", "bound"])
        for r, p in zip(self.r, self.prob):
            bound = math.exp(self.intercept + self.margin + self.slope * r * r)
            writer.writerow([int(r), f"{p:.17g}", f"{bound:.17g}"])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def tail_probabilities(group: Group, mu_n: Measure, rs) -> np.ndarray:
    """``P(|w_n|_S >= r)`` for each ``r`` from the exact distribution ``mu_n``."""
    radius = int(np.max(np.abs(mu_n.t))) * 4 + 4 if len(mu_n) else 0
    bw, bt, norms = group.ball_arrays(max(radius, 1))
    bkeys = group.encode(bw, bt)
    pos = np.searchsorted(bkeys, mu_n.keys)
    while np.any(pos >= len(bkeys)) or not np.array_equal(bkeys[np.minimum(pos, len(bkeys) - 1)], mu_n.keys):
        radius *= 2
        bw, bt, norms = group.ball_arrays(radius)
        bkeys = group.encode(bw, bt)
        pos = np.searchsorted(bkeys, mu_n.keys)
    word = norms[pos]
    p = np.asarray(mu_n.p, dtype=float)
    return np.array([p[word >= r].sum() for r in rs])


def tail_bound_check(group: Group, mu: Measure, n: int, rs=None) -> TailCheck:
    """Fit ``log P(|w_n| >= r)`` against ``r^2 / n`` and lift the line above every point."""
    mu_n = power(mu, n)
    if rs is None:
        rs = np.unique(np.linspace(math.sqrt(n), 5 * math.sqrt(n), 25).astype(int))
    rs = np.asarray(rs)
    prob = tail_probabilities(group, mu_n, rs)
    ok = prob > 0
    x = (rs[ok] ** 2) / n
    y = np.log(prob[ok])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = intercept + slope * x
    resid = y - fitted
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    # slack keeps the lifted line above every point after rounding
    margin = max(0.0, float(resid.max())) + 1e-12
    return TailCheck(rs, prob, float(slope) / n, float(intercept), margin, r2)
