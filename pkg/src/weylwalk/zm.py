"""Walks on the integers: exact noised-pair TV and the Gaussian comparison probe.

Measures on ``Z`` are ``{k: weight}`` dicts.  The pair law ``pi^rho_n`` on
``Z^2`` is obtained by inverting ``(rho phi(a) phi(b) + (1 - rho) phi(a + b))^n``
on an FFT grid large enough that the support never wraps around.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LazinessOutOfRange, RhoOutOfRange


def lazy_simple_walk(lazy: float = 0.5) -> dict[int, float]:
    if not 0.0 < lazy < 1.0:
        raise LazinessOutOfRange(f"laziness must lie in (0, 1), got {lazy!r}")
    return {-1: (1 - lazy) / 2, 0: lazy, 1: (1 - lazy) / 2}


def _check(mu: dict[int, float]) -> None:
    if abs(sum(mu.values()) - 1.0) > 1e-12 or min(mu.values()) < 0:
        raise ValueError("mu must be a probability vector")


def center(mu: dict[int, float]) -> dict[int, float]:
    """Shift so the mean is zero; requires an integer mean."""
    mean = sum(k * p for k, p in mu.items())
    if abs(mean - round(mean)) > 1e-12:
        raise ValueError("mean is not an integer; cannot recentre on Z")
    shift = int(round(mean))
    return {k - shift: p for k, p in mu.items()}


def variance(mu: dict[int, float]) -> float:
    mean = sum(k * p for k, p in mu.items())
    return sum((k - mean) ** 2 * p for k, p in mu.items())


def zm_power(mu: dict[int, float], n: int) -> tuple[np.ndarray, int]:
    """``mu_n`` as a dense array and the integer at index 0."""
    _check(mu)
    lo, hi = min(mu), max(mu)
    step = np.zeros(hi - lo + 1)
    for k, p in mu.items():
        step[k - lo] = p
    out = np.ones(1)
    for _ in range(int(n)):
        out = np.convolve(out, step)
    return out, lo * int(n)


def _phi(mu: dict[int, float], theta: np.ndarray) -> np.ndarray:
    return sum(p * np.exp(-1j * k * theta) for k, p in mu.items())


def pair_tv(mu: dict[int, float], rho: float, n: int) -> float:
    """``||pi^rho_n - mu_n x mu_n||_TV`` on ``Z x Z``, exact up to FFT rounding."""
    _check(mu)
    if not 0.0 <= rho <= 1.0:
        raise RhoOutOfRange(f"rho must lie in [0, 1], got {rho!r}")
    if rho == 1.0 or n == 0:
        return 0.0
    width = (max(mu) - min(mu)) * n + 1
    N = 1 << max(4, math.ceil(math.log2(width)))
    a = 2 * np.pi * np.fft.fftfreq(N)[:, None]
    b = 2 * np.pi * np.fft.rfftfreq(N)[None, :]
    pa, pb = _phi(mu, a), _phi(mu, b)
    diff = (rho * pa * pb + (1 - rho) * _phi(mu, a + b)) ** n - (pa * pb) ** n
    d = np.fft.irfft2(diff, s=(N, N))
    return float(min(1.0, 0.5 * np.abs(d).sum()))


def discrete_normal_z(var: float, n: int, lo: int, hi: int) -> np.ndarray:
    """``N(0, n var)`` density on ``lo..hi``, normalised over that window."""
    k = np.arange(lo, hi + 1)
    dens = np.exp(-0.5 * k * k / (n * var))
    return dens / dens.sum()


def gaussian_tv(mu: dict[int, float], n: int) -> float:
    """``||mu_n - N_{n Sigma}||_TV`` for a mean-zero walk on ``Z``."""
    mu = center(mu)
    pn, lo = zm_power(mu, n)
    var = variance(mu)
    half = max(len(pn), int(40 * math.sqrt(n * var)) + 1)
    window_lo, window_hi = -half, half
    ref = discrete_normal_z(var, n, window_lo, window_hi)
    full = np.zeros_like(ref)
    full[lo - window_lo: lo - window_lo + len(pn)] = pn
    return float(0.5 * np.abs(full - ref).sum())


@dataclass(frozen=True)
class ZmRow:
    rho: float
    n: int
    tv: float


@dataclass(frozen=True)
class ZmStudy:
    rows: list
    monotone_in_rho: bool
    lower_bound_ok: bool
    upper_small_ok: bool
    lower_bound: float

    def table(self) -> dict[tuple[float, int], float]:
        return {(r.rho, r.n): r.tv for r in self.rows}


def liminf_bound(rho: float, eps: float = 0.05) -> float:
    return 1 - 2 * rho ** 0.25 - eps


def zm_study(mu: dict[int, float] | None = None, rhos=(0.01, 0.1, 0.5, 0.99, 1.0), ns=(2000,),
             m: int = 1, small_rho: float = 0.01, large_rho: float = 0.99) -> ZmStudy:
    """TV table over ``(rho, n)`` plus the three finite proxies for the limit statements."""
    if m != 1:
        raise ValueError("only m = 1 is supported")
    mu = center(lazy_simple_walk() if mu is None else mu)
    rhos = sorted(float(r) for r in rhos)
    ns = sorted(int(n) for n in ns)
    rows = [ZmRow(r, n, pair_tv(mu, r, n)) for n in ns for r in rhos]
    table = {(r.rho, r.n): r.tv for r in rows}
    big = ns[-1]
    col = [table[(r, big)] for r in rhos]
    monotone = all(b <= a + 1e-12 for a, b in zip(col, col[1:]))
    bound = liminf_bound(small_rho)
    low_ok = (small_rho, big) not in table or table[(small_rho, big)] >= bound
    up_ok = (large_rho, big) not in table or table[(large_rho, big)] < 0.1
    return ZmStudy(rows, monotone, low_ok, up_ok, bound)
