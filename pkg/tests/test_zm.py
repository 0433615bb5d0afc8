import math

import numpy as np
import pytest

from weylwalk.errors import LazinessOutOfRange, RhoOutOfRange
from weylwalk.zm import (
    center,
    gaussian_tv,
    lazy_simple_walk,
    liminf_bound,
    pair_tv,
    variance,
    zm_power,
    zm_study,
)


def brute_pair_tv(mu, rho, n):
    # direct convolution on Z^2 for tiny n
    lo, hi = min(mu), max(mu)
    size = (hi - lo) * n + 1
    step = {}
    for a, p in mu.items():
        for b, q in mu.items():
            step[(a, b)] = step.get((a, b), 0) + rho * p * q
        step[(a, a)] = step.get((a, a), 0) + (1 - rho) * p
    cur = {(0, 0): 1.0}
    for _ in range(n):
        nxt = {}
        for (x, y), p in cur.items():
            for (a, b), q in step.items():
                nxt[(x + a, y + b)] = nxt.get((x + a, y + b), 0) + p * q
        cur = nxt
    pn, off = zm_power(mu, n)
    prod = {(off + i, off + j): pn[i] * pn[j] for i in range(size) for j in range(size)}
    return 0.5 * sum(abs(cur.get(k, 0) - prod.get(k, 0)) for k in set(cur) | set(prod))


def test_lazy_walk():
    mu = lazy_simple_walk(0.5)
    assert mu == {-1: 0.25, 0: 0.5, 1: 0.25}
    with pytest.raises(LazinessOutOfRange):
        lazy_simple_walk(1.0)


def test_center_and_variance():
    mu = center({1: 0.5, 3: 0.5})
    assert mu == {-1: 0.5, 1: 0.5}
    assert variance(mu) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        center({0: 0.5, 1: 0.5})


def test_zm_power():
    pn, off = zm_power(lazy_simple_walk(0.5), 3)
    assert off == -3 and pn.sum() == pytest.approx(1.0)
    assert pn[3] == pytest.approx(20 / 64)


def test_pair_tv_endpoints():
    mu = lazy_simple_walk()
    assert pair_tv(mu, 1.0, 50) == 0
    assert pair_tv(mu, 0.3, 0) == 0
    with pytest.raises(RhoOutOfRange):
        pair_tv(mu, 1.5, 5)


@pytest.mark.parametrize("rho", [0.0, 0.2, 0.7])
@pytest.mark.parametrize("n", [1, 3, 6])
def test_pair_tv_matches_brute_force(rho, n):
    mu = lazy_simple_walk(0.4)
    assert pair_tv(mu, rho, n) == pytest.approx(brute_pair_tv(mu, rho, n), abs=1e-12)


def test_pair_tv_monotone_in_rho():
    mu = lazy_simple_walk()
    vals = [pair_tv(mu, r, 200) for r in (0.01, 0.1, 0.5, 0.99)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_gaussian_tv_decays():
    mu = lazy_simple_walk()
    a, b = gaussian_tv(mu, 100), gaussian_tv(mu, 400)
    assert b < a
    assert b * 400 == pytest.approx(a * 100, rel=0.1)


def test_liminf_bound():
    assert liminf_bound(0.01) == pytest.approx(1 - 2 * 0.01**0.25 - 0.05)


def test_zm_study_proxies():
    st = zm_study(ns=(500,))
    assert st.monotone_in_rho and st.lower_bound_ok and st.upper_small_ok
    assert len(st.rows) == 5 and st.table()[(1.0, 500)] == 0
    with pytest.raises(ValueError):
        zm_study(m=2)


def test_pair_tv_is_probability():
    for r in (0.0, 0.5):
        v = pair_tv(lazy_simple_walk(0.25), r, 30)
        assert 0 <= v <= 1 and math.isfinite(v)
    assert np.isfinite(pair_tv({-2: 0.25, 0: 0.5, 2: 0.25}, 0.5, 10))
