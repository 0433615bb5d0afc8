import math

import numpy as np
import pytest

from weylwalk import build_network, builtin_group, covariance, lazy_uniform
from weylwalk.errors import TruncationInsufficient
from weylwalk.gauss import (
    discrete_normal,
    gaussian_density,
    gaussian_tail_bound,
    lattice_scale,
    lclt_sup_error,
    lclt_tv_error,
    poisson_sides,
    quasi_isometry_constants,
    truncation_radius,
    xi,
)
from weylwalk.measures import generator_measure, power
from weylwalk.weyl import BUILTIN_NAMES, multiply


def sigma_for(group, lazy=1 / 3):
    return covariance(build_network(group, lazy_uniform(group, lazy)))


def test_xi_at_identity(a1):
    s = sigma_for(a1)
    assert xi(a1, s, 100, a1.identity()) == pytest.approx(1 / math.sqrt(2 * math.pi * 100 / 6))


def test_xi_a1_value(a1):
    s1, s2 = a1.generators()
    x = multiply(s2, s1)
    expect = math.exp(-6 / 200) / math.sqrt(2 * math.pi * 100 / 6)
    assert xi(a1, sigma_for(a1), 100, x) == pytest.approx(expect, rel=1e-12)


def test_xi_depends_on_quadratic_form_only():
    rng = np.random.default_rng(3)
    S = np.array([[0.3, 0.1], [0.1, 0.2]])
    Q, _ = np.linalg.qr(rng.normal(size=(2, 2)))
    phi = rng.normal(size=(10, 2))
    a = gaussian_density(phi, S, 7)
    b = gaussian_density(phi @ Q.T, Q @ S @ Q.T, 7)
    assert np.allclose(a, b, rtol=1e-12)


def test_xi_requires_positive_n(a1):
    with pytest.raises(ValueError):
        xi(a1, sigma_for(a1), 0, a1.identity())


@pytest.mark.parametrize("name", ["A1", "A2", "C2"])
def test_normalizer_per_cell(name):
    g = builtin_group(name)
    dn = discrete_normal(g, sigma_for(g), 50)
    assert abs(dn.Z_per_cell - 1) < 1e-6
    assert float(np.sum(dn.measure.p)) == pytest.approx(1.0, abs=1e-12)
    assert dn.tail_bound < 1e-12


def test_normalizer_converges(a1):
    s = sigma_for(a1)
    errs = [abs(discrete_normal(a1, s, n).Z_per_cell - 1) for n in (2, 4, 8, 16)]
    # geometric decay until it hits machine precision
    for a, b in zip(errs, errs[1:]):
        assert b <= a or b < 1e-13


def test_lattice_scale(a2, c2):
    assert lattice_scale(a2) == pytest.approx(1 / 6)
    assert lattice_scale(c2) == pytest.approx(c2.covolume / 8)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_quasi_isometry_constants(name):
    g = builtin_group(name)
    c0, c1 = quasi_isometry_constants(g)
    assert c0 > 0 and c1 > 0
    w, t, norms = g.ball_arrays(12)
    phi = np.linalg.norm(g.embed_arrays(w, t), axis=1)
    assert np.all(phi >= c0 * norms - c1 - 1e-12)


def test_tail_bound_decreases(a1):
    s = sigma_for(a1)
    vals = [gaussian_tail_bound(a1, s, 100, r) for r in (40, 80, 160)]
    assert vals[0] > vals[1] > vals[2]


def test_truncation_radius(a1):
    R, A, bound = truncation_radius(a1, sigma_for(a1), 100)
    assert A == 3.0 and bound < 1e-12
    assert R == math.ceil(3 * math.sqrt(100 * math.log(100)))


def test_truncation_insufficient(a1):
    # a huge covariance puts the Gaussian mass beyond every admissible radius
    with pytest.raises(TruncationInsufficient):
        truncation_radius(a1, np.array([[1e6]]), 100)


def test_sup_error_a1_bounded(a1, mu_a1):
    # the uniform measure is harmonic, so n * error keeps falling
    s = sigma_for(a1)
    vals = [n * lclt_sup_error(a1, mu_a1, s, n) for n in (50, 100, 200, 400)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_sup_error_a1_sharp_rate(a1):
    mu = generator_measure(a1, {"s1": 0.5, "s2": 0.2}, lazy=0.3)
    s = covariance(build_network(a1, mu))
    vals = [n * lclt_sup_error(a1, mu, s, n) for n in (50, 100, 200, 400)]
    assert max(vals) / min(vals) < 1.1


def test_sup_error_a2_bounded(a2):
    mu = lazy_uniform(a2, 1 / 3)
    s = sigma_for(a2)
    vals = [n**1.5 * lclt_sup_error(a2, mu, s, n) for n in (30, 60, 120)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_sup_error_unscaled_is_worse(a2):
    mu = lazy_uniform(a2, 1 / 3)
    s = sigma_for(a2)
    assert lclt_sup_error(a2, mu, s, 20, scale=1.0) > lclt_sup_error(a2, mu, s, 20)


def test_sup_error_precondition(a1, mu_a1):
    with pytest.raises(ValueError):
        lclt_sup_error(a1, mu_a1, sigma_for(a1), 0)


def test_tv_error_range(a1, mu_a1):
    s = sigma_for(a1)
    for n in (10, 100):
        tv = lclt_tv_error(a1, mu_a1, s, n, mu_n=power(mu_a1, n))
        assert 0 <= tv <= 1
    assert lclt_tv_error(a1, mu_a1, s, 400) < lclt_tv_error(a1, mu_a1, s, 50)


@pytest.mark.parametrize("n", [1, 2, 5])
@pytest.mark.parametrize("S", [np.array([[0.2]]), np.array([[0.3, 0.05], [0.05, 0.15]])])
def test_poisson_summation(n, S):
    lhs, rhs = poisson_sides(S, n, cutoff=40)
    assert abs(lhs - rhs) < 1e-10
