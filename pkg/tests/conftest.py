from fractions import Fraction

import pytest

from weylwalk import build_network, builtin_group, lazy_uniform
from weylwalk.measures import generator_measure


@pytest.fixture(scope="session")
def a1():
    return builtin_group("A1")


@pytest.fixture(scope="session")
def a2():
    return builtin_group("A2")


@pytest.fixture(scope="session")
def c2():
    return builtin_group("C2")


@pytest.fixture(scope="session")
def a1xa1():
    return builtin_group("A1xA1")


@pytest.fixture(scope="session")
def mu_a1(a1):
    return lazy_uniform(a1, 1 / 3)


@pytest.fixture(scope="session")
def mu_a1_exact(a1):
    return lazy_uniform(a1, Fraction(1, 3), exact=True)


@pytest.fixture(scope="session")
def net_a1(a1, mu_a1):
    return build_network(a1, mu_a1)


@pytest.fixture(scope="session")
def net_a1_pq(a1):
    # p = mu(s1), q = mu(s2)
    return build_network(a1, generator_measure(a1, {"s1": 0.5, "s2": 0.2}))
