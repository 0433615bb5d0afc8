import dataclasses
from fractions import Fraction

import numpy as np
import pytest

from weylwalk import build_network, builtin_group, check_reversibility, lazy_uniform, noised_pair
from weylwalk.errors import AsymmetricMeasure, NotIrreducible
from weylwalk.measures import from_weights, generator_measure
from weylwalk.network import edge_displacement
from weylwalk.weyl import BUILTIN_NAMES, multiply


def test_a1_network_shape(net_a1):
    loops = net_a1.loops
    assert net_a1.n_vertices == 2
    assert loops.sum() == 2 and (~loops).sum() == 4
    assert np.allclose(net_a1.p[~loops], 1 / 3)
    assert np.allclose(net_a1.cond[~loops], 1 / 6)
    assert sorted(np.abs(net_a1.disp[~loops, 0])) == [0.5] * 4
    assert np.all(net_a1.disp[loops] == 0)


def test_edge_count(a2):
    mu = lazy_uniform(a2, 0.25)
    net = build_network(a2, mu)
    assert net.n_edges == a2.order * len(mu)


def test_product_network_matches_figure(a1xa1, a1):
    net = build_network(a1xa1, noised_pair(lazy_uniform(a1, 1 / 3), 0.5, a1xa1))
    assert net.n_vertices == 4
    assert net.n_edges == 4 * 9
    # per vertex: the id loop, two moves in each single coordinate, four in both
    for x in range(4):
        targets = net.terminus[net.edges_at(x)]
        assert sorted(np.bincount(targets, minlength=4)) == [1, 2, 2, 4]


def test_stationary_sums(net_a1):
    sums = np.zeros(net_a1.n_vertices)
    np.add.at(sums, net_a1.origin, net_a1.cond)
    assert np.allclose(sums, net_a1.pi)


def test_reverse_pairing(net_a1):
    rev = net_a1.rev
    assert np.array_equal(rev[rev], np.arange(net_a1.n_edges))
    assert np.array_equal(net_a1.origin[rev], net_a1.terminus)
    assert np.allclose(net_a1.disp[rev], -net_a1.disp)


def test_loops_carry_id_mass(net_a1):
    assert np.allclose(net_a1.p[net_a1.loops], 1 / 3)


def test_not_irreducible(a1):
    s1 = a1.generators()[0]
    with pytest.raises(NotIrreducible):
        build_network(a1, from_weights(a1, {a1.identity(): 0.5, s1: 0.5}))


def test_index_two_subgroup_rejected(a1):
    # s1 and s2 s1 s2 generate translations by 2 only
    from weylwalk.weyl import multiply as mul
    s1, s2 = a1.generators()
    r = mul(mul(s2, s1), s2)
    with pytest.raises(NotIrreducible):
        build_network(a1, from_weights(a1, {a1.identity(): 0.4, s1: 0.3, r: 0.3}))


def test_asymmetric_measure(a1):
    s1, s2 = a1.generators()
    t = multiply(s2, s1)
    mu = from_weights(a1, {a1.identity(): 0.4, s1: 0.2, s2: 0.2, t: 0.2})
    with pytest.raises(AsymmetricMeasure):
        build_network(a1, mu)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_reversible_builtins(name):
    g = builtin_group(name)
    if name == "A1xA1":
        mu = noised_pair(lazy_uniform(g.factors[0], Fraction(1, 3), exact=True), Fraction(1, 2), g)
    else:
        mu = lazy_uniform(g, Fraction(1, 3), exact=True)
    assert check_reversibility(build_network(g, mu)) == 0


def test_reversible_nonuniform(a1):
    mu = generator_measure(a1, {"s1": Fraction(1, 2), "s2": Fraction(3, 10)}, exact=True)
    assert check_reversibility(build_network(a1, mu)) == 0


def test_corrupted_network_reports_violation(net_a1):
    p = net_a1.p.copy()
    p[1] += 0.05
    bad = dataclasses.replace(net_a1, p=p)
    assert check_reversibility(bad) > 0.01


def test_translation_atoms_keep_displacement(a1):
    # a measure containing a pure translation gives loops with nonzero Phi
    s1, s2 = a1.generators()
    t = multiply(s2, s1)
    from weylwalk.weyl import inverse
    mu = from_weights(a1, {a1.identity(): 0.2, s1: 0.2, s2: 0.2, t: 0.2, inverse(t): 0.2})
    net = build_network(a1, mu)
    trans = [e for e in range(net.n_edges) if net.origin[e] == net.terminus[e] and not net.loops[e]]
    assert len(trans) == 4
    assert np.allclose(np.abs(net.disp[trans, 0]), 1.0)


@pytest.mark.parametrize("name", ["A2", "C2"])
def test_displacement_lift_invariance(name):
    g = builtin_group(name)
    net = build_network(g, lazy_uniform(g, 0.3))
    w, t, _ = g.ball_arrays(6)
    for e in range(net.n_edges):
        lifts = [g.element(wi, ti) for wi, ti in zip(w, t) if wi == net.origin[e]][:5]
        for x in lifts:
            assert np.allclose(edge_displacement(net, e, x), net.disp[e], atol=1e-12)


def test_product_marginal_conductances(a1xa1, a1):
    mu = lazy_uniform(a1, 1 / 3)
    fac = build_network(a1, mu)
    prod = build_network(a1xa1, noised_pair(mu, 0.4, a1xa1))
    # sum conductances by (first coordinate origin, first coordinate terminus, first-factor atom)
    agg = {}
    for e in range(prod.n_edges):
        x1 = prod.origin[e] // a1.order
        y1 = prod.terminus[e] // a1.order
        label = prod.labels[e].strip("()").split(",")[0] if prod.labels[e] != "id" else "id"
        key = (int(x1), int(y1), label)
        agg[key] = agg.get(key, 0.0) + prod.cond[e]
    for e in range(fac.n_edges):
        key = (int(fac.origin[e]), int(fac.terminus[e]), fac.labels[e])
        assert agg[key] == pytest.approx(fac.cond[e], abs=1e-15)


def test_network_csv(net_a1):
    rows = net_a1.to_csv().splitlines()
    assert rows[0] == "origin,terminus,generator,p,c,phi0"
    assert len(rows) == 1 + net_a1.n_edges
