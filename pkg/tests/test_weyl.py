import json
from fractions import Fraction

import numpy as np
import pytest

from weylwalk import ball, build_group, builtin_group, embed, inverse, multiply, product_group
from weylwalk.errors import (
    EmbeddingCollision,
    KeyRangeError,
    NonInvolutionGenerator,
    WeylClosureOverflow,
)
from weylwalk.weyl import (
    BUILTIN_NAMES,
    Generator,
    GroupElement,
    GroupSpec,
    builtin_spec,
    embed_exact,
    load_spec,
    spec_from_dict,
    spec_to_dict,
    word_norm,
)


def gen(group, name):
    return dict(zip(group.gen_names, group.generators()))[name]


@pytest.mark.parametrize("name,order", [("A1", 2), ("A2", 6), ("C2", 8), ("A1xA1", 4)])
def test_weyl_orders(name, order):
    assert builtin_group(name).order == order


def test_translation_generator_rejected():
    spec = GroupSpec(rank=1, generators=(Generator("t", (1,), (1,)),), basis=(1.0,),
                     basepoint=(Fraction(1, 4),), weyl_order=1)
    with pytest.raises(NonInvolutionGenerator):
        build_group(spec)


def test_closure_overflow():
    with pytest.raises(WeylClosureOverflow):
        build_group(builtin_spec("C2"), closure_cap=4)


def test_wrong_weyl_order_rejected():
    spec = builtin_spec("A2")
    bad = GroupSpec(spec.rank, spec.generators, spec.basis, spec.basepoint, 5, spec.covolume)
    with pytest.raises(ValueError):
        build_group(bad)


def test_basepoint_on_wall_collides():
    spec = builtin_spec("A1")
    bad = GroupSpec(1, spec.generators, spec.basis, (Fraction(0),), 2, 1.0)
    with pytest.raises(EmbeddingCollision):
        build_group(bad)


def test_a1_group_law(a1):
    s1, s2 = gen(a1, "s1"), gen(a1, "s2")
    e = a1.identity()
    assert multiply(s1, s1) == e
    t = multiply(s2, s1)
    assert t.linear == (1,) and t.trans == (1,)
    assert multiply(t, inverse(t)) == e


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_involutions_and_associativity(name):
    g = builtin_group(name)
    gens = g.generators()
    for s in gens:
        assert multiply(s, s).is_identity()
    for a in gens:
        for b in gens:
            for c in gens:
                assert multiply(multiply(a, b), c) == multiply(a, multiply(b, c))


def test_a1_embedding(a1):
    s1, s2 = gen(a1, "s1"), gen(a1, "s2")
    assert embed_exact(a1, s1) == (Fraction(-1, 2),)
    assert embed_exact(a1, multiply(s2, s1)) == (Fraction(1),)
    assert embed(a1, a1.identity()) == pytest.approx([0.0])


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_embedding_equivariance(name):
    g = builtin_group(name)
    w, t, _ = g.ball_arrays(5)
    for k in range(g.m):
        lam = np.zeros(g.m, dtype=np.int64)
        lam[k] = 1
        # (I, lam) * (w, t) = (w, t + lam)
        shifted = g.embed_arrays(w, t + lam)
        assert np.allclose(shifted - g.embed_arrays(w, t), g.basis @ lam, atol=1e-12)
    for wi, ti in list(zip(w, t))[:40]:
        x = g.element(wi, ti)
        lam = GroupElement.from_arrays(np.eye(g.m, dtype=int), np.arange(1, g.m + 1))
        diff = [a - b for a, b in zip(embed_exact(g, multiply(lam, x)), embed_exact(g, x))]
        # lattice coordinates: the difference is lambda exactly
        assert diff == [Fraction(i) for i in range(1, g.m + 1)]


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_embedding_injective_on_ball(name):
    g = builtin_group(name)
    w, t, _ = g.ball_arrays(8)
    phi = np.round(g.embed_arrays(w, t), 9)
    assert len(np.unique(phi, axis=0)) == len(w)


def test_ball_small_radii(a1):
    assert ball(a1, 0) == [a1.identity()]
    assert len(ball(a1, 3)) == 7
    _, _, norms = a1.ball_arrays(3)
    assert sorted(np.bincount(norms)) == [1, 2, 2, 2]


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_ball_growth(name):
    g = builtin_group(name)
    for r in (10, 20, 30):
        ratio = len(g.ball_arrays(2 * r)[0]) / len(g.ball_arrays(r)[0])
        assert 2**g.m / 2 <= ratio <= 2 * 2**g.m


def test_a2_ball_quadratic(a2):
    vals = [len(a2.ball_arrays(r)[0]) / r**2 for r in range(10, 41, 10)]
    assert min(vals) > 0.5 and max(vals) < 3.0


def test_word_norm(a1):
    s1, s2 = gen(a1, "s1"), gen(a1, "s2")
    assert word_norm(a1, multiply(s2, s1)) == 2
    assert word_norm(a1, a1.identity()) == 0


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_cosets_surjective(name):
    g = builtin_group(name)
    w, _, _ = g.ball_arrays(2 * g.order)
    assert set(w.tolist()) == set(range(g.order))


def test_product_group():
    a2 = builtin_group("A2")
    p = product_group(a2, a2)
    assert p.m == 4 and p.order == 36
    assert len(p.generators()) == 15
    a1 = builtin_group("A1")
    pa = product_group(a1, a1)
    s1 = gen(a1, "s1")
    x = gen(pa, "(s1,s2)")
    y = gen(pa, "(s1,id)")
    z = multiply(x, y)
    assert z.linear == (1, 0, 0, -1) and z.trans == (0, 1)
    assert s1.linear == (-1,)


def test_encode_decode_roundtrip(a2):
    w, t, _ = a2.ball_arrays(12)
    keys = a2.encode(w, t)
    w2, t2 = a2.decode(keys)
    assert np.array_equal(w, w2) and np.array_equal(t, t2)
    assert np.all(np.diff(keys) > 0)


def test_key_range(a1):
    with pytest.raises(KeyRangeError):
        a1.encode([0], [[2**62]])


def test_element_parse_roundtrip(c2):
    for g in ball(c2, 3):
        assert GroupElement.parse(str(g)) == g


def test_spec_file_roundtrip(tmp_path):
    spec = builtin_spec("C2")
    path = tmp_path / "c2.json"
    path.write_text(json.dumps(spec_to_dict(spec)))
    again = load_spec(path)
    assert again == spec_from_dict(spec_to_dict(spec))
    assert build_group(again).order == 8
