"""Exact arithmetic for affine Weyl groups acting on R^m.

Elements are affine maps ``x -> A x + b`` written in lattice-basis
coordinates, so ``A`` and ``b`` are integral and the translation lattice is
``Z^m`` internally.  The Euclidean geometry is carried separately by the
basis matrix ``B`` (columns = lattice basis vectors in R^m).

Internally an element is a pair ``(w, t)`` where ``w`` indexes the finite
Weyl group ``W`` (the linear part) and ``t`` is the integer translation.
Most of the heavy lifting works on numpy arrays of such pairs.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    EmbeddingCollision,
    KeyRangeError,
    NonInvolutionGenerator,
    SpecError,
    WeylClosureOverflow,
)

BUILTIN_NAMES = ("A1", "A1xA1", "A2", "C2")

DEFAULT_CLOSURE_CAP = 10_000


@dataclass(frozen=True, order=True)
class GroupElement:
    """Affine map with integer linear part (row-major) and integer translation."""

    linear: tuple[int, ...]
    trans: tuple[int, ...]

    @property
    def rank(self) -> int:
        return len(self.trans)

    @classmethod
    def identity(cls, m: int) -> "GroupElement":
        lin = tuple(int(i == j) for i in range(m) for j in range(m))
        return cls(lin, (0,) * m)

    @classmethod
    def from_arrays(cls, linear, trans) -> "GroupElement":
        return cls(tuple(int(x) for x in np.ravel(linear)), tuple(int(x) for x in np.ravel(trans)))

    def matrix(self) -> np.ndarray:
        m = self.rank
        return np.array(self.linear, dtype=np.int64).reshape(m, m)

    def is_identity(self) -> bool:
        return self == GroupElement.identity(self.rank)

    def __str__(self) -> str:
        return ",".join(map(str, self.linear)) + ";" + ",".join(map(str, self.trans))

    @classmethod
    def parse(cls, text: str) -> "GroupElement":
        lin, _, tr = text.strip().partition(";")
        linear = tuple(int(x) for x in lin.split(",") if x.strip())
        trans = tuple(int(x) for x in tr.split(",") if x.strip())
        if len(linear) != len(trans) ** 2:
            raise ValueError(f"malformed element {text!r}")
        return cls(linear, trans)


def multiply(g: GroupElement, h: GroupElement) -> GroupElement:
    """Composition ``g o h``: ``(A1, b1)(A2, b2) = (A1 A2, A1 b2 + b1)``."""
    m = g.rank
    a1, a2 = g.linear, h.linear
    lin = tuple(
        sum(a1[i * m + k] * a2[k * m + j] for k in range(m)) for i in range(m) for j in range(m)
    )
    tr = tuple(sum(a1[i * m + k] * h.trans[k] for k in range(m)) + g.trans[i] for i in range(m))
    return GroupElement(lin, tr)


def inverse(g: GroupElement) -> GroupElement:
    a = np.array(g.linear, dtype=np.int64).reshape(g.rank, g.rank)
    a_inv = np.rint(np.linalg.inv(a)).astype(np.int64)
    b = -a_inv @ np.array(g.trans, dtype=np.int64)
    return GroupElement.from_arrays(a_inv, b)


@dataclass(frozen=True)
class Generator:
    name: str
    linear: tuple[int, ...]
    trans: tuple[int, ...]

    def element(self) -> GroupElement:
        return GroupElement(tuple(self.linear), tuple(self.trans))


@dataclass(frozen=True)
class GroupSpec:
    """Declarative description of an affine Weyl group.

    ``basis`` is row-major ``B`` (lattice coordinates -> R^m); ``basepoint``
    is the point ``o`` in lattice coordinates, exact rationals.
    """

    rank: int
    generators: tuple[Generator, ...]
    basis: tuple[float, ...]
    basepoint: tuple[Fraction, ...]
    weyl_order: int
    covolume: float | None = None
    name: str = "custom"

    def basis_matrix(self) -> np.ndarray:
        return np.array(self.basis, dtype=float).reshape(self.rank, self.rank)


class Group:
    """An enumerated affine Weyl group ``Lambda x| W``.

    Build instances with :func:`build_group` or :func:`product_group`.
    """

    def __init__(self, spec: GroupSpec, weyl: list[np.ndarray], factors=None):
        self.spec = spec
        self.name = spec.name
        self.m = spec.rank
        self.factors = factors
        self.weyl = np.array(weyl, dtype=np.int64).reshape(len(weyl), self.m, self.m)
        self.order = len(weyl)
        self._index = {a.tobytes(): i for i, a in enumerate(self.weyl)}
        if len(self._index) != self.order:
            raise SpecError("duplicate Weyl group elements")
        self.mult = np.empty((self.order, self.order), dtype=np.int64)
        for i in range(self.order):
            prods = self.weyl[i] @ self.weyl
            for j in range(self.order):
                self.mult[i, j] = self._index[prods[j].tobytes()]
        if not np.array_equal(self.weyl[0], np.eye(self.m, dtype=np.int64)):
            raise SpecError("W must be listed with the identity first")
        self.inv = np.argmax(self.mult == 0, axis=1)
        self.basis = spec.basis_matrix()
        self.covolume = abs(float(np.linalg.det(self.basis)))
        self.basepoint = tuple(Fraction(x) for x in spec.basepoint)
        # A_w o - o, exact and as floats
        self.offsets_exact = []
        for a in self.weyl:
            self.offsets_exact.append(
                tuple(
                    sum(int(a[i, k]) * self.basepoint[k] for k in range(self.m)) - self.basepoint[i]
                    for i in range(self.m)
                )
            )
        self.offsets = np.array([[float(x) for x in row] for row in self.offsets_exact])
        self.gen_names = [g.name for g in spec.generators]
        self.gen_w = np.array(
            [self._index[np.array(g.linear, dtype=np.int64).reshape(self.m, self.m).tobytes()]
             for g in spec.generators],
            dtype=np.int64,
        )
        self.gen_t = np.array([g.trans for g in spec.generators], dtype=np.int64).reshape(-1, self.m)
        wbits = max(1, (self.order - 1).bit_length())
        self._wbits = wbits
        self._tbits = (62 - wbits) // self.m
        self._toff = 1 << (self._tbits - 1)
        self._ball_cache: dict[int, tuple] = {}

    def __repr__(self) -> str:
        return f"Group({self.name!r}, rank={self.m}, |W|={self.order})"

    # -- element conversion -------------------------------------------------
    def element(self, w: int, t) -> GroupElement:
        return GroupElement.from_arrays(self.weyl[int(w)], t)

    def locate(self, g: GroupElement) -> tuple[int, np.ndarray]:
        if g.rank != self.m:
            raise ValueError(f"element of rank {g.rank} given to rank-{self.m} group")
        key = np.array(g.linear, dtype=np.int64).reshape(self.m, self.m).tobytes()
        if key not in self._index:
            raise ValueError(f"linear part of {g} is not in W")
        return self._index[key], np.array(g.trans, dtype=np.int64)

    def identity(self) -> GroupElement:
        return GroupElement.identity(self.m)

    def generators(self) -> list[GroupElement]:
        return [g.element() for g in self.spec.generators]

    def label(self, w: int, t) -> str:
        t = tuple(int(x) for x in np.ravel(t))
        if w == 0 and not any(t):
            return "id"
        for name, gw, gt in zip(self.gen_names, self.gen_w, self.gen_t):
            if gw == w and tuple(gt) == t:
                return name
        return str(self.element(w, t))

    # -- vectorised group law -------------------------------------------------
    def multiply_arrays(self, w1, t1, w2, t2):
        """Right action: ``(w1, t1)(w2, t2) = (w1 w2, A_{w1} t2 + t1)`` elementwise."""
        w1 = np.asarray(w1)
        w2 = np.asarray(w2)
        t1 = np.asarray(t1, dtype=np.int64)
        t2 = np.asarray(t2, dtype=np.int64)
        rot = np.einsum("kij,kj->ki", self.weyl[w1], np.broadcast_to(t2, t1.shape))
        return self.mult[w1, w2], t1 + rot

    def encode(self, w, t) -> np.ndarray:
        """Pack ``(w, t)`` pairs into sortable int64 keys."""
        w = np.asarray(w, dtype=np.int64)
        t = np.asarray(t, dtype=np.int64).reshape(len(w), self.m)
        if t.size and np.abs(t).max() >= self._toff:
            raise KeyRangeError(
                f"translation coordinate {int(np.abs(t).max())} exceeds key range {self._toff}"
            )
        keys = w.copy()
        for i in range(self.m):
            keys |= (t[:, i] + self._toff) << (self._wbits + i * self._tbits)
        return keys

    def decode(self, keys) -> tuple[np.ndarray, np.ndarray]:
        keys = np.asarray(keys, dtype=np.int64)
        w = keys & ((1 << self._wbits) - 1)
        mask = (1 << self._tbits) - 1
        t = np.empty((len(keys), self.m), dtype=np.int64)
        for i in range(self.m):
            t[:, i] = ((keys >> (self._wbits + i * self._tbits)) & mask) - self._toff
        return w, t

    def embed_arrays(self, w, t) -> np.ndarray:
        """Phi for arrays of elements: ``B (t + A_w o - o)``."""
        coords = np.asarray(t, dtype=float) + self.offsets[np.asarray(w)]
        return coords @ self.basis.T

    def ball_arrays(self, radius: int):
        """All elements of word norm <= radius as ``(w, t, norm)``, sorted by key."""
        radius = int(radius)
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        cached = [r for r in self._ball_cache if r >= radius]
        if cached:
            w, t, norms, keys = self._ball_cache[min(cached)]
            keep = norms <= radius
            return w[keep], t[keep], norms[keep]
        w, t, norms = _bfs_ball(self, radius)
        keys = self.encode(w, t)
        order = np.argsort(keys)
        entry = (w[order], t[order], norms[order], keys[order])
        self._ball_cache[radius] = entry
        return entry[0], entry[1], entry[2]


def _bfs_ball(group: Group, radius: int):
    m = group.m
    # precomputed A_w b_s for every (w, s)
    shifts = np.einsum("wij,sj->swi", group.weyl, group.gen_t)
    fw = np.zeros(1, dtype=np.int64)
    ft = np.zeros((1, m), dtype=np.int64)
    seen = group.encode(fw, ft)
    ws, ts, ns = [fw], [ft], [np.zeros(1, dtype=np.int64)]
    for r in range(1, radius + 1):
        cand_w = np.concatenate([group.mult[fw, gw] for gw in group.gen_w])
        cand_t = np.concatenate([ft + shifts[s][fw] for s in range(len(group.gen_w))])
        keys = group.encode(cand_w, cand_t)
        keys, first = np.unique(keys, return_index=True)
        fresh = ~np.isin(keys, seen, assume_unique=True)
        if not fresh.any():
            break
        idx = first[fresh]
        fw, ft = cand_w[idx], cand_t[idx]
        seen = np.union1d(seen, keys[fresh])
        ws.append(fw)
        ts.append(ft)
        ns.append(np.full(len(fw), r, dtype=np.int64))
    return np.concatenate(ws), np.concatenate(ts), np.concatenate(ns)


def ball(group: Group, radius: int) -> list[GroupElement]:
    """Word-metric ball ``{x : |x|_S <= radius}`` as sorted elements."""
    w, t, _ = group.ball_arrays(radius)
    return sorted(group.element(wi, ti) for wi, ti in zip(w, t))


def word_norm(group: Group, g: GroupElement, max_radius: int = 10_000) -> int:
    wi, ti = group.locate(g)
    key = group.encode([wi], ti[None, :])[0]
    r = 4
    while r <= max_radius:
        w, t, norms = group.ball_arrays(r)
        keys = group.encode(w, t)
        hit = np.flatnonzero(keys == key)
        if hit.size:
            return int(norms[hit[0]])
        r *= 2
    raise ValueError(f"{g} not found within radius {max_radius}")


def embed_exact(group: Group, g: GroupElement) -> tuple[Fraction, ...]:
    """``g.o - o`` in lattice coordinates, as exact rationals."""
    w, t = group.locate(g)
    return tuple(int(t[i]) + group.offsets_exact[w][i] for i in range(group.m))


def embed(group: Group, g: GroupElement) -> np.ndarray:
    """The equivariant embedding ``Phi(g) = B (g.o - o)``."""
    coords = np.array([float(x) for x in embed_exact(group, g)])
    return group.basis @ coords


def build_group(
    spec: GroupSpec,
    closure_cap: int = DEFAULT_CLOSURE_CAP,
    check_radius: int = 4,
) -> Group:
    m = spec.rank
    if m < 1:
        raise SpecError("rank must be positive")
    if len(spec.basis) != m * m or len(spec.basepoint) != m:
        raise SpecError("basis/basepoint dimensions do not match rank")
    if not spec.generators:
        raise SpecError("at least one generator is required")
    ident = GroupElement.identity(m)
    for gen in spec.generators:
        if len(gen.linear) != m * m or len(gen.trans) != m:
            raise SpecError(f"generator {gen.name!r} has wrong dimensions")
        g = gen.element()
        if g == ident:
            raise SpecError(f"generator {gen.name!r} is the identity")
        if multiply(g, g) != ident:
            raise NonInvolutionGenerator(f"generator {gen.name!r} does not square to the identity")
        if abs(round(np.linalg.det(g.matrix()))) != 1:
            raise SpecError(f"generator {gen.name!r} has |det| != 1")

    basis = spec.basis_matrix()
    det = abs(float(np.linalg.det(basis)))
    if det < 1e-12:
        raise SpecError("basis matrix is singular")
    if spec.covolume is not None and not math.isclose(det, spec.covolume, rel_tol=1e-9):
        raise SpecError(f"|det B| = {det!r} differs from declared covolume {spec.covolume!r}")

    mats = [np.array(g.linear, dtype=np.int64).reshape(m, m) for g in spec.generators]
    weyl = [np.eye(m, dtype=np.int64)]
    seen = {weyl[0].tobytes()}
    frontier = list(weyl)
    while frontier:
        nxt = []
        for a in frontier:
            for s in mats:
                prod = a @ s
                key = prod.tobytes()
                if key not in seen:
                    seen.add(key)
                    weyl.append(prod)
                    nxt.append(prod)
                    if len(weyl) > closure_cap:
                        raise WeylClosureOverflow(
                            f"linear parts generate more than {closure_cap} elements"
                        )
        frontier = nxt
    if len(weyl) != spec.weyl_order:
        raise SpecError(f"generators give |W| = {len(weyl)}, spec declares {spec.weyl_order}")

    group = Group(spec, weyl)
    _check_injective(group, check_radius)
    return group


def _check_injective(group: Group, radius: int) -> None:
    w, t, _ = group.ball_arrays(radius)
    den = 1
    for x in group.basepoint:
        den = den * x.denominator // math.gcd(den, x.denominator)
    offs = np.array([[int(x * den) for x in row] for row in group.offsets_exact], dtype=np.int64)
    scaled = t * den + offs[w]
    if len(np.unique(scaled, axis=0)) != len(w):
        raise EmbeddingCollision("two ball elements share an embedding; basepoint not interior")


@functools.lru_cache(maxsize=None)
def product_group(g1: Group, g2: Group) -> Group:
    """``Gamma1 x Gamma2`` with generating set ``(S1 u {id}) x (S2 u {id})`` minus the identity."""
    m1, m2 = g1.m, g2.m
    m = m1 + m2
    id1 = Generator("id", GroupElement.identity(m1).linear, (0,) * m1)
    id2 = Generator("id", GroupElement.identity(m2).linear, (0,) * m2)
    gens = []
    for a in (id1, *g1.spec.generators):
        for b in (id2, *g2.spec.generators):
            if a is id1 and b is id2:
                continue
            lin = np.zeros((m, m), dtype=np.int64)
            lin[:m1, :m1] = np.array(a.linear).reshape(m1, m1)
            lin[m1:, m1:] = np.array(b.linear).reshape(m2, m2)
            gens.append(
                Generator(f"({a.name},{b.name})", tuple(int(x) for x in lin.ravel()),
                          tuple(a.trans) + tuple(b.trans))
            )
    basis = np.zeros((m, m))
    basis[:m1, :m1] = g1.basis
    basis[m1:, m1:] = g2.basis
    cov = None
    if g1.spec.covolume is not None and g2.spec.covolume is not None:
        cov = g1.spec.covolume * g2.spec.covolume
    spec = GroupSpec(
        rank=m,
        generators=tuple(gens),
        basis=tuple(float(x) for x in basis.ravel()),
        basepoint=g1.basepoint + g2.basepoint,
        weyl_order=g1.order * g2.order,
        covolume=cov,
        name=f"{g1.name}x{g2.name}",
    )
    weyl = []
    for a in g1.weyl:
        for b in g2.weyl:
            blk = np.zeros((m, m), dtype=np.int64)
            blk[:m1, :m1] = a
            blk[m1:, m1:] = b
            weyl.append(blk)
    return Group(spec, weyl, factors=(g1, g2))


# -- built-ins ----------------------------------------------------------------

def _a2_basis() -> tuple[float, ...]:
    # simple coroots at 120 degrees, scaled so the lattice has covolume 1
    length = math.sqrt(2.0 / math.sqrt(3.0))
    return (length, -length / 2.0, 0.0, length * math.sqrt(3.0) / 2.0)


def builtin_spec(name: str) -> GroupSpec:
    F = Fraction
    if name == "A1":
        # chamber [0, 1/2], Lambda = Z
        return GroupSpec(
            rank=1,
            generators=(Generator("s1", (-1,), (0,)), Generator("s2", (-1,), (1,))),
            basis=(1.0,),
            basepoint=(F(1, 4),),
            weyl_order=2,
            covolume=1.0,
            name="A1",
        )
    if name == "A2":
        # coroot-lattice coordinates; alcove with vertices 0, w1v, w2v
        return GroupSpec(
            rank=2,
            generators=(
                Generator("s1", (-1, 1, 0, 1), (0, 0)),
                Generator("s2", (1, 0, 1, -1), (0, 0)),
                Generator("s0", (0, -1, -1, 0), (1, 1)),
            ),
            basis=_a2_basis(),
            basepoint=(F(1, 3), F(1, 3)),
            weyl_order=6,
            covolume=1.0,
            name="A2",
        )
    if name == "C2":
        # alcove 0 < y < x < 1/2, Lambda = Z^2
        return GroupSpec(
            rank=2,
            generators=(
                Generator("s1", (1, 0, 0, -1), (0, 0)),
                Generator("s2", (0, 1, 1, 0), (0, 0)),
                Generator("s3", (-1, 0, 0, 1), (1, 0)),
            ),
            basis=(1.0, 0.0, 0.0, 1.0),
            basepoint=(F(1, 3), F(1, 6)),
            weyl_order=8,
            covolume=1.0,
            name="C2",
        )
    if name == "A1xA1":
        return builtin_group("A1xA1").spec
    raise KeyError(f"unknown built-in group {name!r}; choose from {BUILTIN_NAMES}")


@functools.lru_cache(maxsize=None)
def builtin_group(name: str) -> Group:
    if name == "A1xA1":
        a1 = builtin_group("A1")
        return product_group(a1, a1)
    return build_group(builtin_spec(name))


# -- spec files ---------------------------------------------------------------

def spec_to_dict(spec: GroupSpec) -> dict:
    return {
        "name": spec.name,
        "rank": spec.rank,
        "generators": [
            {"name": g.name, "linear": list(g.linear), "trans": list(g.trans)}
            for g in spec.generators
        ],
        "basis": list(spec.basis),
        "basepoint": [[x.numerator, x.denominator] for x in spec.basepoint],
        "weyl_order": spec.weyl_order,
        "covolume": spec.covolume,
    }


def spec_from_dict(data: dict) -> GroupSpec:
    try:
        rank = int(data["rank"])
        gens = tuple(
            Generator(str(g["name"]), tuple(int(x) for x in g["linear"]), tuple(int(x) for x in g["trans"]))
            for g in data["generators"]
        )
        basis = tuple(float(x) for x in data["basis"])
        basepoint = tuple(Fraction(int(p[0]), int(p[1])) for p in data["basepoint"])
        order = int(data["weyl_order"])
    except KeyError as exc:
        raise SpecError(f"group spec missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError, IndexError, ZeroDivisionError) as exc:
        raise SpecError(f"malformed group spec: {exc}") from None
    cov = data.get("covolume")
    return GroupSpec(rank, gens, basis, basepoint, order,
                     None if cov is None else float(cov), str(data.get("name", "custom")))


def load_spec(path) -> GroupSpec:
    return spec_from_dict(json.loads(Path(path).read_text()))


def resolve_group(name_or_path: str) -> Group:
    """Built-in name or path to a JSON spec file."""
    if name_or_path in BUILTIN_NAMES:
        return builtin_group(name_or_path)
    return build_group(load_spec(name_or_path))
