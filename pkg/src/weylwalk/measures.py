"""Finitely supported probability measures on an enumerated group.

A :class:`Measure` stores its atoms as parallel numpy arrays ``(w, t, p)``
sorted by the group's packed key.  Weights are float64 by default; passing
``exact=True`` stores :class:`fractions.Fraction` weights in an object array,
which keeps every operation exact (meant for small ``n`` oracle checks).
"""
from __future__ import annotations

import csv
import io
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import GroupMismatch, LazinessOutOfRange, RhoOutOfRange, SupportOverflow
from .weyl import Group, GroupElement, product_group

DEFAULT_SUPPORT_CAP = 5_000_000
PRUNE_BELOW = 1e-300
MASS_TOL = 1e-12
# dense accumulation is used while the bounding box of the keys stays below this
_BOX_LIMIT = 1 << 26


class Measure:
    """Probability measure on ``group`` with finitely many atoms."""

    __slots__ = ("group", "w", "t", "p", "exact", "_keys")

    def __init__(self, group: Group, w, t, p, *, exact: bool = False, check: bool = True):
        self.group = group
        self.exact = exact
        w = np.asarray(w, dtype=np.int64)
        t = np.asarray(t, dtype=np.int64).reshape(len(w), group.m)
        if exact:
            p = np.array([Fraction(x) for x in p], dtype=object)
        else:
            p = np.asarray(p, dtype=float)
        keys = group.encode(w, t)
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        if len(keys) > 1 and np.any(keys[1:] == keys[:-1]):
            raise ValueError("duplicate atoms; accumulate before constructing a Measure")
        self.w, self.t, self.p, self._keys = w[order], t[order], p[order], keys
        if check:
            self._validate()

    def _validate(self):
        if self.exact:
            if any(x <= 0 for x in self.p):
                raise ValueError("measure weights must be positive")
            if sum(self.p, Fraction(0)) != 1:
                raise ValueError(f"total mass {sum(self.p, Fraction(0))} != 1")
        else:
            if len(self.p) and (not np.all(np.isfinite(self.p)) or self.p.min() <= 0):
                raise ValueError("measure weights must be positive and finite")
            total = float(np.sum(self.p))
            if abs(total - 1.0) > MASS_TOL:
                raise ValueError(f"total mass {total!r} differs from 1")

    # -- access ----------------------------------------------------------------
    @property
    def keys(self) -> np.ndarray:
        return self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def total(self):
        return sum(self.p, Fraction(0)) if self.exact else float(np.sum(self.p))

    def weight(self, g: GroupElement):
        wi, ti = self.group.locate(g)
        key = self.group.encode([wi], ti[None, :])[0]
        i = np.searchsorted(self._keys, key)
        if i < len(self._keys) and self._keys[i] == key:
            return self.p[i]
        return Fraction(0) if self.exact else 0.0

    __getitem__ = weight

    def atoms(self) -> dict[GroupElement, object]:
        return {self.group.element(wi, ti): pi for wi, ti, pi in zip(self.w, self.t, self.p)}

    def support(self) -> list[GroupElement]:
        return sorted(self.group.element(wi, ti) for wi, ti in zip(self.w, self.t))

    def to_float(self) -> "Measure":
        if not self.exact:
            return self
        return Measure(self.group, self.w, self.t, self.p.astype(float), check=False)

    def __repr__(self) -> str:
        mode = "exact" if self.exact else "float"
        return f"Measure({self.group.name}, atoms={len(self)}, {mode})"

    # -- serialisation ---------------------------------------------------------
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["element", "weight"])
        rows = sorted(zip(self.support_elements(), self.p), key=lambda r: r[0])
        for g, p in rows:
            writer.writerow([str(g), _fmt_weight(p)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def support_elements(self) -> list[GroupElement]:
        return [self.group.element(wi, ti) for wi, ti in zip(self.w, self.t)]


def _fmt_weight(p) -> str:
    if isinstance(p, Fraction):
        return f"{p.numerator}/{p.denominator}"
    return f"{float(p):.17g}"


def measure_from_csv(group: Group, source) -> Measure:
    text = Path(source).read_text() if not isinstance(source, str) or "\n" not in source else source
    reader = csv.DictReader(io.StringIO(text))
    items = {}
    exact = False
    for row in reader:
        g = GroupElement.parse(row["element"])
        raw = row["weight"]
        if "/" in raw:
            exact = True
            items[g] = Fraction(raw)
        else:
            items[g] = float(raw)
    return from_weights(group, items, exact=exact)


# -- constructors ---------------------------------------------------------------

def from_weights(group: Group, weights: dict, *, exact: bool = False) -> Measure:
    """Measure from an ``{element: weight}`` mapping (zero weights dropped)."""
    items = [(g, p) for g, p in weights.items() if p != 0]
    w = np.empty(len(items), dtype=np.int64)
    t = np.empty((len(items), group.m), dtype=np.int64)
    for i, (g, _) in enumerate(items):
        w[i], t[i] = group.locate(g)
    return Measure(group, w, t, [p for _, p in items], exact=exact)


def delta(group: Group, g: GroupElement | None = None, *, exact: bool = False) -> Measure:
    g = group.identity() if g is None else g
    return from_weights(group, {g: Fraction(1) if exact else 1.0}, exact=exact)


def lazy_uniform(group: Group, lazy, *, exact: bool = False) -> Measure:
    """``mu(id) = lazy`` and the rest spread evenly over the generators."""
    lazy_f = float(lazy)
    if not 0.0 < lazy_f < 1.0:
        raise LazinessOutOfRange(f"laziness must lie in (0, 1), got {lazy!r}")
    gens = group.generators()
    if exact:
        lz = Fraction(lazy)
        step = (1 - lz) / len(gens)
    else:
        lz = lazy_f
        step = (1.0 - lz) / len(gens)
    weights = {group.identity(): lz}
    for g in gens:
        weights[g] = step
    return from_weights(group, weights, exact=exact)


def generator_measure(group: Group, probs: dict[str, float], lazy=None, *, exact=False) -> Measure:
    """Measure with per-generator weights given by name; the rest goes to the identity."""
    by_name = dict(zip(group.gen_names, group.generators()))
    weights = {}
    for name, p in probs.items():
        if name not in by_name:
            raise KeyError(f"unknown generator {name!r}")
        weights[by_name[name]] = Fraction(p) if exact else float(p)
    rest = (1 - sum(weights.values())) if lazy is None else (Fraction(lazy) if exact else float(lazy))
    if rest:
        weights[group.identity()] = rest
    return from_weights(group, weights, exact=exact)


# -- accumulation ---------------------------------------------------------------

def _accumulate(group: Group, w, t, p, exact: bool, cap: int):
    if exact:
        acc: dict[tuple, Fraction] = {}
        for wi, ti, pi in zip(w.tolist(), map(tuple, t.tolist()), p):
            k = (wi, ti)
            acc[k] = acc.get(k, Fraction(0)) + pi
        items = [(k, v) for k, v in acc.items() if v != 0]
        if len(items) > cap:
            raise SupportOverflow(f"{len(items)} atoms exceed cap {cap}")
        w2 = np.array([k[0] for k, _ in items], dtype=np.int64)
        t2 = np.array([k[1] for k, _ in items], dtype=np.int64).reshape(len(items), group.m)
        return w2, t2, np.array([v for _, v in items], dtype=object)

    lo = t.min(axis=0) if len(t) else np.zeros(group.m, dtype=np.int64)
    span = (t.max(axis=0) - lo + 1) if len(t) else np.ones(group.m, dtype=np.int64)
    box = group.order * int(np.prod(span.astype(object)))
    if box <= _BOX_LIMIT:
        code = w.copy()
        stride = group.order
        for i in range(group.m):
            code += (t[:, i] - lo[i]) * stride
            stride *= int(span[i])
        acc = np.bincount(code, weights=p, minlength=box)
        nz = np.flatnonzero(acc > PRUNE_BELOW)
        vals = acc[nz]
        w2 = nz % group.order
        rest = nz // group.order
        t2 = np.empty((len(nz), group.m), dtype=np.int64)
        for i in range(group.m):
            t2[:, i] = rest % span[i] + lo[i]
            rest //= span[i]
    else:
        keys = group.encode(w, t)
        uniq, inv = np.unique(keys, return_inverse=True)
        vals = np.bincount(inv.ravel(), weights=p)
        keep = vals > PRUNE_BELOW
        w2, t2 = group.decode(uniq[keep])
        vals = vals[keep]
    if len(vals) > cap:
        raise SupportOverflow(f"{len(vals)} atoms exceed cap {cap}")
    return w2, t2, vals


def _same_group(a: Measure, b: Measure):
    if a.group is not b.group:
        raise GroupMismatch(f"measures live on different groups: {a.group!r} vs {b.group!r}")


def convolve(a: Measure, b: Measure, cap: int = DEFAULT_SUPPORT_CAP) -> Measure:
    """``(a * b)(x) = sum_y a(y) b(y^-1 x)``."""
    _same_group(a, b)
    g = a.group
    exact = a.exact or b.exact
    ap = a.p if not exact else np.array([Fraction(x) for x in a.p], dtype=object)
    bp = b.p if not exact else np.array([Fraction(x) for x in b.p], dtype=object)
    ws, ts, ps = [], [], []
    if len(b) <= len(a):
        for j in range(len(b)):
            shift = g.weyl @ b.t[j]
            ws.append(g.mult[a.w, b.w[j]])
            ts.append(a.t + shift[a.w])
            ps.append(ap * bp[j])
    else:
        for i in range(len(a)):
            ws.append(g.mult[a.w[i], b.w])
            ts.append(a.t[i] + b.t @ g.weyl[a.w[i]].T)
            ps.append(bp * ap[i])
    w, t, p = _accumulate(g, np.concatenate(ws), np.concatenate(ts), np.concatenate(ps), exact, cap)
    return Measure(g, w, t, p, exact=exact, check=False)


def power(mu: Measure, n: int, cap: int = DEFAULT_SUPPORT_CAP) -> Measure:
    """The ``n``-fold convolution ``mu_n``; ``power(mu, 0)`` is the point mass at the identity."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return next(iter(powers(mu, [n], cap=cap)))[1]


def powers(mu: Measure, ns, cap: int = DEFAULT_SUPPORT_CAP):
    """Yield ``(n, mu_n)`` for the requested ``n`` values in increasing order."""
    targets = sorted(set(int(n) for n in ns))
    if targets and targets[0] < 0:
        raise ValueError("n must be nonnegative")
    cur = delta(mu.group, exact=mu.exact)
    k = 0
    for n in targets:
        while k < n:
            cur = convolve(cur, mu, cap=cap)
            k += 1
        yield n, cur


# -- product constructions ------------------------------------------------------

def _check_rho(rho):
    if not 0.0 <= float(rho) <= 1.0:
        raise RhoOutOfRange(f"rho must lie in [0, 1], got {rho!r}")


def _pair_group(mu: Measure, pair: Group | None) -> Group:
    pair = product_group(mu.group, mu.group) if pair is None else pair
    if pair.factors is None or pair.factors[0] is not mu.group or pair.factors[1] is not mu.group:
        raise GroupMismatch("pair group must be the product of mu's group with itself")
    return pair


def product_measure(a: Measure, b: Measure, pair: Group | None = None) -> Measure:
    """The product measure ``a x b`` on ``Gamma1 x Gamma2``."""
    pair = product_group(a.group, b.group) if pair is None else pair
    if pair.factors is None or pair.factors[0] is not a.group or pair.factors[1] is not b.group:
        raise GroupMismatch("pair group does not match the factor measures")
    exact = a.exact or b.exact
    ap = a.p if not exact else np.array([Fraction(x) for x in a.p], dtype=object)
    bp = b.p if not exact else np.array([Fraction(x) for x in b.p], dtype=object)
    nb = len(b)
    w = (a.w[:, None] * b.group.order + b.w[None, :]).ravel()
    t = np.concatenate(
        [np.repeat(a.t, nb, axis=0), np.tile(b.t, (len(a), 1))], axis=1
    )
    p = np.outer(ap, bp).ravel()
    keep = p != 0 if exact else p > PRUNE_BELOW
    return Measure(pair, w[keep], t[keep], p[keep], exact=exact, check=False)


def diagonal_measure(mu: Measure, pair: Group | None = None) -> Measure:
    pair = _pair_group(mu, pair)
    w = mu.w * mu.group.order + mu.w
    t = np.concatenate([mu.t, mu.t], axis=1)
    return Measure(pair, w, t, mu.p.copy(), exact=mu.exact, check=False)


def noised_pair(mu: Measure, rho, pair: Group | None = None) -> Measure:
    """``pi^rho = rho (mu x mu) + (1 - rho) mu_diag`` on ``Gamma x Gamma``."""
    _check_rho(rho)
    pair = _pair_group(mu, pair)
    if mu.exact:
        rho = Fraction(rho)
    else:
        rho = float(rho)
    parts_w, parts_t, parts_p = [], [], []
    if rho != 0:
        prod = product_measure(mu, mu, pair)
        parts_w.append(prod.w)
        parts_t.append(prod.t)
        parts_p.append(prod.p * rho)
    if rho != 1:
        diag = diagonal_measure(mu, pair)
        parts_w.append(diag.w)
        parts_t.append(diag.t)
        parts_p.append(diag.p * (1 - rho))
    w, t, p = _accumulate(
        pair, np.concatenate(parts_w), np.concatenate(parts_t), np.concatenate(parts_p),
        mu.exact, DEFAULT_SUPPORT_CAP,
    )
    return Measure(pair, w, t, p, exact=mu.exact, check=False)


def marginal(nu: Measure, index: int) -> Measure:
    """Pushforward of a measure on a product group under a coordinate projection."""
    pair = nu.group
    if pair.factors is None:
        raise GroupMismatch("marginal needs a measure on a product group")
    g1, g2 = pair.factors
    if index == 0:
        group, w, t = g1, nu.w // g2.order, nu.t[:, : g1.m]
    elif index == 1:
        group, w, t = g2, nu.w % g2.order, nu.t[:, g1.m:]
    else:
        raise ValueError("index must be 0 or 1")
    w, t, p = _accumulate(group, w, np.ascontiguousarray(t), nu.p, nu.exact, DEFAULT_SUPPORT_CAP)
    return Measure(group, w, t, p, exact=nu.exact, check=False)


# -- distances ------------------------------------------------------------------

def signed_difference(a: Measure, b: Measure):
    """Keys of the union of supports and ``a(x) - b(x)`` on them."""
    _same_group(a, b)
    keys = np.concatenate([a.keys, b.keys])
    exact = a.exact and b.exact
    if exact:
        diff: dict[int, Fraction] = {}
        for k, v in zip(a.keys.tolist(), a.p):
            diff[k] = diff.get(k, Fraction(0)) + v
        for k, v in zip(b.keys.tolist(), b.p):
            diff[k] = diff.get(k, Fraction(0)) - v
        ks = np.array(sorted(diff), dtype=np.int64)
        return ks, np.array([diff[k] for k in ks.tolist()], dtype=object)
    vals = np.concatenate([np.asarray(a.p, dtype=float), -np.asarray(b.p, dtype=float)])
    uniq, inv = np.unique(keys, return_inverse=True)
    return uniq, np.bincount(inv.ravel(), weights=vals)


def tv_distance(a: Measure, b: Measure):
    """Total variation distance, computed as half the l1 norm of the difference."""
    _, diff = signed_difference(a, b)
    if a.exact and b.exact:
        return sum((abs(x) for x in diff), Fraction(0)) / 2
    return float(min(1.0, 0.5 * np.abs(diff).sum()))


# -- sampling -------------------------------------------------------------------

def sample_walks(mu: Measure, n: int, count: int, seed: int):
    """``count`` independent endpoints ``w_n = x_1 ... x_n`` as ``(w, t)`` arrays."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    g = mu.group
    rng = np.random.default_rng(seed)
    probs = np.asarray(mu.p, dtype=float)
    probs = probs / probs.sum()
    w = np.zeros(count, dtype=np.int64)
    t = np.zeros((count, g.m), dtype=np.int64)
    for _ in range(n):
        idx = rng.choice(len(probs), size=count, p=probs)
        w, t = g.multiply_arrays(w, t, mu.w[idx], mu.t[idx])
    return w, t


def sample_walk(mu: Measure, n: int, seed: int) -> GroupElement:
    """One endpoint of the ``mu``-random walk after ``n`` steps, deterministic in ``seed``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    g = mu.group
    rng = np.random.default_rng(seed)
    probs = np.asarray(mu.p, dtype=float)
    idx = rng.choice(len(probs), size=n, p=probs / probs.sum())
    w, t = 0, np.zeros(g.m, dtype=np.int64)
    for i in idx:
        t = t + g.weyl[w] @ mu.t[i]
        w = int(g.mult[w, mu.w[i]])
    return g.element(w, t)


def empirical_measure(group: Group, w, t) -> Measure:
    keys = group.encode(w, t)
    uniq, counts = np.unique(keys, return_counts=True)
    ww, tt = group.decode(uniq)
    return Measure(group, ww, tt, counts / counts.sum(), check=False)
