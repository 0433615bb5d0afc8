"""The finite quotient network ``Lambda \\ Cay(Gamma, supp mu)``.

Vertices are the elements of ``W`` (index order of :attr:`Group.weyl`), since
``(w, t) -> w`` identifies ``Lambda``-cosets.  Every vertex gets one directed
edge per atom of ``mu``; the identity atom gives a self-reverse loop with zero
displacement.
"""
from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import AsymmetricMeasure, NotIrreducible
from .measures import Measure
from .weyl import Group, GroupElement

SYMMETRY_TOL = 1e-15


@dataclass(frozen=True)
class QuotientNetwork:
    group: Group
    origin: np.ndarray      # (E,) vertex index of oe
    terminus: np.ndarray    # (E,) vertex index of te
    atom: np.ndarray        # (E,) index into the measure's atom arrays
    labels: tuple           # (E,) generator label
    rev: np.ndarray         # (E,) index of the reverse edge
    p: np.ndarray           # (E,) transition probability
    disp: np.ndarray        # (E, m) displacement Phi_e
    pi: np.ndarray          # (V,) stationary weights
    lifts: tuple            # (V,) minimal-norm lift of each coset
    atom_w: np.ndarray      # (A,) W index of each atom
    atom_t: np.ndarray      # (A, m) translation of each atom
    p_exact: tuple | None = None
    basepoint: int = 0

    @property
    def n_vertices(self) -> int:
        return len(self.pi)

    @property
    def n_edges(self) -> int:
        return len(self.p)

    @property
    def cond(self) -> np.ndarray:
        return self.pi[self.origin] * self.p

    @property
    def loops(self) -> np.ndarray:
        """Self-reverse edges (identity atoms); every 1-form vanishes there."""
        return self.rev == np.arange(self.n_edges)

    def transition_matrix(self) -> np.ndarray:
        P = np.zeros((self.n_vertices, self.n_vertices))
        np.add.at(P, (self.origin, self.terminus), self.p)
        return P

    def edges_at(self, x: int) -> np.ndarray:
        return np.flatnonzero(self.origin == x)

    def edge_for(self, x: int, label: str) -> int:
        for e in self.edges_at(x):
            if self.labels[e] == label:
                return int(e)
        raise KeyError(f"no edge labelled {label!r} at vertex {x}")

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        m = self.disp.shape[1]
        writer.writerow(["origin", "terminus", "generator", "p", "c"] + [f"phi{k}" for k in range(m)])
        cond = self.cond
        for e in range(self.n_edges):
            writer.writerow(
                [int(self.origin[e]), int(self.terminus[e]), self.labels[e],
                 f"{self.p[e]:.17g}", f"{cond[e]:.17g}"]
                + [f"{x:.17g}" for x in self.disp[e]]
            )
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def coset_lifts(group: Group, max_radius: int = 64) -> list[tuple[int, np.ndarray]]:
    """Minimal word-norm representative of each coset (ties broken by key order)."""
    lifts: list = [None] * group.order
    radius = 4
    while True:
        w, t, norms = group.ball_arrays(radius)
        order = np.lexsort((group.encode(w, t), norms))
        for i in order:
            if lifts[w[i]] is None:
                lifts[w[i]] = (int(w[i]), t[i].copy())
        if all(x is not None for x in lifts):
            return lifts
        if radius >= max_radius:
            raise NotIrreducible("generators do not reach every coset of the lattice")
        radius *= 2


def build_network(group: Group, mu: Measure) -> QuotientNetwork:
    if mu.group is not group:
        raise ValueError("measure lives on a different group")
    n_atoms = len(mu)
    inv_w = group.inv[mu.w]
    inv_t = -np.einsum("kij,kj->ki", group.weyl[inv_w], mu.t)
    inv_keys = group.encode(inv_w, inv_t)
    pos = np.searchsorted(mu.keys, inv_keys)
    pos = np.minimum(pos, n_atoms - 1)
    if not np.array_equal(mu.keys[pos], inv_keys):
        raise AsymmetricMeasure("support of mu is not closed under inversion")
    atom_inv = pos
    pf = np.asarray(mu.p, dtype=float)
    if mu.exact:
        if any(mu.p[a] != mu.p[atom_inv[a]] for a in range(n_atoms)):
            raise AsymmetricMeasure("mu(s) != mu(s^-1)")
    elif np.max(np.abs(pf - pf[atom_inv])) > SYMMETRY_TOL:
        raise AsymmetricMeasure("mu(s) != mu(s^-1)")

    V = group.order
    lifts = coset_lifts(group)
    lift_w = np.array([lw for lw, _ in lifts], dtype=np.int64)
    lift_t = np.array([lt for _, lt in lifts], dtype=np.int64).reshape(V, group.m)
    base_phi = group.embed_arrays(lift_w, lift_t)

    # edge index = x * n_atoms + a
    xs = np.repeat(np.arange(V), n_atoms)
    atoms = np.tile(np.arange(n_atoms), V)
    tw, tt = group.multiply_arrays(lift_w[xs], lift_t[xs], mu.w[atoms], mu.t[atoms])
    terminus = tw
    disp = group.embed_arrays(tw, tt) - base_phi[xs]
    rev = terminus * n_atoms + atom_inv[atoms]
    labels = tuple(group.label(mu.w[a], mu.t[a]) for a in atoms)
    pi = np.full(V, 1.0 / V)
    p_exact = tuple(mu.p[a] for a in atoms) if mu.exact else None

    net = QuotientNetwork(
        group=group, origin=xs, terminus=terminus, atom=atoms, labels=labels,
        rev=rev, p=pf[atoms], disp=disp, pi=pi,
        lifts=tuple(group.element(lw, lt) for lw, lt in lifts),
        atom_w=mu.w.copy(), atom_t=mu.t.copy(), p_exact=p_exact,
    )
    _check_irreducible(net)
    _check_generating(net, lift_t[terminus], tt)
    if check_reversibility(net) > SYMMETRY_TOL:
        raise AsymmetricMeasure("quotient chain is not reversible")
    return net


def _check_irreducible(net: QuotientNetwork) -> None:
    adj = [[] for _ in range(net.n_vertices)]
    for o, t in zip(net.origin.tolist(), net.terminus.tolist()):
        adj[o].append(t)
    seen = {net.basepoint}
    queue = deque([net.basepoint])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                queue.append(y)
    if len(seen) != net.n_vertices:
        raise NotIrreducible(f"quotient chain reaches {len(seen)} of {net.n_vertices} vertices")


def _hermite_rank_det(rows: list[list[int]], m: int) -> tuple[int, int]:
    """Rank and covolume of the integer lattice spanned by ``rows`` (Euclidean row reduction)."""
    rows = [list(r) for r in rows if any(r)]
    basis = []
    for col in range(m):
        while True:
            live = [r for r in rows if r[col] != 0]
            if len(live) <= 1:
                break
            live.sort(key=lambda r: abs(r[col]))
            pivot = live[0]
            for r in live[1:]:
                q = r[col] // pivot[col]
                for k in range(m):
                    r[k] -= q * pivot[k]
            rows = [r for r in rows if any(r)]
        live = [r for r in rows if r[col] != 0]
        if live:
            basis.append(live[0])
            rows = [r for r in rows if r is not live[0]]
    det = 1
    for i, r in enumerate(basis):
        det *= abs(r[i]) if i < m else 1
    return len(basis), det


def translation_lattice(net: QuotientNetwork, lift_term_t, step_t) -> tuple[int, int]:
    """Rank and index data of ``H cap Lambda`` for the subgroup ``H`` generated by ``supp mu``.

    Each edge carries the translation ``lambda_e`` with ``lift(oe) s = lambda_e lift(te)``;
    cycle sums of these (made exact with spanning-tree potentials) generate ``H cap Lambda``.
    """
    m = net.group.m
    lam = np.asarray(step_t) - np.asarray(lift_term_t)
    pot = {net.basepoint: np.zeros(m, dtype=np.int64)}
    queue = deque([net.basepoint])
    while queue:
        x = queue.popleft()
        for e in net.edges_at(x):
            y = int(net.terminus[e])
            if y not in pot:
                pot[y] = pot[x] + lam[e]
                queue.append(y)
    cycles = [(pot[int(o)] + lam[e] - pot[int(t)]).tolist()
              for e, (o, t) in enumerate(zip(net.origin, net.terminus))]
    return _hermite_rank_det(cycles, m)


def _check_generating(net: QuotientNetwork, lift_term_t, step_t) -> None:
    rank, det = translation_lattice(net, lift_term_t, step_t)
    if rank < net.group.m or det != 1:
        raise NotIrreducible(
            f"supp(mu) generates a subgroup whose translations have rank {rank} and index {det}"
        )


def check_reversibility(net: QuotientNetwork):
    """Largest violation of ``pi(oe) p(e) = pi(te) p(rev e)``; exact when the network is."""
    if net.p_exact is not None:
        pi = Fraction(1, net.n_vertices)
        worst = Fraction(0)
        for e in range(net.n_edges):
            worst = max(worst, abs(pi * net.p_exact[e] - pi * net.p_exact[int(net.rev[e])]))
        return worst
    lhs = net.pi[net.origin] * net.p
    rhs = net.pi[net.terminus] * net.p[net.rev]
    return float(np.max(np.abs(lhs - rhs))) if net.n_edges else 0.0


def edge_displacement(net: QuotientNetwork, e: int, lift: GroupElement | None = None) -> np.ndarray:
    """``Phi(x s) - Phi(x)`` for edge ``e``, computed from an arbitrary lift ``x`` of its origin."""
    g = net.group
    w, t = g.locate(net.lifts[net.origin[e]] if lift is None else lift)
    if w != net.origin[e]:
        raise ValueError("lift is not in the origin coset of the edge")
    a = int(net.atom[e])
    tw, tt = g.multiply_arrays([w], t[None, :], net.atom_w[a:a + 1], net.atom_t[a:a + 1])
    return g.embed_arrays(tw, tt)[0] - g.embed_arrays([w], t[None, :])[0]
