"""Gaussian comparison objects and local limit error metrics.

``xi(x)`` is the density of ``N(0, n Sigma)`` evaluated at ``Phi(x)``.  The
orbit ``Phi(Gamma)`` has ``|W|`` points per lattice cell, so ``sum_x xi(x)``
tends to ``|W| / covol`` rather than 1; :func:`lclt_sup_error` therefore
compares ``mu_n`` with ``(covol / |W|) xi`` unless told otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import TruncationInsufficient
from .hodge import Covariance
from .measures import Measure, power, tv_distance
from .weyl import Group, GroupElement

TAIL_TARGET = 1e-12
A_START, A_CAP = 3.0, 12.0
QI_RADIUS = 20


def _sigma_mat(sigma) -> np.ndarray:
    return sigma.mat if isinstance(sigma, Covariance) else np.atleast_2d(np.asarray(sigma, float))


def gaussian_density(phi: np.ndarray, sigma, n: float) -> np.ndarray:
    """Density of ``N(0, n Sigma)`` at the rows of ``phi``."""
    S = _sigma_mat(sigma) * n
    m = S.shape[0]
    phi = np.asarray(phi, dtype=float).reshape(-1, m)
    quad = np.einsum("ij,ij->i", phi @ np.linalg.inv(S), phi)
    return np.exp(-0.5 * quad) / ((2 * np.pi) ** (m / 2) * math.sqrt(np.linalg.det(S)))


def xi(group: Group, sigma, n: int, x: GroupElement) -> float:
    if n < 1:
        raise ValueError("n must be at least 1")
    w, t = group.locate(x)
    return float(gaussian_density(group.embed_arrays([w], t[None, :]), sigma, n)[0])


def lattice_scale(group: Group) -> float:
    """``covol / |W|``: the area per orbit point of ``Phi(Gamma)``."""
    return group.covolume / group.order


# -- tail certificate -----------------------------------------------------------

@lru_cache(maxsize=None)
def quasi_isometry_constants(group: Group, radius: int = QI_RADIUS) -> tuple[float, float]:
    """``(c0, c1)`` with ``|Phi(x)| >= c0 |x|_S - c1`` on the radius ball.

    ``c1`` is the longest generator step; ``c0`` is the largest slope that
    makes the inequality hold on every element of the ball.
    """
    gens = group.generators()
    gw = np.array([group.locate(g)[0] for g in gens])
    gt = np.array([group.locate(g)[1] for g in gens])
    c1 = float(np.max(np.linalg.norm(group.embed_arrays(gw, gt), axis=1)))
    w, t, norms = group.ball_arrays(radius)
    phi = np.linalg.norm(group.embed_arrays(w, t), axis=1)
    nz = norms > 0
    c0 = float(np.min((phi[nz] + c1) / norms[nz]))
    return c0, c1


def gaussian_tail_bound(group: Group, sigma, n: int, radius: int) -> float:
    """Upper bound on ``sum_{|x|_S > radius} xi_{n Sigma}(x)``.

    Points outside the ball have ``|Phi| >= r0 = c0 radius - c1``; orbit points
    with ``|Phi| <= s`` number at most ``|W| vol(B(s + d)) / covol`` where ``d``
    bounds the diameter of a lattice cell.  Summing over unit shells with the
    isotropic envelope ``exp(-|phi|^2 / (2 n lambda_max))`` gives the bound.
    """
    S = _sigma_mat(sigma)
    m = S.shape[0]
    c0, c1 = quasi_isometry_constants(group)
    r0 = c0 * (radius + 1) - c1
    if r0 <= 0:
        return math.inf
    lam = float(np.linalg.eigvalsh(S)[-1]) * n
    peak = 1.0 / ((2 * np.pi * n) ** (m / 2) * math.sqrt(np.linalg.det(S)))
    d = float(np.sum(np.linalg.norm(group.basis, axis=0)))
    ball_vol = math.pi ** (m / 2) / math.gamma(m / 2 + 1)
    total, k = 0.0, 0
    while True:
        s = r0 + k
        count = group.order * ball_vol * (s + 1 + d) ** m / group.covolume
        term = count * peak * math.exp(-s * s / (2 * lam))
        total += term
        if term < 1e-40 or (k > 10 and term < 1e-18 * total):
            return total
        k += 1


@dataclass(frozen=True)
class DiscreteNormal:
    group: Group
    sigma: np.ndarray
    n: int
    radius: int
    A: float
    Z: float
    tail_bound: float
    measure: Measure

    @property
    def Z_per_cell(self) -> float:
        """``Z`` rescaled by ``covol / |W|``; tends to 1."""
        return self.Z * lattice_scale(self.group)


def truncation_radius(group: Group, sigma, n: int) -> tuple[int, float, float]:
    """Smallest ``R = ceil(A sqrt(n log n))`` over ``A = 3, 6, 12`` whose tail certificate passes."""
    A = A_START
    while A <= A_CAP:
        R = int(math.ceil(A * math.sqrt(n * math.log(max(n, 2)))))
        bound = gaussian_tail_bound(group, sigma, n, R)
        if bound < TAIL_TARGET:
            return R, A, bound
        A *= 2
    raise TruncationInsufficient(f"tail bound {bound:.3g} above {TAIL_TARGET} at A = {A_CAP}")


def discrete_normal(group: Group, sigma, n: int) -> DiscreteNormal:
    if n < 1:
        raise ValueError("n must be at least 1")
    R, A, bound = truncation_radius(group, sigma, n)
    w, t, _ = group.ball_arrays(R)
    dens = gaussian_density(group.embed_arrays(w, t), sigma, n)
    Z = float(np.sum(dens))
    keep = dens > 1e-300
    meas = Measure(group, w[keep], t[keep], dens[keep] / Z, check=False)
    return DiscreteNormal(group, _sigma_mat(sigma), n, R, A, Z, bound, meas)


# -- error metrics --------------------------------------------------------------

def lclt_sup_error(group: Group, mu: Measure, sigma, n: int, *, scale: float | None = None,
                   mu_n: Measure | None = None) -> float:
    """``max |mu_n(x) - scale * xi_{n Sigma}(x)|`` over ``supp(mu_n)`` and the truncation ball.

    ``scale`` defaults to ``covol / |W|``; pass 1.0 for the unscaled density.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    scale = lattice_scale(group) if scale is None else scale
    mu_n = power(mu, n) if mu_n is None else mu_n
    R, _, _ = truncation_radius(group, sigma, n)
    bw, bt, _ = group.ball_arrays(R)
    keys = np.union1d(mu_n.keys, group.encode(bw, bt))
    w, t = group.decode(keys)
    dens = scale * gaussian_density(group.embed_arrays(w, t), sigma, n)
    pos = np.searchsorted(keys, mu_n.keys)
    vals = np.zeros(len(keys))
    vals[pos] = np.asarray(mu_n.p, dtype=float)
    return float(np.max(np.abs(vals - dens)))


def lclt_tv_error(group: Group, mu: Measure, sigma, n: int, *, mu_n: Measure | None = None) -> float:
    if n < 2:
        raise ValueError("n must be at least 2")
    mu_n = power(mu, n) if mu_n is None else mu_n
    return tv_distance(mu_n, discrete_normal(group, sigma, n).measure)


# -- Poisson summation on Z^m ---------------------------------------------------

def poisson_sides(sigma, n: float, cutoff: int = 60) -> tuple[float, float]:
    """Both sides of ``sum_{Z^m} f_{n Sigma}(x) = sum_{Z^m} exp(-2 pi^2 n <x, Sigma x>)``."""
    S = _sigma_mat(sigma)
    m = S.shape[0]
    axis = np.arange(-cutoff, cutoff + 1)
    pts = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m).astype(float)
    direct = float(np.sum(gaussian_density(pts, S, n)))
    dual = float(np.sum(np.exp(-2 * np.pi**2 * n * np.einsum("ij,jk,ik->i", pts, S, pts))))
    return direct, dual
