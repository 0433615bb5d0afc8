"""Twisted transfer operators ``L_omega`` and their leading eigenvalue.

``L_omega[x, y] = sum over edges x -> y of p(e) exp(2 pi i omega(e))``.  For a
real 1-form on a reversible network the matrix is self-adjoint in
``<., .>_pi``, so its spectrum is real.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GapViolation, HessianMismatch, NonPositiveLeadEigenvalue
from .hodge import Covariance
from .measures import Measure
from .network import QuotientNetwork

FD_STEP = 1e-3
FD_FALLBACK = 1e-2
HESSIAN_RTOL = 1e-4
GAP_TOL = 1e-12


def transfer_matrix(net: QuotientNetwork, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    L = np.zeros((net.n_vertices, net.n_vertices), dtype=complex)
    np.add.at(L, (net.origin, net.terminus), net.p * np.exp(2j * np.pi * omega))
    return L


def _hermitian(net: QuotientNetwork, L: np.ndarray) -> np.ndarray:
    # similarity by sqrt(pi) makes a pi-self-adjoint matrix Hermitian
    s = np.sqrt(net.pi)
    H = (s[..., :, None] * L) / s[..., None, :]
    return 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))


def spectrum(net: QuotientNetwork, omega) -> np.ndarray:
    """All eigenvalues of ``L_omega`` in decreasing order."""
    return np.linalg.eigvalsh(_hermitian(net, transfer_matrix(net, omega)))[::-1]


def lead_eigenvalue(net: QuotientNetwork, omega) -> tuple[float, float]:
    """``(lambda(omega), beta(omega))``."""
    lam = float(spectrum(net, omega)[0])
    if lam <= 0:
        raise NonPositiveLeadEigenvalue(f"leading eigenvalue {lam:.6g} is not positive")
    return lam, math.log(lam)


def beta(net: QuotientNetwork, v) -> float:
    """``beta`` of the coordinate form ``v_hat`` for an ambient vector ``v``."""
    return lead_eigenvalue(net, net.disp @ np.asarray(v, dtype=float))[1]


def perron_vector(net: QuotientNetwork, omega) -> np.ndarray:
    """Leading eigenvector of ``L_omega`` normalised so that ``<f, 1>_pi = 1``."""
    H = _hermitian(net, transfer_matrix(net, omega))
    _, vecs = np.linalg.eigh(H)
    f = vecs[:, -1] / np.sqrt(net.pi)
    return f / np.sum(net.pi * f)


def transfer_apply(net: QuotientNetwork, omega, n: int) -> np.ndarray:
    """``L_omega^n 1`` by repeated matrix application."""
    L = transfer_matrix(net, omega)
    f = np.ones(net.n_vertices, dtype=complex)
    for _ in range(int(n)):
        f = L @ f
    return f


def char_function(mu_n: Measure, v) -> complex:
    """``sum_x mu_n(x) exp(2 pi i <v, Phi(x)>)``."""
    phi = mu_n.group.embed_arrays(mu_n.w, mu_n.t)
    phase = np.exp(2j * np.pi * (phi @ np.asarray(v, dtype=float)))
    return complex(np.sum(np.asarray(mu_n.p, dtype=float) * phase))


def transfer_char_gap(net: QuotientNetwork, mu_n: Measure, n: int, v) -> float:
    """``|L^n_{v_hat} 1 (x0) - phi_{mu_n}(v)|``."""
    lhs = transfer_apply(net, net.disp @ np.asarray(v, dtype=float), n)[net.basepoint]
    return abs(lhs - char_function(mu_n, v))


# -- derivatives at zero ----------------------------------------------------------

@dataclass(frozen=True)
class HessianReport:
    hessian: np.ndarray
    expected: np.ndarray
    rel_error: float
    max_first: float
    max_third: float
    step: float
    richardson: bool


def _fd_hessian(net: QuotientNetwork, h: float) -> np.ndarray:
    m = net.disp.shape[1]
    E = np.eye(m)
    b0 = beta(net, np.zeros(m))
    H = np.zeros((m, m))
    for k in range(m):
        H[k, k] = (beta(net, h * E[k]) - 2 * b0 + beta(net, -h * E[k])) / h**2
        for l in range(k + 1, m):
            pp = beta(net, h * (E[k] + E[l]))
            pm = beta(net, h * (E[k] - E[l]))
            mp = beta(net, h * (-E[k] + E[l]))
            mm = beta(net, -h * (E[k] + E[l]))
            H[k, l] = H[l, k] = (pp - pm - mp + mm) / (4 * h**2)
    return H


def _odd_derivatives(net: QuotientNetwork, h: float, directions: np.ndarray):
    first, third = 0.0, 0.0
    for d in directions:
        b1, bm1 = beta(net, h * d), beta(net, -h * d)
        b2, bm2 = beta(net, 2 * h * d), beta(net, -2 * h * d)
        first = max(first, abs(b1 - bm1) / (2 * h))
        third = max(third, abs(b2 - 2 * b1 + 2 * bm1 - bm2) / (2 * h**3))
    return first, third


def hessian_check(net: QuotientNetwork, sigma: Covariance, *, h: float = FD_STEP,
                  rtol: float = HESSIAN_RTOL, raise_on_fail: bool = True) -> HessianReport:
    """Compare the finite-difference Hessian of ``beta`` at 0 with ``-4 pi^2 Sigma``.

    The error is normwise: ``max |H - expected| / max |expected|``, since
    off-diagonal entries of ``expected`` are typically zero.
    """
    expected = -4 * np.pi**2 * sigma.mat
    scale = np.max(np.abs(expected))
    H = _fd_hessian(net, h)
    err = float(np.max(np.abs(H - expected)) / scale)
    richardson = False
    step = h
    if err > rtol:
        # central differences are O(h^2), so one Richardson step removes the leading term
        H1 = _fd_hessian(net, FD_FALLBACK)
        H2 = _fd_hessian(net, FD_FALLBACK / 2)
        H = (4 * H2 - H1) / 3
        err = float(np.max(np.abs(H - expected)) / scale)
        richardson, step = True, FD_FALLBACK
    m = sigma.m
    dirs = np.vstack([np.eye(m), np.ones((1, m)) / math.sqrt(m)])
    first, third = _odd_derivatives(net, h, dirs)
    report = HessianReport(H, expected, err, first, third, step, richardson)
    if raise_on_fail and err > rtol:
        raise HessianMismatch(f"finite-difference Hessian off by {err:.3g} (relative)")
    return report


# -- spectral scan ----------------------------------------------------------------

@dataclass(frozen=True)
class SpectralScanConfig:
    delta: float = 0.05
    grid: int = 64
    chunk: int = 4096

    def __post_init__(self):
        if not 0.0 < self.delta < 0.5:
            raise ValueError("delta must lie in (0, 1/2)")
        if self.grid < 8:
            raise ValueError("grid must have at least 8 points per axis")


@dataclass(frozen=True)
class ScanResult:
    max_abs: float
    argmax: np.ndarray
    gap: float
    points: np.ndarray   # (N, m) scanned v
    radii: np.ndarray    # (N,) spectral radius at each point

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        m = self.points.shape[1]
        writer.writerow([f"v{k}" for k in range(m)] + ["abs_lambda", "gap"])
        for v, r in zip(self.points, self.radii):
            gap = -math.log(r) if r > 0 else math.inf
            writer.writerow([f"{x:.17g}" for x in v] + [f"{r:.17g}", f"{gap:.17g}"])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def dual_basis(net: QuotientNetwork) -> np.ndarray:
    """Columns are the dual lattice basis ``v*_k`` (inverse transpose of the lattice basis)."""
    return np.linalg.inv(net.group.basis).T


def scan_points(net: QuotientNetwork, cfg: SpectralScanConfig) -> np.ndarray:
    """Grid points of ``D`` outside the open box ``D_delta``, in ambient coordinates."""
    m = net.disp.shape[1]
    axis = np.linspace(-0.5, 0.5, cfg.grid)
    r = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
    keep = ~np.all(np.abs(r) < cfg.delta, axis=1)
    return r[keep] @ dual_basis(net).T


def spectral_radii(net: QuotientNetwork, points: np.ndarray, chunk: int = 4096) -> np.ndarray:
    V = net.n_vertices
    onehot = np.zeros((net.n_edges, V * V))
    onehot[np.arange(net.n_edges), net.origin * V + net.terminus] = 1.0
    out = np.empty(len(points))
    for start in range(0, len(points), chunk):
        pts = points[start:start + chunk]
        phases = net.p * np.exp(2j * np.pi * (pts @ net.disp.T))
        L = (phases @ onehot).reshape(-1, V, V)
        ev = np.linalg.eigvalsh(_hermitian(net, L))
        out[start:start + chunk] = np.max(np.abs(ev), axis=1)
    return out


def spectral_scan(net: QuotientNetwork, cfg: SpectralScanConfig | None = None, *,
                  raise_on_violation: bool = True) -> ScanResult:
    cfg = SpectralScanConfig() if cfg is None else cfg
    pts = scan_points(net, cfg)
    radii = spectral_radii(net, pts, cfg.chunk)
    i = int(np.argmax(radii))
    top = float(radii[i])
    gap = -math.log(top) if top > 0 else math.inf
    if raise_on_violation and top >= 1 - GAP_TOL:
        raise GapViolation(f"|lambda| = {top:.15g} at v = {pts[i]}")
    return ScanResult(top, pts[i], gap, pts, radii)
