"""Functions and 1-forms on a quotient network, harmonic projection and covariance.

Vertex functions are ``(V,)`` arrays and 1-forms are ``(E,)`` arrays indexed
like the network's edges.  A 1-form is antisymmetric (``omega[rev] = -omega``)
and vanishes on identity loops.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateCovariance, SolverFailure
from .network import QuotientNetwork

HARMONIC_TOL = 1e-10
SYMMETRY_TOL = 1e-12
DEGENERATE_TOL = 1e-14


def check_one_form(net: QuotientNetwork, omega, tol: float = 1e-12) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (net.n_edges,):
        raise ValueError(f"1-form must have shape ({net.n_edges},), got {omega.shape}")
    if not np.all(np.isfinite(omega)):
        raise ValueError("1-form has non-finite values")
    if np.any(np.abs(omega[net.loops]) > tol):
        raise ValueError("1-form must vanish on identity loops")
    if np.max(np.abs(omega + omega[net.rev]), initial=0.0) > tol:
        raise ValueError("1-form is not antisymmetric")
    return omega


def antisymmetrize(net: QuotientNetwork, values) -> np.ndarray:
    """Turn arbitrary edge values into a 1-form: ``(x(e) - x(rev e)) / 2``, zero on loops."""
    values = np.asarray(values, dtype=float)
    out = 0.5 * (values - values[net.rev])
    out[net.loops] = 0.0
    return out


def differential(net: QuotientNetwork, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    return f[net.terminus] - f[net.origin]


def codifferential(net: QuotientNetwork, omega) -> np.ndarray:
    """``d* omega (x) = -sum_{e in E_x} c(e) omega(e) / pi(x)``."""
    omega = np.asarray(omega, dtype=float)
    out = np.zeros(net.n_vertices)
    np.add.at(out, net.origin, net.cond * omega)
    return -out / net.pi


def inner_vertex(net: QuotientNetwork, f, g) -> float:
    return float(np.sum(net.pi * np.asarray(f) * np.asarray(g)))


def inner_edge(net: QuotientNetwork, a, b) -> float:
    """``<a, b>_c = (1/2) sum_e a(e) b(e) c(e)``."""
    return 0.5 * float(np.sum(net.cond * np.asarray(a) * np.asarray(b)))


def apply_P(net: QuotientNetwork, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    out = np.zeros(net.n_vertices)
    np.add.at(out, net.origin, net.p * f[net.terminus])
    return out


def coordinate_form(net: QuotientNetwork, v) -> np.ndarray:
    """``v_hat(e) = <v, Phi_e>``."""
    return net.disp @ np.asarray(v, dtype=float)


def _bordered_solve(net: QuotientNetwork, rhs: np.ndarray) -> np.ndarray:
    """Mean-zero solutions ``f`` of ``(I - P) f = rhs`` for each column of ``rhs``."""
    V = net.n_vertices
    A = np.zeros((V + 1, V + 1))
    A[:V, :V] = np.eye(V) - net.transition_matrix()
    A[:V, V] = 1.0
    A[V, :V] = net.pi
    b = np.zeros((V + 1,) + rhs.shape[1:])
    b[:V] = rhs
    try:
        sol = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SolverFailure(f"harmonic correction system is singular: {exc}") from exc
    if np.max(np.abs(sol[V]), initial=0.0) > 1e-8:
        raise SolverFailure("right-hand side is not orthogonal to constants")
    return sol[:V]


def harmonic_projection(net: QuotientNetwork, omega) -> tuple[np.ndarray, np.ndarray]:
    """Split ``omega = u + df`` with ``d* u = 0`` and ``f`` of mean zero under ``pi``."""
    omega = np.asarray(omega, dtype=float)
    f = _bordered_solve(net, codifferential(net, omega))
    u = omega - differential(net, f)
    resid = np.max(np.abs(codifferential(net, u)), initial=0.0)
    if resid > HARMONIC_TOL:
        raise SolverFailure(f"harmonic residual {resid:.3g} exceeds {HARMONIC_TOL}")
    return u, f


@dataclass(frozen=True)
class Covariance:
    mat: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("covariance must be square")
        if np.max(np.abs(mat - mat.T), initial=0.0) > SYMMETRY_TOL:
            raise ValueError("covariance is not symmetric")
        mat = 0.5 * (mat + mat.T)
        ev = np.linalg.eigvalsh(mat)
        if ev[0] <= DEGENERATE_TOL:
            raise DegenerateCovariance(f"smallest eigenvalue {ev[0]:.3g} is not positive")
        object.__setattr__(self, "mat", mat)

    @property
    def m(self) -> int:
        return self.mat.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.mat)

    def det(self) -> float:
        return float(np.linalg.det(self.mat))

    def inv(self) -> np.ndarray:
        return np.linalg.inv(self.mat)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in self.mat:
            writer.writerow([f"{x:.17g}" for x in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def harmonic_coordinate_forms(net: QuotientNetwork) -> tuple[np.ndarray, np.ndarray]:
    """Harmonic parts ``u_k`` (E, m) and mean-zero corrections ``f_k`` (V, m) of the coordinate forms."""
    omegas = net.disp  # column k is v_hat for the k-th standard basis vector
    rhs = np.stack([codifferential(net, omegas[:, k]) for k in range(omegas.shape[1])], axis=1)
    f = _bordered_solve(net, rhs)
    u = omegas - (f[net.terminus] - f[net.origin])
    resid = np.max(np.abs(np.stack([codifferential(net, u[:, k]) for k in range(u.shape[1])])),
                   initial=0.0)
    if resid > HARMONIC_TOL:
        raise SolverFailure(f"harmonic residual {resid:.3g} exceeds {HARMONIC_TOL}")
    return u, f


def covariance(net: QuotientNetwork) -> Covariance:
    """``Sigma_kl = sum over directed edges of u_k(e) u_l(e) c(e)``."""
    u, _ = harmonic_coordinate_forms(net)
    mat = (u * net.cond[:, None]).T @ u
    return Covariance(mat)


def harmonic_embedding(net: QuotientNetwork) -> np.ndarray:
    """Per-coset corrections ``h`` (V, m) so that ``Phi_H(x) = Phi(x) - h(coset x)`` has mean-zero steps."""
    _, f = harmonic_coordinate_forms(net)
    return f


def embed_harmonic(net: QuotientNetwork, h: np.ndarray, w, t) -> np.ndarray:
    """``Phi_H`` on arrays of elements."""
    return net.group.embed_arrays(w, t) - h[np.asarray(w)]


def cycle_sum(net: QuotientNetwork, omega, word: list[str]) -> float:
    """Sum of ``omega`` along the image in the network of the path spelled by ``word``."""
    omega = np.asarray(omega, dtype=float)
    x = net.basepoint
    total = 0.0
    for label in word:
        e = net.edge_for(x, label)
        total += omega[e]
        x = int(net.terminus[e])
    return total


def forms_to_csv(net: QuotientNetwork, forms: dict[str, np.ndarray], path=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(forms)
    writer.writerow(["edge", "origin", "terminus", "generator"] + names)
    for e in range(net.n_edges):
        writer.writerow([e, int(net.origin[e]), int(net.terminus[e]), net.labels[e]]
                        + [f"{forms[k][e]:.17g}" for k in names])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
