"""Symmetric-matrix vectorization, Lyapunov solves, and PSD projection.

``svec`` packs the upper triangle of a symmetric matrix with off-diagonal
entries scaled by sqrt(2), the unique diagonal-plus-scaled-upper convention
for which the Euclidean inner product of vectors equals the Frobenius inner
product of matrices.  ``smat`` inverts it exactly.

The discrete Lyapunov equation P = X P X^T + Y is solved by Kronecker
vectorization: exact at desk scale, O(n^6) in the matrix dimension.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SQRT2 = math.sqrt(2.0)


class InstabilityError(RuntimeError):
    """Raised when a spectral radius >= 1 makes a computation undefined."""

    def __init__(self, message: str, rho: float):
        super().__init__(f"{message} (spectral radius {rho:.6g})")
        self.rho = rho


def svec(mat: np.ndarray, *, sym_tol: float = 1e-10) -> np.ndarray:
    """Vectorize a symmetric n x n matrix into length n(n+1)/2.

    Diagonal entries are copied, strict upper-triangular entries scaled by
    sqrt(2), so <svec(M), svec(N)> equals the Frobenius inner product
    <M, N> exactly.  The input must be symmetric within ``sym_tol`` and is
    symmetrized internally.
    """
    m = np.asarray(mat, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"svec expects a square matrix, got shape {m.shape}")
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym > sym_tol:
        raise ValueError(f"svec input asymmetry {asym:.3g} exceeds tolerance {sym_tol:.3g}")
    m = 0.5 * (m + m.T)
    n = m.shape[0]
    rows, cols = np.triu_indices(n)
    weights = np.where(rows == cols, 1.0, _SQRT2)
    return m[rows, cols] * weights


def smat(vec: np.ndarray) -> np.ndarray:
    """Invert ``svec``: rebuild the symmetric matrix from its packed vector.

    The vector length must be a triangular number n(n+1)/2.
    """
    v = np.asarray(vec, dtype=float).ravel()
    length = v.size
    n = int(round((math.sqrt(8.0 * length + 1.0) - 1.0) / 2.0))
    if n * (n + 1) // 2 != length:
        raise ValueError(f"smat expects a triangular-number length, got {length}")
    out = np.zeros((n, n))
    rows, cols = np.triu_indices(n)
    weights = np.where(rows == cols, 1.0, 1.0 / _SQRT2)
    out[rows, cols] = v * weights
    out[cols, rows] = out[rows, cols]
    return out


def svec_dim(n: int) -> int:
    """Packed length of an n x n symmetric matrix."""
    return n * (n + 1) // 2


def spectral_radius(mat: np.ndarray) -> float:
    m = np.asarray(mat, dtype=float)
    if m.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def lyapunov_solve(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Solve the discrete Lyapunov equation P = X P X^T + Y.

    Requires spectral radius of X below one.  Solved exactly by the
    Kronecker-vectorized linear system (I - X kron X) vec(P) = vec(Y);
    intended for desk-scale dimensions.
    """
    xm = np.asarray(x, dtype=float)
    ym = np.asarray(y, dtype=float)
    if xm.ndim != 2 or xm.shape[0] != xm.shape[1]:
        raise ValueError(f"lyapunov_solve expects square X, got shape {xm.shape}")
    if ym.shape != xm.shape:
        raise ValueError(f"Y shape {ym.shape} does not match X shape {xm.shape}")
    rho = spectral_radius(xm)
    if rho >= 1.0:
        raise InstabilityError("Lyapunov equation has no bounded solution", rho)
    n = xm.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    ym = 0.5 * (ym + ym.T)
    lhs = np.eye(n * n) - np.kron(xm, xm)
    sol = np.linalg.solve(lhs, ym.reshape(-1))
    p = sol.reshape(n, n)
    p = 0.5 * (p + p.T)
    residual = np.linalg.norm(p - xm @ p @ xm.T - ym, ord="fro")
    if residual > 1e-9 * (1.0 + np.linalg.norm(ym, ord="fro")):
        raise RuntimeError(
            f"Lyapunov residual {residual:.3g} above tolerance; system badly conditioned"
        )
    return p


def psd_project(mat: np.ndarray, zeta: float = 0.0) -> np.ndarray:
    """Frobenius-nearest symmetric matrix with eigenvalues >= zeta.

    Eigendecomposes the symmetrized input, clamps eigenvalues from below at
    zeta, and reassembles.  Idempotent.
    """
    if zeta < 0.0:
        raise ValueError(f"eigenvalue floor must be nonnegative, got {zeta}")
    m = np.asarray(mat, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"psd_project expects a square matrix, got shape {m.shape}")
    m = 0.5 * (m + m.T)
    eigvals, eigvecs = np.linalg.eigh(m)
    clamped = np.maximum(eigvals, zeta)
    out = (eigvecs * clamped) @ eigvecs.T
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class StabilityReport:
    """Empirical (tau, rho) certificate: ||X^k|| <= tau * rho^k for k checked."""

    rho: float
    tau: float


def stability_report(mat: np.ndarray, *, max_power: int = 200) -> StabilityReport:
    """Spectral radius plus an empirical transient-overshoot estimate.

    tau is the maximum of ||X^k||_2 / rho^k over k = 0..max_power; for a
    nilpotent or zero matrix (rho = 0) tau defaults to one.
    """
    m = np.asarray(mat, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"stability_report expects a square matrix, got shape {m.shape}")
    rho = spectral_radius(m)
    if rho <= 1e-14:
        return StabilityReport(rho=rho, tau=1.0)
    tau = 1.0
    power = np.eye(m.shape[0])
    scale = 1.0
    for _ in range(max_power):
        power = power @ m
        scale *= rho
        norm = float(np.linalg.norm(power, ord=2))
        tau = max(tau, norm / scale)
        if norm == 0.0:
            break
    return StabilityReport(rho=rho, tau=tau)
