"""Dense symmetric linear algebra and stable reductions.

Everything here works on plain ``numpy`` arrays.  Matrices are dense; the
dimensions we care about are small (embedding width, typically <= 256), so
the hand-rolled Cholesky and Jacobi routines are fast enough and keep the
failure modes explicit.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyInput, NonConvergence, NotPositiveDefinite

PIVOT_FLOOR = 1e-12
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class ClipMode(str, enum.Enum):
    FORCE_POSITIVE_DEFINITE = "force_positive_definite"
    FORCE_NEGATIVE_DEFINITE = "force_negative_definite"
    NO_CLIP = "no_clip"


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray   # descending
    eigenvectors: np.ndarray  # columns

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def as_symmetric(m, rtol=1e-12):
    """Validate ``m`` as a square symmetric matrix and return it as float array."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    scale = max(np.abs(a).max(initial=0.0), 1.0)
    if np.abs(a - a.T).max(initial=0.0) > rtol * scale:
        raise ValueError("matrix is not symmetric")
    return a


def cholesky(m):
    """Lower Cholesky factor ``L`` with ``L @ L.T == m``.

    Raises NotPositiveDefinite when a pivot is <= PIVOT_FLOOR times the
    largest diagonal magnitude.
    """
    a = as_symmetric(m)
    n = a.shape[0]
    floor = PIVOT_FLOOR * np.abs(np.diag(a)).max(initial=0.0)
    L = np.zeros_like(a)
    for j in range(n):
        row = L[j, :j]
        pivot = a[j, j] - row @ row
        if not pivot > floor:
            raise NotPositiveDefinite(f"pivot {pivot:.3e} at index {j} is below floor {floor:.3e}")
        L[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ row) / L[j, j]
    return L


def cholesky_inverse(m):
    """Return ``(inverse, log_det)`` of an SPD matrix via its Cholesky factor."""
    L = cholesky(m)
    n = L.shape[0]
    # forward substitution for L^{-1}, row by row
    Linv = np.zeros_like(L)
    for i in range(n):
        rhs = -(L[i, :i] @ Linv[:i])
        rhs[i] += 1.0
        Linv[i] = rhs / L[i, i]
    inv = Linv.T @ Linv
    inv = 0.5 * (inv + inv.T)
    log_det = 2.0 * np.log(np.diag(L)).sum()
    return inv, float(log_det)


def sym_eigen(m, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigen-decompose a symmetric matrix with cyclic Jacobi rotations.

    Converges when the off-diagonal Frobenius norm drops below
    ``tol * ||m||_F``.  Eigenvalues come back sorted in descending order.
    """
    a = as_symmetric(m).copy()
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return EigenDecomposition(np.zeros(n), v)
    threshold = tol * scale
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-18 * abs(diff):
                    # rotation angle below double resolution
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = diff / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                a[:, p] = c * col_p - s * a[:, q]
                a[:, q] = s * col_p + c * a[:, q]
                row_p = a[p, :].copy()
                a[p, :] = c * row_p - s * a[q, :]
                a[q, :] = s * row_p + c * a[q, :]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    else:
        raise NonConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
    lam = np.diag(a).copy()
    order = np.argsort(-lam, kind="stable")
    return EigenDecomposition(lam[order], v[:, order])


def clip_spectrum(m, mode=ClipMode.FORCE_NEGATIVE_DEFINITE, eps=1e-6):
    """Clamp the eigenvalues of ``m`` to enforce a definiteness constraint.

    Eigenvectors are kept; only the spectrum changes.  ``NO_CLIP`` returns
    a copy of the input.
    """
    mode = ClipMode(mode)
    a = as_symmetric(m)
    if mode is ClipMode.NO_CLIP:
        return a.copy()
    if eps <= 0:
        raise ValueError("eps must be positive")
    eig = sym_eigen(a)
    if mode is ClipMode.FORCE_POSITIVE_DEFINITE:
        lam = np.maximum(eig.eigenvalues, eps)
    else:
        lam = np.minimum(eig.eigenvalues, -eps)
    out = EigenDecomposition(lam, eig.eigenvectors).reconstruct()
    return 0.5 * (out + out.T)


def log_sum_exp(v, axis=None):
    """``log(sum(exp(v)))`` shifted by the max so large entries do not overflow."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise EmptyInput("log_sum_exp of an empty vector")
    vmax = np.max(v, axis=axis, keepdims=True)
    vmax = np.where(np.isfinite(vmax), vmax, 0.0)
    out = np.log(np.sum(np.exp(v - vmax), axis=axis, keepdims=True)) + vmax
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def quadratic_form(m, x):
    """``x^T m x``; ``x`` may be a single vector or a batch of row vectors."""
    m = np.asarray(m, dtype=float)
    x = np.asarray(x, dtype=float)
    if m.ndim != 2 or x.shape[-1] != m.shape[0] or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"matrix {m.shape} incompatible with vector {x.shape}")
    if x.ndim == 1:
        return float(np.einsum("i,ij,j->", x, m, x))
    return np.einsum("ni,ij,nj->n", x, m, x)
