"""Symmetric eigendecomposition and the eigen-split of a Gram matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

SYMMETRY_TOL = 1e-8
PINV_RTOL = 1e-10


@njit(cache=True)
def _jacobi(a, tol, max_sweeps):
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if np.sqrt(2.0 * off) <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                sign = 1.0 if theta >= 0.0 else -1.0
                t = sign / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return np.diag(a).copy(), v


def jacobi_eigh(a, tol: float = 1e-10, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending,
    matching :func:`numpy.linalg.eigh`.  ``tol`` bounds the Frobenius
    norm of the remaining off-diagonal part.
    """
    a = _check_symmetric(a)
    if a.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    vals, vecs = _jacobi(a.copy(), tol * max(1.0, np.abs(a).max()), max_sweeps)
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def _check_symmetric(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.size and np.max(np.abs(a - a.T)) > SYMMETRY_TOL * max(1.0, np.abs(a).max()):
        raise ValueError("matrix is not symmetric")
    return a


def symmetric_eigh(a, method: str = "lapack") -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, ascending eigenvalues.

    ``method="lapack"`` uses :func:`numpy.linalg.eigh`; ``"jacobi"`` uses
    :func:`jacobi_eigh`.
    """
    if method == "jacobi":
        return jacobi_eigh(a)
    if method != "lapack":
        raise ValueError(f"unknown eigensolver {method!r}")
    a = _check_symmetric(a)
    # symmetrise away round-off so LAPACK sees exactly what we checked
    return np.linalg.eigh(0.5 * (a + a.T))


@dataclass(frozen=True)
class EigSplit:
    """Spectral split of a Gram matrix at eigenvalue 1.

    ``z`` is the pseudo-inverse, ``g`` inverts only eigenvalues >= 1 and
    ``w`` projects onto the eigenspace of eigenvalues < 1.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    z: np.ndarray
    g: np.ndarray
    w: np.ndarray

    @property
    def num_large(self) -> int:
        """Number of eigenvalues >= 1 (the partition index ``j``)."""
        return int(np.count_nonzero(self.eigenvalues >= 1.0))


def eig_split(gram, method: str = "lapack") -> EigSplit:
    lam, u = symmetric_eigh(gram, method)
    n = len(lam)
    cutoff = PINV_RTOL * max(float(lam.max()) if n else 0.0, 0.0)
    inv = np.zeros(n)
    keep = lam > cutoff
    inv[keep] = 1.0 / lam[keep]
    large = lam >= 1.0
    z = (u * inv) @ u.T
    g = (u * np.where(large, inv, 0.0)) @ u.T
    w = (u * np.where(large, 0.0, 1.0)) @ u.T
    return EigSplit(lam, u, z, g, w)
