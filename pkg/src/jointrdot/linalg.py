"""Dense matrix primitives.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64. The
symmetric eigensolver is a cyclic Jacobi method with round-robin ("parallel")
pair ordering: each step applies ``N // 2`` disjoint rotations at once using
only elementwise array arithmetic, so results do not depend on BLAS threading.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NonSymmetric

SYMMETRY_TOL = 1e-9
SIGN_EPS = 1e-12


@dataclass(frozen=True)
class EigPair:
    """Eigenvalues in ascending order and the matching unit eigenvectors as columns."""

    values: np.ndarray
    vectors: np.ndarray


def fix_signs(vectors: np.ndarray, eps: float = SIGN_EPS) -> np.ndarray:
    """Flip columns so the first entry with magnitude above ``eps`` is positive."""
    v = np.array(vectors, dtype=np.float64, copy=True)
    if v.size == 0:
        return v
    significant = np.abs(v) > eps
    first = np.argmax(significant, axis=0)
    lead = v[first, np.arange(v.shape[1])]
    flip = significant.any(axis=0) & (lead < 0)
    v[:, flip] *= -1.0
    return v


def _round_robin(n: int) -> list[list[tuple[int, int]]]:
    """Pairings for one Jacobi sweep; every unordered pair appears exactly once."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for k in range(m // 2):
            p, q = players[k], players[m - 1 - k]
            if p < n and q < n:
                pairs.append((min(p, q), max(p, q)))
        rounds.append(pairs)
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def sym_eig(s, tol: float = 1e-12, max_rotations: int | None = None) -> EigPair:
    """Eigendecomposition of a real symmetric matrix.

    Iterates Jacobi sweeps until the off-diagonal Frobenius norm drops below
    ``tol * ||s||_F``. Eigenvalues come back ascending; each eigenvector is
    sign-normalised with :func:`fix_signs`. Raises :class:`NonSymmetric` when
    ``s`` deviates from symmetry by more than 1e-9 (max-abs) and
    :class:`NoConvergence` once ``max_rotations`` (default ``100 * N**2``)
    rotations have been spent.
    """
    a = np.array(s, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonSymmetric("matrix has non-finite entries")
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL:
        raise NonSymmetric(f"asymmetry {np.max(np.abs(a - a.T)):.3e} exceeds {SYMMETRY_TOL}")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    if max_rotations is None:
        max_rotations = 100 * n * n

    norm = np.linalg.norm(a)
    target = tol * norm
    rounds = _round_robin(n)
    rotations = 0

    def off_norm(m):
        return np.linalg.norm(m - np.diag(np.diag(m)))

    while off_norm(a) > target:
        if rotations >= max_rotations:
            raise NoConvergence(f"Jacobi did not converge within {max_rotations} rotations")
        for pairs in rounds:
            p = np.array([pq[0] for pq in pairs])
            q = np.array([pq[1] for pq in pairs])
            apq = a[p, q]
            app = a[p, p]
            aqq = a[q, q]
            active = apq != 0.0
            safe = np.where(active, apq, 1.0)
            with np.errstate(over="ignore"):
                tau = (aqq - app) / (2.0 * safe)
                # hypot avoids overflow of tau**2; tau = +-inf gives t = 0
                t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            sn = t * c
            # rows: J^T A
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - sn[:, None] * aq
            a[q, :] = sn[:, None] * ap + c[:, None] * aq
            # columns: (J^T A) J
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = ap * c - aq * sn
            a[:, q] = ap * sn + aq * c
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = vp * c - vq * sn
            v[:, q] = vp * sn + vq * c
            rotations += len(pairs)

    values = np.diag(a).copy()
    order = np.argsort(values, kind="stable")
    return EigPair(values=values[order], vectors=fix_signs(v[:, order]))


def kron(a, b) -> np.ndarray:
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise DimensionMismatch("kron of an empty matrix")
    return np.kron(a, b)


def vec(x) -> np.ndarray:
    """Stack the columns of ``x`` into one vector."""
    return np.asarray(x).reshape(-1, order="F").copy()


def unvec(v, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    if v.ndim != 1 or v.size != rows * cols:
        raise DimensionMismatch(f"cannot reshape length {v.size} into {rows}x{cols}")
    return v.reshape((rows, cols), order="F").copy()


def orthonormality_error(q) -> float:
    """``max |Q^T Q - I|``."""
    q = np.asarray(q, dtype=np.float64)
    return float(np.max(np.abs(q.T @ q - np.eye(q.shape[1]))))


def is_orthonormal(q, tol: float = 1e-10) -> bool:
    return orthonormality_error(q) <= tol
