"""Covariance-based transforms.

Residuals are modelled as zero-mean, so every covariance here is the raw
second moment ``(1/P) sum x x^T`` with no mean subtraction. Bases come back in
descending-variance order (largest eigenvalue first); null-space directions of
a rank-deficient estimate end up last.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput
from .graphs import _check_blocks, column_samples, row_samples
from .linalg import fix_signs, sym_eig


@dataclass(frozen=True)
class CovEstimate:
    dim: int
    matrix: np.ndarray
    sample_count: int


def sample_covariance(vectors) -> CovEstimate:
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[0] == 0:
        raise EmptyInput("no samples")
    # einsum without BLAS keeps the reduction order independent of thread count
    s = np.einsum("pi,pj->ij", x, x, optimize=False) / x.shape[0]
    s = 0.5 * (s + s.T)
    return CovEstimate(dim=x.shape[1], matrix=s, sample_count=x.shape[0])


def descending_eigenbasis(cov: np.ndarray) -> np.ndarray:
    """Eigenvectors of ``cov`` ordered by decreasing eigenvalue, sign-fixed."""
    eig = sym_eig(cov)
    # stable sort: tied eigenvalues keep the solver's order
    order = np.argsort(-eig.values, kind="stable")
    return fix_signs(eig.vectors[:, order])


def separable_klt(blocks) -> tuple[np.ndarray, np.ndarray]:
    """Eigenbases of the column-sample and row-sample covariances."""
    b = _check_blocks(blocks)
    col = descending_eigenbasis(sample_covariance(column_samples(b)).matrix)
    row = descending_eigenbasis(sample_covariance(row_samples(b)).matrix)
    return col, row


def secondary_klt(coeff_vectors) -> np.ndarray:
    """Non-separable KLT (``n x n``) of a set of coefficient vectors."""
    return descending_eigenbasis(sample_covariance(coeff_vectors).matrix)
