"""Path-graph models and the transforms they induce.

A path graph over ``N`` nodes carries ``N - 1`` edge weights and one
self-loop weight at the first node. Its generalized Laplacian (degree minus
adjacency, plus the self-loop on entry ``(0, 0)``) is read as an inverse
covariance, and the Laplacian eigenbasis (ascending eigenvalues) is the
graph-based transform. Unit weights without a self-loop give the DCT-II;
unit weights with a unit self-loop give the ADST.

Sample extraction for separable learning: every block contributes its ``N``
columns as samples for the column graph and its ``N`` rows (the columns of
its transpose) as samples for the row graph.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, EmptyInput, InvalidBeta, InvalidParams
from .linalg import fix_signs, sym_eig

DEFAULT_BETA = 1e-4
WEIGHT_MIN = 1e-8
WEIGHT_MAX = 1e8
DEGENERATE_POWER = 1e-12


@dataclass(frozen=True)
class PathGraphParams:
    n_nodes: int
    edge_weights: np.ndarray = field(repr=False)
    self_loop: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.edge_weights, dtype=np.float64).reshape(-1)
        if self.n_nodes < 1 or w.size != self.n_nodes - 1:
            raise InvalidParams(f"{self.n_nodes} nodes need {self.n_nodes - 1} edge weights, got {w.size}")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InvalidParams("edge weights must be finite and strictly positive")
        if not np.isfinite(self.self_loop) or self.self_loop < 0:
            raise InvalidParams("self-loop weight must be finite and non-negative")
        w.setflags(write=False)
        object.__setattr__(self, "edge_weights", w)
        object.__setattr__(self, "self_loop", float(self.self_loop))

    @classmethod
    def unit(cls, n: int, self_loop: float = 0.0) -> "PathGraphParams":
        return cls(n, np.ones(n - 1), self_loop)


def learn_path_graph(samples, beta: float = DEFAULT_BETA) -> PathGraphParams:
    """Closed-form path-graph fit to sample vectors of length ``N``.

    Edge ``(i, i+1)`` gets the inverse of the mean squared difference between
    its endpoints plus ``beta``; the self-loop is the inverse mean power at the
    first node. Weights are clamped to ``[1e-8, 1e8]``. A first node with mean
    power below 1e-12 gets no self-loop, and all-zero data returns the
    unit-weight path.
    """
    if not beta > 0:
        raise InvalidBeta(f"beta must be positive, got {beta}")
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[0] == 0:
        raise EmptyInput("no samples")
    n = x.shape[1]
    if n < 2:
        raise DimensionMismatch("path graphs need at least two nodes")
    if not np.any(x):
        return PathGraphParams.unit(n)

    msd = np.mean(np.diff(x, axis=1) ** 2, axis=0)
    weights = np.clip(1.0 / (msd + beta), WEIGHT_MIN, WEIGHT_MAX)
    power = float(np.mean(x[:, 0] ** 2))
    alpha = 0.0 if power < DEGENERATE_POWER else min(1.0 / power, WEIGHT_MAX)
    return PathGraphParams(n, weights, alpha)


def laplacian(g: PathGraphParams) -> np.ndarray:
    n = g.n_nodes
    w = g.edge_weights
    lap = np.zeros((n, n))
    idx = np.arange(n - 1)
    lap[idx, idx + 1] = -w
    lap[idx + 1, idx] = -w
    lap[idx, idx] += w
    lap[idx + 1, idx + 1] += w
    lap[0, 0] += g.self_loop
    return lap


def gbt(g: PathGraphParams) -> np.ndarray:
    """Laplacian eigenbasis as columns, lowest graph frequency first."""
    return sym_eig(laplacian(g)).vectors


@lru_cache(maxsize=None)
def _cached_gbt(n: int, self_loop: float) -> np.ndarray:
    basis = gbt(PathGraphParams.unit(n, self_loop))
    basis.setflags(write=False)
    return basis


def dct_basis(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis (columns) built as the unit path-graph transform."""
    if n < 2:
        raise DimensionMismatch("n must be at least 2")
    return _cached_gbt(n, 0.0).copy()


def adst_basis(n: int) -> np.ndarray:
    """ADST basis (columns): unit path graph with a unit self-loop at node 0."""
    if n < 2:
        raise DimensionMismatch("n must be at least 2")
    return _cached_gbt(n, 1.0).copy()


def dct_closed_form(n: int) -> np.ndarray:
    """Orthonormal DCT-II from the cosine formula; column ``k`` is frequency ``k``."""
    i = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    basis = np.cos(np.pi * k * (2 * i + 1) / (2 * n)) * np.sqrt(2.0 / n)
    basis[:, 0] = 1.0 / np.sqrt(n)
    return fix_signs(basis)


def column_samples(blocks) -> np.ndarray:
    """All columns of all blocks, one per row."""
    b = np.asarray(blocks, dtype=np.float64)
    return b.transpose(0, 2, 1).reshape(-1, b.shape[1])


def row_samples(blocks) -> np.ndarray:
    """All rows of all blocks, one per row."""
    b = np.asarray(blocks, dtype=np.float64)
    return b.reshape(-1, b.shape[2])


def _check_blocks(blocks) -> np.ndarray:
    b = np.asarray(blocks, dtype=np.float64)
    if b.ndim == 2:
        b = b[None]
    if b.ndim != 3 or b.shape[0] == 0:
        raise EmptyInput("need a non-empty stack of blocks")
    if b.shape[1] != b.shape[2]:
        raise DimensionMismatch(f"blocks must be square, got {b.shape[1:]}")
    return b


def learn_spgt_graphs(blocks, beta: float = DEFAULT_BETA) -> tuple[PathGraphParams, PathGraphParams]:
    b = _check_blocks(blocks)
    return learn_path_graph(column_samples(b), beta), learn_path_graph(row_samples(b), beta)


def learn_spgt(blocks, beta: float = DEFAULT_BETA) -> tuple[np.ndarray, np.ndarray]:
    """Separable path-graph transform ``(col_transform, row_transform)`` for a block set."""
    col_graph, row_graph = learn_spgt_graphs(blocks, beta)
    return gbt(col_graph), gbt(row_graph)
