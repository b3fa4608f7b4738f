"""Rate-distortion optimized transform learning.

Training alternates two steps over a block set (a Lloyd iteration): refit the
transform of every slot from the blocks currently assigned to it, then move
every block to the slot with the lowest cost ``SSE + lambda * nnz`` where
``nnz`` counts non-zero quantized coefficients.

Slot layout (0-based) follows :class:`~jointrdot.transforms.TransformBank`:
0 DCT, 1 ADST, 2 learned primary, 3-5 the same primaries with a secondary.
DCT and ADST are fixed. The learned primary is refit from the union of the
blocks in slots 2 and 5, which share it; each secondary is the KLT of the
first ``n`` scanned primary coefficients of its own blocks.

Closed-form refits are not guaranteed to lower the quantized RD cost, so a
refit is kept only if the RD total after re-assignment does not increase.
With that guard, and exact arg-min assignment, the total RD cost never
increases across iterations.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import map_chunks
from .errors import EmptyInput, InvalidParams
from .graphs import DEFAULT_BETA, learn_spgt
from .klt import secondary_klt, separable_klt
from .transforms import (
    K_SLOTS,
    PrimaryKind,
    TransformBank,
    TransformSpec,
    forward,
    inverse,
    scan_order_from_variance,
)

DEFAULT_QP = 28
DEFAULT_MAX_ITER = 100
DEFAULT_TOL = 1e-6


class Learner(str, enum.Enum):
    SPGT = "spgt"
    SEP_KLT = "sepklt"


@dataclass(frozen=True)
class QuantConfig:
    """Uniform quantizer and Lagrange multiplier tied to a QP.

    ``step = 2 ** ((qp - 12) / 6)`` and ``lam = 0.85 * 2 ** ((qp - 12) / 3)``,
    so ``lam == 0.85 * step ** 2``.
    """

    qp: int
    step: float = field(init=False)
    lam: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "step", 2.0 ** ((self.qp - 12) / 6.0))
        object.__setattr__(self, "lam", 0.85 * 2.0 ** ((self.qp - 12) / 3.0))


def quantize(y, q: QuantConfig) -> np.ndarray:
    """Round ``y / step`` to the nearest integer, halves away from zero."""
    v = np.asarray(y, dtype=np.float64) / q.step
    return (np.sign(v) * np.floor(np.abs(v) + 0.5)).astype(np.int64)


def dequantize(levels, q: QuantConfig) -> np.ndarray:
    return np.asarray(levels, dtype=np.float64) * q.step


def _flat(blocks) -> np.ndarray:
    b = np.asarray(blocks, dtype=np.float64)
    if b.ndim == 2:
        b = b[None]
    return b


def spec_costs(blocks, spec: TransformSpec, q: QuantConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-block pixel-domain SSE and non-zero count under one transform."""
    b = _flat(blocks)

    def run(sl):
        x = b[sl]
        levels = quantize(forward(x, spec), q)
        recon = inverse(dequantize(levels, q), spec)
        err = (x - recon).reshape(x.shape[0], -1)
        return np.einsum("ij,ij->i", err, err), np.count_nonzero(levels, axis=1)

    parts = map_chunks(run, b.shape[0])
    if not parts:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def rd_cost(x, spec: TransformSpec, q: QuantConfig) -> tuple[float, int, float]:
    """``(distortion, nnz, distortion + lambda * nnz)`` for a single block."""
    dist, nnz = spec_costs(np.asarray(x)[None], spec, q)
    return float(dist[0]), int(nnz[0]), float(dist[0] + q.lam * nnz[0])


def cost_matrix(blocks, bank: TransformBank, q: QuantConfig, slots=None) -> np.ndarray:
    """RD cost of every block under every requested slot, shape ``(M, len(slots))``."""
    slots = range(K_SLOTS) if slots is None else slots
    cols = []
    for k in slots:
        dist, nnz = spec_costs(blocks, bank[k], q)
        cols.append(dist + q.lam * nnz)
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class ClusterAssign:
    assignment: np.ndarray
    k: int = K_SLOTS

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == j)

    @property
    def sizes(self) -> list[int]:
        return np.bincount(self.assignment, minlength=self.k).tolist()


def _assign_from_costs(costs: np.ndarray, slots) -> ClusterAssign:
    # argmin returns the first minimum: ties go to the lowest slot index
    slots = np.asarray(list(slots))
    return ClusterAssign(slots[np.argmin(costs, axis=1)])


def assign_clusters(blocks, bank: TransformBank, q: QuantConfig, slots=None) -> ClusterAssign:
    slots = tuple(range(K_SLOTS)) if slots is None else tuple(sorted(slots))
    return _assign_from_costs(cost_matrix(blocks, bank, q, slots), slots)


def _assigned_costs(blocks, bank, assign, q) -> np.ndarray:
    b = _flat(blocks)
    costs = np.zeros(b.shape[0])
    for j in np.unique(assign.assignment):
        dist, nnz = spec_costs(b, bank[int(j)], q)
        sel = assign.assignment == j
        costs[sel] = (dist + q.lam * nnz)[sel]
    return costs


def rd_total(blocks, bank: TransformBank, assign: ClusterAssign, q: QuantConfig) -> float:
    """Total ``SSE + lambda * nnz`` of every block under its assigned slot."""
    return math.fsum(_assigned_costs(blocks, bank, assign, q))


# -- transform updates ---------------------------------------------------------


def learn_primary(blocks, learner: Learner | str, beta: float = DEFAULT_BETA) -> PrimaryKind:
    learner = Learner(learner)
    if learner == Learner.SPGT:
        col, row = learn_spgt(blocks, beta)
    else:
        col, row = separable_klt(blocks)
    return PrimaryKind.learned(col, row)


def fit_secondary(blocks, spec: TransformSpec, n: int) -> np.ndarray:
    """KLT of the first ``n`` scanned primary coefficients of ``blocks`` under ``spec``'s primary."""
    z = forward(blocks, TransformSpec(spec.primary, spec.scan))[:, :n]
    return secondary_klt(z)


def _spec_cost_column(blocks, spec, q) -> np.ndarray:
    dist, nnz = spec_costs(blocks, spec, q)
    return dist + q.lam * nnz


def _distinct(base, *subsets):
    """Non-empty subsets that differ from ``base`` and from each other."""
    seen = [base]
    out = []
    for sub in subsets:
        if sub.size and not any(np.array_equal(sub, x) for x in seen):
            seen.append(sub)
            out.append(sub)
    return out


def _family(assign, k, active) -> np.ndarray:
    """Blocks served by primary ``k`` with or without its secondary."""
    return np.sort(np.concatenate([assign.members(j) for j in (k, k + 3) if j in active]))


def _split(family, columns, k):
    """Members of ``family`` that code cheaper with secondary ``k + 3`` than with primary ``k``."""
    if columns is None or k not in columns or k + 3 not in columns:
        return family[:0]
    return family[columns[k + 3][family] < columns[k][family]]


def _candidate_updates(b, assign, specs, learner, beta, active, update_primary, columns=None):
    """Closed-form refits as ``[(group_slots, [option, ...]), ...]``; an option maps slot -> spec.

    The first option of each group is the plain refit on the slot's own
    cluster. Extra options (used only by the guarded update) refit a
    secondary on its whole primary family, or on the part of the family that
    prefers the secondary over the primary alone.
    """
    groups = []
    for k in (0, 1):
        j = k + 3
        members = assign.members(j)
        if j in active and members.size:
            n = specs[j].n_secondary
            options = [{j: specs[j].with_secondary(fit_secondary(b[members], specs[j], n))}]
            family = _family(assign, k, active)
            for subset in _distinct(members, family, _split(family, columns, k)):
                options.append({j: specs[j].with_secondary(fit_secondary(b[subset], specs[j], n))})
            groups.append(((j,), options))

    if 2 in active or 5 in active:
        options = []
        n = specs[5].n_secondary
        sec_members = assign.members(5) if 5 in active else np.zeros(0, dtype=np.int64)
        union = np.sort(np.concatenate([assign.members(j) for j in (2, 5) if j in active]))
        if update_primary and union.size:
            primary = learn_primary(b[union], learner, beta)
            p_spec = TransformSpec(primary, specs[2].scan)
            sec = fit_secondary(b[sec_members], p_spec, n) if sec_members.size else specs[5].secondary
            options.append({2: p_spec, 5: TransformSpec(primary, specs[5].scan, sec)})
        if sec_members.size:
            options.append({5: specs[5].with_secondary(fit_secondary(b[sec_members], specs[5], n))})
            for subset in _distinct(sec_members, union, _split(union, columns, 2)):
                options.append({5: specs[5].with_secondary(fit_secondary(b[subset], specs[5], n))})
        if options:
            groups.append(((2, 5), options))
    return groups


def _shares_primary(specs, option) -> bool:
    merged = {j: option.get(j, specs[j]) for j in (2, 5)}
    return merged[2].primary.same_as(merged[5].primary)


def update_transforms(
    blocks,
    assign: ClusterAssign,
    bank: TransformBank,
    learner: Learner | str,
    q: QuantConfig | None = None,
    beta: float = DEFAULT_BETA,
    slots=None,
    update_primary: bool = True,
) -> TransformBank:
    """Refit the adaptive slots of ``bank`` from the current clusters.

    Slots 0 and 1 never change and empty clusters keep their transform. The
    learned primary (slot 2, shared with slot 5) is refit on the union of both
    clusters, and slot 5's secondary is refit under the new primary.

    Without ``q`` every refit is applied. With ``q`` the refits are judged by
    the RD total after re-assigning every block to its cheapest active slot:
    all refits together are kept if that total does not increase; otherwise
    each refit is tried on its own, in slot order, and kept only if it lowers
    the total. ``slots`` restricts which slots take part;
    ``update_primary=False`` freezes the learned primary.
    """
    b = _flat(blocks)
    active = tuple(range(K_SLOTS)) if slots is None else tuple(sorted(slots))
    specs = list(bank.specs)
    columns = None if q is None else {j: _spec_cost_column(b, specs[j], q) for j in active}
    groups = _candidate_updates(b, assign, specs, learner, beta, set(active), update_primary, columns)

    if q is None:
        for _, options in groups:
            for j, spec in options[0].items():
                specs[j] = spec
        return TransformBank(tuple(specs), bank.mode_label, bank.block_size)

    cache = {}

    def column(j, spec):
        key = (j, id(spec))
        if key not in cache:
            cache[key] = (spec, _spec_cost_column(b, spec, q))
        return cache[key][1]

    def total(cols):
        return math.fsum(np.min(np.stack([cols[j] for j in active], axis=1), axis=1))

    def apply(cols, option):
        trial = dict(cols)
        for j, spec in option.items():
            if j in trial:
                trial[j] = column(j, spec)
        return trial

    best = total(columns)
    plain = {j: spec for _, options in groups for j, spec in options[0].items()}
    trial = apply(columns, plain)
    if groups and total(trial) <= best:
        best, columns = total(trial), trial
        for j, spec in plain.items():
            specs[j] = spec

    for _, options in groups:
        choice = None
        for option in options:
            if not _shares_primary(specs, option):
                continue
            trial = apply(columns, option)
            value = total(trial)
            if value < best:
                best, choice, chosen = value, option, trial
        if choice is not None:
            columns = chosen
            for j, spec in choice.items():
                specs[j] = spec
    return TransformBank(tuple(specs), bank.mode_label, bank.block_size)


# -- Lloyd loop and training pipelines -------------------------------------------


@dataclass
class TrainReport:
    iterations: list[float]
    cluster_sizes: list[int]
    converged: bool
    qp: int
    lam: float
    initial_rd_total: float | None = None
    method: str | None = None
    learner: str | None = None
    mode: str | None = None

    @property
    def iteration_count(self) -> int:
        return len(self.iterations)

    @property
    def final_rd_total(self) -> float:
        return self.iterations[-1] if self.iterations else self.initial_rd_total

    def to_dict(self) -> dict:
        d = {
            "iterations": [float(v) for v in self.iterations],
            "cluster_sizes": [int(s) for s in self.cluster_sizes],
            "converged": bool(self.converged),
            "qp": int(self.qp),
            "lambda": float(self.lam),
        }
        for key in ("initial_rd_total", "method", "learner", "mode"):
            value = getattr(self, key)
            if value is not None:
                d[key] = value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "TrainReport":
        return cls(
            iterations=list(d["iterations"]),
            cluster_sizes=list(d["cluster_sizes"]),
            converged=bool(d["converged"]),
            qp=int(d["qp"]),
            lam=float(d["lambda"]),
            initial_rd_total=d.get("initial_rd_total"),
            method=d.get("method"),
            learner=d.get("learner"),
            mode=d.get("mode"),
        )


def lloyd_train(
    blocks,
    bank: TransformBank,
    q: QuantConfig,
    learner: Learner | str,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    beta: float = DEFAULT_BETA,
    slots=None,
    update_primary: bool = True,
) -> tuple[TransformBank, ClusterAssign, TrainReport]:
    """Alternate transform refits and re-assignment until the RD total settles.

    Stops when the relative decrease of the RD total drops below ``tol`` or
    after ``max_iter`` passes. ``report.iterations`` holds the RD total after
    each pass.
    """
    if max_iter < 1:
        raise InvalidParams("max_iter must be at least 1")
    if not tol > 0:
        raise InvalidParams("tol must be positive")
    b = _flat(blocks)
    if b.shape[0] == 0:
        raise EmptyInput("no training blocks")
    slots = tuple(range(K_SLOTS)) if slots is None else tuple(sorted(slots))

    assign = assign_clusters(b, bank, q, slots)
    prev = rd_total(b, bank, assign, q)
    initial = prev
    history = []
    converged = False
    for _ in range(max_iter):
        bank = update_transforms(b, assign, bank, learner, q, beta, slots, update_primary)
        assign = assign_clusters(b, bank, q, slots)
        cur = rd_total(b, bank, assign, q)
        history.append(cur)
        if prev <= 0 or abs(prev - cur) / prev < tol:
            converged = True
            break
        prev = cur
    report = TrainReport(history, assign.sizes, converged, q.qp, q.lam, initial_rd_total=initial,
                         learner=Learner(learner).value, mode=bank.mode_label)
    return bank, assign, report


def default_n_secondary(block_size: int) -> int:
    """16 coefficients for 8x8 blocks, 64 for 16x16 (a quarter of the block)."""
    return max(1, block_size * block_size // 4)


def initial_bank(
    blocks,
    learner: Learner | str,
    n_secondary: int | None = None,
    beta: float = DEFAULT_BETA,
    mode_label: str = "",
    q: QuantConfig | None = None,
) -> TransformBank:
    """Starting bank shared by both training pipelines.

    DCT and ADST, plus a primary learned from all blocks. Each primary gets a
    variance scan estimated on all blocks (frozen afterwards). The secondary
    of each primary starts as the KLT of the first ``n`` scanned coefficients
    of the blocks that prefer that primary under ``q`` (all blocks when ``q``
    is None or no block prefers it).
    """
    b = _flat(blocks)
    if b.shape[0] == 0:
        raise EmptyInput("no training blocks")
    n_blk = b.shape[1]
    n = default_n_secondary(n_blk) if n_secondary is None else int(n_secondary)
    if not 1 <= n <= n_blk * n_blk:
        raise InvalidParams(f"n_secondary must lie in [1, {n_blk * n_blk}]")
    primaries = [PrimaryKind.dct(n_blk), PrimaryKind.adst(n_blk), learn_primary(b, learner, beta)]
    base = [TransformSpec(p, scan_order_from_variance(b, p)) for p in primaries]
    groups = [np.arange(b.shape[0])] * 3
    if q is not None:
        choice = np.argmin(np.stack([_spec_cost_column(b, s, q) for s in base], axis=1), axis=1)
        groups = [np.flatnonzero(choice == k) if np.any(choice == k) else groups[k] for k in range(3)]
    with_sec = [s.with_secondary(fit_secondary(b[g], s, n)) for s, g in zip(base, groups)]
    return TransformBank(tuple(base + with_sec), mode_label, n_blk)


def _primary_stage(b, q, learner, n_secondary, beta, max_iter, tol, mode_label):
    """Lloyd over the three primaries, then secondaries fitted per primary cluster.

    Both pipelines start from this bank, so they differ only in how the
    secondaries are clustered afterwards.
    """
    bank = initial_bank(b, learner, n_secondary, beta, mode_label)
    n = bank[3].n_secondary
    bank, stage1, report = lloyd_train(b, bank, q, learner, max_iter, tol, beta, slots=(0, 1, 2))
    specs = list(bank.specs)
    for k in range(3):
        members = stage1.members(k)
        if members.size:
            specs[k + 3] = specs[k].with_secondary(fit_secondary(b[members], specs[k], n))
    return TransformBank(tuple(specs), bank.mode_label, bank.block_size), stage1, report


def train_joint(
    blocks,
    q: QuantConfig,
    learner: Learner | str,
    n_secondary: int | None = None,
    beta: float = DEFAULT_BETA,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    mode_label: str = "",
) -> tuple[TransformBank, ClusterAssign, TrainReport]:
    """All six slots compete for every block in a single Lloyd loop.

    ``report.iterations`` holds the primary-stage totals followed by the
    six-slot totals.
    """
    b = _flat(blocks)
    bank, _, report1 = _primary_stage(b, q, learner, n_secondary, beta, max_iter, tol, mode_label)
    bank, assign, report = lloyd_train(b, bank, q, learner, max_iter, tol, beta)
    report.iterations = report1.iterations + report.iterations
    report.converged = report.converged and report1.converged
    report.initial_rd_total = report1.initial_rd_total
    report.method = "joint"
    return bank, assign, report


def train_tree(
    blocks,
    q: QuantConfig,
    learner: Learner | str,
    n_secondary: int | None = None,
    beta: float = DEFAULT_BETA,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    mode_label: str = "",
) -> tuple[TransformBank, ClusterAssign, TrainReport]:
    """Primaries first, then one secondary per primary cluster.

    After the primary stage, each primary cluster is split independently
    between its primary alone and the primary plus secondary (primary frozen).
    The returned assignment is a final re-assignment of all blocks over all six
    slots; ``report.iterations`` holds the primary-stage totals followed by
    that final total.
    """
    b = _flat(blocks)
    bank, stage1, report1 = _primary_stage(b, q, learner, n_secondary, beta, max_iter, tol, mode_label)
    specs = list(bank.specs)
    converged = report1.converged
    for k in range(3):
        members = stage1.members(k)
        if members.size == 0:
            continue
        sub_bank, _, sub_report = lloyd_train(b[members], bank, q, learner, max_iter, tol, beta,
                                              slots=(k, k + 3), update_primary=False)
        specs[k + 3] = sub_bank[k + 3]
        converged = converged and sub_report.converged

    bank = TransformBank(tuple(specs), bank.mode_label, bank.block_size)
    assign = assign_clusters(b, bank, q)
    final = rd_total(b, bank, assign, q)
    report = TrainReport(report1.iterations + [final], assign.sizes, converged, q.qp, q.lam,
                         initial_rd_total=report1.initial_rd_total, method="tree",
                         learner=Learner(learner).value, mode=bank.mode_label)
    return bank, assign, report


def train(method: str, blocks, q: QuantConfig, learner: Learner | str, **kwargs):
    if method == "joint":
        return train_joint(blocks, q, learner, **kwargs)
    if method == "tree":
        return train_tree(blocks, q, learner, **kwargs)
    raise InvalidParams(f"unknown method {method!r}")
