"""Composed block transforms and six-slot transform banks.

A composed transform is ``F = G P T``: a separable primary ``G = R kron C``,
a scan permutation ``P`` and a block-diagonal secondary ``T = diag(T~, I)``
acting on the first ``n`` scanned coefficients. Forward coefficients are
``y = T^T P^T G^T vec(X)`` with column-stacking ``vec``; they come out already
in scan order.

The functions here accept one ``N x N`` block or a stack of shape
``(M, N, N)`` and vectorise over the stack.
"""
from __future__ import annotations

import enum
import io
import struct
from dataclasses import dataclass, field

import numpy as np

from ._io import atomic_write_bytes
from .errors import BadMagic, DimensionMismatch, EmptyInput, InvalidParams, TruncatedFile, UnsupportedVersion
from .graphs import adst_basis, dct_basis
from .linalg import is_orthonormal, kron

K_SLOTS = 6
BANK_MAGIC = b"TBK1"


class PrimaryTag(enum.IntEnum):
    DCT = 0
    ADST = 1
    LEARNED = 2


@dataclass(frozen=True)
class PrimaryKind:
    tag: PrimaryTag
    n: int
    col_transform: np.ndarray = field(repr=False)
    row_transform: np.ndarray = field(repr=False)

    @classmethod
    def dct(cls, n: int) -> "PrimaryKind":
        basis = dct_basis(n)
        return cls(PrimaryTag.DCT, n, basis, basis)

    @classmethod
    def adst(cls, n: int) -> "PrimaryKind":
        basis = adst_basis(n)
        return cls(PrimaryTag.ADST, n, basis, basis)

    @classmethod
    def learned(cls, col_transform, row_transform) -> "PrimaryKind":
        col = np.array(col_transform, dtype=np.float64)
        row = np.array(row_transform, dtype=np.float64)
        if col.shape != row.shape or col.ndim != 2 or col.shape[0] != col.shape[1]:
            raise DimensionMismatch("column and row transforms must be square and the same size")
        if not (is_orthonormal(col) and is_orthonormal(row)):
            raise InvalidParams("learned primary transforms must be orthonormal")
        return cls(PrimaryTag.LEARNED, col.shape[0], col, row)

    def __post_init__(self):
        for m in (self.col_transform, self.row_transform):
            m.setflags(write=False)

    def same_as(self, other: "PrimaryKind") -> bool:
        return (
            self.tag == other.tag
            and self.n == other.n
            and np.array_equal(self.col_transform, other.col_transform)
            and np.array_equal(self.row_transform, other.row_transform)
        )

    def matrix(self) -> np.ndarray:
        """``G = R kron C``."""
        return kron(self.row_transform, self.col_transform)


@dataclass(frozen=True)
class ScanOrder:
    """``perm[k]`` is the primary-coefficient index (column-stacked) placed at scan position ``k``."""

    perm: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.perm, dtype=np.int64).reshape(-1)
        if not np.array_equal(np.sort(p), np.arange(p.size)):
            raise InvalidParams("scan order is not a permutation")
        p.setflags(write=False)
        object.__setattr__(self, "perm", p)

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.size)
        return inv

    def __len__(self):
        return self.perm.size

    def __eq__(self, other):
        return isinstance(other, ScanOrder) and np.array_equal(self.perm, other.perm)

    __hash__ = None

    @classmethod
    def identity(cls, length: int) -> "ScanOrder":
        return cls(np.arange(length))

    @classmethod
    def diagonal(cls, n: int) -> "ScanOrder":
        """Anti-diagonal scan of an ``n x n`` coefficient matrix, lowest frequencies first.

        Coefficient ``(i, j)`` (vertical frequency ``i``, horizontal ``j``) sits at
        column-stacked index ``j * n + i``; diagonals ``i + j`` are visited in
        increasing order and each diagonal from small ``i`` to large.
        """
        i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        i, j = i.ravel(), j.ravel()
        order = np.lexsort((i, i + j))
        return cls(j[order] * n + i[order])


@dataclass(frozen=True)
class TransformSpec:
    primary: PrimaryKind
    scan: ScanOrder
    secondary: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        size = self.primary.n ** 2
        if len(self.scan) != size:
            raise DimensionMismatch(f"scan has length {len(self.scan)}, expected {size}")
        if self.secondary is not None:
            t = np.array(self.secondary, dtype=np.float64)
            if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] > size or t.shape[0] < 1:
                raise DimensionMismatch(f"secondary must be square with side <= {size}")
            if not is_orthonormal(t):
                raise InvalidParams("secondary transform must be orthonormal")
            t.setflags(write=False)
            object.__setattr__(self, "secondary", t)

    @property
    def block_size(self) -> int:
        return self.primary.n

    @property
    def n_secondary(self) -> int:
        return 0 if self.secondary is None else self.secondary.shape[0]

    def with_secondary(self, secondary) -> "TransformSpec":
        return TransformSpec(self.primary, self.scan, secondary)

    def same_as(self, other: "TransformSpec") -> bool:
        if not (self.primary.same_as(other.primary) and self.scan == other.scan):
            return False
        if self.secondary is None or other.secondary is None:
            return self.secondary is None and other.secondary is None
        return np.array_equal(self.secondary, other.secondary)


def _as_stack(x, n: int) -> tuple[np.ndarray, bool]:
    a = np.asarray(x, dtype=np.float64)
    single = a.ndim == 2
    if single:
        a = a[None]
    if a.ndim != 3 or a.shape[1:] != (n, n):
        raise DimensionMismatch(f"expected {n}x{n} blocks, got shape {np.shape(x)}")
    return a, single


def primary_coefficients(x, primary: PrimaryKind) -> np.ndarray:
    """``G^T vec(X)`` for each block, shape ``(M, N*N)`` (or ``(N*N,)`` for one block)."""
    b, single = _as_stack(x, primary.n)
    c = primary.col_transform.T @ b @ primary.row_transform
    out = c.transpose(0, 2, 1).reshape(b.shape[0], -1)
    return out[0] if single else out


def forward(x, spec: TransformSpec) -> np.ndarray:
    """Scan-ordered transform coefficients of one block or a stack of blocks."""
    b, single = _as_stack(x, spec.block_size)
    y = primary_coefficients(b, spec.primary)[:, spec.scan.perm]
    if spec.secondary is not None:
        n = spec.n_secondary
        y[:, :n] = y[:, :n] @ spec.secondary
    return y[0] if single else y


def inverse(y, spec: TransformSpec) -> np.ndarray:
    """Blocks ``X`` with ``vec(X) = F y``."""
    n_blk = spec.block_size
    v = np.array(y, dtype=np.float64)
    single = v.ndim == 1
    if single:
        v = v[None]
    if v.ndim != 2 or v.shape[1] != n_blk * n_blk:
        raise DimensionMismatch(f"expected coefficient vectors of length {n_blk * n_blk}")
    if spec.secondary is not None:
        n = spec.n_secondary
        v[:, :n] = v[:, :n] @ spec.secondary.T
    g = np.empty_like(v)
    g[:, spec.scan.perm] = v
    c = g.reshape(-1, n_blk, n_blk).transpose(0, 2, 1)
    x = spec.primary.col_transform @ c @ spec.primary.row_transform.T
    return x[0] if single else x


def compose_flat(spec: TransformSpec) -> np.ndarray:
    """Explicit ``N^2 x N^2`` matrix ``F`` with ``forward(x) == F.T @ vec(x)``."""
    size = spec.block_size ** 2
    g = spec.primary.matrix()
    p = np.zeros((size, size))
    p[spec.scan.perm, np.arange(size)] = 1.0
    t = np.eye(size)
    if spec.secondary is not None:
        n = spec.n_secondary
        t[:n, :n] = spec.secondary
    return g @ p @ t


def scan_order_from_variance(blocks, primary: PrimaryKind) -> ScanOrder:
    """Scan by decreasing per-position coefficient power; ties go to the lower index.

    Power is the zero-mean sample variance, i.e. the mean square of each
    primary coefficient over the block set.
    """
    b = np.asarray(blocks, dtype=np.float64)
    if b.ndim == 2:
        b = b[None]
    if b.ndim != 3 or b.shape[0] == 0:
        raise EmptyInput("need at least one block to estimate a scan order")
    coeffs = primary_coefficients(b, primary)
    power = np.mean(coeffs * coeffs, axis=0)
    return ScanOrder(np.argsort(-power, kind="stable"))


@dataclass(frozen=True)
class TransformBank:
    """Six transform slots: DCT, ADST, LEARNED, then the same three with a secondary."""

    specs: tuple
    mode_label: str
    block_size: int

    def __post_init__(self):
        specs = tuple(self.specs)
        if len(specs) != K_SLOTS:
            raise InvalidParams(f"a bank holds exactly {K_SLOTS} specs, got {len(specs)}")
        for s in specs:
            if s.block_size != self.block_size:
                raise DimensionMismatch("all specs must share the bank's block size")
        for k in range(3):
            if not specs[k].primary.same_as(specs[k + 3].primary):
                raise InvalidParams(f"slot {k + 4} must share the primary of slot {k + 1}")
        object.__setattr__(self, "specs", specs)

    def __getitem__(self, k: int) -> TransformSpec:
        return self.specs[k]

    def __len__(self):
        return K_SLOTS

    def replace(self, k: int, spec: TransformSpec) -> "TransformBank":
        specs = list(self.specs)
        specs[k] = spec
        return TransformBank(tuple(specs), self.mode_label, self.block_size)

    def same_as(self, other: "TransformBank") -> bool:
        return (
            self.mode_label == other.mode_label
            and self.block_size == other.block_size
            and all(a.same_as(b) for a, b in zip(self.specs, other.specs))
        )


def baseline_specs(n: int) -> tuple[TransformSpec, TransformSpec]:
    """DCT and ADST with the anti-diagonal scan and no secondary."""
    scan = ScanOrder.diagonal(n)
    return TransformSpec(PrimaryKind.dct(n), scan), TransformSpec(PrimaryKind.adst(n), scan)


# -- TBK1 serialization ------------------------------------------------------


def _f64(m: np.ndarray) -> bytes:
    return np.ascontiguousarray(m, dtype="<f8").tobytes()


def bank_to_bytes(bank: TransformBank) -> bytes:
    n = bank.block_size
    out = io.BytesIO()
    label = bank.mode_label.encode("utf-8")
    out.write(BANK_MAGIC)
    out.write(struct.pack("<I", n))
    out.write(struct.pack("<H", len(label)))
    out.write(label)
    for spec in bank.specs:
        out.write(struct.pack("<B", int(spec.primary.tag)))
        if spec.primary.tag == PrimaryTag.LEARNED:
            out.write(_f64(spec.primary.col_transform))
            out.write(_f64(spec.primary.row_transform))
        out.write(np.ascontiguousarray(spec.scan.perm, dtype="<u4").tobytes())
        out.write(struct.pack("<B", int(spec.secondary is not None)))
        out.write(struct.pack("<I", spec.n_secondary))
        if spec.secondary is not None:
            out.write(_f64(spec.secondary))
    return out.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise TruncatedFile(f"needed {size} bytes at offset {self.pos}, file has {len(self.data)}")
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]

    def matrix(self, rows: int, cols: int, dtype: str) -> np.ndarray:
        size = np.dtype(dtype).itemsize * rows * cols
        return np.frombuffer(self.take(size), dtype=dtype).reshape(rows, cols).astype(dtype[1:])


def bank_from_bytes(data: bytes) -> TransformBank:
    r = _Reader(data)
    if r.take(4) != BANK_MAGIC:
        raise BadMagic("not a TBK1 transform bank")
    n = r.unpack("<I")
    label = r.take(r.unpack("<H")).decode("utf-8")
    specs = []
    for _ in range(K_SLOTS):
        raw = r.unpack("<B")
        if raw not in PrimaryTag._value2member_map_:
            raise UnsupportedVersion(f"unknown primary tag {raw}")
        tag = PrimaryTag(raw)
        if tag == PrimaryTag.LEARNED:
            col = r.matrix(n, n, "<f8")
            row = r.matrix(n, n, "<f8")
            primary = PrimaryKind(tag, n, col, row)
        elif tag == PrimaryTag.DCT:
            primary = PrimaryKind.dct(n)
        else:
            primary = PrimaryKind.adst(n)
        scan = ScanOrder(r.matrix(1, n * n, "<u4").reshape(-1).astype(np.int64))
        present = r.unpack("<B")
        n_sec = r.unpack("<I")
        secondary = r.matrix(n_sec, n_sec, "<f8") if present else None
        specs.append(TransformSpec(primary, scan, secondary))
    return TransformBank(tuple(specs), label, n)


def write_bank(bank: TransformBank, path) -> None:
    atomic_write_bytes(path, bank_to_bytes(bank))


def read_bank(path) -> TransformBank:
    with open(path, "rb") as f:
        return bank_from_bytes(f.read())
