"""Block codec simulator used to score transform banks.

Each block is transformed, quantized with the QP's uniform quantizer and
charged ``SSE + lambda * bits``. Bits are transform signalling plus a
run-level rate model: coefficients are walked in scan order and every
non-zero level costs ``EG0(zero run) + EG0(|level| - 1) + 1`` sign bit, then
the block ends with ``EG0(number of trailing positions)``. An all-zero block
costs ``EG0(length)``. ``EG0`` is the order-0 exp-Golomb code length.

A six-slot bank signals 3 bits per block (primary index + secondary flag).
Mode decision picks the cheapest primary first and then decides whether its
secondary pays off; ``exhaustive=True`` compares all six slots at once. The
DCT/ADST baseline signals 1 bit.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from ._parallel import map_chunks
from .errors import DimensionMismatch, EmptyInput, InvalidParams, NoOverlap
from .rdot import QuantConfig, dequantize, quantize
from .transforms import TransformBank, TransformSpec, baseline_specs, forward, inverse

BANK_SIGNAL_BITS = 3
BASELINE_SIGNAL_BITS = 1
PEAK = 255.0
CSV_FIELDS = ("qp", "bits_per_block", "psnr", "sse")


def eg0_length(v) -> np.ndarray | int:
    """Length in bits of the order-0 exp-Golomb code of ``v >= 0``: ``2 floor(log2(v + 1)) + 1``."""
    a = np.asarray(v, dtype=np.int64)
    if np.any(a < 0):
        raise InvalidParams("exp-Golomb codes non-negative integers only")
    # frexp gives x = m * 2**e with m in [0.5, 1), so floor(log2 x) = e - 1 exactly
    _, e = np.frexp((a + 1).astype(np.float64))
    out = 2 * (e.astype(np.int64) - 1) + 1
    return int(out) if out.ndim == 0 else out


def _coeff_bits(levels: np.ndarray) -> np.ndarray:
    """Run-level bits for each row of ``levels`` (already in traversal order)."""
    lv = np.asarray(levels, dtype=np.int64)
    rows, length = lv.shape
    nz = lv != 0
    pos = np.where(nz, np.arange(length), -1)
    last_seen = np.maximum.accumulate(pos, axis=1)
    prev = np.empty_like(last_seen)
    prev[:, 0] = -1
    prev[:, 1:] = last_seen[:, :-1]
    run = np.arange(length) - prev - 1

    per = np.where(nz, eg0_length(np.where(nz, run, 0)) + eg0_length(np.maximum(np.abs(lv) - 1, 0)) + 1, 0)
    last = last_seen[:, -1]
    tail = np.where(last < 0, length, length - 1 - last)
    return per.sum(axis=1) + eg0_length(tail)


def entropy_bits(levels, scan=None) -> int:
    """Bits for one level vector; ``scan`` (a ScanOrder) sets the traversal, default as given."""
    lv = np.asarray(levels, dtype=np.int64).reshape(-1)
    if scan is not None:
        if len(scan) != lv.size:
            raise DimensionMismatch("scan length does not match the level vector")
        lv = lv[scan.perm]
    return int(_coeff_bits(lv[None])[0])


@dataclass(frozen=True)
class Baseline:
    """Two fixed primaries, DCT and ADST, on the anti-diagonal scan."""

    block_size: int

    @property
    def specs(self) -> tuple[TransformSpec, TransformSpec]:
        return baseline_specs(self.block_size)


@dataclass(frozen=True)
class BlockCode:
    chosen_slot: int
    levels: np.ndarray = field(repr=False)
    signal_bits: int
    coeff_bits: int
    distortion: float

    @property
    def bits(self) -> int:
        return self.signal_bits + self.coeff_bits

    def cost(self, lam: float) -> float:
        return self.distortion + lam * self.bits


@dataclass(frozen=True)
class RDPoint:
    qp: int
    bits_per_block: float
    psnr: float
    sse: float


@dataclass(frozen=True)
class BDRateResult:
    percent: float
    overlap_interval: tuple[float, float]


def _coder_specs(coder) -> tuple[tuple[TransformSpec, ...], int, int]:
    if isinstance(coder, TransformBank):
        return coder.specs, BANK_SIGNAL_BITS, coder.block_size
    if isinstance(coder, Baseline):
        return coder.specs, BASELINE_SIGNAL_BITS, coder.block_size
    raise InvalidParams("coder must be a TransformBank or a Baseline")


def _slot_trials(b: np.ndarray, spec: TransformSpec, q: QuantConfig):
    levels = quantize(forward(b, spec), q)
    recon = inverse(dequantize(levels, q), spec)
    err = (b - recon).reshape(b.shape[0], -1)
    # y is already in scan order, so the rate model walks it as stored
    return levels, np.einsum("ij,ij->i", err, err), _coeff_bits(levels)


def _choose(cost: np.ndarray, n_slots: int, exhaustive: bool) -> np.ndarray:
    if n_slots != 6 or exhaustive:
        return np.argmin(cost, axis=1)
    primary = np.argmin(cost[:, :3], axis=1)
    rows = np.arange(cost.shape[0])
    # the secondary has to be strictly cheaper; ties keep the primary alone
    with_sec = cost[rows, primary + 3] < cost[rows, primary]
    return np.where(with_sec, primary + 3, primary)


def _encode_chunk(b, specs, signal, q, exhaustive, keep_levels):
    trials = [_slot_trials(b, s, q) for s in specs]
    sse = np.stack([t[1] for t in trials], axis=1)
    bits = np.stack([t[2] for t in trials], axis=1) + signal
    choice = _choose(sse + q.lam * bits, len(specs), exhaustive)
    rows = np.arange(b.shape[0])
    levels = None
    if keep_levels:
        levels = np.stack([t[0] for t in trials], axis=1)[rows, choice]
    return choice, sse[rows, choice], bits[rows, choice] - signal, levels


def _check_blocks(blocks, n):
    b = np.asarray(blocks, dtype=np.float64)
    if b.ndim == 2:
        b = b[None]
    if b.ndim != 3 or b.shape[1:] != (n, n):
        raise DimensionMismatch(f"expected {n}x{n} blocks, got shape {np.shape(blocks)}")
    if b.shape[0] == 0:
        raise EmptyInput("no blocks to encode")
    return b


def encode_blocks(blocks, coder, q: QuantConfig, exhaustive: bool = False) -> list[BlockCode]:
    """RDO-encode a stack of blocks with a bank or the baseline."""
    specs, signal, n = _coder_specs(coder)
    b = _check_blocks(blocks, n)
    parts = map_chunks(lambda sl: _encode_chunk(b[sl], specs, signal, q, exhaustive, True), b.shape[0])
    out = []
    for choice, sse, cbits, levels in parts:
        for k in range(choice.size):
            out.append(BlockCode(int(choice[k]), levels[k], signal, int(cbits[k]), float(sse[k])))
    return out


def encode_block(x, coder, q: QuantConfig, exhaustive: bool = False) -> BlockCode:
    return encode_blocks(np.asarray(x)[None], coder, q, exhaustive)[0]


def evaluate(blocks, coder, qps, exhaustive: bool = False) -> list[RDPoint]:
    """Average bits and pooled PSNR of ``blocks`` at every QP in ``qps``."""
    specs, signal, n = _coder_specs(coder)
    b = _check_blocks(blocks, n)
    qps = [int(v) for v in qps]
    if not qps:
        raise InvalidParams("need at least one QP")
    points = []
    for qp in qps:
        q = QuantConfig(qp)
        parts = map_chunks(lambda sl: _encode_chunk(b[sl], specs, signal, q, exhaustive, False), b.shape[0])
        sse = math.fsum(float(v) for p in parts for v in p[1])
        bits = sum(int(v) for p in parts for v in p[2]) + signal * b.shape[0]
        avg_sse = sse / b.shape[0]
        psnr = math.inf if avg_sse == 0 else 10.0 * math.log10(PEAK ** 2 * n * n / avg_sse)
        points.append(RDPoint(qp, bits / b.shape[0], psnr, avg_sse))
    return points


def _fit(points) -> tuple[np.ndarray, float, float]:
    pts = list(points)
    if len(pts) < 4:
        raise InvalidParams(f"BD-rate needs at least 4 RD points per curve, got {len(pts)}")
    psnr = np.array([p.psnr for p in pts], dtype=np.float64)
    rate = np.array([p.bits_per_block for p in pts], dtype=np.float64)
    if not (np.all(np.isfinite(psnr)) and np.all(rate > 0)):
        raise InvalidParams("BD-rate needs finite PSNR and positive rates")
    return P.polyfit(psnr, np.log10(rate), 3), float(psnr.min()), float(psnr.max())


def bd_rate(reference, test) -> BDRateResult:
    """Average rate difference of ``test`` against ``reference`` at equal PSNR, in percent."""
    c_ref, lo_ref, hi_ref = _fit(reference)
    c_test, lo_test, hi_test = _fit(test)
    lo, hi = max(lo_ref, lo_test), min(hi_ref, hi_test)
    if not hi > lo:
        raise NoOverlap(f"PSNR ranges [{lo_ref:.3f}, {hi_ref:.3f}] and [{lo_test:.3f}, {hi_test:.3f}] do not overlap")
    i_ref, i_test = P.polyint(c_ref), P.polyint(c_test)
    area_ref = P.polyval(hi, i_ref) - P.polyval(lo, i_ref)
    area_test = P.polyval(hi, i_test) - P.polyval(lo, i_test)
    avg = (area_test - area_ref) / (hi - lo)
    return BDRateResult(float((10.0 ** avg - 1.0) * 100.0), (lo, hi))


# -- CSV ----------------------------------------------------------------------


def curve_to_csv(points, method: str | None = None) -> str:
    """``qp,bits_per_block,psnr,sse`` rows; a leading ``method`` column when given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = list(CSV_FIELDS)
    w.writerow(["method"] + head if method is not None else head)
    for p in points:
        row = [p.qp, repr(float(p.bits_per_block)), repr(float(p.psnr)), repr(float(p.sse))]
        w.writerow([method] + row if method is not None else row)
    return buf.getvalue()


def curves_from_csv(text: str) -> dict:
    """Inverse of :func:`curve_to_csv` (possibly concatenated per method)."""
    out: dict = {}
    for row in csv.DictReader(io.StringIO(text)):
        if row.get("qp") == "qp":
            continue
        p = RDPoint(int(row["qp"]), float(row["bits_per_block"]), float(row["psnr"]), float(row["sse"]))
        out.setdefault(row.get("method"), []).append(p)
    return out
