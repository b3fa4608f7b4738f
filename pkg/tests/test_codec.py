import math

import numpy as np
import pytest

from conftest import random_orthonormal
from jointrdot.codec import (
    Baseline,
    RDPoint,
    bd_rate,
    curve_to_csv,
    curves_from_csv,
    encode_block,
    encode_blocks,
    entropy_bits,
    eg0_length,
    evaluate,
)
from jointrdot.errors import InvalidParams, NoOverlap
from jointrdot.rdot import QuantConfig, dequantize
from jointrdot.transforms import (
    PrimaryKind,
    ScanOrder,
    TransformBank,
    TransformSpec,
    baseline_specs,
    forward,
    inverse,
)


def test_eg0_lengths():
    # code words 1, 010, 011, 00100, ... -> lengths 1, 3, 3, 5, 5, 5, 5, 7
    np.testing.assert_array_equal(eg0_length(np.arange(8)), [1, 3, 3, 5, 5, 5, 5, 7])
    for v in (0, 1, 63, 64, 255, 256, 10 ** 6):
        assert eg0_length(v) == 2 * (v + 1).bit_length() - 1
    with pytest.raises(InvalidParams):
        eg0_length(-1)


def test_entropy_bits_examples():
    assert entropy_bits(np.zeros(64, dtype=int)) == 13
    assert entropy_bits([1, 0, 0, 0]) == 8
    # runs 1 and 0, magnitudes 2 and 1, tail 1:
    # EG0(1)+EG0(1)+1 + EG0(0)+EG0(0)+1 + EG0(1) = 7 + 3 + 3
    assert entropy_bits([0, -2, 1, 0]) == 13


def test_entropy_bits_scan():
    lv = np.array([0, 0, 0, 5])
    assert entropy_bits(lv, ScanOrder([3, 0, 1, 2])) == entropy_bits([5, 0, 0, 0])


def test_entropy_bits_grows_with_extra_nonzero(rng):
    for _ in range(200):
        lv = rng.integers(-3, 4, 16) * (rng.random(16) < 0.3)
        zeros = np.flatnonzero(lv == 0)
        if zeros.size == 0:
            continue
        more = lv.copy()
        more[rng.choice(zeros)] = rng.choice([-1, 1])
        assert entropy_bits(more) > entropy_bits(lv)


def bank_from_baseline(n=8):
    dct, adst = baseline_specs(n)
    learned = TransformSpec(PrimaryKind.learned(dct.primary.col_transform, dct.primary.row_transform), dct.scan)
    k = n * n // 4
    specs = (dct, adst, learned) + tuple(s.with_secondary(np.eye(k)) for s in (dct, adst, learned))
    return TransformBank(specs, "V", n)


def random_bank(rng, n=4):
    dct, adst = baseline_specs(n)
    learned = TransformSpec(PrimaryKind.learned(random_orthonormal(rng, n), random_orthonormal(rng, n)),
                            ScanOrder(rng.permutation(n * n)))
    specs = (dct, adst, learned) + tuple(s.with_secondary(random_orthonormal(rng, 4)) for s in (dct, adst, learned))
    return TransformBank(specs, "D_45", n)


def test_zero_block():
    code = encode_block(np.zeros((8, 8)), bank_from_baseline(), QuantConfig(28))
    assert code.chosen_slot == 0 and not np.any(code.levels)
    assert code.signal_bits == 3 and code.distortion == 0.0


def test_dct_basis_function_block():
    spec = baseline_specs(8)[0]
    y = np.zeros(64)
    y[5] = 100.0
    x = inverse(y, spec)
    code = encode_block(x, bank_from_baseline(), QuantConfig(28))
    assert code.chosen_slot == 0
    assert np.count_nonzero(code.levels) == 1


def test_encode_matches_manual_cost(rng):
    bank = random_bank(rng)
    q = QuantConfig(29)
    x = rng.normal(0, 20, (4, 4))
    code = encode_block(x, bank, q)
    spec = bank[code.chosen_slot]
    recon = inverse(dequantize(code.levels, q), spec)
    assert code.distortion == pytest.approx(float(np.sum((x - recon) ** 2)))
    assert code.coeff_bits == entropy_bits(code.levels)
    np.testing.assert_array_equal(code.levels, np.sign(forward(x, spec)) * np.floor(np.abs(forward(x, spec)) / q.step + 0.5))


def manual_costs(x, bank, q):
    costs = []
    for k in range(6):
        y = forward(x, bank[k])
        lv = np.sign(y) * np.floor(np.abs(y) / q.step + 0.5)
        d = np.sum((x - inverse(dequantize(lv, q), bank[k])) ** 2)
        costs.append(d + q.lam * (entropy_bits(lv) + 3))
    return np.array(costs)


def test_exhaustive_mode_is_global_minimum(rng):
    bank = random_bank(rng)
    q = QuantConfig(27)
    blocks = rng.normal(0, 25, (200, 4, 4))
    for x, code in zip(blocks, encode_blocks(blocks, bank, q, exhaustive=True)):
        costs = manual_costs(x, bank, q)
        assert code.cost(q.lam) == pytest.approx(costs.min(), rel=1e-12)
        assert code.chosen_slot == int(np.argmin(costs))


def test_two_stage_decision(rng):
    bank = random_bank(rng)
    q = QuantConfig(27)
    blocks = rng.normal(0, 25, (200, 4, 4))
    two = encode_blocks(blocks, bank, q)
    full = encode_blocks(blocks, bank, q, exhaustive=True)
    for x, a, b in zip(blocks, two, full):
        costs = manual_costs(x, bank, q)
        primary = int(np.argmin(costs[:3]))
        expected = primary + 3 if costs[primary + 3] < costs[primary] else primary
        assert a.chosen_slot == expected
        assert a.cost(q.lam) >= b.cost(q.lam) - 1e-9


def test_baseline_signals_one_bit(rng):
    codes = encode_blocks(rng.normal(0, 10, (20, 8, 8)), Baseline(8), QuantConfig(28))
    assert {c.signal_bits for c in codes} == {1}
    assert {c.chosen_slot for c in codes} <= {0, 1}


def test_bank_equal_to_baseline_costs_two_extra_bits(rng):
    blocks = rng.normal(0, 12, (300, 8, 8)).round()
    qps = range(26, 32)
    base = evaluate(blocks, Baseline(8), qps)
    bank = evaluate(blocks, bank_from_baseline(), qps)
    assert len(bank) == 6
    for a, b in zip(base, bank):
        assert 0 <= b.bits_per_block - a.bits_per_block <= 2.0 + 1e-12
    sse = [p.sse for p in base]
    assert all(s2 >= s1 for s1, s2 in zip(sse, sse[1:]))
    bits = [p.bits_per_block for p in base]
    assert all(b2 <= b1 * 1.01 for b1, b2 in zip(bits, bits[1:]))


def test_psnr_definition(rng):
    blocks = rng.normal(0, 12, (50, 4, 4))
    p = evaluate(blocks, Baseline(4), [30])[0]
    assert p.psnr == pytest.approx(10 * math.log10(255 ** 2 * 16 / p.sse))


def curve(rates, psnrs):
    return [RDPoint(26 + k, r, s, 0.0) for k, (r, s) in enumerate(zip(rates, psnrs))]


def test_bd_rate_identical_and_halved():
    ref = curve([200, 160, 130, 100, 80, 65], [45, 44, 43, 42, 41, 40])
    assert bd_rate(ref, ref).percent == 0.0
    half = curve([r / 2 for r in [200, 160, 130, 100, 80, 65]], [45, 44, 43, 42, 41, 40])
    res = bd_rate(ref, half)
    assert res.percent == pytest.approx(-50.0, abs=1e-9)
    assert res.overlap_interval == (40.0, 45.0)


def test_bd_rate_log_domain_antisymmetry(rng):
    for _ in range(50):
        r1 = np.sort(rng.uniform(50, 300, 6))[::-1]
        r2 = np.sort(rng.uniform(50, 300, 6))[::-1]
        s1 = np.sort(rng.uniform(35, 45, 6))[::-1]
        s2 = np.sort(rng.uniform(35, 45, 6))[::-1]
        a, b = curve(r1, s1), curve(r2, s2)
        try:
            ab, ba = bd_rate(a, b).percent, bd_rate(b, a).percent
        except NoOverlap:
            continue
        # (1 + ab/100)(1 + ba/100) == 1 exactly in exact arithmetic
        assert math.log1p(ab / 100) == pytest.approx(-math.log1p(ba / 100), abs=1e-9)


def test_bd_rate_preconditions():
    ref = curve([200, 160, 130, 100], [45, 44, 43, 42])
    with pytest.raises(InvalidParams):
        bd_rate(ref[:3], ref)
    far = curve([200, 160, 130, 100], [35, 34, 33, 32])
    with pytest.raises(NoOverlap):
        bd_rate(ref, far)


def test_curve_csv_round_trip():
    pts = curve([200.5, 160.25, 130.0, 100.125], [45.1, 44.2, 43.3, 42.4])
    text = curve_to_csv(pts, "joint")
    assert text.splitlines()[0] == "method,qp,bits_per_block,psnr,sse"
    assert curves_from_csv(text) == {"joint": pts}
    assert curve_to_csv(pts).splitlines()[0] == "qp,bits_per_block,psnr,sse"
