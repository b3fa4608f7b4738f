"""Property tests for the invariants the library promises."""
import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from jointrdot.codec import RDPoint, bd_rate, entropy_bits, eg0_length
from jointrdot.errors import NoOverlap
from jointrdot.graphs import PathGraphParams, gbt, laplacian, learn_path_graph
from jointrdot.klt import secondary_klt
from jointrdot.linalg import fix_signs, is_orthonormal, sym_eig
from jointrdot.rdot import QuantConfig, dequantize, quantize
from jointrdot.transforms import PrimaryKind, ScanOrder, TransformSpec, forward, inverse

FAST = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def orthonormal(seed, n):
    q, r = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, n)))
    return q * np.sign(np.diag(r))


@FAST
@given(st.integers(2, 10), st.data())
def test_gbt_is_orthonormal_and_diagonalises(n, data):
    w = data.draw(arrays(np.float64, n - 1, elements=st.floats(1e-3, 1e3)))
    alpha = data.draw(st.floats(0, 10))
    g = PathGraphParams(n, w, alpha)
    u = gbt(g)
    assert is_orthonormal(u, 1e-9)
    d = u.T @ laplacian(g) @ u
    assert np.abs(d - np.diag(np.diag(d))).max() < 1e-8 * max(1.0, np.abs(d).max())


@FAST
@given(arrays(np.float64, (6, 6), elements=finite))
def test_sym_eig_reconstructs(a):
    s = (a + a.T) / 2
    e = sym_eig(s)
    scale = max(1.0, np.abs(s).max())
    assert np.abs(e.vectors @ np.diag(e.values) @ e.vectors.T - s).max() < 1e-9 * scale
    assert np.all(np.diff(e.values) >= -1e-12 * scale)


@FAST
@given(arrays(np.float64, (4, 5), elements=finite))
def test_fix_signs_rule(v):
    f = fix_signs(v)
    for col in f.T:
        big = col[np.abs(col) > 1e-12]
        assert big.size == 0 or big[0] > 0
    np.testing.assert_array_equal(np.abs(f), np.abs(v))


@FAST
@given(arrays(np.float64, (12, 5), elements=st.floats(-100, 100)), st.floats(1e-6, 1.0))
def test_learned_graph_weights_in_range(x, beta):
    g = learn_path_graph(x, beta)
    assert np.all(g.edge_weights >= 1e-8) and np.all(g.edge_weights <= 1e8)
    assert 0 <= g.self_loop <= 1e8


@FAST
@given(st.integers(0, 2 ** 31), st.sampled_from([2, 4, 8]), st.data())
def test_forward_is_orthonormal(seed, n, data):
    rng = np.random.default_rng(seed)
    k = data.draw(st.integers(0, n * n))
    p = PrimaryKind.learned(orthonormal(seed, n), orthonormal(seed + 1, n))
    spec = TransformSpec(p, ScanOrder(rng.permutation(n * n)), orthonormal(seed + 2, k) if k else None)
    x = rng.normal(0, 50, (3, n, n))
    y = forward(x, spec)
    np.testing.assert_allclose(np.linalg.norm(y, axis=1), np.linalg.norm(x.reshape(3, -1), axis=1), rtol=1e-12)
    np.testing.assert_allclose(inverse(y, spec), x, atol=1e-9)


@FAST
@given(arrays(np.float64, 50, elements=st.floats(-5000, 5000)), st.integers(0, 51))
def test_quantizer_bound(y, qp):
    q = QuantConfig(qp)
    assert np.all(np.abs(dequantize(quantize(y, q), q) - y) <= q.step / 2 * (1 + 1e-12))
    assert q.lam == 0.85 * 2 ** ((qp - 12) / 3)
    assert abs(q.lam - 0.85 * q.step ** 2) <= 1e-12 * q.lam


@FAST
@given(st.integers(0, 10 ** 9))
def test_eg0_matches_binary_length(v):
    assert eg0_length(v) == 2 * (v + 1).bit_length() - 1


@FAST
@given(arrays(np.int64, 16, elements=st.integers(-20, 20)), st.integers(0, 15), st.integers(1, 5))
def test_entropy_bits_monotone_in_support(levels, pos, mag):
    lv = levels.copy()
    lv[pos] = 0
    more = lv.copy()
    more[pos] = mag
    assert entropy_bits(more) > entropy_bits(lv)
    assert entropy_bits(lv) == entropy_bits(lv.copy())


@FAST
@given(arrays(np.float64, (30, 4), elements=st.floats(-50, 50)))
def test_secondary_klt_orthonormal(z):
    assert is_orthonormal(secondary_klt(z), 1e-9)


def rd_curve(draw_steps, draw_factors):
    psnr = 35.0 + np.cumsum(draw_steps)
    rate = 40.0 * np.cumprod(draw_factors)
    return [RDPoint(26 + i, float(r), float(p), 0.0) for i, (r, p) in enumerate(zip(rate, psnr))]


steps = st.lists(st.floats(0.4, 1.5), min_size=6, max_size=6)
factors = st.lists(st.floats(1.04, 1.3), min_size=6, max_size=6)


@FAST
@given(steps, factors, steps, factors)
def test_bd_rate_log_antisymmetry(s1, f1, s2, f2):
    a, b = rd_curve(s1, f1), rd_curve(s2, f2)
    try:
        ab = bd_rate(a, b)
        ba = bd_rate(b, a)
    except NoOverlap:
        return
    assert ab.overlap_interval == ba.overlap_interval
    assert math.isclose(math.log10(1 + ab.percent / 100), -math.log10(1 + ba.percent / 100), abs_tol=1e-9)
    assert bd_rate(a, a).percent == 0.0
