import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volblocks import rk as R
from volblocks import simulate as S
from volblocks.kernels import c_star, profile, tukey_hanning
from volblocks.series import DAY, TickSeries


def make_series(z, T=DAY, start=0.0, end=None):
    t = np.linspace(0.0, T, len(z))
    return TickSeries(t, np.asarray(z, float), start, end if end else T)


def brownian_series(rng, n=23_400, sigma=1.0, T=DAY, a0=0.0):
    dz = sigma * math.sqrt(T / n) * rng.standard_normal(n)
    z = np.concatenate(([0.0], np.cumsum(dz)))
    if a0:
        z = z + a0 * rng.standard_normal(n + 1)
    return make_series(z, T)


def test_partition_boundaries():
    p = R.BlockPartition(4, 1.0)
    assert np.allclose(p.boundaries, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert np.allclose(p.edges(2.0, 4.0), [2.0, 2.5, 3.0, 3.5, 4.0])
    with pytest.raises(ValueError):
        R.BlockPartition(0)


def test_autocov_zero_series():
    z = make_series(np.zeros(100))
    for h in range(-5, 6):
        assert R.realized_autocov(z, (10, 90), h) == 0.0


def test_autocov_h0_sum_of_squares():
    z = make_series(np.cumsum([0.0, 1.0, -1.0, 2.0]), T=1.0)
    assert R.realized_autocov(z, (0, 3), 0) == pytest.approx(6.0)


def test_autocov_iid_noise_lag1():
    # E[(e_j - e_{j-1})(e_{j-1} - e_{j-2})] = -a0^2 per return
    rng = np.random.default_rng(0)
    a0, n = 1.0, 100_000
    vals = []
    for _ in range(30):
        z = make_series(a0 * rng.standard_normal(n + 3))
        vals.append(R.realized_autocov(z, (2, n + 2), 1))
    se = np.std(vals) / math.sqrt(len(vals))
    assert np.mean(vals) == pytest.approx(-n * a0**2, abs=3 * se)


def test_rk_block_zero_data():
    z = make_series(np.zeros(500))
    assert R.rk_block(z, (50, 450), 20, tukey_hanning(2)) == 0.0


def test_rk_block_flat_top_weight():
    # h=1 always gets weight k(0)=1, so H=1 gives gamma0+gamma1+gamma-1
    rng = np.random.default_rng(1)
    z = make_series(np.cumsum(rng.standard_normal(200)) * 1e-3)
    w = (20, 180)
    expect = (R.realized_autocov(z, w, 0) + R.realized_autocov(z, w, 1)
              + R.realized_autocov(z, w, -1))
    assert R.rk_block(z, w, 1, tukey_hanning(2)) == pytest.approx(expect,
                                                                 rel=1e-12)


def test_rk_block_noiseless_brownian():
    rng = np.random.default_rng(2)
    prof = profile(tukey_hanning(2))
    n = 23_400
    H = max(1, round(c_star(1.0, prof) * math.sqrt(n) * 0.01))
    vals = [R.rk_block(brownian_series(rng, n), (0, n), H, tukey_hanning(2))
            for _ in range(60)]
    se = np.std(vals) / math.sqrt(len(vals))
    assert np.mean(vals) == pytest.approx(1.0 / 252.0, abs=3 * se)


def test_jitter_identity_and_constant():
    rng = np.random.default_rng(3)
    z = make_series(rng.standard_normal(100))
    assert R.jitter(z, DAY / 2, 1) is z
    c = make_series(np.full(100, 2.5))
    assert np.array_equal(R.jitter(c, DAY / 2, 9).logprices, c.logprices)
    with pytest.raises(ValueError):
        R.jitter(z, 0.0, 0)
    with pytest.raises(ValueError):
        R.jitter(z, 0.0, 101)


def test_jitter_variance_reduction():
    # jittered pure-noise boundary point has variance a0^2/m
    rng = np.random.default_rng(4)
    a0, m, reps = 1.0, 25, 10_000
    t = np.linspace(0.0, DAY, 201)
    vals = np.empty(reps)
    for r in range(reps):
        s = TickSeries(t, a0 * rng.standard_normal(201), 0.0, DAY)
        vals[r] = R.jitter(s, DAY / 2, m).logprices[100]
    target = a0**2 / m
    se = target * math.sqrt(2.0 / reps)
    assert np.var(vals) == pytest.approx(target, abs=4 * se)


def test_local_rk_zero_data():
    z = make_series(np.zeros(2001))
    est = R.local_rk(z, R.BlockPartition(4), tukey_hanning(2),
                     bandwidths=[5, 5, 5, 5])
    assert est.total == 0.0
    assert all(b.k == 0.0 for b in est.blocks)


def test_local_rk_b1_bit_equals_rk_block():
    rng = np.random.default_rng(5)
    s = brownian_series(rng, 4000, a0=1e-4)
    H = 17
    est = R.local_rk(s, R.BlockPartition(1), tukey_hanning(2),
                     bandwidths=[H], m=25)
    jit = R.jitter(R.jitter(s, 0.0, 25), DAY, 25)
    assert est.total == R.rk_block(jit, (0, 4000), H, tukey_hanning(2))
    assert est.blocks[0].H == H


def test_local_rk_auto_b1_matches_manual_same_h():
    rng = np.random.default_rng(6)
    s = brownian_series(rng, 23_400, a0=1e-4)
    auto = R.local_rk(s, R.BlockPartition(1), tukey_hanning(2))
    manual = R.local_rk(s, R.BlockPartition(1), tukey_hanning(2),
                        bandwidths=[auto.blocks[0].H])
    assert auto.total == manual.total


def test_aggregation_identity():
    rng = np.random.default_rng(7)
    s = brownian_series(rng, 8000, a0=1e-4)
    est = R.local_rk(s, R.BlockPartition(8), tukey_hanning(2))
    assert est.total == float(sum(b.k for b in est.blocks))
    assert len(est.blocks) == 8
    assert all(b.H >= 1 for b in est.blocks)


def test_location_invariance_and_scale():
    rng = np.random.default_rng(8)
    z0 = np.cumsum(rng.standard_normal(6000)) * 1e-4
    s0 = make_series(z0)
    s_shift = make_series(z0 + 5.0)
    s_scale = make_series(2.0 * z0)
    p = R.BlockPartition(4)
    fam = tukey_hanning(2)
    e0 = R.local_rk(s0, p, fam)
    assert R.local_rk(s_shift, p, fam).total == pytest.approx(e0.total,
                                                              rel=1e-9)
    assert R.local_rk(s_scale, p, fam).total == pytest.approx(4.0 * e0.total,
                                                              rel=1e-9)


def test_block_too_short():
    z = make_series(np.zeros(120))
    with pytest.raises(ValueError):
        R.local_rk(z, R.BlockPartition(4), tukey_hanning(2),
                   bandwidths=[1, 1, 1, 1])


def test_bandwidth_count_mismatch():
    z = make_series(np.zeros(500))
    with pytest.raises(ValueError):
        R.local_rk(z, R.BlockPartition(2), tukey_hanning(2), bandwidths=[3])


def test_edge_data_used_when_present():
    # with burn data beyond the session, no reflect padding is needed and
    # gamma_h genuinely uses out-of-session returns
    rng = np.random.default_rng(9)
    n = 1000
    t = np.linspace(-0.1 * DAY, 1.1 * DAY, n + 1)
    z = np.cumsum(rng.standard_normal(n + 1)) * 1e-3
    s = TickSeries(t, z, 0.0, DAY)
    i0, i1 = s.session_indices()
    g = R.realized_autocov(s, (i0, i1), 3)
    z2 = z.copy()
    z2[:i0 - 3] += 10.0  # far edge data beyond lag reach: no effect
    g2 = R.realized_autocov(TickSeries(t, z2, 0.0, DAY), (i0, i1), 3)
    assert g2 == g
    z3 = z.copy()
    z3[i0 - 1] += 1.0  # within lag reach: changes the estimate
    g3 = R.realized_autocov(TickSeries(t, z3, 0.0, DAY), (i0, i1), 3)
    assert g3 != g


@settings(max_examples=20, deadline=None)
@given(h=st.integers(-10, 10), seed=st.integers(0, 1000))
def test_autocov_symmetry_on_stationary_window(h, seed):
    # gamma_h and gamma_{-h} use mirrored index shifts; on a window with
    # ample edge data both are plain dot products and finite
    rng = np.random.default_rng(seed)
    z = make_series(np.cumsum(rng.standard_normal(300)) * 1e-3)
    g = R.realized_autocov(z, (50, 250), h)
    assert np.isfinite(g)
    if h == 0:
        assert g >= 0.0


@pytest.mark.slow
def test_local_rk_sandwiches_truth_model2():
    fam = tukey_hanning(2)
    ratios = []
    for seed in range(60):
        b = S.simulate(S.model2(n_obs=23_400, xi2=0.001), seed)
        est = R.local_rk(b.to_series(), R.BlockPartition(1), fam)
        ratios.append(est.total / b.truth.iv)
    assert np.mean(ratios) == pytest.approx(1.0, abs=0.03)
