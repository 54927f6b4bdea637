import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cdsal.centerbias import CenterBiasModel
from cdsal.core import gaussian_blob
from cdsal.errors import DegenerateInputError, DimensionError, SamplingError, StructuralError
from cdsal.metrics import (DEFAULT_METRICS, METRICS, Histogram, auc, auc_batch, build_ground_truth,
                           build_histograms, disk_max_filter, gather_gaze_values, histogram_batch, jd,
                           jsd, jsd_batch, kld, nss, pcc, sample_controls)
from cdsal.synth import oracle_auc

finite = st.floats(0, 1, allow_nan=False)
samples = st.lists(finite, min_size=1, max_size=40)


def _disk_scan(S, x, y, r):
    h, w = S.shape
    best = S[min(int(y), h - 1), min(int(x), w - 1)]
    for i in range(h):
        for j in range(w):
            if (j + 0.5 - x) ** 2 + (i + 0.5 - y) ** 2 <= r * r:
                best = max(best, S[i, j])
    return best


# ---------------------------------------------------------------- local maximum

def test_gather_radius_zero_is_lookup():
    S = np.arange(400.0).reshape(20, 20)
    assert gather_gaze_values(S, [(10.3, 10.9)], 0)[0] == S[10, 10]


def test_gather_delta_within_disk():
    S = np.zeros((30, 30))
    S[15, 15] = 0.8
    assert gather_gaze_values(S, [(15.5 + 3, 15.5)], 5)[0] == 0.8
    assert gather_gaze_values(S, [(15.5 + 6, 15.5)], 5)[0] == 0.0


def test_gather_matches_disk_scan(rng):
    S = rng.random((64, 64))
    pts = rng.uniform(0, 64, size=(100, 2))
    got = gather_gaze_values(S, pts, 7)
    want = [_disk_scan(S, x, y, 7) for x, y in pts]
    np.testing.assert_array_equal(got, want)


def test_gather_out_of_bounds():
    with pytest.raises(DimensionError):
        gather_gaze_values(np.zeros((5, 5)), [(5.0, 1.0)], 1)


@given(st.integers(0, 2 ** 31 - 1), st.floats(0, 6))
def test_disk_filter_matches_scan_at_pixel_centres(seed, r):
    rng = np.random.default_rng(seed)
    S = rng.random((9, 11))
    D = disk_max_filter(S, r)
    for i, j in rng.integers(0, [9, 11], size=(5, 2)):
        assert D[i, j] == _disk_scan(S, j + 0.5, i + 0.5, r)


# ---------------------------------------------------------------- AUC

def test_auc_examples():
    assert auc([0.9, 0.8], [0.1, 0.2]) == 1.0
    assert auc([0.3, 0.1, 0.3], [0.1, 0.3, 0.3]) == 0.5
    assert auc([0.9, 0.4], [0.5, 0.1]) == 0.75
    assert oracle_auc([1], [0]) == 1.0 and oracle_auc([0.2], [0.2]) == 0.5


def test_auc_empty():
    with pytest.raises(DegenerateInputError):
        auc([], [0.1])


@given(samples, samples)
def test_auc_matches_oracle(p, n):
    assert abs(auc(p, n) - oracle_auc(p, n)) <= 1e-12


@given(samples, samples)
def test_auc_swap(p, n):
    assert abs(auc(p, n) + auc(n, p) - 1.0) <= 1e-15


# Values on a 1e-3 grid: x**3 and exp(x) stay injective in floating point there.
grid = st.lists(st.integers(-5000, 5000), min_size=1, max_size=30)


@given(grid, grid)
def test_auc_monotone_invariance(p, n):
    p, n = np.array(p) / 1000.0, np.array(n) / 1000.0
    base = auc(p, n)
    assert auc(p ** 3, n ** 3) == base
    assert auc(np.exp(p), np.exp(n)) == base


def test_auc_batch_rows(rng):
    pos = rng.random(15).round(2)
    neg = rng.random((7, 15)).round(2)
    np.testing.assert_array_equal(auc_batch(pos, neg), [auc(pos, r) for r in neg])


# ---------------------------------------------------------------- divergences

def test_kld_examples():
    assert kld([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert kld([1.0, 0.0], [0.5, 0.5], 2) == 1.0
    assert kld([0.5, 0.5], [1.0, 0.0]) == math.inf


def test_jd_examples():
    assert jd([0.2, 0.8], [0.2, 0.8]) == 0.0
    assert jd([1.0, 0.0], [0.5, 0.5]) == math.inf


def test_jsd_examples():
    assert jsd([0.4, 0.6], [0.4, 0.6]) == 0.0
    assert jsd([1.0, 0.0], [0.0, 1.0]) == 1.0
    # 0.75 log2(0.75/0.5) + 0.25 log2(0.25/0.5), both halves equal
    assert jsd([0.75, 0.25], [0.25, 0.75]) == pytest.approx(0.18872187554086717, abs=1e-12)


def test_bin_mismatch():
    with pytest.raises(StructuralError):
        kld([0.5, 0.5], [1.0, 0.0, 0.0])
    with pytest.raises(StructuralError):
        jsd([0.5, 0.5], [1.0, 0.0, 0.0])


def _hist(draw_vals):
    m = np.asarray(draw_vals, dtype=float)
    return m / m.sum()


hist_pairs = st.integers(1, 20).flatmap(lambda r: st.tuples(
    st.lists(st.integers(0, 50), min_size=r, max_size=r).filter(lambda v: sum(v) > 0),
    st.lists(st.integers(0, 50), min_size=r, max_size=r).filter(lambda v: sum(v) > 0)))


@given(hist_pairs)
def test_divergence_properties(pair):
    P, Q = _hist(pair[0]), _hist(pair[1])
    assert jd(P, Q) == jd(Q, P)
    assert jsd(P, Q) == jsd(Q, P)
    assert 0.0 <= jsd(P, Q) <= 1.0
    assert jsd(P, P) == 0.0
    k = kld(P, Q)
    assert k >= 0 or math.isclose(k, 0, abs_tol=1e-15)


def test_histogram_rules():
    P, _ = build_histograms([1.0, 1.0], [0.0], r=2)
    np.testing.assert_array_equal(P.mass, [0.0, 1.0])
    P, _ = build_histograms([0.5], [0.0], r=2)
    np.testing.assert_array_equal(P.mass, [0.0, 1.0])
    with pytest.raises(StructuralError):
        build_histograms([1.2], [0.0])
    assert Histogram([0.25, 0.75]).edges.tolist() == [0.0, 0.5, 1.0]


def test_histogram_counting_oracle(rng):
    pos, neg = rng.random(1000), rng.random(1000)
    P, Q = build_histograms(pos, neg, 16)
    counts = [0] * 16
    for v in pos:
        counts[min(int(v * 16), 15)] += 1
    np.testing.assert_array_equal(P.mass, np.array(counts) / 1000)
    np.testing.assert_array_equal(histogram_batch(neg[None, :], 16)[0], Q.mass)


def test_jsd_batch_matches_scalar(rng):
    P = histogram_batch(rng.random((20, 15)) ** 3, 8)
    Q = histogram_batch(rng.random((20, 15)), 8)
    got = jsd_batch(P, Q)
    want = [jsd(p, q) for p, q in zip(P, Q)]
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-15)


# ---------------------------------------------------------------- NSS / PCC

def test_nss_positive_at_max(rng):
    S = rng.random((20, 20))
    i, j = np.unravel_index(np.argmax(S), S.shape)
    assert nss(S, [(j + 0.5, i + 0.5)]) > 0


def test_nss_all_pixels_zero(rng):
    S = rng.random((8, 6))
    pts = [(j + 0.5, i + 0.5) for i in range(8) for j in range(6)]
    assert abs(nss(S, pts)) < 1e-9


def test_nss_hand_fixture():
    S = np.array([[0, 1, 2, 3], [4, 5, 6, 7], [8, 9, 10, 11], [12, 13, 14, 15.0]])
    mu = 7.5
    sd = math.sqrt(sum((v - mu) ** 2 for v in range(16)) / 15)
    want = ((5 - mu) / sd + (15 - mu) / sd) / 2
    assert nss(S, [(1.2, 1.7), (3.9, 3.1)]) == pytest.approx(want, abs=1e-12)


def test_nss_constant_map():
    with pytest.raises(DegenerateInputError):
        nss(np.ones((4, 4)), [(1, 1)])


@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([0.5, 3.0, 100.0]), st.sampled_from([-1.0, 0.0, 7.0]))
def test_nss_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    S = rng.random((16, 20))
    pts = rng.uniform(0, [20, 16], size=(6, 2))
    assert abs(nss(a * S + b, pts, 2.0) - nss(S, pts, 2.0)) < 1e-9


def test_pcc_examples(rng):
    G = rng.random((10, 10))
    assert pcc(G, G) == pytest.approx(1.0, abs=1e-15)
    assert pcc(3 - G, G) == pytest.approx(-1.0, abs=1e-15)
    with pytest.raises(DegenerateInputError):
        pcc(np.ones((10, 10)), G)


def test_pcc_two_pass_oracle(rng):
    S, G = rng.random((32, 32)), rng.random((32, 32))
    s, g = S.ravel().tolist(), G.ravel().tolist()
    ms, mg = sum(s) / len(s), sum(g) / len(g)
    cov = sum((a - ms) * (b - mg) for a, b in zip(s, g))
    vs = sum((a - ms) ** 2 for a in s)
    vg = sum((b - mg) ** 2 for b in g)
    assert pcc(S, G) == pytest.approx(cov / math.sqrt(vs * vg), abs=1e-12)


@given(st.integers(0, 2 ** 31 - 1), st.floats(0.1, 10), st.floats(-5, 5), st.floats(0.1, 10), st.floats(-5, 5))
def test_pcc_affine(seed, a, b, c, d):
    rng = np.random.default_rng(seed)
    S, G = rng.random((8, 8)), rng.random((8, 8))
    assert abs(pcc(a * S + b, c * G + d) - pcc(S, G)) < 1e-12


# ---------------------------------------------------------------- ground truth

def test_ground_truth_single_and_double():
    one = build_ground_truth([(40.5, 30.5)], (80, 60), 5.0)
    np.testing.assert_allclose(one.values, gaussian_blob(80, 60, (40.5, 30.5), 5.0), atol=1e-15)
    two = build_ground_truth([(40.5, 30.5), (40.2, 30.9)], (80, 60), 5.0)
    np.testing.assert_array_equal(two.values, 2 * one.values)
    assert build_ground_truth(np.empty((0, 2)), (8, 6), 1.0).values.sum() == 0.0


def test_ground_truth_direct_summation(rng):
    pts = rng.uniform(0, [80, 60], size=(5, 2))
    gt = build_ground_truth(pts, (80, 60), 4.0)
    ref = sum(gaussian_blob(80, 60, (int(x) + 0.5, int(y) + 0.5), 4.0) for x, y in pts)
    assert np.max(np.abs(gt.values - ref)) < 1e-9


# ---------------------------------------------------------------- sampling

def test_controls_deterministic():
    a = sample_controls((50, 40), 30, "uniform", seed=5)
    b = sample_controls((50, 40), 30, "uniform", seed=5)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (30, 2)


def test_controls_exclusion():
    gaze = np.array([[i + 0.5, 0.5] for i in range(10)])
    c = sample_controls((10, 2), 10, "uniform", seed=1, exclusion=gaze, replicates=50)
    assert (c[..., 1] == 1).all()
    with pytest.raises(SamplingError):
        sample_controls((10, 2), 11, "uniform", seed=1, exclusion=gaze)


def test_uniform_frequency_concentration():
    # 1e6 draws as 100 replicates of 1e4 (n may not exceed the pixel count)
    c = sample_controls((100, 100), 10_000, "uniform", seed=11, replicates=100).reshape(-1, 2)
    counts = np.bincount(c[:, 1] * 100 + c[:, 0], minlength=10_000)
    mean, sd = 100.0, math.sqrt(1e6 * 1e-4 * (1 - 1e-4))
    assert np.abs(counts - mean).max() < 5 * sd


def test_centerbias_sampler_tight():
    m = CenterBiasModel((0.5, 0.5), ((0.0004, 0.0), (0.0, 0.0004)))
    c = sample_controls((200, 200), 5000, m, seed=2, replicates=None) + 0.5
    sigma = 0.02 * 200
    d = np.hypot(c[:, 0] - 100, c[:, 1] - 100)
    assert (d <= 3 * sigma + 1).mean() >= 0.99


def test_replicate_shape():
    c = sample_controls((30, 20), 7, "uniform", seed=0, replicates=4)
    assert c.shape == (4, 7, 2)


def test_registry():
    assert set(METRICS) == {"auc", "auc_p", "kld", "jd", "jsd", "jsd_p", "nss", "nss_p", "pcc"}
    assert "kld" not in DEFAULT_METRICS and "jd" not in DEFAULT_METRICS
    assert not METRICS["auc_p"]["center_biased"] and METRICS["auc"]["center_biased"]
