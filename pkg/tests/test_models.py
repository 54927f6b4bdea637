import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cdsal.core import SFU_GEOMETRY, FrameFeatures, FrameType, GazePoint, Viewing, gaussian_blob, pixels_per_degree
from cdsal.errors import ConfigError, ParameterError
from cdsal.ingest import GazeTable
from cdsal.models import (REGISTRY, block_centers, build_model, csdct_blocks, fit_global_motion,
                          gmc_mvmag_blocks, io_map, model_csdct_style, model_gauss, model_gmc_mvmag,
                          model_io, model_mvmag, model_obdl_style, model_pmes_style, mvmag_blocks,
                          obdl_blocks, pmes_blocks)


def pframe(mv_qpel, t=1, bits=None, dct=None, bs=8):
    mv = np.asarray(mv_qpel, dtype=np.int64)
    gh, gw = mv.shape[:2]
    return FrameFeatures(t, FrameType.P, bs, gw, gh, dct or [[0]] * (gw * gh),
                         np.zeros((gh, gw), int) if bits is None else bits, mv)


def iframe(gw, gh, dct, t=0, bs=8):
    return FrameFeatures(t, FrameType.I, bs, gw, gh, dct, np.zeros((gh, gw), int))


def field_from(gm_params, gw, gh, bs=8):
    a, b, tx, ty = gm_params
    X, Y = block_centers(gw, gh, bs)
    return np.stack([(a - 1) * X - b * Y + tx, b * X + (a - 1) * Y + ty], axis=-1)


# ---------------------------------------------------------------- benchmarks

def test_gauss_center_and_sigma():
    m = model_gauss((352, 288), SFU_GEOMETRY, scale=0.5)
    # centre (176, 144) is a pixel corner: the four surrounding pixels tie for the peak
    peak = np.argwhere(m == m.max())
    assert sorted(map(tuple, peak)) == [(143, 175), (143, 176), (144, 175), (144, 176)]
    sigma = pixels_per_degree(SFU_GEOMETRY)
    assert sigma == pytest.approx(47.4, abs=0.05)
    full = model_gauss((704, 576), SFU_GEOMETRY)
    np.testing.assert_array_equal(full, gaussian_blob(704, 576, (352, 288), sigma))


def test_gauss_content_independent(small_bundle):
    out = build_model("gauss", small_bundle)
    np.testing.assert_array_equal(out[0], out[small_bundle.frame_count - 1])
    assert out.coverage == {FrameType.I, FrameType.P}


def _table(points, viewing=Viewing.counterpart, frame=0):
    return GazeTable([GazePoint(x, y, frame, f"o{i}", viewing) for i, (x, y) in enumerate(points)])


def test_io_single_point_equals_blob():
    out = model_io(_table([(30.2, 40.7)]), (100, 80), sigma_px=6.0, frame_types=[FrameType.P])
    np.testing.assert_array_equal(out[0], gaussian_blob(100, 80, (30.2, 40.7), 6.0))


def test_io_coincident_points_idempotent():
    one = io_map([(30.2, 40.7)], (100, 80), 6.0)
    two = io_map([(30.2, 40.7), (30.2, 40.7)], (100, 80), 6.0)
    np.testing.assert_array_equal(one, two)


def test_io_two_far_points():
    s = 4.0
    p, q = (20.5, 30.5), (20.5 + 10 * s, 30.5)
    m = io_map([p, q], (100, 60), s)
    for c in (p, q):
        blob = gaussian_blob(100, 60, c, s)
        near = blob > 0
        assert np.max(np.abs(m[near] - blob[near])) < 1e-9
    assert m[30, 20] == 1.0 and m[30, 60] == 1.0


def test_io_missing_counterpart():
    with pytest.raises(ConfigError):
        model_io(_table([(1, 1)], Viewing.primary), (10, 10), sigma_px=1.0)


def test_io_empty_frame_is_zero():
    t = GazeTable([GazePoint(5, 5, 1, "a", Viewing.counterpart)])
    out = model_io(t, (10, 10), sigma_px=1.0, frame_types=[FrameType.P, FrameType.P])
    assert not out[0].any() and out[1].any()


# ---------------------------------------------------------------- MV magnitude

def test_mvmag_examples():
    assert not mvmag_blocks(pframe(np.zeros((3, 4, 2)))).any()
    mv = np.zeros((3, 4, 2))
    mv[1, 2] = (4, 0)
    b = mvmag_blocks(pframe(mv))
    assert b[1, 2] == 1.0 and np.count_nonzero(b) == 1


def test_mvmag_elementwise(rng):
    mv = rng.integers(-40, 40, size=(5, 6, 2))
    np.testing.assert_array_equal(mvmag_blocks(pframe(mv)), np.sqrt(mv[..., 0] ** 2.0 + mv[..., 1] ** 2.0) / 4)


def test_mvmag_coverage(small_bundle):
    out = model_mvmag(small_bundle.frames, small_bundle.map_size)
    assert out.map(0) is None and out.map(1).shape == (288, 352)
    with pytest.raises(KeyError):
        out[0]


# ---------------------------------------------------------------- PMES-style

def test_pmes_uniform_field_zero():
    mv = np.broadcast_to(np.array([8, -4]), (6, 6, 2))
    frames = [pframe(mv, t) for t in range(3)]
    assert not pmes_blocks(frames, 2).any()


def test_pmes_spread_angles():
    # 3x3 grid, one frame: 8 border blocks point in 8 directions at 2 px, centre block 2 px too.
    m = 2.0
    ang = np.arange(9) * 2 * math.pi / 9
    mv = np.stack([np.round(4 * m * np.cos(ang)), np.round(4 * m * np.sin(ang))], axis=-1).reshape(3, 3, 2)
    out = pmes_blocks([pframe(mv)], 0, window_s=3, window_t=1)
    v = mv.reshape(-1, 2) / 4
    mag = np.hypot(v[:, 0], v[:, 1])
    R = np.hypot((v[:, 0] / mag).sum(), (v[:, 1] / mag).sum()) / 9
    assert out[1, 1] == pytest.approx(mag.mean() * (1 - R), abs=1e-12)
    assert out[1, 1] == pytest.approx(m, rel=0.05)


def _pmes_brute(frames, t, ws, wt, eps):
    ref = frames[t]
    gh, gw = ref.grid_h, ref.grid_w
    win = [f for f in frames[max(0, t - wt + 1):t + 1] if f.frame_type is FrameType.P]
    out = np.zeros((gh, gw))
    lo, hi = ws // 2, ws - 1 - ws // 2
    for i in range(gh):
        for j in range(gw):
            mags, us = [], []
            for f in win:
                v = f.mv_pixels()
                for a in range(max(0, i - lo), min(gh, i + hi + 1)):
                    for b in range(max(0, j - lo), min(gw, j + hi + 1)):
                        m = math.hypot(*v[a, b])
                        mags.append(m)
                        if m > eps:
                            us.append((v[a, b][0] / m, v[a, b][1] / m))
            if us:
                R = math.hypot(sum(u[0] for u in us), sum(u[1] for u in us)) / len(us)
                inc = 1 - R if 1 - R >= 1e-9 else 0.0
                out[i, j] = sum(mags) / len(mags) * inc
    return out


def test_pmes_matches_brute_force(rng):
    frames = [pframe(rng.integers(-12, 12, size=(5, 7, 2)), t) for t in range(4)]
    for t in (0, 3):
        np.testing.assert_allclose(pmes_blocks(frames, t, 3, 3, 0.5), _pmes_brute(frames, t, 3, 3, 0.5),
                                   rtol=0, atol=1e-12)


def test_pmes_patch_argmax(rng):
    mv = np.zeros((9, 11, 2))
    mv[3:6, 4:7] = rng.integers(-40, 40, size=(3, 3, 2))
    out = pmes_blocks([pframe(mv)], 0, 3, 1)
    i, j = np.unravel_index(np.argmax(out), out.shape)
    assert 3 <= i < 6 and 4 <= j < 7


def test_pmes_window_validation():
    with pytest.raises(ParameterError):
        model_pmes_style([pframe(np.zeros((2, 2, 2)))], window_s=0)
    with pytest.raises(ParameterError):
        pmes_blocks([pframe(np.zeros((2, 2, 2)))], 0, window_t=0)


@given(st.integers(-30, 30), st.integers(-30, 30))
def test_pmes_constant_field_zero(dx, dy):
    f = pframe(np.broadcast_to(np.array([dx, dy]), (4, 5, 2)))
    assert not pmes_blocks([f], 0).any()


# ---------------------------------------------------------------- csdct-style

def _csdct_brute(frame, decay, k):
    f = frame.dct_matrix(k).reshape(-1, k)
    X, Y = block_centers(frame.grid_w, frame.grid_h, frame.block_size)
    c = np.stack([X.ravel(), Y.ravel()], axis=1)
    n = len(f)
    out = np.zeros(n)
    for i in range(n):
        for j in range(n):
            if i != j:
                out[i] += np.linalg.norm(f[i] - f[j]) * math.exp(-np.linalg.norm(c[i] - c[j]) / decay)
    return out.reshape(frame.grid_h, frame.grid_w)


def test_csdct_identical_blocks_zero():
    f = iframe(4, 3, [[5, 1, 2]] * 12)
    assert not csdct_blocks(f).any()


def test_csdct_single_distinct_block():
    dct = [[5, 1, 2]] * 20
    dct[7] = [5, 30, -20]
    out = csdct_blocks(iframe(5, 4, dct))
    assert np.unravel_index(np.argmax(out), out.shape) == (1, 2)


def test_csdct_brute_force(rng):
    dct = rng.integers(-20, 20, size=(16, 12)).tolist()
    f = iframe(4, 4, dct)
    np.testing.assert_allclose(csdct_blocks(f, 64.0, 9, normalize=False), _csdct_brute(f, 64.0, 9),
                               rtol=0, atol=1e-9)


def test_csdct_dc_offset_invariance(rng):
    dct = rng.integers(-20, 20, size=(20, 9))
    shifted = dct.copy()
    shifted[:, 0] += 37
    a = csdct_blocks(iframe(5, 4, dct.tolist()), normalize=False)
    b = csdct_blocks(iframe(5, 4, shifted.tolist()), normalize=False)
    assert np.max(np.abs(a - b)) < 1e-9


def test_csdct_decay_validation():
    with pytest.raises(ParameterError):
        model_csdct_style([iframe(1, 1, [[1]])], decay=0)


# ---------------------------------------------------------------- obdl-style

def test_obdl_concentrated_bits():
    bits = np.ones((4, 5), int)
    bits[2, 3] = 500
    out = obdl_blocks([pframe(np.zeros((4, 5, 2)), bits=bits)], 0)
    assert np.unravel_index(np.argmax(out), out.shape) == (2, 3)


def test_obdl_uniform_bits_zero():
    out = obdl_blocks([pframe(np.zeros((4, 5, 2)), bits=np.full((4, 5), 9))], 0)
    assert not out.any()


def test_obdl_sliding_mean_ramp():
    frames = [iframe(3, 2, [[0]] * 6)]
    for t in range(1, 7):
        frames.append(pframe(np.zeros((2, 3, 2)), t=t, bits=np.arange(6).reshape(2, 3) * t))
    for t in range(1, 7):
        window = [u for u in range(max(1, t - 2), t + 1)]
        want = np.arange(6).reshape(2, 3) * (sum(window) / len(window)) * 4.0  # 256 / 8^2
        np.testing.assert_allclose(obdl_blocks(frames, t, 3, normalize=False), want, rtol=1e-15)


def test_obdl_all_zero_warns():
    frames = [pframe(np.zeros((2, 2, 2)), t=t) for t in range(2)]
    with pytest.warns(RuntimeWarning, match="zero bits"):
        out = model_obdl_style(frames)
    assert not out[1].any()


def test_obdl_block_area_normalisation():
    a = obdl_blocks([pframe(np.zeros((1, 2, 2)), bits=np.array([[10, 20]]), bs=16)], 0, normalize=False)
    b = obdl_blocks([pframe(np.zeros((1, 2, 2)), bits=np.array([[10, 20]]), bs=4)], 0, normalize=False)
    np.testing.assert_array_equal(a, [[10, 20]])
    np.testing.assert_array_equal(b, [[160, 320]])


# ---------------------------------------------------------------- global motion

def test_gm_translation():
    gm = fit_global_motion(field_from((1, 0, 3, -1), 11, 9))
    assert (abs(gm.a - 1), abs(gm.b), abs(gm.tx - 3), abs(gm.ty + 1)) < (1e-6,) * 4
    assert max(abs(gm.a - 1), abs(gm.b), abs(gm.tx - 3), abs(gm.ty + 1)) < 1e-6


def test_gm_zoom():
    gm = fit_global_motion(field_from((1.02, 0, 0, 0), 22, 18))
    assert abs(gm.a - 1.02) < 1e-6 and abs(gm.b) < 1e-6 and abs(gm.tx) < 1e-6


def test_gm_outliers(rng):
    d = field_from((1, 0, 3, -1), 22, 18)
    mask = rng.random(d.shape[:2]) < 0.2
    d[mask] = rng.uniform(-20, 20, size=(mask.sum(), 2))
    gm = fit_global_motion(d)
    assert math.hypot(gm.tx - 3, gm.ty + 1) < 0.1


def test_gm_fallback():
    gm = fit_global_motion(np.zeros((1, 3, 2)))
    assert gm.fallback and gm.is_identity


def test_gmc_pure_pan_zero():
    mv = np.broadcast_to(np.array([12, -4]), (6, 8, 2))
    assert not gmc_mvmag_blocks(pframe(mv)).any()


def test_gmc_pan_plus_object():
    mv = np.broadcast_to(np.array([12, -4]), (9, 11, 2)).copy()
    mv[4, 6] = (-20, 16)
    out = gmc_mvmag_blocks(pframe(mv))
    assert np.unravel_index(np.argmax(out), out.shape) == (4, 6)


def test_gmc_identity_matches_mvmag(rng):
    mv = np.zeros((6, 7, 2), int)
    f = pframe(mv)
    np.testing.assert_array_equal(gmc_mvmag_blocks(f), mvmag_blocks(f))
    frames = [iframe(7, 6, [[0]] * 42), f]
    a = model_gmc_mvmag(frames)
    b = model_mvmag(frames)
    np.testing.assert_array_equal(a[1], b[1])


# ---------------------------------------------------------------- whole-model invariants

@pytest.mark.parametrize("model_id", sorted(REGISTRY))
def test_maps_finite_nonnegative(small_bundle, model_id):
    out = build_model(model_id, small_bundle)
    assert out.model_id == model_id
    for t in out.scored_frames[:6]:
        m = out[t]
        assert m.shape == (288, 352) and np.isfinite(m).all() and (m >= 0).all()


def test_coverage_declared(small_bundle):
    cov = {m: build_model(m, small_bundle).coverage for m in REGISTRY}
    both = {m for m, c in cov.items() if FrameType.I in c}
    assert both == {"gauss", "io", "csdct"}


def test_build_model_errors(small_bundle):
    with pytest.raises(ConfigError):
        build_model("nope", small_bundle)
    with pytest.raises(ConfigError):
        build_model("mvmag", small_bundle, colour=True)
