import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vinemap.geometry import Bounds, Environment, LaunchPoint
from vinemap.kinematics import Morphology
from vinemap.sensing import (
    IllConditionedPivotError,
    SensorSample,
    SensorStream,
    add_noise,
    detect_pivot_change,
    first_contact_point,
    fl_quadratic,
    lowpass_filter,
    new_pivot_location,
    pivot_offset,
    reconstruct,
    reconstruct_pat_pivot,
    reconstruct_pivot_contact,
    sliding_contact_point,
    synthesize_stream,
    track_fl_turn_point,
    turn_first_contact,
    wall_angle,
)
from vinemap.simulator import DeploymentAction, simulate

from scenes import box, run_round_trip

deg = math.radians


def env_of(obstacles, launch=(0.5, 0.0), radius=0.0):
    return Environment(tuple(obstacles), Bounds(), (LaunchPoint("a", launch),), radius)


def test_sample_and_stream_validation():
    with pytest.raises(ValueError):
        SensorSample(-0.1, False)
    with pytest.raises(ValueError):
        SensorSample(0.1, True)
    with pytest.raises(ValueError):
        SensorSample(0.1, True, math.pi)
    with pytest.raises(ValueError):
        SensorStream((SensorSample(0.2, False), SensorSample(0.1, False)), (0, 0), 0.0)
    s = SensorStream.from_arrays([0.1, 0.2], [math.nan, 1.0], (0, 0), 0.5)
    assert list(s.contacts) == [False, True]
    assert np.isnan(s.angles[0]) and s.angles[1] == 1.0


def test_closed_form_examples():
    assert tuple(first_contact_point((0, 0), deg(90), 0.5)) == pytest.approx((0, 0.5))
    # hand values: 0.3 up, then 0.3 at 60 degrees
    p = turn_first_contact((0, 0), deg(90), 0.3, 0.3, deg(-30))
    assert tuple(p) == pytest.approx((0.15, 0.3 + 0.3 * math.sqrt(3) / 2))
    assert math.degrees(wall_angle(deg(100), deg(50), deg(100))) == pytest.approx(70.0)
    assert tuple(reconstruct_pat_pivot((1, 1), deg(180), 0.25)) == pytest.approx((0.75, 1))
    # sliding: contact angle drops 10 degrees, heading rises 10 degrees
    q = sliding_contact_point((0, 0), deg(45), deg(60), deg(50), 1.0)
    assert tuple(q) == pytest.approx((math.cos(deg(55)), math.sin(deg(55))))
    assert tuple(new_pivot_location((0, 0), 0.0, 1.0, 0.25)) == pytest.approx((0.75, 0))
    with pytest.raises(ValueError):
        first_contact_point((0, 0), 0.0, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-1.3, 1.3), st.floats(0.05, 0.6), st.floats(0.05, 0.6), st.floats(0.1, 3.0))
def test_turned_contact_forms_agree(theta_w, theta_t, l_b, l_a, theta_c):
    # rotating rigidly about B with contact angle theta_c is the plain turned pose at heading theta_w - theta_c
    a = reconstruct_pivot_contact((0.2, 0.1), l_b, l_a, theta_w, theta_t, theta_c)
    b = turn_first_contact((0.2, 0.1), theta_w - theta_c - theta_t, l_b, l_a, theta_t)
    assert tuple(a) == pytest.approx(tuple(b), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.02, 0.3), st.floats(deg(20), deg(85)), st.floats(deg(20), deg(85)))
def test_pivot_offset_matches_geometry(h, co, ci):
    if abs(math.sin(co) - math.sin(ci)) < 1e-3:
        return
    # a pivot h above a flat wall; the tip is on the wall at both samples
    delta, delta_i = h / math.sin(co), h / math.sin(ci)
    got = pivot_offset(1.0 + delta_i - delta, 1.0, ci, co)
    assert got == pytest.approx(delta, rel=1e-9)


def test_pivot_offset_ill_conditioned():
    with pytest.raises(IllConditionedPivotError):
        pivot_offset(1.1, 1.0, deg(40), deg(40))


def test_fl_quadratic_root_is_the_turn_point():
    rng = np.random.default_rng(4)
    checked = 0
    for _ in range(200):
        B = rng.uniform(0, 1, 2)
        C = rng.uniform(0, 1, 2)
        l_b = rng.uniform(0.1, 0.6)
        tw, tc = rng.uniform(0, math.pi), rng.uniform(0.1, 3.0)
        T = track_fl_turn_point(B, l_b, C, tw, tc)
        if T is None:
            continue
        a, b, c = fl_quadratic(B, l_b, C, tw, tc)
        assert a * T[0] ** 2 + b * T[0] + c == pytest.approx(0.0, abs=1e-9)
        assert math.dist(T, B) == pytest.approx(l_b, abs=1e-12)
        # on the line through C along the new heading, behind the tip
        h = tw - tc
        d = np.subtract(C, T)
        assert d[0] * math.sin(h) - d[1] * math.cos(h) == pytest.approx(0.0, abs=1e-12)
        assert d @ (math.cos(h), math.sin(h)) > 0
        checked += 1
    assert checked > 30


def stream_of(angles, spacing=0.002):
    L = spacing * np.arange(len(angles))
    return SensorStream.from_arrays(L, angles, (0, 0), 1.0)


def test_filter_passes_constant_and_linear_runs():
    th = np.concatenate([np.full(7, np.nan), np.full(20, 1.0), [np.nan], np.linspace(0.5, 1.5, 30), [np.nan]])
    out = lowpass_filter(stream_of(th), 5).angles
    np.testing.assert_allclose(out, th, atol=1e-12, equal_nan=True)


def test_filter_respects_breaks():
    th = np.concatenate([np.full(10, 1.0), np.full(10, 2.0)])
    joined = lowpass_filter(stream_of(th), 5).angles
    split = lowpass_filter(stream_of(th), 5, breaks=[10]).angles
    assert not np.allclose(joined, th)
    np.testing.assert_allclose(split, th, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.3, 2.5), min_size=1, max_size=40), st.floats(-0.2, 0.2), st.sampled_from([1, 3, 5, 9]))
def test_filter_commutes_with_offset(vals, c, w):
    th = np.array(vals)
    a = lowpass_filter(stream_of(th + c), w).angles
    b = lowpass_filter(stream_of(th), w).angles + c
    np.testing.assert_allclose(a, b, atol=1e-12)
    assert np.all(a >= th.min() + c - 1e-12) and np.all(a <= th.max() + c + 1e-12)


def test_detect_pivot_change_synthetic():
    L = 0.002 * np.arange(80)
    kink = np.where(L < L[40], 1.0 - 3.0 * L, 1.0 - 3.0 * L[40] - 20.0 * (L - L[40]))
    assert abs(detect_pivot_change(L, kink) - 40) <= 2
    assert detect_pivot_change(L, 1.0 - 3.0 * L) is None
    noisy = 1.0 - 3.0 * L + np.random.default_rng(0).normal(0, deg(0.5), len(L))
    assert detect_pivot_change(L, noisy) is None


def contact_arrays(stream):
    m = stream.contacts
    return stream.lengths[m], stream.angles[m]


def test_detect_pivot_change_on_simulated_streams():
    single = env_of([box(0.1, 0.3, 0.9, 0.32)])
    r = simulate(single, DeploymentAction("a", 45))
    assert detect_pivot_change(*contact_arrays(synthesize_stream(single, r))) is None
    # the wrap corner sits close to the wall so the slope change is sharp
    env = env_of([box(0.1, 0.6, 0.9, 0.62), box(0.7, 0.52, 0.75, 0.55)], launch=(0.3, 0.0))
    r = simulate(env, DeploymentAction("a", 60))
    wrap = next(e for e in r.events if e.kind == "wrap")
    L, th = contact_arrays(synthesize_stream(env, r))
    i = detect_pivot_change(L, th)
    assert i is not None and abs(L[i] - wrap.length) <= 2 * 0.002 + 1e-9


def test_no_contact_stream_is_straight():
    s = SensorStream.from_arrays(np.linspace(0, 0.8, 50), np.full(50, np.nan), (0.5, 0.0), deg(60))
    rec = reconstruct(s)
    assert rec.wall_points == () and rec.pivots == ()
    assert tuple(rec.shape.tip) == pytest.approx((0.5 + 0.8 * math.cos(deg(60)), 0.8 * math.sin(deg(60))))
    assert sum(p.area for p in rec.swept) == pytest.approx(0.0)
    empty = reconstruct(SensorStream((), (0.1, 0.0), 0.0))
    assert tuple(empty.shape.tip) == (0.1, 0.0)


def test_no_contact_turned_stream():
    s = SensorStream.from_arrays(np.linspace(0, 1.0, 101), np.full(101, np.nan), (0.5, 0.0), deg(90), (0.4, deg(30)))
    tip = reconstruct(s).shape.tip
    want = (0.5 + 0.6 * math.cos(deg(120)), 0.4 + 0.6 * math.sin(deg(120)))
    assert tuple(tip) == pytest.approx(want, abs=1e-12)


def test_single_wall_round_trip():
    env = env_of([box(0.1, 0.3, 0.9, 0.32)])
    r = simulate(env, DeploymentAction("a", 45))
    rec = reconstruct(synthesize_stream(env, r))
    assert rec.wall_points
    for p, a in rec.wall_points:
        # distance from the base to the wall line is observable exactly; its direction only to one sample
        n = (-math.sin(a), math.cos(a))
        assert abs((p[0] - 0.5) * n[0] + p[1] * n[1]) == pytest.approx(0.3, abs=1e-9)
        assert p[1] == pytest.approx(0.3, abs=2e-3)
    assert tuple(rec.shape.tip) == pytest.approx(tuple(r.shape.tip), abs=2e-3)


def test_noiseless_round_trip():
    walls, pivots, kinds = run_round_trip(range(50))
    assert {m.short for m in Morphology} <= kinds
    assert math.sqrt(np.mean(walls**2)) < 0.01
    assert math.sqrt(np.mean(pivots**2)) < 0.01


def test_noisy_round_trip_median():
    walls, _, _ = run_round_trip(range(50), deg(1.0))
    assert np.median(walls) < 0.034


def test_noise_is_seeded():
    env = env_of([box(0.1, 0.3, 0.9, 0.32)])
    s = synthesize_stream(env, simulate(env, DeploymentAction("a", 45)))
    a = add_noise(s, np.random.default_rng(1), deg(1), 0.002)
    b = add_noise(s, np.random.default_rng(1), deg(1), 0.002)
    assert a == b
    assert np.all(np.diff(a.lengths) >= 0)
    c = a.contacts
    assert np.all((a.angles[c] > 0) & (a.angles[c] < math.pi))
