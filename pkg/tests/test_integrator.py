import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from doublegyre.flow import FlowParams, PhasePoint, heteroclinic_x2
from doublegyre.integrator import (
    IntegratorSettings,
    NoConvergence,
    RefinementPolicy,
    VertexBudgetExceeded,
    advect,
    advect_polyline,
    find_hyperbolic_fixed_point,
    flow_map,
    poincare_map,
    trajectory,
)
from doublegyre.polyline import PolylineCurve

P = FlowParams(A=1.0, eps=0.1, omega=40.0)
P0 = P.replace(eps=0.0)
T = P.period


def square(center, side, n_per_side=10):
    cx, cy = center
    h = side / 2
    corners = np.array([[cx - h, cy - h], [cx + h, cy - h], [cx + h, cy + h], [cx - h, cy + h]])
    pts = []
    for a, b in zip(corners, np.roll(corners, -1, axis=0)):
        u = np.linspace(0, 1, n_per_side, endpoint=False)[:, None]
        pts.append(a + u * (b - a))
    return np.vstack(pts)


def test_settings_validation():
    with pytest.raises(ValueError):
        IntegratorSettings(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorSettings(max_step=-1.0)
    with pytest.raises(ValueError):
        IntegratorSettings(scheme="euler")
    assert IntegratorSettings().step_limit(P) == pytest.approx(T / 20)


def test_gyre_centre_is_fixed():
    assert np.allclose(advect((0.5, 0.5), 0.0, 7.0, P0), (0.5, 0.5), atol=1e-13)
    assert np.allclose(poincare_map((0.5, 0.5), 0.0, 5, P0), (0.5, 0.5), atol=1e-13)


def test_heteroclinic_is_exact():
    x = advect((1.0, 0.5), 0.0, T, P0)
    assert x.x1 == pytest.approx(1.0, abs=1e-14)
    assert x.x2 == pytest.approx(float(heteroclinic_x2(T)), abs=1e-10)


def test_advect_against_tightened_tolerances():
    loose = IntegratorSettings()
    tight = loose.tightened(100.0)
    a = advect((0.3, 0.6), 0.0, 1.0, P, loose)
    b = advect((0.3, 0.6), 0.0, 1.0, P, tight)
    assert np.hypot(a.x1 - b.x1, a.x2 - b.x2) < 1e-8


def test_backward_then_forward_round_trip():
    x = poincare_map((1.2, 0.4), 0.0, 1, P)
    back = poincare_map(x, 0.0, -1, P)
    assert np.allclose(back, (1.2, 0.4), atol=1e-8)


def test_deterministic_and_vectorised():
    pts = np.array([[0.3, 0.6], [1.4, 0.2], [0.9, 0.9]])
    a = flow_map(pts, 0.0, 0.5, P)
    b = flow_map(pts, 0.0, 0.5, P)
    assert np.array_equal(a, b)
    for x, y in zip(pts, a):
        assert np.allclose(advect(x, 0.0, 0.5, P), y, atol=1e-9)


def test_trajectory_times_monotone():
    tr = trajectory((0.3, 0.6), 0.0, 1.0, P)
    assert np.all(np.diff(tr.times) > 0)
    assert tr.times[0] == 0.0 and tr.times[-1] == pytest.approx(1.0)
    assert np.allclose(tr.points[-1], advect((0.3, 0.6), 0.0, 1.0, P), atol=1e-12)
    back = trajectory((0.3, 0.6), 1.0, 0.0, P)
    assert np.all(np.diff(back.times) < 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 1.95), st.sampled_from([0.0, 1.0]), st.floats(0, 1))
def test_boundary_lines_are_invariant(x1, x2, t0):
    y = poincare_map((x1, x2), t0, 1, P)
    assert abs(y.x2 - x2) < 1e-10
    y = poincare_map((x2 * 2, x1 / 2), t0, 1, P)
    assert abs(y.x1 - x2 * 2) < 1e-10


def test_time_periodicity():
    a = advect((0.7, 0.3), 0.1, 0.6, P)
    b = advect((0.7, 0.3), 0.1 + T, 0.6 + T, P)
    assert np.allclose(a, b, atol=1e-9)


def test_rk4_fourth_order():
    x0 = (1.0, 0.5)
    t1 = 0.05
    exact = float(heteroclinic_x2(t1))
    errs = []
    hs = [t1 / 10, t1 / 20]
    for h in hs:
        s = IntegratorSettings(max_step=h, scheme="rk4")
        errs.append(abs(advect(x0, 0.0, t1, P0, s).x2 - exact))
    order = math.log(errs[0] / errs[1]) / math.log(2)
    assert order == pytest.approx(4.0, rel=0.2)


def test_fixed_point_unperturbed():
    fp = find_hyperbolic_fixed_point((1.0, 0.0), 0.0, P0, constraint="x2=0")
    assert fp == PhasePoint(1.0, 0.0)


def test_fixed_points_on_walls():
    th = P.theta
    eps = P.eps
    bottom = find_hyperbolic_fixed_point((1.0, 0.0), 0.0, P, constraint="x2=0")
    assert bottom.x2 == 0.0
    assert abs(bottom.x1 - (1 + eps * math.cos(th) * math.sin(th))) < 5 * eps**2
    top = find_hyperbolic_fixed_point((1.0, 1.0), 0.0, P, constraint="x2=1")
    assert top.x2 == 1.0
    assert abs(top.x1 - (1 + eps * math.cos(th) * math.sin(-th))) < 5 * eps**2
    y = poincare_map(bottom, 0.0, 1, P)
    assert abs(y.x1 - bottom.x1) < 1e-10


def test_free_fixed_point_and_errors():
    fp = find_hyperbolic_fixed_point((0.55, 0.45), 0.0, P0)
    assert np.allclose(fp, (0.5, 0.5), atol=1e-9)
    with pytest.raises(ValueError):
        find_hyperbolic_fixed_point((1.0, 0.0), 0.0, P, constraint="x1=0")
    with pytest.raises(NoConvergence):
        find_hyperbolic_fixed_point((1.0, 0.0), 0.0, P, constraint="x2=0", max_iter=1, tol=1e-30)


def test_polyline_on_wall_stays_on_wall():
    seg = PolylineCurve(np.column_stack([np.linspace(0.5, 1.5, 20), np.zeros(20)]))
    out = advect_polyline(seg, 0.0, 3 * T, P)
    assert np.all(out.x2 == 0.0) or np.max(np.abs(out.x2)) < 1e-10


def test_square_area_one_period():
    sq = PolylineCurve(square((0.6, 0.4), 0.1), 0.0, closed=True)
    out = advect_polyline(sq, 0.0, T, P)
    assert sq.area() == pytest.approx(0.01)
    assert abs(out.area() - sq.area()) / sq.area() < 1e-6


def test_area_preserved_over_five_periods():
    sq = PolylineCurve(square((1.0, 0.5), 0.1), 0.0, closed=True)
    cur = sq
    for n in range(5):
        cur = advect_polyline(cur, n * T, (n + 1) * T, P)
    assert abs(cur.area() - sq.area()) / sq.area() < 1e-5


def test_refinement_limits_gaps():
    seg = PolylineCurve(np.array([[0.98, 0.5], [1.02, 0.5]]))
    out = advect_polyline(seg, 0.0, 2 * T, P, refine=RefinementPolicy(max_gap=1e-3))
    assert np.max(np.diff(out.arclengths)) <= 1e-3 + 1e-12
    assert out.params is not None and np.all(np.diff(out.params) > 0)


def test_stretching_segment_grows_and_matches_dense_advection():
    seg = np.array([[0.98, 0.5], [1.02, 0.5]])
    curve = PolylineCurve(seg)
    lengths = [curve.length]
    for n in range(4):
        curve = advect_polyline(curve, n * T, (n + 1) * T, P)
        lengths.append(curve.length)
    assert np.all(np.diff(lengths) > 0)
    # dense oracle: advect 10x the final vertex count directly
    u = np.linspace(0, 1, 10 * len(curve))[:, None]
    dense = flow_map(seg[0] + u * (seg[1] - seg[0]), 0.0, 4 * T, P)
    dense_len = np.hypot(*np.diff(dense, axis=0).T).sum()
    assert curve.length == pytest.approx(dense_len, rel=1e-3)


def test_vertex_budget():
    seg = PolylineCurve(np.array([[0.9, 0.5], [1.1, 0.5]]))
    with pytest.raises(VertexBudgetExceeded):
        advect_polyline(seg, 0.0, 3 * T, P, refine=RefinementPolicy(max_vertices=50))
    with pytest.raises(ValueError):
        advect_polyline(PolylineCurve(np.array([[0.9, 0.5]])), 0.0, T, P)
