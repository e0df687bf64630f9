"""Acceptance criteria, one test and one PASS/FAIL line each.

Tolerances and runtimes are pinned as stated; a criterion that the
implementation cannot meet is left failing rather than relaxed.
"""
import math
import time

import numpy as np

from doublegyre.flow import FlowParams, divergence
from doublegyre.geometry import find_fold_points, fold_spacing_regression
from doublegyre.horseshoe import build_region_A, horseshoe_sweep
from doublegyre.integrator import RefinementPolicy, find_hyperbolic_fixed_point, poincare_map
from doublegyre.manifold_numeric import analytic_polyline, curve_distance, gap_crossings, grow_stable_manifold, grow_unstable_manifold
from doublegyre.melnikov import melnikov_amplitude, melnikov_full, tangential_term_Bs
from doublegyre.polyline import PolylineCurve
from doublegyre.integrator import advect_polyline

P = FlowParams(A=1.0, eps=0.1, omega=40.0)


def test_melnikov_closed_form(verdict):
    start = time.perf_counter()
    worst_sin = worst_cos = 0.0
    for A, omega in ((1.0, 40.0), (0.5, 10.0), (2.0, 5.0)):
        params = FlowParams(A=A, eps=0.1, omega=omega)
        R = melnikov_amplitude(params)
        for p in np.linspace(-2, 2, 9):
            for t in np.linspace(-2, 2, 9):
                q = melnikov_full(float(p), float(t), params, method="quadrature").value
                worst_sin = max(worst_sin, abs(q - R * math.sin(omega * (t - p))))
                worst_cos = max(worst_cos, abs(q - R * math.cos(omega * (t - p))))
    elapsed = time.perf_counter() - start
    ok = worst_sin < 1e-8 and elapsed < 10
    assert verdict("melnikov-closed-form", ok,
                   f"max|quad - R sin w(t-p)| = {worst_sin:.3g} (tol 1e-8); "
                   f"max|quad - R cos w(t-p)| = {worst_cos:.3g}; {elapsed:.1f} s (limit 10 s)")


def test_fold_locations(verdict):
    start = time.perf_counter()
    folds = find_fold_points((-1.0, 0.0), 0.0, P, 10)
    elapsed = time.perf_counter() - start
    e1 = abs(folds[0].p + 0.2417)
    e10 = abs(folds[9].p + 0.9485)
    ok = e1 < 1e-3 and e10 < 1e-3 and elapsed < 30
    assert verdict("fold-locations", ok,
                   f"p1 = {folds[0].p:.5f} (err {e1:.2g}), p10 = {folds[9].p:.5f} (err {e10:.2g}); {elapsed:.1f} s")


def test_fold_spacing_regression(verdict):
    start = time.perf_counter()
    fit = fold_spacing_regression(find_fold_points((-1.0, 0.0), 0.0, P, 10))
    elapsed = time.perf_counter() - start
    ok = abs(fit.slope - 0.7663) <= 0.05 and fit.r2 > 0.99 and elapsed < 60
    assert verdict("fold-spacing", ok, f"slope {fit.slope:.4f} (0.7663 +- 0.05), r2 {fit.r2:.5f}; {elapsed:.1f} s")


def test_second_order_manifold_accuracy(verdict):
    start = time.perf_counter()
    eps = np.array([0.05, 0.1, 0.2])
    d = []
    for e in eps:
        params = P.replace(eps=float(e))
        s = grow_stable_manifold(0.0, 1.3, params)
        d.append(curve_distance(analytic_polyline("stable", 0.0, params), s, window=(0.2, 0.8)))
    slope = np.polyfit(np.log(eps), np.log(d), 1)[0]
    elapsed = time.perf_counter() - start
    ok = abs(slope - 2.0) <= 0.2 and elapsed < 300
    dist = ", ".join(f"{x:.3g}" for x in d)
    assert verdict("second-order-accuracy", ok,
                   f"distances {dist} at eps 0.05/0.1/0.2, log-log slope {slope:.3f} (2 +- 0.2); {elapsed:.1f} s")


def test_hyperbolic_trajectory(verdict):
    th = P.theta
    bottom = find_hyperbolic_fixed_point((1.0, 0.0), 0.0, P, constraint="x2=0")
    top = find_hyperbolic_fixed_point((1.0, 1.0), 0.0, P, constraint="x2=1")
    eb = abs(bottom.x1 - (1 + P.eps * math.cos(th) * math.sin(th)))
    et = abs(top.x1 - (1 + P.eps * math.cos(-th) * math.sin(-th)))
    tol = 5 * P.eps**2
    ok = eb < tol and et < tol
    assert verdict("hyperbolic-trajectory", ok, f"bottom err {eb:.3g}, top err {et:.3g} (tol {tol:.3g})")


def _square(center, side, n_per_side=10):
    cx, cy = center
    h = side / 2
    corners = np.array([[cx - h, cy - h], [cx + h, cy - h], [cx + h, cy + h], [cx - h, cy + h]])
    u = np.linspace(0, 1, n_per_side, endpoint=False)[:, None]
    return np.vstack([a + u * (b - a) for a, b in zip(corners, np.roll(corners, -1, axis=0))])


def test_conservation(verdict):
    g = np.linspace(0, 1, 21)
    X1, X2 = np.meshgrid(2 * g, g)
    pts = np.column_stack([X1.ravel(), X2.ravel()])
    div = max(np.max(np.abs(divergence(pts, t, P))) for t in np.linspace(0, P.period, 5))
    wall = 0.0
    for x1 in np.linspace(0.1, 1.9, 7):
        for x2 in (0.0, 1.0):
            wall = max(wall, abs(poincare_map((x1, x2), 0.0, 1, P).x2 - x2))
    for x2 in np.linspace(0.1, 0.9, 5):
        for x1 in (0.0, 2.0):
            wall = max(wall, abs(poincare_map((x1, x2), 0.0, 1, P).x1 - x1))
    sq = PolylineCurve(_square((1.0, 0.5), 0.1), 0.0, closed=True)
    cur = sq
    for n in range(5):
        cur = advect_polyline(cur, n * P.period, (n + 1) * P.period, P)
    area = abs(cur.area() - sq.area()) / sq.area()
    ok = div < 1e-12 and wall < 1e-10 and area < 1e-5
    assert verdict("conservation", ok,
                   f"max|div| {div:.3g} (1e-12), wall drift {wall:.3g}/period (1e-10), area change {area:.3g} over 5 periods (1e-5)")


def test_transverse_intersections(verdict):
    u = grow_unstable_manifold(0.0, 1.3, P)
    s = grow_stable_manifold(0.0, 1.3, P)
    x2 = gap_crossings(u, s, window=(0.05, 0.5))
    p = np.log(1 / np.tan(0.5 * math.pi * x2)) / math.pi**2
    m = np.arange(-5, 20)
    off = np.array([np.min(np.abs(0.0 - m * math.pi / P.omega - q)) for q in p])
    ok = len(x2) >= 3 and bool(np.all(off < 0.05))
    assert verdict("transverse-intersections", ok,
                   f"{len(x2)} crossings at p = {np.round(p, 4).tolist()}, max offset from t - m pi/w {off.max():.3g} (0.05)")


def test_horseshoe(verdict):
    start = time.perf_counter()
    region = build_region_A(0.0, 0.05, P)
    base = RefinementPolicy()
    rep = horseshoe_sweep(region, 12, P, refine=base, stop_at=2)
    n = rep.first_n
    detail = f"first n with >= 2 strips: {n}"
    ok = n is not None
    if ok:
        fine = RefinementPolicy(max_gap=base.max_gap / 2, max_vertices=2 * base.max_vertices)
        audit = horseshoe_sweep(region, n, P, refine=fine)
        strips = rep.rows[n - 1].strips
        fine_strips = audit.rows[-1].strips if audit.budget_error is None else None
        ok = fine_strips is not None and fine_strips >= strips
        detail += f", strips {strips}, audit at doubled resolution {fine_strips}"
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 900
    assert verdict("horseshoe", ok, f"{detail}; {elapsed:.0f} s (limit 900 s)")


def test_tangential_term(verdict):
    worst = 0.0
    for p in np.linspace(-1, 1, 5):
        for t in np.linspace(0, P.period, 5):
            worst = max(worst, abs(tangential_term_Bs(float(p), float(t), P)))
    assert verdict("tangential-term", worst < 1e-10, f"max|B^s| on 5x5 grid {worst:.3g} (1e-10)")
