"""Stable and unstable manifolds of the strobed map grown by iterated advection.

The unstable manifold of the saddle on ``x2 = 1`` is seeded as a short
segment along the expanding eigenvector of the finite-difference Jacobian
of ``P_t`` and pushed forward one period at a time with polyline
refinement.  The stable manifold of the saddle on ``x2 = 0`` is grown the
same way under ``P_t^{-1}``.  Nothing here uses the first-order expansion,
so these curves serve as an independent check on it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .flow import FlowParams, PhasePoint, heteroclinic_p, heteroclinic_x2
from .integrator import (
    IntegratorSettings,
    RefinementPolicy,
    advect_polyline,
    find_hyperbolic_fixed_point,
    poincare_jacobian,
)
from .manifold_analytic import hyperbolic_trajectory, stable_x1, unstable_x1
from .polyline import PolylineCurve, horizontal_crossings

__all__ = [
    "NotGraphLike",
    "SeedInfo",
    "GAP_WINDOW",
    "saddle_seed",
    "grow_unstable_manifold",
    "grow_stable_manifold",
    "truncate_arclength",
    "analytic_polyline",
    "graph_segment",
    "curve_distance",
    "gap_crossings",
    "ReentrenchmentReport",
    "reentrenchment_check",
]

SEED_LENGTH = 1e-6
SEED_VERTICES = 16
GAP_WINDOW = (0.05, 0.5)


class NotGraphLike(ValueError):
    """The curve is not single-valued in ``x2`` over the requested window."""


@dataclass(frozen=True)
class SeedInfo:
    fixed_point: PhasePoint
    direction: tuple[float, float]
    multiplier: float


def saddle_seed(which: str, t: float, params: FlowParams, settings: IntegratorSettings | None = None,
                fd_step: float = 1e-6) -> SeedInfo:
    """Fixed point on the boundary and the eigen-direction pointing into the domain.

    ``which="unstable"`` uses the saddle on ``x2 = 1`` and the expanding
    direction of ``P_t``; ``"stable"`` the saddle on ``x2 = 0`` and the
    contracting direction (expanding for ``P_t^{-1}``).
    """
    if which == "unstable":
        guess = hyperbolic_trajectory("unstable-anchor", t, params)
        fp = find_hyperbolic_fixed_point(guess, t, params, settings, constraint="x2=1")
        inward = -1.0
    elif which == "stable":
        guess = hyperbolic_trajectory("stable-anchor", t, params)
        fp = find_hyperbolic_fixed_point(guess, t, params, settings, constraint="x2=0")
        inward = 1.0
    else:
        raise ValueError(f"unknown manifold {which!r}")
    J = poincare_jacobian(np.array(fp), t, params, settings, h=fd_step)
    vals, vecs = np.linalg.eig(J)
    vals = np.real(vals)
    vecs = np.real(vecs)
    k = int(np.argmax(np.abs(vals))) if which == "unstable" else int(np.argmin(np.abs(vals)))
    v = vecs[:, k] / np.hypot(*vecs[:, k])
    if v[1] * inward < 0:
        v = -v
    mult = float(vals[k]) if which == "unstable" else float(1.0 / vals[k])
    return SeedInfo(fp, (float(v[0]), float(v[1])), mult)


def truncate_arclength(curve: PolylineCurve, target: float) -> PolylineCurve:
    """Leading part of an open curve with arclength ``target`` (last vertex interpolated)."""
    s = curve.arclengths
    if target >= s[-1]:
        return curve
    k = int(np.searchsorted(s, target, side="right"))
    frac = (target - s[k - 1]) / (s[k] - s[k - 1])
    end = curve.vertices[k - 1] + frac * (curve.vertices[k] - curve.vertices[k - 1])
    verts = np.vstack([curve.vertices[:k], end])
    prm = None
    if curve.params is not None:
        prm = np.append(curve.params[:k], curve.params[k - 1] + frac * (curve.params[k] - curve.params[k - 1]))
    return PolylineCurve(verts, curve.t, False, prm)


def _grow(which, t, target_arclength, params, settings, refine, seed_length, max_iterations):
    settings = settings or IntegratorSettings()
    refine = refine or RefinementPolicy()
    if params.eps == 0.0:
        # the heteroclinic segment is exact; no map iteration needed
        n = max(2, int(math.ceil(min(target_arclength, 1.0) / refine.max_gap)) + 1)
        x2 = np.linspace(0.0, min(target_arclength, 1.0), n)
        if which == "unstable":
            x2 = 1.0 - x2
        return PolylineCurve(np.column_stack([np.ones(n), x2]), t, False, np.linspace(0.0, 1.0, n))
    seed = saddle_seed(which, t, params, settings)
    u = np.linspace(0.0, 1.0, SEED_VERTICES)
    verts = np.array(seed.fixed_point)[None, :] + seed_length * u[:, None] * np.array(seed.direction)[None, :]
    curve = PolylineCurve(verts, t, False, u)
    T = params.period
    sign = 1.0 if which == "unstable" else -1.0
    for _ in range(max_iterations):
        if curve.length >= target_arclength:
            break
        curve = advect_polyline(curve, t, t + sign * T, params, settings, refine)
        # the image beyond the target is never needed again
        curve = truncate_arclength(PolylineCurve(curve.vertices, t, False, curve.params), target_arclength)
    else:
        if curve.length < target_arclength:
            raise RuntimeError(f"manifold reached arclength {curve.length:.4g} < {target_arclength}")
    return truncate_arclength(curve, target_arclength)


def grow_unstable_manifold(
    t: float,
    target_arclength: float,
    params: FlowParams,
    settings: IntegratorSettings | None = None,
    refine: RefinementPolicy | None = None,
    seed_length: float = SEED_LENGTH,
    max_iterations: int = 200,
) -> PolylineCurve:
    """Unstable manifold of the saddle on ``x2 = 1`` as a polyline from the anchor."""
    return _grow("unstable", t, target_arclength, params, settings, refine, seed_length, max_iterations)


def grow_stable_manifold(
    t: float,
    target_arclength: float,
    params: FlowParams,
    settings: IntegratorSettings | None = None,
    refine: RefinementPolicy | None = None,
    seed_length: float = SEED_LENGTH,
    max_iterations: int = 200,
) -> PolylineCurve:
    """Stable manifold of the saddle on ``x2 = 0``, grown under the inverse map."""
    return _grow("stable", t, target_arclength, params, settings, refine, seed_length, max_iterations)


def analytic_polyline(which: str, t: float, params: FlowParams, x2_range=(0.01, 0.99), n: int = 2001) -> PolylineCurve:
    """First-order manifold sampled uniformly in ``x2``, ordered from the anchor."""
    lo, hi = x2_range
    x2 = np.linspace(lo, hi, n)
    if which == "unstable":
        x2 = x2[::-1]
    p = heteroclinic_p(x2, params.A)
    x1 = stable_x1(p, t, params) if which == "stable" else unstable_x1(p, t, params)
    # recompute x2 from p so both coordinates come from the same parametrisation
    return PolylineCurve(np.column_stack([x1, heteroclinic_x2(p, params.A)]), t, False, p)


def graph_segment(curve: PolylineCurve, window) -> tuple[np.ndarray, np.ndarray]:
    """``(x2, x1)`` of the curve's first passage through ``window``, sorted in ``x2``.

    The passage runs from the first vertex inside the window up to the
    first exit through the far side.  Raises :class:`NotGraphLike` when
    ``x2`` is not strictly monotone along it, or the window is not spanned.
    """
    lo, hi = window
    v = curve.vertices
    inside = (v[:, 1] >= lo) & (v[:, 1] <= hi)
    if not inside.any():
        raise NotGraphLike("curve does not reach the window")
    i0 = int(np.argmax(inside))
    start = max(i0 - 1, 0)
    outside_after = np.flatnonzero(~inside[i0:])
    end = len(v) if outside_after.size == 0 else i0 + int(outside_after[0]) + 1
    seg = v[start:end]
    d = np.diff(seg[:, 1])
    if not (np.all(d > 0) or np.all(d < 0)):
        raise NotGraphLike("x2 is not monotone along the curve inside the window")
    if seg[:, 1].min() > lo or seg[:, 1].max() < hi:
        raise NotGraphLike("curve does not span the window")
    order = np.argsort(seg[:, 1])
    return seg[order, 1], seg[order, 0]


def curve_distance(a: PolylineCurve, b: PolylineCurve, window=(0.2, 0.8)) -> float:
    """Largest ``|x1_a(x2) - x1_b(x2)|`` over the window, linear interpolation in ``x2``."""
    ya, xa = graph_segment(a, window)
    yb, xb = graph_segment(b, window)
    lo, hi = window
    grid = np.union1d(ya[(ya >= lo) & (ya <= hi)], yb[(yb >= lo) & (yb <= hi)])
    grid = np.union1d(grid, [lo, hi])
    return float(np.max(np.abs(np.interp(grid, ya, xa) - np.interp(grid, yb, xb))))


def gap_crossings(unstable: PolylineCurve, stable: PolylineCurve, window=GAP_WINDOW) -> np.ndarray:
    """``x2`` values where the gap ``x1^u - x1^s`` changes sign within the window."""
    yu, xu = graph_segment(unstable, window)
    ys, xs = graph_segment(stable, window)
    lo, hi = window
    grid = np.union1d(yu[(yu > lo) & (yu < hi)], ys[(ys > lo) & (ys < hi)])
    gap = np.interp(grid, yu, xu) - np.interp(grid, ys, xs)
    k = np.flatnonzero(np.sign(gap[:-1]) * np.sign(gap[1:]) < 0)
    # linear root inside each bracketing interval
    return grid[k] - gap[k] * (grid[k + 1] - grid[k]) / (gap[k + 1] - gap[k])


@dataclass
class ReentrenchmentReport:
    periods: int
    level: float | None
    crossings: int
    vertices: int
    found: bool

    def to_dict(self) -> dict:
        return dict(periods=self.periods, level=self.level, crossings=self.crossings,
                    vertices=self.vertices, found=self.found)


def _strip_crossings(curve: PolylineCurve, primary_x1, levels, delta: float):
    """Per level, the number of curve crossings in ``(x1_primary, x1_primary + delta)``."""
    counts = []
    for c in levels:
        xs = horizontal_crossings(curve.vertices, c)
        base = primary_x1(c)
        counts.append(int(np.sum((xs > base + 1e-9) & (xs < base + delta))))
    return np.array(counts)


def reentrenchment_check(
    t: float,
    delta: float,
    params: FlowParams,
    settings: IntegratorSettings | None = None,
    refine: RefinementPolicy | None = None,
    depth: float = 0.3,
    max_periods: int = 12,
    levels: int = 61,
    source_window=(0.0, 0.1),
) -> ReentrenchmentReport:
    """Look for a fold of the unstable manifold inside the strip beside its primary part.

    The strip ``N_delta`` lies to the right of the primary unstable
    manifold, within ``delta`` of it in ``x1`` and within ``depth`` of
    ``x2 = 1``.  Rather than growing the whole manifold (whose length grows
    geometrically), the arc of the primary manifold with ``x2`` in
    ``source_window`` is advected period by period; its images are pieces
    of the same manifold.  Success means some horizontal line through the
    strip meets an image at least twice.
    """
    settings = settings or IntegratorSettings()
    refine = refine or RefinementPolicy()
    primary = grow_unstable_manifold(t, 1.2, params, settings, refine)
    ys, xs = graph_segment(primary, (1.0 - depth - 1e-9, 1.0))

    def primary_x1(c):
        return float(np.interp(c, ys, xs))

    v = primary.vertices
    sel = (v[:, 1] >= source_window[0]) & (v[:, 1] <= source_window[1])
    idx = np.flatnonzero(sel)
    if idx.size < 2:
        raise NotGraphLike("primary manifold does not reach the source window")
    arc = PolylineCurve(v[idx[0] : idx[-1] + 1], t, False)
    grid = np.linspace(1.0 - depth, 1.0 - 1e-6, levels)
    T = params.period
    for n in range(1, max_periods + 1):
        arc = advect_polyline(arc, t + (n - 1) * T, t + n * T, params, settings, refine)
        counts = _strip_crossings(arc, primary_x1, grid, delta)
        if counts.max() >= 2:
            k = int(np.argmax(counts))
            return ReentrenchmentReport(n, float(grid[k]), int(counts[k]), len(arc), True)
    return ReentrenchmentReport(max_periods, None, int(counts.max()), len(arc), False)
