"""Curvature, arclength and fold points of manifold curves.

Works on the analytic stable/unstable manifolds (parametrised by ``p``) and
on discrete polylines.  A fold is a turning point of ``x1`` along the curve;
on the analytic curve it is a zero of ``dx1/dp``, on a polyline a marked
maximum of the curvature.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.signal import find_peaks
from scipy.stats import linregress

from .flow import FlowParams, PhasePoint, heteroclinic_x2
from .integrator import NoConvergence
from .manifold_analytic import (
    d2x1_dp2,
    dx1_dp,
    envelope,
    stable_x1,
    unstable_x1,
    x2_derivatives,
)
from .melnikov import DECAY_WIDTH
from .polyline import PolylineCurve
from .quadrature import integrate

__all__ = [
    "DegenerateTangent",
    "DegenerateTriple",
    "DegenerateFit",
    "InsufficientFolds",
    "FoldPoint",
    "CurvatureProfile",
    "SpacingFit",
    "REFERENCE_P",
    "curvature",
    "parametric_curvature",
    "speed",
    "arclength",
    "dx1_zeros",
    "find_fold_points",
    "fold_spacing_regression",
    "analytic_curvature_profile",
    "discrete_curvature",
    "detect_curvature_peaks",
]

REFERENCE_P = 41.7151
PEAK_PROMINENCE = 0.5
FOLD_TOL = 1e-9
TIE_TOL = 1e-6


class DegenerateTangent(ValueError):
    pass


class DegenerateTriple(ValueError):
    pass


class DegenerateFit(ValueError):
    pass


class InsufficientFolds(ValueError):
    def __init__(self, message, folds=()):
        super().__init__(message)
        self.folds = list(folds)


@dataclass(frozen=True)
class FoldPoint:
    p: float | None
    s: float
    position: PhasePoint
    curvature: float
    method: str  # "newton-derivative" | "curvature-peak"
    index: int
    d2x1: float | None = None


@dataclass
class CurvatureProfile:
    """Samples ``(p or s, log10 kappa)`` ordered by arclength from ``reference_p``.

    ``arclength`` holds the arclength of every sample; ``p`` is ``None`` for
    discrete curves.
    """

    arclength: np.ndarray
    log_kappa: np.ndarray
    p: np.ndarray | None = None
    positions: np.ndarray | None = None
    reference_p: float | None = None
    kappa: np.ndarray = field(init=False)

    def __post_init__(self):
        self.arclength = np.asarray(self.arclength, dtype=float)
        self.log_kappa = np.asarray(self.log_kappa, dtype=float)
        self.kappa = 10.0**self.log_kappa
        if np.any(np.diff(self.arclength) <= 0):
            raise ValueError("arclength must be strictly increasing along the profile")

    @property
    def samples(self) -> list[tuple[float, float]]:
        key = self.p if self.p is not None else self.arclength
        return list(zip(key.tolist(), self.log_kappa.tolist()))


class SpacingFit(NamedTuple):
    slope: float
    intercept: float
    r2: float


def _x1(p, t, params, which):
    return stable_x1(p, t, params) if which == "stable" else unstable_x1(p, t, params)


def _derivs(p, t, params, which):
    d1 = dx1_dp(p, t, params, which)
    d2 = d2x1_dp2(p, t, params, which)
    e1, e2 = x2_derivatives(p, params)
    return d1, d2, e1, e2


def parametric_curvature(x1p, x1pp, x2p, x2pp):
    """``|x2'' x1' - x1'' x2'| / (x1'^2 + x2'^2)^(3/2)`` for any parametrised curve."""
    x1p, x1pp, x2p, x2pp = (np.asarray(v, dtype=float) for v in (x1p, x1pp, x2p, x2pp))
    sp2 = x1p**2 + x2p**2
    if np.any(sp2 < 1e-20):
        raise DegenerateTangent(f"tangent vanishes (speed^2 = {np.min(sp2):.3g})")
    return np.abs(x2pp * x1p - x1pp * x2p) / sp2**1.5


def curvature(p, t: float, params: FlowParams, which: str = "stable"):
    """Curvature of the analytic manifold at parameter ``p``."""
    scalar = np.ndim(p) == 0
    p = np.atleast_1d(np.asarray(p, dtype=float))
    x1p, x1pp, x2p, x2pp = _derivs(p, t, params, which)
    k = parametric_curvature(x1p, x1pp, x2p, x2pp)
    return float(k[0]) if scalar else k


def speed(p, t: float, params: FlowParams, which: str = "stable"):
    p = np.asarray(p, dtype=float)
    dx2, _ = x2_derivatives(p, params)
    return np.hypot(dx1_dp(p, t, params, which), dx2)


def arclength(p1: float, p2: float, t: float, params: FlowParams, which: str = "stable", tol: float = 1e-9) -> float:
    """Arclength between parameters ``p1`` and ``p2`` (symmetric, non-negative).

    Infinite limits are allowed on the side where the curve approaches its
    anchor; beyond ``|a p| = 40`` the tangent is below double precision and
    the remainder is dropped.
    """
    lo, hi = sorted((float(p1), float(p2)))
    if lo == hi:
        return 0.0
    cut = DECAY_WIDTH / params.rate
    far_ok = params.eps == 0.0
    if (which == "stable" or far_ok) and hi > cut:
        hi = max(cut, lo)
    if (which == "unstable" or far_ok) and lo < -cut:
        lo = min(-cut, hi)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("arclength diverges towards the far end of the manifold")
    if lo >= hi:
        return 0.0
    panel = math.pi / (2.0 * params.omega)
    return abs(float(integrate(lambda q: speed(q, t, params, which), lo, hi, tol=tol, max_panel=panel)))


def _seeds(p_lo: float, p_hi: float, t: float, params: FlowParams, which: str, iterations: int = 5):
    """Zeros of ``cos(omega (p - t) - theta(p))`` by fixed-point iteration on theta."""
    w = params.omega
    # the unstable branch runs k the other way, so cover both signs
    k_max = math.ceil(w * max(abs(p_lo - t), abs(p_hi - t)) / math.pi) + 3
    k = np.arange(-k_max, k_max + 1, dtype=float)
    p = t + (math.pi / 2 + k * math.pi) / w
    sgn = 1.0 if which == "stable" else -1.0
    for _ in range(iterations):
        _, th, _, _ = envelope(p, params, which)
        # unstable: dx1/dp = J cos(omega (t - p) - theta(-p))
        p = t + sgn * (math.pi / 2 + k * math.pi + th) / w
    return np.sort(p[(p > p_lo) & (p < p_hi)])


def _newton(p, t, params, which, tol=FOLD_TOL, max_iter=30):
    """Vectorised Newton on dx1/dp; returns roots and a convergence mask."""
    p = np.array(p, dtype=float)
    ok = np.zeros(p.shape, dtype=bool)
    for _ in range(max_iter):
        todo = ~ok
        if not todo.any():
            break
        f = dx1_dp(p[todo], t, params, which)
        fp = d2x1_dp2(p[todo], t, params, which)
        conv = np.abs(f) < tol
        idx = np.flatnonzero(todo)
        ok[idx[conv]] = True
        step = np.where(conv, 0.0, f / np.where(fp == 0, np.inf, fp))
        step = np.clip(step, -0.25 * math.pi / params.omega, 0.25 * math.pi / params.omega)
        p[idx] -= step
    return p, ok


def dx1_zeros(p_range, t: float, params: FlowParams, which: str = "stable"):
    """All isolated zeros of ``dx1/dp`` inside ``p_range``, in decreasing ``p``.

    Returns ``(p, d2x1)``.  Seeds that fail to converge are skipped with a
    warning.
    """
    p_lo, p_hi = sorted(p_range)
    if params.eps == 0.0:
        return np.zeros(0), np.zeros(0)
    seeds = _seeds(p_lo, p_hi, t, params, which)
    roots, ok = _newton(seeds, t, params, which)
    if not ok.all():
        warnings.warn(f"{(~ok).sum()} fold seeds did not converge", RuntimeWarning, stacklevel=2)
    roots = roots[ok & (roots > p_lo) & (roots < p_hi)]
    if roots.size == 0:
        return roots, roots
    d2 = d2x1_dp2(roots, t, params, which)
    keep = d2 != 0.0
    roots, d2 = roots[keep], d2[keep]
    order = np.argsort(-roots, kind="stable")
    roots, d2 = roots[order], d2[order]
    # tie-break duplicates: keep the larger |d2x1|
    out_p, out_d = [], []
    for r, d in zip(roots, d2):
        if out_p and abs(out_p[-1] - r) < TIE_TOL:
            if abs(d) > abs(out_d[-1]):
                out_p[-1], out_d[-1] = r, d
            continue
        out_p.append(r)
        out_d.append(d)
    return np.array(out_p), np.array(out_d)


def find_fold_points(
    p_range,
    t: float,
    params: FlowParams,
    count: int,
    which: str = "stable",
    reference_p: float = REFERENCE_P,
    marked_ratio: float = 1.0,
) -> list[FoldPoint]:
    """First ``count`` marked folds of ``x1`` along the manifold, moving away from the anchor.

    Every zero of ``dx1/dp`` is a turning point, but close to the anchor the
    oscillation of ``x1`` is small compared with the motion along ``x2``
    and the curve barely bends there.  A zero counts as a marked fold when
    the envelope amplitude of ``dx1/dp`` exceeds ``marked_ratio`` times
    ``|dx2/dp|``; set ``marked_ratio=0`` to keep every zero.
    """
    p_lo, p_hi = sorted(p_range)
    roots, d2 = dx1_zeros((p_lo, p_hi), t, params, which)
    if roots.size:
        J = np.atleast_1d(envelope(roots, params, which)[0])
        dx2, _ = x2_derivatives(roots, params)
        marked = J > marked_ratio * np.abs(dx2)
        roots, d2 = roots[marked], d2[marked]
    if which == "unstable":
        roots, d2 = roots[::-1], d2[::-1]
    if roots.size < count:
        raise InsufficientFolds(f"found {roots.size} folds in {p_range}, wanted {count}", roots.tolist())
    roots, d2 = roots[:count], d2[:count]
    kap = curvature(roots, t, params, which)
    x1 = _x1(roots, t, params, which)
    x2 = heteroclinic_x2(roots, params.A)
    # arclength from the reference, accumulated fold to fold
    pts = np.concatenate([[reference_p], roots])
    legs = [arclength(a, b, t, params, which) for a, b in zip(pts[:-1], pts[1:])]
    s = np.cumsum(legs)
    return [
        FoldPoint(float(r), float(si), PhasePoint(float(a), float(b)), float(k), "newton-derivative", i + 1, float(d))
        for i, (r, si, a, b, k, d) in enumerate(zip(roots, s, x1, x2, kap, d2))
    ]


def fold_spacing_regression(folds) -> SpacingFit:
    """Least-squares fit of ``ln(S_{i+1} - S_i)`` against the fold index."""
    folds = list(folds)
    if len(folds) < 3:
        raise DegenerateFit("need at least three folds")
    s = np.array([f.s for f in folds], dtype=float)
    gaps = np.diff(s)
    if np.any(gaps <= 0):
        raise DegenerateFit("consecutive fold arclengths must increase")
    i = np.arange(1, len(gaps) + 1, dtype=float)
    y = np.log(gaps)
    if len(gaps) == 2:
        slope = float(y[1] - y[0])
        return SpacingFit(slope, float(y[0] - slope), 1.0)
    fit = linregress(i, y)
    return SpacingFit(float(fit.slope), float(fit.intercept), float(fit.rvalue**2))


def analytic_curvature_profile(
    p_grid, t: float, params: FlowParams, which: str = "stable", reference_p: float = REFERENCE_P
) -> CurvatureProfile:
    """log10 curvature on ``p_grid`` with arclength measured from ``reference_p``.

    Samples are returned in order of increasing arclength.  The leg from
    the reference to the nearest sample is integrated adaptively, the rest
    by the trapezoid rule on the grid.
    """
    p = np.unique(np.asarray(p_grid, dtype=float))
    if which == "stable":
        p = p[::-1]
    x1p, x1pp, x2p, x2pp = _derivs(p, t, params, which)
    sp = np.hypot(x1p, x2p)
    k = parametric_curvature(x1p, x1pp, x2p, x2pp)
    s0 = arclength(reference_p, p[0], t, params, which)
    s = s0 + np.concatenate([[0.0], np.cumsum(0.5 * (sp[1:] + sp[:-1]) * np.abs(np.diff(p)))])
    with np.errstate(divide="ignore"):
        logk = np.log10(np.maximum(k, 1e-300))
    pos = np.column_stack([_x1(p, t, params, which), heteroclinic_x2(p, params.A)])
    return CurvatureProfile(s, logk, p, pos, reference_p)


def discrete_curvature(curve: PolylineCurve) -> CurvatureProfile:
    """Circumcircle curvature at each vertex of a polyline.

    Collinear triples give zero; the end vertices copy their neighbour.
    """
    v = curve.vertices
    if len(v) < 3:
        raise ValueError("need at least three vertices")
    a = v[:-2]
    b = v[1:-1]
    c = v[2:]
    ab = np.hypot(*(b - a).T)
    bc = np.hypot(*(c - b).T)
    ca = np.hypot(*(a - c).T)
    if np.any(ab == 0) or np.any(bc == 0):
        raise DegenerateTriple("repeated consecutive vertices")
    cross = (b - a)[:, 0] * (c - a)[:, 1] - (b - a)[:, 1] * (c - a)[:, 0]
    k_mid = np.where(ca > 0, 2.0 * np.abs(cross) / (ab * bc * np.maximum(ca, 1e-300)), 0.0)
    k = np.concatenate([[k_mid[0]], k_mid, [k_mid[-1]]])
    s = curve.arclengths[: len(v)]
    with np.errstate(divide="ignore"):
        logk = np.log10(np.maximum(k, 1e-300))
    return CurvatureProfile(s, logk, None, v.copy(), None)


def detect_curvature_peaks(profile: CurvatureProfile, prominence: float = PEAK_PROMINENCE) -> list[FoldPoint]:
    """Local maxima of log10 curvature standing out by at least ``prominence``."""
    y = profile.log_kappa
    if y.size < 3:
        return []
    idx, _ = find_peaks(y, prominence=prominence)
    out = []
    for n, i in enumerate(idx):
        pos = profile.positions[i] if profile.positions is not None else (math.nan, math.nan)
        p = float(profile.p[i]) if profile.p is not None else None
        out.append(
            FoldPoint(p, float(profile.arclength[i]), PhasePoint(float(pos[0]), float(pos[1])),
                      float(profile.kappa[i]), "curvature-peak", n + 1)
        )
    return out
