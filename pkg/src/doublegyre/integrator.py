"""Time integration of the Double-Gyre, strobed Poincare maps and curve advection.

Points are advanced as one vectorised batch with a shared step size; the
adaptive scheme is the Dormand-Prince 5(4) pair with the error norm taken
as the worst point, so every point meets the tolerance.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .flow import FlowParams, PhasePoint, velocity
from .polyline import PolylineCurve

__all__ = [
    "IntegratorSettings",
    "RefinementPolicy",
    "Trajectory",
    "StepUnderflow",
    "NoConvergence",
    "VertexBudgetExceeded",
    "flow_map",
    "advect",
    "trajectory",
    "poincare_map",
    "poincare_jacobian",
    "find_hyperbolic_fixed_point",
    "advect_polyline",
]

log = logging.getLogger(__name__)

MIN_STEP = 1e-14


class StepUnderflow(RuntimeError):
    pass


class NoConvergence(RuntimeError):
    pass


class VertexBudgetExceeded(RuntimeError):
    def __init__(self, message, curve=None):
        super().__init__(message)
        self.curve = curve


@dataclass(frozen=True)
class IntegratorSettings:
    """Step control.  ``max_step=None`` resolves to a twentieth of the forcing period."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_step: float | None = None
    scheme: str = "dopri5"  # or "rk4" (fixed step of max_step)

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_step is not None and self.max_step <= 0:
            raise ValueError("max_step must be positive")
        if self.scheme not in ("dopri5", "rk4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    def step_limit(self, params: FlowParams) -> float:
        return self.max_step if self.max_step is not None else params.period / 20.0

    def tightened(self, factor: float) -> "IntegratorSettings":
        return IntegratorSettings(self.rel_tol / factor, self.abs_tol / factor, self.max_step, self.scheme)

    def to_dict(self) -> dict:
        return {"rel_tol": self.rel_tol, "abs_tol": self.abs_tol, "max_step": self.max_step, "scheme": self.scheme}


@dataclass(frozen=True)
class RefinementPolicy:
    max_gap: float = 1e-3
    max_angle: float = math.radians(10.0)
    max_vertices: int = 2_000_000
    min_source_gap: float = 1e-13
    # image segments shorter than this are not split for turning alone
    angle_min_gap: float = 1e-5

    def to_dict(self) -> dict:
        return {
            "max_gap": self.max_gap,
            "max_angle_deg": math.degrees(self.max_angle),
            "max_vertices": self.max_vertices,
            "angle_min_gap": self.angle_min_gap,
        }


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    dense: bool = False

    @property
    def samples(self):
        return [(float(t), PhasePoint(*x)) for t, x in zip(self.times, self.points)]


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _dopri(y, t0, t1, params, settings, record=None):
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)
    hmax = settings.step_limit(params)
    h = min(hmax, span)
    t = t0
    k1 = velocity(y, t, params)
    done = 0.0
    while done < span:
        if span - done < h * (1 + 1e-12):
            h = span - done
        hs = direction * h
        ks = [k1]
        for i in range(1, 7):
            yi = y + hs * sum(a * k for a, k in zip(_A[i], ks) if a != 0.0)
            ks.append(velocity(yi, t + _C[i] * hs, params))
        y_new = yi  # row 6 of the tableau equals the 5th order weights
        err = hs * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
        scale = settings.abs_tol + settings.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        enorm = float(np.max(np.abs(err) / scale)) if err.size else 0.0
        if enorm <= 1.0:
            done = done + h if span - done > h else span
            t = t0 + direction * done
            y = y_new
            k1 = ks[6]
            if record is not None:
                record.append((t, y.copy()))
            fac = 5.0 if enorm == 0.0 else min(5.0, max(0.2, 0.9 * enorm ** -0.2))
            h = min(hmax, h * fac)
        else:
            h = h * max(0.2, 0.9 * enorm ** -0.2)
            if h < MIN_STEP:
                raise StepUnderflow(f"step fell below {MIN_STEP} at t={t}")
    return y


def _rk4(y, t0, t1, params, settings, record=None):
    span = t1 - t0
    n = max(1, int(math.ceil(abs(span) / settings.step_limit(params) - 1e-9)))
    h = span / n
    for i in range(n):
        t = t0 + i * h
        k1 = velocity(y, t, params)
        k2 = velocity(y + 0.5 * h * k1, t + 0.5 * h, params)
        k3 = velocity(y + 0.5 * h * k2, t + 0.5 * h, params)
        k4 = velocity(y + h * k3, t + h, params)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if record is not None:
            record.append((t + h, y.copy()))
    return y


def flow_map(points, t0: float, t1: float, params: FlowParams, settings: IntegratorSettings | None = None) -> np.ndarray:
    """Advance an array of points (shape ``(N, 2)`` or ``(2,)``) from ``t0`` to ``t1``."""
    settings = settings or IntegratorSettings()
    y = np.array(points, dtype=float)
    if t1 == t0 or y.size == 0:
        return y
    shape = y.shape
    y = y.reshape(-1, 2)
    step = _dopri if settings.scheme == "dopri5" else _rk4
    return step(y, float(t0), float(t1), params, settings).reshape(shape)


def advect(x0, t0: float, t1: float, params: FlowParams, settings: IntegratorSettings | None = None) -> PhasePoint:
    return PhasePoint(*map(float, flow_map(np.asarray(x0, dtype=float), t0, t1, params, settings)))


def trajectory(x0, t0: float, t1: float, params: FlowParams, settings: IntegratorSettings | None = None) -> Trajectory:
    settings = settings or IntegratorSettings()
    y = np.asarray(x0, dtype=float).reshape(1, 2)
    record = [(float(t0), y[0].copy())]
    rec = []
    step = _dopri if settings.scheme == "dopri5" else _rk4
    step(y, float(t0), float(t1), params, settings, record=rec)
    record += [(t, v[0]) for t, v in rec]
    times = np.array([r[0] for r in record])
    pts = np.array([r[1] for r in record])
    return Trajectory(times, pts)


def poincare_map(x0, t0: float, n: int, params: FlowParams, settings: IntegratorSettings | None = None):
    """``n``-fold strobed map from phase ``t0``; negative ``n`` runs backward."""
    n = int(n)
    out = flow_map(x0, t0, t0 + n * params.period, params, settings)
    if np.ndim(out) == 1:
        return PhasePoint(float(out[0]), float(out[1]))
    return out


def poincare_jacobian(x, t0: float, params: FlowParams, settings: IntegratorSettings | None = None, n: int = 1, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``P^n`` at ``x``."""
    x = np.asarray(x, dtype=float)
    probes = np.array([x + [h, 0], x - [h, 0], x + [0, h], x - [0, h]])
    img = flow_map(probes, t0, t0 + n * params.period, params, settings)
    return np.column_stack([(img[0] - img[1]) / (2 * h), (img[2] - img[3]) / (2 * h)])


def find_hyperbolic_fixed_point(
    guess,
    t0: float,
    params: FlowParams,
    settings: IntegratorSettings | None = None,
    constraint: str = "free",
    tol: float = 1e-10,
    max_iter: int = 50,
    fd_step: float = 1e-6,
) -> PhasePoint:
    """Newton search for a fixed point of the strobed map at phase ``t0``.

    ``constraint`` is ``"free"``, ``"x2=0"`` or ``"x2=1"``; on the
    invariant lines the search is one-dimensional in ``x1``.
    """
    T = params.period
    if constraint in ("x2=0", "x2=1"):
        c = 0.0 if constraint == "x2=0" else 1.0
        x = float(guess[0])

        def g(xs):
            pts = np.column_stack([xs, np.full(len(xs), c)])
            return flow_map(pts, t0, t0 + T, params, settings)[:, 0] - xs

        for _ in range(max_iter):
            r0, rp, rm = g(np.array([x, x + fd_step, x - fd_step]))
            if abs(r0) < tol:
                return PhasePoint(float(x), c)
            slope = (rp - rm) / (2 * fd_step)
            x -= r0 / slope
        raise NoConvergence(f"fixed point on {constraint} not found from {guess}")
    if constraint != "free":
        raise ValueError(f"unknown constraint {constraint!r}")

    x = np.asarray(guess, dtype=float).copy()
    for _ in range(max_iter):
        r = flow_map(x, t0, t0 + T, params, settings) - x
        if np.hypot(*r) < tol:
            return PhasePoint(float(x[0]), float(x[1]))
        J = poincare_jacobian(x, t0, params, settings, h=fd_step) - np.eye(2)
        x = x - np.linalg.solve(J, r)
    raise NoConvergence(f"free fixed point not found from {guess}")


def _turning(v: np.ndarray, closed: bool) -> np.ndarray:
    """Absolute turning angle at each vertex (0 at open ends)."""
    if len(v) < 3:
        return np.zeros(len(v))
    if closed:
        d_in = v - np.roll(v, 1, axis=0)
        d_out = np.roll(v, -1, axis=0) - v
    else:
        d_in = np.diff(v, axis=0)[:-1]
        d_out = np.diff(v, axis=0)[1:]
    cross = d_in[:, 0] * d_out[:, 1] - d_in[:, 1] * d_out[:, 0]
    dot = np.einsum("ij,ij->i", d_in, d_out)
    ang = np.abs(np.arctan2(cross, dot))
    if closed:
        return ang
    return np.concatenate([[0.0], ang, [0.0]])


def advect_polyline(
    curve: PolylineCurve,
    t0: float,
    t1: float,
    params: FlowParams,
    settings: IntegratorSettings | None = None,
    refine: RefinementPolicy | None = None,
) -> PolylineCurve:
    """Advect every vertex, inserting source midpoints where the image is under-resolved.

    A segment is split when its image is longer than ``refine.max_gap`` or
    when the image turns by more than ``refine.max_angle`` beyond what the
    source already turned at either endpoint.  Insertions follow the source
    ordering, so the output does not depend on evaluation order.
    """
    refine = refine or RefinementPolicy()
    if len(curve) < 2:
        raise ValueError("curve needs at least 2 vertices")
    closed = curve.closed
    src = curve.vertices.copy()
    prm = curve.params.copy() if curve.params is not None else np.arange(len(src), dtype=float)
    img = flow_map(src, t0, t1, params, settings)
    src_turn = _turning(src, closed)

    while True:
        if closed:
            nxt = np.roll(np.arange(len(src)), -1)
        else:
            nxt = np.arange(1, len(src))
        cur = np.arange(len(nxt))
        gap = np.hypot(*(img[nxt] - img[cur]).T)
        flag = gap > refine.max_gap
        excess = _turning(img, closed) - src_turn > refine.max_angle
        flag |= (excess[cur] | excess[nxt]) & (gap > refine.angle_min_gap)
        src_gap = np.hypot(*(src[nxt] - src[cur]).T)
        flag &= src_gap > refine.min_source_gap
        idx = np.flatnonzero(flag)
        if idx.size == 0:
            break
        if len(src) + idx.size > refine.max_vertices:
            partial = PolylineCurve(img, t1, closed, prm)
            raise VertexBudgetExceeded(
                f"refinement needs {len(src) + idx.size} vertices > budget {refine.max_vertices}", partial
            )
        mid_src = 0.5 * (src[idx] + src[nxt[idx]])
        if closed:
            wrap = nxt[idx] == 0
            mid_prm = 0.5 * (prm[idx] + np.where(wrap, prm[idx] + 1.0, prm[nxt[idx]]))
        else:
            mid_prm = 0.5 * (prm[idx] + prm[nxt[idx]])
        mid_img = flow_map(mid_src, t0, t1, params, settings)
        pos = idx + 1
        src = np.insert(src, pos, mid_src, axis=0)
        img = np.insert(img, pos, mid_img, axis=0)
        prm = np.insert(prm, pos, mid_prm)
        src_turn = np.insert(src_turn, pos, 0.0)
    return PolylineCurve(img, t1, closed, prm)
