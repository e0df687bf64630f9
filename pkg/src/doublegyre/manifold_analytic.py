"""First-order expansions of the hyperbolic trajectories and their primary manifolds.

Everything is evaluated at a fixed time slice ``t`` as a function of the
curve parameter ``p`` (flow time along the unperturbed heteroclinic).  The
stable manifold integrals are written in the shifted variable
``sigma = tau - p >= 0``, with the ratio ``cosh(a p) / cosh(a (sigma + p))``
formed in log space so that large ``|p|`` neither overflows nor cancels.
The unstable manifold follows from the stable one through the symmetry
``(x1, x2, t) -> (2 - x1, 1 - x2, -t)`` of the flow; a direct quadrature of
its own integral is kept for cross-checking.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .flow import FlowParams, PhasePoint, heteroclinic_x2
from .melnikov import DECAY_WIDTH, QUAD_TOL
from .quadrature import integrate

__all__ = [
    "DomainWarning",
    "ManifoldSample",
    "ManifoldCurve",
    "EnvelopeData",
    "STABLE_P_MIN",
    "UNSTABLE_P_MAX",
    "hyperbolic_trajectory",
    "stable_x1",
    "stable_x1_recast",
    "unstable_x1",
    "unstable_x1_direct",
    "stable_manifold_point",
    "unstable_manifold_point",
    "manifold_curve",
    "dx1_dp",
    "d2x1_dp2",
    "envelope",
    "x2_derivatives",
    "emanation_slope",
    "reciprocal_slope",
]

STABLE_P_MIN = -1.5
UNSTABLE_P_MAX = 1.5

# batch size for vectorised quadrature over many p values
_CHUNK = 256


class DomainWarning(UserWarning):
    """The requested parameter lies outside the trusted window of the expansion."""


@dataclass(frozen=True)
class ManifoldSample:
    p: float
    position: PhasePoint
    d1: tuple[float, float]
    d2: tuple[float, float]
    t: float


@dataclass
class ManifoldCurve:
    """Arrays of samples along one manifold at one time slice."""

    which: str
    t: float
    p: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    dx1: np.ndarray
    dx2: np.ndarray
    d2x1: np.ndarray
    d2x2: np.ndarray

    def sample(self, i: int) -> ManifoldSample:
        return ManifoldSample(
            float(self.p[i]),
            PhasePoint(float(self.x1[i]), float(self.x2[i])),
            (float(self.dx1[i]), float(self.dx2[i])),
            (float(self.d2x1[i]), float(self.d2x2[i])),
            self.t,
        )


@dataclass(frozen=True)
class EnvelopeData:
    J: float
    theta_p: float
    cos_part: float
    sin_part: float


def _logcosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0)


def _panel(params: FlowParams) -> float:
    return min(math.pi / params.omega, 1.0 / params.rate)


def _sigma_max(p, params: FlowParams) -> float:
    p = np.asarray(p, dtype=float)
    return float(np.max(np.abs(p) - p)) + DECAY_WIDTH / params.rate


def _like(p, out):
    """Scalar for scalar ``p``, otherwise ``out`` in the shape of ``p``."""
    return float(out[0]) if np.ndim(p) == 0 else out.reshape(np.shape(p))


def _const(p, value: float):
    return value if np.ndim(p) == 0 else np.full(np.shape(p), value)


def _stable_integral(kind: str, p, t: float, params: FlowParams, tol: float = QUAD_TOL):
    """One of the stable-manifold integrals, batched over ``p``."""
    p_in = p
    p = np.atleast_1d(np.asarray(p, dtype=float)).ravel()
    out = np.empty_like(p)
    a, w, eps = params.rate, params.omega, params.eps
    for lo in range(0, p.size, _CHUNK):
        pc = p[lo : lo + _CHUNK]
        P = pc[:, None]
        lcp = _logcosh(a * P)
        tp = np.tanh(a * P)

        def f(sig):
            S = sig[None, :]
            v = S + P
            lcv = _logcosh(a * v)
            tv = np.tanh(a * v)
            if kind == "x1":
                return eps * a * np.exp(lcp - lcv) * tv * np.sin(w * (S + t))
            if kind == "x1_recast":
                return eps * w * np.exp(lcp - lcv) * np.cos(w * (S + t))
            if kind == "d2x1_two_term":
                K = np.exp(lcp - lcv)
                c = np.cos(w * (S + t))
                first = K * c * (2.0 * tv**2 - tp * tv - tp**2)
                second = tp * K * c * (tp - tv)
                return eps * w * a * a * (first + second)
            # K (tanh(a v) - tanh(a p)) = sinh(a sigma) / cosh^2(a v), free of cancellation
            aS = a * S
            H = -0.5 * np.expm1(-2.0 * aS) * np.exp(aS - 2.0 * lcv)
            if kind == "dx1":
                return -eps * w * a * H * np.cos(w * (S + t))
            if kind == "d2x1":
                return 2.0 * eps * w * a * a * tv * H * np.cos(w * (S + t))
            if kind == "env_cos":
                return -eps * w * a * H * np.cos(w * v)
            if kind == "env_sin":
                return -eps * w * a * H * np.sin(w * v)
            raise ValueError(kind)

        out[lo : lo + _CHUNK] = integrate(f, 0.0, _sigma_max(pc, params), tol=tol, max_panel=_panel(params))
    return _like(p_in, out)


def _check_window(p, which: str, p_min: float, p_max: float):
    p = np.asarray(p)
    if which == "stable" and np.any(p < p_min):
        warnings.warn(f"p={p.min():.4g} below trusted stable window start {p_min}", DomainWarning, stacklevel=3)
    if which == "unstable" and np.any(p > p_max):
        warnings.warn(f"p={p.max():.4g} above trusted unstable window end {p_max}", DomainWarning, stacklevel=3)


def hyperbolic_trajectory(which: str, t, params: FlowParams) -> PhasePoint:
    """Leading-order position of the moving saddle on ``x2 = 0`` or ``x2 = 1``.

    ``which`` is ``"stable-anchor"`` (bottom, anchors the stable manifold) or
    ``"unstable-anchor"`` (top).
    """
    th = params.theta
    if which in ("stable-anchor", "stable"):
        return PhasePoint(1.0 + params.eps * math.cos(th) * math.sin(params.omega * t + th), 0.0)
    if which in ("unstable-anchor", "unstable"):
        return PhasePoint(1.0 + params.eps * math.cos(th) * math.sin(params.omega * t - th), 1.0)
    raise ValueError(f"unknown anchor {which!r}")


def stable_x1(p, t: float, params: FlowParams):
    """x1 of the stable manifold from its defining tanh-sech integral."""
    if params.eps == 0.0:
        return _const(p, 1.0)
    return 1.0 + _stable_integral("x1", p, t, params)


def stable_x1_recast(p, t: float, params: FlowParams):
    """Same quantity after integrating by parts: a sech-cosine integral."""
    if params.eps == 0.0:
        return _const(p, 1.0)
    return 1.0 + params.eps * math.sin(params.omega * t) + _stable_integral("x1_recast", p, t, params)


def unstable_x1(p, t: float, params: FlowParams):
    return 2.0 - stable_x1(-np.asarray(p, dtype=float), -t, params)


def unstable_x1_direct(p, t: float, params: FlowParams):
    """Quadrature of the unstable integral over ``(-inf, p]`` without the symmetry."""
    p_in = p
    p = np.atleast_1d(np.asarray(p, dtype=float)).ravel()
    if params.eps == 0.0:
        return _like(p_in, np.ones_like(p))
    a, w, eps = params.rate, params.omega, params.eps
    out = np.empty_like(p)
    for i, pi_ in enumerate(p):
        lo = -(abs(pi_) + pi_) - DECAY_WIDTH / a  # sigma = tau - p <= 0

        def f(sig):
            v = sig + pi_
            K = np.exp(_logcosh(a * pi_) - _logcosh(a * v))
            return eps * a * K * np.tanh(a * v) * np.sin(w * (sig + t))

        out[i] = 1.0 - integrate(f, lo, 0.0, tol=QUAD_TOL, max_panel=_panel(params))
    return _like(p_in, out)


def dx1_dp(p, t: float, params: FlowParams, which: str = "stable"):
    if params.eps == 0.0:
        return _const(p, 0.0)
    if which == "stable":
        return _stable_integral("dx1", p, t, params)
    return _stable_integral("dx1", -np.asarray(p, dtype=float), -t, params)


def d2x1_dp2(p, t: float, params: FlowParams, which: str = "stable"):
    if params.eps == 0.0:
        return _const(p, 0.0)
    if which == "stable":
        return _stable_integral("d2x1", p, t, params)
    return -_stable_integral("d2x1", -np.asarray(p, dtype=float), -t, params)


def x2_derivatives(p, params: FlowParams):
    """``(dx2/dp, d2x2/dp2)`` of the heteroclinic parametrisation."""
    z = params.rate * np.asarray(p, dtype=float)
    sech = 1.0 / np.cosh(z)
    return -math.pi * params.A * sech, math.pi**3 * params.A**2 * sech * np.tanh(z)


def envelope(p, params: FlowParams, which: str = "stable"):
    """Amplitude ``J`` and phase ``theta`` with ``dx1/dp = J cos(omega (p - t) - theta)``.

    For the unstable manifold the same identity holds with ``theta``
    evaluated from the reflected stable integrals, i.e.
    ``dx1^u/dp(p, t) = J(-p) cos(omega (-p + t) - theta(-p))``.
    The phase is taken with ``atan2`` so its sign follows the sine part.
    """
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    q = p_arr if which == "stable" else -p_arr
    C = _stable_integral("env_cos", q, 0.0, params)
    S = _stable_integral("env_sin", q, 0.0, params)
    J = np.hypot(C, S)
    th = np.arctan2(S, C)
    if np.ndim(p) == 0:
        return EnvelopeData(float(J[0]), float(th[0]), float(C[0]), float(S[0]))
    return J, th, C, S


def _sample(p, t, params, which, p_min, p_max):
    p = np.atleast_1d(np.asarray(p, dtype=float))
    _check_window(p, which, p_min, p_max)
    x1 = stable_x1(p, t, params) if which == "stable" else unstable_x1(p, t, params)
    dx2, d2x2 = x2_derivatives(p, params)
    return ManifoldCurve(
        which,
        t,
        p,
        np.atleast_1d(x1),
        heteroclinic_x2(p, params.A),
        np.atleast_1d(dx1_dp(p, t, params, which)),
        dx2,
        np.atleast_1d(d2x1_dp2(p, t, params, which)),
        d2x2,
    )


def stable_manifold_point(p: float, t: float, params: FlowParams, p_min: float = STABLE_P_MIN) -> ManifoldSample:
    return _sample(p, t, params, "stable", p_min, UNSTABLE_P_MAX).sample(0)


def unstable_manifold_point(p: float, t: float, params: FlowParams, p_max: float = UNSTABLE_P_MAX) -> ManifoldSample:
    return _sample(p, t, params, "unstable", STABLE_P_MIN, p_max).sample(0)


def manifold_curve(
    which: str, p, t: float, params: FlowParams, p_min: float = STABLE_P_MIN, p_max: float = UNSTABLE_P_MAX
) -> ManifoldCurve:
    """Batch evaluation over an array of ``p``."""
    if which not in ("stable", "unstable"):
        raise ValueError(f"unknown manifold {which!r}")
    return _sample(p, t, params, which, p_min, p_max)


def emanation_slope(which: str, t: float, params: FlowParams) -> float:
    """Reciprocal slope ``dx1/dx2`` at the anchor, to first order in eps.

    The first-order correction vanishes, so this is 0 for every ``t``;
    :func:`reciprocal_slope` gives the finite-``p`` values that approach it.
    """
    if which not in ("stable", "unstable"):
        raise ValueError(f"unknown manifold {which!r}")
    return 0.0


def reciprocal_slope(p, t: float, params: FlowParams, which: str = "stable"):
    dx2, _ = x2_derivatives(p, params)
    return dx1_dp(p, t, params, which) / dx2
