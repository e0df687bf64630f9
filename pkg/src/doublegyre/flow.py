"""Double-Gyre velocity field and pointwise diagnostics.

All evaluators broadcast over numpy arrays and accept points outside
``[0, 2] x [0, 1]``; nothing is clamped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "FlowParams",
    "PhasePoint",
    "TimedPoint",
    "VelocitySplit",
    "phi",
    "dphi_dx1",
    "velocity",
    "velocity_split",
    "divergence",
    "stream_function",
    "heteroclinic_x2",
    "heteroclinic_p",
    "unperturbed_heteroclinic",
]


@dataclass(frozen=True)
class FlowParams:
    """Amplitude ``A``, perturbation strength ``eps`` and forcing frequency ``omega``."""

    A: float = 1.0
    eps: float = 0.1
    omega: float = 40.0
    theta: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError(f"A must be > 0, got {self.A}")
        if not self.omega > 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if not self.eps >= 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        object.__setattr__(self, "theta", math.atan(self.omega / (self.A * math.pi**2)))

    @property
    def rate(self) -> float:
        """Saddle growth rate ``pi^2 A`` of the unperturbed flow."""
        return math.pi**2 * self.A

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def expansion_valid(self) -> bool:
        # phi stays monotone on [0, 2] only for eps < 1/2
        return self.eps < 0.5

    def replace(self, **changes) -> "FlowParams":
        values = {"A": self.A, "eps": self.eps, "omega": self.omega}
        values.update(changes)
        return FlowParams(**values)

    def to_dict(self) -> dict:
        return {"A": self.A, "eps": self.eps, "omega": self.omega}


class PhasePoint(NamedTuple):
    x1: float
    x2: float

    def in_domain(self, tol: float = 0.0) -> bool:
        return -tol <= self.x1 <= 2.0 + tol and -tol <= self.x2 <= 1.0 + tol


class TimedPoint(NamedTuple):
    x1: float
    x2: float
    t: float

    @property
    def point(self) -> PhasePoint:
        return PhasePoint(self.x1, self.x2)


class VelocitySplit(NamedTuple):
    """Velocity written as ``f + eps * g``; terms of order eps**2 are dropped."""

    f: np.ndarray
    g: np.ndarray
    remainder_order: int = 2


def _xy(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1]


def phi(x1, t, params: FlowParams):
    s = params.eps * np.sin(params.omega * np.asarray(t, dtype=float))
    x1 = np.asarray(x1, dtype=float)
    return s * x1**2 + (1.0 - 2.0 * s) * x1


def dphi_dx1(x1, t, params: FlowParams):
    s = params.eps * np.sin(params.omega * np.asarray(t, dtype=float))
    return 1.0 + 2.0 * s * (np.asarray(x1, dtype=float) - 1.0)


def velocity(x, t, params: FlowParams) -> np.ndarray:
    """Velocity at points ``x`` (shape ``(..., 2)``) and time(s) ``t``."""
    x1, x2 = _xy(x)
    ph = phi(x1, t, params)
    amp = math.pi * params.A
    u = -amp * np.sin(math.pi * ph) * np.cos(math.pi * x2)
    v = amp * np.cos(math.pi * ph) * np.sin(math.pi * x2) * dphi_dx1(x1, t, params)
    return np.stack(np.broadcast_arrays(u, v), axis=-1)


def velocity_split(x, t, params: FlowParams) -> VelocitySplit:
    x1, x2 = _xy(x)
    A = params.A
    pi = math.pi
    f = np.stack(
        np.broadcast_arrays(
            -pi * A * np.sin(pi * x1) * np.cos(pi * x2),
            pi * A * np.cos(pi * x1) * np.sin(pi * x2),
        ),
        axis=-1,
    )
    q = x1**2 - 2.0 * x1
    s = np.sin(params.omega * np.asarray(t, dtype=float))
    g1 = -(pi**2) * A * q * np.cos(pi * x2) * np.cos(pi * x1) * s
    g2 = pi * A * np.sin(pi * x2) * (2.0 * np.cos(pi * x1) * (x1 - 1.0) - pi * q * np.sin(pi * x1)) * s
    g = np.stack(np.broadcast_arrays(g1, g2), axis=-1)
    return VelocitySplit(f, g)


def divergence(x, t, params: FlowParams):
    """Analytic divergence; the two partials cancel term by term."""
    x1, x2 = _xy(x)
    ph = phi(x1, t, params)
    dph = dphi_dx1(x1, t, params)
    k = math.pi**2 * params.A
    du_dx1 = -k * np.cos(math.pi * ph) * dph * np.cos(math.pi * x2)
    dv_dx2 = k * np.cos(math.pi * ph) * np.cos(math.pi * x2) * dph
    return du_dx1 + dv_dx2


def stream_function(x, t, params: FlowParams):
    """``A sin(pi phi) sin(pi x2)``; velocity is ``(-d/dx2, d/dx1)`` of it."""
    x1, x2 = _xy(x)
    return params.A * np.sin(math.pi * phi(x1, t, params)) * np.sin(math.pi * x2)


def heteroclinic_x2(p, A: float = 1.0, complement: bool = False):
    """``(2/pi) arccot(exp(pi^2 A p))``, or ``1 - `` that when ``complement``.

    Written with ``arctan`` of a non-positive exponent so neither tail
    overflows or loses digits near 0.
    """
    z = math.pi**2 * A * np.asarray(p, dtype=float)
    if complement:
        z = -z
    small = 2.0 / math.pi * np.arctan(np.exp(-np.abs(z)))
    return np.where(z >= 0, small, 1.0 - small)


def heteroclinic_p(x2, A: float = 1.0):
    """Inverse of :func:`heteroclinic_x2`: ``ln(cot(pi x2 / 2)) / (pi^2 A)``."""
    x2 = np.asarray(x2, dtype=float)
    return np.log(1.0 / np.tan(0.5 * math.pi * x2)) / (math.pi**2 * A)


def unperturbed_heteroclinic(p, A: float = 1.0) -> PhasePoint:
    return PhasePoint(1.0, float(heteroclinic_x2(p, A)))
