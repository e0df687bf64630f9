"""Adaptive Gauss-Legendre panel quadrature shared by the analytic modules.

The interval is first cut into panels no wider than ``max_panel``; each
panel is compared against the sum over its two halves and bisected until
the difference drops below its share of ``tol``.  Integrands are
vectorised: ``f(nodes)`` returns an array whose last axis runs over the
nodes, so a whole batch of parameter values is integrated in one pass.
Accepted panels are summed in order of their left endpoint, which keeps
the result bitwise reproducible for a given decomposition.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["QuadratureNonConvergence", "integrate", "gauss_rule"]

_EPS = np.finfo(float).eps


class QuadratureNonConvergence(RuntimeError):
    pass


@lru_cache(maxsize=None)
def gauss_rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _panel_sums(f, lo, hi, order):
    x, w = gauss_rule(order)
    mid = 0.5 * (lo + hi)
    rad = 0.5 * (hi - lo)
    nodes = mid[:, None] + rad[:, None] * x[None, :]
    vals = np.asarray(f(nodes.ravel()), dtype=float)
    vals = vals.reshape(vals.shape[:-1] + nodes.shape)
    sums = np.einsum("...pk,k->...p", vals, w) * rad
    mags = np.einsum("...pk,k->...p", np.abs(vals), w) * rad
    return sums, mags


def integrate(
    f,
    a: float,
    b: float,
    *,
    tol: float = 1e-10,
    rtol: float = 1e-12,
    max_panel: float | None = None,
    order: int = 10,
    max_depth: int = 48,
    return_error: bool = False,
):
    """Integrate ``f`` over ``[a, b]`` to ``max(tol, rtol * int |f|)``.

    Parameters
    ----------
    f : callable
        Maps a 1D array of nodes to values of shape ``batch + (len(nodes),)``.
    max_panel : float, optional
        Widest allowed initial panel; use half an oscillation period for
        oscillatory integrands.
    max_depth : int
        Bisection levels before :class:`QuadratureNonConvergence` is raised.

    Returns
    -------
    value, or ``(value, error_estimate)`` when ``return_error`` is set.
    """
    a = float(a)
    b = float(b)
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0
    if b == a:
        probe = np.asarray(f(np.array([a])), dtype=float)
        zero = np.zeros(probe.shape[:-1])
        zero = zero if zero.ndim else 0.0
        return (zero, 0.0) if return_error else zero

    length = b - a
    n0 = 1 if max_panel is None else max(1, int(np.ceil(length / max_panel)))
    edges = np.linspace(a, b, n0 + 1)
    lo, hi = edges[:-1], edges[1:]

    _, mag0 = _panel_sums(f, lo, hi, order)
    # per batch member: absolute target, relaxed for large integrals
    target = np.maximum(tol, rtol * mag0.sum(axis=-1))[..., None]

    done_lo = []
    done_val = []
    err_total = 0.0
    for _ in range(max_depth + 1):
        mid = 0.5 * (lo + hi)
        whole, _ = _panel_sums(f, lo, hi, order)
        left, mag_l = _panel_sums(f, lo, mid, order)
        right, mag_r = _panel_sums(f, mid, hi, order)
        halves = left + right
        diff = np.abs(whole - halves)
        mags = mag_l + mag_r
        allowed = np.maximum(target * (hi - lo) / length, 64.0 * _EPS * mags)
        passed = diff <= allowed
        batch_axes = tuple(range(diff.ndim - 1))
        ok = passed.all(axis=batch_axes) if batch_axes else passed
        diff_m = diff.max(axis=batch_axes) if batch_axes else diff
        if np.any(ok):
            done_lo.append(lo[ok])
            done_val.append(halves[..., ok])
            err_total += float(diff_m[ok].sum())
        if np.all(ok):
            break
        lo, mid, hi = lo[~ok], mid[~ok], hi[~ok]
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    else:
        raise QuadratureNonConvergence(
            f"{lo.size} panels unresolved after {max_depth} bisections on [{a}, {b}]"
        )

    all_lo = np.concatenate(done_lo)
    all_val = np.concatenate(done_val, axis=-1)
    order_idx = np.argsort(all_lo, kind="stable")
    total = sign * np.sum(all_val[..., order_idx], axis=-1)
    if np.ndim(total) == 0:
        total = float(total)
    return (total, err_total) if return_error else total
