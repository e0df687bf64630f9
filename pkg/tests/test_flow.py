import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from doublegyre.flow import (
    FlowParams,
    PhasePoint,
    divergence,
    heteroclinic_p,
    heteroclinic_x2,
    phi,
    stream_function,
    unperturbed_heteroclinic,
    velocity,
    velocity_split,
)

P = FlowParams(A=1.0, eps=0.1, omega=40.0)


def mp_velocity(x1, x2, t, A, eps, omega):
    mp.mp.dps = 40
    x1, x2, t = mp.mpf(x1), mp.mpf(x2), mp.mpf(t)
    s = eps * mp.sin(omega * t)
    ph = s * x1**2 + (1 - 2 * s) * x1
    dph = 2 * s * x1 + 1 - 2 * s
    u = -mp.pi * A * mp.sin(mp.pi * ph) * mp.cos(mp.pi * x2)
    v = mp.pi * A * mp.cos(mp.pi * ph) * mp.sin(mp.pi * x2) * dph
    return float(u), float(v)


def test_params_validation_and_theta():
    with pytest.raises(ValueError):
        FlowParams(A=0.0)
    with pytest.raises(ValueError):
        FlowParams(omega=-1.0)
    with pytest.raises(ValueError):
        FlowParams(eps=-0.1)
    assert P.theta == pytest.approx(math.atan(40 / math.pi**2))
    assert P.theta == pytest.approx(1.3289, abs=1e-4)
    assert P.expansion_valid
    assert not P.replace(eps=0.5).expansion_valid


def test_phase_point_domain():
    assert PhasePoint(1.0, 0.5).in_domain()
    assert not PhasePoint(2.1, 0.5).in_domain()
    assert PhasePoint(2.0 + 1e-9, 0.5).in_domain(tol=1e-8)


def test_phi_examples():
    assert phi(0.7, 0.3, P.replace(eps=0.0)) == pytest.approx(0.7)
    assert phi(2.0, 0.123, P.replace(eps=0.3)) == pytest.approx(2.0, abs=1e-15)
    t = math.pi / (2 * 40.0)
    assert phi(1.0, t, P) == pytest.approx(0.9, abs=1e-15)


@given(st.floats(0, 10), st.floats(0, 0.49))
def test_phi_fixes_endpoints(t, eps):
    p = P.replace(eps=eps)
    assert phi(0.0, t, p) == 0.0
    assert phi(2.0, t, p) == pytest.approx(2.0, abs=1e-14)


def test_velocity_simple_points():
    p0 = P.replace(eps=0.0)
    assert np.allclose(velocity([0.5, 0.5], 0.7, p0), [0.0, 0.0], atol=1e-15)
    assert np.allclose(velocity([1.0, 0.5], 0.7, p0), [0.0, -math.pi], atol=1e-14)


def test_velocity_matches_extended_precision():
    ref = mp_velocity(0.25, 0.25, 0.1, 1, mp.mpf("0.1"), 40)
    assert np.allclose(velocity([0.25, 0.25], 0.1, P), ref, rtol=1e-14, atol=1e-15)


def test_velocity_vectorised():
    rng = np.random.default_rng(0)
    x = rng.uniform([0, 0], [2, 1], size=(7, 2))
    v = velocity(x, 0.2, P)
    assert v.shape == (7, 2)
    for xi, vi in zip(x, v):
        assert np.allclose(vi, velocity(xi, 0.2, P))


def test_split_on_separatrix():
    x2 = np.linspace(0.05, 0.95, 7)
    x = np.column_stack([np.ones_like(x2), x2])
    t = 0.3
    s = velocity_split(x, t, P)
    assert np.allclose(s.f[:, 0], 0.0, atol=1e-15)
    assert np.allclose(s.f[:, 1], -math.pi * np.sin(math.pi * x2))
    # on x1 = 1 the horizontal perturbation is -pi^2 A cos(pi x2) sin(omega t)
    assert np.allclose(s.g[:, 0], -math.pi**2 * np.cos(math.pi * x2) * math.sin(40 * t))
    assert np.allclose(s.g[:, 1], 0.0, atol=1e-15)
    assert s.remainder_order == 2


def test_g_matches_eps_derivative():
    rng = np.random.default_rng(1)
    x = rng.uniform([0, 0], [2, 1], size=(20, 2))
    t = 0.17
    h = 1e-6
    fd = (velocity(x, t, P.replace(eps=h)) - velocity(x, t, P.replace(eps=-0.0))) / h
    g = velocity_split(x, t, P).g
    assert np.allclose(fd, g, atol=1e-5)


def test_split_residual_is_second_order():
    x2 = np.linspace(0, 1, 41)
    x1 = np.linspace(0, 2, 81)
    X = np.stack(np.meshgrid(x1, x2), axis=-1).reshape(-1, 2)
    t = 0.2 + math.pi / 80  # sin(omega t) away from zero

    def resid(eps):
        p = P.replace(eps=eps)
        s = velocity_split(X, t, p)
        return np.max(np.abs(velocity(X, t, p) - (s.f + eps * s.g)))

    ratio = resid(0.02) / resid(0.01)
    assert ratio == pytest.approx(4.0, rel=0.1)
    # the single point from the example
    p1, p2 = P.replace(eps=0.02), P.replace(eps=0.01)
    r1 = np.abs(velocity([0.3, 0.7], 0.2, p1) - sum_split([0.3, 0.7], 0.2, p1)).max()
    r2 = np.abs(velocity([0.3, 0.7], 0.2, p2) - sum_split([0.3, 0.7], 0.2, p2)).max()
    assert r1 / r2 == pytest.approx(4.0, rel=0.1)


def sum_split(x, t, p):
    s = velocity_split(x, t, p)
    return s.f + p.eps * s.g


@pytest.mark.parametrize("x,t,eps", [((0.5, 0.5), 0.0, 0.0), ((1.7, 0.2), 0.3, 0.25), ((0.0, 0.0), 1.0, 0.1)])
def test_divergence_examples(x, t, eps):
    assert abs(divergence(x, t, P.replace(eps=eps))) <= 1e-12


@settings(max_examples=200)
@given(st.floats(-0.5, 2.5), st.floats(-0.5, 1.5), st.floats(-5, 5), st.floats(0, 0.49))
def test_divergence_free(x1, x2, t, eps):
    assert abs(divergence((x1, x2), t, P.replace(eps=eps))) <= 1e-12


@settings(max_examples=50)
@given(st.floats(0.1, 1.9), st.floats(0.1, 0.9), st.floats(0, 3), st.floats(0, 0.45))
def test_divergence_matches_finite_difference(x1, x2, t, eps):
    p = P.replace(eps=eps)
    h = 1e-6
    du = (velocity((x1 + h, x2), t, p)[0] - velocity((x1 - h, x2), t, p)[0]) / (2 * h)
    dv = (velocity((x1, x2 + h), t, p)[1] - velocity((x1, x2 - h), t, p)[1]) / (2 * h)
    assert abs(du + dv) < 1e-6


@settings(max_examples=100)
@given(st.floats(0, 2), st.floats(0, 1), st.floats(-5, 5), st.floats(0, 0.49))
def test_no_normal_flow_through_walls(s1, s2, t, eps):
    p = P.replace(eps=eps)
    assert abs(velocity((0.0, s2), t, p)[0]) < 1e-14
    assert abs(velocity((2.0, s2), t, p)[0]) < 1e-14
    assert abs(velocity((s1, 0.0), t, p)[1]) < 1e-14
    assert abs(velocity((s1, 1.0), t, p)[1]) < 1e-14


def test_stream_function_generates_velocity():
    rng = np.random.default_rng(2)
    h = 1e-6
    for x in rng.uniform([0, 0], [2, 1], size=(10, 2)):
        dpsi1 = (stream_function(x + [h, 0], 0.4, P) - stream_function(x - [h, 0], 0.4, P)) / (2 * h)
        dpsi2 = (stream_function(x + [0, h], 0.4, P) - stream_function(x - [0, h], 0.4, P)) / (2 * h)
        assert np.allclose(velocity(x, 0.4, P), [-dpsi2, dpsi1], atol=1e-7)


def test_heteroclinic_values():
    assert unperturbed_heteroclinic(0.0) == PhasePoint(1.0, 0.5)
    mp.mp.dps = 40
    ref = 2 / mp.pi * mp.acot(mp.exp(mp.pi**2))
    assert unperturbed_heteroclinic(1.0).x2 == pytest.approx(float(ref), rel=1e-14)
    assert heteroclinic_x2(50.0) < 1e-100
    assert heteroclinic_x2(-50.0) == 1.0
    assert heteroclinic_x2(-3.0, complement=True) == pytest.approx(float(2 / mp.pi * mp.atan(mp.exp(-3 * mp.pi**2))), rel=1e-13)


def test_heteroclinic_monotone_and_inverse():
    p = np.linspace(-2, 2, 401)
    x2 = heteroclinic_x2(p)
    assert np.all(np.diff(x2) < 0)
    assert np.allclose(heteroclinic_p(x2), p, atol=1e-12)


@pytest.mark.parametrize("A", [0.5, 1.0, 2.0])
def test_heteroclinic_solves_unperturbed_flow(A):
    p0 = FlowParams(A=A, eps=0.0, omega=40.0)
    h = 3e-4 / A
    for p in np.linspace(-0.5, 0.5, 11):
        x = heteroclinic_x2(p + h * np.array([-2, -1, 1, 2]), A)
        # five-point stencil
        dx2 = (x[0] - 8 * x[1] + 8 * x[2] - x[3]) / (12 * h)
        v = velocity(unperturbed_heteroclinic(p, A), 0.0, p0)
        assert abs(v[0]) < 1e-14
        assert abs(dx2 - v[1]) < 1e-10
