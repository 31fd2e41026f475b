import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lidar_cbf.barrier import (
    CompositeParams,
    EmptyScan,
    composite_evaluate,
    composite_from_offsets,
    h_point,
    h_point_gradients,
    point_barriers,
    softmin_compose,
    softmin_weights,
)
from lidar_cbf.core import SafetyEllipsoid, rotation_matrix, shape_matrix_rate, shape_matrix_world

E = SafetyEllipsoid(0.9, 0.45)
P = CompositeParams(8.0, 0.9)


def naive_H(h, params):
    return -(params.gamma / params.kappa) * math.log(sum(math.exp(-params.kappa * math.tanh(x / params.gamma))
                                                           for x in h))


# --- per-point barrier -----------------------------------------------------------

def test_h_point_boundary_and_double_axis():
    Q = shape_matrix_world(E, 0.0)
    assert h_point([0.9, 0.0], [0.0, 0.0], Q) == pytest.approx(0.0, abs=1e-15)
    assert h_point([1.8, 0.0], [0.0, 0.0], Q) == pytest.approx(3.0, abs=1e-14)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-math.pi, math.pi), st.floats(-5, 5), st.floats(-5, 5))
def test_h_point_matches_body_frame_form(dx, dy, yaw, px, py):
    Q = shape_matrix_world(E, yaw)
    xb, yb = rotation_matrix(yaw).T @ [dx, dy]
    want = (xb / E.a_x) ** 2 + (yb / E.a_y) ** 2 - 1.0
    got = h_point([px + dx, py + dy], [px, py], Q)
    assert got == pytest.approx(want, abs=1e-12 * max(1.0, abs(want)) + 1e-11)


def test_h_point_gradients_trivial():
    grad, dh_dt = h_point_gradients([1.0, 2.0], [0.25, 0.5], np.eye(2), np.zeros((2, 2)))
    np.testing.assert_allclose(grad, [-1.5, -3.0])
    assert dh_dt == 0.0


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-math.pi, math.pi), st.floats(-2, 2))
def test_h_point_gradients_finite_difference(dx, dy, yaw, omega):
    Q = shape_matrix_world(E, yaw)
    Qd = shape_matrix_rate(E, yaw, omega)
    p_i, p_r = np.array([dx, dy]), np.zeros(2)
    grad, dh_dt = h_point_gradients(p_i, p_r, Q, Qd)
    step = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        fd = (h_point(p_i, p_r + e, Q) - h_point(p_i, p_r - e, Q)) / (2 * step)
        assert grad[k] == pytest.approx(fd, abs=1e-6 * max(1.0, abs(fd)))
    fd_t = (h_point(p_i, p_r, shape_matrix_world(E, yaw + omega * step))
            - h_point(p_i, p_r, shape_matrix_world(E, yaw - omega * step))) / (2 * step)
    assert dh_dt == pytest.approx(fd_t, abs=1e-6 * max(1.0, abs(fd_t)))


def test_point_barriers_vectorized_matches_scalar():
    rng = np.random.default_rng(1)
    d = rng.uniform(-3, 3, (40, 2))
    Q, Qd = shape_matrix_world(E, 0.3), shape_matrix_rate(E, 0.3, 0.8)
    h, grad, dh_dt = point_barriers(d, Q, Qd)
    for i in range(len(d)):
        g, t = h_point_gradients(d[i], [0, 0], Q, Qd)
        assert h[i] == pytest.approx(h_point(d[i], [0, 0], Q), abs=1e-12)
        np.testing.assert_allclose(grad[i], g, atol=1e-12)
        assert dh_dt[i] == pytest.approx(t, abs=1e-12)


# --- composite -----------------------------------------------------------------

@given(st.floats(-5, 5), st.floats(0.5, 20), st.floats(0.1, 2))
def test_single_point_degenerates(h, kappa, gamma):
    params = CompositeParams(kappa, gamma)
    ev = softmin_compose([h], [[1.0, 2.0]], [0.5], params)
    assert ev.H == pytest.approx(gamma * math.tanh(h / gamma), abs=1e-12)
    np.testing.assert_allclose(softmin_weights([h], params), [1.0])


def test_equal_points_average():
    ev = softmin_compose([0.4, 0.4], [[1.0, 0.0], [0.0, 1.0]], [1.0, 3.0], P)
    np.testing.assert_allclose(softmin_weights([0.4, 0.4], P), [0.5, 0.5])
    s = 1 / math.cosh(0.4 / 0.9) ** 2
    np.testing.assert_allclose(ev.grad_p, [0.5 * s, 0.5 * s], rtol=1e-12)
    assert ev.dH_dt == pytest.approx(2.0 * s, rel=1e-12)


def test_empty_scan_raises():
    with pytest.raises(EmptyScan):
        composite_evaluate(np.zeros((0, 2)), [0, 0], np.eye(2), np.zeros((2, 2)), P)
    with pytest.raises(EmptyScan):
        composite_from_offsets(np.zeros((3, 2)), np.eye(2), np.zeros((2, 2)), P)


def test_self_hits_rejected():
    ev = composite_from_offsets([[0.0, 0.0], [0.005, 0.0], [2.0, 0.0]], np.eye(2), np.zeros((2, 2)), P)
    assert ev.n_points == 1


def test_huge_h_does_not_overflow():
    h = np.full(1000, 1e6)
    ev = softmin_compose(h, np.ones((1000, 2)), np.zeros(1000), P)
    assert math.isfinite(ev.H)
    assert ev.H == pytest.approx(0.9 * (1 - math.log(1000) / 8), rel=1e-12)
    assert ev.weights_sum == pytest.approx(1.0, abs=1e-12)


def test_stabilized_matches_naive_for_moderate_h():
    h = np.random.default_rng(2).uniform(-1, 3, 200)
    ev = softmin_compose(h, np.zeros((200, 2)), np.zeros(200), P)
    assert ev.H == pytest.approx(naive_H(h, P), abs=1e-12)


h_arrays = arrays(np.float64, st.integers(1, 60), elements=st.floats(-10, 10))
params_st = st.builds(CompositeParams, st.floats(1, 20), st.floats(0.1, 2))


@given(h_arrays, params_st)
def test_composite_bounds(h, params):
    ev = softmin_compose(h, np.zeros((h.size, 2)), np.zeros(h.size), params)
    lam = softmin_weights(h, params)
    assert ev.weights_sum == pytest.approx(1.0, abs=1e-9)
    assert np.all(lam >= 0) and np.all(lam <= 1)
    assert ev.H <= params.gamma * math.tanh(ev.min_h / params.gamma) + 1e-12
    assert abs(ev.H) <= params.gamma * (1 + math.log(h.size) / params.kappa) + 1e-12
    if ev.H >= 0:
        assert np.all(h >= 0)


@given(arrays(np.float64, st.integers(2, 60), elements=st.floats(-10, 10)), params_st)
def test_removing_minimum_never_decreases(h, params):
    full = softmin_compose(h, np.zeros((h.size, 2)), np.zeros(h.size), params).H
    rest = np.delete(h, int(np.argmin(h)))
    reduced = softmin_compose(rest, np.zeros((rest.size, 2)), np.zeros(rest.size), params).H
    assert reduced >= full - 1e-12


def _random_instance(rng, n):
    yaw = rng.uniform(-math.pi, math.pi)
    e = SafetyEllipsoid(rng.uniform(0.3, 1.2), rng.uniform(0.2, 0.8))
    pos = rng.uniform(-5, 5, 2)
    ang = rng.uniform(-math.pi, math.pi, n)
    r = rng.uniform(0.3, 3.0, n)
    pts = pos + np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    return e, yaw, rng.uniform(-1.5, 1.5), pos, pts


def test_composite_gradients_finite_difference_50_points():
    rng = np.random.default_rng(3)
    step = 1e-6
    for _ in range(50):
        e, yaw, omega, pos, pts = _random_instance(rng, 50)
        Q, Qd = shape_matrix_world(e, yaw), shape_matrix_rate(e, yaw, omega)
        ev = composite_evaluate(pts, pos, Q, Qd, P)
        assert ev.H <= 0.9 * math.tanh(ev.min_h / 0.9) + 1e-12
        for k in range(2):
            d = np.zeros(2)
            d[k] = step
            fd = (composite_evaluate(pts, pos + d, Q, Qd, P).H - composite_evaluate(pts, pos - d, Q, Qd, P).H) / (2 * step)
            assert ev.grad_p[k] == pytest.approx(fd, rel=1e-5, abs=1e-8)
        Hp = composite_evaluate(pts, pos, shape_matrix_world(e, yaw + omega * step), Qd, P).H
        Hm = composite_evaluate(pts, pos, shape_matrix_world(e, yaw - omega * step), Qd, P).H
        assert ev.dH_dt == pytest.approx((Hp - Hm) / (2 * step), rel=1e-5, abs=1e-8)


def test_composite_is_deterministic():
    rng = np.random.default_rng(4)
    e, yaw, omega, pos, pts = _random_instance(rng, 500)
    Q, Qd = shape_matrix_world(e, yaw), shape_matrix_rate(e, yaw, omega)
    a = composite_evaluate(pts, pos, Q, Qd, P)
    b = composite_evaluate(pts.copy(), pos.copy(), Q, Qd, P)
    assert a.H == b.H and a.dH_dt == b.dH_dt and np.array_equal(a.grad_p, b.grad_p)


@pytest.mark.parametrize("kappa,gamma", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
def test_params_validated(kappa, gamma):
    with pytest.raises(ValueError):
        CompositeParams(kappa, gamma)
