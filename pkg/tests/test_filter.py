import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lidar_cbf.barrier import BarrierEvaluation, CompositeParams, EmptyScan
from lidar_cbf.core import EstimatedPose, SafetyEllipsoid, body_offsets, shape_matrix_rate, shape_matrix_world
from lidar_cbf.filter import (
    FilterConfig,
    NominalConfig,
    baseline_circle_constraints,
    clamp_box,
    constraint_pair,
    nominal_velocity,
    solve_box_halfspace,
    solve_safety_qp,
)
from lidar_cbf.barrier import composite_from_offsets

from oracles import grid_qp


def _ev(g, H=0.0, dH_dt=0.0):
    return BarrierEvaluation(H, np.asarray(g, dtype=float), dH_dt, H, 1, 1.0)


def test_nominal_examples():
    cfg = NominalConfig((4.0, 4.0))
    np.testing.assert_array_equal(nominal_velocity([1, 2], [1, 2], cfg), [0, 0])
    np.testing.assert_allclose(nominal_velocity([1.0, 0.5], [0, 0], cfg), [4.0, 2.0])


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10), st.floats(-3, 3))
def test_nominal_linear(gx, gy, px, py, c):
    cfg = NominalConfig((4.0, 2.5))
    a = nominal_velocity([gx, gy], [px, py], cfg)
    b = nominal_velocity([px + c * (gx - px), py + c * (gy - py)], [px, py], cfg)
    np.testing.assert_allclose(b, c * a, atol=1e-12 * max(1.0, abs(c) * 100))


def test_inactive_constraint_passes_clamped_nominal():
    cfg = FilterConfig(u_max=1.0)
    out = solve_safety_qp([3.0, -0.5], _ev([1.0, 0.0], H=1.0), cfg)
    assert not out.constraint_active
    np.testing.assert_array_equal(out.u_star, [1.0, -0.5])


def test_projection_onto_halfspace_boundary():
    # g=(1,0), b=0 needs H=0, dH/dt=0
    out = solve_safety_qp([-2.0, 0.0], _ev([1.0, 0.0]), FilterConfig(u_max=5.0))
    assert out.constraint_active and not out.infeasible
    np.testing.assert_allclose(out.u_star, [0.0, 0.0], atol=1e-15)


def test_zero_gradient_with_nonnegative_H():
    out = solve_safety_qp([2.0, 0.3], _ev([0.0, 0.0], H=0.5), FilterConfig(u_max=1.0))
    np.testing.assert_array_equal(out.u_star, [1.0, 0.3])
    assert not out.constraint_active and not out.infeasible


def test_zero_gradient_with_positive_b_flags_infeasible():
    out = solve_safety_qp([0.2, 0.3], _ev([0.0, 0.0], H=-0.5), FilterConfig(u_max=1.0))
    assert out.infeasible


def test_halfspace_missing_box_returns_best_vertex():
    x, y, active, infeasible = solve_box_halfspace(0.0, 0.0, 1.0, -2.0, 10.0, 1.0)
    assert infeasible and active
    assert (x, y) == (1.0, -1.0)


def test_no_scan_is_identity():
    out = solve_safety_qp([0.4, -2.0], None, FilterConfig(u_max=1.0))
    np.testing.assert_array_equal(out.u_star, [0.4, -1.0])
    assert out.n_constraints == 0 and not out.constraint_active


def test_mode_none_ignores_constraint():
    out = solve_safety_qp([-2.0, 0.0], _ev([1.0, 0.0], H=-1.0), FilterConfig(mode="none"))
    np.testing.assert_array_equal(out.u_star, [-1.0, 0.0])


@pytest.mark.parametrize("kw", [dict(alpha_gain=0.0), dict(u_max=-1.0), dict(mode="circle"),
                                dict(mode="baseline_circle", s_d=0.0)])
def test_filter_config_validation(kw):
    with pytest.raises(ValueError):
        FilterConfig(**kw)


qp_inputs = st.tuples(
    st.floats(-3, 3), st.floats(-3, 3),  # u_nom
    st.floats(-2, 2), st.floats(-2, 2),  # g
    st.floats(-2, 2),  # b
    st.floats(0.1, 2.5),  # u_max
)


@given(qp_inputs)
def test_qp_properties(args):
    ux, uy, gx, gy, b, umax = args
    x, y, active, infeasible = solve_box_halfspace(ux, uy, gx, gy, b, umax)
    assert abs(x) <= umax and abs(y) <= umax
    cx, cy = clamp_box([ux, uy], umax)
    if not active:
        assert (x, y) == (cx, cy)
    if not infeasible:
        assert gx * x + gy * y >= b - 1e-9
    # optimality against feasible candidates on the line and box corners
    if not infeasible and active:
        obj = (x - ux) ** 2 + (y - uy) ** 2
        for t in np.linspace(-1, 1, 41):
            for px, py in ((t * umax, umax), (t * umax, -umax), (umax, t * umax), (-umax, t * umax)):
                if gx * px + gy * py >= b:
                    assert obj <= (px - ux) ** 2 + (py - uy) ** 2 + 1e-9


def test_qp_matches_grid_oracle():
    rng = np.random.default_rng(11)
    for _ in range(300):
        u_nom = rng.uniform(-3, 3, 2)
        g = rng.normal(size=2)
        b = rng.uniform(-1, 1.5)
        umax = rng.uniform(0.3, 2.0)
        x, y, active, infeasible = solve_box_halfspace(*u_nom, *g, b, umax)
        best, obj, feasible = grid_qp(u_nom, g, b, umax)
        assert feasible == (not infeasible)
        if feasible:
            assert (x - u_nom[0]) ** 2 + (y - u_nom[1]) ** 2 == pytest.approx(obj, abs=1e-4)


@given(qp_inputs, st.floats(0.5, 4.0))
def test_cbf_condition_holds_when_feasible(args, alpha):
    ux, uy, gx, gy, H, umax = args
    dH_dt = 0.1 * H
    cfg = FilterConfig(alpha_gain=alpha, u_max=umax)
    out = solve_safety_qp([ux, uy], _ev([gx, gy], H=H, dH_dt=dH_dt), cfg)
    if not out.infeasible:
        hdot = gx * out.u_star[0] + gy * out.u_star[1] + dH_dt
        assert hdot >= -alpha * H - 1e-9


def test_deterministic_bitwise():
    ev = _ev([0.3, -0.7], H=-0.1, dH_dt=0.05)
    a = solve_safety_qp([1.3, 0.2], ev, FilterConfig())
    b = solve_safety_qp([1.3, 0.2], ev, FilterConfig())
    assert np.array_equal(a.u_star, b.u_star)


@given(st.floats(-1000, 1000), st.floats(-1000, 1000), st.floats(-math.pi, math.pi))
def test_constraint_invariant_to_translation(ox, oy, yaw):
    rng = np.random.default_rng(5)
    pts_body = rng.uniform(-3, 3, (100, 2))
    e = SafetyEllipsoid(0.9, 0.6)
    cfg = FilterConfig()
    pairs = []
    for pos in ((0.0, 0.0), (ox, oy), (ox + 10.0, oy)):
        est = EstimatedPose(pos, yaw)
        ev = composite_from_offsets(body_offsets(pts_body, est.yaw), shape_matrix_world(e, est.yaw),
                                    shape_matrix_rate(e, est.yaw, 0.4), CompositeParams())
        pairs.append(constraint_pair(ev, cfg))
    for g, b in pairs[1:]:
        assert np.array_equal(g, pairs[0][0]) and b == pairs[0][1]


def test_baseline_examples():
    ev = baseline_circle_constraints([[0.8, 0.0]], [0.0, 0.0], 0.8)
    assert ev.min_h == pytest.approx(0.0, abs=1e-15)
    ev = baseline_circle_constraints([[1.0, 0.0]], [0.0, 0.0], 0.8)
    assert ev.min_h == pytest.approx(0.36, abs=1e-15)
    assert ev.dH_dt == 0.0


def test_baseline_min_matches_direct():
    rng = np.random.default_rng(6)
    pts = rng.uniform(-3, 3, (300, 2))
    pos = np.array([0.2, -0.1])
    ev = baseline_circle_constraints(pts, pos, 0.8)
    d2 = np.sum((pts - pos) ** 2, axis=1)
    assert ev.min_h == pytest.approx(d2.min() - 0.64, abs=1e-12)


def test_baseline_errors():
    with pytest.raises(ValueError):
        baseline_circle_constraints([[1.0, 0.0]], [0, 0], 0.0)
    with pytest.raises(EmptyScan):
        baseline_circle_constraints(np.zeros((0, 2)), [0, 0], 0.8)
