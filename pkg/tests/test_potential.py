import math

import numpy as np
import pytest

import transbem as tb
from transbem.potential import (
    BoundaryDensity,
    near_boundary,
    single_layer_matrix,
    trace_V_matrix,
    wstar_matrix,
)


def test_fundamental_solution_values():
    assert tb.fundamental_solution(2, (1.0, 0.0)) == 0.0
    assert tb.fundamental_solution(2, (math.e, 0.0)) == pytest.approx(1 / (2 * math.pi))
    assert tb.fundamental_solution(3, (1.0, 0.0, 0.0)) == pytest.approx(-1 / (4 * math.pi))


def test_fundamental_solution_singular_origin():
    with pytest.raises(ValueError):
        tb.fundamental_solution(2, (0.0, 0.0))


def test_density_validation():
    b = tb.discretize(tb.circle(1.0), 16)
    with pytest.raises(ValueError):
        BoundaryDensity(b, np.ones(8))
    with pytest.raises(ValueError):
        BoundaryDensity(b, np.full(16, np.nan))
    with pytest.raises(ValueError):
        BoundaryDensity(b, np.ones(16), mean_zero=True)
    BoundaryDensity(b, np.cos(b.params), mean_zero=True)


def test_single_layer_closed_form():
    b = tb.discretize(tb.circle(1.0), 64)
    one = BoundaryDensity(b, np.ones(64))
    vals, flags = tb.eval_single_layer(b, one, [(0.0, 0.0), (2.0, 0.0)])
    assert abs(vals[0]) <= 1e-14
    assert abs(vals[1] - math.log(2.0)) <= 1e-14
    assert not flags.any()

    cos = BoundaryDensity(b, np.cos(b.params))
    vals, _ = tb.eval_single_layer(b, cos, [(0.0, 0.0)])
    assert abs(vals[0]) <= 1e-15


def test_near_boundary_flagging():
    b = tb.discretize(tb.circle(1.0), 64)
    one = BoundaryDensity(b, np.ones(64))
    close = 1.0 - 0.5 * b.mesh_width
    _, flags = tb.eval_single_layer(b, one, [(close, 0.0)])
    assert flags[0]
    assert not near_boundary(b, [(0.0, 0.0)])[0]


def test_trace_V_circle_eigenfunctions():
    b1 = tb.discretize(tb.circle(1.0), 64)
    v1 = trace_V_matrix(b1)
    assert np.max(np.abs(v1 @ np.ones(64))) <= 1e-13
    cos = np.cos(b1.params)
    assert np.max(np.abs(v1 @ cos + 0.5 * cos)) <= 1e-13

    b2 = tb.discretize(tb.circle(2.0), 64)
    v2 = trace_V_matrix(b2)
    assert np.max(np.abs(v2 @ np.ones(64) - 2 * math.log(2.0))) <= 1e-13


def test_wstar_circle_average():
    b = tb.discretize(tb.circle(1.0), 64)
    w = wstar_matrix(b)
    assert np.allclose(w @ np.ones(64), 0.5, atol=1e-13)
    assert np.max(np.abs(w @ np.sin(b.params))) <= 1e-13
    rng = np.random.default_rng(7)
    mu = rng.standard_normal(64)
    target = np.sum(b.weights * mu) / (4 * np.pi)
    assert np.max(np.abs(w @ mu - target)) <= 1e-12


def test_normal_derivative_circle():
    b = tb.discretize(tb.circle(1.0), 64)
    one = BoundaryDensity(b, np.ones(64))
    interior = tb.normal_derivative("interior", b, one)
    exterior = tb.normal_derivative("exterior", b, one)
    assert np.max(np.abs(interior.values)) <= 1e-13
    assert np.allclose(exterior.values, 1.0, atol=1e-13)
    with pytest.raises(ValueError):
        tb.normal_derivative("sideways", b, one)


def test_jump_identity_exact():
    rng = np.random.default_rng(11)
    for curve in (tb.circle(1.0), tb.ellipse(2, 1), tb.star(1, 0.3, 5)):
        for n in (32, 64, 128):
            b = tb.discretize(curve, n)
            mu = BoundaryDensity(b, rng.standard_normal(n))
            gap = (tb.normal_derivative("exterior", b, mu).values
                   - tb.normal_derivative("interior", b, mu).values - mu.values)
            assert np.max(np.abs(gap)) <= 1e-14 * np.max(np.abs(mu.values))


def test_grad_single_layer_closed_forms():
    b = tb.discretize(tb.circle(1.0), 128)
    one = BoundaryDensity(b, np.ones(128))
    g, _ = tb.grad_single_layer(b, one, [(0.0, 0.0), (2.0, 0.0)])
    assert np.max(np.abs(g[0])) <= 1e-14
    assert np.allclose(g[1], [0.5, 0.0], atol=1e-14)

    cos = BoundaryDensity(b, np.cos(b.params))
    g, _ = tb.grad_single_layer(b, cos, [(0.0, 0.0)])
    assert np.allclose(g[0], [-0.5, 0.0], atol=1e-14)


def test_trace_symmetry():
    rng = np.random.default_rng(3)
    for curve in (tb.ellipse(2, 1), tb.star(1, 0.2, 4)):
        b = tb.discretize(curve, 64)
        v = trace_V_matrix(b)
        mu, eta = rng.standard_normal(64), rng.standard_normal(64)
        lhs = np.sum(b.weights * (v @ mu) * eta)
        rhs = np.sum(b.weights * mu * (v @ eta))
        assert abs(lhs - rhs) <= 1e-11 * np.linalg.norm(mu) * np.linalg.norm(eta)


def test_harmonicity_of_potential():
    b = tb.discretize(tb.ellipse(2, 1), 96)
    rng = np.random.default_rng(5)
    mu = BoundaryDensity(b, np.cos(2 * b.params) + 0.3 * rng.standard_normal(96) * 0
                         + np.sin(3 * b.params))
    for center, radius in (((0.0, 0.0), 0.3), ((3.0, 1.0), 0.4)):
        def field(points):
            vals, _ = tb.eval_single_layer(b, mu, points)
            return vals
        res = tb.mean_value_check(field, center, radius, samples=32)
        assert res <= 1e-10 * (1 + abs(field(np.array([center]))[0]))


def test_spectral_convergence_of_trace():
    ref_b = tb.discretize(tb.ellipse(2, 1), 4096)
    ref = trace_V_matrix(ref_b) @ np.cos(2 * ref_b.params)
    errors = {}
    for n in (32, 64, 128):
        b = tb.discretize(tb.ellipse(2, 1), n)
        vals = trace_V_matrix(b) @ np.cos(2 * b.params)
        errors[n] = np.max(np.abs(vals - ref[:: 4096 // n]))
    assert errors[128] <= 1e-10
    assert errors[128] <= errors[64] <= errors[32]


def test_upsampled_near_evaluation():
    b = tb.discretize(tb.circle(1.0), 64)
    mu = BoundaryDensity(b, np.cos(b.params))
    # exact interior value of the layer with density cos is -x1/2
    target = np.array([(0.92, 0.0)])
    coarse, flags = tb.eval_single_layer(b, mu, target)
    fine, _ = tb.eval_single_layer(b, mu, target, upsample=True)
    assert flags[0]
    exact = -0.46
    assert abs(fine[0] - exact) < abs(coarse[0] - exact) + 1e-14
    assert abs(fine[0] - exact) <= 1e-6


def test_target_on_node_rejected():
    b = tb.discretize(tb.circle(1.0), 16)
    with pytest.raises(ValueError):
        single_layer_matrix(b, np.array([[1.0, 0.0]]))
