import warnings

import numpy as np
import pytest
from scipy.integrate import quad

import transbem as tb
from transbem.geometry import GeometryError, ShapeMap


def test_unit_circle_nodes():
    b = tb.discretize(tb.circle(1.0), 8)
    # the four axis points appear at even indices
    expected = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=float)
    assert np.allclose(b.nodes[::2], expected, atol=1e-15)
    assert np.allclose(b.weights, np.pi / 4)
    assert np.allclose(b.normals, b.nodes, atol=1e-15)


def test_small_node_counts_rejected():
    with pytest.raises(GeometryError):
        tb.discretize(tb.circle(1.0), 4)
    with pytest.raises(GeometryError):
        tb.discretize(tb.circle(1.0), 9)


def test_circle_radius_two_length():
    b = tb.discretize(tb.circle(2.0), 8)
    assert abs(b.length - 4 * np.pi) <= 1e-14


def test_ellipse_perimeter():
    b = tb.discretize(tb.ellipse(2.0, 1.0), 64)
    # quad flags roundoff at this tolerance; the value is still accurate
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        perimeter, _ = quad(
            lambda t: np.hypot(2 * np.sin(t), np.cos(t)), 0, 2 * np.pi,
            limit=200, epsabs=1e-14, epsrel=1e-14)
    assert abs(b.length - perimeter) <= 1e-12


def test_normals_unit_and_orthogonal():
    for curve in (tb.circle(1.5), tb.ellipse(2, 1), tb.star(1, 0.3, 5)):
        b = tb.discretize(curve, 64)
        assert np.max(np.abs(np.linalg.norm(b.normals, axis=1) - 1)) <= 1e-14
        vel = np.asarray(curve.velocity(b.params))
        dots = np.abs(np.sum(b.normals * vel, axis=1))
        assert np.all(dots <= 1e-12 * b.speeds)


def test_normals_point_outward_convex():
    for curve in (tb.circle(1.0, center=(0.5, -0.3)), tb.ellipse(2, 1)):
        b = tb.discretize(curve, 32)
        assert np.all(np.sum(b.normals * (b.nodes - b.centroid()), axis=1) > 0)


def test_closedness():
    for curve in (tb.ellipse(2, 1), tb.star(1, 0.2, 4)):
        gap = np.asarray(curve.position(np.array([0.0]))) \
            - np.asarray(curve.position(np.array([2 * np.pi])))
        assert np.max(np.abs(gap)) <= 1e-13


def test_parameter_origin_rotation_permutes_weights():
    base = tb.star(1, 0.2, 3)
    b = tb.discretize(base, 32)
    shift = 2 * np.pi * 3 / 32
    rotated = tb.ParametricCurve(
        position=lambda t: base.position(t + shift),
        velocity=lambda t: base.velocity(t + shift))
    b2 = tb.discretize(rotated, 32)
    assert np.allclose(np.sort(b.weights), np.sort(b2.weights), atol=1e-13)


def test_clockwise_curve_reversed_with_warning():
    cw = tb.ParametricCurve(
        position=lambda t: np.stack([np.cos(-t), np.sin(-t)], axis=-1),
        velocity=lambda t: np.stack([np.sin(-t), -np.cos(-t)], axis=-1))
    with pytest.warns(UserWarning, match="clockwise"):
        b = tb.discretize(cw, 16)
    assert np.all(np.sum(b.normals * b.nodes, axis=1) > 0)


def test_zero_velocity_rejected_with_index():
    bad = tb.ParametricCurve(
        position=lambda t: np.stack([np.cos(t), np.sin(t)], axis=-1),
        velocity=lambda t: np.zeros(np.shape(t) + (2,)))
    with pytest.raises(GeometryError, match="node 0"):
        tb.discretize(bad, 16)


def test_curvature_circle_and_ellipse():
    b = tb.discretize(tb.circle(2.0), 32)
    assert np.allclose(b.curvatures, 0.5, atol=1e-13)
    # FD curvature path (no analytic acceleration supplied)
    e = tb.expression_curve("2*cos(t)", "sin(t)", "-2*sin(t)", "cos(t)")
    be = tb.discretize(e, 64)
    a, bb = 2.0, 1.0
    exact = a * bb / (a**2 * np.sin(be.params) ** 2
                      + bb**2 * np.cos(be.params) ** 2) ** 1.5
    assert np.max(np.abs(be.curvatures - exact)) <= 1e-9


def test_sigma_tilde_identity():
    st = tb.sigma_tilde(ShapeMap.identity(tb.circle(1.0)), 32)
    assert np.array_equal(st, np.ones(32))


def test_sigma_tilde_dilation():
    base = tb.circle(1.0)
    phi = ShapeMap(base=base,
                   displacement=lambda t: np.asarray(base.position(t)),
                   displacement_derivative=lambda t: np.asarray(base.velocity(t)))
    assert np.allclose(tb.sigma_tilde(phi, 32), 2.0, atol=1e-14)


def test_sigma_tilde_radial_perturbation():
    base = tb.circle(1.0)

    def disp(t):
        r = 0.1 * np.cos(3 * t)
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)

    def disp_dt(t):
        dr = -0.3 * np.sin(3 * t)
        r = 0.1 * np.cos(3 * t)
        return np.stack([dr * np.cos(t) - r * np.sin(t),
                         dr * np.sin(t) + r * np.cos(t)], axis=-1)

    phi = ShapeMap(base=base, displacement=disp, displacement_derivative=disp_dt)
    n = 256
    base_b = tb.discretize(base, n)
    st = tb.sigma_tilde(phi, n)
    integral = float(np.sum(base_b.weights * st))
    perimeter, _ = quad(
        lambda t: np.hypot(
            -0.3 * np.sin(3 * t) * np.cos(t) - (1 + 0.1 * np.cos(3 * t)) * np.sin(t),
            -0.3 * np.sin(3 * t) * np.sin(t) + (1 + 0.1 * np.cos(3 * t)) * np.cos(t)),
        0, 2 * np.pi, limit=200, epsabs=1e-13, epsrel=1e-13)
    assert abs(integral - perimeter) <= 1e-10


def test_validate_shape_identity():
    outer = tb.discretize(tb.circle(2.0), 64)
    report = tb.validate_shape(ShapeMap.identity(tb.circle(1.0)), outer)
    assert report.valid
    assert report.containment_margin == pytest.approx(1.0, abs=1e-2)


def test_validate_shape_containment_failure():
    outer = tb.discretize(tb.circle(2.0), 64)
    base = tb.circle(1.0)
    dilate3 = ShapeMap(
        base=base,
        displacement=lambda t: 2.0 * np.asarray(base.position(t)),
        displacement_derivative=lambda t: 2.0 * np.asarray(base.velocity(t)))
    report = tb.validate_shape(dilate3, outer)
    assert not report.valid
    assert not report.contained


def test_validate_shape_injectivity_failure():
    outer = tb.discretize(tb.circle(2.0), 64)
    base = tb.circle(1.0)

    def disp(t):
        # collapse the node at t = 0 onto the node at t = pi
        d = np.zeros(np.shape(t) + (2,))
        d[np.isclose(t, 0.0), 0] = -2.0
        return d

    phi = ShapeMap(base=base, displacement=disp,
                   displacement_derivative=lambda t: np.zeros(np.shape(t) + (2,)))
    report = tb.validate_shape(phi, outer)
    assert not report.injective
    assert not report.valid


def test_contains_points():
    b = tb.discretize(tb.circle(1.0), 64)
    inside = tb.contains_points(b, [(0.0, 0.0), (0.5, 0.5), (1.5, 0.0)])
    assert inside.tolist() == [True, True, False]
