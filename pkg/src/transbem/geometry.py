"""Closed planar curves, their discretizations, and shape maps of the inclusion.

Curves are smooth 2pi-periodic parametrizations t -> (x(t), y(t)).  A
:class:`DiscreteBoundary` carries the equispaced nodes, speeds, outward
normals, curvatures and arclength trapezoid weights that every integral
operator downstream consumes.  A :class:`ShapeMap` perturbs the reference
inner curve by a displacement field and yields a new curve whose
discretization reuses the same machinery.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .expressions import ExpressionFn

Vec2Fn = Callable[[np.ndarray], np.ndarray]

# 8th-order centered first-derivative stencil (periodic grids).
_D1_STENCIL = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5,
                        0.0,
                        4 / 5, -1 / 5, 4 / 105, -1 / 280])
_D1_OFFSETS = np.arange(-4, 5)


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class ParametricCurve:
    """A closed smooth curve given by position and velocity callables.

    Both callables map an array of parameters in [0, 2pi) to an (n, 2)
    array.  ``acceleration`` is optional; when absent, curvature is
    recovered by high-order finite differences of the velocity.
    """

    position: Vec2Fn
    velocity: Vec2Fn
    acceleration: Optional[Vec2Fn] = None
    # descriptive tag for geometry-aware checks ("circle" enables the
    # closed-form reference paths); radius is meaningful for circles only
    kind: str = field(default="custom", compare=False)
    radius: float = field(default=0.0, compare=False)


def circle(radius=1.0, center=(0.0, 0.0)):
    cx, cy = center
    r = float(radius)
    if r <= 0:
        raise GeometryError("circle radius must be positive")
    return ParametricCurve(
        position=lambda t: np.stack([cx + r * np.cos(t), cy + r * np.sin(t)], axis=-1),
        velocity=lambda t: np.stack([-r * np.sin(t), r * np.cos(t)], axis=-1),
        acceleration=lambda t: np.stack([-r * np.cos(t), -r * np.sin(t)], axis=-1),
        kind="circle", radius=r,
    )


def ellipse(a=1.0, b=1.0, center=(0.0, 0.0)):
    cx, cy = center
    a, b = float(a), float(b)
    if a <= 0 or b <= 0:
        raise GeometryError("ellipse semi-axes must be positive")
    return ParametricCurve(
        position=lambda t: np.stack([cx + a * np.cos(t), cy + b * np.sin(t)], axis=-1),
        velocity=lambda t: np.stack([-a * np.sin(t), b * np.cos(t)], axis=-1),
        acceleration=lambda t: np.stack([-a * np.cos(t), -b * np.sin(t)], axis=-1),
    )


def star(radius=1.0, amplitude=0.0, frequency=3, center=(0.0, 0.0)):
    """Smooth star r(t) = radius * (1 + amplitude*cos(frequency*t))."""
    cx, cy = center
    a, eps, k = float(radius), float(amplitude), int(frequency)
    if a <= 0 or abs(eps) >= 1:
        raise GeometryError("star needs radius > 0 and |amplitude| < 1")

    def pos(t):
        r = a * (1 + eps * np.cos(k * t))
        return np.stack([cx + r * np.cos(t), cy + r * np.sin(t)], axis=-1)

    def vel(t):
        r = a * (1 + eps * np.cos(k * t))
        dr = -a * eps * k * np.sin(k * t)
        return np.stack([dr * np.cos(t) - r * np.sin(t),
                         dr * np.sin(t) + r * np.cos(t)], axis=-1)

    def acc(t):
        r = a * (1 + eps * np.cos(k * t))
        dr = -a * eps * k * np.sin(k * t)
        ddr = -a * eps * k * k * np.cos(k * t)
        return np.stack([ddr * np.cos(t) - 2 * dr * np.sin(t) - r * np.cos(t),
                         ddr * np.sin(t) + 2 * dr * np.cos(t) - r * np.sin(t)], axis=-1)

    return ParametricCurve(position=pos, velocity=vel, acceleration=acc)


def expression_curve(x, y, dx, dy):
    """Curve from four expression strings in the parameter ``t``."""
    fx = x if isinstance(x, ExpressionFn) else ExpressionFn(x, ("t",))
    fy = y if isinstance(y, ExpressionFn) else ExpressionFn(y, ("t",))
    fdx = dx if isinstance(dx, ExpressionFn) else ExpressionFn(dx, ("t",))
    fdy = dy if isinstance(dy, ExpressionFn) else ExpressionFn(dy, ("t",))

    def pos(t):
        return np.stack([np.broadcast_to(fx(t=t), np.shape(t)),
                         np.broadcast_to(fy(t=t), np.shape(t))], axis=-1)

    def vel(t):
        return np.stack([np.broadcast_to(fdx(t=t), np.shape(t)),
                         np.broadcast_to(fdy(t=t), np.shape(t))], axis=-1)

    return ParametricCurve(position=pos, velocity=vel)


def _periodic_derivative(samples, h):
    """8th-order centered derivative of periodically sampled data."""
    out = np.zeros_like(samples)
    for c, k in zip(_D1_STENCIL, _D1_OFFSETS):
        if c != 0.0:
            out += c * np.roll(samples, -k, axis=0)
    return out / h


@dataclass(frozen=True)
class DiscreteBoundary:
    """Nodes, speeds, outward normals, curvatures and weights of a curve.

    ``weights[j] = (2*pi/N) * |gamma'(t_j)|`` are arclength trapezoid
    weights; on smooth closed curves the trapezoid rule is spectrally
    accurate, so ``sum(weights)`` converges to the curve length at the
    same rate.
    """

    params: np.ndarray
    nodes: np.ndarray
    speeds: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    curvatures: np.ndarray
    curve: ParametricCurve = field(repr=False, compare=False)

    @property
    def n(self):
        return len(self.params)

    @property
    def length(self):
        return float(np.sum(self.weights))

    @property
    def mesh_width(self):
        return float(np.max(self.weights))

    def centroid(self):
        return self.nodes.mean(axis=0)


def discretize(curve: ParametricCurve, n: int) -> DiscreteBoundary:
    """Sample ``curve`` at ``n`` equispaced parameters.

    Requires ``n`` even and >= 8.  A clockwise parametrization is reversed
    with a warning; a node with vanishing velocity is rejected.
    """
    if n % 2 != 0 or n < 8:
        raise GeometryError(f"node count must be even and >= 8, got {n}")
    t = 2 * np.pi * np.arange(n) / n
    nodes = np.asarray(curve.position(t), dtype=float)
    vel = np.asarray(curve.velocity(t), dtype=float)
    speeds = np.hypot(vel[:, 0], vel[:, 1])
    bad = np.nonzero(speeds < 1e-14)[0]
    if bad.size:
        raise GeometryError(f"parametrization is not regular: zero velocity at node {bad[0]}")

    # signed polygon area fixes the orientation
    area = 0.5 * np.sum(nodes[:, 0] * np.roll(nodes[:, 1], -1)
                        - np.roll(nodes[:, 0], -1) * nodes[:, 1])
    if area < 0:
        warnings.warn("clockwise curve reversed to counterclockwise orientation")
        rev_curve = ParametricCurve(
            position=lambda s: curve.position((2 * np.pi - s) % (2 * np.pi)),
            velocity=lambda s: -curve.velocity((2 * np.pi - s) % (2 * np.pi)),
            acceleration=None if curve.acceleration is None
            else (lambda s: curve.acceleration((2 * np.pi - s) % (2 * np.pi))),
        )
        return discretize(rev_curve, n)

    # outward normal of a ccw curve: rotate the unit tangent by -pi/2
    tangents = vel / speeds[:, None]
    normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=-1)
    weights = (2 * np.pi / n) * speeds

    if curve.acceleration is not None:
        acc = np.asarray(curve.acceleration(t), dtype=float)
    else:
        acc = _periodic_derivative(vel, 2 * np.pi / n)
    curvatures = (vel[:, 0] * acc[:, 1] - vel[:, 1] * acc[:, 0]) / speeds**3

    return DiscreteBoundary(params=t, nodes=nodes, speeds=speeds, normals=normals,
                            weights=weights, curvatures=curvatures, curve=curve)


@dataclass(frozen=True)
class ShapeMap:
    """Diffeomorphism of the reference inner boundary, phi(gamma(t)) = gamma(t) + d(t).

    ``displacement`` and ``displacement_derivative`` map parameter arrays to
    (n, 2) arrays; the derivative is with respect to ``t``.
    """

    base: ParametricCurve
    displacement: Vec2Fn
    displacement_derivative: Vec2Fn

    @staticmethod
    def identity(base: ParametricCurve) -> "ShapeMap":
        zero = lambda t: np.zeros(np.shape(t) + (2,))
        return ShapeMap(base=base, displacement=zero, displacement_derivative=zero)

    def image_curve(self) -> ParametricCurve:
        base = self.base
        disp = self.displacement
        ddisp = self.displacement_derivative
        return ParametricCurve(
            position=lambda t: np.asarray(base.position(t)) + np.asarray(disp(t)),
            velocity=lambda t: np.asarray(base.velocity(t)) + np.asarray(ddisp(t)),
        )

    def discretize_image(self, n: int) -> DiscreteBoundary:
        return discretize(self.image_curve(), n)


def sigma_tilde(phi: ShapeMap, n: int) -> np.ndarray:
    """Change-of-variables weight: image speed over base speed at each node.

    Integrals over the perturbed boundary equal sums over reference nodes
    weighted by ``weights * sigma_tilde``.
    """
    t = 2 * np.pi * np.arange(n) / n
    base_vel = np.asarray(phi.base.velocity(t), dtype=float)
    base_speed = np.hypot(base_vel[:, 0], base_vel[:, 1])
    image_vel = base_vel + np.asarray(phi.displacement_derivative(t), dtype=float)
    image_speed = np.hypot(image_vel[:, 0], image_vel[:, 1])
    bad = np.nonzero(image_speed < 1e-10)[0]
    if bad.size:
        raise GeometryError(f"degenerate image speed at node {bad[0]}")
    return image_speed / base_speed


@dataclass(frozen=True)
class ShapeValidity:
    injective: bool
    immersion: bool
    contained: bool
    injectivity_margin: float
    immersion_margin: float
    containment_margin: float

    @property
    def valid(self):
        return self.injective and self.immersion and self.contained


def _point_in_polygon(points, polygon):
    """Even-odd ray casting; returns a boolean per point."""
    points = np.atleast_2d(points)
    x, y = points[:, 0], points[:, 1]
    px, py = polygon[:, 0], polygon[:, 1]
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    inside = np.zeros(len(points), dtype=bool)
    for j in range(len(px)):
        cond = (py[j] > y) != (qy[j] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = px[j] + (y - py[j]) * (qx[j] - px[j]) / (qy[j] - py[j])
        inside ^= cond & (x < xint)
    return inside


def validate_shape(phi: ShapeMap, outer: DiscreteBoundary, n: int = 64) -> ShapeValidity:
    """Discrete injectivity, immersion and containment checks for ``phi``."""
    image = phi.discretize_image(n)
    length = image.length

    d = image.nodes[:, None, :] - image.nodes[None, :, :]
    dist = np.hypot(d[..., 0], d[..., 1])
    np.fill_diagonal(dist, np.inf)
    min_dist = float(dist.min())
    injective = min_dist > 1e-10 * length

    min_speed = float(image.speeds.min())
    immersion = min_speed > 1e-10

    inside = _point_in_polygon(image.nodes, outer.nodes)
    if inside.all():
        gap = image.nodes[:, None, :] - outer.nodes[None, :, :]
        margin = float(np.hypot(gap[..., 0], gap[..., 1]).min())
        contained = margin > 0
    else:
        margin = 0.0
        contained = False

    return ShapeValidity(
        injective=injective, immersion=immersion, contained=contained,
        injectivity_margin=min_dist, immersion_margin=min_speed,
        containment_margin=margin,
    )


def contains_points(boundary: DiscreteBoundary, points) -> np.ndarray:
    """Whether each point lies inside the closed discretized curve."""
    return _point_in_polygon(np.atleast_2d(np.asarray(points, dtype=float)),
                             boundary.nodes)
