"""Perturbed interface solves, branch continuation, and smoothness probes.

A one-parameter displacement family deforms the reference inner curve; at
each parameter value the transmission system is reassembled on the image
curve (fresh nodes, normals, curvature diagonal) while the nonlinearities
stay anchored at the reference points.  Continuation walks a uniform
parameter grid with a linear predictor and Newton corrector, and the
smoothness probe estimates parameter derivatives of probe values by
central differences at three grid spacings, reporting Richardson ratios
(near 4 for smooth branches, since all stencils are second order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .expressions import ExpressionFn
from .geometry import (
    DiscreteBoundary,
    GeometryError,
    ParametricCurve,
    ShapeMap,
    contains_points,
    validate_shape,
)
from .nonlinear import (
    ConvergenceError,
    TransmissionData,
    TransmissionSystem,
    reconstruct_solution,
    solve_unperturbed,
)
from .operators import DensitySet, density_set_from_vector


class ShapeSolveError(RuntimeError):
    pass


class BranchError(RuntimeError):
    """Continuation abort; carries the partial branch and the failing parameter."""

    def __init__(self, message, partial, failed_s):
        super().__init__(message)
        self.partial = partial
        self.failed_s = failed_s


def _family_fn(source):
    if isinstance(source, ExpressionFn):
        return source
    return ExpressionFn(source, ("t", "s"))


@dataclass(frozen=True)
class ShapeFamily:
    """Displacement family (dx(t, s), dy(t, s)) over a base inner curve.

    The t-derivative expressions must be supplied; no symbolic
    differentiation happens here.  s = 0 must give the zero displacement.
    """

    base: ParametricCurve
    dx: ExpressionFn
    dy: ExpressionFn
    dx_dt: ExpressionFn
    dy_dt: ExpressionFn

    @staticmethod
    def from_sources(base, dx, dy, dx_dt, dy_dt) -> "ShapeFamily":
        fam = ShapeFamily(base=base, dx=_family_fn(dx), dy=_family_fn(dy),
                          dx_dt=_family_fn(dx_dt), dy_dt=_family_fn(dy_dt))
        t = 2 * np.pi * np.arange(64) / 64
        d0 = fam.shape_at(0.0).displacement(t)
        if np.max(np.abs(d0)) > 1e-12:
            raise GeometryError("family displacement does not vanish at s = 0")
        return fam

    def shape_at(self, s: float) -> ShapeMap:
        dx, dy, dxt, dyt = self.dx, self.dy, self.dx_dt, self.dy_dt

        def disp(t):
            return np.stack([np.broadcast_to(dx(t=t, s=s), np.shape(t)),
                             np.broadcast_to(dy(t=t, s=s), np.shape(t))], axis=-1)

        def disp_dt(t):
            return np.stack([np.broadcast_to(dxt(t=t, s=s), np.shape(t)),
                             np.broadcast_to(dyt(t=t, s=s), np.shape(t))], axis=-1)

        return ShapeMap(base=self.base, displacement=disp,
                        displacement_derivative=disp_dt)


def trefoil_family(base: ParametricCurve, amplitude_per_s: float = 1.0) -> ShapeFamily:
    """Three-lobed radial displacement s * cos(3t) * (cos t, sin t)."""
    a = repr(float(amplitude_per_s))
    return ShapeFamily.from_sources(
        base,
        dx=f"{a}*s*cos(3*t)*cos(t)",
        dy=f"{a}*s*cos(3*t)*sin(t)",
        dx_dt=f"{a}*s*(-3*sin(3*t)*cos(t) - cos(3*t)*sin(t))",
        dy_dt=f"{a}*s*(-3*sin(3*t)*sin(t) + cos(3*t)*cos(t))",
    )


@dataclass(frozen=True)
class BranchPoint:
    s: float
    densities: DensitySet
    residual_norm: float
    probe_interior: np.ndarray
    probe_exterior: np.ndarray
    inner_boundary: DiscreteBoundary = field(repr=False)


def perturbed_system(phi: ShapeMap, data: TransmissionData,
                     outer: DiscreteBoundary, n: int) -> TransmissionSystem:
    """Assemble the transmission system on the image of the inner curve."""
    image = phi.discretize_image(n)
    t = image.params
    reference = np.asarray(phi.base.position(t), dtype=float)
    return TransmissionSystem(data, outer, image, reference_nodes=reference)


def residual_M(phi: ShapeMap, densities: DensitySet, data: TransmissionData,
               outer: DiscreteBoundary) -> np.ndarray:
    """Residual of the perturbed system at the given densities."""
    system = perturbed_system(phi, data, outer, densities.mu_i.boundary.n)
    return system.residual(densities)


def solve_at_shape(phi: ShapeMap, guess: DensitySet, data: TransmissionData,
                   outer: DiscreteBoundary, tol: float = 1e-10,
                   max_iter: int = 25):
    """Newton solve of the perturbed system from ``guess``.

    The shape is validated before any linear algebra; the guess is
    re-seated on the image boundary so warm starts from neighbouring
    shapes are accepted.
    """
    report = validate_shape(phi, outer)
    if not report.valid:
        raise ShapeSolveError(f"invalid shape map: {report}")
    n = guess.mu_i.boundary.n
    system = perturbed_system(phi, data, outer, n)
    seated = density_set_from_vector(guess.as_vector(), outer, system.inner)
    try:
        return system.solve(method="newton", tol=tol, max_iter=max_iter,
                            guess=seated)
    except ConvergenceError as exc:
        raise ShapeSolveError(str(exc)) from exc


def _probe_values(ds: DensitySet, outer: DiscreteBoundary,
                  image: DiscreteBoundary, probes_interior, probes_exterior):
    pair = reconstruct_solution(ds, outer, image)
    p_int = (pair.u_i(probes_interior) if len(probes_interior)
             else np.zeros(0))
    p_ext = (pair.u_o(probes_exterior) if len(probes_exterior)
             else np.zeros(0))
    return p_int, p_ext


def _check_probes(image: DiscreteBoundary, outer: DiscreteBoundary,
                  probes_interior, probes_exterior, s: float, partial):
    if len(probes_interior) and not np.all(contains_points(image, probes_interior)):
        raise BranchError(f"interior probe leaves the inclusion at s = {s:g}",
                          partial, s)
    if len(probes_exterior):
        ok = (contains_points(outer, probes_exterior)
              & ~contains_points(image, probes_exterior))
        if not np.all(ok):
            raise BranchError(f"exterior probe leaves the annular region at s = {s:g}",
                              partial, s)


def continue_branch(family: ShapeFamily, steps: int, data: TransmissionData,
                    outer: DiscreteBoundary, inner: DiscreteBoundary,
                    s_max: float, probes_interior=(), probes_exterior=(),
                    tol: float = 1e-10, predictor_order: int = 1,
                    solver_max_iter: int = 100) -> List[BranchPoint]:
    """Walk the branch over a uniform s-grid of ``steps`` + 1 points.

    The first point reuses the unperturbed solver; later points warm-start
    from a linear extrapolation of the two previous solutions (or the
    previous solution for ``predictor_order`` = 0).  A failed correction is
    retried once through a half-step before aborting with the partial
    branch attached.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    probes_interior = np.atleast_2d(np.asarray(probes_interior, dtype=float)) \
        if len(probes_interior) else np.zeros((0, 2))
    probes_exterior = np.atleast_2d(np.asarray(probes_exterior, dtype=float)) \
        if len(probes_exterior) else np.zeros((0, 2))

    branch: List[BranchPoint] = []
    ds0, _ = solve_unperturbed(data, outer, inner, method="hybrid", tol=tol,
                               max_iter=solver_max_iter)
    system0 = TransmissionSystem(data, outer, inner)
    _check_probes(inner, outer, probes_interior, probes_exterior, 0.0, [])
    p_int, p_ext = _probe_values(ds0, outer, inner, probes_interior,
                                 probes_exterior)
    branch.append(BranchPoint(s=0.0, densities=ds0,
                              residual_norm=system0.residual_norm(ds0),
                              probe_interior=p_int, probe_exterior=p_ext,
                              inner_boundary=inner))
    if steps == 0:
        return branch

    s_grid = np.linspace(0.0, s_max, steps + 1)
    for s in s_grid[1:]:
        if predictor_order >= 1 and len(branch) >= 2:
            x_prev, x_prev2 = branch[-1], branch[-2]
            w = (s - x_prev2.s) / (x_prev.s - x_prev2.s)
            vec = (1 - w) * x_prev2.densities.as_vector() \
                + w * x_prev.densities.as_vector()
            guess = density_set_from_vector(vec, outer,
                                            branch[-1].densities.mu_i.boundary)
        else:
            guess = branch[-1].densities

        phi = family.shape_at(float(s))
        try:
            ds, _ = solve_at_shape(phi, guess, data, outer, tol=tol)
        except ShapeSolveError:
            s_mid = 0.5 * (branch[-1].s + s)
            try:
                mid_ds, _ = solve_at_shape(family.shape_at(s_mid),
                                           branch[-1].densities, data, outer,
                                           tol=tol)
                ds, _ = solve_at_shape(phi, mid_ds, data, outer, tol=tol)
            except ShapeSolveError as exc:
                raise BranchError(f"corrector failed at s = {s:g}: {exc}",
                                  branch, float(s)) from exc

        image = phi.discretize_image(inner.n)
        vr = validate_shape(phi, outer)
        if not vr.valid:
            raise BranchError(f"shape invalid at s = {s:g}", branch, float(s))
        _check_probes(image, outer, probes_interior, probes_exterior, float(s),
                      branch)
        t = image.params
        reference = np.asarray(family.base.position(t), dtype=float)
        res = TransmissionSystem(data, outer, image,
                                 reference_nodes=reference).residual_norm(ds)
        p_int, p_ext = _probe_values(ds, outer, image, probes_interior,
                                     probes_exterior)
        branch.append(BranchPoint(s=float(s), densities=ds, residual_norm=res,
                                  probe_interior=p_int, probe_exterior=p_ext,
                                  inner_boundary=image))
    return branch


# central stencils, all second-order accurate in the spacing
_STENCILS = {
    1: ({1: 0.5, -1: -0.5}, 1),
    2: ({1: 1.0, 0: -2.0, -1: 1.0}, 2),
    3: ({2: 0.5, 1: -1.0, -1: 1.0, -2: -0.5}, 3),
    4: ({2: 1.0, 1: -4.0, 0: 6.0, -1: -4.0, -2: 1.0}, 4),
}


def _fd_estimate(values, center, order, stride, h):
    stencil, power = _STENCILS[order]
    acc = 0.0
    for off, c in stencil.items():
        acc += c * values[center + off * stride]
    return acc / (stride * h) ** power


@dataclass(frozen=True)
class OrderDiagnostic:
    """Derivative estimates at three spacings and their Richardson ratios."""

    order: int
    centers: np.ndarray
    d_h: np.ndarray
    d_2h: np.ndarray
    d_4h: np.ndarray
    ratios: np.ndarray


def smoothness_probe(branch: List[BranchPoint], probe_index: int,
                     max_order: int = 4,
                     use_exterior: bool = False) -> Dict[int, OrderDiagnostic]:
    """Parameter-derivative diagnostics of one probe value along the branch.

    For each order up to ``max_order`` the derivative is estimated at
    spacings h, 2h, 4h around every feasible grid point; the ratio
    (D_4h - D_2h) / (D_2h - D_h) sits near 4 when the branch depends
    smoothly on the parameter, and leaves [2, 8] at tampered points.
    """
    if not 1 <= max_order <= 4:
        raise ValueError("max_order must be between 1 and 4")
    values = np.array([
        (bp.probe_exterior if use_exterior else bp.probe_interior)[probe_index]
        for bp in branch
    ])
    n = len(values)
    s_vals = np.array([bp.s for bp in branch])
    if n < 2 * max_order + 1:
        raise ValueError("branch grid too short for the requested order")
    diffs = np.diff(s_vals)
    if np.max(np.abs(diffs - diffs[0])) > 1e-12 * max(abs(s_vals[-1]), 1.0):
        raise ValueError("smoothness probe needs a uniform parameter grid")
    h = float(diffs[0])

    out: Dict[int, OrderDiagnostic] = {}
    for order in range(1, max_order + 1):
        reach = 4 * max(abs(o) for o in _STENCILS[order][0])
        centers = np.arange(reach, n - reach)
        if centers.size == 0:
            raise ValueError(f"branch grid too short for order {order} "
                             "at three spacings")
        d1 = np.array([_fd_estimate(values, c, order, 1, h) for c in centers])
        d2 = np.array([_fd_estimate(values, c, order, 2, h) for c in centers])
        d4 = np.array([_fd_estimate(values, c, order, 4, h) for c in centers])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = (d4 - d2) / (d2 - d1)
        out[order] = OrderDiagnostic(order=order, centers=centers,
                                     d_h=d1, d_2h=d2, d_4h=d4, ratios=ratios)
    return out
