"""Boundary nonlinearities, Picard/Newton solvers, and field reconstruction.

The interface data consists of two nonlinearities F1, F2 in the interface
point and the two boundary traces, their user-supplied partial derivatives
in the trace arguments, and the outer Neumann datum f_o.  The solvers
iterate on the quintuple of layer densities and constants; the fixed-point
map applies the inverse of the bordered operator built from a frozen
coefficient matrix, while Newton re-linearizes the coefficient at the
current traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .expressions import ExpressionFn
from .geometry import DiscreteBoundary, contains_points
from .operators import (
    BlockOperator,
    DensitySet,
    MatrixField,
    OperatorError,
    assemble_JA,
    density_set_from_vector,
    solve_JA,
    zero_density_set,
)
from .potential import (
    BoundaryDensity,
    normal_grad_matrix,
    single_layer_matrix,
    trace_V_matrix,
    wstar_matrix,
)


class NonlinearError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Carries the residual trace of a failed solve."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def _as_fn(source, variables):
    if isinstance(source, ExpressionFn):
        return source
    return ExpressionFn(source, variables)


_F_VARS = ("x1", "x2", "z1", "z2")


@dataclass(frozen=True)
class TransmissionData:
    """Interface nonlinearities, their trace derivatives, and the Neumann datum."""

    F1: ExpressionFn
    F2: ExpressionFn
    dF1_dz1: ExpressionFn
    dF1_dz2: ExpressionFn
    dF2_dz1: ExpressionFn
    dF2_dz2: ExpressionFn
    f_o: ExpressionFn

    @staticmethod
    def from_sources(F1, F2, dF1_dz1, dF1_dz2, dF2_dz1, dF2_dz2, f_o,
                     validate: bool = True, seed: int = 0) -> "TransmissionData":
        data = TransmissionData(
            F1=_as_fn(F1, _F_VARS), F2=_as_fn(F2, _F_VARS),
            dF1_dz1=_as_fn(dF1_dz1, _F_VARS), dF1_dz2=_as_fn(dF1_dz2, _F_VARS),
            dF2_dz1=_as_fn(dF2_dz1, _F_VARS), dF2_dz2=_as_fn(dF2_dz2, _F_VARS),
            f_o=_as_fn(f_o, ("x1", "x2")),
        )
        if validate:
            data.validate_derivatives(seed=seed)
        return data

    def validate_derivatives(self, seed: int = 0, samples: int = 100):
        """Check each supplied derivative against a central finite difference."""
        rng = np.random.default_rng(seed)
        theta = rng.uniform(0.0, 2 * np.pi, samples)
        x1, x2 = np.cos(theta), np.sin(theta)
        z1 = rng.uniform(-2.0, 2.0, samples)
        z2 = rng.uniform(-2.0, 2.0, samples)
        h = 1e-6
        pairs = [
            (self.F1, self.dF1_dz1, "z1", "dF1_dz1"),
            (self.F1, self.dF1_dz2, "z2", "dF1_dz2"),
            (self.F2, self.dF2_dz1, "z1", "dF2_dz1"),
            (self.F2, self.dF2_dz2, "z2", "dF2_dz2"),
        ]
        for fn, dfn, var, name in pairs:
            args = {"x1": x1, "x2": x2, "z1": z1, "z2": z2}
            hi = dict(args)
            lo = dict(args)
            hi[var] = args[var] + h
            lo[var] = args[var] - h
            fd = (np.asarray(fn(**hi), dtype=float)
                  - np.asarray(fn(**lo), dtype=float)) / (2 * h)
            claimed = np.broadcast_to(np.asarray(dfn(**args), dtype=float), fd.shape)
            scale = 1.0 + np.abs(fd)
            err = np.max(np.abs(claimed - fd) / scale)
            if not np.isfinite(err) or err > 1e-6:
                raise NonlinearError(
                    f"{name} disagrees with finite differences of its parent "
                    f"(max relative deviation {err:.3e})")


def nemytskii_apply(F: ExpressionFn, nodes, h1, h2) -> np.ndarray:
    """Pointwise F(x_j, h1_j, h2_j) over interface points ``nodes``."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    h1 = np.broadcast_to(np.asarray(h1, dtype=float), (len(nodes),))
    h2 = np.broadcast_to(np.asarray(h2, dtype=float), (len(nodes),))
    out = np.asarray(
        F(x1=nodes[:, 0], x2=nodes[:, 1], z1=h1, z2=h2), dtype=float)
    out = np.broadcast_to(out, (len(nodes),)).copy()
    bad = np.nonzero(~np.isfinite(out))[0]
    if bad.size:
        raise NonlinearError(
            f"nonlinearity produced a non-finite value at node {bad[0]}")
    return out


def linearization_matrix(data: TransmissionData, nodes, alpha1, alpha2) -> MatrixField:
    """Coefficient matrix of the trace derivatives of (F1, F2) at given traces."""
    return MatrixField(
        a11=nemytskii_apply(data.dF1_dz1, nodes, alpha1, alpha2),
        a12=nemytskii_apply(data.dF1_dz2, nodes, alpha1, alpha2),
        a21=nemytskii_apply(data.dF2_dz1, nodes, alpha1, alpha2),
        a22=nemytskii_apply(data.dF2_dz2, nodes, alpha1, alpha2),
    )


@dataclass(frozen=True)
class GrowthReport:
    """Sampled sublinear-growth evidence for F - A*zeta (heuristic only)."""

    slope: float
    intercept: float
    max_residual: float
    passes: bool


def check_growth(data: TransmissionData, A: MatrixField, nodes,
                 sample_radius: float = 50.0) -> GrowthReport:
    """Fit log|F(x, z) - A(x) z| against log(1 + |z1| + |z2|) on a radial grid."""
    if sample_radius <= 0:
        raise NonlinearError("sample_radius must be positive")
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    radii = np.geomspace(10.0, max(sample_radius, 1000.0), 24)
    angles = np.linspace(0.0, 2 * np.pi, 16, endpoint=False)
    sizes, residuals = [], []
    for r in radii:
        worst = 0.0
        for a in angles:
            z1, z2 = r * np.cos(a), r * np.sin(a)
            r1 = nemytskii_apply(data.F1, nodes, z1, z2) - (A.a11 * z1 + A.a12 * z2)
            r2 = nemytskii_apply(data.F2, nodes, z1, z2) - (A.a21 * z1 + A.a22 * z2)
            worst = max(worst, float(np.max(np.hypot(r1, r2))))
        # fit against the worst direction per magnitude; per-direction
        # samples would contaminate the slope with zero-residual rays
        residuals.append(worst)
        sizes.append(1.0 + r)
    residuals = np.asarray(residuals)
    sizes = np.asarray(sizes)
    max_residual = float(residuals.max())
    keep = residuals > 1e-300
    if not np.any(keep):
        return GrowthReport(slope=0.0, intercept=-np.inf,
                            max_residual=0.0, passes=True)
    slope, intercept = np.polyfit(np.log(sizes[keep]), np.log(residuals[keep]), 1)
    return GrowthReport(slope=float(slope), intercept=float(intercept),
                        max_residual=max_residual, passes=bool(slope < 1.05))


class TransmissionSystem:
    """Discrete nonlinear transmission system on a fixed boundary pair.

    ``inner`` may be the discretization of a perturbed interface; the
    nonlinearities are always evaluated at ``reference_nodes`` (defaulting
    to the inner nodes themselves), so they ride along with the shape.
    """

    def __init__(self, data: TransmissionData, outer: DiscreteBoundary,
                 inner: DiscreteBoundary, reference_nodes=None):
        self.data = data
        self.outer = outer
        self.inner = inner
        if reference_nodes is None:
            reference_nodes = inner.nodes
        self.reference_nodes = np.asarray(reference_nodes, dtype=float)
        if self.reference_nodes.shape != inner.nodes.shape:
            raise NonlinearError("reference nodes must match the inner node count")

        self._wstar_o = wstar_matrix(outer)
        self._wstar_i = wstar_matrix(inner)
        self._v_i = trace_V_matrix(inner)
        self._grad_io = normal_grad_matrix(inner, outer.nodes, outer.normals)
        self._grad_oi = normal_grad_matrix(outer, inner.nodes, inner.normals)
        self._p_oi = single_layer_matrix(outer, inner.nodes)
        self._f_o = np.broadcast_to(np.asarray(
            data.f_o(x1=outer.nodes[:, 0], x2=outer.nodes[:, 1]), dtype=float),
            (outer.n,)).copy()

        zeros = np.zeros(inner.n)
        self.A0 = linearization_matrix(data, self.reference_nodes, zeros, zeros)
        self._J0: Optional[BlockOperator] = None

    @property
    def J0(self) -> BlockOperator:
        if self._J0 is None:
            self._J0 = assemble_JA(self.outer, self.inner, self.A0)
        return self._J0

    def zero(self) -> DensitySet:
        return zero_density_set(self.outer, self.inner)

    def traces(self, ds: DensitySet):
        """Inner-boundary traces (alpha1, alpha2) of the two represented fields."""
        alpha1 = self._p_oi @ ds.mu_o.values + self._v_i @ ds.mu_i.values + ds.rho_o
        alpha2 = self._v_i @ ds.eta_i.values + ds.rho_i
        return alpha1, alpha2

    def residual(self, ds: DensitySet) -> np.ndarray:
        """Stacked residual of the three integral-equation rows."""
        alpha1, alpha2 = self.traces(ds)
        r1 = (self._wstar_o @ ds.mu_o.values - 0.5 * ds.mu_o.values
              + self._grad_io @ ds.mu_i.values - self._f_o)
        r2 = (self._wstar_i @ ds.mu_i.values + 0.5 * ds.mu_i.values
              + self._grad_oi @ ds.mu_o.values
              - nemytskii_apply(self.data.F1, self.reference_nodes, alpha1, alpha2))
        r3 = (self._wstar_i @ ds.eta_i.values - 0.5 * ds.eta_i.values
              - nemytskii_apply(self.data.F2, self.reference_nodes, alpha1, alpha2))
        return np.concatenate([r1, r2, r3])

    def residual_norm(self, ds: DensitySet) -> float:
        return float(np.max(np.abs(self.residual(ds))))

    def picard_step(self, ds: DensitySet) -> DensitySet:
        """One application of the fixed-point map with frozen coefficient A0."""
        alpha1, alpha2 = self.traces(ds)
        f1 = nemytskii_apply(self.data.F1, self.reference_nodes, alpha1, alpha2)
        f2 = nemytskii_apply(self.data.F2, self.reference_nodes, alpha1, alpha2)
        a = self.A0
        rhs = np.concatenate([
            self._f_o,
            f1 - (a.a11 * alpha1 + a.a12 * alpha2),
            f2 - (a.a21 * alpha1 + a.a22 * alpha2),
        ])
        return solve_JA(self.J0, rhs)

    def newton_step(self, ds: DensitySet):
        """One Newton update; returns (new state, correction norm)."""
        alpha1, alpha2 = self.traces(ds)
        a = linearization_matrix(self.data, self.reference_nodes, alpha1, alpha2)
        jac = assemble_JA(self.outer, self.inner, a)
        delta = solve_JA(jac, -self.residual(ds))
        x = ds.as_vector() + delta.as_vector()
        new = density_set_from_vector(x, self.outer, self.inner)
        return new, delta.norm()

    def solve(self, method: str = "hybrid", tol: float = 1e-10,
              max_iter: int = 100, damping: float = 1.0,
              guess: Optional[DensitySet] = None,
              switch_tol: float = 1e-3):
        """Drive the iteration to residual max-norm below ``tol``.

        Returns (solution, trace) with trace rows (iteration, residual
        norm, step norm, phase).  Raises :class:`ConvergenceError` with
        the trace attached when ``max_iter`` is exhausted.
        """
        if method not in ("picard", "newton", "hybrid"):
            raise NonlinearError(f"unknown method {method!r}")
        ds = guess if guess is not None else self.zero()
        trace = []
        res = self.residual_norm(ds)
        trace.append((0, res, 0.0, "start"))
        if res <= tol:
            return ds, trace

        phase = "newton" if method == "newton" else "picard"
        for it in range(1, max_iter + 1):
            try:
                if phase == "picard":
                    nxt = self.picard_step(ds)
                    if damping != 1.0:
                        x = (1 - damping) * ds.as_vector() + damping * nxt.as_vector()
                        nxt = density_set_from_vector(x, self.outer, self.inner)
                    step = float(np.max(np.abs(nxt.as_vector() - ds.as_vector())))
                    ds = nxt
                    if method == "hybrid" and step < switch_tol:
                        phase = "newton"
                else:
                    ds, step = self.newton_step(ds)
                res = self.residual_norm(ds)
            except (NonlinearError, OperatorError) as exc:
                # blown-up iterates or a singular (re)linearized system are
                # divergence, not a malformed problem
                raise ConvergenceError(
                    f"iteration diverged at step {it}: {exc}", trace) from exc
            trace.append((it, res, step, phase))
            if res <= tol:
                return ds, trace
        raise ConvergenceError(
            f"no convergence after {max_iter} iterations "
            f"(residual {res:.3e}, tol {tol:.1e})", trace)


def solve_unperturbed(data: TransmissionData, outer: DiscreteBoundary,
                      inner: DiscreteBoundary, method: str = "hybrid",
                      tol: float = 1e-10, max_iter: int = 100,
                      damping: float = 1.0, guess: Optional[DensitySet] = None):
    """Solve the transmission system on the reference geometry."""
    system = TransmissionSystem(data, outer, inner)
    return system.solve(method=method, tol=tol, max_iter=max_iter,
                        damping=damping, guess=guess)


@dataclass(frozen=True)
class HarmonicPair:
    """Point evaluators for the two harmonic fields of a density quintuple."""

    densities: DensitySet
    outer: DiscreteBoundary = field(repr=False)
    inner: DiscreteBoundary = field(repr=False)

    def classify(self, points) -> np.ndarray:
        """'outer' in the annular region, 'inner' in the inclusion, 'skip' near/outside."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        in_outer = contains_points(self.outer, points)
        in_inner = contains_points(self.inner, points)
        out = np.full(len(points), "skip", dtype=object)
        out[in_outer & ~in_inner] = "outer"
        out[in_inner] = "inner"
        return out

    def u_o(self, points) -> np.ndarray:
        """Exterior field: outer layer + inner layer + rho_o, on the annular region."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        region = self.classify(points)
        bad = np.nonzero(region != "outer")[0]
        if bad.size:
            raise NonlinearError(
                f"point {points[bad[0]]} lies in region {region[bad[0]]!r}, "
                "not in the annular region")
        return (single_layer_matrix(self.outer, points) @ self.densities.mu_o.values
                + single_layer_matrix(self.inner, points) @ self.densities.mu_i.values
                + self.densities.rho_o)

    def u_i(self, points) -> np.ndarray:
        """Interior field: inner layer + rho_i, on the inclusion."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        region = self.classify(points)
        bad = np.nonzero(region != "inner")[0]
        if bad.size:
            raise NonlinearError(
                f"point {points[bad[0]]} lies in region {region[bad[0]]!r}, "
                "not in the inclusion")
        return (single_layer_matrix(self.inner, points) @ self.densities.eta_i.values
                + self.densities.rho_i)


def reconstruct_solution(densities: DensitySet, outer: DiscreteBoundary,
                         inner: DiscreteBoundary) -> HarmonicPair:
    """Wrap a density quintuple in field evaluators on the two regions."""
    return HarmonicPair(densities=densities, outer=outer, inner=inner)
