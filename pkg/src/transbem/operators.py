"""Bordered block operator coupling the two boundaries, and its direct solver.

The unknown is the quintuple (mu_o, mu_i, eta_i, rho_o, rho_i): an outer
density with zero arclength mean, a free inner density, an inner density
with zero mean against the (possibly perturbed) inner arclength, and two
constants.  The square system stacks the three integral-equation rows with
two unit-normalized mean constraint rows, which keeps rho_o and rho_i as
first-class unknowns instead of eliminating subspaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lapack, lu_factor, lu_solve

from .geometry import DiscreteBoundary
from .potential import (
    BoundaryDensity,
    normal_grad_matrix,
    single_layer_matrix,
    trace_V_matrix,
    wstar_matrix,
)

COND_LIMIT = 1e12


class OperatorError(ValueError):
    pass


@dataclass(frozen=True)
class DensitySet:
    """The five solution components of the transmission integral system."""

    mu_o: BoundaryDensity
    mu_i: BoundaryDensity
    eta_i: BoundaryDensity
    rho_o: float
    rho_i: float

    def as_vector(self):
        return np.concatenate([
            self.mu_o.values, self.mu_i.values, self.eta_i.values,
            [self.rho_o, self.rho_i],
        ])

    def norm(self):
        return float(np.max(np.abs(self.as_vector())))

    def constraint_defects(self):
        """Weighted means of mu_o and eta_i (both should vanish)."""
        return (self.mu_o.weighted_mean(), self.eta_i.weighted_mean())


def density_set_from_vector(x, outer: DiscreteBoundary, inner: DiscreteBoundary,
                            mean_zero: bool = False) -> DensitySet:
    n_o, n_i = outer.n, inner.n
    if len(x) != n_o + 2 * n_i + 2:
        raise OperatorError("vector length does not match boundary sizes")
    return DensitySet(
        mu_o=BoundaryDensity(outer, x[:n_o], mean_zero=mean_zero),
        mu_i=BoundaryDensity(inner, x[n_o:n_o + n_i]),
        eta_i=BoundaryDensity(inner, x[n_o + n_i:n_o + 2 * n_i], mean_zero=mean_zero),
        rho_o=float(x[-2]),
        rho_i=float(x[-1]),
    )


def zero_density_set(outer: DiscreteBoundary, inner: DiscreteBoundary) -> DensitySet:
    return density_set_from_vector(
        np.zeros(outer.n + 2 * inner.n + 2), outer, inner)


@dataclass(frozen=True)
class MatrixField:
    """Node samples of a 2x2 matrix-valued coefficient on the inner boundary."""

    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray

    def __post_init__(self):
        for name in ("a11", "a12", "a21", "a22"):
            v = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, v)
            if not np.all(np.isfinite(v)):
                raise OperatorError(f"non-finite entries in {name}")
        if not (len(self.a11) == len(self.a12) == len(self.a21) == len(self.a22)):
            raise OperatorError("entry arrays must share one length")

    @staticmethod
    def constant(matrix, n: int) -> "MatrixField":
        (a11, a12), (a21, a22) = matrix
        ones = np.ones(n)
        return MatrixField(a11 * ones, a12 * ones, a21 * ones, a22 * ones)

    @property
    def n(self):
        return len(self.a11)


@dataclass(frozen=True)
class AdmissibilityReport:
    entries_finite: bool
    semidefinite: bool
    no_constant_kernel: bool
    min_eigenvalue: float
    min_singular_value: float

    @property
    def admissible(self):
        return self.entries_finite and self.semidefinite and self.no_constant_kernel


def check_A_conditions(A: MatrixField, inner: DiscreteBoundary) -> AdmissibilityReport:
    """Pointwise admissibility of the coefficient matrix.

    The sign-flipped matrix ((a11, a12), (-a21, -a22)) must have positive
    semidefinite symmetric part at every node, and no nonzero constant
    vector may be annihilated by A at all nodes simultaneously.
    """
    if A.n != inner.n:
        raise OperatorError("coefficient samples do not match the boundary")
    finite = True  # MatrixField construction already enforces this

    # symmetric part of ((a11, a12), (-a21, -a22)) per node
    off = 0.5 * (A.a12 - A.a21)
    sym11, sym22 = A.a11, -A.a22
    # eigenvalues of ((sym11, off), (off, sym22))
    mean = 0.5 * (sym11 + sym22)
    rad = np.sqrt((0.5 * (sym11 - sym22)) ** 2 + off**2)
    min_eig = float(np.min(mean - rad))
    semidefinite = min_eig >= -1e-12

    stacked = np.empty((2 * A.n, 2))
    stacked[0::2, 0], stacked[0::2, 1] = A.a11, A.a12
    stacked[1::2, 0], stacked[1::2, 1] = A.a21, A.a22
    min_sv = float(np.linalg.svd(stacked, compute_uv=False)[-1])
    no_kernel = min_sv > 1e-10

    return AdmissibilityReport(
        entries_finite=finite, semidefinite=semidefinite,
        no_constant_kernel=no_kernel,
        min_eigenvalue=min_eig, min_singular_value=min_sv,
    )


@dataclass(frozen=True)
class BlockOperator:
    """Dense bordered system of size (n_o + 2 n_i + 2)."""

    matrix: np.ndarray
    outer: DiscreteBoundary = field(repr=False)
    inner: DiscreteBoundary = field(repr=False)
    A: MatrixField = field(repr=False)

    @property
    def size(self):
        return self.matrix.shape[0]

    @property
    def slices(self):
        n_o, n_i = self.outer.n, self.inner.n
        return {
            "mu_o": slice(0, n_o),
            "mu_i": slice(n_o, n_o + n_i),
            "eta_i": slice(n_o + n_i, n_o + 2 * n_i),
            "rho": slice(n_o + 2 * n_i, n_o + 2 * n_i + 2),
        }

    def apply(self, densities: DensitySet) -> np.ndarray:
        """Integral-equation rows only (constraint rows excluded)."""
        full = self.matrix @ densities.as_vector()
        return full[: self.outer.n + 2 * self.inner.n]

    def apply_full(self, densities: DensitySet) -> np.ndarray:
        return self.matrix @ densities.as_vector()


def assemble_JA(outer: DiscreteBoundary, inner: DiscreteBoundary,
                A: MatrixField) -> BlockOperator:
    """Build the bordered transmission operator for coefficient field ``A``.

    Rows: outer jump row with the cross gradient of the inner layer, then
    the two inner rows coupling jump operators, boundary traces and the
    A-weighted trace pair, then the two mean constraints (scaled to unit
    row norm so conditioning does not degrade with refinement).
    """
    n_o, n_i = outer.n, inner.n
    if A.n != n_i:
        raise OperatorError("coefficient samples do not match the inner boundary")

    gap = outer.nodes[:, None, :] - inner.nodes[None, :, :]
    min_gap = float(np.hypot(gap[..., 0], gap[..., 1]).min())
    # touching detector only; cross-quadrature accuracy is a refinement
    # question and is covered by the convergence study, not a hard guard
    band = max(outer.mesh_width, inner.mesh_width)
    if min_gap <= band:
        raise OperatorError(
            f"boundaries too close for plain quadrature: gap {min_gap:g} <= {band:g}")

    w_o = wstar_matrix(outer)
    w_i = wstar_matrix(inner)
    v_i = trace_V_matrix(inner)
    # traces/gradients of each layer evaluated across to the other boundary
    grad_io = normal_grad_matrix(inner, outer.nodes, outer.normals)
    grad_oi = normal_grad_matrix(outer, inner.nodes, inner.normals)
    p_oi = single_layer_matrix(outer, inner.nodes)

    size = n_o + 2 * n_i + 2
    m = np.zeros((size, size))
    s_mu_o = slice(0, n_o)
    s_mu_i = slice(n_o, n_o + n_i)
    s_eta = slice(n_o + n_i, n_o + 2 * n_i)
    eye_o = np.eye(n_o)
    eye_i = np.eye(n_i)
    ones = np.ones(n_i)

    r1 = slice(0, n_o)
    m[r1, s_mu_o] = -0.5 * eye_o + w_o
    m[r1, s_mu_i] = grad_io

    r2 = slice(n_o, n_o + n_i)
    m[r2, s_mu_o] = grad_oi - A.a11[:, None] * p_oi
    m[r2, s_mu_i] = 0.5 * eye_i + w_i - A.a11[:, None] * v_i
    m[r2, s_eta] = -A.a12[:, None] * v_i
    m[r2, -2] = -A.a11
    m[r2, -1] = -A.a12

    r3 = slice(n_o + n_i, n_o + 2 * n_i)
    m[r3, s_mu_o] = -A.a21[:, None] * p_oi
    m[r3, s_mu_i] = -A.a21[:, None] * v_i
    m[r3, s_eta] = -0.5 * eye_i + w_i - A.a22[:, None] * v_i
    m[r3, -2] = -A.a21
    m[r3, -1] = -A.a22

    m[-2, s_mu_o] = outer.weights / np.linalg.norm(outer.weights)
    m[-1, s_eta] = inner.weights / np.linalg.norm(inner.weights)

    return BlockOperator(matrix=m, outer=outer, inner=inner, A=A)


def solve_JA(J: BlockOperator, rhs) -> DensitySet:
    """Direct LU solve of the bordered system for a stacked right-hand side.

    ``rhs`` has length n_o + 2 n_i (the integral-equation rows); the
    constraint rows are homogeneous.  Raises when the 1-norm condition
    estimate exceeds 1e12.
    """
    rhs = np.asarray(rhs, dtype=float)
    n_rows = J.outer.n + 2 * J.inner.n
    if rhs.shape != (n_rows,):
        raise OperatorError(f"rhs must have shape ({n_rows},), got {rhs.shape}")

    full_rhs = np.concatenate([rhs, [0.0, 0.0]])
    with warnings.catch_warnings():
        # an exactly singular factor is caught by the rcond check below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(J.matrix)
    anorm = np.linalg.norm(J.matrix, 1)
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or rcond <= 0 or 1.0 / rcond > COND_LIMIT:
        est = np.inf if rcond <= 0 else 1.0 / rcond
        raise OperatorError(f"system numerically singular: condition estimate {est:.3e}")

    x = lu_solve((lu, piv), full_rhs)
    return density_set_from_vector(x, J.outer, J.inner, mean_zero=True)


def smallest_singular_value(J: BlockOperator) -> float:
    return float(np.linalg.svd(J.matrix, compute_uv=False)[-1])
