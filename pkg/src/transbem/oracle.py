"""Closed-form references for circles: Fourier-mode solves and fixtures.

Everything here is derived from circular-harmonic expansions only; no
quadrature code is shared with the operator modules, so agreement between
the two paths is genuine evidence.  On a circle of radius R the boundary
trace of the single layer acts diagonally on trigonometric modes and the
adjoint double layer reduces to an average, which collapses the coupled
transmission system to small per-mode linear systems for concentric
geometry and constant coefficient matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .geometry import DiscreteBoundary
from .nonlinear import TransmissionData
from .operators import DensitySet
from .potential import BoundaryDensity


class OracleError(ValueError):
    pass


def fourier_V_eigenvalue(R: float, k: int) -> float:
    """Eigenvalue of the single layer trace on a radius-R circle for mode k."""
    if R <= 0:
        raise OracleError("radius must be positive")
    if k == 0:
        return R * math.log(R)
    return -R / (2 * abs(k))


@dataclass(frozen=True)
class ConcentricSolution:
    """Per-mode density coefficients and field evaluators on concentric circles.

    ``modes[k]`` holds ((mu_o, mu_i, eta), cos and sin parts) for mode k >= 1;
    mode 0 lives in ``mu_i_0`` plus the two constants (the mean constraints
    force the mode-0 parts of mu_o and eta to vanish).
    """

    R_i: float
    R_o: float
    A: np.ndarray = field(repr=False)
    modes: Dict[int, Tuple[np.ndarray, np.ndarray]] = field(repr=False)
    mu_i_0: float = 0.0
    rho_o: float = 0.0
    rho_i: float = 0.0
    compatibility_defect: float = 0.0

    def _sum_modes(self, select, r, theta):
        out = np.zeros_like(r)
        for k, (cos_part, sin_part) in self.modes.items():
            out += select(k, cos_part) * np.cos(k * theta)
            out += select(k, sin_part) * np.sin(k * theta)
        return out

    def u_o(self, points) -> np.ndarray:
        """Annulus field from the interior outer expansion + exterior inner one."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.hypot(points[:, 0], points[:, 1])
        theta = np.arctan2(points[:, 1], points[:, 0])
        if np.any(r <= self.R_i) or np.any(r >= self.R_o):
            raise OracleError("point outside the open annulus")
        out = self.rho_o + self.mu_i_0 * self.R_i * np.log(r)

        def term(k, coeffs):
            mu_o_k, mu_i_k, _ = coeffs
            return (mu_o_k * (-self.R_o / (2 * k)) * (r / self.R_o) ** k
                    + mu_i_k * (-self.R_i / (2 * k)) * (self.R_i / r) ** k)

        return out + self._sum_modes(term, r, theta)

    def u_i(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.hypot(points[:, 0], points[:, 1])
        theta = np.arctan2(points[:, 1], points[:, 0])
        if np.any(r >= self.R_i):
            raise OracleError("point outside the open inclusion")

        def term(k, coeffs):
            return coeffs[2] * (-self.R_i / (2 * k)) * (r / self.R_i) ** k

        return self.rho_i + self._sum_modes(term, r, theta)

    def densities_on(self, outer: DiscreteBoundary,
                     inner: DiscreteBoundary) -> DensitySet:
        """Sample the coefficient solution at the nodes of discrete circles."""
        t_o, t_i = outer.params, inner.params
        mu_o = np.zeros(outer.n)
        mu_i = np.full(inner.n, self.mu_i_0)
        eta = np.zeros(inner.n)
        for k, (cos_part, sin_part) in self.modes.items():
            mu_o += cos_part[0] * np.cos(k * t_o) + sin_part[0] * np.sin(k * t_o)
            mu_i += cos_part[1] * np.cos(k * t_i) + sin_part[1] * np.sin(k * t_i)
            eta += cos_part[2] * np.cos(k * t_i) + sin_part[2] * np.sin(k * t_i)
        return DensitySet(
            mu_o=BoundaryDensity(outer, mu_o),
            mu_i=BoundaryDensity(inner, mu_i),
            eta_i=BoundaryDensity(inner, eta),
            rho_o=self.rho_o, rho_i=self.rho_i,
        )


def concentric_linear_solve(R_i: float, R_o: float, A,
                            f_o_modes: Dict[int, Tuple[float, float]]
                            ) -> ConcentricSolution:
    """Direct mode-by-mode solve of the linear transmission system.

    ``f_o_modes[k] = (cos coefficient, sin coefficient)`` of the outer
    Neumann datum; the interface rows are homogeneous (linear interface
    law equal to A times the traces).
    """
    if not (0 < R_i < R_o):
        raise OracleError("radii must satisfy 0 < R_i < R_o")
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2):
        raise OracleError("A must be a constant 2x2 matrix")

    modes: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
    mu_i_0 = rho_o = rho_i = 0.0
    compat = 0.0
    for k in sorted(f_o_modes):
        g1c, g1s = f_o_modes[k]
        if k < 0:
            raise OracleError("modes are indexed by k >= 0")
        if k == 0:
            compat = 2 * math.pi * R_o * g1c
            mu_i_0 = g1c * R_o / R_i
            lam0 = R_i * math.log(R_i)
            # row2_0: mu_i_0 - A11 (lam0 mu_i_0 + rho_o) - A12 rho_i = 0
            # row3_0:        - A21 (lam0 mu_i_0 + rho_o) - A22 rho_i = 0
            rhs = np.array([
                -mu_i_0 + A[0, 0] * lam0 * mu_i_0,
                A[1, 0] * lam0 * mu_i_0,
            ])
            try:
                sol = np.linalg.solve(-A, rhs)
            except np.linalg.LinAlgError as exc:
                raise OracleError("mode 0 constant system singular "
                                  "(A not invertible)") from exc
            rho_o, rho_i = float(sol[0]), float(sol[1])
            continue

        lam_i = -R_i / (2 * k)
        ratio = R_i / R_o
        g_io = 0.5 * ratio ** (k + 1)
        g_oi = -0.5 * ratio ** (k - 1)
        p_oi = -(R_o / (2 * k)) * ratio**k
        m = np.array([
            [-0.5, g_io, 0.0],
            [g_oi - A[0, 0] * p_oi, 0.5 - A[0, 0] * lam_i, -A[0, 1] * lam_i],
            [-A[1, 0] * p_oi, -A[1, 0] * lam_i, -0.5 - A[1, 1] * lam_i],
        ])
        try:
            cos_part = np.linalg.solve(m, np.array([g1c, 0.0, 0.0]))
            sin_part = np.linalg.solve(m, np.array([g1s, 0.0, 0.0]))
        except np.linalg.LinAlgError as exc:
            raise OracleError(f"mode {k} system singular") from exc
        modes[k] = (cos_part, sin_part)

    return ConcentricSolution(R_i=R_i, R_o=R_o, A=A, modes=modes,
                              mu_i_0=mu_i_0, rho_o=rho_o, rho_i=rho_i,
                              compatibility_defect=compat)


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact affine-interface fixture on the concentric circles (1, 2)."""

    data: TransmissionData
    R_i: float
    R_o: float
    A: np.ndarray = field(repr=False)

    def u_o(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        r2 = points[:, 0] ** 2 + points[:, 1] ** 2
        return points[:, 0] * (1.0 + 1.0 / r2)

    def u_i(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return points[:, 0].copy()

    def exact_densities(self, outer: DiscreteBoundary,
                        inner: DiscreteBoundary) -> DensitySet:
        return DensitySet(
            mu_o=BoundaryDensity(outer, -2.0 * np.cos(outer.params)),
            mu_i=BoundaryDensity(inner, -2.0 * np.cos(inner.params)),
            eta_i=BoundaryDensity(inner, -2.0 * np.cos(inner.params)),
            rho_o=0.0, rho_i=0.0,
        )


def manufactured_affine_case() -> ManufacturedCase:
    """Affine interface data whose exact solution is known in closed form.

    On radii (1, 2): the annulus field is x1 (1 + 1/|x|^2), the inclusion
    field is x1.  Traces on the unit circle are then (2 x1, x1) with
    normal derivatives (0, x1), so the affine laws z1 - 2 x1 and
    -z2 + 2 x1 hold identically and linearize to ((1, 0), (0, -1)).
    """
    data = TransmissionData.from_sources(
        F1="z1 - 2*x1", F2="-z2 + 2*x1",
        dF1_dz1="1", dF1_dz2="0", dF2_dz1="0", dF2_dz2="-1",
        f_o="(3/8)*x1",
    )
    return ManufacturedCase(data=data, R_i=1.0, R_o=2.0,
                            A=np.array([[1.0, 0.0], [0.0, -1.0]]))


def mean_value_check(evaluator, center, radius: float, samples: int = 64) -> float:
    """|circle average - center value| of a field; zero for harmonic fields."""
    if radius <= 0 or samples < 4:
        raise OracleError("need radius > 0 and samples >= 4")
    center = np.asarray(center, dtype=float)
    t = 2 * np.pi * np.arange(samples) / samples
    ring = center[None, :] + radius * np.stack([np.cos(t), np.sin(t)], axis=-1)
    ring_mean = float(np.mean(np.asarray(evaluator(ring), dtype=float)))
    center_val = float(np.asarray(evaluator(center[None, :]), dtype=float)[0])
    return abs(ring_mean - center_val)
