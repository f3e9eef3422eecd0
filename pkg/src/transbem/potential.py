"""Single layer potential, its boundary trace, and normal-derivative operators.

The trace operator splits the logarithmic kernel as

    (1/2pi) log|g(t)-g(s)|
        = (1/4pi) log(4 sin^2((t-s)/2)) + (1/4pi) log(|g(t)-g(s)|^2 / (4 sin^2((t-s)/2)))

and integrates the first factor with the classical periodic log-weight rule
(Martensen-Kussmaul / Kress weights), which is spectrally accurate for
smooth densities.  The adjoint double layer kernel extends continuously to
the diagonal on smooth curves; its limit there is kappa/(4pi) times the
speed, with kappa the signed curvature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import DiscreteBoundary


@dataclass(frozen=True)
class BoundaryDensity:
    """Node values of a density on a discrete boundary."""

    boundary: DiscreteBoundary
    values: np.ndarray
    mean_zero: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if len(values) != self.boundary.n:
            raise ValueError("density length does not match boundary node count")
        if not np.all(np.isfinite(values)):
            raise ValueError("density values must be finite")
        if self.mean_zero:
            w = self.boundary.weights
            defect = abs(float(w @ values))
            scale = float(np.sum(w)) * max(1.0, float(np.max(np.abs(values))))
            if defect > 1e-12 * scale:
                raise ValueError(f"density flagged mean-zero has weighted mean defect {defect:g}")

    def weighted_mean(self):
        return float(self.boundary.weights @ self.values)


def sphere_surface_measure(n: int) -> float:
    """(n-1)-dimensional measure of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def fundamental_solution(n: int, x) -> float:
    """Fundamental solution of the Laplacian in dimension ``n`` at ``x != 0``."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise ValueError("fundamental solution is singular at the origin")
    s_n = sphere_surface_measure(n)
    if n == 2:
        return math.log(r) / s_n
    return r ** (2 - n) / ((2 - n) * s_n)


def _log_weight_row(n: int) -> np.ndarray:
    """Quadrature values r(d_k) for the kernel log(4 sin^2(d/2)) on n nodes.

    r(d) = -(4pi/n) sum_{m=1}^{n/2-1} cos(m d)/m - (4pi/n^2) cos((n/2) d),
    evaluated at the grid differences d_k = 2pi k/n.  The full weight matrix
    is circulant in (i - j).
    """
    half = n // 2
    d = 2 * np.pi * np.arange(n) / n
    m = np.arange(1, half)
    row = -(4 * np.pi / n) * (np.cos(np.outer(d, m)) / m).sum(axis=1)
    row -= (4 * np.pi / n**2) * np.cos(half * d)
    return row


def trace_V_matrix(b: DiscreteBoundary) -> np.ndarray:
    """Dense matrix of the single layer boundary trace on ``b``."""
    n = b.n
    t = b.params
    diff = b.nodes[:, None, :] - b.nodes[None, :, :]
    r2 = diff[..., 0] ** 2 + diff[..., 1] ** 2

    dt = t[:, None] - t[None, :]
    sin2 = 4.0 * np.sin(dt / 2.0) ** 2
    np.fill_diagonal(r2, 1.0)
    np.fill_diagonal(sin2, 1.0)
    smooth = 0.25 / np.pi * np.log(r2 / sin2)
    np.fill_diagonal(smooth, 0.5 / np.pi * np.log(b.speeds))

    row = _log_weight_row(n)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    log_part = 0.25 / np.pi * row[idx]

    return (log_part + (2 * np.pi / n) * smooth) * b.speeds[None, :]


def wstar_matrix(b: DiscreteBoundary) -> np.ndarray:
    """Dense matrix of the adjoint double layer operator W* on ``b``."""
    n = b.n
    diff = b.nodes[:, None, :] - b.nodes[None, :, :]
    r2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    np.fill_diagonal(r2, 1.0)
    num = b.normals[:, None, 0] * diff[..., 0] + b.normals[:, None, 1] * diff[..., 1]
    kernel = num / (2 * np.pi * r2)
    np.fill_diagonal(kernel, b.curvatures / (4 * np.pi))
    return (2 * np.pi / n) * kernel * b.speeds[None, :]


def trace_V(b: DiscreteBoundary, mu: BoundaryDensity) -> BoundaryDensity:
    """Boundary trace of the single layer potential of ``mu``."""
    return BoundaryDensity(b, trace_V_matrix(b) @ mu.values)


def apply_Wstar(b: DiscreteBoundary, mu: BoundaryDensity) -> BoundaryDensity:
    return BoundaryDensity(b, wstar_matrix(b) @ mu.values)


def normal_derivative(side: str, b: DiscreteBoundary, mu: BoundaryDensity) -> BoundaryDensity:
    """Interior/exterior normal derivative of the single layer via jump relations.

    interior: (-1/2 I + W*)[mu];  exterior: (1/2 I + W*)[mu].  Their
    difference is the density itself, exactly, by construction.
    """
    if side not in ("interior", "exterior"):
        raise ValueError("side must be 'interior' or 'exterior'")
    w = wstar_matrix(b) @ mu.values
    if side == "interior":
        return BoundaryDensity(b, w - 0.5 * mu.values)
    return BoundaryDensity(b, w + 0.5 * mu.values)


def single_layer_matrix(b: DiscreteBoundary, targets: np.ndarray) -> np.ndarray:
    """Map from node densities on ``b`` to potential values at off-boundary targets."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    diff = targets[:, None, :] - b.nodes[None, :, :]
    r2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    if np.any(r2 == 0.0):
        raise ValueError("target coincides with a source node")
    return (0.25 / np.pi) * np.log(r2) * b.weights[None, :]


def grad_single_layer_matrix(b: DiscreteBoundary, targets: np.ndarray) -> np.ndarray:
    """(m, 2, n) tensor: gradient of the single layer at each target."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    diff = targets[:, None, :] - b.nodes[None, :, :]
    r2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
    if np.any(r2 == 0.0):
        raise ValueError("target coincides with a source node")
    scale = b.weights[None, :] / (2 * np.pi * r2)
    return np.stack([diff[..., 0] * scale, diff[..., 1] * scale], axis=1)


def normal_grad_matrix(b: DiscreteBoundary, targets: np.ndarray,
                       target_normals: np.ndarray) -> np.ndarray:
    """Matrix of nu(x) . grad v[.](x) for targets off the source boundary."""
    g = grad_single_layer_matrix(b, targets)
    target_normals = np.atleast_2d(np.asarray(target_normals, dtype=float))
    return (target_normals[:, 0, None] * g[:, 0, :]
            + target_normals[:, 1, None] * g[:, 1, :])


def near_boundary(b: DiscreteBoundary, targets, band: float = 3.0) -> np.ndarray:
    """Flag targets closer than ``band`` mesh widths to the source nodes."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    diff = targets[:, None, :] - b.nodes[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1]).min(axis=1)
    return dist < band * b.mesh_width


def _upsample_density(b: DiscreteBoundary, values: np.ndarray, factor: int = 4):
    """Trigonometric upsampling of node data; returns the refined boundary too."""
    from .geometry import discretize

    n = b.n
    m = factor * n
    coeffs = np.fft.rfft(values)
    pad = np.zeros(m // 2 + 1, dtype=complex)
    pad[: len(coeffs)] = coeffs
    if n % 2 == 0:
        pad[n // 2] *= 0.5  # split the Nyquist mode
    fine_values = np.fft.irfft(pad * factor, m)
    fine_b = discretize(b.curve, m)
    return fine_b, fine_values


def eval_single_layer(b: DiscreteBoundary, mu: BoundaryDensity, targets,
                      upsample: bool = False):
    """Potential values at targets; returns (values, near_flags).

    Values inside the near band are computed with the plain rule (or the
    4x upsampled rule when ``upsample``) and flagged rather than trusted.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    flags = near_boundary(b, targets)
    if upsample:
        fine_b, fine_values = _upsample_density(b, mu.values)
        vals = single_layer_matrix(fine_b, targets) @ fine_values
    else:
        vals = single_layer_matrix(b, targets) @ mu.values
    return vals, flags


def grad_single_layer(b: DiscreteBoundary, mu: BoundaryDensity, targets):
    """Gradient of the single layer at targets; returns (vectors, near_flags)."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    flags = near_boundary(b, targets)
    g = grad_single_layer_matrix(b, targets)
    return np.stack([g[:, 0, :] @ mu.values, g[:, 1, :] @ mu.values], axis=-1), flags
