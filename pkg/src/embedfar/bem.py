"""Boundary-element solver for sound-soft scattering by polygons and screens.

First-kind single-layer formulation: the unknown density (normal-derivative
jump for screens) satisfies S phi = u_inc on the boundary, with kernel
(i/4) H0^(1)(k |x-y|).  Discretization is piecewise-constant midpoint
collocation on meshes geometrically graded into every corner.  Far fields are
evaluated by quadrature on the representation
    D(theta) = -1/2 * integral exp(-ik (y1 cos theta + y2 sin theta)) phi ds,
which extends to complex observation angles and differentiates under the
integral sign.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .specialfun import EULER_GAMMA, gauss_legendre, hankel1

logger = logging.getLogger(__name__)

MAX_WAVENUMBER = 50.0
DEFAULT_ELEMENTS_PER_WAVELENGTH = 6.0
DEFAULT_GRADING_RATIO = 0.15
DEFAULT_CORNER_LAYERS = 8

# even order so no quadrature node can land on the collocation point
_NEAR_QUAD_ORDER = 16
# chunk sizes keep dense intermediate arrays below ~100 MB
_ASSEMBLY_CHUNK = 4_000_000
_FARFIELD_CHUNK = 4_000_000


class EmptyMesh(ValueError):
    """Mesh construction produced no elements on some edge."""


class SingularSystem(RuntimeError):
    """The collocation matrix is numerically singular."""


@dataclass
class Mesh:
    """Flat element arrays for a polygonal boundary or screen.

    starts/ends are element endpoint coordinates in boundary order;
    midpoints are the collocation points.
    """

    starts: np.ndarray
    ends: np.ndarray
    kind: str
    midpoints: np.ndarray = field(init=False)
    lengths: np.ndarray = field(init=False)
    tangents: np.ndarray = field(init=False)

    def __post_init__(self):
        self.midpoints = 0.5 * (self.starts + self.ends)
        diff = self.ends - self.starts
        self.lengths = np.linalg.norm(diff, axis=1)
        if np.any(self.lengths <= 0.0):
            raise EmptyMesh("zero-length element")
        self.tangents = diff / self.lengths[:, None]

    def __len__(self):
        return len(self.starts)


def _edge_breakpoints(edge_length, k, elements_per_wavelength, grading_ratio, layers):
    """Relative breakpoints (0..1] along one edge: geometric layers into both
    corners around a uniform middle region."""
    uniform = min(
        0.5 * edge_length,
        2.0 * math.pi / (k * elements_per_wavelength),
        math.pi / k,
    )
    graded = uniform * grading_ratio ** np.arange(1, layers + 1)
    graded_span = float(np.sum(graded))
    middle = edge_length - 2.0 * graded_span
    if middle <= 0.0:
        raise EmptyMesh(
            f"edge of length {edge_length:.3g} cannot hold {layers} graded "
            "layers; reduce corner_layers or refine"
        )
    n_middle = max(1, math.ceil(middle / uniform))

    cuts = [0.0]
    pos = 0.0
    for length in graded[::-1]:  # smallest element sits at the corner
        pos += length
        cuts.append(pos)
    step = middle / n_middle
    for _ in range(n_middle):
        pos += step
        cuts.append(pos)
    for length in graded:
        pos += length
        cuts.append(pos)
    cuts[-1] = edge_length
    return np.asarray(cuts) / edge_length


def build_mesh(
    shape,
    k,
    elements_per_wavelength=DEFAULT_ELEMENTS_PER_WAVELENGTH,
    grading_ratio=DEFAULT_GRADING_RATIO,
    corner_layers=DEFAULT_CORNER_LAYERS,
):
    """Graded mesh on the shape boundary for wavenumber k.

    Every corner (both screen endpoints) receives corner_layers elements
    shrinking geometrically by grading_ratio; the uniform middle region
    resolves elements_per_wavelength elements per wavelength, and no element
    exceeds pi/k.
    """
    if not 0.0 < k <= MAX_WAVENUMBER:
        raise ValueError(f"wavenumber must be in (0, {MAX_WAVENUMBER}], got {k}")
    if elements_per_wavelength < 2.0:
        raise ValueError("elements_per_wavelength must be at least 2")
    if not 0.0 < grading_ratio < 1.0:
        raise ValueError("grading_ratio must lie in (0, 1)")
    if corner_layers < 1:
        raise ValueError("corner_layers must be positive")

    starts, ends = [], []
    for a, b in shape.edges:
        rel = _edge_breakpoints(
            float(np.linalg.norm(b - a)),
            k,
            elements_per_wavelength,
            grading_ratio,
            corner_layers,
        )
        points = a[None, :] + rel[:, None] * (b - a)[None, :]
        starts.append(points[:-1])
        ends.append(points[1:])
    mesh = Mesh(
        starts=np.concatenate(starts), ends=np.concatenate(ends), kind=shape.kind
    )
    assert float(np.max(mesh.lengths)) <= math.pi / k + 1e-12
    logger.debug("mesh: %d elements, k=%g", len(mesh), k)
    return mesh


def _log_integral(target, start, tangent, length):
    """Closed form of integral of ln|target - y| ds(y) over one element."""
    rel = target - start
    t0 = float(rel @ tangent)
    d2 = max(float(rel @ rel) - t0 * t0, 0.0)
    d = math.sqrt(d2)

    def antiderivative(s):
        if d < 1e-14 * length:
            if s == 0.0:
                return 0.0
            return s * math.log(abs(s)) - s
        return 0.5 * (s * math.log(s * s + d2) - 2.0 * s) + d * math.atan2(s, d)

    return antiderivative(length - t0) - antiderivative(-t0)


def _smooth_kernel_part(k, r):
    """g(r) = (i/4) H0(kr) + ln(r)/(2 pi), continuous at r = 0."""
    out = np.empty(r.shape, dtype=np.complex128)
    tiny = r < 1e-280
    if np.any(~tiny):
        rs = r[~tiny]
        out[~tiny] = 0.25j * hankel1(0, k * rs) + np.log(rs) / (2.0 * np.pi)
    out[tiny] = 0.25j - (math.log(0.5 * k) + EULER_GAMMA) / (2.0 * np.pi)
    return out


def _split_entry(k, target, start, tangent, length, nodes, weights):
    """Kernel integral with the log singularity handled analytically."""
    r = np.linalg.norm(target[None, :] - nodes, axis=1)
    smooth = np.sum(weights * _smooth_kernel_part(k, r))
    return smooth - _log_integral(target, start, tangent, length) / (2.0 * np.pi)


@dataclass
class BemSystem:
    """Assembled and factorized collocation system for one (shape, k)."""

    mesh: Mesh
    k: float
    matrix: np.ndarray
    lu: tuple
    ff_nodes: np.ndarray  # (n_elements, q, 2) far-field quadrature points
    ff_weights: np.ndarray  # (n_elements, q)

    def incident(self, alphas, points=None):
        """Plane-wave trace exp(-ik(x1 cos a + x2 sin a)) at collocation
        points (or the given points); returns (n_points, n_alphas)."""
        alphas = np.atleast_1d(np.asarray(alphas, dtype=np.float64))
        if points is None:
            points = self.mesh.midpoints
        phase = points[:, 0:1] * np.cos(alphas)[None, :] + points[
            :, 1:2
        ] * np.sin(alphas)[None, :]
        return np.exp(-1j * self.k * phase)

    def solve_density(self, alphas):
        """Densities for one or many incident angles through the stored LU.

        Returns shape (n_elements,) for scalar alpha, else (n_elements, n).
        One step of iterative refinement keeps the collocation residual at
        the 1e-10 * ||rhs|| level even for large meshes.
        """
        scalar = np.ndim(alphas) == 0
        rhs = self.incident(alphas)
        density = lu_solve(self.lu, rhs)
        density += lu_solve(self.lu, rhs - self.matrix @ density)
        residual = np.max(np.abs(self.matrix @ density - rhs))
        bound = 1e-10 * np.max(np.abs(rhs))
        if residual > bound:
            raise SingularSystem(
                f"collocation residual {residual:.2e} exceeds {bound:.2e}"
            )
        return density[:, 0] if scalar else density

    def far_field(self, density):
        """FarField view of one solved density."""
        wphi = (self.ff_weights * density[:, None]).ravel()
        return FarField(
            k=self.k, nodes=self.ff_nodes.reshape(-1, 2), weighted_density=wphi
        )

    def solve_far_fields(self, alphas):
        """List of FarField objects, one per incident angle."""
        alphas = np.atleast_1d(np.asarray(alphas, dtype=np.float64))
        densities = self.solve_density(alphas)
        return [self.far_field(densities[:, i]) for i in range(len(alphas))]


def assemble(mesh, k):
    """Collocation matrix, its LU factorization, and far-field quadrature."""
    n = len(mesh)
    max_len = float(np.max(mesh.lengths))
    order_far = max(4, math.ceil(k * max_len) + 4)
    order_far += order_far % 2  # even orders keep nodes off element midpoints
    gl_x, gl_w = gauss_legendre(order_far)
    # element quadrature in global coordinates, (n, q, 2) / (n, q)
    params = 0.5 * (gl_x + 1.0)
    src_nodes = mesh.starts[:, None, :] + params[None, :, None] * (
        mesh.ends - mesh.starts
    )[:, None, :]
    src_weights = 0.5 * gl_w[None, :] * mesh.lengths[:, None]

    flat_nodes = src_nodes.reshape(-1, 2)
    flat_weights = src_weights.ravel()
    targets = mesh.midpoints

    matrix = np.empty((n, n), dtype=np.complex128)
    chunk = max(1, _ASSEMBLY_CHUNK // flat_nodes.shape[0])
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        diff = targets[lo:hi, None, :] - flat_nodes[None, :, :]
        r = np.linalg.norm(diff, axis=2)
        kernel = 0.25j * hankel1(0, np.maximum(k * r, 1e-280))
        matrix[lo:hi] = (kernel * flat_weights[None, :]).reshape(
            hi - lo, n, order_far
        ).sum(axis=2)

    # redo near and self entries with the log part integrated analytically
    near_x, near_w = gauss_legendre(_NEAR_QUAD_ORDER)
    near_params = 0.5 * (near_x + 1.0)
    rel = targets[:, None, :] - mesh.starts[None, :, :]
    along = np.einsum("ijk,jk->ij", rel, mesh.tangents)
    clamped = np.clip(along, 0.0, mesh.lengths[None, :])
    closest = mesh.starts[None, :, :] + clamped[:, :, None] * mesh.tangents[None, :, :]
    seg_dist = np.linalg.norm(targets[:, None, :] - closest, axis=2)
    near_pairs = np.argwhere(seg_dist < mesh.lengths[None, :])
    for i, j in near_pairs:
        nodes = mesh.starts[j] + near_params[:, None] * (mesh.ends[j] - mesh.starts[j])
        weights = 0.5 * near_w * mesh.lengths[j]
        matrix[i, j] = _split_entry(
            k, targets[i], mesh.starts[j], mesh.tangents[j], mesh.lengths[j],
            nodes, weights,
        )

    lu, piv = lu_factor(matrix)
    diag = np.abs(np.diag(lu))
    if diag.min() <= 1e-14 * diag.max():
        raise SingularSystem("vanishing pivot in LU factorization")
    logger.debug("assembled %d x %d system (far order %d, %d near pairs)",
                 n, n, order_far, len(near_pairs))
    return BemSystem(
        mesh=mesh, k=k, matrix=matrix, lu=(lu, piv),
        ff_nodes=src_nodes, ff_weights=src_weights,
    )


def build_system(shape, k, **mesh_options):
    """Mesh + assemble in one call."""
    return assemble(build_mesh(shape, k, **mesh_options), k)


@dataclass
class FarField:
    """Far-field pattern of one scattering solve.

    value() accepts real or complex observation angles; the pattern is entire
    in theta, and derivatives are taken under the integral sign.
    """

    k: float
    nodes: np.ndarray  # (m, 2)
    weighted_density: np.ndarray  # (m,) quadrature weight times density

    def value(self, theta, order=0):
        theta = np.asarray(theta)
        scalar = theta.ndim == 0
        flat = np.atleast_1d(theta).ravel()
        out = np.empty(flat.shape, dtype=np.complex128)
        chunk = max(1, _FARFIELD_CHUNK // len(self.nodes))
        y1, y2 = self.nodes[:, 0], self.nodes[:, 1]
        for lo in range(0, len(flat), chunk):
            t = flat[lo : lo + chunk, None]
            f = -1j * self.k * (y1[None, :] * np.cos(t) + y2[None, :] * np.sin(t))
            integrand = np.exp(f)
            if order == 1:
                fp = -1j * self.k * (-y1[None, :] * np.sin(t) + y2[None, :] * np.cos(t))
                integrand = fp * integrand
            elif order == 2:
                fp = -1j * self.k * (-y1[None, :] * np.sin(t) + y2[None, :] * np.cos(t))
                integrand = (fp * fp - f) * integrand
            elif order != 0:
                raise ValueError("order must be 0, 1 or 2")
            out[lo : lo + chunk] = -0.5 * integrand @ self.weighted_density
        if scalar:
            return out[0]
        return out.reshape(np.atleast_1d(theta).shape)

    def scattered_field(self, points):
        """u_scattered at exterior points: -sum (i/4) H0(k r) w phi."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        r = np.linalg.norm(points[:, None, :] - self.nodes[None, :, :], axis=2)
        kernel = 0.25j * hankel1(0, self.k * r)
        return -(kernel @ self.weighted_density)


def far_field(solution, thetas, order=0):
    """Far-field pattern values of a FarField solution object."""
    return solution.value(thetas, order=order)


def far_field_derivative(solution, thetas, order=1):
    """Derivative of the far-field pattern with respect to theta."""
    return solution.value(thetas, order=order)


def far_field_matrix(system, densities, thetas):
    """Far fields of many densities on a common real theta grid.

    Parameters
    ----------
    system : BemSystem
    densities : (n_elements, n_solves)
    thetas : (n_theta,)

    Returns
    -------
    (n_theta, n_solves) complex array
    """
    thetas = np.asarray(thetas, dtype=np.float64)
    wphi = system.ff_weights.reshape(-1, 1) * np.repeat(
        densities, system.ff_weights.shape[1], axis=0
    )
    nodes = system.ff_nodes.reshape(-1, 2)
    out = np.empty((len(thetas), densities.shape[1]), dtype=np.complex128)
    chunk = max(1, _FARFIELD_CHUNK // len(nodes))
    for lo in range(0, len(thetas), chunk):
        t = thetas[lo : lo + chunk, None]
        phase = nodes[None, :, 0] * np.cos(t) + nodes[None, :, 1] * np.sin(t)
        out[lo : lo + chunk] = -0.5 * np.exp(-1j * system.k * phase) @ wphi
    return out
