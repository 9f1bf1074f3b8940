"""Discretization of the upper hemisphere and the full sphere.

The surface of interest is a star-shaped hypersurface written in radial
coordinates over the upper unit hemisphere: points rho(x)*x with x on the
hemisphere and rho > 0.  Everything downstream (singular integrals, the
evolution solver, the diagnostics) consumes the grids built here: unit
nodes, quadrature weights, boundary markers, outward conormals on the
equator, and cached pairwise chord distances.

n = 1 (curves in the half-plane) is the reference case: nodes are equally
spaced angles with trapezoidal weights on the hemisphere and a uniform
periodic rule on the full circle.  n = 2 uses a latitude-longitude product
grid with exact spherical-cap band weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SphereGrid",
    "RadialField",
    "build_grid",
    "double_grid",
    "reflect_field",
    "tangential_gradient",
    "conormal_derivative",
    "quad_integrate",
]


@dataclass(eq=False)
class SphereGrid:
    """Quadrature grid on the hemisphere or the full sphere.

    Attributes
    ----------
    n : int
        Surface dimension (1 or 2); nodes live in R^(n+1).
    topology : str
        "hemisphere" or "full-sphere".
    nodes : ndarray, shape (N, n+1)
        Unit vectors.
    weights : ndarray, shape (N,)
        Positive quadrature weights in surface-measure units.
    boundary_mask : ndarray of bool, shape (N,)
        True exactly at nodes on the equator x_{n+1} = 0 (hemisphere only).
    conormals : ndarray, shape (N, n+1)
        Outward unit conormal at boundary nodes, zero rows elsewhere.
    chord : ndarray, shape (N, N)
        Pairwise Euclidean distances |y - x| between nodes.
    dots : ndarray, shape (N, N)
        Pairwise dot products of the unit nodes (chord^2 = 2 - 2*dots).
    h : float or None
        Angular spacing of the n=1 parametrization (None for n=2).
    phi : ndarray or None
        Parameter angles for n=1 grids.
    adjacent : ndarray of int, shape (N, 2)
        Parameter-space neighbors of each node (used by the singular
        quadrature correction); -1 marks a missing neighbor.  All -1 for
        n=2, where the correction is not applied.
    """

    n: int
    topology: str
    nodes: np.ndarray
    weights: np.ndarray
    boundary_mask: np.ndarray
    conormals: np.ndarray
    chord: np.ndarray
    dots: np.ndarray
    h: float | None = None
    phi: np.ndarray | None = None
    adjacent: np.ndarray | None = None
    # n=2 bookkeeping: (number of latitude rings, nodes per ring)
    shape2: tuple[int, int] | None = None
    _doubled: tuple["SphereGrid", np.ndarray] | None = field(
        default=None, repr=False, compare=False
    )

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)


@dataclass(eq=False)
class RadialField:
    """Radial function rho sampled on a grid; rho > 0 node-wise."""

    grid: SphereGrid
    values: np.ndarray
    _gradient: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise ValueError(
                f"field has {self.values.shape} values for {self.grid.size} nodes"
            )
        if np.min(self.values) <= 0.0:
            raise ValueError("radial field must be strictly positive (star-shaped)")

    @property
    def gradient(self) -> np.ndarray:
        """Tangential gradient, cached after the first evaluation."""
        if self._gradient is None:
            self._gradient = gradient_values(self.grid, self.values)
        return self._gradient


# ----------------------------------------------------------------------
# grid construction
# ----------------------------------------------------------------------


def build_grid(n: int, resolution: int, topology: str) -> SphereGrid:
    """Build a quadrature grid on the (hemi)sphere.

    Parameters
    ----------
    n : int
        Surface dimension, 1 or 2.
    resolution : int
        Node count for n=1; number of latitude rings for n=2.  At least 8.
    topology : str
        "hemisphere" or "full-sphere".

    For n=1 hemisphere grids the nodes are phi_i = i*pi/(resolution-1)
    with both endpoints on the equator; full-circle grids are uniform on
    [0, 2*pi).  For n=2 the latitude rings include the endpoints (pole and
    equator), with exact cap/band areas as weights.
    """
    if topology not in ("hemisphere", "full-sphere"):
        raise ValueError(f"unknown topology {topology!r}")
    if resolution < 8:
        raise ValueError(f"resolution must be at least 8, got {resolution}")
    if n == 1:
        return _build_circle(resolution, topology)
    if n == 2:
        return _build_sphere2(resolution, topology)
    raise ValueError(f"surface dimension must be 1 or 2, got {n}")


def _pairwise(nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    dots = np.clip(nodes @ nodes.T, -1.0, 1.0)
    chord2 = np.maximum(2.0 - 2.0 * dots, 0.0)
    np.fill_diagonal(chord2, 0.0)
    return np.sqrt(chord2), dots


def _build_circle(resolution: int, topology: str) -> SphereGrid:
    N = resolution
    if topology == "hemisphere":
        h = math.pi / (N - 1)
        phi = h * np.arange(N)
        weights = np.full(N, h)
        weights[0] = weights[-1] = 0.5 * h
        boundary = np.zeros(N, dtype=bool)
        boundary[0] = boundary[-1] = True
        adjacent = np.column_stack([np.arange(N) - 1, np.arange(N) + 1])
        adjacent[0, 0] = -1
        adjacent[-1, 1] = -1
    else:
        h = 2.0 * math.pi / N
        phi = h * np.arange(N)
        weights = np.full(N, h)
        boundary = np.zeros(N, dtype=bool)
        adjacent = np.column_stack(
            [(np.arange(N) - 1) % N, (np.arange(N) + 1) % N]
        )
    nodes = np.column_stack([np.cos(phi), np.sin(phi)])
    conormals = np.zeros_like(nodes)
    # The equator of the upper half-circle is the pair (+-1, 0); at both
    # points the outward conormal (tangent to the circle, leaving the
    # hemisphere) is (0, -1).
    conormals[boundary] = (0.0, -1.0)
    chord, dots = _pairwise(nodes)
    return SphereGrid(
        n=1,
        topology=topology,
        nodes=nodes,
        weights=weights,
        boundary_mask=boundary,
        conormals=conormals,
        chord=chord,
        dots=dots,
        h=h,
        phi=phi,
        adjacent=adjacent,
    )


def _sphere2_layout(n_rings: int, topology: str) -> tuple[np.ndarray, np.ndarray, int]:
    """Ring colatitudes, per-ring node counts, and nodes per full ring."""
    dbeta = 0.5 * math.pi / (n_rings - 1)
    if topology == "hemisphere":
        betas = dbeta * np.arange(n_rings)
    else:
        betas = dbeta * np.arange(2 * n_rings - 1)
    n_gamma = 2 * n_rings + (2 * n_rings) % 4  # multiple of 4 for pole stencils
    counts = np.full(betas.size, n_gamma)
    counts[np.isclose(betas, 0.0) | np.isclose(betas, math.pi)] = 1
    return betas, counts, n_gamma


def _build_sphere2(resolution: int, topology: str) -> SphereGrid:
    betas, counts, n_gamma = _sphere2_layout(resolution, topology)
    dbeta = 0.5 * math.pi / (resolution - 1)
    dgamma = 2.0 * math.pi / n_gamma

    nodes, weights, boundary, betalist, gammalist = [], [], [], [], []
    for beta, count in zip(betas, counts):
        lo = max(beta - 0.5 * dbeta, 0.0)
        hi = min(beta + 0.5 * dbeta, math.pi if topology == "full-sphere" else 0.5 * math.pi)
        band = 2.0 * math.pi * (math.cos(lo) - math.cos(hi))
        for j in range(count):
            gamma = j * dgamma
            nodes.append(
                (
                    math.sin(beta) * math.cos(gamma),
                    math.sin(beta) * math.sin(gamma),
                    math.cos(beta),
                )
            )
            weights.append(band / count)
            boundary.append(
                topology == "hemisphere" and math.isclose(beta, 0.5 * math.pi)
            )
            betalist.append(beta)
            gammalist.append(gamma)

    nodes = np.asarray(nodes)
    # Pole nodes sit exactly on the axis.
    nodes[np.isclose(betalist, 0.0)] = (0.0, 0.0, 1.0)
    nodes[np.isclose(betalist, math.pi)] = (0.0, 0.0, -1.0)
    weights = np.asarray(weights)
    boundary = np.asarray(boundary, dtype=bool)
    conormals = np.zeros_like(nodes)
    conormals[boundary] = (0.0, 0.0, -1.0)
    chord, dots = _pairwise(nodes)
    grid = SphereGrid(
        n=2,
        topology=topology,
        nodes=nodes,
        weights=weights,
        boundary_mask=boundary,
        conormals=conormals,
        chord=chord,
        dots=dots,
        h=None,
        phi=None,
        adjacent=np.full((nodes.shape[0], 2), -1, dtype=int),
        shape2=(betas.size, n_gamma),
    )
    grid._beta = np.asarray(betalist)  # type: ignore[attr-defined]
    grid._gamma = np.asarray(gammalist)  # type: ignore[attr-defined]
    grid._dbeta = dbeta  # type: ignore[attr-defined]
    grid._dgamma = dgamma  # type: ignore[attr-defined]
    grid._counts = counts  # type: ignore[attr-defined]
    return grid


# ----------------------------------------------------------------------
# reflection across the equator
# ----------------------------------------------------------------------


def double_grid(grid: SphereGrid) -> tuple[SphereGrid, np.ndarray]:
    """Full-sphere grid obtained by reflecting a hemisphere grid.

    Returns the doubled grid together with an index map: entry k is the
    hemisphere node whose value an even extension places at doubled node
    k.  Equator nodes are shared, not duplicated.  The result is cached on
    the hemisphere grid, so repeated calls are cheap.
    """
    if grid.topology != "hemisphere":
        raise ValueError("double_grid expects a hemisphere grid")
    if grid._doubled is not None:
        return grid._doubled

    if grid.n == 1:
        N = grid.size
        full = build_grid(1, 2 * (N - 1), "full-sphere")
        k = np.arange(full.size)
        index_map = np.where(k < N, k, 2 * (N - 1) - k)
    else:
        n_rings = grid.shape2[0]
        full = build_grid(2, n_rings, "full-sphere")
        index_map = np.empty(full.size, dtype=int)
        ring_of = np.rint(full._beta / full._dbeta).astype(int)  # type: ignore[attr-defined]
        mirrored = np.minimum(ring_of, 2 * (n_rings - 1) - ring_of)
        # Node ordering within a ring is by gamma in both grids, so the
        # hemisphere index is the ring offset plus the in-ring position.
        offsets = np.concatenate([[0], np.cumsum(grid._counts)])  # type: ignore[attr-defined]
        pos_in_ring = np.empty(full.size, dtype=int)
        start = 0
        for count in full._counts:  # type: ignore[attr-defined]
            pos_in_ring[start : start + count] = np.arange(count)
            start += count
        index_map = offsets[mirrored] + np.where(
            grid._counts[mirrored] == 1, 0, pos_in_ring  # type: ignore[attr-defined]
        )
    grid._doubled = (full, index_map)
    return grid._doubled


def reflect_field(rho: RadialField) -> RadialField:
    """Even extension of a hemisphere field across the equator."""
    if rho.grid.topology != "hemisphere":
        raise ValueError("reflect_field expects a field on a hemisphere grid")
    full, index_map = double_grid(rho.grid)
    return RadialField(full, rho.values[index_map])


# ----------------------------------------------------------------------
# tangential calculus
# ----------------------------------------------------------------------


def gradient_values(grid: SphereGrid, values: np.ndarray) -> np.ndarray:
    """Tangential gradient of per-node samples as ambient vectors.

    Second-order finite differences: centered in the interior (periodic
    on the full circle), one-sided at the two hemisphere endpoints.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.size,):
        raise ValueError("sample count does not match grid size")
    if grid.n == 1:
        dv = _dphi(grid, values)
        tau = np.column_stack([-grid.nodes[:, 1], grid.nodes[:, 0]])
        return dv[:, None] * tau
    return _gradient_sphere2(grid, values)


def _dphi(grid: SphereGrid, u: np.ndarray) -> np.ndarray:
    h = grid.h
    if grid.topology == "full-sphere":
        return (np.roll(u, -1) - np.roll(u, 1)) / (2.0 * h)
    du = np.empty_like(u)
    du[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    du[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
    du[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    return du


def _ring_slices(grid: SphereGrid) -> list[slice]:
    out, start = [], 0
    for count in grid._counts:  # type: ignore[attr-defined]
        out.append(slice(start, start + count))
        start += count
    return out


def _gradient_sphere2(grid: SphereGrid, u: np.ndarray) -> np.ndarray:
    beta = grid._beta  # type: ignore[attr-defined]
    gamma = grid._gamma  # type: ignore[attr-defined]
    dbeta = grid._dbeta  # type: ignore[attr-defined]
    slices = _ring_slices(grid)
    counts = grid._counts  # type: ignore[attr-defined]
    n_rings = len(slices)
    grad = np.zeros((grid.size, 3))

    e_beta = np.column_stack(
        [np.cos(beta) * np.cos(gamma), np.cos(beta) * np.sin(gamma), -np.sin(beta)]
    )
    e_gamma = np.column_stack([-np.sin(gamma), np.cos(gamma), np.zeros_like(gamma)])

    def ring_val(r: int, pos: np.ndarray) -> np.ndarray:
        s = slices[r]
        if counts[r] == 1:
            return np.full(pos.shape, u[s][0])
        return u[s][pos % counts[r]]

    for r, s in enumerate(slices):
        if counts[r] == 1:
            # Pole: centered differences along two orthogonal meridians.
            ngam = counts[1] if r == 0 else counts[-2]
            rr = 1 if r == 0 else n_rings - 2
            quarter = ngam // 4
            ring = u[slices[rr]]
            sign = 1.0 if r == 0 else -1.0
            gx = sign * (ring[0] - ring[2 * quarter]) / (2.0 * dbeta)
            gy = sign * (ring[quarter] - ring[3 * quarter]) / (2.0 * dbeta)
            grad[s] = (gx, gy, 0.0)
            continue
        pos = np.arange(counts[r])
        # beta derivative along meridians
        if 0 < r < n_rings - 1:
            ub = (ring_val(r + 1, pos) - ring_val(r - 1, pos)) / (2.0 * dbeta)
        elif r == 0:
            ub = (
                -3.0 * ring_val(r, pos) + 4.0 * ring_val(r + 1, pos) - ring_val(r + 2, pos)
            ) / (2.0 * dbeta)
        else:
            ub = (
                3.0 * ring_val(r, pos) - 4.0 * ring_val(r - 1, pos) + ring_val(r - 2, pos)
            ) / (2.0 * dbeta)
        ring = u[s]
        ug = (np.roll(ring, -1) - np.roll(ring, 1)) / (2.0 * grid._dgamma)  # type: ignore[attr-defined]
        sb = math.sin(beta[s][0])
        grad[s] = ub[:, None] * e_beta[s] + (ug / sb)[:, None] * e_gamma[s]
    return grad


def tangential_gradient(rho: RadialField) -> np.ndarray:
    """Tangential gradient of a radial field (ambient tangent vectors)."""
    return rho.gradient


def conormal_derivative(rho: RadialField, b: int) -> float:
    """Outward conormal derivative of rho at boundary node b.

    One-sided second-order stencil along the geodesic into the interior,
    signed so that the conormal points out of the hemisphere.
    """
    grid = rho.grid
    if grid.topology != "hemisphere":
        raise ValueError("conormal derivative requires a hemisphere grid")
    if not grid.boundary_mask[b]:
        raise ValueError(f"node {b} is not on the boundary")
    u = rho.values
    if grid.n == 1:
        h = grid.h
        if b == 0:
            # eta = -tau at phi = 0
            return -(-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
        return (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    # n = 2: derivative in beta at the equator ring, eta = e_beta there.
    slices = _ring_slices(grid)
    counts = grid._counts  # type: ignore[attr-defined]
    dbeta = grid._dbeta  # type: ignore[attr-defined]
    last = slices[-1]
    j = b - last.start
    u0 = u[b]
    u1 = u[slices[-2]][j % counts[-2]]
    u2 = u[slices[-3]][j % counts[-3]]
    return (3.0 * u0 - 4.0 * u1 + u2) / (2.0 * dbeta)


def quad_integrate(grid: SphereGrid, samples: np.ndarray) -> float:
    """Quadrature of per-node samples over the grid's surface."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (grid.size,):
        raise ValueError(
            f"{samples.shape[0]} samples for a grid of {grid.size} nodes"
        )
    return float(grid.weights @ samples)
