"""Time stepping for the fractional curvature flow of radial graphs.

The surface is the radial graph {rho(x) x} over the reference
(hemi)sphere and moves with normal speed equal to minus its fractional
curvature.  In the radial variable this reads

    d rho / dt = A(rho) * [ D^s rho - Hs_ref + R1 + R2 (rho - 1) ],

with A = sqrt(rho^2 + |grad rho|^2) / rho the conversion from normal
speed to radial speed.  Each backward Euler step treats the fractional
Laplacian implicitly through its matrix and freezes the nonlinear rest in
a Picard iteration; the implicit matrix I - dt*M is strictly diagonally
dominant with nonnegative off-diagonal entries, so the linear solve obeys
a discrete maximum principle.

Capillary runs on a hemisphere grid use the reflected full-circle
operators by default (`hs_ref_mode = "full-sphere"`): fields are evenly
extended across the contact plane, operator rows are restricted to the
hemisphere, and the contact-angle condition is imposed on the boundary
nodes after every inner iterate.  The even extension is exact for the
ninety-degree angle; away from it the extension has a gradient kink at
the contact nodes and the half-ball reference mode may be preferable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .geometry import (
    RadialField,
    SphereGrid,
    build_grid,
    conormal_derivative,
    double_grid,
    gradient_values,
    quad_integrate,
)
from .diagnostics import volume
from .nonlocal_ops import (
    HomotopyRule,
    InjectivityError,
    KernelParams,
    frac_laplacian_matrix,
    hs_reference,
    injectivity_ratio,
    remainder_R1,
    remainder_R2,
)

__all__ = [
    "ExtinctionError",
    "NonconvergenceError",
    "FlowConfig",
    "FlowState",
    "Trajectory",
    "prefactor_A",
    "unit_normal",
    "jacobian_J",
    "surface_samples",
    "remainder_P",
    "assemble_rhs",
    "normal_velocity",
    "bc_residual",
    "apply_bc",
    "initial_field",
    "operator_matrix",
    "step",
    "run_flow",
]

EXTINCTION_THRESHOLD = 0.05
MAX_DT_HALVINGS = 5


class ExtinctionError(RuntimeError):
    """The surface shrank below the resolvable radius."""


class NonconvergenceError(RuntimeError):
    """The Picard iteration failed even after time step reduction."""


@dataclass(frozen=True)
class FlowConfig:
    s: float
    theta: float
    dt: float
    resolution: int
    topology: str
    n: int = 1
    t_end: float | None = None
    hs_ref_mode: str = "full-sphere"
    initial: str = "constant:1.0"
    save_every: int = 1
    homotopy_order: int = 8
    refresh_remainders: str = "per-iterate"
    picard_tol: float = 1e-9
    max_picard: int = 20
    bc_tol: float = 1e-6

    def __post_init__(self) -> None:
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0,1), got {self.s}")
        if not 0.0 < self.theta < np.pi:
            raise ValueError(f"theta must lie in (0,pi), got {self.theta}")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.t_end is not None and self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if self.resolution < 8:
            raise ValueError(
                f"resolution must be at least 8, got {self.resolution}"
            )
        if self.topology not in ("hemisphere", "full-sphere"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.n not in (1, 2):
            raise ValueError(f"n must be 1 or 2, got {self.n}")
        if self.homotopy_order < 1:
            raise ValueError("homotopy_order must be a positive integer")
        if self.hs_ref_mode not in ("full-sphere", "half-ball"):
            raise ValueError(f"unknown hs_ref_mode {self.hs_ref_mode!r}")
        if self.hs_ref_mode == "half-ball" and self.topology != "hemisphere":
            raise ValueError("half-ball reference requires hemisphere topology")
        if self.refresh_remainders not in ("per-iterate", "per-step"):
            raise ValueError(
                f"unknown refresh_remainders {self.refresh_remainders!r}"
            )
        if self.save_every < 1:
            raise ValueError("save_every must be at least 1")

    @property
    def params(self) -> KernelParams:
        return KernelParams(s=self.s, n=self.n)

    @property
    def horizon(self) -> float:
        return self.t_end if self.t_end is not None else 10.0 * self.dt


@dataclass
class FlowState:
    t: float
    rho: RadialField
    dt: float
    step: int = 0
    picard_iters: int = 0
    bc_residual_max: float = 0.0


@dataclass
class Trajectory:
    config: FlowConfig
    grid: SphereGrid
    times: list = field(default_factory=list)
    saved: list = field(default_factory=list)  # (t, values) pairs
    diagnostics: list = field(default_factory=list)  # per-step dicts
    status: str = "completed"
    message: str = ""

    @property
    def final_field(self) -> RadialField:
        return RadialField(self.grid, self.saved[-1][1])


# ----------------------------------------------------------------------
# pointwise surface quantities
# ----------------------------------------------------------------------


def _speed_factor(values: np.ndarray, grid: SphereGrid) -> np.ndarray:
    g = gradient_values(grid, values)
    return np.sqrt(values**2 + np.sum(g * g, axis=1))


def prefactor_A(rho: RadialField) -> np.ndarray:
    """Radial-to-normal speed factor sqrt(rho^2 + |grad rho|^2) / rho."""
    return _speed_factor(rho.values, rho.grid) / rho.values


def unit_normal(rho: RadialField) -> np.ndarray:
    """Outward unit normal of the graph at each mapped node."""
    grid = rho.grid
    g = gradient_values(grid, rho.values)
    W = _speed_factor(rho.values, grid)
    return (rho.values[:, None] * grid.nodes - g) / W[:, None]


def jacobian_J(rho: RadialField) -> np.ndarray:
    """Area element of the graph relative to the reference sphere."""
    return rho.values ** (rho.grid.n - 1) * _speed_factor(rho.values, rho.grid)


def surface_samples(rho: RadialField) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mapped nodes, outward normals, and surface weights of the graph."""
    grid = rho.grid
    nodes = rho.values[:, None] * grid.nodes
    return nodes, unit_normal(rho), jacobian_J(rho) * grid.weights


# ----------------------------------------------------------------------
# contact-angle boundary condition
# ----------------------------------------------------------------------


def bc_residual(rho: RadialField, theta: float) -> np.ndarray:
    """cos(theta) minus the achieved contact angle cosine, per boundary node.

    At a contact node the ambient wall normal coincides with the spherical
    conormal, so the angle condition <nu, wall normal> = -cos(theta)
    becomes cos(theta) - (d rho / d eta) / sqrt(rho^2 + |grad rho|^2) = 0.
    """
    grid = rho.grid
    bidx = grid.boundary_indices()
    if bidx.size == 0:
        return np.zeros(0)
    W = _speed_factor(rho.values, grid)
    out = np.empty(bidx.size)
    for k, b in enumerate(bidx):
        out[k] = np.cos(theta) - conormal_derivative(rho, int(b)) / W[b]
    return out


def apply_bc(
    rho: RadialField, theta: float, tol: float = 1e-6, max_iter: int = 50
) -> RadialField:
    """Adjust boundary values until the contact-angle residual is below tol.

    Interior values stay fixed; each boundary node solves its scalar
    residual equation by damped Newton with a finite-difference slope.
    """
    grid = rho.grid
    bidx = grid.boundary_indices()
    if bidx.size == 0:
        return rho
    vals = rho.values.copy()

    def residual_at(b: int, v: float) -> float:
        old = vals[b]
        vals[b] = v
        trial = RadialField(grid, vals)
        g = gradient_values(grid, vals)
        W = np.sqrt(vals[b] ** 2 + np.sum(g[b] * g[b]))
        r = np.cos(theta) - conormal_derivative(trial, int(b)) / W
        vals[b] = old
        return r

    for b in bidx:
        v = float(vals[b])
        r = residual_at(b, v)
        for _ in range(max_iter):
            if abs(r) <= tol:
                break
            dv = 1e-7 * max(1.0, abs(v))
            slope = (residual_at(b, v + dv) - r) / dv
            if slope == 0.0:
                raise NonconvergenceError(
                    f"flat contact-angle residual at boundary node {b}"
                )
            stepv = -r / slope
            lam = 1.0
            while lam > 1e-4:
                cand = v + lam * stepv
                if cand > 0.0:
                    rc = residual_at(b, cand)
                    if abs(rc) < abs(r):
                        v, r = cand, rc
                        break
                lam *= 0.5
            else:
                raise NonconvergenceError(
                    f"contact-angle update stalled at boundary node {b}"
                )
        else:
            raise NonconvergenceError(
                f"contact angle not met at node {b} after {max_iter} iterations"
            )
        vals[b] = v
    return RadialField(grid, vals)


# ----------------------------------------------------------------------
# assembled right-hand side
# ----------------------------------------------------------------------


class _Context:
    """Grids, reference curvature, and matrices shared across steps."""

    def __init__(self, cfg: FlowConfig):
        # Only the fields in the cache key may be read off cfg here; per-run
        # settings (theta, tolerances, refresh mode) travel with the caller.
        self.grid = build_grid(cfg.n, cfg.resolution, cfg.topology)
        self.params = cfg.params
        self.rule = HomotopyRule(order=cfg.homotopy_order)
        if cfg.topology == "hemisphere" and cfg.hs_ref_mode == "full-sphere":
            self.work, self.index_map = double_grid(self.grid)
            self.folded = True
        else:
            self.work, self.index_map = self.grid, np.arange(self.grid.size)
            self.folded = False
        self.rows = np.arange(self.grid.size)
        self.hs_ref = hs_reference(self.work, self.params, cfg.hs_ref_mode)[
            : self.grid.size
        ]
        M_work = frac_laplacian_matrix(self.work, self.params)[: self.grid.size]
        if self.folded:
            MT = np.zeros((self.grid.size, self.grid.size))
            np.add.at(MT, self.index_map, M_work.T)
            self.M = MT.T
        else:
            self.M = M_work
        self._lu: dict[float, tuple] = {}

    def to_work(self, values: np.ndarray) -> RadialField:
        return RadialField(self.work, values[self.index_map])

    def solver(self, dt: float) -> Callable[[np.ndarray], np.ndarray]:
        key = float(dt)
        if key not in self._lu:
            self._lu[key] = lu_factor(
                np.eye(self.grid.size) - dt * self.M, check_finite=False
            )
        fac = self._lu[key]
        return lambda v: lu_solve(fac, v, check_finite=False)


_CONTEXTS: dict[tuple, _Context] = {}


def _get_context(cfg: FlowConfig) -> _Context:
    key = (
        cfg.n,
        cfg.s,
        cfg.resolution,
        cfg.topology,
        cfg.hs_ref_mode,
        cfg.homotopy_order,
    )
    ctx = _CONTEXTS.get(key)
    if ctx is None:
        ctx = _CONTEXTS[key] = _Context(cfg)
    return ctx


def _remainders(ctx: _Context, wf: RadialField) -> tuple[np.ndarray, np.ndarray]:
    r1 = remainder_R1(wf, ctx.params, ctx.rule, targets=ctx.rows)
    r2 = remainder_R2(wf, ctx.params, ctx.rule, targets=ctx.rows)
    return r1, r2


def remainder_P(
    rho: RadialField, cfg: FlowConfig, ctx: _Context | None = None
) -> np.ndarray:
    """Explicitly treated part of the radial speed.

    P = (A - 1)(M rho - Hs_ref) + A (R1 + R2 (rho - 1)), so that the full
    speed A * (M rho - Hs_ref + R1 + R2 (rho-1)) equals
    (M rho - Hs_ref) + P with the matrix part available for implicit
    treatment.
    """
    ctx = ctx or _get_context(cfg)
    wf = ctx.to_work(rho.values)
    A = prefactor_A(wf)[: ctx.grid.size]
    r1, r2 = _remainders(ctx, wf)
    lin = ctx.M @ rho.values - ctx.hs_ref
    return (A - 1.0) * lin + A * (r1 + r2 * (rho.values - 1.0))


def assemble_rhs(
    rho: RadialField, cfg: FlowConfig, ctx: _Context | None = None
) -> np.ndarray:
    """Full radial speed d rho / dt at the current field."""
    ctx = ctx or _get_context(cfg)
    return ctx.M @ rho.values - ctx.hs_ref + remainder_P(rho, cfg, ctx)


def normal_velocity(
    rho: RadialField, cfg: FlowConfig, rhs: np.ndarray | None = None
) -> np.ndarray:
    """Normal speed of the surface: the radial speed divided by A."""
    ctx = _get_context(cfg)
    if rhs is None:
        rhs = assemble_rhs(rho, cfg, ctx)
    A = prefactor_A(ctx.to_work(rho.values))[: ctx.grid.size]
    return rhs / A


# ----------------------------------------------------------------------
# initial data
# ----------------------------------------------------------------------


def initial_field(grid: SphereGrid, spec: str) -> RadialField:
    """Build the starting field from a short textual form.

    Supported: "constant:c", "cosine:k:a" for 1 + a cos(k phi),
    "height:a" for 1 + a * x_(n+1), and "snapshot:path" to restart from a
    stored snapshot on a matching grid.
    """
    kind, _, rest = spec.partition(":")
    if kind == "constant":
        c = float(rest)
        return RadialField(grid, np.full(grid.size, c))
    if kind == "cosine":
        kstr, _, astr = rest.partition(":")
        k, a = int(kstr), float(astr)
        if grid.n != 1:
            raise ValueError("cosine initial data needs a curve grid")
        return RadialField(grid, 1.0 + a * np.cos(k * grid.phi))
    if kind == "height":
        a = float(rest)
        return RadialField(grid, 1.0 + a * grid.nodes[:, -1])
    if kind == "snapshot":
        from .snapshots import load_snapshot

        loaded_grid, values, _ = load_snapshot(rest)
        if loaded_grid.size != grid.size or loaded_grid.topology != grid.topology:
            raise ValueError("snapshot grid does not match the configured grid")
        return RadialField(grid, values)
    raise ValueError(f"unknown initial data form {spec!r}")


# ----------------------------------------------------------------------
# time stepping
# ----------------------------------------------------------------------


class _Reject(Exception):
    """Internal: retry the step with a smaller dt."""

    def __init__(self, message: str, injectivity: bool = False):
        super().__init__(message)
        self.injectivity = injectivity


def _picard(
    ctx: _Context, cfg: FlowConfig, rho_old: np.ndarray, dt: float
) -> tuple[np.ndarray, int]:
    has_bc = ctx.grid.boundary_indices().size > 0
    hat = rho_old.copy()
    solve = ctx.solver(dt)
    frozen = None
    for k in range(cfg.max_picard):
        if hat.min() <= 0.0:
            raise _Reject("iterate left the star-shaped regime")
        try:
            wf = ctx.to_work(hat)
            A = prefactor_A(wf)[: ctx.grid.size]
            if cfg.refresh_remainders == "per-step" and frozen is not None:
                r1, r2 = frozen
            else:
                r1, r2 = _remainders(ctx, wf)
                frozen = (r1, r2)
        except InjectivityError as exc:
            raise _Reject(str(exc), injectivity=True) from exc
        lin = ctx.M @ hat - ctx.hs_ref
        P = (A - 1.0) * lin + A * (r1 + r2 * (hat - 1.0))
        rhs = rho_old + dt * (P - ctx.hs_ref)
        u = solve(rhs)
        if not np.all(np.isfinite(u)) or u.min() <= 0.0:
            raise _Reject("implicit solve left the star-shaped regime")
        if has_bc:
            u = apply_bc(
                RadialField(ctx.grid, u), cfg.theta, tol=cfg.bc_tol
            ).values
        delta = np.abs(u - hat).max()
        hat = u
        if delta <= cfg.picard_tol * max(1.0, np.abs(u).max()):
            return hat, k + 1
    raise _Reject(f"picard loop did not settle in {cfg.max_picard} iterations")


def step(state: FlowState, cfg: FlowConfig) -> FlowState:
    """One backward Euler step, halving dt on rejection (at most 5 times)."""
    ctx = _get_context(cfg)
    dt = state.dt
    last = ""
    last_injective = False
    for _ in range(MAX_DT_HALVINGS + 1):
        try:
            new_vals, iters = _picard(ctx, cfg, state.rho.values, dt)
        except _Reject as rej:
            last = str(rej)
            last_injective = rej.injectivity
            dt *= 0.5
            continue
        if new_vals.min() < EXTINCTION_THRESHOLD:
            raise ExtinctionError(
                f"surface radius fell to {new_vals.min():.3g} at t = "
                f"{state.t + dt:.6g}"
            )
        rho_new = RadialField(ctx.grid, new_vals)
        if injectivity_ratio(rho_new) < 0.1:
            raise InjectivityError(
                "accepted step produced a nearly self-intersecting surface"
            )
        bres = bc_residual(rho_new, cfg.theta)
        return FlowState(
            t=state.t + dt,
            rho=rho_new,
            dt=dt,
            step=state.step + 1,
            picard_iters=iters,
            bc_residual_max=float(np.abs(bres).max()) if bres.size else 0.0,
        )
    if last_injective:
        # Halving dt cannot restore injectivity; report the true obstruction.
        raise InjectivityError(last)
    raise NonconvergenceError(
        f"step rejected after {MAX_DT_HALVINGS} dt halvings: {last}"
    )


def run_flow(cfg: FlowConfig) -> Trajectory:
    """Run the flow to its horizon, collecting diagnostics per step.

    Returns a trajectory whose status is "completed", "extinct",
    "nonconvergence", or "injectivity"; partial output is kept on early
    termination.
    """
    ctx = _get_context(cfg)
    grid = ctx.grid
    rho = initial_field(grid, cfg.initial)
    if grid.boundary_indices().size > 0:
        rho = apply_bc(rho, cfg.theta, tol=cfg.bc_tol)
    traj = Trajectory(config=cfg, grid=grid)
    state = FlowState(t=0.0, rho=rho, dt=cfg.dt)
    _record(traj, state, grid, cfg)
    horizon = cfg.horizon
    while state.t < horizon - 1e-12 * max(1.0, horizon):
        dt = min(cfg.dt, horizon - state.t)
        state = replace(state, dt=dt)
        try:
            state = step(state, cfg)
        except ExtinctionError as exc:
            traj.status, traj.message = "extinct", str(exc)
            break
        except InjectivityError as exc:
            traj.status, traj.message = "injectivity", str(exc)
            break
        except NonconvergenceError as exc:
            traj.status, traj.message = "nonconvergence", str(exc)
            break
        _record(traj, state, grid, cfg)
    if traj.saved[-1][0] != state.t and traj.status == "completed":
        traj.saved.append((state.t, state.rho.values.copy()))
    return traj


def _record(traj: Trajectory, state: FlowState, grid: SphereGrid, cfg: FlowConfig):
    vals = state.rho.values
    vol = volume(state.rho)
    mean = quad_integrate(grid, vals) / grid.weights.sum()
    traj.times.append(state.t)
    traj.diagnostics.append(
        {
            "t": state.t,
            "volume": vol,
            "sup_dev": float(np.abs(vals - mean).max()),
            "max_bc_residual": state.bc_residual_max,
            "picard_iters": state.picard_iters,
            "dt": state.dt,
        }
    )
    if state.step % cfg.save_every == 0:
        traj.saved.append((state.t, vals.copy()))


def operator_matrix(cfg: FlowConfig) -> np.ndarray:
    """The implicit-side matrix (reflected and folded in capillary runs)."""
    return _get_context(cfg).M.copy()
