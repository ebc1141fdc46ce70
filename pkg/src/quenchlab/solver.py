"""Split-step solver for T_t = Lap(T) + u . grad(T) + M f(T) on a strip.

The domain is [-X, X] in x, truncated with homogeneous Dirichlet data (an
optional periodic-in-x mode wraps instead, which is the sound direction when
a sup-norm trace must dominate the untruncated problem), times the unit
torus in y when m = 1.  One step is Strang-split:

    half step implicit diffusion -> full upwind advection
    -> full reaction substep (RK4) -> half step implicit diffusion

Diffusion uses the trapezoidal rule per direction, dropping to backward
Euler whenever the trapezoidal explicit half would lose positivity
(tau > h*h for that direction); both variants are unconditionally stable
and monotone under that switch, so the discrete maximum principle holds.
The default time step obeys

    dt <= safety * min(dx / max|u|, 0.5 / (M d), dx*dx)

with safety 0.8; the last term keeps the splitting error in check, the
middle resolves the reaction, the first is the upwind CFL bound.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import solve_banded

from .model import FlowKind, FlowProfile, ReactionKind, ReactionSpec, _eval_raw


class StabilityError(RuntimeError):
    """Raised when a step grows the sup-norm beyond the reaction bound."""


class RunStatus(Enum):
    QUENCHED = "QuenchedNumerical"
    PROPAGATING = "PropagatingNumerical"
    UNDECIDED = "Undecided"
    DOMAIN_TOO_SMALL = "DomainTooSmall"


@dataclass(frozen=True)
class Grid:
    """Space-time discretization of the truncated strip.

    Dirichlet grids carry nx+1 nodes including the pinned endpoints;
    periodic grids carry nx nodes over a period of 2*x_extent.
    """

    x_extent: float
    nx: int
    m: int = 0
    ny: int = 1
    dt: float = 0.0
    x_periodic: bool = False

    @property
    def dx(self) -> float:
        return 2.0 * self.x_extent / self.nx

    @property
    def dy(self) -> float:
        return 1.0 / self.ny

    @property
    def x_nodes(self) -> np.ndarray:
        n = self.nx if self.x_periodic else self.nx + 1
        return -self.x_extent + self.dx * np.arange(n)

    @property
    def y_nodes(self) -> np.ndarray:
        return np.arange(self.ny) / self.ny

    @property
    def shape(self) -> tuple:
        n = self.nx if self.x_periodic else self.nx + 1
        return (n, self.ny) if self.m == 1 else (n,)


def stability_dt(grid_dx: float, flow: FlowProfile | None,
                 reaction: ReactionSpec | None, safety: float = 0.8) -> float:
    """Default dt from the advective CFL, reaction, and splitting bounds."""
    eps = 1e-12
    umax = flow.max_speed if flow is not None else 0.0
    md = reaction.M * reaction.d if reaction is not None else 0.0
    return safety * min(grid_dx / (umax + eps),
                        0.5 / (md + eps),
                        grid_dx * grid_dx)


def build_grid(x_extent: float, nx: int, m: int = 0, ny: int = 1,
               dt: float | None = None, flow: FlowProfile | None = None,
               reaction: ReactionSpec | None = None,
               x_periodic: bool = False) -> Grid:
    if x_extent <= 0 or nx < 4:
        raise ValueError("need x_extent > 0 and nx >= 4")
    if m not in (0, 1):
        raise ValueError("m must be 0 or 1")
    if m == 1 and ny < 4:
        raise ValueError("need ny >= 4 when m = 1")
    if m == 0:
        ny = 1
    dx = 2.0 * x_extent / nx
    dt_max = stability_dt(dx, flow, reaction)
    if dt is None:
        dt = dt_max
    elif dt <= 0 or dt > dt_max * (1 + 1e-9):
        raise ValueError(
            f"dt={dt:g} violates the stability contract (max {dt_max:g})")
    return Grid(x_extent, nx, m, ny, dt, x_periodic)


@dataclass(frozen=True)
class Field:
    """Nodal values at one time; row-major (x, y) layout when m = 1."""

    values: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.values).all():
            raise ValueError("field contains non-finite values")


def indicator_datum(grid: Grid, L: float, eta: float = 1.0) -> Field:
    """eta * indicator of |x| <= L, constant in y."""
    x = grid.x_nodes
    col = np.where(np.abs(x) <= L, eta, 0.0)
    if grid.m == 1:
        col = np.repeat(col[:, None], grid.ny, axis=1)
    return Field(col)


def gaussian_datum(grid: Grid, amp: float = 1.0, width: float = 2.0) -> Field:
    """amp * exp(-x^2 / (2 width^2)), constant in y."""
    x = grid.x_nodes
    col = amp * np.exp(-x * x / (2.0 * width * width))
    if not grid.x_periodic:
        col[0] = 0.0
        col[-1] = 0.0
    if grid.m == 1:
        col = np.repeat(col[:, None], grid.ny, axis=1)
    return Field(col)


def field_norms(f: Field, grid: Grid) -> tuple[float, float]:
    """(sup, l1) with l1 the cell quadrature sum * dx * dy."""
    v = f.values
    sup = float(np.max(np.abs(v)))
    l1 = float(np.sum(np.abs(v)) * grid.dx * (grid.dy if grid.m == 1 else 1.0))
    return sup, l1


# ---------------------------------------------------------------------------
# split operators


def _theta_for(tau: float, h: float) -> float:
    # trapezoidal explicit half keeps positivity only for tau <= h*h
    return 0.5 if tau <= h * h else 1.0


def _diffuse_x_dirichlet(v: np.ndarray, tau: float, dx: float) -> np.ndarray:
    theta = _theta_for(tau, dx)
    n = v.shape[0] - 2  # interior unknowns
    if n < 1:
        return v
    r = tau / (dx * dx)
    interior = v[1:-1]
    flat = interior.reshape(n, -1)
    # explicit half
    rhs = flat * (1.0 - 2.0 * (1 - theta) * r)
    rhs += (1 - theta) * r * v[:-2].reshape(n, -1)
    rhs += (1 - theta) * r * v[2:].reshape(n, -1)
    # implicit tridiagonal solve
    ab = np.zeros((3, n))
    ab[0, 1:] = -theta * r
    ab[1, :] = 1.0 + 2.0 * theta * r
    ab[2, :-1] = -theta * r
    sol = solve_banded((1, 1), ab, rhs)
    out = v.copy()
    out[1:-1] = sol.reshape(interior.shape)
    out[0] = 0.0
    out[-1] = 0.0
    return out


def _diffuse_periodic(v: np.ndarray, tau: float, h: float,
                      axis: int) -> np.ndarray:
    theta = _theta_for(tau, h)
    n = v.shape[axis]
    lam = -4.0 * np.sin(np.pi * np.arange(n // 2 + 1) / n) ** 2 / (h * h)
    mult = (1.0 + (1 - theta) * tau * lam) / (1.0 - theta * tau * lam)
    spec = np.fft.rfft(v, axis=axis)
    shape = [1] * v.ndim
    shape[axis] = mult.size
    spec *= mult.reshape(shape)
    return np.fft.irfft(spec, n=n, axis=axis)


def _diffuse(v: np.ndarray, tau: float, grid: Grid) -> np.ndarray:
    if grid.x_periodic:
        v = _diffuse_periodic(v, tau, grid.dx, axis=0)
    else:
        v = _diffuse_x_dirichlet(v, tau, grid.dx)
    if grid.m == 1:
        v = _diffuse_periodic(v, tau, grid.dy, axis=1)
    return v


def _shift_x(v: np.ndarray, k: int, grid: Grid) -> np.ndarray:
    if grid.x_periodic:
        return np.roll(v, -k, axis=0)
    out = np.empty_like(v)
    if k == 1:
        out[:-1] = v[1:]
        out[-1] = 0.0
    else:
        out[1:] = v[:-1]
        out[0] = 0.0
    return out


def _advect(v: np.ndarray, dt: float, flow: FlowProfile,
            grid: Grid) -> np.ndarray:
    """First-order upwind transport by dt for the term + u . grad(T)."""
    dx = grid.dx
    if flow.kind is FlowKind.SHEAR:
        a = flow.samples[None, :] if grid.m == 1 else float(flow.samples[0])
        a_pos = np.maximum(a, 0.0)
        a_neg = np.minimum(a, 0.0)
        fwd = (_shift_x(v, 1, grid) - v) / dx
        bwd = (v - _shift_x(v, -1, grid)) / dx
        out = v + dt * (a_pos * fwd + a_neg * bwd)
    else:  # Periodic2D
        ax = flow.u_x
        ay = flow.u_y
        fwd = (_shift_x(v, 1, grid) - v) / dx
        bwd = (v - _shift_x(v, -1, grid)) / dx
        out = v + dt * (np.maximum(ax, 0.0) * fwd + np.minimum(ax, 0.0) * bwd)
        dy = grid.dy
        fwd_y = (np.roll(v, -1, axis=1) - v) / dy
        bwd_y = (v - np.roll(v, 1, axis=1)) / dy
        out += dt * (np.maximum(ay, 0.0) * fwd_y + np.minimum(ay, 0.0) * bwd_y)
    if not grid.x_periodic:
        out[0] = 0.0
        out[-1] = 0.0
    return out


def _react(v: np.ndarray, dt: float, reaction: ReactionSpec) -> np.ndarray:
    """One RK4 substep of dT/dt = M f(T), stage values clamped to [0, 1]."""
    M = reaction.M

    def rate(w):
        return M * _eval_raw(reaction, np.clip(w, 0.0, 1.0))

    k1 = rate(v)
    k2 = rate(v + 0.5 * dt * k1)
    k3 = rate(v + 0.5 * dt * k2)
    k4 = rate(v + dt * k3)
    out = v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return np.clip(out, 0.0, 1.0)


def step(f: Field, flow: FlowProfile | None, reaction: ReactionSpec | None,
         grid: Grid) -> Field:
    """Advance one Strang step; raises StabilityError on sup-norm blowup."""
    dt = grid.dt
    v = f.values
    old_sup = float(np.max(np.abs(v)))
    v = _diffuse(v, 0.5 * dt, grid)
    if flow is not None and flow.kind is not FlowKind.ZERO:
        v = _advect(v, dt, flow, grid)
    if reaction is not None and not (
            reaction.kind is ReactionKind.POWER_LAW and reaction.c == 0.0):
        v = _react(v, dt, reaction)
    v = _diffuse(v, 0.5 * dt, grid)
    v = np.clip(v, 0.0, 1.0) if old_sup <= 1.0 else np.maximum(v, 0.0)
    md = reaction.M * reaction.d if reaction is not None else 0.0
    new_sup = float(np.max(np.abs(v)))
    bound = old_sup * math.exp(md * dt) * (1 + 1e-10) + 1e-14
    if new_sup > bound:
        raise StabilityError(
            f"sup grew {old_sup:g} -> {new_sup:g} at t={f.time:g}, "
            f"beyond exp(M d dt) = {math.exp(md * dt):g}")
    return Field(v, f.time + dt)


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class DetectorConfig:
    """Heuristic thresholds for run verdicts; all tunable per run.

    quench_sup        sup-norm level counted as numerically quenched
    occupancy_level   temperature the growing ball must exceed
    gamma             ball radius growth rate (radius = gamma * t)
    sustain           trailing fraction of elapsed time a verdict condition
                      must hold over
    boundary_tol      contamination threshold at boundary-adjacent nodes
    margin_cells      front tracking stops this close to the boundary
    check_every       steps between detector sweeps
    min_time          no verdict before this time (initial data transients)
    wall_budget_s     optional wall-clock cap; exceeding it yields Undecided
    early_exit        stop at the first verdict; when False the verdict
                      latches but stepping and recording continue to the
                      horizon (useful for speed fits on long front traces)
    """

    quench_sup: float = 1e-3
    occupancy_level: float = 0.9
    gamma: float = 0.05
    sustain: float = 0.1
    boundary_tol: float = 1e-8
    margin_cells: int = 5
    check_every: int = 10
    min_time: float = 1.0
    wall_budget_s: float | None = None
    early_exit: bool = True


@dataclass(frozen=True)
class RunVerdict:
    """Outcome of a solve: status plus the recorded traces."""

    status: RunStatus
    times: np.ndarray
    sup_trace: np.ndarray
    l1_trace: np.ndarray
    front_left: np.ndarray
    front_right: np.ndarray
    final: Field
    contaminated: bool = False
    note: str = ""


def _front_positions(v: np.ndarray, grid: Grid,
                     margin_cells: int) -> tuple[float, float]:
    """Rightmost/leftmost half-level crossings of max-over-y, interpolated.

    NaN when there is no crossing or a front sits within margin_cells of the
    boundary (periodic grids never report fronts).
    """
    if grid.x_periodic:
        return (math.nan, math.nan)
    prof = v.max(axis=1) if grid.m == 1 else v
    x = grid.x_nodes
    above = prof >= 0.5
    if not above.any():
        return (math.nan, math.nan)
    i_hi = int(np.where(above)[0][-1])
    i_lo = int(np.where(above)[0][0])
    n = prof.size
    lim = margin_cells
    if i_hi >= n - 1 - lim or i_lo <= lim:
        return (math.nan, math.nan)
    right = x[i_hi] + grid.dx * (prof[i_hi] - 0.5) / (prof[i_hi] - prof[i_hi + 1])
    left = x[i_lo] - grid.dx * (prof[i_lo] - 0.5) / (prof[i_lo] - prof[i_lo - 1])
    return (float(left), float(right))


def _window_start(times: list[float], frac: float) -> int:
    t_now = times[-1]
    cut = t_now * (1.0 - frac)
    i = 0
    while i < len(times) - 1 and times[i] < cut:
        i += 1
    return max(0, i - 1)


def solve(initial: Field, flow: FlowProfile | None,
          reaction: ReactionSpec | None, grid: Grid, horizon: float,
          detectors: DetectorConfig = DetectorConfig()) -> RunVerdict:
    """Step to the horizon or to an early verdict.

    Quenched requires a sub-threshold, monotone-decreasing sup-norm over the
    trailing window and an uncontaminated boundary (Dirichlet truncation can
    only fake a quench, never a propagation, so contamination blocks quench
    verdicts while propagation stays decidable).
    """
    f = initial
    n_steps = max(1, math.ceil(horizon / grid.dt))
    times: list[float] = []
    sups: list[float] = []
    l1s: list[float] = []
    lefts: list[float] = []
    rights: list[float] = []
    contaminated = False
    status = RunStatus.UNDECIDED
    note = ""
    started = _time.monotonic()

    def record(fld: Field) -> None:
        sup, l1 = field_norms(fld, grid)
        lf, rt = _front_positions(fld.values, grid, detectors.margin_cells)
        times.append(fld.time)
        sups.append(sup)
        l1s.append(l1)
        lefts.append(lf)
        rights.append(rt)

    record(f)
    if sups[-1] < detectors.quench_sup:
        return RunVerdict(RunStatus.QUENCHED, np.array(times), np.array(sups),
                          np.array(l1s), np.array(lefts), np.array(rights),
                          f, False, "initial datum already below threshold")

    decided = False
    for k in range(n_steps):
        f = step(f, flow, reaction, grid)
        if (k + 1) % detectors.check_every and k + 1 < n_steps:
            continue
        record(f)
        v = f.values
        if not grid.x_periodic and not contaminated:
            edge = max(float(np.max(np.abs(v[1]))), float(np.max(np.abs(v[-2]))))
            if edge > detectors.boundary_tol:
                contaminated = True
        if detectors.wall_budget_s is not None:
            if _time.monotonic() - started > detectors.wall_budget_s:
                if not decided:
                    status = RunStatus.UNDECIDED
                    note = "wall-clock budget exceeded"
                    decided = True
                break
        if decided or f.time < detectors.min_time:
            continue
        w0 = _window_start(times, detectors.sustain)
        window = sups[w0:]
        if len(window) >= 3:
            below = max(window) < detectors.quench_sup
            mono = all(b <= a + 1e-12 for a, b in zip(window, window[1:]))
            if below and mono:
                if contaminated:
                    status = RunStatus.DOMAIN_TOO_SMALL
                    note = "sup decayed but boundary saw mass"
                else:
                    status = RunStatus.QUENCHED
                decided = True
                if detectors.early_exit:
                    break
                continue
        if not grid.x_periodic:
            radius = detectors.gamma * f.time
            x = grid.x_nodes
            ball = np.abs(x) <= max(radius, 3 * grid.dx)
            if radius >= 3 * grid.dx and ball.any():
                vmin = (v[ball].min() if grid.m == 0
                        else v[ball, :].min())
                rs = [r for r in rights[w0:] if not math.isnan(r)]
                ls = [l for l in lefts[w0:] if not math.isnan(l)]
                advancing = (len(rs) >= 3
                             and all(b >= a - 0.5 * grid.dx
                                     for a, b in zip(rs, rs[1:]))
                             and rs[-1] > rs[0]
                             and all(b <= a + 0.5 * grid.dx
                                     for a, b in zip(ls, ls[1:])))
                if vmin > detectors.occupancy_level and advancing:
                    status = RunStatus.PROPAGATING
                    decided = True
                    if detectors.early_exit:
                        break

    if not decided and contaminated:
        status = RunStatus.DOMAIN_TOO_SMALL
        note = note or "boundary-adjacent values exceeded tolerance"
    return RunVerdict(status, np.array(times), np.array(sups), np.array(l1s),
                      np.array(lefts), np.array(rights), f, contaminated, note)


def run_linear(initial: Field, flow: FlowProfile | None, grid: Grid,
               t_end: float, record_every: int = 1,
               probe_times: tuple[float, ...] = ()) -> "LinearTrace":
    """Drift-diffusion evolution recording the sup-norm trace.

    Snapshots are kept at the first step reaching each probe time.
    """
    f = initial
    n_steps = max(1, math.ceil(t_end / grid.dt))
    times = [0.0]
    sups = [field_norms(f, grid)[0]]
    snaps: dict[float, Field] = {}
    pending = sorted(probe_times)
    for k in range(n_steps):
        f = step(f, flow, None, grid)
        while pending and f.time >= pending[0] - 1e-12:
            snaps[pending.pop(0)] = f
        if (k + 1) % record_every == 0 or k + 1 == n_steps:
            times.append(f.time)
            sups.append(field_norms(f, grid)[0])
    return LinearTrace(np.array(times), np.array(sups), f, snaps)


@dataclass(frozen=True)
class LinearTrace:
    times: np.ndarray
    sups: np.ndarray
    final: Field
    snapshots: dict

    def sup_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.sups))


# ---------------------------------------------------------------------------
# snapshot and trace files


def save_snapshot(path, f: Field, grid: Grid) -> None:
    """Text snapshot: header `t nx ny dx dy X m`, then row-major values."""
    with open(path, "w") as fh:
        fh.write(f"{f.time!r} {grid.nx} {grid.ny} {grid.dx!r} {grid.dy!r} "
                 f"{grid.x_extent!r} {grid.m}\n")
        flat = np.asarray(f.values).reshape(-1)
        fh.write("\n".join(repr(float(x)) for x in flat))
        fh.write("\n")


def load_snapshot(path) -> tuple[Field, Grid]:
    with open(path) as fh:
        head = fh.readline().split()
        t = float(head[0])
        nx, ny = int(head[1]), int(head[2])
        x_extent = float(head[5])
        m = int(head[6])
        vals = np.array([float(s) for s in fh.read().split()])
    n_nodes = vals.size // ny if m == 1 else vals.size
    x_periodic = n_nodes == nx
    grid = Grid(x_extent, nx, m, ny if m == 1 else 1, 0.0, x_periodic)
    shape = grid.shape
    return Field(vals.reshape(shape), t), grid


def trace_to_csv(path, verdict: RunVerdict, config_hash: str = "") -> None:
    with open(path, "w") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write("t,sup,l1,front_left,front_right\n")
        for row in zip(verdict.times, verdict.sup_trace, verdict.l1_trace,
                       verdict.front_left, verdict.front_right):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
