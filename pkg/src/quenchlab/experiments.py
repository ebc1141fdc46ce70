"""Parameter sweeps for the quench/propagate dichotomies at desk scale.

Each scan runs the nonlinear solver across a monotone parameter grid,
classifies every point, and reports the bracket where the verdict flips.
Whenever a point quenches and the reaction admits a power envelope, a
certificate is attempted from a linear twin trace on the same grid and
recorded alongside the numerical verdict (validity is tracked separately;
a quenched run with an invalid certificate is still numerical evidence).

Stirred runs (nonzero amplitude) default to the x-periodic domain.  The
periodic solution starts from the wrapped datum, which dominates the
original one, so by the comparison principle it dominates the full-line
solution for all time: quenching on the periodic domain is sound upper
evidence for the line problem, and the periodic linear trace can only
overestimate the certificate integral.  A Dirichlet domain would instead
truncate mass that advection carries outward and could fake a quench.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .certificates import (
    Certificate,
    TailDivergentError,
    TailSpec,
    estimate_I,
    quench_certificate,
)
from .model import (
    EnvelopeDirection,
    FlowKind,
    FlowProfile,
    ReactionKind,
    ReactionSpec,
    ShearSpec,
    build_shear_profile,
    reaction_envelope_check,
    torus_nodes,
)
from .solver import (
    DetectorConfig,
    Field,
    Grid,
    RunStatus,
    RunVerdict,
    build_grid,
    gaussian_datum,
    indicator_datum,
    run_linear,
    solve,
    step,
)


# ---------------------------------------------------------------------------
# front measurements


def front_speed(verdict: RunVerdict, window: tuple[float, float],
                mean_drift: float = 0.0) -> tuple[float, float]:
    """Least-squares slope of the right front over the window.

    Positions are taken in the frame comoving with the mean drift.  Raises
    if the window holds fewer than 3 recorded fronts or any front was
    untracked inside it (no crossing, or too close to the boundary).
    """
    t0, t1 = window
    mask = (verdict.times >= t0) & (verdict.times <= t1)
    t = verdict.times[mask]
    r = verdict.front_right[mask]
    if t.size < 3:
        raise ValueError("window holds fewer than 3 recorded front samples")
    if np.isnan(r).any():
        raise ValueError("front left the tracked region inside the window")
    r = r - mean_drift * t
    design = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(design, r, rcond=None)
    resid = float(np.sqrt(np.mean((design @ coef - r) ** 2)))
    return float(coef[0]), resid


def front_width(field: Field, grid: Grid, lo: float = 0.2,
                hi: float = 0.8) -> float:
    """Distance between the hi and lo level crossings on the right front."""
    v = field.values
    prof = v.max(axis=1) if grid.m == 1 else v
    x = grid.x_nodes

    def rightmost_crossing(level: float) -> float:
        above = prof >= level
        if not above.any() or above.all():
            raise ValueError(f"profile has no {level:g} crossing")
        i = int(np.where(above)[0][-1])
        if i >= prof.size - 1:
            raise ValueError("crossing sits on the boundary")
        return float(x[i] + grid.dx * (prof[i] - level)
                     / (prof[i] - prof[i + 1]))

    return rightmost_crossing(lo) - rightmost_crossing(hi)


# ---------------------------------------------------------------------------
# sweep plumbing


@dataclass(frozen=True)
class SweepPoint:
    value: float
    status: RunStatus
    sup_final: float
    front_speed: float  # nan when not measured
    certificate: Certificate | None = None
    note: str = ""


@dataclass(frozen=True)
class SweepResult:
    """Verdicts across one parameter grid plus the detected bracket.

    bracket holds the adjacent (last value before the flip, first value
    after) pair when the verdict sequence flips exactly once; several
    flips leave bracket empty and are listed in flips with a warning note.
    """

    parameter: str
    points: tuple[SweepPoint, ...]
    bracket: tuple[float, float] | None
    flips: tuple[tuple[float, float], ...] = ()
    note: str = ""

    def statuses(self) -> list[RunStatus]:
        return [p.status for p in self.points]


def _bracket_from_flags(values, flags):
    flips = tuple((values[i], values[i + 1]) for i in range(len(flags) - 1)
                  if flags[i] != flags[i + 1])
    if len(flips) == 1:
        return flips[0], flips, ""
    if not flips:
        return None, flips, "no verdict transition inside the grid"
    return None, flips, "multiple verdict flips; horizon may be too short"


@dataclass(frozen=True)
class _PointJob:
    value: float
    x_extent: float
    nx: int
    m: int
    ny: int
    x_periodic: bool
    flow: FlowProfile | None
    reaction: ReactionSpec
    eta: float
    L: float
    horizon: float
    detectors: DetectorConfig
    cert_t1: float  # 0 disables the certificate attempt
    note: str = ""


def _attempt_certificate(job: _PointJob, grid: Grid) -> tuple[Certificate | None, str]:
    """Linear twin trace on the job's grid, then the quench certificate.

    Requires a declared power envelope with exponent above 3 (the exact
    dispersive tail needs alpha > 2) and, on Dirichlet grids, a trace whose
    boundary stayed clean so the measured part is not an undercount.
    """
    r = job.reaction
    if r.kind is not ReactionKind.POWER_LAW or r.p is None or r.c <= 0:
        return None, "no power envelope declared"
    alpha = r.p - 1.0
    if alpha <= 2.0:
        return None, "tail diverges for this exponent"
    if not reaction_envelope_check(r, EnvelopeDirection.UPPER):
        return None, "upper envelope check failed"
    datum = indicator_datum(grid, job.L, job.eta)
    trace = run_linear(datum, job.flow, grid, job.cert_t1, record_every=1)
    if not grid.x_periodic:
        edge = max(float(np.max(np.abs(trace.final.values[1]))),
                   float(np.max(np.abs(trace.final.values[-2]))))
        if edge > 1e-8:
            return None, "domain too small for a sound linear trace"
    try:
        I_upper = estimate_I(trace.times, trace.sups, alpha,
                             TailSpec.exact(job.L))
    except TailDivergentError:
        return None, "tail diverges for this exponent"
    cert = quench_certificate(I_upper, c=r.M * r.c, alpha=alpha, delta0=1.0,
                              tail_method="exact")
    return cert, ""


def _run_job(job: _PointJob) -> SweepPoint:
    grid = build_grid(job.x_extent, job.nx, m=job.m, ny=job.ny,
                      flow=job.flow, reaction=job.reaction,
                      x_periodic=job.x_periodic)
    datum = indicator_datum(grid, job.L, job.eta)
    verdict = solve(datum, job.flow, job.reaction, grid, job.horizon,
                    job.detectors)
    cert = None
    note = job.note
    if verdict.note:
        note = (note + "; " if note else "") + verdict.note
    if verdict.status is RunStatus.QUENCHED and job.cert_t1 > 0:
        cert, cert_note = _attempt_certificate(job, grid)
        if cert_note:
            note = (note + "; " if note else "") + cert_note
    return SweepPoint(job.value, verdict.status, float(verdict.sup_trace[-1]),
                      math.nan, cert, note)


def _execute(jobs: list[_PointJob], workers: int) -> list[SweepPoint]:
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


def _skip_point(value: float, note: str) -> SweepPoint:
    return SweepPoint(value, RunStatus.UNDECIDED, math.nan, math.nan, None,
                      note)


def _bisect_bracket(points, bracket, make_job, steps):
    """Narrow a single flip bracket by monotone bisection.

    Each midpoint run replaces the bracket endpoint whose outcome it
    shares; Undecided midpoints count as the non-quench side.  Returns the
    extended point list (sorted by value) and the narrowed bracket.
    """
    lo, hi = bracket
    by_value = {p.value: p for p in points}
    lo_quench = by_value[lo].status is RunStatus.QUENCHED
    extra = []
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if mid in by_value:
            break
        point = _run_job(make_job(mid))
        by_value[mid] = point
        extra.append(point)
        if (point.status is RunStatus.QUENCHED) == lo_quench:
            lo = mid
        else:
            hi = mid
    merged = sorted(points + extra, key=lambda p: p.value)
    return merged, (lo, hi)


def sweep_csv(result: SweepResult) -> str:
    """One row per point; certificate columns empty when none attached."""
    lines = ["param,value,status,sup_final,front_speed,cert_valid,"
             "cert_threshold"]
    for p in result.points:
        if p.certificate is None:
            valid, threshold = "", ""
        else:
            valid = str(p.certificate.valid)
            threshold = repr(p.certificate.threshold)
        lines.append(f"{result.parameter},{p.value!r},{p.status.value},"
                     f"{p.sup_final!r},{p.front_speed!r},{valid},{threshold}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# scans


def critical_length_scan(reaction: ReactionSpec, flow: FlowProfile | None,
                         eta: float, L_grid, *,
                         x_extent: float | None = None, nx: int | None = None,
                         ny: int = 32, horizon: float = 60.0,
                         detectors: DetectorConfig | None = None,
                         cert_t1: float = 1.0, refine: int = 0,
                         workers: int = 1) -> SweepResult:
    """Verdict per datum half-width L, datum eta * indicator of [-L, L].

    Quench is monotone-decreasing in L by the comparison principle, so a
    single flip is expected; all flips are reported when the horizon is
    too short to sort the near-critical points.  refine > 0 narrows a
    detected bracket by that many monotone bisection steps.
    """
    L_values = [float(L) for L in L_grid]
    if any(b <= a for a, b in zip(L_values, L_values[1:])):
        raise ValueError("L grid must increase")
    L_max = L_values[-1]
    if x_extent is None:
        x_extent = max(30.0, 4.0 * L_max)
    if nx is None:
        nx = int(round(x_extent * 10))
    det = detectors or DetectorConfig(check_every=20)
    if detectors is None and reaction.kind is ReactionKind.IGNITION:
        # below the cutoff the dynamics are purely diffusive, so crossing
        # it downward already decides extinction
        det = replace(det, quench_sup=0.9 * reaction.theta0)
    m = 0 if flow is None or flow.kind is FlowKind.ZERO else 1

    def make_job(L: float) -> _PointJob:
        return _PointJob(L, x_extent, nx, m, ny if m else 1, False, flow,
                         reaction, eta, L, horizon, det, cert_t1)

    points = _execute([make_job(L) for L in L_values], workers)
    flags = [p.status is RunStatus.QUENCHED for p in points]
    bracket, flips, note = _bracket_from_flags(L_values, flags)
    if bracket is not None and refine > 0:
        points, bracket = _bisect_bracket(points, bracket, make_job, refine)
    return SweepResult("L", tuple(points), bracket, flips, note)


def exponent_scan(p_grid, c: float, M: float, datum: tuple[float, float],
                  flow: FlowProfile | None, *,
                  x_extent: float = 150.0, nx: int = 750,
                  ny: int = 32, horizon: float = 400.0,
                  quench_sup: float = 0.01,
                  detectors: DetectorConfig | None = None,
                  cert_t1: float = 1.0, workers: int = 1) -> SweepResult:
    """Verdict per power-law exponent at a fixed small datum (eta, L).

    The critical exponent itself is skipped: finite-horizon numerics
    cannot adjudicate the borderline case, so p = 3 is reported Undecided
    by design.
    """
    eta, L = datum
    det = detectors or DetectorConfig(check_every=20, quench_sup=quench_sup)
    m = 0 if flow is None or flow.kind is FlowKind.ZERO else 1
    p_values = [float(p) for p in p_grid]
    jobs = {}
    for p in p_values:
        if p == 3.0:
            continue
        r = ReactionSpec.power_law(c=c, p=p, M=M)
        jobs[p] = _PointJob(p, x_extent, nx, m, ny if m else 1, False, flow,
                            r, eta, L, horizon, det, cert_t1)
    ran = _execute([jobs[p] for p in p_values if p in jobs], workers)
    ran_iter = iter(ran)
    points = [next(ran_iter) if p in jobs else
              _skip_point(p, "critical exponent, Undecided by design")
              for p in p_values]
    flags = [p.status is RunStatus.QUENCHED for p in points]
    bracket, flips, note = _bracket_from_flags(p_values, flags)
    return SweepResult("p", tuple(points), bracket, flips, note)


def amplitude_scan(A_grid, L: float, reaction: ReactionSpec,
                   profile: FlowProfile, *,
                   eta: float = 1.0, x_extent: float = 60.0, nx: int = 1200,
                   ny: int | None = None, horizon: float = 30.0,
                   quench_sup: float = 0.025,
                   detectors: DetectorConfig | None = None,
                   cert_t1: float = 16.0, refine: int = 0,
                   workers: int = 1) -> SweepResult:
    """Verdict per shear amplitude A with datum eta * indicator of [-L, L].

    A = 0 runs on the Dirichlet domain with front tracking (nothing is
    advected outward, so truncation is safe and the point is comparable to
    critical_length_scan).  A > 0 runs x-periodic; see the module note on
    why that is the sound direction for quench evidence.  The quench
    threshold sits above the periodic mean floor eta*2L/(2*x_extent), which
    mixing cannot cross.
    """
    if profile.kind is not FlowKind.SHEAR:
        raise ValueError("amplitude scan needs a shear profile")
    A_values = [float(A) for A in A_grid]
    if any(b <= a for a, b in zip(A_values, A_values[1:])):
        raise ValueError("amplitude grid must increase")
    if any(A < 0 for A in A_values):
        raise ValueError("amplitudes must be nonnegative")
    if profile.amplitude <= 0:
        raise ValueError("profile needs a positive reference amplitude")
    if ny is None:
        ny = profile.samples.size
    floor = eta * 2.0 * L / (2.0 * x_extent)
    if quench_sup <= floor:
        raise ValueError(
            f"quench threshold {quench_sup:g} is below the periodic mean "
            f"floor {floor:g}; enlarge the domain")
    det = detectors or DetectorConfig(check_every=50, quench_sup=quench_sup)

    def make_job(A: float) -> _PointJob:
        if A == 0.0:
            return _PointJob(A, x_extent, nx, 0, 1, False, None, reaction,
                             eta, L, horizon, replace(det, quench_sup=1e-3),
                             cert_t1)
        flow = profile.scaled(A / profile.amplitude)
        return _PointJob(A, x_extent, nx, 1, ny, True, flow, reaction,
                         eta, L, horizon, det, cert_t1)

    points = _execute([make_job(A) for A in A_values], workers)
    flags = [p.status is RunStatus.QUENCHED for p in points]
    bracket, flips, note = _bracket_from_flags(A_values, flags)
    if bracket is not None and refine > 0:
        points, bracket = _bisect_bracket(points, bracket, make_job, refine)
    return SweepResult("A", tuple(points), bracket, flips, note)


def plateau_scan(halfwidth_grid, A_large: float, reaction: ReactionSpec,
                 L: float, *, eta: float = 1.0, ny: int = 128,
                 x_extent: float = 60.0, nx: int = 1200,
                 horizon: float = 30.0, quench_sup: float = 0.025,
                 detectors: DetectorConfig | None = None,
                 cert_t1: float = 16.0, refine: int = 0,
                 workers: int = 1) -> SweepResult:
    """Verdict per plateau half-width at one large amplitude.

    Half-width 0 means the plain sine profile.  A surviving flame rides
    the plateau around the periodic domain, so non-quench points typically
    finish Undecided at the horizon; that is the expected evidence that
    the plateau shields the flame.
    """
    w_values = [float(w) for w in halfwidth_grid]
    if any(b <= a for a, b in zip(w_values, w_values[1:])):
        raise ValueError("half-width grid must increase")
    det = detectors or DetectorConfig(check_every=50, quench_sup=quench_sup)
    y = torus_nodes(ny)

    def make_job(w: float) -> _PointJob:
        spec = ShearSpec(amplitude=A_large) if w == 0.0 else \
            ShearSpec(plateaux=((0.5, w),), amplitude=A_large)
        flow = build_shear_profile(spec, y)
        return _PointJob(w, x_extent, nx, 1, ny, True, flow, reaction,
                         eta, L, horizon, det, cert_t1)

    points = _execute([make_job(w) for w in w_values], workers)
    flags = [p.status is RunStatus.QUENCHED for p in points]
    bracket, flips, note = _bracket_from_flags(w_values, flags)
    if bracket is not None and refine > 0:
        points, bracket = _bisect_bracket(points, bracket, make_job, refine)
    return SweepResult("plateau_halfwidth", tuple(points), bracket, flips,
                       note)


# ---------------------------------------------------------------------------
# coupling self-test


def scaling_check(reaction: ReactionSpec, M_factor: int, *,
                  x_extent: float = 8.0, nx: int = 160,
                  horizon: float = 2.0, amp: float = 0.8,
                  width: float = 1.0, dt: float | None = None,
                  n_probe_times: int = 4) -> float:
    """Max nodal deviation between a coupling-M run and its rescaling.

    Run A solves at coupling M_factor * reaction.M on the given grid; run B
    solves at coupling reaction.M on the sqrt(M_factor)-stretched grid with
    the stretched Gaussian datum and M_factor-slowed clock.  In the
    continuum the two are the same solution under
    (t, x) -> (M t, sqrt(M) x), so the deviation measures pure
    discretization error.  M_factor must be a perfect square so that the
    rescaled nodes land on grid points.
    """
    if M_factor < 1 or math.isqrt(M_factor) ** 2 != M_factor:
        raise ValueError("incompatible grids: M_factor must be a perfect "
                         "square so rescaled nodes coincide")
    root = math.isqrt(M_factor)
    rx_a = replace(reaction, M=reaction.M * M_factor)
    if dt is None:
        dx = 2.0 * x_extent / nx
        dt = 0.8 * min(0.5 / (rx_a.M * rx_a.d + 1e-12), dx * dx)
    grid_a = build_grid(x_extent, nx, dt=dt, reaction=rx_a)
    grid_b = build_grid(root * x_extent, M_factor * nx, dt=dt / M_factor,
                        reaction=reaction)
    datum_a = gaussian_datum(grid_a, amp, width)
    datum_b = gaussian_datum(grid_b, amp, root * width)

    n_steps_a = max(1, round(horizon / dt))
    probe_steps = sorted({max(1, round(n_steps_a * (k + 1) / n_probe_times))
                          for k in range(n_probe_times)})
    snaps_a = _snapshots_at(datum_a, rx_a, grid_a, probe_steps)
    snaps_b = _snapshots_at(datum_b, reaction, grid_b,
                            [M_factor * M_factor * k for k in probe_steps])
    worst = 0.0
    for fa, fb in zip(snaps_a, snaps_b):
        va = fa.values
        vb = fb.values[::M_factor] if M_factor > 1 else fb.values
        worst = max(worst, float(np.max(np.abs(va - vb))))
    return worst


def _snapshots_at(datum: Field, reaction: ReactionSpec, grid: Grid,
                  steps: list[int]) -> list[Field]:
    want = set(steps)
    out = []
    f = datum
    for k in range(1, max(steps) + 1):
        f = step(f, None, reaction, grid)
        if k in want:
            out.append(f)
    return out
