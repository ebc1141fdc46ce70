"""Reaction families and shear/cellular flow profiles.

Reactions are nonlinearities f on [0, 1] with f(0) = f(1) = 0, carrying the
quantitative attributes the rest of the toolkit needs: a cached Lipschitz-type
bound d = sup f(T)/T and a declared power envelope f(T) <= c*T**p (or >=, for
the lower direction) on [0, theta].  Flow profiles are tabulated velocity
fields: a shear u(y) on the unit torus, a divergence-free cell flow, or no
flow at all.  Profiles record their plateau structure (maximal intervals of
exact constancy) and their mean drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import minimize_scalar


class ReactionKind(Enum):
    POWER_LAW = "PowerLaw"
    ARRHENIUS = "Arrhenius"
    IGNITION = "Ignition"


class FlowKind(Enum):
    ZERO = "Zero"
    SHEAR = "Shear"
    PERIODIC2D = "Periodic2D"


class EnvelopeDirection(Enum):
    UPPER = "Upper"
    LOWER = "Lower"


@dataclass(frozen=True)
class EnvelopeCheck:
    """Result of a pointwise envelope verification.

    Truthy iff the inequality held at every sample; otherwise ``witness``
    is the first violating temperature.
    """

    ok: bool
    witness: float | None = None

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class ReactionSpec:
    """One reaction nonlinearity plus its coupling and envelope metadata.

    kind      reaction family
    M         coupling multiplying f in the PDE
    c         envelope constant (and the prefactor for PowerLaw)
    p         envelope exponent; for PowerLaw also the zero-order of f at 0.
              p >= 1 is accepted so the classical quadratic T*(1-T) is
              expressible; certificate machinery separately requires p > 1.
    arr_c     Arrhenius activation constant
    theta0    ignition cutoff
    theta     upper end of the envelope's validity range
    d         cached sup of f(T)/T over (0, 1]
    """

    kind: ReactionKind
    M: float = 1.0
    c: float = 1.0
    p: float | None = None
    arr_c: float | None = None
    theta0: float | None = None
    theta: float = 1.0
    d: float = field(init=False, default=0.0)

    def __post_init__(self) -> None:
        if self.M < 0:
            raise ValueError("coupling M must be nonnegative")
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if self.kind is ReactionKind.POWER_LAW:
            if self.p is None or self.p < 1:
                raise ValueError("PowerLaw exponent p must be at least 1")
            if self.c < 0:
                raise ValueError("PowerLaw prefactor c must be nonnegative")
        elif self.kind is ReactionKind.ARRHENIUS:
            if self.arr_c is None or self.arr_c <= 0:
                raise ValueError("Arrhenius constant arr_c must be positive")
        elif self.kind is ReactionKind.IGNITION:
            if self.theta0 is None or not 0 < self.theta0 < 1:
                raise ValueError("ignition cutoff theta0 must lie in (0, 1)")
        object.__setattr__(self, "d", _lipschitz_bound(self))

    @staticmethod
    def power_law(c: float = 1.0, p: float = 2.0, M: float = 1.0,
                  theta: float = 1.0) -> "ReactionSpec":
        return ReactionSpec(ReactionKind.POWER_LAW, M=M, c=c, p=p, theta=theta)

    @staticmethod
    def arrhenius(arr_c: float = 1.0, M: float = 1.0, theta: float = 1.0,
                  c: float = 1.0, p: float | None = None) -> "ReactionSpec":
        return ReactionSpec(ReactionKind.ARRHENIUS, M=M, c=c, p=p,
                            arr_c=arr_c, theta=theta)

    @staticmethod
    def ignition(theta0: float = 0.25, M: float = 1.0,
                 theta: float = 1.0) -> "ReactionSpec":
        return ReactionSpec(ReactionKind.IGNITION, M=M, theta0=theta0,
                            theta=theta)

    @staticmethod
    def zero() -> "ReactionSpec":
        return ReactionSpec(ReactionKind.POWER_LAW, c=0.0, p=2.0)

    @property
    def ignition_kappa(self) -> float:
        # normalization making max f = 1/4, the height of T*(1-T)
        assert self.theta0 is not None
        return (1.0 - self.theta0) ** -2


def _eval_raw(spec: ReactionSpec, T: np.ndarray) -> np.ndarray:
    """f(T) without range validation; T assumed inside [0, 1]."""
    if spec.kind is ReactionKind.POWER_LAW:
        return spec.c * _pow(T, spec.p) * (1.0 - T)
    if spec.kind is ReactionKind.ARRHENIUS:
        out = np.zeros_like(T)
        pos = T > 0
        out[pos] = np.exp(-spec.arr_c / T[pos]) * (1.0 - T[pos])
        return out
    # ignition
    kappa = spec.ignition_kappa
    return kappa * np.maximum(T - spec.theta0, 0.0) * (1.0 - T)


def _pow(T: np.ndarray, p: float) -> np.ndarray:
    # integer exponents cover the common cases and dodge np.power's cost
    if p == int(p) and 1 <= p <= 8:
        out = T.copy()
        for _ in range(int(p) - 1):
            out *= T
        return out
    return np.power(T, p)


def eval_reaction(spec: ReactionSpec, T):
    """Evaluate f(T) for scalar or array T in [0, 1]."""
    arr = np.asarray(T, dtype=float)
    if arr.size and (arr.min() < -1e-12 or arr.max() > 1.0 + 1e-12):
        raise ValueError("temperature outside [0, 1]")
    vals = _eval_raw(spec, np.clip(arr, 0.0, 1.0))
    if np.isscalar(T) or arr.ndim == 0:
        return float(vals)
    return vals


def _lipschitz_bound(spec: ReactionSpec) -> float:
    """sup of f(T)/T over (0, 1], closed-form where available."""
    if spec.kind is ReactionKind.POWER_LAW:
        if spec.c == 0.0:
            return 0.0
        if spec.p == 1.0:
            return float(spec.c)  # f/T = c*(1-T), sup at T -> 0
        t_star = (spec.p - 1.0) / spec.p
        return float(spec.c * t_star ** (spec.p - 1.0) * (1.0 - t_star))
    if spec.kind is ReactionKind.IGNITION:
        # g(T) = kappa*(T-theta0)*(1-T)/T has its maximum at T = sqrt(theta0)
        kappa = (1.0 - spec.theta0) ** -2
        return float(kappa * (1.0 - math.sqrt(spec.theta0)) ** 2)
    # Arrhenius: numeric 1-D maximization of exp(-a/T)*(1-T)/T
    a = spec.arr_c

    def neg(T: float) -> float:
        return -math.exp(-a / T) * (1.0 - T) / T

    res = minimize_scalar(neg, bounds=(1e-9, 1.0), method="bounded",
                          options={"xatol": 1e-12})
    return float(-res.fun)


def reaction_lipschitz(spec: ReactionSpec) -> float:
    """Smallest d with f(T) <= d*T on [0, 1] (tight to ~1e-9)."""
    return _lipschitz_bound(spec)


def reaction_envelope_check(spec: ReactionSpec,
                            direction: EnvelopeDirection,
                            c: float | None = None,
                            p: float | None = None,
                            theta: float | None = None,
                            n_samples: int = 10_000,
                            tol: float = 1e-12) -> EnvelopeCheck:
    """Verify f <= c*T**p (Upper) or f >= c*T**p (Lower) on [0, theta].

    Defaults come from the reaction's own parameters; overrides let
    callers check non-declared envelopes (an Arrhenius reaction has no
    intrinsic exponent, for instance).  Dense sampling with n_samples
    points.
    """
    c_env = spec.c if c is None else c
    p_env = spec.p if p is None else p
    t_env = spec.theta if theta is None else theta
    if p_env is None:
        raise ValueError("no envelope exponent declared and none supplied")
    T = np.linspace(0.0, t_env, n_samples)
    f = _eval_raw(spec, T)
    env = c_env * np.power(T, p_env)
    if direction is EnvelopeDirection.UPPER:
        bad = f > env + tol
    else:
        bad = f < env - tol
    if bad.any():
        return EnvelopeCheck(False, float(T[int(np.argmax(bad))]))
    return EnvelopeCheck(True)


# ---------------------------------------------------------------------------
# flow profiles


@dataclass(frozen=True)
class FlowProfile:
    """A tabulated velocity field.

    Shear profiles store x-velocity samples u(y_j) on the torus grid; the
    samples already include the amplitude.  Cell flows store both velocity
    components on the full space grid.  ``plateaux`` lists maximal intervals
    of exact constancy as (center, half_width) pairs in torus coordinates.
    """

    kind: FlowKind
    amplitude: float = 0.0
    samples: np.ndarray | None = None
    u_x: np.ndarray | None = None
    u_y: np.ndarray | None = None
    plateaux: tuple[tuple[float, float], ...] = ()
    mean: float = 0.0

    def scaled(self, factor: float) -> "FlowProfile":
        """Same shape with all velocities multiplied by factor."""
        if self.kind is FlowKind.ZERO:
            return self
        if self.kind is FlowKind.SHEAR:
            return FlowProfile(self.kind, self.amplitude * factor,
                               samples=self.samples * factor,
                               plateaux=self.plateaux,
                               mean=self.mean * factor)
        return FlowProfile(self.kind, self.amplitude * factor,
                           u_x=self.u_x * factor, u_y=self.u_y * factor,
                           mean=self.mean * factor)

    @property
    def max_speed(self) -> float:
        if self.kind is FlowKind.ZERO:
            return 0.0
        if self.kind is FlowKind.SHEAR:
            return float(np.max(np.abs(self.samples)))
        # component sum so a single CFL bound covers both upwind sweeps
        return float(np.max(np.abs(self.u_x)) + np.max(np.abs(self.u_y)))


@dataclass(frozen=True)
class ShearSpec:
    """Construction request for a mean-zero shear profile.

    plateaux   (center, half_width) pairs on the unit torus; empty for the
               pure sinusoid
    amplitude  overall velocity scale
    """

    plateaux: tuple[tuple[float, float], ...] = ()
    amplitude: float = 1.0


def zero_flow() -> FlowProfile:
    return FlowProfile(FlowKind.ZERO)


def torus_nodes(ny: int) -> np.ndarray:
    return np.arange(ny) / ny


def _circ_dist(y: np.ndarray, c: float) -> np.ndarray:
    d = np.abs((y - c) % 1.0)
    return np.minimum(d, 1.0 - d)


def build_shear_profile(spec: ShearSpec, grid_y: np.ndarray) -> FlowProfile:
    """Tabulate a mean-zero shear with exactly the requested plateaux.

    Without plateaux the shape is sin(2*pi*y).  With plateaux, constant
    stretches are joined by C1 cubic arcs; consecutive plateaux of equal
    height get a single smooth hump instead (on a circle a lone plateau
    cannot have a monotone complement).  The result is renormalized to
    grid-average zero, then scaled by the amplitude.
    """
    y = np.asarray(grid_y, dtype=float)
    ny = y.size
    if ny < 8:
        raise ValueError("torus grid too coarse for a shear profile")
    if not spec.plateaux:
        shape = np.sin(2.0 * np.pi * y)
    else:
        shape = _plateau_shape(spec.plateaux, y)
    shape = shape - shape.mean()
    samples = spec.amplitude * shape
    dy = 1.0 / ny
    plateaux = detect_plateaux(samples, dy)
    mean = float(samples.mean())
    return FlowProfile(FlowKind.SHEAR, amplitude=spec.amplitude,
                       samples=samples, plateaux=plateaux, mean=mean)


def sin_shear(grid_y: np.ndarray, amplitude: float = 1.0) -> FlowProfile:
    return build_shear_profile(ShearSpec(amplitude=amplitude), grid_y)


def _plateau_shape(plateaux, y: np.ndarray) -> np.ndarray:
    ny = y.size
    entries = sorted(plateaux, key=lambda cw: cw[0] % 1.0)
    for c, w in entries:
        if w <= 0:
            raise ValueError("plateau half-width must be positive")
    if sum(2 * w for _, w in entries) >= 1.0:
        raise ValueError("plateaux cover the whole torus")
    k = len(entries)
    if k > 1:
        # consecutive gaps plus plateau lengths must tile the torus exactly;
        # an overlap wraps its gap past 1 and breaks the sum
        gaps = []
        for i in range(k):
            c0, w0 = entries[i]
            c1, w1 = entries[(i + 1) % k]
            gaps.append(((c1 - w1) - (c0 + w0)) % 1.0)
        total = sum(2 * w for _, w in entries) + sum(gaps)
        if abs(total - 1.0) > 1e-9 or min(gaps) <= 1e-12:
            raise ValueError("plateaux overlap")
    heights = [1.0 if i % 2 == 0 else -1.0 for i in range(k)]

    shape = np.empty(ny)
    assigned = np.zeros(ny, dtype=bool)
    for (c, w), h in zip(entries, heights):
        mask = _circ_dist(y, c % 1.0) <= w + 1e-12
        shape[mask] = h
        assigned[mask] = True

    # fill each gap between consecutive plateaux
    for i in range(k):
        c0, w0 = entries[i]
        c1, w1 = entries[(i + 1) % k]
        h0, h1 = heights[i], heights[(i + 1) % k]
        start = (c0 + w0) % 1.0
        length = ((c1 - w1) - start) % 1.0
        if k == 1:
            length = (1.0 - 2 * w0) % 1.0
        rel = ((y - start) % 1.0) / length
        in_gap = ~assigned & (rel < 1.0)
        t = rel[in_gap]
        if h0 != h1:
            s = 3 * t * t - 2 * t * t * t  # C1 smoothstep join
            shape[in_gap] = h0 + (h1 - h0) * s
        else:
            # equal heights: one smooth hump with zero end slopes
            dip = -2.0 if h0 > 0 else 2.0
            shape[in_gap] = h0 + dip * np.sin(np.pi * t) ** 2
        assigned[in_gap] = True
    if not assigned.all():
        # nodes at exact junctions; inherit the nearest plateau height
        idx = np.where(~assigned)[0]
        for j in idx:
            shape[j] = shape[(j - 1) % ny]
    return shape


def detect_plateaux(samples: np.ndarray, dy: float,
                    atol: float = 1e-12) -> tuple[tuple[float, float], ...]:
    """Maximal runs of adjacent equal samples, as (center, half_width).

    A run must span at least two nodes to count as an interval.  Runs are
    found on the circle, so a plateau across y = 0 is reported once.
    """
    u = np.asarray(samples, dtype=float)
    ny = u.size
    scale = max(1.0, float(np.max(np.abs(u)))) if ny else 1.0
    # flat[i] says nodes i and i+1 (mod ny) carry the same value
    flat = np.abs(u - np.roll(u, -1)) <= atol * scale
    if flat.all():
        return ((0.5, 0.5),)
    if not flat.any():
        return ()
    starts = np.where(flat & ~np.roll(flat, 1))[0]
    out = []
    for s in starts:
        j = int(s)
        while flat[j % ny]:
            j += 1
        # equal nodes s .. j span (j - s) cells on the circle
        center = ((s + j) / 2.0 * dy) % 1.0
        half = (j - s) * dy / 2.0
        out.append((center, half))
    out.sort(key=lambda cw: cw[0])
    return tuple(out)


def plateau_measure(profile: FlowProfile) -> float:
    return float(sum(2 * w for _, w in profile.plateaux))


def effective_drift(profile: FlowProfile):
    """Grid-average drift of the tabulated field.

    Shear profiles return a scalar (x-drift); cell flows return a pair.
    """
    if profile.kind is FlowKind.ZERO:
        return 0.0
    if profile.kind is FlowKind.SHEAR:
        return float(profile.samples.mean())
    return (float(profile.u_x.mean()), float(profile.u_y.mean()))


def build_periodic_flow(x_nodes: np.ndarray, y_nodes: np.ndarray,
                        amplitude: float = 1.0) -> FlowProfile:
    """Divergence-free cellular flow on the unit cell, tabulated at nodes.

    Velocities are centered differences of the stream function
    psi = sin(2 pi x) sin(2 pi y) / (2 pi), so the discrete flux divergence
    vanishes exactly (centered differences commute).
    """
    x = np.asarray(x_nodes, dtype=float)
    y = np.asarray(y_nodes, dtype=float)
    dx = x[1] - x[0]
    dy = y[1] - y[0]

    def psi(xx, yy):
        return np.sin(2 * np.pi * xx) * np.sin(2 * np.pi * yy) / (2 * np.pi)

    X, Y = np.meshgrid(x, y, indexing="ij")
    u_x = (psi(X, Y + dy) - psi(X, Y - dy)) / (2 * dy)
    u_y = -(psi(X + dx, Y) - psi(X - dx, Y)) / (2 * dx)
    u_x *= amplitude
    u_y *= amplitude
    return FlowProfile(FlowKind.PERIODIC2D, amplitude=amplitude,
                       u_x=u_x, u_y=u_y, mean=float(u_x.mean()))


def flux_divergence(profile: FlowProfile, dx: float, dy: float) -> np.ndarray:
    """Centered-difference divergence of a cell flow, for validation."""
    if profile.kind is not FlowKind.PERIODIC2D:
        raise ValueError("divergence check applies to cell flows")
    ux, uy = profile.u_x, profile.u_y
    div = ((np.roll(ux, -1, axis=0) - np.roll(ux, 1, axis=0)) / (2 * dx)
           + (np.roll(uy, -1, axis=1) - np.roll(uy, 1, axis=1)) / (2 * dy))
    return div
