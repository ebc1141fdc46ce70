"""Quench certificates and blowup witnesses from linear sup-norm traces.

The decision procedure: if the nonlinear term is enveloped by c T^(1+alpha)
(coupling folded into c), the solution from datum delta0 * Phi0 quenches
whenever delta0 < (c alpha I)^(-1/alpha) with I the time integral of
||Phi||_inf^alpha, and blows up whenever delta0 > (c alpha J)^(-1/alpha)
with J = sup_t t ||Phi(t)||_inf^alpha.  Soundness therefore needs an upper
bound on I and a lower bound on J; both directions are arranged here.

The integral splits into a measured part over [0, t1] and an analytic tail.
Since ||Phi|| is nonincreasing (maximum principle), summing each subinterval
at its left endpoint gives a true upper Riemann sum; the tail uses the
dispersive bound ||Phi(t)|| <= D t^(-1/2), which integrates to
D^alpha t1^(1 - alpha/2) / (alpha/2 - 1) and converges only for alpha > 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class TailDivergentError(ValueError):
    """The tail integral of (D t^{-1/2})^alpha diverges for alpha <= 2."""


class CertificateKind(Enum):
    QUENCH = "Quench"
    BLOWUP = "Blowup"


@dataclass(frozen=True)
class TailSpec:
    """How the integral past the measured horizon is bounded.

    method "exact" carries the dispersive constant D = L / sqrt(pi) valid
    for zero or mean-zero shear flow with datum bounded by the indicator of
    [-L, L]; "heuristic-tail" carries a fitted kernel constant inflated by
    a 2x safety factor; "none" adds no tail (finite-horizon estimates only,
    not a bound on the infinite integral unless the trace has died).
    """

    method: str
    D: float = 0.0

    def __post_init__(self) -> None:
        if self.method not in ("exact", "heuristic-tail", "none"):
            raise ValueError(f"unknown tail method {self.method!r}")
        if self.method != "none" and self.D <= 0:
            raise ValueError("tail constant must be positive")

    @staticmethod
    def none() -> "TailSpec":
        return TailSpec("none")

    @staticmethod
    def exact(L: float) -> "TailSpec":
        """Dispersive constant for datum inside [-L, L], shear or no flow."""
        if L <= 0:
            raise ValueError("datum half-width must be positive")
        return TailSpec("exact", L / math.sqrt(math.pi))

    @staticmethod
    def heuristic(fitted_D: float) -> "TailSpec":
        """Fitted kernel constant with 2x inflation; not unconditional."""
        if fitted_D <= 0:
            raise ValueError("fitted constant must be positive")
        return TailSpec("heuristic-tail", 2.0 * fitted_D)


def _as_trace(times, sups) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(times, dtype=float)
    s = np.asarray(sups, dtype=float)
    if t.ndim != 1 or t.shape != s.shape or t.size == 0:
        raise ValueError("trace must be matching 1-d time and value arrays")
    if t[0] != 0.0:
        raise ValueError("trace must start at t = 0")
    if np.any(np.diff(t) <= 0):
        raise ValueError("trace times must increase")
    if np.any(s < 0):
        raise ValueError("sup-norm trace must be nonnegative")
    return t, s


def _monotone_upper(s: np.ndarray) -> np.ndarray:
    # reverse running max: nonincreasing and >= the input pointwise, so
    # roundoff wiggle in a computed trace cannot break the upper-sum claim
    return np.maximum.accumulate(s[::-1])[::-1]


def tail_integral(tail: TailSpec, alpha: float, t1: float) -> float:
    """integral_{t1}^{inf} (D t^{-1/2})^alpha dt, closed form."""
    if tail.method == "none":
        return 0.0
    if alpha <= 2.0:
        raise TailDivergentError(
            f"tail integral diverges for alpha = {alpha:g} <= 2")
    if t1 <= 0:
        raise ValueError("tail requires a positive split time")
    return tail.D ** alpha * t1 ** (1.0 - alpha / 2.0) / (alpha / 2.0 - 1.0)


def estimate_I(times, sups, alpha: float, tail: TailSpec) -> float:
    """Upper bound on integral_0^inf ||Phi||^alpha dt from a finite trace."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    t, s = _as_trace(times, sups)
    s = _monotone_upper(s)
    finite = float(np.sum(s[:-1] ** alpha * np.diff(t)))
    return finite + tail_integral(tail, alpha, float(t[-1]))


def estimate_J(times, phi_values, alpha: float) -> float:
    """Lower bound on sup_t t * Phi(t)^alpha: max over the given samples."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(phi_values, dtype=float)
    if t.size == 0 or t.shape != v.shape:
        raise ValueError("need matching nonempty sample arrays")
    if np.any(v < 0) or np.any(t < 0):
        raise ValueError("samples must be nonnegative")
    return float(np.max(t * v ** alpha))


@dataclass(frozen=True)
class Certificate:
    """Audit record of one quench or blowup decision."""

    kind: CertificateKind
    alpha: float
    c: float
    delta0: float
    bound: float  # I_upper for Quench, J_lower for Blowup
    threshold: float
    valid: bool
    tail_method: str = "none"

    @property
    def I_upper(self) -> float:
        if self.kind is not CertificateKind.QUENCH:
            raise AttributeError("I_upper applies to quench certificates")
        return self.bound

    @property
    def J_lower(self) -> float:
        if self.kind is not CertificateKind.BLOWUP:
            raise AttributeError("J_lower applies to blowup witnesses")
        return self.bound

    def record(self) -> str:
        """Flat key=value serialization, one field per line."""
        bound_key = ("I_upper" if self.kind is CertificateKind.QUENCH
                     else "J_lower")
        lines = [
            f"kind={self.kind.value}",
            f"alpha={self.alpha!r}",
            f"c={self.c!r}",
            f"delta0={self.delta0!r}",
            f"{bound_key}={self.bound!r}",
            f"threshold={self.threshold!r}",
            f"valid={'true' if self.valid else 'false'}",
            f"tail_method={self.tail_method}",
        ]
        return "\n".join(lines) + "\n"


def parse_certificate(text: str) -> Certificate:
    kv = {}
    for line in text.strip().splitlines():
        key, _, val = line.partition("=")
        kv[key.strip()] = val.strip()
    kind = CertificateKind(kv["kind"])
    bound = float(kv["I_upper" if kind is CertificateKind.QUENCH
                     else "J_lower"])
    return Certificate(kind, float(kv["alpha"]), float(kv["c"]),
                       float(kv["delta0"]), bound, float(kv["threshold"]),
                       kv["valid"] == "true", kv["tail_method"])


def _threshold(c: float, alpha: float, bound: float) -> float:
    if c <= 0 or alpha <= 0:
        raise ValueError("need c > 0 and alpha > 0")
    if bound < 0:
        raise ValueError("bound must be nonnegative")
    if bound == 0.0:
        return math.inf
    return (c * alpha * bound) ** (-1.0 / alpha)


def quench_certificate(I_upper: float, c: float, alpha: float,
                       delta0: float,
                       tail_method: str = "none") -> Certificate:
    """Valid iff delta0 < (c alpha I_upper)^(-1/alpha).

    The constant c must envelope the full nonlinearity, coupling included:
    M f(T) <= c T^(1+alpha).
    """
    if delta0 < 0:
        raise ValueError("delta0 must be nonnegative")
    if not math.isfinite(I_upper):
        raise ValueError("I_upper must be finite")
    thr = _threshold(c, alpha, I_upper)
    return Certificate(CertificateKind.QUENCH, alpha, c, delta0, I_upper,
                       thr, delta0 < thr, tail_method)


def blowup_witness(times, phi_values, c: float, alpha: float,
                   delta0: float) -> Certificate:
    """Valid iff delta0 > (c alpha J_lower)^(-1/alpha).

    J_lower is the sample maximum of t Phi^alpha, which can only
    underestimate the true supremum, so validity is conservative.
    """
    if delta0 < 0:
        raise ValueError("delta0 must be nonnegative")
    J_lower = estimate_J(times, phi_values, alpha)
    thr = _threshold(c, alpha, J_lower)
    return Certificate(CertificateKind.BLOWUP, alpha, c, delta0, J_lower,
                       thr, delta0 > thr, "none")


@dataclass(frozen=True)
class Envelope:
    """The explicit supersolution coefficient delta(t) along a trace."""

    times: np.ndarray
    values: np.ndarray
    blowup_time: float | None = None


def supersolution_envelope(times, sups, c: float, alpha: float,
                           delta0: float) -> Envelope:
    """delta(t) = (delta0^-alpha - c alpha int_0^t ||Phi||^alpha)^(-1/alpha).

    The running integral is the same left-endpoint upper sum as estimate_I,
    so the returned delta(t) dominates the exact coefficient.  If the
    bracket hits zero inside the range, values stop there and the first
    crossing time is reported as blowup_time.
    """
    if delta0 <= 0:
        raise ValueError("the envelope needs delta0 > 0")
    t, s = _as_trace(times, sups)
    s = _monotone_upper(s)
    running = np.concatenate(
        ([0.0], np.cumsum(s[:-1] ** alpha * np.diff(t))))
    bracket = delta0 ** -alpha - c * alpha * running
    alive = bracket > 0
    if alive.all():
        return Envelope(t, bracket ** (-1.0 / alpha))
    k = int(np.argmin(alive))  # first dead index
    vals = bracket[:k] ** (-1.0 / alpha)
    return Envelope(t[:k], vals, float(t[k]))


def subsolution_value(phi: float, c: float, alpha: float, t: float) -> float:
    """w(t, phi) = (phi^-alpha - c alpha t)^(-1/alpha); inf past the pole."""
    if phi < 0:
        raise ValueError("phi must be nonnegative")
    if phi == 0.0:
        return 0.0
    bracket = phi ** -alpha - c * alpha * t
    if bracket <= 0:
        return math.inf
    return bracket ** (-1.0 / alpha)
