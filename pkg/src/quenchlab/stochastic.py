"""Monte Carlo engine for the Brownian representation of the linear twin.

The linear problem Phi_t = Lap(Phi) + A u(y) Phi_x started from the
indicator of [-L, L] has the probabilistic form

    Phi(t, x, y) = P( W^x_{2t} + (A/2) int_0^{2t} u(W^y_s) ds  in [-L, L] )

with independent Brownian motions W^x (line) and W^y (torus), both run to
clock 2t.  Only the drift integral needs time discretization; the Brownian
endpoints are exact Gaussians.  Estimators here are Bernoulli averages with
std_error = sqrt(v (1 - v) / n), reduced over fixed-size path chunks whose
RNG streams are keyed by (seed, stream_id, chunk), so results are bitwise
reproducible no matter how chunks are scheduled.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import FlowKind, FlowProfile

_CHUNK = 8192


@dataclass(frozen=True)
class PathSamplerConfig:
    """Path count, drift substep, and RNG stream identity."""

    n_paths: int = 100_000
    substep: float | None = None
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self) -> None:
        if self.n_paths < 100:
            raise ValueError("need at least 100 paths")
        if self.substep is not None and self.substep <= 0:
            raise ValueError("substep must be positive")


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n: int


def _bernoulli(hits: float, n: int) -> McEstimate:
    v = hits / n
    return McEstimate(float(v), math.sqrt(max(v * (1.0 - v), 0.0) / n), n)


def _rng(cfg: PathSamplerConfig, chunk: int) -> np.random.Generator:
    seq = np.random.SeedSequence([cfg.seed, cfg.stream_id, chunk])
    return np.random.Generator(np.random.Philox(seq))


def _chunks(n: int):
    k = 0
    start = 0
    while start < n:
        yield k, min(_CHUNK, n - start)
        start += _CHUNK
        k += 1


def _resolve_substep(cfg: PathSamplerConfig, ds_max: float) -> float:
    if cfg.substep is None:
        return ds_max
    if cfg.substep > ds_max * (1 + 1e-12):
        raise ValueError(
            f"substep {cfg.substep:g} exceeds the bias cap {ds_max:g}")
    return cfg.substep


def _torus_interp(profile: FlowProfile):
    nodes = np.arange(profile.samples.size) / profile.samples.size
    xp = np.concatenate((nodes, [1.0]))
    fp = np.concatenate((profile.samples, [profile.samples[0]]))

    def u(w: np.ndarray) -> np.ndarray:
        return np.interp(np.mod(w, 1.0), xp, fp)

    return u


def _require_shear(profile: FlowProfile) -> None:
    if profile.kind is not FlowKind.SHEAR:
        raise ValueError("path sampling supports shear profiles only")


def _drift_integrals(t: float, y: float, profile: FlowProfile,
                     rng: np.random.Generator, n: int,
                     ds: float) -> np.ndarray:
    """int_0^{2t} u(W^y_s) ds per path, midpoint rule on substeps of ds.

    The torus path is sampled at resolution ds/2; odd samples are the
    block midpoints.
    """
    u = _torus_interp(profile)
    n_sub = max(1, math.ceil(2.0 * t / ds))
    ds = 2.0 * t / n_sub
    h = 0.5 * ds
    w = np.full(n, float(y))
    acc = np.zeros(n)
    for _ in range(n_sub):
        w = w + rng.normal(0.0, math.sqrt(h), n)  # to block midpoint
        acc += u(w) * ds
        w = w + rng.normal(0.0, math.sqrt(h), n)  # to block end
    return acc


def fk_phi(t: float, x: float, y: float, L: float, A: float,
           profile: FlowProfile | None,
           sampler: PathSamplerConfig) -> McEstimate:
    """Probability that the shifted Brownian endpoint lands in [-L, L]."""
    if t <= 0:
        raise ValueError("need t > 0")
    if L <= 0:
        raise ValueError("need L > 0")
    use_drift = A != 0.0 and profile is not None \
        and profile.kind is not FlowKind.ZERO
    if use_drift:
        _require_shear(profile)
    ds = _resolve_substep(sampler, t / 200.0)
    hits = 0
    for chunk, n in _chunks(sampler.n_paths):
        rng = _rng(sampler, chunk)
        if use_drift:
            drift = 0.5 * A * _drift_integrals(t, y, profile, rng, n, ds)
        else:
            drift = 0.0
        endpoint = x + rng.normal(0.0, math.sqrt(2.0 * t), n) + drift
        hits += int(np.count_nonzero(np.abs(endpoint) <= L))
    return _bernoulli(hits, sampler.n_paths)


def fk_phi_exact_still(t: float, x: float, L: float) -> float:
    """Closed form for A = 0: Gaussian mass of [-L, L] around x."""
    s = math.sqrt(4.0 * t)
    return 0.5 * (math.erf((L - x) / s) + math.erf((L + x) / s))


def drift_window_prob(t: float, y: float, a: float, eps: float,
                      profile: FlowProfile,
                      sampler: PathSamplerConfig) -> McEstimate:
    """P( drift integral in [a, a+eps] ), excluding the atom at 2t u(y).

    Paths whose torus excursion never left the constancy set of u around y
    contribute the deterministic value 2t u(y); they are excluded by exact
    value so the estimate targets the continuous part.
    """
    if t <= 0 or eps <= 0:
        raise ValueError("need t > 0 and eps > 0")
    _require_shear(profile)
    u = _torus_interp(profile)
    atom = 2.0 * t * float(u(np.array([y]))[0])
    ds = _resolve_substep(sampler, t / 200.0)
    hits = 0
    for chunk, n in _chunks(sampler.n_paths):
        rng = _rng(sampler, chunk)
        integ = _drift_integrals(t, y, profile, rng, n, ds)
        in_window = (integ >= a) & (integ <= a + eps)
        is_atom = np.abs(integ - atom) <= 1e-12 * (1.0 + abs(atom))
        hits += int(np.count_nonzero(in_window & ~is_atom))
    return _bernoulli(hits, sampler.n_paths)


def confinement_series(t: float, eps: float, tol: float = 1e-16) -> float:
    """Exact survival probability in (-eps, eps) from 0 over clock 2t.

    Alternating eigenfunction sum; term n carries
    exp(-t (2n+1)^2 pi^2 / (4 eps^2)).  At t = 0 the sum telescopes to 1.
    """
    if t < 0 or eps <= 0:
        raise ValueError("need t >= 0 and eps > 0")
    if t == 0.0:
        return 1.0
    rate = t * math.pi ** 2 / (4.0 * eps * eps)
    total = 0.0
    n = 0
    while True:
        k = 2 * n + 1
        term = 4.0 / (k * math.pi) * math.exp(-rate * k * k)
        if term < tol:
            break
        total += term if n % 2 == 0 else -term
        n += 1
    return total


def confinement_bound(t: float, eps: float) -> float:
    """(4/pi) exp(-pi^2 t / 4 eps^2), the first-term envelope."""
    if t < 0 or eps <= 0:
        raise ValueError("need t >= 0 and eps > 0")
    return 4.0 / math.pi * math.exp(-math.pi ** 2 * t / (4.0 * eps * eps))


def plateau_confinement_prob(t: float, eps: float, start_y: float,
                             sampler: PathSamplerConfig
                             ) -> tuple[McEstimate, float, float]:
    """(MC survival estimate, exact series, analytic bound).

    Survival means the torus path never leaves (-eps, eps) up to clock 2t.
    Between samples a Brownian-bridge crossing draw decides hidden exits,
    otherwise survival would be overestimated.  The series is exact only
    for start_y = 0 and reported as nan otherwise.
    """
    if abs(start_y) >= eps:
        raise ValueError("start must lie inside the interval")
    series = confinement_series(t, eps) if start_y == 0.0 else math.nan
    bound = confinement_bound(t, eps)
    if t == 0.0:
        return McEstimate(1.0, 0.0, sampler.n_paths), series, bound
    ds = _resolve_substep(sampler, min(eps * eps / 25.0, t / 200.0))
    n_sub = max(1, math.ceil(2.0 * t / ds))
    ds = 2.0 * t / n_sub
    survivors = 0
    for chunk, n in _chunks(sampler.n_paths):
        rng = _rng(sampler, chunk)
        w = np.full(n, float(start_y))
        alive = np.ones(n, dtype=bool)
        for _ in range(n_sub):
            w_new = w + rng.normal(0.0, math.sqrt(ds), n)
            inside = (np.abs(w_new) < eps) & (np.abs(w) < eps)
            # bridge crossing probabilities against both barriers
            up = np.exp(np.minimum(
                -2.0 * (eps - w) * (eps - w_new) / ds, 0.0))
            dn = np.exp(np.minimum(
                -2.0 * (eps + w) * (eps + w_new) / ds, 0.0))
            stay = inside & (rng.random(n) >= up) & (rng.random(n) >= dn)
            alive &= stay
            w = w_new
        survivors += int(np.count_nonzero(alive))
    return _bernoulli(survivors, sampler.n_paths), series, bound


@dataclass(frozen=True)
class HistogramSpec:
    n_bins: int = 64
    half_width_sigmas: float = 6.0

    def __post_init__(self) -> None:
        if self.n_bins < 8 or self.half_width_sigmas <= 0:
            raise ValueError("need n_bins >= 8 and a positive range")


@dataclass(frozen=True)
class KernelEstimate:
    centers: np.ndarray
    density: np.ndarray
    counts: np.ndarray
    t: float


def heat_kernel_profile(t: float, A: float, profile: FlowProfile | None,
                        sampler: PathSamplerConfig,
                        histogram_spec: HistogramSpec = HistogramSpec()
                        ) -> tuple[KernelEstimate, float]:
    """Endpoint histogram recentred by the mean drift plus the fitted
    envelope constant.

    fitted_C is the smallest C for which every trusted bin density lies
    between C^-1 t^-1/2 exp(-C r^2/t) and C t^-1/2 exp(-r^2/(C t)); trusted
    means at least 100 hits and within 6 sigma of the centre.  When bins
    are too starved to trust, they are widened (halving the count) with a
    warning.
    """
    if t <= 0:
        raise ValueError("the envelope regime needs t > 0")
    use_drift = A != 0.0 and profile is not None \
        and profile.kind is not FlowKind.ZERO
    if use_drift:
        _require_shear(profile)
    ds = _resolve_substep(sampler, t / 200.0)
    sigma = math.sqrt(2.0 * t)
    mean_shift = A * (profile.mean if use_drift else 0.0) * t
    endpoints = np.empty(sampler.n_paths)
    pos = 0
    for chunk, n in _chunks(sampler.n_paths):
        rng = _rng(sampler, chunk)
        if use_drift:
            drift = 0.5 * A * _drift_integrals(t, 0.0, profile, rng, n, ds)
        else:
            drift = 0.0
        endpoints[pos:pos + n] = (rng.normal(0.0, sigma, n) + drift
                                  - mean_shift)
        pos += n

    n_bins = histogram_spec.n_bins
    half = histogram_spec.half_width_sigmas * sigma
    while True:
        edges = np.linspace(-half, half, n_bins + 1)
        counts, _ = np.histogram(endpoints, bins=edges)
        centers = 0.5 * (edges[:-1] + edges[1:])
        trusted = (counts >= 100) & (np.abs(centers) <= 6.0 * sigma)
        # far-tail bins are starved at any resolution; widen only while
        # too few bins qualify for the fit at all
        if np.count_nonzero(trusted) >= 8 or n_bins <= 8:
            break
        n_bins //= 2
        warnings.warn("bins too starved for envelope fitting; widening",
                      stacklevel=2)
    width = edges[1] - edges[0]
    density = counts / (sampler.n_paths * width)
    est = KernelEstimate(centers, density, counts, t)
    fitted = _fit_envelope_constant(centers[trusted], density[trusted], t)
    return est, fitted


def _fit_envelope_constant(r: np.ndarray, dens: np.ndarray,
                           t: float) -> float:
    """Bisect for the smallest C making both Gaussian envelopes hold."""

    def ok(C: float) -> bool:
        upper = C * t ** -0.5 * np.exp(-r * r / (C * t))
        lower = (1.0 / C) * t ** -0.5 * np.exp(-C * r * r / t)
        return bool(np.all(dens <= upper) and np.all(lower <= dens))

    lo, hi = 0.26, 1e6
    if not ok(hi):
        return math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# CSV emission


def estimate_csv_row(estimator: str, params: dict, est: McEstimate,
                     seed: int) -> str:
    """One audit row: estimator, params as k=v columns, then the numbers."""
    cols = [estimator]
    cols += [f"{k}={params[k]!r}" for k in params]
    cols += [repr(est.value), repr(est.std_error), str(est.n), str(seed)]
    return ",".join(cols)


def histogram_csv(est: KernelEstimate) -> str:
    lines = ["bin_center,density,count"]
    for c, d, k in zip(est.centers, est.density, est.counts):
        lines.append(f"{float(c)!r},{float(d)!r},{int(k)}")
    return "\n".join(lines) + "\n"
