import math

import numpy as np
import pytest

from quenchlab.certificates import (
    Certificate,
    CertificateKind,
    TailDivergentError,
    TailSpec,
    blowup_witness,
    estimate_I,
    estimate_J,
    parse_certificate,
    quench_certificate,
    subsolution_value,
    supersolution_envelope,
    tail_integral,
)
from quenchlab.solver import Field, build_grid, indicator_datum, step


def test_estimate_I_constant_trace_with_exact_tail():
    times = np.array([0.0, 1.0])
    sups = np.array([1.0, 1.0])
    I = estimate_I(times, sups, alpha=3.0, tail=TailSpec.exact(1.0))
    # measured part 1, tail (pi^-1/2)^3 / 0.5
    assert I == pytest.approx(1.0 + 0.3591742442503331, rel=1e-12)


def test_tail_divergent_for_alpha_two():
    with pytest.raises(TailDivergentError):
        tail_integral(TailSpec.exact(1.0), alpha=2.0, t1=1.0)
    with pytest.raises(TailDivergentError):
        estimate_I([0.0, 1.0], [1.0, 0.5], alpha=1.5, tail=TailSpec.exact(2.0))


def test_estimate_I_zero_trace_no_tail():
    I = estimate_I([0.0, 0.5, 1.0], [0.0, 0.0, 0.0], alpha=3.0,
                   tail=TailSpec.none())
    assert I == 0.0


def test_estimate_I_is_upper_bound_on_smooth_integrals():
    # ||Phi|| = (1+t)^(-1): upper sums from any sampling dominate the
    # exact integral of (1+t)^(-alpha)
    rng = np.random.default_rng(11)
    for _ in range(50):
        alpha = rng.uniform(2.1, 5.0)
        t1 = rng.uniform(0.5, 20.0)
        k = rng.integers(2, 60)
        times = np.concatenate(([0.0], np.sort(rng.uniform(0, t1, k)), [t1]))
        times = np.unique(times)
        sups = (1.0 + times) ** -1.0
        exact = (1.0 - (1.0 + t1) ** (1.0 - alpha)) / (alpha - 1.0)
        I = estimate_I(times, sups, alpha, TailSpec.none())
        assert I >= exact - 1e-12


def test_estimate_I_monotone_under_pointwise_decrease():
    rng = np.random.default_rng(5)
    times = np.linspace(0.0, 4.0, 40)
    sups = np.exp(-times) * (1.0 + 0.01 * rng.uniform(size=40))
    lower = sups * rng.uniform(0.3, 1.0, size=40)
    I_hi = estimate_I(times, sups, 3.0, TailSpec.none())
    I_lo = estimate_I(times, lower, 3.0, TailSpec.none())
    assert I_lo <= I_hi + 1e-15
    thr_hi = quench_certificate(I_hi, 1.0, 3.0, 0.1).threshold
    thr_lo = quench_certificate(I_lo, 1.0, 3.0, 0.1).threshold
    assert thr_lo >= thr_hi


def test_trace_validation():
    with pytest.raises(ValueError):
        estimate_I([0.5, 1.0], [1.0, 0.5], 3.0, TailSpec.none())
    with pytest.raises(ValueError):
        estimate_I([0.0, 0.0], [1.0, 0.5], 3.0, TailSpec.none())
    with pytest.raises(ValueError):
        estimate_I([0.0, 1.0], [1.0, -0.5], 3.0, TailSpec.none())


def test_quench_certificate_thresholds():
    cert = quench_certificate(I_upper=2.0, c=1.0, alpha=2.0, delta0=0.4)
    assert cert.threshold == pytest.approx(0.5, rel=1e-12)
    assert cert.valid
    cert2 = quench_certificate(I_upper=2.0, c=1.0, alpha=2.0, delta0=0.6)
    assert not cert2.valid
    cert3 = quench_certificate(I_upper=1.36, c=1.0, alpha=3.0, delta0=1.0)
    assert cert3.threshold == pytest.approx(0.6258159278193961, rel=1e-12)
    assert not cert3.valid


def test_blowup_witness_single_sample():
    cert = blowup_witness([1.0], [1.0], c=1.0, alpha=1.0, delta0=2.0)
    assert cert.kind is CertificateKind.BLOWUP
    assert cert.J_lower == 1.0
    assert cert.threshold == pytest.approx(1.0)
    assert cert.valid


def test_blowup_witness_zero_samples_never_valid():
    cert = blowup_witness([0.5, 1.0, 2.0], [0.0, 0.0, 0.0],
                          c=1.0, alpha=1.0, delta0=1e12)
    assert cert.threshold == math.inf
    assert not cert.valid
    with pytest.raises(ValueError):
        blowup_witness([], [], c=1.0, alpha=1.0, delta0=1.0)


def test_estimate_J_underestimates_supremum():
    # t * (1+t)^-1 climbs toward 1 but every finite sample stays below
    t = np.linspace(0.0, 50.0, 200)
    v = (1.0 + t) ** -1.0
    J = estimate_J(t, v, alpha=1.0)
    assert J < 1.0
    assert J == pytest.approx(50.0 / 51.0, rel=1e-12)


def test_supersolution_envelope_values():
    times = np.linspace(0.0, 0.5, 51)
    sups = np.ones(51)
    env = supersolution_envelope(times, sups, c=1.0, alpha=1.0, delta0=1.0)
    assert env.blowup_time is None
    assert env.values[-1] == pytest.approx(2.0, rel=1e-12)
    assert env.values[0] == pytest.approx(1.0)


def test_supersolution_envelope_reports_pole():
    times = np.linspace(0.0, 3.0, 301)
    sups = np.ones(301)
    env = supersolution_envelope(times, sups, c=1.0, alpha=1.0, delta0=0.5)
    assert env.blowup_time == pytest.approx(2.0, abs=0.02)
    assert env.times[-1] < env.blowup_time + 1e-12
    assert np.all(np.diff(env.values) >= -1e-12)


def test_supersolution_envelope_zero_trace_constant():
    times = np.linspace(0.0, 5.0, 11)
    env = supersolution_envelope(times, np.zeros(11), c=2.0, alpha=3.0,
                                 delta0=0.7)
    assert np.allclose(env.values, 0.7)


def test_subsolution_values():
    assert subsolution_value(1.0, 1.0, 1.0, 0.5) == pytest.approx(2.0)
    assert subsolution_value(1.0, 1.0, 1.0, 1.0) == math.inf
    assert subsolution_value(1.0, 1.0, 1.0, 2.0) == math.inf
    assert subsolution_value(0.0, 1.0, 1.0, 100.0) == 0.0


def test_certificate_record_roundtrip():
    cert = quench_certificate(I_upper=1.36, c=2.5, alpha=3.0, delta0=0.3,
                              tail_method="exact")
    text = cert.record()
    lines = text.strip().splitlines()
    assert lines[0] == "kind=Quench"
    assert all("=" in ln for ln in lines)
    assert "tail_method=exact" in lines
    back = parse_certificate(text)
    assert back == cert
    wit = blowup_witness([1.0, 2.0], [0.5, 0.4], c=1.0, alpha=2.0, delta0=3.0)
    assert parse_certificate(wit.record()) == wit


def test_tailspec_validation_and_heuristic_inflation():
    with pytest.raises(ValueError):
        TailSpec("bogus", 1.0)
    with pytest.raises(ValueError):
        TailSpec.exact(-1.0)
    h = TailSpec.heuristic(0.7)
    assert h.method == "heuristic-tail"
    assert h.D == pytest.approx(1.4)
    assert TailSpec.exact(2.0).D == pytest.approx(2.0 / math.sqrt(math.pi))


def test_blowup_trend_grows_like_sqrt_time():
    # with no drift the centre value of the twin decays like t^(-1/2),
    # so the running max of t * Phi(t, 0) should fit exponent ~ 1/2
    g = build_grid(50.0, 200)
    f = indicator_datum(g, 1.0, 1.0)
    centre = g.nx // 2
    times = []
    vals = []
    t_end = 80.0
    n = int(np.ceil(t_end / g.dt))
    for _ in range(n):
        f = step(f, None, None, g)
        times.append(f.time)
        vals.append(float(f.values[centre]))
    times = np.array(times)
    vals = np.array(vals)
    mask = times >= 10.0
    score = np.maximum.accumulate(times * vals)[mask]
    slope = np.polyfit(np.log(times[mask]), np.log(score), 1)[0]
    assert abs(slope - 0.5) <= 0.1
