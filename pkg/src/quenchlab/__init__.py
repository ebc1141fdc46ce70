"""Quenching and propagation toolkit for advected reaction-diffusion fronts.

The package studies T_t = Lap(T) + u . grad(T) + M f(T) on a truncated
strip (optionally crossed with the unit torus), together with its linear
drift-diffusion twin.  It provides a monotone split-step solver, quench
and blowup certificates driven by sup-norm traces of the twin, Monte
Carlo estimators for the stochastic representation of the twin, and
sweep experiments with certified bracketing.
"""

from .model import (
    EnvelopeCheck,
    EnvelopeDirection,
    FlowKind,
    FlowProfile,
    ReactionKind,
    ReactionSpec,
    ShearSpec,
    build_periodic_flow,
    build_shear_profile,
    detect_plateaux,
    effective_drift,
    eval_reaction,
    flux_divergence,
    plateau_measure,
    reaction_envelope_check,
    reaction_lipschitz,
    sin_shear,
    torus_nodes,
    zero_flow,
)
from .solver import (
    DetectorConfig,
    Field,
    Grid,
    LinearTrace,
    RunStatus,
    RunVerdict,
    StabilityError,
    build_grid,
    field_norms,
    gaussian_datum,
    indicator_datum,
    load_snapshot,
    run_linear,
    save_snapshot,
    solve,
    stability_dt,
    step,
    trace_to_csv,
)
from .certificates import (
    Certificate,
    CertificateKind,
    Envelope,
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
from .stochastic import (
    HistogramSpec,
    KernelEstimate,
    McEstimate,
    PathSamplerConfig,
    confinement_bound,
    confinement_series,
    drift_window_prob,
    estimate_csv_row,
    fk_phi,
    fk_phi_exact_still,
    heat_kernel_profile,
    histogram_csv,
    plateau_confinement_prob,
)
from .experiments import (
    SweepPoint,
    SweepResult,
    amplitude_scan,
    critical_length_scan,
    exponent_scan,
    front_speed,
    front_width,
    plateau_scan,
    scaling_check,
    sweep_csv,
)
from .cli import (
    ConfigError,
    RunConfig,
    parse_config,
    run,
    verify_outputs,
)

__version__ = "0.1.0"

__all__ = [
    "EnvelopeCheck", "EnvelopeDirection", "FlowKind", "FlowProfile",
    "ReactionKind", "ReactionSpec", "ShearSpec", "build_periodic_flow",
    "build_shear_profile", "detect_plateaux", "effective_drift",
    "eval_reaction", "flux_divergence", "plateau_measure",
    "reaction_envelope_check", "reaction_lipschitz", "sin_shear",
    "torus_nodes", "zero_flow",
    "DetectorConfig", "Field", "Grid", "LinearTrace", "RunStatus",
    "RunVerdict", "StabilityError", "build_grid", "field_norms",
    "gaussian_datum", "indicator_datum", "load_snapshot", "run_linear",
    "save_snapshot", "solve", "stability_dt", "step", "trace_to_csv",
    "Certificate", "CertificateKind", "Envelope", "TailDivergentError",
    "TailSpec", "blowup_witness", "estimate_I", "estimate_J",
    "parse_certificate", "quench_certificate", "subsolution_value",
    "supersolution_envelope", "tail_integral",
    "HistogramSpec", "KernelEstimate", "McEstimate", "PathSamplerConfig",
    "confinement_bound", "confinement_series", "drift_window_prob",
    "estimate_csv_row", "fk_phi", "fk_phi_exact_still",
    "heat_kernel_profile", "histogram_csv", "plateau_confinement_prob",
    "SweepPoint", "SweepResult", "amplitude_scan", "critical_length_scan",
    "exponent_scan", "front_speed", "front_width", "plateau_scan",
    "scaling_check", "sweep_csv",
    "ConfigError", "RunConfig", "parse_config", "run", "verify_outputs",
    "__version__",
]
