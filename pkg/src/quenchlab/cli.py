"""Command-line front end with reproducible file outputs.

Runs are driven by a flat ``key = value`` config file.  Every subcommand
writes a manifest next to its outputs recording the fully resolved config,
a short config hash, and a sha256 per output file, so a finished run
directory can be audited with ``quenchlab verify``.  Outputs carry no
timestamps and floats are written with ``repr``; the same config, seed and
worker count reproduce every file byte for byte.
"""
from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import (FlowKind, FlowProfile, ReactionSpec, ShearSpec,
                    build_shear_profile, torus_nodes)
from .solver import (DetectorConfig, Field, Grid, RunStatus, RunVerdict,
                     build_grid, gaussian_datum, indicator_datum, run_linear,
                     save_snapshot, solve, trace_to_csv)
from .certificates import TailSpec, estimate_I, quench_certificate
from .stochastic import (HistogramSpec, McEstimate, PathSamplerConfig,
                         estimate_csv_row, fk_phi, heat_kernel_profile,
                         histogram_csv, plateau_confinement_prob)
from .experiments import (SweepResult, amplitude_scan, critical_length_scan,
                          exponent_scan, plateau_scan, sweep_csv)

SUBCOMMANDS = ("solve", "linear-solve", "certify", "mc-fk", "mc-plateau",
               "mc-kernel", "sweep", "verify")


class ConfigError(ValueError):
    """Raised on unknown keys, bad types, or violated constraints."""


# ---------------------------------------------------------------------------
# config schema


@dataclass(frozen=True)
class _KeySpec:
    kind: str            # int | float | bool | str | floats
    default: object
    check: object = None
    msg: str = ""


def _choice(*allowed):
    return (lambda v: v in allowed,
            "must be one of " + ", ".join(map(str, allowed)))


_SCHEMA: dict[str, _KeySpec] = {
    "version": _KeySpec("str", "1", *_choice("1")),
    "seed": _KeySpec("int", 0, lambda v: 0 <= v < 2 ** 64,
                     "seed must fit in 64 bits"),
    "domain.x_extent": _KeySpec("float", 30.0, lambda v: v > 0,
                                "must be positive"),
    "domain.nx": _KeySpec("int", 300, lambda v: v >= 4, "need nx >= 4"),
    "domain.m": _KeySpec("int", 0, *_choice(0, 1)),
    "domain.ny": _KeySpec("int", 32, lambda v: v >= 4, "need ny >= 4"),
    "domain.x_periodic": _KeySpec("bool", False),
    "flow.kind": _KeySpec("str", "none", *_choice("none", "sine", "plateau")),
    "flow.amplitude": _KeySpec("float", 0.0, lambda v: v >= 0,
                               "must be nonnegative"),
    "flow.plateau_center": _KeySpec("float", 0.5, lambda v: 0 <= v < 1,
                                    "torus coordinate in [0, 1)"),
    "flow.plateau_halfwidth": _KeySpec("float", 0.3,
                                       lambda v: 0 < v < 0.5,
                                       "half-width must lie in (0, 0.5)"),
    "reaction.kind": _KeySpec("str", "none",
                              *_choice("none", "powerlaw", "ignition",
                                       "arrhenius")),
    "reaction.p": _KeySpec("float", 4.0, lambda v: v > 1,
                           "p must exceed 1"),
    "reaction.c": _KeySpec("float", 1.0, lambda v: v > 0,
                           "must be positive"),
    "reaction.M": _KeySpec("float", 1.0, lambda v: v > 0,
                           "must be positive"),
    "reaction.theta0": _KeySpec("float", 0.25, lambda v: 0 < v < 1,
                                "cutoff must lie in (0, 1)"),
    "reaction.arr_c": _KeySpec("float", 1.0, lambda v: v > 0,
                               "must be positive"),
    "init.kind": _KeySpec("str", "indicator", *_choice("indicator",
                                                       "gaussian")),
    "init.eta": _KeySpec("float", 1.0, lambda v: v > 0, "must be positive"),
    "init.L": _KeySpec("float", 1.0, lambda v: v > 0, "must be positive"),
    "time.horizon": _KeySpec("float", 10.0, lambda v: v > 0,
                             "must be positive"),
    "time.dt": _KeySpec("float", 0.0, lambda v: v >= 0,
                        "0 selects the stability-limit step"),
    "detect.quench_sup": _KeySpec("float", 1e-3, lambda v: v > 0,
                                  "must be positive"),
    "detect.occupancy_level": _KeySpec("float", 0.9, lambda v: 0 < v < 1,
                                       "must lie in (0, 1)"),
    "detect.gamma": _KeySpec("float", 0.05, lambda v: v > 0,
                             "must be positive"),
    "detect.sustain": _KeySpec("float", 0.1, lambda v: 0 < v < 1,
                               "trailing fraction in (0, 1)"),
    "detect.boundary_tol": _KeySpec("float", 1e-8, lambda v: v > 0,
                                    "must be positive"),
    "detect.margin_cells": _KeySpec("int", 5, lambda v: v >= 1,
                                    "need at least one cell"),
    "detect.check_every": _KeySpec("int", 10, lambda v: v >= 1,
                                   "need at least 1"),
    "detect.min_time": _KeySpec("float", 1.0, lambda v: v >= 0,
                                "must be nonnegative"),
    "detect.wall_budget_s": _KeySpec("float", 0.0, lambda v: v >= 0,
                                     "0 disables the budget"),
    "detect.early_exit": _KeySpec("bool", True),
    "mc.n_paths": _KeySpec("int", 100_000, lambda v: v >= 100,
                           "need at least 100 paths"),
    "mc.t": _KeySpec("float", 1.0, lambda v: v > 0, "must be positive"),
    "mc.x": _KeySpec("float", 0.0),
    "mc.y": _KeySpec("float", 0.0),
    "mc.eps": _KeySpec("float", 0.5, lambda v: 0 < v <= 0.5,
                       "interval half-width in (0, 0.5]"),
    "mc.start_y": _KeySpec("float", 0.0),
    "mc.substep": _KeySpec("float", 0.0, lambda v: v >= 0,
                           "0 selects the default substep"),
    "mc.n_bins": _KeySpec("int", 64, lambda v: v >= 8, "need n_bins >= 8"),
    "cert.t1": _KeySpec("float", 1.0, lambda v: v >= 0,
                        "0 disables certificate attempts in sweeps"),
    "cert.alpha": _KeySpec("float", 0.0, lambda v: v >= 0,
                           "0 derives alpha from reaction.p"),
    "cert.delta0": _KeySpec("float", 1.0, lambda v: v > 0,
                            "must be positive"),
    "cert.tail": _KeySpec("str", "exact", *_choice("exact", "none")),
    "sweep.kind": _KeySpec("str", "length", *_choice("length", "amplitude",
                                                     "exponent", "plateau")),
    "sweep.grid": _KeySpec("floats", (0.25, 0.5, 1.0, 2.0),
                           lambda v: len(v) > 0, "need at least one value"),
    "sweep.refine": _KeySpec("int", 0, lambda v: v >= 0,
                             "must be nonnegative"),
    "sweep.A_large": _KeySpec("float", 16.0, lambda v: v > 0,
                              "must be positive"),
    "out.dir": _KeySpec("str", "."),
    "out.prefix": _KeySpec("str", "run"),
    "out.snapshot_dt": _KeySpec("float", 0.0, lambda v: v >= 0,
                                "0 keeps only the final snapshot"),
}


def _parse_value(kind: str, raw: str):
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        if raw not in ("true", "false"):
            raise ValueError(raw)
        return raw == "true"
    if kind == "floats":
        parts = [s.strip() for s in raw.split(",") if s.strip()]
        return tuple(float(s) for s in parts)
    return raw


def _render_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(repr(float(x)) for x in v)
    return str(v)


@dataclass(frozen=True)
class RunConfig:
    """Resolved flat config: every schema key has a value.

    ``explicit`` records which keys the file (or a flag) actually set;
    everything else is a default, echoed all the same in manifests.
    """

    values: dict
    explicit: frozenset = frozenset()

    def __getitem__(self, key: str):
        return self.values[key]

    def override(self, key: str, value) -> "RunConfig":
        vals = dict(self.values)
        vals[key] = value
        return RunConfig(vals, self.explicit | {key})

    def render(self) -> str:
        return "\n".join(f"{k} = {_render_value(self.values[k])}"
                         for k in sorted(self.values)) + "\n"

    @property
    def config_hash(self) -> str:
        # out.* moves files around without touching the science; keeping it
        # out of the hash lets relocated reruns compare equal
        lines = [f"{k} = {_render_value(self.values[k])}"
                 for k in sorted(self.values) if not k.startswith("out.")]
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


def parse_config(text: str) -> RunConfig:
    """Line-oriented ``key = value`` parser with ``#`` comments.

    Unknown keys, type mismatches and constraint violations raise
    ConfigError naming the key and the line.
    """
    values = {k: s.default for k, s in _SCHEMA.items()}
    explicit: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(
                f"line {lineno}: expected `key = value`, got {line!r}")
        key, val = key.strip(), val.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        spec = _SCHEMA[key]
        try:
            parsed = _parse_value(spec.kind, val)
        except ValueError:
            raise ConfigError(
                f"line {lineno}: {key} expects a {spec.kind} value, "
                f"got {val!r}") from None
        if spec.check is not None and not spec.check(parsed):
            raise ConfigError(f"line {lineno}: {key} = {val}: {spec.msg}")
        values[key] = parsed
        explicit.add(key)
    return RunConfig(values, frozenset(explicit))


# ---------------------------------------------------------------------------
# constructing module objects from a config


def _build_reaction(cfg: RunConfig) -> ReactionSpec | None:
    kind = cfg["reaction.kind"]
    if kind == "none":
        return None
    if kind == "powerlaw":
        return ReactionSpec.power_law(c=cfg["reaction.c"],
                                      p=cfg["reaction.p"],
                                      M=cfg["reaction.M"])
    if kind == "ignition":
        return ReactionSpec.ignition(theta0=cfg["reaction.theta0"],
                                     M=cfg["reaction.M"])
    return ReactionSpec.arrhenius(arr_c=cfg["reaction.arr_c"],
                                  M=cfg["reaction.M"])


def _build_flow(cfg: RunConfig, unit: bool = False) -> FlowProfile | None:
    """The configured shear; ``unit`` builds the amplitude-1 reference
    shape used by samplers that scale drift themselves."""
    kind = cfg["flow.kind"]
    if kind == "none":
        return None
    plateaux = ()
    if kind == "plateau":
        plateaux = ((cfg["flow.plateau_center"],
                     cfg["flow.plateau_halfwidth"]),)
    amp = 1.0 if unit else cfg["flow.amplitude"]
    spec = ShearSpec(plateaux=plateaux, amplitude=amp)
    return build_shear_profile(spec, torus_nodes(cfg["domain.ny"]))


def _build_grid(cfg: RunConfig, flow, reaction) -> Grid:
    dt = cfg["time.dt"] or None
    return build_grid(cfg["domain.x_extent"], cfg["domain.nx"],
                      m=cfg["domain.m"], ny=cfg["domain.ny"], dt=dt,
                      flow=flow, reaction=reaction,
                      x_periodic=cfg["domain.x_periodic"])


def _build_datum(cfg: RunConfig, grid: Grid) -> Field:
    if cfg["init.kind"] == "indicator":
        return indicator_datum(grid, L=cfg["init.L"], eta=cfg["init.eta"])
    return gaussian_datum(grid, amp=cfg["init.eta"], width=cfg["init.L"])


def _build_detectors(cfg: RunConfig) -> DetectorConfig:
    budget = cfg["detect.wall_budget_s"] or None
    return DetectorConfig(quench_sup=cfg["detect.quench_sup"],
                          occupancy_level=cfg["detect.occupancy_level"],
                          gamma=cfg["detect.gamma"],
                          sustain=cfg["detect.sustain"],
                          boundary_tol=cfg["detect.boundary_tol"],
                          margin_cells=cfg["detect.margin_cells"],
                          check_every=cfg["detect.check_every"],
                          min_time=cfg["detect.min_time"],
                          wall_budget_s=budget,
                          early_exit=cfg["detect.early_exit"])


def _sampler(cfg: RunConfig) -> PathSamplerConfig:
    return PathSamplerConfig(n_paths=cfg["mc.n_paths"],
                             substep=cfg["mc.substep"] or None,
                             seed=cfg["seed"])


# ---------------------------------------------------------------------------
# manifests and verification


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(out_dir: Path, cfg: RunConfig, subcommand: str,
                    workers: int, outputs: list[str],
                    inputs: list[tuple[str, str]] = (),
                    results: list[tuple[str, str]] = ()) -> Path:
    lines = ["# quenchlab manifest",
             "manifest_version = 1",
             f"subcommand = {subcommand}",
             f"config_hash = {cfg.config_hash}",
             f"workers = {workers}"]
    lines += [f"config.{k} = {_render_value(cfg.values[k])}"
              for k in sorted(cfg.values)]
    lines += [f"result.{name} = {val}" for name, val in results]
    lines += [f"input.{name} = {digest}" for name, digest in sorted(inputs)]
    lines += [f"sha256.{name} = {_sha256_file(out_dir / name)}"
              for name in sorted(outputs)]
    path = out_dir / f"{cfg['out.prefix']}_manifest.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


def verify_outputs(manifest) -> bool:
    """Recompute the sha256 of every file the manifest lists.

    True iff all hashes match; missing or altered files are listed on
    stderr and yield False.
    """
    manifest = Path(manifest)
    base = manifest.parent
    bad: list[str] = []
    found_any = False
    for line in manifest.read_text().splitlines():
        key, sep, val = line.partition(" = ")
        if not sep or not key.startswith("sha256."):
            continue
        found_any = True
        name = key[len("sha256."):]
        target = base / name
        if not target.exists():
            bad.append(f"missing: {name}")
        elif _sha256_file(target) != val:
            bad.append(f"hash mismatch: {name}")
    for entry in bad:
        print(entry, file=sys.stderr)
    return found_any and not bad


# ---------------------------------------------------------------------------
# subcommand bodies


def _merge_verdicts(pieces: list[RunVerdict]) -> RunVerdict:
    if len(pieces) == 1:
        return pieces[0]
    cat = lambda sel: np.concatenate([sel(pieces[0])]
                                     + [sel(p)[1:] for p in pieces[1:]])
    status = next((p.status for p in pieces
                   if p.status is not RunStatus.UNDECIDED),
                  RunStatus.UNDECIDED)
    note = next((p.note for p in pieces if p.note), "")
    return RunVerdict(status, cat(lambda p: p.times),
                      cat(lambda p: p.sup_trace), cat(lambda p: p.l1_trace),
                      cat(lambda p: p.front_left),
                      cat(lambda p: p.front_right), pieces[-1].final,
                      any(p.contaminated for p in pieces), note)


def _solve_with_snapshots(datum, flow, reaction, grid, horizon, det,
                          snap_dt):
    """Chained solve saving the field at each snapshot boundary.

    Each segment restarts the detector windows, so verdicts can only fire
    later than in a single run, never spuriously; the first decided
    segment wins.
    """
    if snap_dt <= 0:
        return solve(datum, flow, reaction, grid, horizon, det), []
    pieces, snaps = [], []
    f = datum
    while True:
        seg = min(snap_dt, horizon - f.time)
        v = solve(f, flow, reaction, grid, seg, det)
        pieces.append(v)
        f = v.final
        decided = v.status is not RunStatus.UNDECIDED
        if f.time >= horizon - 1e-9 or (decided and det.early_exit):
            break
        snaps.append(f)
    return _merge_verdicts(pieces), snaps


def _run_solve(cfg: RunConfig, out_dir: Path, workers: int) -> int:
    reaction = _build_reaction(cfg)
    flow = _build_flow(cfg)
    grid = _build_grid(cfg, flow, reaction)
    datum = _build_datum(cfg, grid)
    verdict, snaps = _solve_with_snapshots(datum, flow, reaction, grid,
                                           cfg["time.horizon"],
                                           _build_detectors(cfg),
                                           cfg["out.snapshot_dt"])
    prefix = cfg["out.prefix"]
    outputs = [f"{prefix}_trace.csv", f"{prefix}_final.snap"]
    trace_to_csv(out_dir / outputs[0], verdict, cfg.config_hash)
    save_snapshot(out_dir / outputs[1], verdict.final, grid)
    for k, f in enumerate(snaps, start=1):
        name = f"{prefix}_snap_{k:04d}.snap"
        save_snapshot(out_dir / name, f, grid)
        outputs.append(name)
    results = [("status", verdict.status.value),
               ("sup_final", repr(float(verdict.sup_trace[-1])))]
    if verdict.note:
        results.append(("note", verdict.note))
    _write_manifest(out_dir, cfg, "solve", workers, outputs,
                    results=results)
    print(f"{verdict.status.value} "
          f"sup_final={float(verdict.sup_trace[-1])!r}")
    return 0


def _run_linear_solve(cfg: RunConfig, out_dir: Path, workers: int) -> int:
    flow = _build_flow(cfg)
    grid = _build_grid(cfg, flow, None)
    datum = _build_datum(cfg, grid)
    horizon = cfg["time.horizon"]
    snap_dt = cfg["out.snapshot_dt"]
    probes: tuple[float, ...] = ()
    if snap_dt > 0:
        probes = tuple(k * snap_dt
                       for k in range(1, int(horizon / snap_dt) + 1)
                       if k * snap_dt < horizon - 1e-9)
    trace = run_linear(datum, flow, grid, horizon,
                       record_every=cfg["detect.check_every"],
                       probe_times=probes)
    prefix = cfg["out.prefix"]
    outputs = [f"{prefix}_trace.csv", f"{prefix}_final.snap"]
    with open(out_dir / outputs[0], "w") as fh:
        fh.write(f"# config_hash={cfg.config_hash}\n")
        fh.write("t,sup,l1,front_left,front_right\n")
        for t, s in zip(trace.times, trace.sups):
            fh.write(f"{float(t)!r},{float(s)!r},nan,nan,nan\n")
    save_snapshot(out_dir / outputs[1], trace.final, grid)
    for k, t in enumerate(sorted(trace.snapshots), start=1):
        name = f"{prefix}_snap_{k:04d}.snap"
        save_snapshot(out_dir / name, trace.snapshots[t], grid)
        outputs.append(name)
    results = [("sup_final", repr(float(trace.sups[-1])))]
    _write_manifest(out_dir, cfg, "linear-solve", workers, outputs,
                    results=results)
    print(f"linear trace to t={float(trace.times[-1])!r} "
          f"sup_final={float(trace.sups[-1])!r}")
    return 0


def _read_trace(path: Path) -> tuple[np.ndarray, np.ndarray]:
    times, sups = [], []
    for line in path.read_text().splitlines():
        if line.startswith("#") or line.startswith("t,"):
            continue
        parts = line.split(",")
        times.append(float(parts[0]))
        sups.append(float(parts[1]))
    if not times:
        raise ValueError(f"no trace rows in {path}")
    return np.array(times), np.array(sups)


def _run_certify(cfg: RunConfig, out_dir: Path, workers: int) -> int:
    prefix = cfg["out.prefix"]
    trace_path = out_dir / f"{prefix}_trace.csv"
    times, sups = _read_trace(trace_path)
    alpha = cfg["cert.alpha"]
    if alpha == 0.0:
        if cfg["reaction.kind"] != "powerlaw":
            raise ValueError(
                "cert.alpha = 0 derives the exponent from reaction.p, "
                "which needs reaction.kind = powerlaw")
        alpha = cfg["reaction.p"] - 1.0
    # the envelope constant must absorb the coupling: M f(T) <= c T^(1+a)
    c_env = cfg["reaction.M"] * cfg["reaction.c"]
    tail = (TailSpec.exact(cfg["init.L"]) if cfg["cert.tail"] == "exact"
            else TailSpec.none())
    I_upper = estimate_I(times, sups, alpha, tail)
    cert = quench_certificate(I_upper, c_env, alpha, cfg["cert.delta0"],
                              tail_method=tail.method)
    name = f"{prefix}_cert.txt"
    with open(out_dir / name, "w") as fh:
        fh.write(f"# config_hash={cfg.config_hash}\n")
        fh.write(cert.record())
    results = [("valid", "true" if cert.valid else "false"),
               ("threshold", repr(cert.threshold)),
               ("I_upper", repr(cert.I_upper))]
    # the trace is an input, but re-listing it keeps `verify` auditing it
    # after this manifest replaces the linear-solve one
    _write_manifest(out_dir, cfg, "certify", workers,
                    [name, trace_path.name],
                    inputs=[("trace_csv", _sha256_file(trace_path))],
                    results=results)
    print(f"certificate valid={'true' if cert.valid else 'false'} "
          f"delta0={cert.delta0!r} threshold={cert.threshold!r}")
    return 0


def _write_estimates(out_dir: Path, cfg: RunConfig,
                     rows: list[str]) -> str:
    name = f"{cfg['out.prefix']}_estimates.csv"
    with open(out_dir / name, "w") as fh:
        fh.write(f"# config_hash={cfg.config_hash}\n")
        for row in rows:
            fh.write(row + "\n")
    return name


def _run_mc_fk(cfg: RunConfig, out_dir: Path, workers: int) -> int:
    profile = _build_flow(cfg, unit=True)
    A = cfg["flow.amplitude"]
    est = fk_phi(cfg["mc.t"], cfg["mc.x"], cfg["mc.y"], cfg["init.L"], A,
                 profile, _sampler(cfg))
    row = estimate_csv_row("fk_phi",
                           {"t": cfg["mc.t"], "x": cfg["mc.x"],
                            "y": cfg["mc.y"], "L": cfg["init.L"], "A": A},
                           est, cfg["seed"])
    name = _write_estimates(out_dir, cfg, [row])
    _write_manifest(out_dir, cfg, "mc-fk", workers, [name],
                    results=[("value", repr(est.value)),
                             ("std_error", repr(est.std_error))])
    print(row)
    return 0


def _run_mc_plateau(cfg: RunConfig, out_dir: Path, workers: int) -> int:
    mc, series, bound = plateau_confinement_prob(cfg["mc.t"], cfg["mc.eps"],
                                                 cfg["mc.start_y"],
                                                 _sampler(cfg))
    params = {"t": cfg["mc.t"], "eps": cfg["mc.eps"],
              "start_y": cfg["mc.start_y"]}
    rows = [estimate_csv_row("plateau_confinement", params, mc, cfg["seed"]),
            # analytic companions: zero spread, zero paths
            estimate_csv_row("confinement_series", params,
                             McEstimate(series, 0.0, 0), cfg["seed"]),
            estimate_csv_row("confinement_bound", params,
                             McEstimate(bound, 0.0, 0), cfg["seed"])]
    name = _write_estimates(out_dir, cfg, rows)
    _write_manifest(out_dir, cfg, "mc-plateau", workers, [name],
                    results=[("value", repr(mc.value)),
                             ("series", repr(series)),
                             ("bound", repr(bound))])
    for row in rows:
        print(row)
    return 0


def _run_mc_kernel(cfg: RunConfig, out_dir: Path, workers: int) -> int:
    profile = _build_flow(cfg, unit=True)
    A = cfg["flow.amplitude"]
    est, fitted_C = heat_kernel_profile(cfg["mc.t"], A, profile,
                                        _sampler(cfg),
                                        HistogramSpec(cfg["mc.n_bins"]))
    prefix = cfg["out.prefix"]
    hist_name = f"{prefix}_kernel.csv"
    with open(out_dir / hist_name, "w") as fh:
        fh.write(f"# config_hash={cfg.config_hash}\n")
        fh.write(histogram_csv(est))
    row = estimate_csv_row("kernel_envelope",
                           {"t": cfg["mc.t"], "A": A},
                           McEstimate(fitted_C, 0.0, cfg["mc.n_paths"]),
                           cfg["seed"])
    est_name = _write_estimates(out_dir, cfg, [row])
    _write_manifest(out_dir, cfg, "mc-kernel", workers,
                    [hist_name, est_name],
                    results=[("fitted_C", repr(fitted_C))])
    print(f"fitted_C={fitted_C!r}")
    return 0


def _run_sweep(cfg: RunConfig, out_dir: Path, workers: int) -> SweepResult:
    kind = cfg["sweep.kind"]
    grid_vals = list(cfg["sweep.grid"])
    reaction = _build_reaction(cfg)
    det = _build_detectors(cfg)
    common = dict(x_extent=cfg["domain.x_extent"], nx=cfg["domain.nx"],
                  ny=cfg["domain.ny"], horizon=cfg["time.horizon"],
                  cert_t1=cfg["cert.t1"], workers=workers)
    if kind == "length":
        if reaction is None:
            raise ValueError("length sweep needs a reaction")
        return critical_length_scan(reaction, _build_flow(cfg),
                                    cfg["init.eta"], grid_vals,
                                    detectors=det,
                                    refine=cfg["sweep.refine"], **common)
    if kind == "exponent":
        return exponent_scan(grid_vals, cfg["reaction.c"],
                             cfg["reaction.M"],
                             (cfg["init.eta"], cfg["init.L"]),
                             _build_flow(cfg),
                             quench_sup=cfg["detect.quench_sup"],
                             detectors=det, **common)
    if reaction is None:
        raise ValueError(f"{kind} sweep needs a reaction")
    profile = _build_flow(cfg)
    if kind == "amplitude":
        if profile is None:
            raise ValueError("amplitude sweep needs flow.kind != none")
        return amplitude_scan(grid_vals, cfg["init.L"], reaction, profile,
                              eta=cfg["init.eta"],
                              quench_sup=cfg["detect.quench_sup"],
                              detectors=det, refine=cfg["sweep.refine"],
                              **common)
    return plateau_scan(grid_vals, cfg["sweep.A_large"], reaction,
                        cfg["init.L"], eta=cfg["init.eta"],
                        quench_sup=cfg["detect.quench_sup"], detectors=det,
                        refine=cfg["sweep.refine"], **common)


def _run_sweep_cmd(cfg: RunConfig, out_dir: Path, workers: int) -> int:
    res = _run_sweep(cfg, out_dir, workers)
    prefix = cfg["out.prefix"]
    name = f"{prefix}_sweep.csv"
    with open(out_dir / name, "w") as fh:
        fh.write(f"# config_hash={cfg.config_hash}\n")
        fh.write(sweep_csv(res))
    outputs = [name]
    for i, p in enumerate(res.points):
        if p.certificate is None:
            continue
        cert_name = f"{prefix}_cert_{i:03d}.txt"
        with open(out_dir / cert_name, "w") as fh:
            fh.write(f"# config_hash={cfg.config_hash}\n")
            fh.write(f"# {res.parameter}={p.value!r}\n")
            fh.write(p.certificate.record())
        outputs.append(cert_name)
    bracket = ("none" if res.bracket is None
               else f"{res.bracket[0]!r},{res.bracket[1]!r}")
    results = [("bracket", bracket)]
    if res.note:
        results.append(("note", res.note))
    _write_manifest(out_dir, cfg, "sweep", workers, outputs,
                    results=results)
    capped = any("wall-clock" in p.note for p in res.points)
    print(f"bracket={bracket}" + (f" note={res.note}" if res.note else ""))
    return 2 if res.bracket is None or capped else 0


def run(cfg: RunConfig, subcommand: str, workers: int = 1) -> int:
    """Execute one subcommand; returns the process exit code."""
    if subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    out_dir = Path(cfg["out.dir"])
    if subcommand == "verify":
        manifest = out_dir / f"{cfg['out.prefix']}_manifest.txt"
        if not manifest.exists():
            raise ValueError(f"no manifest at {manifest}")
        ok = verify_outputs(manifest)
        print("ok" if ok else "verification failed")
        return 0 if ok else 1
    os.makedirs(out_dir, exist_ok=True)
    body = {"solve": _run_solve, "linear-solve": _run_linear_solve,
            "certify": _run_certify, "mc-fk": _run_mc_fk,
            "mc-plateau": _run_mc_plateau, "mc-kernel": _run_mc_kernel,
            "sweep": _run_sweep_cmd}[subcommand]
    return body(cfg, out_dir, workers)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="quenchlab",
        description="Quenching and propagation runs with audited outputs.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="key = value config file")
    ap.add_argument("--out", help="output directory (overrides out.dir)")
    ap.add_argument("--seed", type=int, help="overrides the config seed")
    ap.add_argument("--workers", type=int, default=1,
                    help="parallel sweep workers")
    args = ap.parse_args(argv)
    try:
        text = Path(args.config).read_text() if args.config else ""
        cfg = parse_config(text)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must fit in 64 bits")
            cfg = cfg.override("seed", args.seed)
        if args.out is not None:
            cfg = cfg.override("out.dir", args.out)
        elif "out.dir" not in cfg.explicit and os.environ.get("QUENCHLAB_OUT"):
            cfg = cfg.override("out.dir", os.environ["QUENCHLAB_OUT"])
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        return run(cfg, args.subcommand, workers=args.workers)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
