import hashlib
from pathlib import Path

import pytest

from quenchlab.cli import (ConfigError, main, parse_config, run,
                           verify_outputs)
from quenchlab.certificates import parse_certificate


def test_empty_config_is_all_defaults():
    cfg = parse_config("")
    assert cfg["version"] == "1"
    assert cfg["seed"] == 0
    assert cfg["domain.nx"] == 300
    assert cfg["reaction.kind"] == "none"
    assert cfg["detect.early_exit"] is True
    assert cfg["sweep.grid"] == (0.25, 0.5, 1.0, 2.0)
    assert cfg.explicit == frozenset()


def test_parse_types_comments_and_explicit():
    text = """
    # a comment line
    domain.nx = 480          # trailing comment
    domain.x_periodic = true
    reaction.kind = powerlaw
    reaction.p = 3.5
    sweep.grid = 1.0, 2.0, 4.0
    seed = 42
    """
    cfg = parse_config(text)
    assert cfg["domain.nx"] == 480
    assert cfg["domain.x_periodic"] is True
    assert cfg["reaction.p"] == 3.5
    assert cfg["sweep.grid"] == (1.0, 2.0, 4.0)
    assert cfg["seed"] == 42
    assert "domain.nx" in cfg.explicit
    assert "domain.ny" not in cfg.explicit


def test_unknown_key_names_key_and_line():
    with pytest.raises(ConfigError) as err:
        parse_config("domain.nx = 100\nbogus.key = 1\n")
    assert "line 2" in str(err.value)
    assert "bogus.key" in str(err.value)


def test_type_mismatch_names_key_and_line():
    with pytest.raises(ConfigError) as err:
        parse_config("domain.nx = plenty\n")
    assert "line 1" in str(err.value)
    assert "domain.nx" in str(err.value)


def test_small_exponent_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config("reaction.p = 0.5\n")
    assert "p must exceed 1" in str(err.value)


def test_line_without_equals_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config("domain.nx 100\n")
    assert "line 1" in str(err.value)


def test_config_hash_ignores_output_location():
    a = parse_config("out.dir = /tmp/a\nout.prefix = x\n")
    b = parse_config("out.dir = /somewhere/else\n")
    c = parse_config("domain.nx = 301\n")
    assert a.config_hash == b.config_hash
    assert a.config_hash != c.config_hash
    assert len(a.config_hash) == 16


DIFFUSE = """
domain.x_extent = 10.0
domain.nx = 100
time.horizon = 2.0
init.L = 1.0
out.prefix = diff
"""


def _hashes(out_dir: Path) -> dict:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(out_dir.iterdir())}


def test_solve_outputs_and_verify_roundtrip(tmp_path):
    cfg = parse_config(DIFFUSE).override("out.dir", str(tmp_path))
    assert run(cfg, "solve") == 0
    trace = tmp_path / "diff_trace.csv"
    manifest = tmp_path / "diff_manifest.txt"
    assert trace.exists() and manifest.exists()
    assert (tmp_path / "diff_final.snap").exists()
    head = trace.read_text().splitlines()
    assert head[0] == f"# config_hash={cfg.config_hash}"
    assert head[1] == "t,sup,l1,front_left,front_right"
    body = manifest.read_text()
    # the fully resolved config is echoed, defaults included
    assert "config.time.horizon = 2.0" in body
    assert "config.detect.quench_sup = 0.001" in body
    assert f"config_hash = {cfg.config_hash}" in body
    assert verify_outputs(manifest) is True
    trace.write_text(trace.read_text().replace("0.0,1.0", "0.0,1.01", 1))
    assert verify_outputs(manifest) is False


def test_verify_false_on_missing_file(tmp_path, capsys):
    cfg = parse_config(DIFFUSE).override("out.dir", str(tmp_path))
    run(cfg, "solve")
    (tmp_path / "diff_final.snap").unlink()
    assert verify_outputs(tmp_path / "diff_manifest.txt") is False
    assert "diff_final.snap" in capsys.readouterr().err


def test_rerun_is_byte_identical(tmp_path):
    cfg = parse_config(DIFFUSE).override("out.dir", str(tmp_path))
    run(cfg, "solve")
    first = _hashes(tmp_path)
    run(cfg, "solve")
    assert _hashes(tmp_path) == first


def test_main_flags_and_exit_codes(tmp_path):
    cfg_file = tmp_path / "d.cfg"
    cfg_file.write_text(DIFFUSE)
    code = main(["solve", "--config", str(cfg_file), "--out",
                 str(tmp_path / "o1"), "--seed", "9"])
    assert code == 0
    body = (tmp_path / "o1" / "diff_manifest.txt").read_text()
    assert "config.seed = 9" in body
    assert main(["solve", "--config", str(tmp_path / "nope.cfg")]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("reaction.p = 0.5\n")
    assert main(["solve", "--config", str(bad)]) == 1


def test_env_out_dir_is_default(tmp_path, monkeypatch):
    cfg_file = tmp_path / "d.cfg"
    cfg_file.write_text(DIFFUSE)
    env_dir = tmp_path / "from_env"
    monkeypatch.setenv("QUENCHLAB_OUT", str(env_dir))
    assert main(["solve", "--config", str(cfg_file)]) == 0
    assert (env_dir / "diff_manifest.txt").exists()
    # an explicit out.dir in the file beats the env default
    cfg_file.write_text(DIFFUSE + f"out.dir = {tmp_path / 'explicit'}\n")
    assert main(["solve", "--config", str(cfg_file)]) == 0
    assert (tmp_path / "explicit" / "diff_manifest.txt").exists()


LINEAR = """
domain.x_extent = 15.0
domain.nx = 150
time.horizon = 3.0
init.eta = 0.2
init.L = 0.5
reaction.kind = powerlaw
reaction.p = 4.0
reaction.M = 2.0
out.prefix = lin
out.snapshot_dt = 1.0
"""


def test_linear_solve_then_certify(tmp_path):
    cfg = parse_config(LINEAR).override("out.dir", str(tmp_path))
    assert run(cfg, "linear-solve") == 0
    assert (tmp_path / "lin_snap_0001.snap").exists()
    assert (tmp_path / "lin_snap_0002.snap").exists()
    assert run(cfg, "certify") == 0
    cert = parse_certificate((tmp_path / "lin_cert.txt").read_text())
    assert cert.alpha == 3.0
    assert cert.c == 2.0  # coupling folded into the envelope constant
    assert cert.tail_method == "exact"
    assert cert.valid in (True, False)
    body = (tmp_path / "lin_manifest.txt").read_text()
    assert "input.trace_csv = " in body
    assert "sha256.lin_trace.csv = " in body
    assert verify_outputs(tmp_path / "lin_manifest.txt") is True


def test_certify_needs_powerlaw_for_auto_alpha(tmp_path):
    text = LINEAR.replace("reaction.kind = powerlaw",
                          "reaction.kind = ignition")
    cfg = parse_config(text).override("out.dir", str(tmp_path))
    run(cfg, "linear-solve")
    with pytest.raises(ValueError):
        run(cfg, "certify")


def test_mc_fk_row_and_seed(tmp_path):
    text = "mc.n_paths = 2000\nmc.t = 0.5\nout.prefix = fk\n"
    cfg = parse_config(text).override("out.dir", str(tmp_path))
    cfg = cfg.override("seed", 11)
    assert run(cfg, "mc-fk") == 0
    rows = [r for r in (tmp_path / "fk_estimates.csv").read_text()
            .splitlines() if not r.startswith("#")]
    assert len(rows) == 1
    cols = rows[0].split(",")
    assert cols[0] == "fk_phi"
    assert cols[-1] == "11"
    assert int(cols[-2]) == 2000
    assert 0.0 <= float(cols[-4]) <= 1.0


def test_mc_plateau_triple_rows(tmp_path):
    text = "mc.n_paths = 2000\nmc.t = 0.25\nmc.eps = 0.5\nout.prefix = pl\n"
    cfg = parse_config(text).override("out.dir", str(tmp_path))
    assert run(cfg, "mc-plateau") == 0
    rows = [r for r in (tmp_path / "pl_estimates.csv").read_text()
            .splitlines() if not r.startswith("#")]
    names = [r.split(",")[0] for r in rows]
    assert names == ["plateau_confinement", "confinement_series",
                     "confinement_bound"]
    series = float(rows[1].split(",")[-4])
    bound = float(rows[2].split(",")[-4])
    assert series <= bound + 1e-15


def test_mc_kernel_outputs(tmp_path):
    text = "mc.n_paths = 20000\nmc.t = 0.5\nout.prefix = k\n"
    cfg = parse_config(text).override("out.dir", str(tmp_path))
    assert run(cfg, "mc-kernel") == 0
    hist = (tmp_path / "k_kernel.csv").read_text().splitlines()
    assert hist[0] == f"# config_hash={cfg.config_hash}"
    assert hist[1] == "bin_center,density,count"
    assert len(hist) > 10
    est = (tmp_path / "k_estimates.csv").read_text()
    assert "kernel_envelope" in est


SWEEP = """
sweep.kind = length
sweep.grid = 0.25, 4.0
reaction.kind = ignition
reaction.theta0 = 0.25
domain.x_extent = 30.0
domain.nx = 300
time.horizon = 40.0
detect.quench_sup = 0.225
cert.t1 = 0.0
out.prefix = sw
"""


def test_sweep_bracket_exit_zero(tmp_path):
    cfg = parse_config(SWEEP).override("out.dir", str(tmp_path))
    assert run(cfg, "sweep") == 0
    lines = (tmp_path / "sw_sweep.csv").read_text().splitlines()
    assert lines[0] == f"# config_hash={cfg.config_hash}"
    assert lines[1] == ("param,value,status,sup_final,front_speed,"
                        "cert_valid,cert_threshold")
    assert lines[2].startswith("L,0.25,QuenchedNumerical")
    assert lines[3].startswith("L,4.0,PropagatingNumerical")
    body = (tmp_path / "sw_manifest.txt").read_text()
    assert "result.bracket = 0.25,4.0" in body


def test_sweep_without_transition_exits_two(tmp_path):
    text = SWEEP.replace("sweep.grid = 0.25, 4.0", "sweep.grid = 0.25")
    text = text.replace("time.horizon = 40.0", "time.horizon = 20.0")
    cfg = parse_config(text).override("out.dir", str(tmp_path))
    assert run(cfg, "sweep") == 2
    body = (tmp_path / "sw_manifest.txt").read_text()
    assert "result.bracket = none" in body


def test_sweep_wall_cap_exits_two(tmp_path):
    text = SWEEP + "detect.wall_budget_s = 1e-3\n"
    cfg = parse_config(text).override("out.dir", str(tmp_path))
    assert run(cfg, "sweep") == 2


def test_sweep_workers_match_serial_bytes(tmp_path):
    text = SWEEP.replace("sweep.grid = 0.25, 4.0",
                         "sweep.grid = 0.25, 0.35")
    text = text.replace("time.horizon = 40.0", "time.horizon = 12.0")
    cfg1 = parse_config(text).override("out.dir", str(tmp_path / "w1"))
    cfg2 = parse_config(text).override("out.dir", str(tmp_path / "w2"))
    run(cfg1, "sweep", workers=1)
    run(cfg2, "sweep", workers=2)
    a = (tmp_path / "w1" / "sw_sweep.csv").read_bytes()
    b = (tmp_path / "w2" / "sw_sweep.csv").read_bytes()
    assert a == b


def test_verify_subcommand_exit_codes(tmp_path):
    cfg_file = tmp_path / "d.cfg"
    cfg_file.write_text(DIFFUSE)
    out = tmp_path / "o"
    assert main(["solve", "--config", str(cfg_file), "--out", str(out)]) == 0
    assert main(["verify", "--config", str(cfg_file), "--out",
                 str(out)]) == 0
    (out / "diff_trace.csv").write_text("tampered\n")
    assert main(["verify", "--config", str(cfg_file), "--out",
                 str(out)]) == 1
