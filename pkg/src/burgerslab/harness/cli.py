"""Command-line entry point: ``burgerslab <command> [flags]``.

Every command writes its outputs plus ``manifest.json`` into ``--out`` and
returns one of the exit codes 0 (pass), 2 (parameter), 3 (synthesis),
4 (stability) or 5 (verdict failed).  Errors are also reported as a single
JSON line on standard error.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import BurgersLabError, DegenerateFieldError, ParameterError, StepSizeError
from ..fbsde import THREADS_ENV, worker_count
from ..fields import ScalarField, curl_defect, estimate_holder
from ..solver import Trajectory, solve
from . import config as C
from . import io, studies

# command-specific defaults, applied between the global defaults and --config
COMMAND_DEFAULTS = {
    "generate-initial": {"grid": {"d": 2, "n": 64, "box_length": 1.0},
                         "initial": {"kind": "fbs"}},
    "study-mollification": {
        "grid": {"d": 2, "n": 64, "box_length": 1.0},
        "time": {"T": 0.1, "dt": 1e-3, "snapshot_every": 100},
        "physics": {"nu": 0.02, "scheme": "ssp_fd"},
        "initial": {"kind": "fbs", "cutoff": {"r_inner": 0.08, "r_outer": 0.2}},
    },
    "check-causality": {
        "grid": {"d": 2, "n": 32},
        "time": {"T": 0.2, "dt": 2e-3, "snapshot_every": 5},
        "physics": {"nu": 0.2},
        "initial": {"kind": "rotational"},
        "noise": {"kind": "brownian_integral", "seed": 3},
    },
    "noise-stats": {"grid": {"d": 2, "n": 32}},
    "calibrate-holder": {"grid": {"d": 1, "n": 1024, "box_length": 1.0}, "study": {"seeds": 20}},
}

# flag -> (config path, type, help)
FLAGS = {
    "--d": (("grid", "d"), int, "spatial dimension"),
    "--n": (("grid", "n"), int, "points per axis (power of two)"),
    "--L": (("grid", "box_length"), float, "box side length"),
    "--T": (("time", "T"), float, "time horizon"),
    "--dt": (("time", "dt"), float, "time step"),
    "--snapshot-every": (("time", "snapshot_every"), int, "steps between stored snapshots"),
    "--nu": (("physics", "nu"), float, "viscosity"),
    "--scheme": (("physics", "scheme"), str, "imex_cn | etd | ssp_fd"),
    "--spatial": (("physics", "spatial"), str, "spectral | central2"),
    "--kind": (("initial", "kind"), str, "fbs | potential | rotational | constant"),
    "--H": (("initial", "hurst"), float, "Hurst index of the sheet"),
    "--method": (("initial", "method"), str, "cholesky | spectral_approx"),
    "--psi": (("initial", "psi"), str, "potential: zero | cos | sin | NPBF scalar file"),
    "--amplitude": (("initial", "amplitude"), float, "scale of the named initial field"),
    "--r-inner": (("initial", "cutoff", "r_inner"), float, "cutoff inner radius"),
    "--r-outer": (("initial", "cutoff", "r_outer"), float, "cutoff outer radius"),
    "--noise": (("noise", "kind"), str, "zero | brownian | white"),
    "--noise-seed": (("noise", "seed"), int, "noise seed"),
    "--epsilon": (("noise", "epsilon"), float, "white-noise regularisation radius"),
    "--points": (("mc", "points"), int, "number of query points"),
    "--paths": (("mc", "n_paths"), int, "Monte Carlo paths per point"),
    "--dt-mc": (("mc", "dt_mc"), float, "Euler-Maruyama step"),
    "--abs-tol": (("mc", "abs_tol"), float, "absolute residual allowance"),
    "--levels": (("study", "levels"), int, "mollification levels"),
    "--eps0-cells": (("study", "eps0_cells"), float, "eps_0 in grid spacings"),
    "--t-star": (("study", "t_star"), float, "reseeding time (default T/2)"),
    "--new-seed": (("study", "new_seed"), int, "seed of the reseeded suffix"),
    "--tol": (("study", "tol"), float, "L-infinity tolerance"),
    "--seeds": (("study", "seeds"), int, "number of Monte Carlo seeds"),
    "--probes": (("study", "probes"), int, "probe points per check"),
}

SEED_TARGET = {
    "generate-initial": ("initial", "seed"),
    "simulate": ("noise", "seed"),
    "verify-fbsde": ("mc", "seed"),
    "study-mollification": ("initial", "seed"),
    "check-causality": ("noise", "seed"),
}

COMMAND_FLAGS = {
    "generate-initial": ["--d", "--n", "--L", "--kind", "--H", "--method", "--psi",
                         "--amplitude", "--r-inner", "--r-outer"],
    "simulate": ["--d", "--n", "--L", "--T", "--dt", "--snapshot-every", "--nu", "--scheme",
                 "--spatial", "--kind", "--psi", "--amplitude", "--noise", "--noise-seed",
                 "--epsilon"],
    "verify-colehopf": ["--d", "--n", "--L", "--T", "--dt", "--snapshot-every", "--nu",
                        "--scheme", "--spatial", "--psi", "--amplitude", "--tol"],
    "verify-fbsde": ["--points", "--paths", "--dt-mc", "--abs-tol"],
    "study-mollification": ["--d", "--n", "--L", "--T", "--dt", "--nu", "--scheme", "--H",
                            "--r-inner", "--r-outer", "--levels", "--eps0-cells", "--noise",
                            "--noise-seed", "--epsilon"],
    "check-causality": ["--d", "--n", "--L", "--T", "--dt", "--snapshot-every", "--nu",
                        "--scheme", "--kind", "--amplitude", "--noise", "--epsilon", "--t-star",
                        "--new-seed"],
    "estimate-holder": [],
    "noise-stats": ["--d", "--n", "--seeds", "--probes"],
    "calibrate-holder": ["--n", "--seeds"],
}


def _overrides(command, ns):
    out = {}
    for flag in COMMAND_FLAGS[command]:
        v = getattr(ns, flag.lstrip("-").replace("-", "_"))
        if v is not None:
            _nested_set(out, FLAGS[flag][0], v)
    if getattr(ns, "seed", None) is not None and command in SEED_TARGET:
        _nested_set(out, SEED_TARGET[command], ns.seed)
    if getattr(ns, "antithetic", False):
        _nested_set(out, ("mc", "antithetic"), True)
    if getattr(ns, "refine", False):
        _nested_set(out, ("study", "refine"), True)
    if getattr(ns, "no_dealias", False):
        _nested_set(out, ("physics", "dealias"), False)
    if getattr(ns, "hursts", None):
        _nested_set(out, ("study", "hursts"), [float(h) for h in ns.hursts.split(",")])
    if getattr(ns, "init", None):
        _nested_set(out, ("initial", "kind"), "file")
        _nested_set(out, ("initial", "file"), ns.init)
    return out


def _nested_set(d, path, value):
    for k in path[:-1]:
        d = d.setdefault(k, {})
    d[path[-1]] = value


def effective_config(command, config_path=None, overrides=None):
    cfg = C.merge(C.default_config(), COMMAND_DEFAULTS.get(command, {}))
    if config_path:
        doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        unknown = set(doc) - set(C.SECTIONS)
        if unknown:
            raise ParameterError(f"unknown config sections: {sorted(unknown)}")
        cfg = C.merge(cfg, doc)
    return C.normalise(C.merge(cfg, overrides))


# -- command bodies ----------------------------------------------------------
# Each takes (cfg, out_dir, inputs) and returns (exit_code, files, info).


def _cmd_generate(cfg, out, inputs):
    grid = C.build_grid(cfg)
    phi = C.build_initial(cfg, grid)
    io.write_field(out / "initial.npbf", phi)
    rows = []
    for i in range(grid.d):
        try:
            est = estimate_holder(phi.component(i))
            rows.append([i, est.exponent, est.constant])
        except (DegenerateFieldError, ParameterError):
            rows.append([i, None, None])
    curl = curl_defect(phi) if grid.d >= 2 else None
    io.write_csv(out / "summary.csv", ["component", "holder_exponent", "holder_constant"], rows)
    exps = [r[1] for r in rows if r[1] is not None]
    holder = float(np.mean(exps)) if exps else None
    print(f"holder_exponent={io.fmt(holder) or 'n/a'} per_component="
          + ",".join(io.fmt(r[1]) or "n/a" for r in rows))
    print(f"curl_defect={io.fmt(curl) or 'n/a'} sup={io.fmt(phi.sup())}")
    return 0, ["initial.npbf", "summary.csv"], dict(holder_exponent=holder, curl_defect=curl)


def _write_trajectory(out, traj, noisy):
    files = []
    rows = []
    for s, t in enumerate(traj.times):
        name = f"y_{s:05d}.npbf"
        io.write_field(out / name, traj.snapshot(s))
        files.append(name)
        if noisy:
            hn = f"yhat_{s:05d}.npbf"
            io.write_field(out / hn, traj.yhat_snapshot(s))
            files.append(hn)
        curl = traj.curl[s] if traj.curl is not None else None
        rows.append([s, float(t), float(np.max(np.sqrt(np.sum(traj.y[s] ** 2, axis=0)))), curl,
                     float(traj.growth_constant[s]), name])
    io.write_csv(out / "snapshots.csv",
                 ["snapshot", "time", "sup_y", "curl_defect", "growth_constant", "file"], rows)
    diag = []
    for k, t in enumerate(traj.step_times):
        e = traj.energy[k] if traj.energy is not None else None
        diag.append([k, float(t), float(traj.sup_y[k]), float(traj.boundary[k]), e])
    io.write_csv(out / "diagnostics.csv", ["step", "time", "sup_y", "boundary", "energy"], diag)
    return files + ["snapshots.csv", "diagnostics.csv"]


def _cmd_simulate(cfg, out, inputs):
    grid = C.build_grid(cfg)
    tg = C.build_time(cfg)
    phi = C.build_initial(cfg, grid)
    path = C.build_noise_path(cfg, grid, tg)
    traj = solve(phi, path, C.build_solver_config(cfg))
    files = _write_trajectory(out, traj, not path.is_zero)
    for w in traj.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"steps={tg.n_steps} snapshots={len(traj.times)} "
          f"sup_y_final={io.fmt(float(traj.sup_y[-1]))}")
    return 0, files, dict(steps=tg.n_steps, warnings=traj.warnings)


def load_trajectory(traj_dir):
    """Rebuild a Trajectory (and its noise path) from a ``simulate`` output directory."""
    traj_dir = Path(traj_dir)
    man = io.read_manifest(traj_dir)
    if man.get("command") != "simulate":
        raise ParameterError(f"{traj_dir} is not a simulate output directory")
    for name, digest in man["files"].items():
        if io.sha256_file(traj_dir / name) != digest:
            raise ParameterError(f"checksum mismatch for {name} in {traj_dir}")
    cfg = man["config"]
    grid = C.build_grid(cfg)
    tg = C.build_time(cfg)
    path = C.build_noise_path(cfg, grid, tg)
    _, rows = io.read_csv(traj_dir / "snapshots.csv")
    times = np.array([float(r[1]) for r in rows])
    y = np.array([io.read_field(traj_dir / r[5]).components for r in rows])
    if path.is_zero:
        yhat = y
    else:
        yhat = np.array([io.read_field(traj_dir / f"yhat_{int(r[0]):05d}.npbf").components
                         for r in rows])
    sup = np.array([float(r[2]) for r in rows])
    traj = Trajectory(grid=grid, times=times, yhat=yhat, eta=y - yhat, y=y, step_times=times,
                      sup_y=sup, boundary=np.zeros(len(times)),
                      config=C.build_solver_config(cfg))
    return traj, path, cfg


def _cmd_verify_colehopf(cfg, out, inputs):
    grid = C.build_grid(cfg)
    tg = C.build_time(cfg)
    psi = C.load_potential(grid, cfg["initial"]["psi"], float(cfg["initial"]["amplitude"]))
    st = cfg["study"]
    res = studies.verify_colehopf(psi, float(cfg["physics"]["nu"]), tg,
                                  C.build_solver_config(cfg), float(st["tol"]), bool(st["refine"]))
    io.write_csv(out / "colehopf.csv", res.header, res.rows)
    tr = res.data["traj"]
    io.write_csv(out / "max_norm.csv", ["step", "time", "sup_y"],
                 [[k, float(t), float(v)] for k, (t, v) in enumerate(zip(tr.step_times, tr.sup_y))])
    for r in res.rows:
        print(f"t={io.fmt(r[0])} linf={io.fmt(r[1])} l2={io.fmt(r[2])}")
    info = dict(linf=res.data["linf"], passed=res.passed, steps=tg.n_steps)
    if "ratio" in res.data:
        print(f"refinement ratio={io.fmt(res.data['ratio'])}")
        info["ratio"] = res.data["ratio"]
    print("PASS" if res.passed else "FAIL")
    return (0 if res.passed else 5), ["colehopf.csv", "max_norm.csv"], info


def _cmd_verify_fbsde(cfg, out, inputs):
    traj, path, _ = load_trajectory(inputs["traj"])
    m = cfg["mc"]
    mc = C.build_mc(cfg)
    queries = studies.query_points(traj.grid, float(traj.times[-1]), int(m["points"]),
                                   int(m["seed"]), m["tau_fractions"])
    res = studies.verify_fbsde(traj, path, queries, mc, float(m["abs_tol"]))
    io.write_csv(out / "fbsde.csv", res.header, res.rows)
    rep = res.data["report"]
    for r in rep.rows:
        print(f"tau={io.fmt(r.tau)} x={','.join(io.fmt(v) for v in r.x)} "
              f"residual={io.fmt(float(np.max(r.residual)))} stderr={io.fmt(float(np.max(r.stderr)))}")
    print("PASS" if res.passed else "FAIL")
    return (0 if res.passed else 5), ["fbsde.csv"], dict(passed=res.passed, notes=rep.notes)


def _cmd_study_mollification(cfg, out, inputs):
    grid = C.build_grid(cfg)
    tg = C.build_time(cfg)
    phi = C.build_initial(cfg, grid)
    path = C.build_noise_path(cfg, grid, tg)
    st = cfg["study"]
    res = studies.study_mollification(phi, path, C.build_solver_config(cfg), int(st["levels"]),
                                      float(st["eps0_cells"]) * grid.spacing)
    io.write_csv(out / "mollification.csv", res.header, res.rows)
    io.write_csv(out / "max_norm.csv", ["level", "step", "time", "sup_y"],
                 [[m, k, float(t), float(v)] for m, tr in enumerate(res.data["family"])
                  for k, (t, v) in enumerate(zip(tr.step_times, tr.sup_y))])
    b = res.data["bound"]
    for r in res.rows:
        print(" ".join(f"{h}={io.fmt(v) if not isinstance(v, str) else v}"
                       for h, v in zip(res.header, r)))
    print(f"bound kind={b.kind} observed={io.fmt(b.observed)} bound={io.fmt(b.bound)}")
    print("PASS" if res.passed else "FAIL")
    info = dict(passed=res.passed, distances=res.data["distances"], ratios=res.data["ratios"],
                bound=dict(kind=b.kind, observed=b.observed, bound=b.bound, passed=b.passed),
                warnings=res.data["warnings"], steps=tg.n_steps * int(st["levels"]))
    return (0 if res.passed else 5), ["mollification.csv", "max_norm.csv"], info


def _cmd_check_causality(cfg, out, inputs):
    grid = C.build_grid(cfg)
    tg = C.build_time(cfg)
    phi = C.build_initial(cfg, grid)
    path = C.build_noise_path(cfg, grid, tg)
    st = cfg["study"]
    t_star = tg.T / 2 if st["t_star"] is None else float(st["t_star"])
    res = studies.check_causality(phi, path, C.build_solver_config(cfg), t_star,
                                  int(st["new_seed"]))
    io.write_csv(out / "causality.csv", res.header, res.rows)
    print(f"t_star={io.fmt(t_star)} prefix_bit_equal={res.data['prefix_equal']} "
          f"max_later_diff={io.fmt(res.data['max_later_diff'])}")
    print("PASS" if res.passed else "FAIL")
    info = dict(passed=res.passed, t_star=t_star, steps=2 * tg.n_steps,
                max_later_diff=res.data["max_later_diff"])
    return (0 if res.passed else 5), ["causality.csv"], info


def _cmd_estimate_holder(cfg, out, inputs):
    f = io.read_field(inputs["field"])
    comps = [f] if isinstance(f, ScalarField) else [f.component(i) for i in range(f.grid.d)]
    rows = []
    for i, c in enumerate(comps):
        est = estimate_holder(c)
        rows.append([i, est.exponent, est.constant, len(est.scales_used)])
        print(f"component={i} exponent={io.fmt(est.exponent)} constant={io.fmt(est.constant)}")
    io.write_csv(out / "holder.csv", ["component", "exponent", "constant", "scales"], rows)
    return 0, ["holder.csv"], dict(exponents=[r[1] for r in rows])


def _cmd_noise_stats(cfg, out, inputs):
    grid = C.build_grid(cfg)
    st = cfg["study"]
    res = studies.noise_statistics(grid, int(st["seeds"]), int(st["probes"]))
    io.write_csv(out / "noise_stats.csv", res.header, res.rows)
    print(f"ito={res.data['ito']} white={res.data['white']}")
    print("PASS" if res.passed else "FAIL")
    return (0 if res.passed else 5), ["noise_stats.csv"], dict(passed=res.passed)


def _cmd_calibrate_holder(cfg, out, inputs):
    g = cfg["grid"]
    st = cfg["study"]
    res = studies.holder_calibration(int(g["n"]), tuple(st["hursts"]), int(st["seeds"]),
                                     box_length=float(g["box_length"]))
    io.write_csv(out / "holder_calibration.csv", res.header, res.rows)
    for r in res.rows:
        print(f"H={io.fmt(r[0])} mean={io.fmt(r[1])} std={io.fmt(r[2])}")
    print("PASS" if res.passed else "FAIL")
    return (0 if res.passed else 5), ["holder_calibration.csv"], dict(passed=res.passed)


COMMANDS = {
    "generate-initial": _cmd_generate,
    "simulate": _cmd_simulate,
    "verify-colehopf": _cmd_verify_colehopf,
    "verify-fbsde": _cmd_verify_fbsde,
    "study-mollification": _cmd_study_mollification,
    "check-causality": _cmd_check_causality,
    "estimate-holder": _cmd_estimate_holder,
    "noise-stats": _cmd_noise_stats,
    "calibrate-holder": _cmd_calibrate_holder,
}

INPUT_FLAGS = {"verify-fbsde": "traj", "estimate-holder": "field"}


def execute(command, cfg, out_dir, inputs=None):
    """Run ``command`` with a merged config; write outputs and the manifest."""
    inputs = dict(inputs or {})
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    init_file = cfg["initial"].get("file") if cfg["initial"]["kind"] in ("file", "custom") else None
    if init_file and command in ("simulate", "study-mollification", "check-causality",
                                 "generate-initial"):
        inputs["init"] = init_file
    psi = cfg["initial"].get("psi")
    if command == "verify-colehopf" and psi not in C.PSI_NAMES:
        inputs["psi"] = psi
    recorded = {}
    for name, p in inputs.items():
        p = Path(p).resolve()
        target = p / io.MANIFEST_NAME if p.is_dir() else p
        if not target.exists():
            raise ParameterError(f"input {name} not found: {p}")
        recorded[name] = dict(path=str(p), sha256=io.sha256_file(target))
    t0 = time.perf_counter()
    code, files, info = COMMANDS[command](cfg, out, {k: v["path"] for k, v in recorded.items()})
    wall = time.perf_counter() - t0
    manifest = dict(
        tool="burgerslab",
        version=__version__,
        field_format_version=io.FORMAT_VERSION,
        command=command,
        config=cfg,
        config_hash=io.config_hash(cfg),
        seeds=dict(initial=cfg["initial"]["seed"], noise=cfg["noise"]["seed"],
                   mc=cfg["mc"]["seed"]),
        grid=cfg["grid"],
        time=cfg["time"],
        inputs=recorded,
        files=io.inventory(out, files),
        wall_clock_s=wall,
        steps=info.pop("steps", None),
        threads=worker_count(),
        exit_code=code,
        summary=info,
    )
    io.write_manifest(out, manifest)
    return code, manifest


def replay(manifest_path, out_dir):
    """Re-run a manifest's command into ``out_dir``; exit 0 iff every output file matches."""
    man = io.read_manifest(manifest_path)
    for name, rec in man.get("inputs", {}).items():
        p = Path(rec["path"])
        target = p / io.MANIFEST_NAME if p.is_dir() else p
        if io.sha256_file(target) != rec["sha256"]:
            raise ParameterError(f"input {name} changed since the original run: {p}")
    inputs = {k: v["path"] for k, v in man.get("inputs", {}).items()
              if k in ("traj", "field")}
    _, new = execute(man["command"], man["config"], out_dir, inputs)
    diffs = sorted(k for k in set(man["files"]) | set(new["files"])
                   if man["files"].get(k) != new["files"].get(k))
    for k in diffs:
        print(f"mismatch: {k}")
    print(f"replay files={len(new['files'])} mismatches={len(diffs)}")
    return 0 if not diffs else 5


def build_parser():
    p = argparse.ArgumentParser(prog="burgerslab",
                                description="Stochastic viscous Burgers laboratory.")
    p.add_argument("--version", action="version", version=f"burgerslab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", default=f"run-{name}", help="output directory")
        for flag in COMMAND_FLAGS[name]:
            _, typ, hlp = FLAGS[flag]
            sp.add_argument(flag, type=typ, default=None, help=hlp)
        if name in SEED_TARGET:
            sp.add_argument("--seed", type=int, default=None, help="seed for this command")
        if name == "simulate":
            sp.add_argument("--init", help="NPBF initial velocity file")
            sp.add_argument("--no-dealias", action="store_true")
        if name == "verify-colehopf":
            sp.add_argument("--refine", action="store_true",
                            help="also solve at 2n and require an error ratio >= 4")
        if name == "verify-fbsde":
            sp.add_argument("--traj", required=True, help="simulate output directory")
            sp.add_argument("--antithetic", action="store_true")
        if name == "estimate-holder":
            sp.add_argument("--field", required=True, help="NPBF field file")
        if name == "calibrate-holder":
            sp.add_argument("--hursts", help="comma-separated Hurst indices")
    rp = sub.add_parser("replay")
    rp.add_argument("--manifest", required=True)
    rp.add_argument("--out", required=True)
    return p


def _report_error(exc):
    rec = dict(error=type(exc).__name__, exit_code=getattr(exc, "exit_code", 1),
               message=str(exc))
    if isinstance(exc, StepSizeError) and exc.suggested_dt is not None:
        rec["suggested_dt"] = exc.suggested_dt
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)
    return rec["exit_code"]


def main(argv=None):
    ns = build_parser().parse_args(argv)
    try:
        if ns.command == "replay":
            return replay(ns.manifest, ns.out)
        if ns.command == "verify-fbsde":
            base = load_trajectory(ns.traj)[2]
            cfg = C.normalise(C.merge(base, C.merge(
                json.loads(Path(ns.config).read_text()) if ns.config else {},
                _overrides(ns.command, ns))))
        else:
            cfg = effective_config(ns.command, ns.config, _overrides(ns.command, ns))
        inputs = {}
        if ns.command in INPUT_FLAGS:
            inputs[INPUT_FLAGS[ns.command]] = getattr(ns, INPUT_FLAGS[ns.command])
        code, _ = execute(ns.command, cfg, ns.out, inputs)
        return code
    except BurgersLabError as exc:
        return _report_error(exc)
    except (OSError, json.JSONDecodeError) as exc:
        return _report_error(ParameterError(str(exc)))


def entry():
    sys.exit(main())


__all__ = ["COMMANDS", "THREADS_ENV", "build_parser", "effective_config", "execute",
           "load_trajectory", "main", "replay"]
