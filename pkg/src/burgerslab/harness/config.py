"""Run configuration: a JSON document with fixed sections, defaults and CLI overrides.

Sections are ``grid``, ``time``, ``physics``, ``initial``, ``noise``, ``mc`` and
``study``.  The merged configuration is what a manifest stores, and it is the
only input (besides referenced files) a replay needs.
"""

import copy
import json
import math
from pathlib import Path

import numpy as np

from ..errors import ParameterError
from ..fields import Grid, ScalarField, VectorField
from ..fbsde import McConfig
from ..initial_data import CutoffSpec, make_initial
from ..noise import NoiseSpec, TimeGrid, build_noise, fourier_mode
from ..solver import SolverConfig

SECTIONS = ("grid", "time", "physics", "initial", "noise", "mc", "study")

DEFAULTS = {
    "grid": {"d": 1, "n": 256, "box_length": 2 * math.pi},
    "time": {"T": 1.0, "dt": 1e-3, "snapshot_every": 1},
    "physics": {
        "nu": 0.1,
        "scheme": "imex_cn",
        "spatial": "spectral",
        "dealias": True,
        "cfl_safety": 0.5,
        "strip_cells": 4,
    },
    "initial": {
        "kind": "potential",
        "psi": "cos",
        "amplitude": 1.0,
        "hurst": 0.5,
        "seed": 0,
        "method": "cholesky",
        "cutoff": None,
        "file": None,
    },
    "noise": {"kind": "zero", "seed": 0, "epsilon": None, "modes": None, "cutoff": None},
    "mc": {
        "n_paths": 20000,
        "dt_mc": 2e-3,
        "seed": 0,
        "antithetic": False,
        "block_size": 1000,
        "points": 10,
        "tau_fractions": [0.0, 0.25, 0.5],
        "abs_tol": 5e-3,
    },
    "study": {
        "levels": 4,
        "eps0_cells": 8.0,
        "t_star": None,
        "new_seed": 1,
        "tol": 1e-3,
        "refine": False,
        "seeds": 1000,
        "probes": 5,
        "hursts": [0.3, 0.5, 0.7],
    },
}

NOISE_ALIASES = {"brownian": "brownian_integral", "white": "regularized_white"}


def default_config():
    return copy.deepcopy(DEFAULTS)


def merge(base, override):
    """Recursive dict merge; ``None`` values in ``override`` are ignored."""
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if v is None:
            continue
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path=None, overrides=None):
    cfg = default_config()
    if path:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        unknown = set(doc) - set(SECTIONS)
        if unknown:
            raise ParameterError(f"unknown config sections: {sorted(unknown)}")
        cfg = merge(cfg, doc)
    cfg = merge(cfg, overrides)
    return normalise(cfg)


def normalise(cfg):
    """Canonical spellings, absolute file paths and JSON-plain numbers."""
    cfg = copy.deepcopy(cfg)
    nz = cfg["noise"]
    nz["kind"] = NOISE_ALIASES.get(nz["kind"], nz["kind"])
    for sec, key in (("initial", "file"), ("initial", "psi")):
        v = cfg[sec].get(key)
        if isinstance(v, str) and v not in PSI_NAMES:
            cfg[sec][key] = str(Path(v).resolve())
    return json.loads(json.dumps(cfg))


def build_grid(cfg):
    g = cfg["grid"]
    return Grid(int(g["d"]), int(g["n"]), float(g["box_length"]))


def build_time(cfg):
    t = cfg["time"]
    return TimeGrid.from_dt(float(t["T"]), float(t["dt"]))


def build_solver_config(cfg):
    p = cfg["physics"]
    return SolverConfig(
        nu=float(p["nu"]),
        dt=float(cfg["time"]["dt"]),
        scheme=p["scheme"],
        spatial=p["spatial"],
        dealias=bool(p["dealias"]),
        cfl_safety=float(p["cfl_safety"]),
        snapshot_every=int(cfg["time"]["snapshot_every"]),
        strip_cells=int(p["strip_cells"]),
    )


def build_cutoff(grid, spec):
    """CutoffSpec from ``{"r_inner", "r_outer", "center"}``; radii default to 0.1 L, 0.25 L."""
    spec = spec or {}
    L = grid.box_length
    center = spec.get("center") or [L / 2] * grid.d
    return CutoffSpec(float(spec.get("r_inner", 0.1 * L)), float(spec.get("r_outer", 0.25 * L)),
                      tuple(center))


PSI_NAMES = ("zero", "cos", "sin")


def named_potential(grid, name, amplitude=1.0):
    """Analytic potentials: ``cos`` is prod_i cos(2 pi x_i / L), ``sin`` is sum_i sin(2 pi x_i / L)."""
    m = grid.mesh()
    k = 2 * np.pi / grid.box_length
    if name == "zero":
        v = np.zeros(grid.shape)
    elif name == "cos":
        v = np.ones(grid.shape)
        for x in m:
            v = v * np.cos(k * x)
    elif name == "sin":
        v = sum(np.sin(k * x) for x in m)
    else:
        raise ParameterError(f"unknown named potential {name!r}; expected one of {PSI_NAMES}")
    return ScalarField(grid, amplitude * v)


def load_potential(grid, psi, amplitude=1.0):
    from .io import read_field

    if psi in PSI_NAMES:
        return named_potential(grid, psi, amplitude)
    f = read_field(psi)
    if not isinstance(f, ScalarField) or f.grid != grid:
        raise ParameterError(f"{psi} does not hold a scalar field on {grid}")
    return ScalarField(grid, amplitude * f.values)


def rotational_field(grid, amplitude=1.0):
    """Smooth non-potential d=2 field (sin x2 + cos x1 / 2, -sin x1 + sin x2 / 2); curl 2 sup."""
    if grid.d != 2:
        raise ParameterError("the rotational initial field is defined for d=2 only")
    k = 2 * np.pi / grid.box_length
    x1, x2 = grid.mesh()
    c = np.array([np.sin(k * x2) + 0.5 * np.cos(k * x1), -np.sin(k * x1) + 0.5 * np.sin(k * x2)])
    return VectorField(grid, amplitude * c)


def build_initial(cfg, grid):
    """Initial velocity phi for the ``initial`` section."""
    from .io import read_field

    ini = cfg["initial"]
    kind = ini["kind"]
    if kind in ("fbs", "fbs_cutoff"):
        return make_initial(grid, "fbs_cutoff", dict(
            hurst=float(ini["hurst"]), seed=int(ini["seed"]), method=ini["method"],
            cutoff=build_cutoff(grid, ini.get("cutoff"))))
    if kind == "potential":
        return make_initial(grid, "potential",
                            dict(psi=load_potential(grid, ini["psi"], float(ini["amplitude"]))))
    if kind == "rotational":
        return rotational_field(grid, float(ini["amplitude"]))
    if kind == "constant":
        c = np.broadcast_to(np.asarray(ini.get("value", 0.0), dtype=float), (grid.d,))
        return VectorField(grid, c.reshape((grid.d,) + (1,) * grid.d) * np.ones((grid.d,) + grid.shape))
    if kind in ("file", "custom"):
        if not ini.get("file"):
            raise ParameterError("initial kind 'file' needs initial.file")
        f = read_field(ini["file"])
        if grid.d == 1 and isinstance(f, ScalarField):
            # one component: the file format cannot tell scalar from vector
            f = VectorField(f.grid, f.values[None])
        if not isinstance(f, VectorField) or f.grid != grid:
            raise ParameterError(f"{ini['file']} does not hold a vector field on {grid}")
        return f
    raise ParameterError(f"unknown initial kind {kind!r}")


def default_modes(grid):
    """Two smooth modes spanning all velocity directions (d >= 2) or one (d = 1)."""
    e = np.eye(grid.d)
    if grid.d == 1:
        return [dict(wavevector=[1.0], direction=[1.0], phase=0.0, scale=1.0, omega=0.0)]
    return [
        dict(wavevector=list(e[0]), direction=list(e[1]), phase=0.0, scale=1.0, omega=0.0),
        dict(wavevector=list(e[-1]), direction=list(e[0]), phase=0.5, scale=1.0, omega=1.0),
    ]


def build_noise_spec(cfg, grid):
    nz = cfg["noise"]
    kind = NOISE_ALIASES.get(nz["kind"], nz["kind"])
    if kind == "zero":
        return NoiseSpec("zero", seed=int(nz["seed"]))
    cutoff = build_cutoff(grid, nz.get("cutoff"))
    scheme = "central2" if cfg["physics"]["scheme"] == "ssp_fd" else cfg["physics"]["spatial"]
    if kind == "brownian_integral":
        modes = [fourier_mode(grid, **m) for m in (nz.get("modes") or default_modes(grid))]
        return NoiseSpec(kind, modes=modes, cutoff=cutoff, seed=int(nz["seed"]), scheme=scheme)
    eps = nz.get("epsilon")
    eps = 4 * grid.spacing if eps is None else float(eps)
    return NoiseSpec(kind, epsilon=eps, cutoff=cutoff, seed=int(nz["seed"]), scheme=scheme)


def build_noise_path(cfg, grid, tgrid=None):
    tgrid = tgrid or build_time(cfg)
    return build_noise(grid, tgrid, build_noise_spec(cfg, grid))


def build_mc(cfg, workers=None):
    m = cfg["mc"]
    return McConfig(
        n_paths=int(m["n_paths"]),
        dt_mc=float(m["dt_mc"]),
        seed=int(m["seed"]),
        antithetic=bool(m["antithetic"]),
        block_size=int(m["block_size"]),
        workers=workers,
    )
