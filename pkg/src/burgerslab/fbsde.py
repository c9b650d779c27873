"""Monte Carlo check of a computed solution through its FBSDE representation.

Reverse time, ``ybar(t, x) = yhat(T - t, x)``.  Along the forward diffusion

    dX_s = -(ybar + etabar)(s, X_s) ds + sqrt(2 nu) dW_s,    X_tau = x,

Ito's formula turns the transformed equation into the backward identity
``Y_s = ybar(s, X_s)`` with driver ``fbar``.  Taking expectations at
``s = tau`` removes the martingale part and leaves the testable relation

    ybar(tau, x) = E[ phi(X_T) + int_tau^T fbar(s, X_s, ybar(s, X_s)) ds ].

Paths are simulated with Euler-Maruyama; drift fields are interpolated
multilinearly in space and linearly in time between snapshots.

Randomness is organised in fixed blocks of paths, one counter-based stream
per ``(seed, query point, block)``, and block sums are reduced in block order.
Results therefore do not depend on how many worker threads run the blocks.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import ParameterError
from .fields import interp_array
from .solver import _forcing_array, _strip_mask

THREADS_ENV = "BURGERSLAB_THREADS"


def worker_count(workers=None):
    if workers is not None:
        return max(1, int(workers))
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 20000
    dt_mc: float = 2e-3
    seed: int = 0
    antithetic: bool = False
    block_size: int = 1000
    workers: int = None

    def __post_init__(self):
        if self.n_paths < 100:
            raise ParameterError("need at least 100 Monte Carlo paths")
        if not self.dt_mc > 0:
            raise ParameterError("dt_mc must be positive")
        if self.block_size < 2 or self.block_size % 2:
            raise ParameterError("block_size must be an even integer >= 2")
        if self.antithetic and self.n_paths % 2:
            raise ParameterError("antithetic sampling needs an even path count")

    def blocks(self):
        sizes = []
        left = self.n_paths
        while left > 0:
            sizes.append(min(self.block_size, left))
            left -= sizes[-1]
        return sizes


@dataclass
class McRow:
    tau: float
    x: np.ndarray
    estimate: np.ndarray
    solver_value: np.ndarray
    residual: np.ndarray
    stderr: np.ndarray
    n_paths: int
    escaped: int
    inconclusive: bool

    def passes(self, abs_tol, n_sigma=3.0):
        return bool(np.all(self.residual <= n_sigma * self.stderr + abs_tol))


@dataclass
class McVerifyReport:
    rows: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def passes(self, abs_tol, n_sigma=3.0):
        return all(r.passes(abs_tol, n_sigma) for r in self.rows)

    def table(self):
        """Flat rows for CSV output (one line per query point)."""
        out = []
        for r in self.rows:
            d = len(r.x)
            row = {"tau": r.tau}
            row.update({f"x{i + 1}": float(r.x[i]) for i in range(d)})
            for name in ("estimate", "solver_value", "residual", "stderr"):
                row.update({f"{name}{i + 1}": float(getattr(r, name)[i]) for i in range(d)})
            row.update(n_paths=r.n_paths, escaped=r.escaped, inconclusive=int(r.inconclusive))
            out.append(row)
        return out


class _ReversedFields:
    """Solution and forcing at arbitrary physical times, for reversed-time queries.

    Forward time ``s`` corresponds to physical time ``T - s``.  Fields are
    linear in time between snapshots and cached per physical time.
    """

    def __init__(self, traj, eta_path, dt_mc):
        ts = np.asarray(traj.times, dtype=float)
        if len(ts) < 2:
            raise ParameterError("trajectory needs at least two snapshots")
        if np.max(np.diff(ts)) > 4 * dt_mc * (1 + 1e-9):
            raise ParameterError("snapshots too sparse: spacing must be <= 4 dt_mc")
        self.T = float(ts[-1])
        self.dt = dt_mc
        self.times = ts
        grid = traj.grid
        self.grid = grid
        cfg = traj.config
        nu = cfg.nu if cfg is not None else None
        scheme = cfg.derivative_scheme if cfg is not None else "spectral"
        self.noisy = not eta_path.is_zero
        if self.noisy and nu is None:
            raise ParameterError("trajectory lacks a solver config (needed for the forcing)")
        self.forcing = None
        if self.noisy:
            tg = eta_path.time_grid
            self.forcing = np.empty_like(traj.yhat)
            for k, t in enumerate(ts):
                calc = eta_path.calculus(tg.index_of(t), scheme)
                self.forcing[k] = _forcing_array(grid, calc, traj.yhat[k], nu, scheme)
        self.y = traj.y
        self.solution = traj.yhat
        self.phi = traj.yhat[0]
        self.phi_sup = float(np.max(np.sqrt(np.sum(self.phi**2, axis=0))))
        self.strip = _strip_mask(grid, cfg.strip_cells if cfg else 4)
        self._cache = {}

    def _bracket(self, p):
        ts = self.times
        k = int(np.clip(np.searchsorted(ts, p, side="right") - 1, 0, len(ts) - 2))
        w = min(max((p - ts[k]) / (ts[k + 1] - ts[k]), 0.0), 1.0)
        return k, w

    def at(self, p):
        """(velocity y, forcing f or None) at physical time ``p``."""
        key = round(p, 12)
        if key not in self._cache:
            k, w = self._bracket(p)
            vel = (1 - w) * self.y[k] + w * self.y[k + 1]
            f = None
            if self.noisy:
                f = (1 - w) * self.forcing[k] + w * self.forcing[k + 1]
            self._cache[key] = (vel, f)
        return self._cache[key]

    def solver_value(self, tau, x):
        """ybar(tau, x) = yhat(T - tau, x), linearly interpolated between snapshots."""
        k, w = self._bracket(self.T - tau)
        a = interp_array(self.grid, self.solution[k], x)[:, 0]
        b = interp_array(self.grid, self.solution[k + 1], x)[:, 0]
        return (1 - w) * a + w * b

    def schedule(self, tau):
        """Forward times tau, tau + dt, ..., T (the last step may be shorter)."""
        n = int(math.ceil((self.T - tau) / self.dt - 1e-9))
        s = tau + self.dt * np.arange(n + 1)
        s[-1] = self.T
        return s


@dataclass
class PathEnsemble:
    times: np.ndarray
    terminal: np.ndarray
    integral: np.ndarray
    escaped: np.ndarray
    positions: np.ndarray = None


def euler_maruyama(drift, x0, times, nu, normals_fn, integrand=None, keep=False):
    """Euler-Maruyama for dX = drift(s, X) ds + sqrt(2 nu) dW on the given times.

    ``drift(j, X)`` and ``integrand(j, X)`` are evaluated at the left end of
    step ``j``; ``normals_fn(j)`` returns its ``(M, d)`` standard normals.
    Returns ``(X_T, int integrand ds, positions or None)``.
    """
    X = np.array(x0, dtype=float)
    acc = 0.0
    pos = [X.copy()] if keep else None
    for j in range(len(times) - 1):
        dt = times[j + 1] - times[j]
        if integrand is not None:
            acc = acc + dt * integrand(j, X)
        X = X + dt * drift(j, X) + math.sqrt(2.0 * nu * dt) * normals_fn(j)
        if keep:
            pos.append(X.copy())
    return X, acc, (np.array(pos) if keep else None)


def _point_label(tau, x):
    return "pt:" + ",".join(repr(float(v)) for v in (tau, *np.atleast_1d(x)))


def _simulate_block(fields, nu, tau, x, mc, b, size, label, keep=False):
    d = fields.grid.d
    times = fields.schedule(tau)
    phys = fields.T - times
    gen = rng.stream(mc.seed, "fbsde", label, b)
    half = size // 2 if mc.antithetic else size

    def normals(j):
        z = gen.standard_normal((half, d))
        return np.concatenate([z, -z]) if mc.antithetic else z

    L = fields.grid.box_length
    h = fields.grid.spacing
    n = fields.grid.n
    esc = np.zeros(size, dtype=bool)

    def drift(j, X):
        nonlocal esc
        idx = np.floor(np.mod(X, L) / h).astype(np.int64) % n
        esc |= fields.strip[tuple(idx.T)]
        return -interp_array(fields.grid, fields.at(phys[j])[0], X).T

    integrand = None
    if fields.noisy:

        def integrand(j, X):
            return interp_array(fields.grid, fields.at(phys[j])[1], X).T

    x0 = np.broadcast_to(np.asarray(x, dtype=float), (size, d))
    XT, integral, pos = euler_maruyama(drift, x0, times, nu, normals, integrand, keep)
    return XT, integral + np.zeros((size, d)), esc, pos


def simulate_forward(traj, eta_path, tau, x, mc, keep_paths=False, _fields=None):
    """Simulate the forward diffusion from ``(tau, x)`` to ``T`` for all paths."""
    fields = _fields or _ReversedFields(traj, eta_path, mc.dt_mc)
    _check_tau(fields, tau)
    nu = traj.config.nu
    label = _point_label(tau, x)
    parts = []
    for b, size in enumerate(mc.blocks()):
        parts.append(_simulate_block(fields, nu, tau, x, mc, b, size, label, keep_paths))
    return PathEnsemble(
        times=fields.schedule(tau),
        terminal=np.concatenate([p[0] for p in parts]),
        integral=np.concatenate([p[1] for p in parts]),
        escaped=np.concatenate([p[2] for p in parts]),
        positions=np.concatenate([p[3] for p in parts], axis=1) if keep_paths else None,
    )


def _check_tau(fields, tau):
    if not (0.0 <= tau < fields.T):
        raise ParameterError(f"tau={tau} outside [0, T)")
    if fields.T - tau < 2 * fields.dt:
        raise ParameterError("query too close to T: need T - tau >= 2 dt_mc")


def _block_stats(fields, nu, tau, x, mc, b, size, label):
    XT, integral, esc, _ = _simulate_block(fields, nu, tau, x, mc, b, size, label)
    vals = interp_array(fields.grid, fields.phi, XT).T + integral  # (size, d)
    if mc.antithetic:
        half = size // 2
        vals = 0.5 * (vals[:half] + vals[half:])
    return np.sum(vals, axis=0), np.sum(vals**2, axis=0), vals.shape[0], int(np.sum(esc))


def verify_point(traj, eta_path, tau, x, mc, _fields=None):
    """Compare ybar(tau, x) with its Monte Carlo representation; one report row."""
    fields = _fields or _ReversedFields(traj, eta_path, mc.dt_mc)
    _check_tau(fields, tau)
    nu = traj.config.nu
    x = np.asarray(x, dtype=float)
    label = _point_label(tau, x)
    sizes = mc.blocks()
    jobs = list(enumerate(sizes))
    workers = worker_count(mc.workers)

    def run(job):
        b, size = job
        return _block_stats(fields, nu, tau, x, mc, b, size, label)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            stats = list(ex.map(run, jobs))
    else:
        stats = [run(j) for j in jobs]
    # fixed block-order reduction
    s1 = np.zeros(len(x))
    s2 = np.zeros(len(x))
    count = 0
    escaped = 0
    for a, b2, c, e in stats:
        s1 = s1 + a
        s2 = s2 + b2
        count += c
        escaped += e
    mean = s1 / count
    var = np.maximum(s2 / count - mean**2, 0.0) * count / max(count - 1, 1)
    stderr = np.sqrt(var / count)
    value = fields.solver_value(tau, x)
    return McRow(
        tau=float(tau),
        x=x,
        estimate=mean,
        solver_value=value,
        residual=np.abs(mean - value),
        stderr=stderr,
        n_paths=mc.n_paths,
        escaped=escaped,
        inconclusive=bool(np.max(stderr) > 0.5 * fields.phi_sup),
    )


def verify(traj, eta_path, queries, mc):
    """Run :func:`verify_point` at every ``(tau, x)`` in ``queries``."""
    fields = _ReversedFields(traj, eta_path, mc.dt_mc)
    report = McVerifyReport()
    for tau, x in queries:
        report.rows.append(verify_point(traj, eta_path, tau, x, mc, _fields=fields))
    report.notes = {
        "identity": "ybar(tau,x) = E[phi(X_T) + int_tau^T fbar ds], drift -(ybar + etabar)",
        "tolerance": "residual <= 3 stderr + abs_tol; abs_tol covers the O(dt_mc) weak "
        "Euler-Maruyama error, O(h^2) multilinear interpolation bias of phi and the drift, "
        "and the solver's own discretisation error",
        "n_paths": mc.n_paths,
        "dt_mc": mc.dt_mc,
        "antithetic": mc.antithetic,
    }
    return report


@dataclass
class BoundVerdict:
    passed: bool
    observed: float
    bound: float
    kind: str
    data: dict = field(default_factory=dict)


def gronwall_envelope(phi_sup, eta_path, nu, scheme="spectral"):
    """Explicit bound for sup |yhat| from the Ito energy inequality.

    With S = sup |nu Lap eta - (eta, d/dx) eta|, G = sup |d/dx eta| (Frobenius)
    and A = sup |phi|^2, Gronwall gives

        sup |yhat|^2 <= (A + T S^2) exp((1 + 2 G) T).
    """
    T = eta_path.time_grid.T
    S = 0.0
    G = 0.0
    for k in range(eta_path.time_grid.n_steps + 1):
        c = eta_path.calculus(k, scheme)
        r = nu * c.lap - np.einsum("j...,ij...->i...", c.eta, c.grad)
        S = max(S, float(np.max(np.sqrt(np.sum(r**2, axis=0)))))
        G = max(G, float(np.max(np.sqrt(np.sum(c.grad**2, axis=(0, 1))))))
    return math.sqrt((phi_sup**2 + T * S**2) * math.exp((1 + 2 * G) * T))


def uniform_bound_check(family, eta_paths=None, rtol=1e-6):
    """Uniform-in-m bound over a family of trajectories ``y_m``.

    Without noise the verdict is ``max_m sup |y_m| <= (1 + rtol) max_m sup |phi_m|``.
    With noise, ``max_m sup |yhat_m|`` is compared with the largest Gronwall
    envelope over the family.
    """
    if len(family) < 3:
        raise ParameterError("uniform bound check needs at least three family members")
    sup_y = [float(np.max(t.sup_y)) for t in family]
    sup_phi = [
        float(np.max(np.sqrt(np.sum(t.yhat[0] ** 2, axis=0)))) for t in family
    ]
    if eta_paths is None or all(p.is_zero for p in eta_paths):
        observed = max(sup_y)
        bound = (1 + rtol) * max(sup_phi)
        return BoundVerdict(observed <= bound, observed, bound, "max-norm",
                            {"sup_y": sup_y, "sup_phi": sup_phi})
    env = []
    sup_yhat = []
    for t, p, sp in zip(family, eta_paths, sup_phi):
        scheme = t.config.derivative_scheme if t.config else "spectral"
        env.append(gronwall_envelope(sp, p, t.config.nu, scheme))
        sup_yhat.append(float(np.max(np.sqrt(np.sum(t.yhat**2, axis=1)))))
    observed = max(sup_yhat)
    bound = max(env)
    return BoundVerdict(observed <= bound, observed, bound, "gronwall",
                        {"sup_yhat": sup_yhat, "envelope": env, "sup_phi": sup_phi})
