"""Time integration of the stochastic viscous Burgers system.

Writing ``y = yhat + eta`` in

    y(t) = phi + int_0^t [nu Lap y - (y, d/dx) y] ds + eta(t)

and cancelling the noise gives, for the smooth-in-time unknown ``yhat``,

    d/dt yhat = nu Lap yhat - (yhat + eta, d/dx) yhat + f(t, x, yhat),
    f = nu Lap eta - (eta, d/dx) eta - (yhat, d/dx) eta,

with ``yhat(0) = phi``.  Every scheme here integrates that equation and
returns ``y = yhat + eta`` alongside it.

Schemes
-------
``imex_cn``
    Crank-Nicolson diffusion, Heun predictor-corrector for transport and
    forcing (second order).
``etd``
    Exact integrating-factor diffusion, Heun for the rest (second order).
``ssp_fd``
    Fully explicit strong-stability-preserving Heun with centred differences.
    Under ``2 d nu dt <= h^2`` and ``|v| h <= 2 nu`` each stage is a convex
    combination of neighbouring velocity vectors, so ``max |y|`` cannot grow.
    This is the scheme for rough (unmollified) data, where spectral
    diffusion produces Gibbs overshoots.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ParameterError, StepSizeError
from .fields import (
    VectorField,
    curl_defect_array,
    fft,
    grad_array,
    ifft,
    laplacian_array,
)

SCHEMES = ("imex_cn", "etd", "ssp_fd")


@dataclass(frozen=True)
class SolverConfig:
    nu: float
    dt: float
    scheme: str = "imex_cn"
    spatial: str = "spectral"
    dealias: bool = True
    cfl_safety: float = 0.5
    snapshot_every: int = 1
    nonlinear: bool = True
    strip_cells: int = 4

    def __post_init__(self):
        if not self.nu > 0:
            raise ParameterError(f"viscosity must be positive, got {self.nu}")
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.scheme not in SCHEMES:
            raise ParameterError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.spatial not in ("spectral", "central2"):
            raise ParameterError(f"unknown spatial discretisation {self.spatial!r}")
        if not (0 < self.cfl_safety <= 1):
            raise ParameterError("cfl_safety must lie in (0, 1]")
        if int(self.snapshot_every) < 1:
            raise ParameterError("snapshot_every must be >= 1")

    @property
    def derivative_scheme(self):
        return "central2" if self.scheme == "ssp_fd" else self.spatial


@dataclass
class Trajectory:
    """Snapshots of ``yhat`` and ``y = yhat + eta`` plus per-step diagnostics.

    ``y[s]`` is computed as the floating-point sum ``yhat[s] + eta[s]``.
    """

    grid: object
    times: np.ndarray
    yhat: np.ndarray
    eta: np.ndarray
    y: np.ndarray
    step_times: np.ndarray
    sup_y: np.ndarray
    boundary: np.ndarray
    energy: np.ndarray = None
    curl: np.ndarray = None
    growth_constant: np.ndarray = None
    warnings: list = field(default_factory=list)
    config: SolverConfig = None

    @property
    def n_snapshots(self):
        return len(self.times)

    def snapshot(self, s):
        return VectorField(self.grid, self.y[s])

    def yhat_snapshot(self, s):
        return VectorField(self.grid, self.yhat[s])


def _forcing_array(grid, calc, yh, nu, scheme, nonlinear=True):
    f = nu * calc.lap
    if nonlinear:
        f = f - np.einsum("j...,ij...->i...", calc.eta, calc.grad)
        f = f - np.einsum("j...,ij...->i...", yh, calc.grad)
    return f


def forcing_f(eta_calc, yhat, nu, scheme="spectral"):
    """Forcing of the transformed equation: nu Lap eta - (eta, d/dx) eta - (yhat, d/dx) eta.

    ``eta_calc`` is the ``(eta, grad eta, Lap eta)`` triple of
    :func:`burgerslab.noise.eta_calculus`.
    """
    eta = np.asarray(eta_calc[0])
    if eta.shape != yhat.components.shape:
        raise ParameterError("noise and velocity live on different grids")
    return VectorField(yhat.grid, _forcing_array(yhat.grid, eta_calc, yhat.components, nu, scheme))


class _Stepper:
    """Precomputed symbols and the explicit right-hand side for one config."""

    def __init__(self, grid, path, config):
        self.grid = grid
        self.path = path
        self.cfg = config
        self.dscheme = config.derivative_scheme
        dt, nu = config.dt, config.nu
        sym = grid.symbol_laplacian(self.dscheme, nyquist=True)
        if config.scheme == "imex_cn":
            self.A = 1.0 - 0.5 * dt * nu * sym
            self.B = 1.0 + 0.5 * dt * nu * sym
        elif config.scheme == "etd":
            self.E = np.exp(dt * nu * sym)
        self.mask = None
        if config.dealias and self.dscheme == "spectral":
            self.mask = grid.dealias_mask

    def rhs(self, yh, k):
        """Explicit terms -(yhat + eta, d/dx) yhat + f, in physical space."""
        g = self.grid
        calc = self.path.calculus(k, self.dscheme)
        f = _forcing_array(g, calc, yh, self.cfg.nu, self.dscheme, self.cfg.nonlinear)
        if not self.cfg.nonlinear:
            return f
        v = yh + calc.eta
        G = grad_array(g, yh, self.dscheme)
        return f - np.einsum("j...,ij...->i...", v, G)

    def rhs_hat(self, yh, k):
        r = fft(self.grid, self.rhs(yh, k))
        if self.mask is not None:
            r = np.where(self.mask, r, 0.0)
        return r

    def check_cfl(self, yh, k):
        g = self.grid
        v = yh + self.path.field(k)
        vmax = float(np.max(np.sqrt(np.sum(v**2, axis=0))))
        h = g.spacing
        limit = self.cfg.cfl_safety * h / max(1.0, vmax)
        if self.cfg.scheme == "ssp_fd":
            limit = min(limit, h * h / (2 * g.d * self.cfg.nu))
        if self.cfg.dt > limit * (1 + 1e-12):
            raise StepSizeError(
                f"dt={self.cfg.dt:g} violates the stability limit {limit:g} at step {k}",
                suggested_dt=limit,
            )
        return vmax

    def step(self, yh, k):
        dt = self.cfg.dt
        g = self.grid
        if self.cfg.scheme == "ssp_fd":
            nu = self.cfg.nu
            s = self.dscheme
            y1 = yh + dt * (nu * laplacian_array(g, yh, s) + self.rhs(yh, k))
            y2 = y1 + dt * (nu * laplacian_array(g, y1, s) + self.rhs(y1, k + 1))
            return 0.5 * yh + 0.5 * y2
        Yh = fft(g, yh)
        N0 = self.rhs_hat(yh, k)
        if self.cfg.scheme == "imex_cn":
            BY = self.B * Yh
            ystar = ifft(g, (BY + dt * N0) / self.A)
            N1 = self.rhs_hat(ystar, k + 1)
            return ifft(g, (BY + 0.5 * dt * (N0 + N1)) / self.A)
        EY = self.E * Yh
        EN0 = self.E * N0
        ystar = ifft(g, EY + dt * EN0)
        N1 = self.rhs_hat(ystar, k + 1)
        return ifft(g, EY + 0.5 * dt * (EN0 + N1))


def step(yhat, eta_path, k, config):
    """Advance ``yhat`` from time node ``k`` to ``k + 1``."""
    stepper = _Stepper(yhat.grid, eta_path, config)
    stepper.check_cfl(yhat.components, k)
    out = stepper.step(np.array(yhat.components), k)
    if not np.all(np.isfinite(out)):
        raise DivergenceError(f"non-finite state after step {k}")
    return VectorField(yhat.grid, out)


def _strip_mask(grid, cells):
    m = np.zeros(grid.shape, dtype=bool)
    for a in range(grid.d):
        idx = [slice(None)] * grid.d
        idx[a] = np.r_[0:cells, grid.n - cells : grid.n]
        m[tuple(idx)] = True
    return m


def solve(phi, eta_path, config):
    """Integrate from ``yhat(0) = phi`` over the noise path's time grid."""
    grid = phi.grid
    if eta_path.grid != grid:
        raise ParameterError("initial data and noise live on different grids")
    tg = eta_path.time_grid
    if abs(tg.dt - config.dt) > 1e-12 * tg.dt:
        raise ParameterError(f"solver dt={config.dt} differs from noise dt={tg.dt}")
    stepper = _Stepper(grid, eta_path, config)
    strip = _strip_mask(grid, config.strip_cells)
    times = tg.times()
    nsteps = tg.n_steps
    snap_idx = sorted(set(range(0, nsteps + 1, config.snapshot_every)) | {nsteps})
    S = len(snap_idx)
    shape = (S, grid.d) + grid.shape
    yhat_s = np.empty(shape)
    eta_s = np.empty(shape)
    y_s = np.empty(shape)
    sup_y = np.empty(nsteps + 1)
    boundary = np.empty(nsteps + 1)
    energy = np.empty(nsteps + 1) if grid.d == 1 else None
    curl = np.empty(S) if grid.d >= 2 else None
    growth = np.empty(S)
    warnings = []
    dvol = grid.spacing**grid.d
    dscheme = config.derivative_scheme

    yh = np.array(phi.components)
    s = 0
    peclet_warned = False
    for k in range(nsteps + 1):
        eta_k = eta_path.field(k)
        y = yh + eta_k
        mag = np.sqrt(np.sum(y**2, axis=0))
        sup_y[k] = np.max(mag)
        boundary[k] = np.max(mag[strip])
        if energy is not None:
            energy[k] = float(np.sum(y**2)) * dvol
        if k == snap_idx[s]:
            yhat_s[s] = yh
            eta_s[s] = eta_k
            y_s[s] = y
            if curl is not None:
                curl[s] = curl_defect_array(grid, y, dscheme)
            calc = eta_path.calculus(k, dscheme)
            f = _forcing_array(grid, calc, yh, config.nu, dscheme)
            growth[s] = float(np.max(np.sum(f * yh, axis=0) / (1.0 + np.sum(yh**2, axis=0))))
            s += 1
        if k == nsteps:
            break
        vmax = stepper.check_cfl(yh, k)
        if config.scheme == "ssp_fd" and not peclet_warned and vmax * grid.spacing > 2 * config.nu:
            warnings.append(
                f"cell Peclet number {vmax * grid.spacing / (2 * config.nu):.3g} > 1 at step {k}; "
                "discrete maximum principle not guaranteed"
            )
            peclet_warned = True
        yh = stepper.step(yh, k)
        if not np.all(np.isfinite(yh)):
            raise DivergenceError(f"non-finite state after step {k}")

    bmax = float(np.max(boundary))
    if bmax > 1e-4:
        warnings.append(f"boundary-strip activity {bmax:.3g} exceeds 1e-4; truncation may matter")
    return Trajectory(
        grid=grid,
        times=times[snap_idx],
        yhat=yhat_s,
        eta=eta_s,
        y=y_s,
        step_times=times,
        sup_y=sup_y,
        boundary=boundary,
        energy=energy,
        curl=curl,
        growth_constant=growth,
        warnings=warnings,
        config=config,
    )


def max_norm_series(traj):
    """(times, sup_x |y(t_k, x)|) at every time node of the run."""
    return traj.step_times, traj.sup_y
