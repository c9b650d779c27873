"""Exact solutions of the unforced potential Burgers system.

For ``y(0) = grad psi0`` the substitution ``y = -2 nu grad(u) / u`` with
``u(0) = exp(-psi0 / (2 nu))`` turns the system into the heat equation
``u_t = nu Lap u``, which is solved here with the exact Fourier propagator.
No time stepping is involved, so the only errors are spatial truncation and
the final differentiation.

The velocity is taken as the spectral gradient of ``-2 nu log u`` rather than
the pointwise quotient: the two agree to roundoff, but the quotient amplifies
FFT roundoff by ``max u / min u`` and leaves a curl of order 1e-10, while the
gradient of a single potential is curl-free to ~1e-14.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, UnderflowError
from .fields import (
    ScalarField,
    advect_array,
    curl_defect_array,
    fft,
    grad_array,
    ifft,
    laplacian_array,
)
from .solver import Trajectory

UNDERFLOW = 1e-300


@dataclass(frozen=True, eq=False)
class PotentialInit:
    psi0: ScalarField
    nu: float

    def __post_init__(self):
        if not self.nu > 0:
            raise ParameterError(f"viscosity must be positive, got {self.nu}")
        spread = float(np.max(self.psi0.values) - np.min(self.psi0.values))
        if spread / (2 * self.nu) > -np.log(UNDERFLOW):
            raise UnderflowError(
                f"exp(-osc(psi0)/(2 nu)) underflows (osc={spread:g}, nu={self.nu:g}); "
                "use a larger nu or a smaller potential amplitude"
            )


def heat_field(init, t):
    """u(t) for the normalised start ``u(0) = exp(-(psi0 - min psi0) / (2 nu))``."""
    g = init.psi0.grid
    psi = init.psi0.values
    u0 = np.exp(-(psi - np.min(psi)) / (2 * init.nu))
    return ifft(g, np.exp(-init.nu * g.k_squared * t) * fft(g, u0))


def velocity_from_heat(grid, u, nu):
    umin = float(np.min(u))
    if umin < UNDERFLOW:
        raise UnderflowError(f"heat solution min {umin:g} too close to zero")
    return grad_array(grid, -2.0 * nu * np.log(u), "spectral")


def solve_potential(init, times, grid=None):
    """Exact potential trajectory at the requested times.

    ``times`` may be an array of output times or a ``TimeGrid``.
    """
    g = init.psi0.grid
    if grid is not None and grid != g:
        raise ParameterError("grid does not match the potential's grid")
    if hasattr(times, "times"):
        times = times.times()
    times = np.asarray(times, dtype=float)
    ys = np.empty((len(times), g.d) + g.shape)
    sup = np.empty(len(times))
    for s, t in enumerate(times):
        ys[s] = velocity_from_heat(g, heat_field(init, t), init.nu)
        sup[s] = np.max(np.sqrt(np.sum(ys[s] ** 2, axis=0)))
    curl = None
    if g.d >= 2:
        curl = np.array([curl_defect_array(g, y) for y in ys])
    return Trajectory(
        grid=g,
        times=times,
        yhat=ys,
        eta=np.zeros_like(ys),
        y=ys,
        step_times=times,
        sup_y=sup,
        boundary=np.zeros(len(times)),
        curl=curl,
    )


def min_heat(init, t):
    return float(np.min(heat_field(init, t)))


def residual_check(traj, nu):
    """sup-norm of d_t y - nu Lap y + (y, d/dx) y at interior snapshots.

    The time derivative is a centred difference of neighbouring snapshots
    (which must be equally spaced); spatial terms are spectral.  Returns
    ``(times, residuals)`` for snapshots ``1 .. S-2``.
    """
    g = traj.grid
    t = np.asarray(traj.times)
    if len(t) < 3:
        raise ParameterError("residual check needs at least three snapshots")
    dts = np.diff(t)
    if np.max(np.abs(dts - dts[0])) > 1e-9 * max(abs(dts[0]), 1e-300):
        raise ParameterError("snapshots must be equally spaced")
    out = []
    for s in range(1, len(t) - 1):
        y = traj.y[s]
        dydt = (traj.y[s + 1] - traj.y[s - 1]) / (2 * dts[0])
        r = dydt - nu * laplacian_array(g, y) + advect_array(g, y, y)
        out.append(float(np.max(np.abs(r))))
    return t[1:-1], np.array(out)
