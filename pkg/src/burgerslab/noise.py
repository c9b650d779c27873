"""The forcing process eta(t, x).

Three kinds are supported:

``zero``
    eta == 0, the adhesion-model case.
``brownian_integral``
    eta(t, x) = sum_i G_i(x) zeta(x) int_0^t a_i(s) dB^i_s with independent
    scalar Brownian motions B^i, left-point (Ito) sums on the time grid.
``regularized_white``
    increments zeta(x) (xi_k * rho_eps)(x) sqrt(dt) with xi_k lattice white
    noise (variance h^-d per node, one field per velocity component).

Every increment ``k`` (over ``[t_k, t_{k+1}]``) is drawn from its own
counter-based stream, keyed by the seed in force at index ``k``.  A path is a
list of ``(start_index, seed)`` segments, which is what lets
:func:`reseed_suffix` replace the future while leaving the past bit-identical.
"""

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import rng
from .errors import ParameterError
from .fields import VectorField, grad_array, laplacian_array
from .initial_data import CutoffSpec, bump_kernel, convolve_kernel, cutting_function

KINDS = ("zero", "brownian_integral", "regularized_white")


@dataclass(frozen=True)
class TimeGrid:
    T: float
    n_steps: int

    def __post_init__(self):
        if not (self.T > 0 and np.isfinite(self.T)):
            raise ParameterError(f"horizon T must be positive, got {self.T}")
        if int(self.n_steps) < 1:
            raise ParameterError("n_steps must be >= 1")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_dt(cls, T, dt):
        n = int(round(T / dt))
        if n < 1 or abs(n * dt - T) > 1e-9 * T:
            raise ParameterError(f"T={T} is not an integer multiple of dt={dt}")
        return cls(T, n)

    @property
    def dt(self):
        return self.T / self.n_steps

    def times(self):
        return np.linspace(0.0, self.T, self.n_steps + 1)

    def index_of(self, t):
        k = int(round(t / self.dt))
        if k < 0 or k > self.n_steps or abs(k * self.dt - t) > 1e-9 * self.T:
            raise ParameterError(f"time {t} is not a node of the time grid")
        return k


def _unit(t):
    return 1.0


@dataclass(frozen=True, eq=False)
class NoiseMode:
    """One term g_i(t, x) = a_i(t) G_i(x) of the stochastic-integral noise."""

    profile: VectorField
    amplitude: Callable[[float], float] = _unit
    description: dict = field(default_factory=dict)


def fourier_mode(grid, wavevector, direction, phase=0.0, scale=1.0, omega=0.0):
    """Mode with profile ``scale * direction * cos(k.x + phase)`` and a(t) = cos(omega t)."""
    k = np.asarray(wavevector, dtype=float) * 2 * np.pi / grid.box_length
    e = np.asarray(direction, dtype=float)
    if k.size != grid.d or e.size != grid.d:
        raise ParameterError(f"wavevector and direction need {grid.d} entries")
    arg = sum(ki * xi for ki, xi in zip(k, grid.mesh())) + phase
    prof = VectorField(grid, scale * e[:, None] * np.cos(arg).ravel()[None, :])
    omega = float(omega)
    amp = _unit if omega == 0.0 else (lambda t: float(np.cos(omega * t)))
    desc = dict(
        wavevector=[float(v) for v in np.atleast_1d(wavevector)],
        direction=[float(v) for v in e],
        phase=float(phase),
        scale=float(scale),
        omega=omega,
    )
    return NoiseMode(prof, amp, desc)


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    kind: str = "zero"
    modes: tuple = ()
    epsilon: float = 0.0
    cutoff: CutoffSpec = None
    seed: int = 0
    scheme: str = "spectral"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown noise kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "modes", tuple(self.modes))
        if self.kind == "brownian_integral" and len(self.modes) < 1:
            raise ParameterError("brownian_integral noise needs at least one mode")
        if self.kind != "zero" and self.cutoff is None:
            raise ParameterError(f"{self.kind} noise needs a cutoff")
        if not (0 <= int(self.seed) < 2**64):
            raise ParameterError("seed must be an unsigned 64-bit integer")

    def validate(self, grid):
        if self.kind == "zero":
            return
        self.cutoff.validate(grid)
        if self.kind == "regularized_white" and self.epsilon < 2 * grid.spacing:
            raise ParameterError(f"epsilon={self.epsilon} below 2h={2 * grid.spacing}")
        for m in self.modes:
            if m.profile.grid != grid:
                raise ParameterError("noise mode profile lives on a different grid")


class EtaCalculus(NamedTuple):
    """eta, its Jacobian ``grad[i, j] = d_j eta_i`` and its Laplacian at one time node."""

    eta: np.ndarray
    grad: np.ndarray
    lap: np.ndarray


class NoisePath:
    """Values of eta on every node of a time grid, with lazily cached derivatives."""

    def __init__(self, grid, time_grid, spec, segments, fields=None, mollified=False):
        self.grid = grid
        self.time_grid = time_grid
        self.spec = spec
        self.segments = tuple(segments)
        self.mollified = mollified
        self._fields = fields
        if fields is not None:
            fields.setflags(write=False)
        self._zero = None
        self._calc = {}

    @property
    def is_zero(self):
        return self._fields is None

    @property
    def seed(self):
        return self.segments[0][1]

    def seed_at(self, k):
        s = self.segments[0][1]
        for start, seed in self.segments:
            if start <= k:
                s = seed
        return s

    def field(self, k):
        """eta(t_k, .) as a read-only ``(d,) + grid.shape`` array."""
        if not 0 <= k <= self.time_grid.n_steps:
            raise ParameterError(f"time index {k} outside the time grid")
        if self._fields is None:
            if self._zero is None:
                self._zero = np.zeros((self.grid.d,) + self.grid.shape)
                self._zero.setflags(write=False)
            return self._zero
        return self._fields[k]

    def eta(self, k):
        return VectorField(self.grid, self.field(k))

    def sup(self):
        if self._fields is None:
            return 0.0
        return float(np.max(np.sqrt(np.sum(self._fields**2, axis=1))))

    def calculus(self, k, scheme=None):
        s = scheme or self.spec.scheme
        e = self.field(k)
        # every node of a zero path shares one array, hence one cache entry
        key = (0 if self._fields is None else k, s)
        if key not in self._calc:
            if len(self._calc) >= 4:
                self._calc.pop(next(iter(self._calc)))
            self._calc[key] = EtaCalculus(
                e, grad_array(self.grid, e, s), laplacian_array(self.grid, e, s)
            )
        return self._calc[key]


def _increment(grid, tgrid, spec, k, seed, zeta, kernel):
    dt = tgrid.dt
    if spec.kind == "brownian_integral":
        dB = np.sqrt(dt) * rng.normals(seed, "brownian", k, size=len(spec.modes))
        tk = k * dt
        out = np.zeros((grid.d,) + grid.shape)
        for i, m in enumerate(spec.modes):
            out += (m.amplitude(tk) * dB[i]) * m.profile.components
        return out * zeta
    xi = rng.normals(seed, "white", k, size=(grid.d,) + grid.shape)
    xi *= grid.spacing ** (-0.5 * grid.d)
    offs, w = kernel
    return zeta * convolve_kernel(grid, xi, offs, w) * np.sqrt(dt)


def _accumulate(grid, tgrid, spec, segments, start, prefix):
    """Fill eta from node ``start`` on, keeping ``prefix[: start + 1]`` verbatim."""
    n = tgrid.n_steps
    out = np.empty((n + 1, grid.d) + grid.shape)
    out[: start + 1] = prefix[: start + 1]
    zeta = cutting_function(grid, spec.cutoff).values
    kernel = bump_kernel(grid, spec.epsilon) if spec.kind == "regularized_white" else None
    probe = NoisePath(grid, tgrid, spec, segments)
    for k in range(start, n):
        inc = _increment(grid, tgrid, spec, k, probe.seed_at(k), zeta, kernel)
        out[k + 1] = out[k] + inc
    return out


def build_noise(grid, time_grid, spec):
    """Generate the noise path for ``spec`` on the given space-time grid."""
    spec.validate(grid)
    segments = ((0, int(spec.seed)),)
    if spec.kind == "zero":
        return NoisePath(grid, time_grid, spec, segments)
    prefix = np.zeros((1, grid.d) + grid.shape)
    fields = _accumulate(grid, time_grid, spec, segments, 0, prefix)
    return NoisePath(grid, time_grid, spec, segments, fields)


def eta_calculus(path, k, scheme=None):
    """(eta, d/dx eta, Laplacian eta) at time node ``k``; cached on the path."""
    return path.calculus(k, scheme)


def reseed_suffix(path, t_star, new_seed):
    """Replace every increment after ``t_star`` with draws from ``new_seed``.

    Nodes ``t_k <= t_star`` are copied bit-for-bit from ``path``.
    """
    if path.mollified:
        raise ParameterError("cannot reseed a time-mollified path")
    tg = path.time_grid
    k_star = tg.index_of(t_star)
    segments = tuple(s for s in path.segments if s[0] < k_star) + ((k_star, int(new_seed)),)
    if k_star == tg.n_steps:
        return NoisePath(path.grid, tg, path.spec, segments, path._fields)
    if path.is_zero:
        return NoisePath(path.grid, tg, path.spec, segments)
    fields = _accumulate(path.grid, tg, path.spec, segments, k_star, path._fields)
    return NoisePath(path.grid, tg, path.spec, segments, fields)


def _time_kernel(dt, delta_t):
    r = int(np.ceil(delta_t / dt))
    j = np.arange(-r, r + 1)
    u2 = (j * dt / delta_t) ** 2
    keep = u2 < 1.0
    w = np.exp(-1.0 / (1.0 - u2[keep]))
    return j[keep], w / np.sum(w)


def mollify_path(path, delta_t, delta_x):
    """Mollify eta in time (constant extension past both ends) and in space.

    A radius of 0 skips that direction.
    """
    from .initial_data import mollify

    tg = path.time_grid
    if delta_t and delta_t < 2 * tg.dt:
        raise ParameterError(f"delta_t={delta_t} must be 0 or >= 2 dt")
    if delta_x and delta_x < 2 * path.grid.spacing:
        raise ParameterError(f"delta_x={delta_x} must be 0 or >= 2h")
    if path.is_zero:
        return NoisePath(path.grid, tg, path.spec, path.segments, mollified=True)
    f = np.array(path._fields)
    if delta_t:
        offs, w = _time_kernel(tg.dt, delta_t)
        idx = np.arange(tg.n_steps + 1)
        g = np.zeros_like(f)
        for o, wj in zip(offs, w):
            g += wj * f[np.clip(idx + o, 0, tg.n_steps)]
        f = g
    if delta_x:
        f = np.stack([mollify(VectorField(path.grid, fk), delta_x).components for fk in f])
    return NoisePath(path.grid, tg, path.spec, path.segments, f, mollified=True)


def zero_path(grid, time_grid):
    return build_noise(grid, time_grid, NoiseSpec("zero"))


__all__ = [
    "EtaCalculus",
    "NoiseMode",
    "NoisePath",
    "NoiseSpec",
    "TimeGrid",
    "build_noise",
    "eta_calculus",
    "fourier_mode",
    "mollify_path",
    "reseed_suffix",
    "zero_path",
]
