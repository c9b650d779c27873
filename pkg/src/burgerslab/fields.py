"""Periodic lattice fields and the discrete calculus used by every solver.

Arrays are stored in C order with ``x_1`` as the slowest axis.  Scalar values
have shape ``grid.shape``; vector values have shape ``(d,) + grid.shape`` and
component ``i`` is the ``i``-th velocity component.

Two derivative schemes are available: ``"spectral"`` (Fourier multipliers on
the periodic box, Nyquist mode dropped from odd derivatives) and
``"central2"`` (second-order centred differences).
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateFieldError,
    DimensionError,
    InvalidFieldError,
    InvalidPointError,
    ParameterError,
)

SCHEMES = ("spectral", "central2")


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice on ``[0, L)^d``."""

    d: int
    n: int
    box_length: float = 2 * np.pi

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise DimensionError(f"d must be 1, 2 or 3, got {self.d}")
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise ParameterError(f"n must be a power of two >= 8, got {self.n}")
        if not (np.isfinite(self.box_length) and self.box_length > 0):
            raise ParameterError(f"box_length must be positive, got {self.box_length}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def spacing(self):
        return self.box_length / self.n

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def size(self):
        return self.n**self.d

    @property
    def axes(self):
        return tuple(range(-self.d, 0))

    def coords(self):
        """1-d node coordinates ``0, h, ..., L - h``."""
        return np.arange(self.n) * self.spacing

    def mesh(self):
        """Node coordinates as a list of ``d`` broadcast arrays (``ij`` indexing)."""
        x = self.coords()
        return np.meshgrid(*([x] * self.d), indexing="ij")

    def points(self):
        """All nodes as an ``(n^d, d)`` array in row-major order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=-1)

    # Fourier-space helpers, cached per grid instance.

    @cached_property
    def _modes(self):
        m = []
        for a in range(self.d):
            if a == self.d - 1:
                ma = np.arange(self.n // 2 + 1, dtype=float)
            else:
                ma = np.fft.fftfreq(self.n, d=1.0 / self.n)
            shape = [1] * self.d
            shape[a] = ma.size
            m.append(ma.reshape(shape))
        return tuple(m)

    @cached_property
    def wavenumbers(self):
        """Angular wavenumbers per axis, broadcastable to the rfft shape."""
        scale = 2 * np.pi / self.box_length
        return tuple(scale * m for m in self._modes)

    @cached_property
    def derivative_wavenumbers(self):
        """Wavenumbers with the Nyquist mode zeroed (for odd derivatives)."""
        out = []
        for m, k in zip(self._modes, self.wavenumbers):
            out.append(np.where(np.abs(m) == self.n // 2, 0.0, k))
        return tuple(out)

    @cached_property
    def k_squared(self):
        """|k|^2 including the Nyquist mode (true heat-kernel symbol)."""
        return sum(k**2 for k in self.wavenumbers)

    @cached_property
    def dealias_mask(self):
        """2/3-rule mask: keep modes with ``3|m| < n`` on every axis."""
        keep = np.ones(self.fourier_shape, dtype=bool)
        for m in self._modes:
            keep = keep & (3 * np.abs(m) < self.n)
        return keep

    @property
    def fourier_shape(self):
        return self.shape[:-1] + (self.n // 2 + 1,)

    def symbol_laplacian(self, scheme, nyquist=False):
        """Fourier symbol of the discrete Laplacian (non-positive)."""
        _check_scheme(scheme)
        if scheme == "spectral":
            if nyquist:
                return -self.k_squared
            return -sum(k**2 for k in self.derivative_wavenumbers)
        h = self.spacing
        return -sum((2.0 / h * np.sin(0.5 * k * h)) ** 2 for k in self.wavenumbers)


def _check_scheme(scheme):
    if scheme not in SCHEMES:
        raise ParameterError(f"unknown derivative scheme {scheme!r}; expected one of {SCHEMES}")


def _require_finite(values, what="field"):
    if not np.all(np.isfinite(values)):
        raise InvalidFieldError(f"{what} contains non-finite values")


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.size != self.grid.size:
            raise InvalidFieldError(f"expected {self.grid.size} values, got {v.size}")
        v = v.reshape(self.grid.shape)
        _require_finite(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def sup(self):
        return float(np.max(np.abs(self.values)))

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _values_of(other))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _values_of(other))

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * _values_of(other))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid
    components: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = self.components
        if isinstance(c, (list, tuple)):
            c = [s.values if isinstance(s, ScalarField) else s for s in c]
        c = np.array(c, dtype=float)
        g = self.grid
        if c.shape != (g.d,) + g.shape:
            try:
                c = c.reshape((g.d,) + g.shape)
            except ValueError:
                raise DimensionError(
                    f"vector field needs shape {(g.d,) + g.shape}, got {c.shape}"
                ) from None
        _require_finite(c)
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.d,) + grid.shape))

    def component(self, i):
        return ScalarField(self.grid, self.components[i])

    def magnitude(self):
        """Pointwise Euclidean norm |y(x)|."""
        return np.sqrt(np.sum(self.components**2, axis=0))

    def sup(self):
        """sup_x |y(x)| with the Euclidean pointwise norm."""
        return float(np.max(self.magnitude()))

    def __add__(self, other):
        return VectorField(self.grid, self.components + _values_of(other))

    def __sub__(self, other):
        return VectorField(self.grid, self.components - _values_of(other))

    def __mul__(self, other):
        return VectorField(self.grid, self.components * _values_of(other))

    __rmul__ = __mul__


def _values_of(obj):
    if isinstance(obj, ScalarField):
        return obj.values
    if isinstance(obj, VectorField):
        return obj.components
    return obj


def _same_grid(a, b):
    if a.grid != b.grid:
        raise DimensionError(f"grid mismatch: {a.grid} vs {b.grid}")


# ---------------------------------------------------------------------------
# Array-level kernels.  ``u`` has the spatial axes last; leading axes are
# batch axes (components, time, ...).


def fft(grid, u):
    return np.fft.rfftn(u, axes=grid.axes)


def ifft(grid, uh):
    return np.fft.irfftn(uh, s=grid.shape, axes=grid.axes)


def grad_array(grid, u, scheme="spectral"):
    """Gradient of ``u`` (shape ``B + grid.shape``) -> ``B + (d,) + grid.shape``."""
    _check_scheme(scheme)
    lead = u.ndim - grid.d
    if scheme == "spectral":
        uh = fft(grid, u)
        parts = [ifft(grid, 1j * k * uh) for k in grid.derivative_wavenumbers]
    else:
        h2 = 2 * grid.spacing
        parts = [
            (np.roll(u, -1, axis=lead + a) - np.roll(u, 1, axis=lead + a)) / h2
            for a in range(grid.d)
        ]
    return np.stack(parts, axis=lead)


def laplacian_array(grid, u, scheme="spectral"):
    _check_scheme(scheme)
    lead = u.ndim - grid.d
    if scheme == "spectral":
        return ifft(grid, grid.symbol_laplacian("spectral") * fft(grid, u))
    h2 = grid.spacing**2
    out = -2.0 * grid.d * u
    for a in range(grid.d):
        out = out + np.roll(u, -1, axis=lead + a) + np.roll(u, 1, axis=lead + a)
    return out / h2


def dealias_array(grid, u):
    return ifft(grid, np.where(grid.dealias_mask, fft(grid, u), 0.0))


def advect_array(grid, v, y, scheme="spectral", dealias=False, grad_y=None):
    """``(v, d/dx) y``: component ``i`` is ``sum_j v_j d_j y_i``.

    ``grad_y`` may be supplied as the precomputed ``[i, j] = d_j y_i`` array.
    """
    if grad_y is None:
        grad_y = grad_array(grid, y, scheme)
    out = np.einsum("j...,ij...->i...", v, grad_y)
    if dealias and scheme == "spectral":
        out = dealias_array(grid, out)
    return out


def curl_defect_array(grid, y, scheme="spectral"):
    if grid.d < 2:
        raise DimensionError("curl_defect needs d >= 2")
    g = grad_array(grid, y, scheme)  # g[i, j] = d_j y_i
    worst = 0.0
    for i in range(grid.d):
        for j in range(i + 1, grid.d):
            worst = max(worst, float(np.max(np.abs(g[j, i] - g[i, j]))))
    return worst


def interp_array(grid, values, points):
    """Periodic multilinear interpolation.

    ``values`` has shape ``(c,) + grid.shape``; ``points`` has shape ``(m, d)``.
    Returns an array of shape ``(c, m)``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != grid.d:
        raise DimensionError(f"points must have {grid.d} coordinates")
    if not np.isfinite(pts).all():
        raise InvalidPointError("interpolation point has NaN or infinite coordinates")
    n = grid.n
    u = pts / grid.spacing
    # snap roundoff so nodal values come back exactly
    r = np.round(u)
    u = np.where(np.abs(u - r) < 1e-12 * np.maximum(1.0, np.abs(r)), r, u)
    base = np.floor(u)
    w = u - base
    i0 = base.astype(np.int64) % n
    i1 = (i0 + 1) % n
    flat_vals = values.reshape(values.shape[0], -1)
    out = np.zeros((values.shape[0], pts.shape[0]))
    strides = [n ** (grid.d - 1 - a) for a in range(grid.d)]
    for corner in range(1 << grid.d):
        idx = np.zeros(pts.shape[0], dtype=np.int64)
        weight = np.ones(pts.shape[0])
        for a in range(grid.d):
            if (corner >> (grid.d - 1 - a)) & 1:
                idx += i1[:, a] * strides[a]
                weight *= w[:, a]
            else:
                idx += i0[:, a] * strides[a]
                weight *= 1.0 - w[:, a]
        out += weight * flat_vals[:, idx]
    return out


# ---------------------------------------------------------------------------
# Field-level operations.


def gradient(f, scheme="spectral"):
    """Gradient of a scalar field as a vector field."""
    return VectorField(f.grid, grad_array(f.grid, f.values, scheme))


def divergence(v, scheme="spectral"):
    g = grad_array(v.grid, v.components, scheme)
    return ScalarField(v.grid, sum(g[i, i] for i in range(v.grid.d)))


def laplacian(f, scheme="spectral"):
    """Laplacian of a scalar or vector field (componentwise for vectors)."""
    if isinstance(f, VectorField):
        return VectorField(f.grid, laplacian_array(f.grid, f.components, scheme))
    return ScalarField(f.grid, laplacian_array(f.grid, f.values, scheme))


def advect(v, y, scheme="spectral", dealias=True):
    """Transport term ``(v, d/dx) y``.

    The product is 2/3-dealiased when ``dealias`` is set and the scheme is
    spectral.
    """
    _same_grid(v, y)
    return VectorField(
        v.grid, advect_array(v.grid, v.components, y.components, scheme, dealias)
    )


def curl_defect(y, scheme="spectral"):
    """max over i<j and nodes of |d_i y_j - d_j y_i|; zero for gradient fields."""
    return curl_defect_array(y.grid, y.components, scheme)


def interpolate(f, point):
    """Multilinear periodic interpolation of a vector (or scalar) field.

    ``point`` is a single ``d``-vector or an ``(m, d)`` batch; it is wrapped
    into the box.  Returns ``(d,)`` / ``(m, d)`` for vector fields and a
    scalar / ``(m,)`` for scalar fields.
    """
    single = np.ndim(point) == 1
    if isinstance(f, ScalarField):
        out = interp_array(f.grid, f.values[None], point)[0]
        return float(out[0]) if single else out
    out = interp_array(f.grid, f.components, point).T
    return out[0] if single else out


@dataclass(frozen=True)
class HolderEstimate:
    exponent: float
    constant: float
    scales_used: tuple

    def __post_init__(self):
        if not (0.0 < self.exponent <= 1.0):
            raise ParameterError(f"Holder exponent must lie in (0, 1], got {self.exponent}")
        if self.constant < 0:
            raise ParameterError("Holder constant must be non-negative")
        if len(self.scales_used) < 3:
            raise ParameterError("at least three scales are required")


def max_increments(f, lags):
    """Largest absolute increment over all axes at each integer lag (non-wrapping)."""
    v = f.values
    out = []
    for s in lags:
        m = 0.0
        for a in range(f.grid.d):
            lo = [slice(None)] * f.grid.d
            hi = [slice(None)] * f.grid.d
            lo[a] = slice(0, f.grid.n - s)
            hi[a] = slice(s, None)
            m = max(m, float(np.max(np.abs(v[tuple(hi)] - v[tuple(lo)]))))
        out.append(m)
    return np.array(out)


def estimate_holder(f):
    """Empirical Hölder exponent from dyadic max increments.

    Fits ``log M(s) = log C + beta log s`` by least squares over the
    separations ``s = h 2^k``, ``k = 0..log2(n) - 3``, where ``M(s)`` is the
    largest increment at separation ``s`` along any axis.  The exponent is
    clamped to ``(0, 1]``; the constant is ``max_s M(s) / s^beta``.
    """
    n = f.grid.n
    if n < 64:
        raise ParameterError(f"Holder estimation needs n >= 64, got {n}")
    K = int(np.log2(n)) - 3
    lags = [2**k for k in range(K + 1)]
    incr = max_increments(f, lags)
    if np.any(incr <= 0.0):
        raise DegenerateFieldError("field has a vanishing increment; slope undefined")
    seps = np.array(lags) * f.grid.spacing
    slope, _ = np.polyfit(np.log(seps), np.log(incr), 1)
    beta = float(min(max(slope, np.finfo(float).tiny), 1.0))
    const = float(np.max(incr / seps**beta))
    return HolderEstimate(beta, const, tuple(float(s) for s in seps))
