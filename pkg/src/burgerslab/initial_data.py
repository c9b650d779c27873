"""Initial data: fractional Brownian sheets, cutting functions, mollifiers.

The sheet ``W^H`` has the product covariance

    E[W(x) W(x')] = prod_i 1/2 (|x_i|^{2H} + |x'_i|^{2H} - |x_i - x'_i|^{2H}),

anchored at the origin corner of the box (node index 0 on every axis).
"""

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import rng
from .errors import ParameterError, ResolutionError, SizeError, SynthesisError
from .fields import Grid, ScalarField, VectorField, gradient

CHOLESKY_LIMIT = 4096
JITTER = 1e-12


@dataclass(frozen=True)
class FbsParams:
    hurst: float
    seed: int = 0
    method: str = "cholesky"

    def __post_init__(self):
        if not (0.0 < self.hurst < 1.0):
            raise ParameterError(f"Hurst index must lie in (0, 1), got {self.hurst}")
        if self.method not in ("cholesky", "spectral_approx"):
            raise ParameterError(f"unknown synthesis method {self.method!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise ParameterError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class CutoffSpec:
    r_inner: float
    r_outer: float
    center: tuple

    def __post_init__(self):
        if not (0.0 < self.r_inner < self.r_outer):
            raise ParameterError("need 0 < r_inner < r_outer")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))

    def validate(self, grid):
        c = np.asarray(self.center)
        if c.size != grid.d:
            raise ParameterError(f"cutoff center needs {grid.d} coordinates")
        if np.any(c - self.r_outer <= 0) or np.any(c + self.r_outer >= grid.box_length):
            raise ParameterError("cutoff ball must fit strictly inside the box")

    @classmethod
    def centered(cls, grid, r_inner, r_outer):
        return cls(r_inner, r_outer, (grid.box_length / 2,) * grid.d)


def fbs_covariance(x, xp, H):
    """Covariance of the fractional Brownian sheet; broadcasts over leading axes."""
    if not (0.0 < H < 1.0):
        raise ParameterError(f"Hurst index must lie in (0, 1), got {H}")
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    h2 = 2.0 * H
    factors = 0.5 * (np.abs(x) ** h2 + np.abs(xp) ** h2 - np.abs(x - xp) ** h2)
    return np.prod(factors, axis=-1)


@lru_cache(maxsize=16)
def _fbm_factor(n, spacing, H):
    """Lower Cholesky factor of the 1-d fBm covariance on nodes h, 2h, ..., (n-1)h."""
    t = np.arange(1, n) * spacing
    C = fbs_covariance(t[:, None, None], t[None, :, None], H)
    C = C + JITTER * np.max(np.diag(C)) * np.eye(n - 1)
    try:
        Lc = np.linalg.cholesky(C)
    except np.linalg.LinAlgError as exc:
        raise SynthesisError(f"fBm covariance is not positive definite: {exc}") from None
    Lc.setflags(write=False)
    return Lc


def _sample_cholesky(grid, H, z):
    # The product covariance on a tensor grid is a Kronecker product of 1-d
    # covariances, so its Cholesky factor is the Kronecker product of 1-d factors.
    Lc = _fbm_factor(grid.n, grid.spacing, H)
    w = z
    for a in range(grid.d):
        w = np.moveaxis(np.tensordot(Lc, w, axes=([1], [a])), 0, a)
    out = np.zeros(grid.shape)
    out[(slice(1, None),) * grid.d] = w
    return out


def _sample_spectral(grid, H, seed, label):
    """Harmonizable-representation approximation on a twice-padded grid."""
    m = 2 * grid.n
    L2 = 2 * grid.box_length
    k1 = 2 * np.pi * np.fft.fftfreq(m, d=L2 / m)
    w1 = np.zeros(m)
    nz = k1 != 0
    w1[nz] = np.abs(k1[nz]) ** (-(H + 0.5))
    gen = rng.stream(seed, "fbs-spectral", label)
    shape = (m,) * grid.d
    Z = gen.standard_normal(shape) + 1j * gen.standard_normal(shape)
    W = np.ones(shape)
    for a in range(grid.d):
        s = [1] * grid.d
        s[a] = m
        W = W * w1.reshape(s)
    F = np.fft.ifftn(W * Z) * m**grid.d
    # rectangular increment: W(x) = sum_S (-1)^{d-|S|} F(x_S, 0)
    out = np.zeros(shape)
    for subset in range(1 << grid.d):
        term = F
        sign = 1.0
        for a in range(grid.d):
            if not (subset >> a) & 1:
                idx = [slice(None)] * grid.d
                idx[a] = slice(0, 1)
                term = term[tuple(idx)]
                sign = -sign
        out = out + sign * np.real(np.broadcast_to(term, shape))
    out = out[(slice(0, grid.n),) * grid.d]
    # normalise so the far-corner variance matches the exact sheet variance
    x_far = np.full(grid.d, (grid.n - 1) * grid.spacing)
    var_model = 1.0
    for a in range(grid.d):
        var_model *= np.sum(w1**2 * np.abs(np.exp(1j * k1 * x_far[a]) - 1) ** 2)
    target = fbs_covariance(x_far, x_far, H)
    return out * np.sqrt(target / var_model)


def sample_fbs(grid, params, label="0"):
    """One sample of the fractional Brownian sheet on the grid nodes.

    ``label`` selects an independent sub-stream of ``params.seed`` (used for
    the separate components of a vector-valued initial field).
    """
    if params.method == "cholesky":
        if grid.size > CHOLESKY_LIMIT:
            raise SizeError(
                f"Cholesky synthesis limited to {CHOLESKY_LIMIT} points, grid has {grid.size}"
            )
        z = rng.normals(params.seed, "fbs", label, size=(grid.n - 1,) * grid.d)
        values = _sample_cholesky(grid, params.hurst, z)
    else:
        values = _sample_spectral(grid, params.hurst, params.seed, label)
    if not np.all(np.isfinite(values)):
        raise SynthesisError("fBs synthesis produced non-finite values")
    return ScalarField(grid, values)


def bump_kernel(grid, radius):
    """Normalised discrete bump exp(-1/(1-|u|^2)), |u| < 1, as (offsets, weights).

    Offsets are integer lattice shifts with ``|offset h| < radius``.
    """
    h = grid.spacing
    r = int(np.ceil(radius / h))
    rng1 = np.arange(-r, r + 1)
    offs = np.stack(np.meshgrid(*([rng1] * grid.d), indexing="ij"), axis=-1).reshape(-1, grid.d)
    u2 = np.sum((offs * h / radius) ** 2, axis=1)
    keep = u2 < 1.0
    offs = offs[keep]
    w = np.exp(-1.0 / (1.0 - u2[keep]))
    return offs, w / np.sum(w)


def convolve_kernel(grid, values, offsets, weights):
    """Periodic discrete convolution sum_j w_j f(x - o_j h); exact under lattice shifts."""
    axes = tuple(range(values.ndim - grid.d, values.ndim))
    out = np.zeros_like(values)
    for o, w in zip(offsets, weights):
        out += w * np.roll(values, tuple(int(s) for s in o), axis=axes)
    return out


def cutting_function(grid, spec):
    """Smooth cutting function: 1 on the inner ball, 0 outside the outer ball.

    Built as the indicator of the midway ball convolved with a bump of radius
    ``(r_outer - r_inner) / 2``.
    """
    spec.validate(grid)
    width = spec.r_outer - spec.r_inner
    h = grid.spacing
    if width < 4 * h:
        raise ResolutionError(f"transition width {width:g} < 4h = {4 * h:g}")
    r_mid = 0.5 * (spec.r_inner + spec.r_outer)
    delta = 0.5 * width
    dist = _distance(grid, spec.center)
    ind = (dist < r_mid).astype(float)
    offs, w = bump_kernel(grid, delta)
    zeta = convolve_kernel(grid, ind, offs, w)
    # exact values where the kernel support lies wholly inside / outside
    zeta = np.clip(zeta, 0.0, 1.0)
    zeta[dist <= spec.r_inner] = 1.0
    zeta[dist >= spec.r_outer] = 0.0
    return ScalarField(grid, zeta)


def _distance(grid, center):
    m = grid.mesh()
    return np.sqrt(sum((mi - c) ** 2 for mi, c in zip(m, center)))


def mollify(f, epsilon):
    """Convolve with the normalised bump of radius ``epsilon`` (periodic).

    Radii below two grid spacings cannot be resolved; the field is then
    returned unchanged with a warning.
    """
    grid = f.grid
    if epsilon <= 0 or epsilon < 2 * grid.spacing:
        warnings.warn(
            f"mollification radius {epsilon:g} below 2h={2 * grid.spacing:g}; field unchanged",
            stacklevel=2,
        )
        return f
    offs, w = bump_kernel(grid, epsilon)
    if isinstance(f, VectorField):
        return VectorField(grid, convolve_kernel(grid, f.components, offs, w))
    return ScalarField(grid, convolve_kernel(grid, f.values, offs, w))


def make_initial(grid, kind, params):
    """Build the initial velocity field.

    kind ``"fbs_cutoff"``: params has ``hurst``, ``seed``, ``cutoff`` and
    optionally ``method``; component ``i`` is an independent sheet times the
    cutting function.  kind ``"potential"``: params has ``psi`` (a
    ScalarField); the field is its spectral gradient.  kind ``"custom"``:
    params has ``values`` (array or VectorField).
    """
    if kind == "fbs_cutoff":
        fp = FbsParams(params["hurst"], params.get("seed", 0), params.get("method", "cholesky"))
        zeta = cutting_function(grid, params["cutoff"])
        comps = [sample_fbs(grid, fp, label=str(i)).values * zeta.values for i in range(grid.d)]
        return VectorField(grid, np.array(comps))
    if kind == "potential":
        psi = params["psi"]
        if not isinstance(psi, ScalarField):
            psi = ScalarField(grid, psi)
        return gradient(psi, "spectral")
    if kind == "custom":
        v = params["values"]
        if isinstance(v, VectorField):
            return v
        return VectorField(grid, v)
    raise ParameterError(f"unknown initial kind {kind!r}")


__all__ = [
    "CHOLESKY_LIMIT",
    "CutoffSpec",
    "FbsParams",
    "Grid",
    "bump_kernel",
    "cutting_function",
    "fbs_covariance",
    "make_initial",
    "mollify",
    "sample_fbs",
]
