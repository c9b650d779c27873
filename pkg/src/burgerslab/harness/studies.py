"""Composite studies built from the library modules.

Each study returns a small result object with a ``passed`` verdict, table
``header``/``rows`` ready for CSV output, and any extra data worth keeping.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import rng
from ..colehopf import PotentialInit, solve_potential
from ..errors import DegenerateFieldError, ParameterError
from ..fbsde import uniform_bound_check, verify
from ..fields import Grid, ScalarField, estimate_holder
from ..initial_data import FbsParams, bump_kernel, cutting_function, mollify, sample_fbs
from ..noise import NoiseSpec, TimeGrid, build_noise, fourier_mode, mollify_path, reseed_suffix
from ..solver import solve


@dataclass
class StudyResult:
    passed: bool
    header: list
    rows: list
    data: dict = field(default_factory=dict)


def _sup(a):
    return float(np.max(np.sqrt(np.sum(a**2, axis=0))))


# -- Cole-Hopf ---------------------------------------------------------------


def colehopf_distances(traj, oracle):
    """Per-snapshot L-infinity (pointwise Euclidean) and L2 distances."""
    g = traj.grid
    dv = g.spacing**g.d
    rows = []
    for s, t in enumerate(traj.times):
        diff = traj.y[s] - oracle.y[s]
        mag = np.sqrt(np.sum(diff**2, axis=0))
        rows.append((float(t), float(np.max(mag)), float(np.sqrt(np.sum(mag**2) * dv))))
    return rows


def verify_colehopf(psi, nu, tgrid, config, tol=1e-3, refine=False):
    """Solve from grad psi with the solver and the exact oracle; compare snapshots.

    With ``refine`` the same problem is also solved on the doubled grid
    (psi resampled from its Fourier series) and the error ratio reported;
    the verdict then also requires a ratio of at least 4.
    """
    from ..fields import gradient
    from ..noise import zero_path

    g = psi.grid
    init = PotentialInit(psi, nu)  # underflow is checked before the costly solve
    traj = solve(gradient(psi), zero_path(g, tgrid), config)
    oracle = solve_potential(init, traj.times)
    rows = colehopf_distances(traj, oracle)
    worst = max(r[1] for r in rows)
    header = ["time", "linf", "l2", "curl_solver", "curl_oracle"]
    table = []
    for s, r in enumerate(rows):
        cs = traj.curl[s] if traj.curl is not None else None
        co = oracle.curl[s] if oracle.curl is not None else None
        table.append(list(r) + [cs, co])
    data = dict(linf=worst, traj=traj, oracle=oracle)
    passed = worst <= tol
    if refine:
        g2 = Grid(g.d, 2 * g.n, g.box_length)
        psi2 = ScalarField(g2, _fourier_resample(psi.values, g2.shape))
        t2 = solve(gradient(psi2), zero_path(g2, tgrid), config)
        o2 = solve_potential(PotentialInit(psi2, nu), t2.times)
        worst2 = max(r[1] for r in colehopf_distances(t2, o2))
        ratio = worst / worst2 if worst2 > 0 else float("inf")
        data.update(linf_refined=worst2, ratio=ratio)
        passed = passed and ratio >= 4.0
    return StudyResult(passed, header, table, data)


def _fourier_resample(v, shape):
    """Band-limited interpolation of a periodic array onto a finer lattice."""
    n = v.shape[0]
    m = shape[0]
    V = np.fft.fftn(v)
    W = np.zeros(shape, dtype=complex)
    k = np.fft.fftfreq(n, 1.0 / n).astype(int)
    idx = np.ix_(*([k % m] * v.ndim))
    W[idx] = V
    return np.real(np.fft.ifftn(W)) * (m / n) ** v.ndim


# -- FBSDE -------------------------------------------------------------------


def query_points(grid, T, count, seed, tau_fractions=(0.0, 0.25, 0.5)):
    """Query pairs (tau, x): tau cycles through ``tau_fractions * T``, x uniform in the box."""
    gen = rng.stream(seed, "queries")
    xs = gen.uniform(0.0, grid.box_length, size=(count, grid.d))
    return [(float(tau_fractions[i % len(tau_fractions)] * T), xs[i]) for i in range(count)]


def verify_fbsde(traj, eta_path, queries, mc, abs_tol=5e-3):
    rep = verify(traj, eta_path, queries, mc)
    rows = rep.table()
    header = list(rows[0].keys()) if rows else []
    body = [[r[h] for h in header] for r in rows]
    body_pass = [r.passes(abs_tol) for r in rep.rows]
    header.append("pass")
    for b, p in zip(body, body_pass):
        b.append(int(p))
    return StudyResult(all(body_pass), header, body, dict(report=rep))


# -- mollification -----------------------------------------------------------


def _holder_or_nan(values, grid):
    if grid.n < 64:
        return float("nan")
    best = []
    for c in values:
        try:
            best.append(estimate_holder(ScalarField(grid, c)).exponent)
        except DegenerateFieldError:
            pass
    return float(min(best)) if best else float("nan")


def study_mollification(phi, eta_path, config, levels=4, eps0=None, ratio_max=0.8, floor=1e-8):
    """Solve with phi_m = phi * rho_{eps_m}, eps_m = eps0 2^-m, and compare the y_m(T).

    Verdict: consecutive sup distances at T shrink by a factor below
    ``ratio_max`` (a distance already at ``floor * max(1, sup phi)`` counts as
    converged), and the family satisfies the uniform bound check.
    """
    if levels < 3:
        raise ParameterError("the mollification study needs at least 3 levels")
    g = phi.grid
    eps0 = 8 * g.spacing if eps0 is None else float(eps0)
    if eps0 < 2 * g.spacing:
        raise ParameterError(f"eps0={eps0} is not resolvable (needs >= 2h)")
    family, paths, eps, smoothed = [], [], [], []
    for m in range(levels):
        e = eps0 * 2.0**-m
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            phi_m = mollify(phi, e)
            path_m = eta_path if eta_path.is_zero else mollify_path(
                eta_path, 0.0, e if e >= 2 * g.spacing else 0.0)
        eps.append(e)
        smoothed.append(e >= 2 * g.spacing)
        family.append(solve(phi_m, path_m, config))
        paths.append(path_m)
    final = [t.y[-1] for t in family]
    dist = [_sup(final[m + 1] - final[m]) for m in range(levels - 1)]
    scale = floor * max(1.0, _sup(phi.components))
    ratios = []
    ok = True
    for a, b in zip(dist[:-1], dist[1:]):
        r = b / a if a > 0 else (0.0 if b == 0 else float("inf"))
        ratios.append(r)
        if not (b <= scale or r < ratio_max):
            ok = False
    bound = uniform_bound_check(family, paths)
    header = ["m", "eps", "mollified", "sup_y", "sup_phi", "dist_next", "ratio", "holder"]
    rows = []
    for m, t in enumerate(family):
        rows.append([
            m, eps[m], int(smoothed[m]), float(np.max(t.sup_y)), _sup(t.yhat[0]),
            dist[m] if m < len(dist) else None,
            ratios[m - 1] if 1 <= m <= len(ratios) else None,
            _holder_or_nan(final[m], g),
        ])
    return StudyResult(ok and bound.passed, header, rows,
                       dict(distances=dist, ratios=ratios, bound=bound, family=family,
                            warnings=sorted({w for t in family for w in t.warnings})))


# -- causality ---------------------------------------------------------------


def check_causality(phi, eta_path, config, t_star, new_seed):
    """Compare a run with one whose noise is reseeded strictly after ``t_star``.

    Passes when every snapshot at ``t <= t_star`` is bit-identical and, if
    the reseeded noise differs from the original at all, some later snapshot
    differs by more than 1e-8 in sup norm.
    """
    other = reseed_suffix(eta_path, t_star, new_seed)
    a = solve(phi, eta_path, config)
    b = solve(phi, other, config)
    tol = 1e-12 * eta_path.time_grid.T
    rows = []
    prefix_ok = True
    later = 0.0
    for s, t in enumerate(a.times):
        same = bool(np.array_equal(a.y[s], b.y[s]) and np.array_equal(a.yhat[s], b.yhat[s]))
        diff = _sup(a.y[s] - b.y[s])
        rows.append([s, float(t), diff, int(same)])
        if t <= t_star + tol:
            prefix_ok = prefix_ok and same
        else:
            later = max(later, diff)
    n = eta_path.time_grid.n_steps
    noise_changed = not eta_path.is_zero and any(
        not np.array_equal(eta_path.field(k), other.field(k)) for k in range(n + 1))
    passed = prefix_ok and (later > 1e-8 or not noise_changed)
    return StudyResult(passed, ["snapshot", "time", "sup_diff", "bit_equal"], rows,
                       dict(prefix_equal=prefix_ok, max_later_diff=later,
                            noise_changed=noise_changed))


# -- noise statistics --------------------------------------------------------


def _probe_nodes(grid, zeta, count, seed):
    """``count`` distinct nodes where the cutting function is positive."""
    inside = np.flatnonzero(zeta.ravel() > 0.5)
    gen = rng.stream(seed, "probes")
    pick = gen.choice(inside, size=count, replace=False)
    return np.array(np.unravel_index(np.sort(pick), grid.shape)).T


def ito_isometry_check(grid, T=0.5, n_steps=20, seeds=1000, probes=5, cutoff=None, n_sigma=3.0):
    """E[eta(T,x)^2] = T (G zeta)(x)^2 for one mode with a = 1."""
    cutoff = cutoff or _default_cutoff(grid)
    tg = TimeGrid(T, n_steps)
    mode = fourier_mode(grid, [1.0] * grid.d, [1.0] + [0.0] * (grid.d - 1), phase=0.3)
    zeta = cutting_function(grid, cutoff).values
    nodes = _probe_nodes(grid, zeta, probes, 17)
    idx = tuple(nodes.T)
    samples = np.empty((seeds, probes))
    for s in range(seeds):
        path = build_noise(grid, tg, NoiseSpec("brownian_integral", modes=(mode,), cutoff=cutoff,
                                               seed=s))
        samples[s] = path.field(n_steps)[0][idx]
    G = mode.profile.components[0][idx] * zeta[idx]
    expect = T * G**2
    sq = samples**2
    mean = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / np.sqrt(seeds)
    ok = np.abs(mean - expect) <= n_sigma * se
    rows = [["ito", i, *map(float, nodes[i] * grid.spacing), float(expect[i]), float(mean[i]),
             float(se[i]), int(ok[i])] for i in range(probes)]
    return bool(np.all(ok)), rows


def kernel_autocorrelation(grid, radius, offset):
    """h^-d sum_j w_j w_{j + offset} for the discrete bump of the given radius (brute force)."""
    offs, w = bump_kernel(grid, radius)
    table = {tuple(int(v) for v in o): wi for o, wi in zip(offs, w)}
    tot = 0.0
    for o, wi in table.items():
        tot += wi * table.get(tuple(a + b for a, b in zip(o, offset)), 0.0)
    return tot * grid.spacing ** (-grid.d)


def white_covariance_check(grid, dt=1e-2, epsilon=None, seeds=1000, probes=5, cutoff=None,
                           n_sigma=3.0):
    """Cov of one increment at node pairs = zeta zeta' (rho*rho)(x - x') dt, component 0."""
    cutoff = cutoff or _default_cutoff(grid)
    epsilon = 3 * grid.spacing if epsilon is None else epsilon
    tg = TimeGrid(dt, 1)
    zeta = cutting_function(grid, cutoff).values
    nodes = _probe_nodes(grid, zeta, probes, 23)
    shifts = [np.eye(grid.d, dtype=int)[i % grid.d] * (i % 3) for i in range(probes)]
    other = (nodes + np.array(shifts)) % grid.n
    ia, ib = tuple(nodes.T), tuple(other.T)
    xa = np.empty((seeds, probes))
    xb = np.empty((seeds, probes))
    for s in range(seeds):
        f = build_noise(grid, tg, NoiseSpec("regularized_white", epsilon=epsilon, cutoff=cutoff,
                                            seed=s)).field(1)[0]
        xa[s] = f[ia]
        xb[s] = f[ib]
    expect = np.array([zeta[ia][i] * zeta[ib][i] * kernel_autocorrelation(grid, epsilon, shifts[i])
                       for i in range(probes)]) * dt
    prod = xa * xb
    mean = prod.mean(axis=0)
    se = prod.std(axis=0, ddof=1) / np.sqrt(seeds)
    ok = np.abs(mean - expect) <= n_sigma * se
    rows = [["white", i, *map(float, nodes[i] * grid.spacing), float(expect[i]), float(mean[i]),
             float(se[i]), int(ok[i])] for i in range(probes)]
    return bool(np.all(ok)), rows


def _default_cutoff(grid):
    from .config import build_cutoff

    return build_cutoff(grid, None)


def noise_statistics(grid, seeds=1000, probes=5):
    a, rows_a = ito_isometry_check(grid, seeds=seeds, probes=probes)
    b, rows_b = white_covariance_check(grid, seeds=seeds, probes=probes)
    header = ["check", "probe"] + [f"x{i + 1}" for i in range(grid.d)] + [
        "expected", "estimate", "stderr", "pass"]
    return StudyResult(a and b, header, rows_a + rows_b, dict(ito=a, white=b))


# -- Holder calibration ------------------------------------------------------


def holder_calibration(n=1024, hursts=(0.3, 0.5, 0.7), seeds=20, tol=0.1, box_length=1.0):
    """Mean estimated exponent of d=1 fBm samples versus the true Hurst index."""
    g = Grid(1, n, box_length)
    rows = []
    ok = True
    for H in hursts:
        est = np.array([estimate_holder(sample_fbs(g, FbsParams(H, s))).exponent
                        for s in range(seeds)])
        good = abs(est.mean() - H) <= tol
        ok = ok and good
        rows.append([float(H), float(est.mean()), float(est.std(ddof=1)), int(seeds), int(good)])
    return StudyResult(ok, ["hurst", "mean_exponent", "std_exponent", "seeds", "pass"], rows)
