import numpy as np
import pytest

from burgerslab.colehopf import (
    PotentialInit,
    heat_field,
    min_heat,
    residual_check,
    solve_potential,
)
from burgerslab.errors import ParameterError, UnderflowError
from burgerslab.fields import Grid, ScalarField, gradient
from burgerslab.noise import TimeGrid

from conftest import trig_field


def cos_psi(n=128, d=1):
    g = Grid(d, n)
    v = np.ones(g.shape)
    for x in g.mesh():
        v = v * np.cos(x)
    return ScalarField(g, v)


class TestSolvePotential:
    def test_constant_potential(self):
        g = Grid(2, 16)
        tr = solve_potential(PotentialInit(ScalarField(g, np.full(g.shape, 3.0)), 0.1), [0, 0.5])
        assert np.max(np.abs(tr.y)) <= 1e-14

    def test_initial_gradient(self):
        psi = cos_psi(64, 2)
        tr = solve_potential(PotentialInit(psi, 0.2), [0.0])
        assert np.max(np.abs(tr.y[0] - gradient(psi).components)) < 1e-10

    def test_decays_to_zero(self):
        psi = cos_psi(32)
        tr = solve_potential(PotentialInit(psi, 0.1), [0.0, 10.0, 100.0])
        assert tr.sup_y[2] < 1e-3 * tr.sup_y[0]
        assert tr.sup_y[1] > tr.sup_y[2]

    def test_accepts_time_grid(self):
        tr = solve_potential(PotentialInit(cos_psi(32), 0.1), TimeGrid(1.0, 4))
        assert np.allclose(tr.times, [0, 0.25, 0.5, 0.75, 1.0])

    def test_curl_free(self):
        g = Grid(2, 64)
        psi = ScalarField(g, trig_field(g, 8))
        tr = solve_potential(PotentialInit(psi, 0.3), [0.0, 0.2, 0.5])
        assert np.max(tr.curl) <= 1e-10

    def test_gauge_invariance(self):
        g = Grid(2, 32)
        psi = 0.2 * trig_field(g, 9)
        a = solve_potential(PotentialInit(ScalarField(g, psi), 0.2), [0.1, 0.4])
        b = solve_potential(PotentialInit(ScalarField(g, psi + 17.0), 0.2), [0.1, 0.4])
        assert np.max(np.abs(a.y - b.y)) <= 1e-12

    def test_heat_positivity(self):
        init = PotentialInit(cos_psi(64, 2), 0.1)
        m0 = min_heat(init, 0.0)
        assert m0 > 0
        for t in (0.1, 0.5, 2.0):
            assert min_heat(init, t) >= m0 * (1 - 1e-12)

    def test_heat_mode_decay(self):
        g = Grid(1, 32)
        psi = ScalarField(g, np.zeros(32))
        init = PotentialInit(psi, 0.5)
        assert np.allclose(heat_field(init, 3.0), 1.0)

    def test_underflow(self):
        g = Grid(1, 32)
        with pytest.raises(UnderflowError):
            PotentialInit(ScalarField(g, 1e3 * np.cos(g.coords())), 1e-3)

    def test_bad_viscosity(self):
        with pytest.raises(ParameterError):
            PotentialInit(cos_psi(16), 0.0)


class TestResidual:
    def test_zero_field(self):
        g = Grid(2, 16)
        tr = solve_potential(PotentialInit(ScalarField(g, np.zeros(g.shape)), 0.1),
                             np.linspace(0, 1, 5))
        _, r = residual_check(tr, 0.1)
        assert np.all(r == 0.0)

    def test_richardson_in_snapshot_spacing(self):
        init = PotentialInit(cos_psi(256), 0.1)
        res = []
        for dts in (0.02, 0.01):
            tr = solve_potential(init, np.arange(0, 1.0 + dts / 2, dts))
            t, r = residual_check(tr, 0.1)
            res.append(r[np.argmin(np.abs(t - 0.5))])
        assert 3.6 < res[0] / res[1] < 4.4
        assert res[1] < 1e-3

    def test_shift_invariant(self):
        g = Grid(1, 128)
        psi = np.cos(g.coords()) + 0.3 * np.sin(2 * g.coords())
        times = np.linspace(0, 0.5, 11)
        _, a = residual_check(solve_potential(PotentialInit(ScalarField(g, psi), 0.1), times), 0.1)
        _, b = residual_check(
            solve_potential(PotentialInit(ScalarField(g, np.roll(psi, 37)), 0.1), times), 0.1)
        assert np.allclose(a, b, rtol=1e-6, atol=1e-13)  # roundoff times k_max^2

    def test_unequal_spacing_rejected(self):
        tr = solve_potential(PotentialInit(cos_psi(16), 0.1), [0.0, 0.1, 0.3])
        with pytest.raises(ParameterError):
            residual_check(tr, 0.1)
