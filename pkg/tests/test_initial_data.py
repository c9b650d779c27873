import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from burgerslab.errors import ParameterError, ResolutionError, SizeError
from burgerslab.fields import Grid, ScalarField, VectorField, curl_defect, estimate_holder
from burgerslab.initial_data import (
    CHOLESKY_LIMIT,
    CutoffSpec,
    FbsParams,
    bump_kernel,
    cutting_function,
    fbs_covariance,
    make_initial,
    mollify,
    sample_fbs,
)


class TestCovariance:
    def test_zero_coordinate(self):
        assert fbs_covariance([0.0, 1.3], [0.7, 2.0], 0.3) == 0.0
        assert fbs_covariance([0.4, 1.3], [0.7, 0.0], 0.8) == 0.0

    def test_brownian_variance(self):
        assert fbs_covariance([1.0], [1.0], 0.5) == pytest.approx(1.0)

    def test_product_of_minima(self):
        # H = 1/2 factors are Brownian covariances: min(1, 2) * min(2, 1) = 1
        want = min(1.0, 2.0) * min(2.0, 1.0)
        assert fbs_covariance([1.0, 2.0], [2.0, 1.0], 0.5) == pytest.approx(want)

    @given(st.lists(st.floats(0, 5), min_size=2, max_size=2),
           st.lists(st.floats(0, 5), min_size=2, max_size=2), st.floats(0.05, 0.95))
    def test_symmetric(self, x, xp, H):
        assert fbs_covariance(x, xp, H) == fbs_covariance(xp, x, H)

    @pytest.mark.parametrize("H", [0.0, 1.0, -0.2, 1.5])
    def test_bad_hurst(self, H):
        with pytest.raises(ParameterError):
            fbs_covariance([1.0], [1.0], H)


class TestSampleFbs:
    def test_anchored_at_origin(self):
        g = Grid(2, 16, 1.0)
        for s in range(5):
            v = sample_fbs(g, FbsParams(0.5, s)).values
            assert v[0, 0] == 0.0
            assert np.all(v[0, :] == 0.0) and np.all(v[:, 0] == 0.0)

    def test_deterministic(self):
        g = Grid(2, 16, 1.0)
        a = sample_fbs(g, FbsParams(0.4, 11)).values
        b = sample_fbs(g, FbsParams(0.4, 11)).values
        c = sample_fbs(g, FbsParams(0.4, 12)).values
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_size_limit(self):
        with pytest.raises(SizeError):
            sample_fbs(Grid(2, 128), FbsParams(0.5, 0))
        assert Grid(2, 64).size <= CHOLESKY_LIMIT
        sample_fbs(Grid(2, 64), FbsParams(0.5, 0))

    @pytest.mark.parametrize("H", [0.3, 0.7])
    def test_covariance_monte_carlo(self, H):
        # 500 seeds, 5 node pairs: empirical E[W(x)W(x')] vs the covariance oracle
        g = Grid(2, 16, 1.0)
        pairs = [((3, 5), (3, 5)), ((15, 15), (15, 15)), ((4, 9), (12, 2)), ((8, 8), (9, 14)),
                 ((1, 15), (15, 1))]
        S = np.array([sample_fbs(g, FbsParams(H, s)).values for s in range(500)])
        h = g.spacing
        for a, b in pairs:
            prod = S[:, a[0], a[1]] * S[:, b[0], b[1]]
            want = fbs_covariance(np.array(a) * h, np.array(b) * h, H)
            se = prod.std(ddof=1) / np.sqrt(len(prod))
            assert abs(prod.mean() - want) <= 3 * se

    def test_spectral_approx_above_limit(self):
        g = Grid(2, 128, 1.0)
        v = sample_fbs(g, FbsParams(0.5, 1, "spectral_approx")).values
        assert np.all(np.isfinite(v))
        assert v[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_spectral_far_corner_variance(self):
        # documented bias: normalised to match the exact variance at the far corner
        g = Grid(1, 64, 1.0)
        far = np.array([sample_fbs(g, FbsParams(0.5, s, "spectral_approx")).values[-1]
                        for s in range(400)])
        want = fbs_covariance([63 / 64], [63 / 64], 0.5)
        assert np.mean(far**2) == pytest.approx(want, rel=0.25)

    def test_bad_params(self):
        with pytest.raises(ParameterError):
            FbsParams(1.2)
        with pytest.raises(ParameterError):
            FbsParams(0.5, -1)
        with pytest.raises(ParameterError):
            FbsParams(0.5, 0, "fft")


class TestCuttingFunction:
    def setup_method(self):
        self.g = Grid(2, 64, 1.0)
        self.spec = CutoffSpec(0.1, 0.3, (0.5, 0.5))
        self.zeta = cutting_function(self.g, self.spec).values
        x1, x2 = self.g.mesh()
        self.r = np.hypot(x1 - 0.5, x2 - 0.5)

    def test_one_inside_inner_ball(self):
        assert np.all(self.zeta[self.r < 0.1] == 1.0)

    def test_zero_outside_outer_ball(self):
        assert np.all(self.zeta[self.r > 0.3] == 0.0)

    def test_bounds(self):
        assert self.zeta.min() >= 0.0 and self.zeta.max() <= 1.0

    def test_monotone_along_ray(self):
        ray = self.zeta[32, 32:]
        assert np.all(np.diff(ray) <= 1e-15)

    def test_midpoint_is_half(self):
        # indicator of the midway ball convolved with a symmetric kernel: ~1/2 at r_mid
        g = Grid(1, 1024, 1.0)
        z = cutting_function(g, CutoffSpec(0.1, 0.3, (0.5,))).values
        assert z[int(round(0.7 * 1024))] == pytest.approx(0.5, abs=0.01)

    def test_one_dimensional_profile_matches_direct_convolution(self):
        g = Grid(1, 256, 1.0)
        spec = CutoffSpec(0.1, 0.3, (0.5,))
        z = cutting_function(g, spec).values
        x = g.coords()
        ind = (np.abs(x - 0.5) < 0.2).astype(float)
        h = g.spacing
        r = int(np.ceil(0.1 / h))
        j = np.arange(-r, r + 1)
        u2 = (j * h / 0.1) ** 2
        w = np.where(u2 < 1, np.exp(-1 / np.maximum(1 - u2, 1e-300)), 0.0)
        w /= w.sum()
        direct = np.array([sum(w[k] * ind[(i - j[k]) % 256] for k in range(len(j)))
                           for i in range(256)])
        band = (np.abs(x - 0.5) > 0.1) & (np.abs(x - 0.5) < 0.3)
        assert np.allclose(z[band], np.clip(direct[band], 0, 1), atol=1e-12)

    def test_resolution_error(self):
        with pytest.raises(ResolutionError):
            cutting_function(Grid(2, 16, 1.0), CutoffSpec(0.2, 0.3, (0.5, 0.5)))

    def test_must_fit_in_box(self):
        with pytest.raises(ParameterError):
            cutting_function(Grid(2, 64, 1.0), CutoffSpec(0.1, 0.3, (0.25, 0.5)))

    def test_radii_order(self):
        with pytest.raises(ParameterError):
            CutoffSpec(0.3, 0.1, (0.5,))


class TestMollify:
    def test_constant_preserved(self):
        g = Grid(2, 32)
        f = ScalarField(g, np.full(g.shape, 2.5))
        out = mollify(f, 4 * g.spacing).values
        assert np.allclose(out, 2.5, rtol=0, atol=1e-14)

    def test_sup_nonincrease(self):
        g = Grid(2, 32)
        f = VectorField(g, np.random.default_rng(0).normal(size=(2, 32, 32)))
        assert mollify(f, 3 * g.spacing).sup() <= f.sup()

    def test_holder_error_bound(self):
        g = Grid(1, 512, 1.0)
        x = g.coords()
        f = ScalarField(g, np.abs(x - 0.5) ** 0.5)
        for eps in (0.02, 0.05, 0.1):
            err = np.max(np.abs(mollify(f, eps).values - f.values))
            assert err <= 1.0 * eps**0.5  # [sqrt]_{1/2} = 1

    def test_unresolved_radius_warns(self):
        g = Grid(1, 32)
        f = ScalarField(g, np.sin(g.coords()))
        with pytest.warns(UserWarning):
            out = mollify(f, g.spacing)
        assert out is f

    @given(st.integers(0, 31), st.integers(0, 31), st.integers(0, 1000))
    def test_shift_equivariance_exact(self, s1, s2, seed):
        g = Grid(2, 32)
        v = np.random.default_rng(seed).normal(size=g.shape)
        a = np.roll(mollify(ScalarField(g, v), 3 * g.spacing).values, (s1, s2), (0, 1))
        b = mollify(ScalarField(g, np.roll(v, (s1, s2), (0, 1))), 3 * g.spacing).values
        assert np.array_equal(a, b)

    def test_linear(self):
        g = Grid(1, 64)
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(2, 64))
        m = lambda v: mollify(ScalarField(g, v), 5 * g.spacing).values  # noqa: E731
        assert np.allclose(m(2 * a - 3 * b), 2 * m(a) - 3 * m(b), atol=1e-13)

    def test_kernel_normalised(self):
        offs, w = bump_kernel(Grid(3, 16), 0.9)
        assert w.sum() == pytest.approx(1.0, abs=1e-15)
        assert np.all(w > 0)


class TestMakeInitial:
    def test_zero_potential(self):
        g = Grid(2, 16)
        phi = make_initial(g, "potential", {"psi": np.zeros(g.shape)})
        assert np.all(phi.components == 0.0)

    def test_potential_is_curl_free(self):
        g = Grid(2, 32)
        psi = np.random.default_rng(2).normal(size=g.shape)
        assert curl_defect(make_initial(g, "potential", {"psi": psi})) <= 1e-10

    def test_fbs_cutoff_support_and_curl(self):
        g = Grid(2, 64, 1.0)
        spec = CutoffSpec(0.1, 0.25, (0.5, 0.5))
        x1, x2 = g.mesh()
        outside = np.hypot(x1 - 0.5, x2 - 0.5) >= 0.25
        for s in range(5):
            phi = make_initial(g, "fbs_cutoff", dict(hurst=0.5, seed=s, cutoff=spec))
            assert np.all(phi.components[:, outside] == 0.0)
            assert curl_defect(phi) > 0

    def test_fbs_cutoff_holder(self):
        g = Grid(2, 64, 1.0)
        spec = CutoffSpec(0.1, 0.25, (0.5, 0.5))
        ex = []
        for s in range(10):
            phi = make_initial(g, "fbs_cutoff", dict(hurst=0.5, seed=s, cutoff=spec))
            ex += [estimate_holder(phi.component(i)).exponent for i in range(2)]
        assert 0.35 <= np.mean(ex) <= 0.65

    def test_components_independent(self):
        g = Grid(2, 16, 1.0)
        phi = make_initial(g, "fbs_cutoff", dict(hurst=0.5, seed=0,
                                                 cutoff=CutoffSpec(0.1, 0.45, (0.5, 0.5))))
        assert not np.array_equal(phi.components[0], phi.components[1])

    def test_custom_and_unknown(self):
        g = Grid(1, 16)
        v = np.arange(16.0)[None]
        assert np.array_equal(make_initial(g, "custom", {"values": v}).components, v)
        with pytest.raises(ParameterError):
            make_initial(g, "random", {})
