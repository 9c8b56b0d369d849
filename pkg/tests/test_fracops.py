import math

import numpy as np
import pytest

from fracreach.fracops import (
    a_t_alpha_apply, bound_check_lemma25, caputo_derivative, frac_integral, propagator_table, s_alpha_apply,
    s_symbol, t_alpha_apply, t_symbol,
)
from fracreach.quadrature import TimeGrid
from fracreach.special_fn import density_laplace
from fracreach.spectral import SpectralOperator, unit_mode

# Oracle values from mpmath at 30 digits
INV_GAMMA_1_5 = 1.1283791670955125739
INV_GAMMA_2_5 = 0.75225277806367504926
TWO_INV_GAMMA_2_5 = 1.5045055561273500985
INV_SQRT_2E = 0.42888194248035339824
INV_GAMMA_HALF = 0.56418958354775628695


class TestFracIntegral:
    def test_alpha_one_constant(self):
        g = TimeGrid(1.5, 20)
        assert np.allclose(frac_integral(np.ones(21), g, 1.0), g.nodes, rtol=1e-14)

    def test_half_constant(self):
        g = TimeGrid(1.0, 64)
        assert frac_integral(np.ones(65), g, 0.5)[-1] == pytest.approx(INV_GAMMA_1_5, abs=1e-10)

    def test_half_linear(self):
        g = TimeGrid(1.0, 64)
        out = frac_integral(g.nodes, g, 0.5)
        assert out[0] == 0.0
        assert out[-1] == pytest.approx(INV_GAMMA_2_5, abs=1e-10)

    def test_sample_count(self):
        with pytest.raises(ValueError):
            frac_integral(np.ones(3), TimeGrid(1.0, 4), 0.5)


class TestCaputo:
    @pytest.mark.parametrize("alpha", [0.2, 0.5, 0.9, 1.0])
    def test_constant(self, alpha):
        g = TimeGrid(1.0, 100)
        assert np.max(np.abs(caputo_derivative(np.full(101, 3.7), g, alpha))) <= 1e-12

    def test_linear(self):
        g = TimeGrid(1.0, 512)
        assert caputo_derivative(g.nodes, g, 0.5)[-1] == pytest.approx(INV_GAMMA_1_5, abs=5e-3)

    def test_quadratic(self):
        g = TimeGrid(1.0, 512)
        assert caputo_derivative(g.nodes**2, g, 0.5)[-1] == pytest.approx(TWO_INV_GAMMA_2_5, abs=5e-3)

    def test_vector_samples(self):
        g = TimeGrid(1.0, 32)
        f = np.stack([g.nodes, g.nodes**2], axis=1)
        out = caputo_derivative(f, g, 0.5)
        assert np.allclose(out[:, 0], caputo_derivative(g.nodes, g, 0.5))
        assert np.allclose(out[:, 1], caputo_derivative(g.nodes**2, g, 0.5))

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
    @pytest.mark.parametrize("f", [np.sin, lambda t: t * np.exp(t)], ids=["sin", "texp"])
    def test_fundamental_theorem(self, alpha, f):
        g = TimeGrid(1.0, 256)
        fv = f(g.nodes)
        back = caputo_derivative(frac_integral(fv, g, alpha), g, alpha)
        assert np.max(np.abs(back - fv)) <= g.h


class TestPropagators:
    op = SpectralOperator(4)

    def test_s_identity_at_zero(self):
        c = np.array([1.0, -2.0, 3.0, 0.5])
        assert np.array_equal(s_alpha_apply(0.0, c, self.op, 0.6), c)

    def test_s_exponential(self):
        assert s_alpha_apply(1.0, unit_mode(4, 2), self.op, 1.0)[1] == pytest.approx(math.exp(-4), abs=1e-15)

    def test_s_density_cross_check(self):
        assert s_alpha_apply(1.0, unit_mode(4, 1), self.op, 0.5)[0] == pytest.approx(density_laplace(0.5, 1.0), abs=1e-6)

    @pytest.mark.parametrize("alpha", [0.3, 0.7])
    def test_t_at_zero(self, alpha):
        assert np.allclose(t_symbol(0.0, self.op, alpha), 1.0 / math.gamma(alpha), rtol=1e-15)

    def test_t_exponential(self):
        assert t_alpha_apply(0.5, unit_mode(4, 1), self.op, 1.0)[0] == pytest.approx(math.exp(-0.5), abs=1e-15)

    def test_t_bounded(self):
        c = np.ones(4)
        assert np.all(np.abs(t_alpha_apply(1.0, c, self.op, 0.5)) <= INV_GAMMA_HALF)

    def test_at_zero_state(self):
        assert np.all(a_t_alpha_apply(0.7, np.zeros(4), self.op, 0.5) == 0.0)

    def test_at_exponential(self):
        assert a_t_alpha_apply(1.0, unit_mode(4, 1), self.op, 1.0)[0] == pytest.approx(-math.exp(-1), abs=1e-15)

    @pytest.mark.parametrize("p", [0.2, 0.5, 0.7])
    def test_at_factorisation(self, p):
        # A T = -A^(1-p) A^p T on the diagonal
        c = np.array([0.3, -1.0, 2.0, 0.7])
        tt = t_alpha_apply(0.4, c, self.op, 0.6)
        split = self.op.frac_power_apply(self.op.frac_power_apply(tt, 1 - p, 1), p, 1)
        assert np.allclose(a_t_alpha_apply(0.4, c, self.op, 0.6), -split, rtol=1e-14)

    def test_negative_time(self):
        with pytest.raises(ValueError):
            s_symbol(-0.1, self.op, 0.5)

    def test_table_lags(self):
        g = TimeGrid(1.0, 8)
        tab = propagator_table(g, self.op, 0.5)
        assert tab.s.shape == (9, 4)
        assert np.allclose(tab.s[3], s_symbol(g.nodes[3], self.op, 0.5))
        assert np.allclose(tab.at, self.op.eigenvalues * tab.t)

    @pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8, 1.0])
    def test_uniform_bounds(self, alpha):
        op = SpectralOperator(16)
        t = TimeGrid(2.0, 200).nodes
        assert np.all(np.abs(s_symbol(t, op, alpha)) <= 1 + 1e-9)
        assert np.all(np.abs(t_symbol(t, op, alpha)) <= 1 / math.gamma(alpha) + 1e-9)

    @pytest.mark.parametrize("alpha", [0.8, 0.9, 1.0])
    def test_strong_continuity(self, alpha):
        op = SpectralOperator(16)
        c = op.modes ** -4.0

        def max_jump(n):
            return np.max(np.abs(np.diff(s_alpha_apply(TimeGrid(1.0, n).nodes, c, op, alpha), axis=0)))

        jumps = [max_jump(n) for n in (64, 128, 256)]
        assert jumps[1] / jumps[0] <= 0.6 and jumps[2] / jumps[1] <= 0.6

    def test_semigroup_at_alpha_one(self):
        op = SpectralOperator(8)
        c = np.linspace(1, 2, 8)
        for t, s in [(0.1, 0.2), (0.5, 0.25), (1.0, 0.75)]:
            lhs = s_alpha_apply(t + s, c, op, 1.0)
            rhs = s_alpha_apply(t, s_alpha_apply(s, c, op, 1.0), op, 1.0)
            assert np.allclose(lhs, rhs, rtol=0, atol=1e-10)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.9])
    @pytest.mark.parametrize("t", [0.25, 0.5, 1.0])
    def test_density_cross_validation(self, alpha, t):
        diag = s_symbol(t, self.op, alpha)
        for n in range(1, 5):
            assert diag[n - 1] == pytest.approx(density_laplace(alpha, n**2 * t**alpha), abs=1e-6)


class TestBoundCheck:
    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.9])
    def test_q_zero(self, alpha):
        rep = bound_check_lemma25(alpha, TimeGrid(1.0, 128), 0.0, SpectralOperator(16))
        assert rep.bounded
        assert rep.constant <= 1 / math.gamma(alpha) + 1e-9

    def test_analytic_semigroup_constant(self):
        rep = bound_check_lemma25(1.0, TimeGrid(1.0, 400), 0.5, SpectralOperator(16))
        assert rep.bounded
        assert rep.constant == pytest.approx(INV_SQRT_2E, rel=0.05)
        # where n^2 t sweeps past the maximiser 1/2 the profile is flat
        window = (rep.times >= 0.005) & (rep.times <= 0.1)
        assert np.all(np.abs(rep.profile[window] / INV_SQRT_2E - 1) <= 0.05)

    def test_half_half_bounded(self):
        rep = bound_check_lemma25(0.5, TimeGrid(1.0, 256), 0.5, SpectralOperator(16))
        assert rep.bounded and np.isfinite(rep.constant) and rep.m_q > 0
