import json
import math
from pathlib import Path

import numpy as np
import pytest

from fracreach.dynamics import (
    Scenario, Trajectory, contraction_estimate, delayed_sample, eval_forcing_selection, eval_g, eval_h,
    fixed_point_solve, forcing_bound, forcing_integral, free_evolution, load_scenario, mild_solution,
    residual_check, save_scenario, scale_for_contraction, selection_path, terminal_error, terminal_functional,
)
from fracreach.errors import DelayViolation, DomainError, NonConvergenceError
from fracreach.fracops import bound_check_lemma25
from fracreach.grammian import ControlPair, control_law

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
SQRT_2_OVER_PI = 0.79788456080286535588


def linear_trajectory(scen, s0):
    return Trajectory(scen.grid, scen.grid.nodes[:, None] * s0[None, :])


def constant_trajectory(scen, s):
    return Trajectory(scen.grid, np.tile(s, (len(scen.grid), 1)))


@pytest.fixture(scope="module")
def section4():
    return load_scenario(SCENARIOS / "section4.json")


class TestScenario:
    def test_defaults(self):
        s = Scenario()
        assert (s.n_modes, s.alpha, s.sigma, s.b1) == (16, 0.5, "sin", "section4")
        assert s.lambdas == tuple(10.0**-k for k in range(7))

    def test_json_round_trip(self, tmp_path, section4):
        save_scenario(section4, tmp_path / "s.json")
        back = load_scenario(tmp_path / "s.json")
        assert back.to_dict() == section4.to_dict()

    def test_unknown_field(self):
        with pytest.raises(DomainError):
            Scenario.from_dict({"alpha": 0.5, "bogus": 1})

    def test_bad_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(DomainError):
            load_scenario(p)
        p.write_text(json.dumps([1, 2]))
        with pytest.raises(DomainError):
            load_scenario(p)

    @pytest.mark.parametrize("tk", [0.0, 1.0, 1.5])
    def test_nonlocal_times_inside(self, tk):
        with pytest.raises(DomainError):
            Scenario(h_spec=((0.5, tk),))

    def test_future_delay_rejected(self):
        with pytest.raises(DelayViolation):
            Scenario(sigma="scaled:1.5")

    @pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(q=1.0), dict(p=1.0), dict(lam=0.0),
                                    dict(lambdas=(1.0, 2.0)), dict(selection="any"), dict(coupling="x"),
                                    dict(kernel="nope"), dict(band=(2.0, 1.0)), dict(n_modes=1)])
    def test_invalid_fields(self, kw):
        with pytest.raises(DomainError):
            Scenario(**kw)

    def test_free_target(self):
        s = Scenario(n_modes=4, u0=[1.0, 0.5], u_target="free")
        assert np.allclose(s.target_vec, s.system.table.s[-1] * s.u0_vec)


class TestDelayedSample:
    def test_constant(self):
        scen = Scenario(n_modes=3, n_steps=32)
        s = np.array([1.0, -2.0, 0.5])
        assert np.allclose(delayed_sample(constant_trajectory(scen, s), "sin", 0.7), s, rtol=1e-15)

    def test_identity(self):
        scen = Scenario(n_modes=3, n_steps=32)
        traj = Trajectory(scen.grid, np.random.default_rng(1).standard_normal((33, 3)))
        assert np.array_equal(delayed_sample(traj, "identity", scen.grid.nodes[7]), traj.states[7])

    def test_sine_delay_at_quarter_period(self):
        scen = Scenario(n_modes=3, a=2.0, n_steps=64)
        s0 = np.array([1.0, 2.0, 3.0])
        out = delayed_sample(linear_trajectory(scen, s0), "sin", math.pi / 2)
        assert np.allclose(out, s0, atol=1e-14)

    def test_future_access(self):
        scen = Scenario(n_modes=3, n_steps=32)
        with pytest.raises(DelayViolation):
            delayed_sample(free_evolution(scen), "scaled:1.5", 0.5)

    def test_tampered_descriptor_changes_nothing(self):
        scen = Scenario(n_modes=4, n_steps=64, u0="sinx:1")
        traj = Trajectory(scen.grid, np.cumsum(np.ones((65, 4)), axis=0))
        t = scen.grid.nodes
        plain = delayed_sample(traj, "sin", t)
        clipped = delayed_sample(traj, lambda s: np.minimum(np.sin(s), s), t)
        assert np.array_equal(plain, clipped)


class TestNonlinearTerms:
    def test_g_zero_state(self):
        scen = Scenario(n_modes=6, g_scale=1.0)
        assert np.all(eval_g(0.3, np.zeros(6), scen) == 0.0)

    def test_g_constant_tan_one(self):
        scen = Scenario(n_modes=16, g_scale=1.0)
        out = eval_g(0.0, lambda x: np.full_like(x, math.tan(1.0)), scen)
        assert np.allclose(out, scen.op.project(lambda x: x), rtol=0, atol=1e-14)
        n = np.arange(1, 17)
        assert np.allclose(out, SQRT_2_OVER_PI * (np.pi / n) * (-1.0) ** (n + 1), rtol=0, atol=3e-5)

    def test_g_small_state_linearises(self):
        scen = Scenario(n_modes=8, g_scale=1.0)
        u = 1e-7 * np.random.default_rng(3).standard_normal(8)
        x = scen.op.grid()
        lin = scen.op.project_samples(x * scen.op.to_grid(u))
        assert np.allclose(eval_g(0.0, u, scen), lin, rtol=0, atol=1e-12 * np.abs(lin).max())

    def test_g_broadcasts_over_time(self):
        scen = Scenario(n_modes=4, g_scale=0.5)
        u = np.random.default_rng(4).standard_normal((5, 4))
        stacked = eval_g(0.0, u, scen)
        assert np.allclose(stacked[2], eval_g(0.0, u[2], scen))

    def test_h_zero_weights(self):
        scen = Scenario(n_modes=3, n_steps=20, h_spec=((0.0, 0.5),))
        assert np.all(eval_h(constant_trajectory(scen, np.ones(3)), scen) == 0.0)

    def test_h_constant(self):
        scen = Scenario(n_modes=3, n_steps=20, h_spec=((1.0, 0.37),))
        s = np.array([2.0, -1.0, 4.0])
        assert np.allclose(eval_h(constant_trajectory(scen, s), scen), s)

    def test_h_linear_interpolation(self):
        scen = Scenario(n_modes=2, n_steps=10, h_spec=((0.5, 0.33), (0.25, 0.71)))
        s0 = np.array([1.0, 3.0])
        assert np.allclose(eval_h(linear_trajectory(scen, s0), scen), (0.5 * 0.33 + 0.25 * 0.71) * s0, atol=1e-15)


class TestForcing:
    def test_zero_kernel(self):
        scen = Scenario(n_modes=4, n_steps=16, kernel="zero", xi="sinx:1")
        assert np.all(eval_forcing_selection(8, np.zeros(3), scen) == 0.0)

    def test_unit_kernel(self):
        scen = Scenario(n_modes=8, n_steps=16, kernel="const:1", xi="zero")
        n = np.arange(1, 9)
        ones = SQRT_2_OVER_PI * (1 - (-1.0) ** n) / n
        for k in (0, 5, 16):
            out = eval_forcing_selection(k, np.zeros(7), scen)
            assert np.allclose(out, scen.grid.nodes[k] * scen.op.project(np.ones_like), rtol=0, atol=1e-14)
            # Simpson projection of the constant at 8 panels per mode
            assert np.allclose(out, scen.grid.nodes[k] * ones, rtol=0, atol=3e-5)

    def test_control_is_subtracted(self):
        scen = Scenario(n_modes=4, n_steps=16, kernel="const:1")
        mu = np.array([1.0, 2.0, 3.0])
        diff = eval_forcing_selection(4, np.zeros(3), scen) - eval_forcing_selection(4, mu, scen)
        assert np.allclose(diff, scen.system.b1.matrix @ mu)

    def test_band_selection(self):
        lo = Scenario(n_modes=4, n_steps=16, kernel="const:1", band=(1.0, 3.0), selection="lower")
        mid = lo.with_(selection="midpoint")
        assert np.allclose(forcing_integral(mid), 2.0 * forcing_integral(lo))

    def test_bound(self, section4):
        f = forcing_integral(section4)
        omega = forcing_bound(section4)
        assert np.all(np.linalg.norm(f, axis=1) <= omega)
        assert omega > 0


class TestMildSolution:
    def test_free_evolution(self):
        scen = Scenario(n_modes=6, u0="sinx:1")
        traj = mild_solution(ControlPair.zero(scen.system), np.zeros((257, 6)), scen)
        assert np.allclose(traj.states, free_evolution(scen).states, rtol=0, atol=1e-15)

    def test_variation_of_constants(self):
        scen = Scenario(alpha=1.0, n_modes=2, n_steps=1024, b1="identity", b2="zero", u0=[1.0, 0.0])
        c = 0.7
        mu1 = np.zeros((1025, 2))
        mu1[:, 0] = c
        traj = mild_solution(ControlPair(mu1, np.zeros(2)), np.zeros((1025, 2)), scen)
        t = scen.grid.nodes
        exact = np.exp(-t) + c * (1.0 - np.exp(-t))
        assert np.max(np.abs(traj.states[:, 0] - exact)) <= 1e-6

    def test_initial_node(self, section4):
        rng = np.random.default_rng(5)
        frozen = Trajectory(section4.grid, rng.standard_normal((257, 16)))
        ctrl = ControlPair(rng.standard_normal((257, 15)), rng.standard_normal(15))
        traj = mild_solution(ctrl, selection_path(section4), section4, frozen)
        expected = section4.system.b2.matrix @ ctrl.mu2 + section4.u0_vec - eval_h(frozen, section4)
        assert np.allclose(traj.states[0], expected, rtol=0, atol=1e-13)


class TestFixedPoint:
    def test_linear_converges_fast(self):
        scen = load_scenario(SCENARIOS / "linear.json")
        traj, ctrl, diag = fixed_point_solve(scen)
        assert diag.converged and diag.iterations <= 3

    def test_linear_consistency(self, section4):
        lin = section4.with_(g_scale=0.0, h_spec=())
        traj, _, _ = fixed_point_solve(lin)
        v = selection_path(lin)
        p = terminal_functional(free_evolution(lin), v, lin)
        direct = mild_solution(control_law(lin.system, p, lin.lam), v, lin)
        assert np.max(np.abs(traj.states - direct.states)) <= 1e-8

    def test_zero_scale_is_linear(self, section4):
        a, _, _ = fixed_point_solve(section4.with_(g_scale=0.0))
        b, _, _ = fixed_point_solve(section4.with_(g_scale=0.0, sigma="identity"))
        assert np.array_equal(a.states, b.states)

    def test_geometric_decay(self, section4):
        k, ok = contraction_estimate(section4)
        assert ok
        _, _, diag = fixed_point_solve(section4)
        assert diag.converged
        assert diag.sup_changes[-1] <= section4.tol
        assert diag.observed_ratio <= k + 0.1

    def test_nonlocal_condition(self, section4):
        traj, ctrl, diag = fixed_point_solve(section4)
        lhs = traj.states[0] + diag.h_frozen
        rhs = section4.system.b2.matrix @ ctrl.mu2 + section4.u0_vec
        assert np.allclose(lhs, rhs, rtol=0, atol=1e-13)

    def test_nonconvergence_reports(self, section4):
        with pytest.raises(NonConvergenceError) as info:
            fixed_point_solve(section4.with_(max_iter=2))
        diag = info.value.diagnostics
        assert diag.iterations == 2 and not diag.converged and len(diag.sup_changes) == 2

    def test_terminal_error_shrinks(self, section4):
        errs = [terminal_error(fixed_point_solve(section4, lam)[0], section4) for lam in (1.0, 1e-2, 1e-4)]
        assert errs[0] > errs[1] > errs[2]


class TestContraction:
    def test_linear_is_zero(self):
        assert contraction_estimate(Scenario()) == (0.0, True)

    def test_half_half_example(self):
        scen = Scenario(alpha=0.5, p=0.5, a=1.0)
        l1 = 0.05
        scale = l1 / (math.pi * scen.n_modes ** (2 * (scen.p + scen.q)))
        k, ok = contraction_estimate(scen.with_(g_scale=scale))
        c = bound_check_lemma25(0.5, scen.grid, 0.5, scen.op).constant
        assert k == pytest.approx(l1 * (2.0 + 1.0 / 0.25 * c), rel=1e-12)
        assert ok == (k < 1.0)

    def test_increasing_in_scale(self):
        ks = [contraction_estimate(Scenario(g_scale=s))[0] for s in (1e-4, 1e-3, 1e-2)]
        assert ks[0] < ks[1] < ks[2]

    def test_scale_for_target(self):
        scen = Scenario()
        s = scale_for_contraction(scen, 0.5)
        assert contraction_estimate(scen.with_(g_scale=s))[0] == pytest.approx(0.5, rel=1e-12)


class TestResidual:
    def test_free_evolution_alpha_one(self):
        scen = Scenario(alpha=1.0, n_modes=2, n_steps=1024, u0=[1.0, 0.0])
        traj = free_evolution(scen)
        rep = residual_check(traj, ControlPair.zero(scen.system), np.zeros((1025, 2)), scen)
        assert list(rep.modes) == [1]
        assert rep.max <= 1e-3

    def test_constant_state_flags_imbalance(self):
        scen = Scenario(n_modes=4, n_steps=64)
        s = np.array([1.0, 0.0, 0.0, 0.0])
        rep = residual_check(constant_trajectory(scen, s), ControlPair.zero(scen.system), np.zeros((65, 4)), scen)
        assert rep.max == pytest.approx(1.0, rel=1e-14)  # |A s| on mode 1

    @pytest.mark.parametrize("alpha", [1.0, 0.5])
    def test_refinement(self, alpha):
        out = []
        for n in (256, 512):
            scen = Scenario(alpha=alpha, n_modes=4, n_steps=n, u0="sinx:1")
            rep = residual_check(free_evolution(scen), ControlPair.zero(scen.system), np.zeros((n + 1, 4)), scen,
                                 t_min=0.1, t_max=0.9)
            out.append(rep.max)
        assert out[1] < out[0]
