"""Batch runner for the module invariants, used by ``fracreach invariants``.

Each check returns (passed, detail). Sizes are the scenario defaults
(N = 16, n_steps = 256) unless a check needs something specific.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DelayViolation, DomainError
from .fracops import caputo_derivative, frac_integral, s_symbol, t_symbol
from .grammian import ControlOperator, ControlSystem, Gramian, lemma26_decay, resolvent_apply
from .quadrature import TimeGrid, build_weights
from .special_fn import density_laplace, density_moment, mittag_leffler, wright_density
from .spectral import SpectralOperator


@dataclass(frozen=True)
class CheckResult:
    module: str
    name: str
    passed: bool
    detail: str
    seconds: float


# -- special_fn --------------------------------------------------------------


def _sf_normalization():
    errs = [abs(density_laplace(a, 0.0) - 1.0) for a in (0.3, 0.5, 0.7, 0.9)]
    return max(errs) <= 1e-6, f"max |int zeta - 1| = {max(errs):.2e}"


def _sf_laplace():
    errs = [abs(density_laplace(a, z) - mittag_leffler(-z, a)) for a in (0.3, 0.5, 0.7, 0.9) for z in (0.1, 1, 5, 10)]
    return max(errs) <= 1e-6, f"max Laplace mismatch = {max(errs):.2e}"


def _sf_moment():
    errs = [abs(density_moment(a) - 1.0 / math.gamma(1 + a)) for a in (0.3, 0.5, 0.7, 0.9)]
    return max(errs) <= 1e-5, f"max first-moment error = {max(errs):.2e}"


def _sf_nonneg():
    worst = min(float(np.min(wright_density(np.linspace(0, 40, 401), a))) for a in (0.3, 0.5, 0.7, 0.9))
    return worst >= -1e-12, f"min density = {worst:.2e}"


def _sf_monotone():
    x = np.linspace(0, 100, 2001)
    ok = True
    for a in (0.1, 0.3, 0.5, 0.7, 0.9, 1.0):
        e = mittag_leffler(-x, a)
        ok &= bool(np.all(e > 0) and np.all(np.diff(e) < 0))
    return ok, "E_alpha(-x) positive and decreasing on [0, 100]"


def _sf_recurrence():
    rng = np.random.default_rng(7)
    worst = 0.0
    n = 0
    while n < 200:
        a, b, z = rng.uniform(0.1, 1.0), rng.uniform(0.1, 2.0), rng.uniform(-50, 5)
        if z > 0 and z ** (1 / a) > 50:
            continue  # E grows like exp(z^(1/a)); keep to values of moderate size
        lhs = mittag_leffler(z, a, b)
        rhs = z * mittag_leffler(z, a, a + b) + 1.0 / math.gamma(b)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
        n += 1
    return worst <= 1e-9, f"max recurrence defect (relative above 1) = {worst:.2e}"


# -- spectral ----------------------------------------------------------------


def _sp_roundtrip():
    op = SpectralOperator(16)
    c = np.random.default_rng(1).normal(size=16)
    c[8:] = 0.0
    err = np.abs(op.project(lambda x: op.reconstruct(c, x)) - c).max()
    return err <= 1e-8, f"round-trip error = {err:.2e}"


def _sp_monotone():
    op = SpectralOperator(16)
    c = np.random.default_rng(2).normal(size=(50, 16))
    qs = np.linspace(0, 0.95, 12)
    norms = np.stack([op.norm_q(c, q) for q in qs])
    return bool(np.all(np.diff(norms, axis=0) >= -1e-12)), "norm_q non-decreasing in q"


def _sp_inverse():
    op = SpectralOperator(16)
    c = np.random.default_rng(3).normal(size=16)
    err = np.abs(op.frac_power_apply(op.frac_power_apply(c, 0.37, -1), 0.37, 1) - c).max()
    nrm = op.inverse_power_norm(0.37)
    return err <= 1e-13 and nrm == 1.0, f"A^q A^-q defect {err:.1e}, ||A^-q|| = {nrm}"


# -- fracops -----------------------------------------------------------------


def _fo_bounds():
    op = SpectralOperator(32)
    t = TimeGrid(1.0, 256).nodes
    worst = 0.0
    for a in (0.3, 0.5, 0.7, 0.9, 1.0):
        worst = max(worst, float(np.abs(s_symbol(t, op, a)).max()) - 1.0,
                    float(np.abs(t_symbol(t, op, a)).max()) - 1.0 / math.gamma(a))
    return worst <= 1e-9, f"max excess over the M = 1 bounds = {worst:.2e}"


def _fo_continuity():
    op = SpectralOperator(16)
    c = op.modes**-4.0  # a smooth state (in D(A))
    out = []
    for a in (0.8, 0.9, 1.0):
        jumps = [np.abs(np.diff(s_symbol(TimeGrid(1.0, n).nodes, op, a) * c, axis=0)).max() for n in (128, 256)]
        out.append(jumps[1] / jumps[0])
    return max(out) <= 0.6, "max-jump ratios under refinement " + ", ".join(f"{r:.3f}" for r in out)


def _fo_semigroup():
    op = SpectralOperator(16)
    err = max(np.abs(s_symbol(t + s, op, 1.0) - s_symbol(t, op, 1.0) * s_symbol(s, op, 1.0)).max()
              for t in (0.1, 0.4) for s in (0.05, 0.3))
    return err <= 1e-10, f"semigroup defect at alpha = 1: {err:.2e}"


def _fo_fundamental():
    # f(0) = 0 keeps I^alpha f free of the t^alpha term the L1 scheme cannot resolve
    g = TimeGrid(1.0, 512)
    err = max(np.abs(caputo_derivative(frac_integral(f, g, a), g, a) - f)[1:].max()
              for f in (np.sin(g.nodes), g.nodes * np.exp(g.nodes)) for a in (0.3, 0.5, 0.8))
    return err <= g.h, f"|D I f - f| = {err:.2e} (h = {g.h:.2e})"


def _fo_density():
    op = SpectralOperator(4)
    err = max(abs(s_symbol(t, op, 0.5)[n - 1] - density_laplace(0.5, n * n * t**0.5))
              for n in range(1, 5) for t in (0.25, 0.5, 1.0))
    return err <= 1e-6, f"propagator vs density Laplace transform: {err:.2e}"


# -- quadrature ----------------------------------------------------------------


def _qd_exact():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        a, c0, c1 = rng.uniform(0.05, 1.0), rng.normal(), rng.normal()
        g = TimeGrid(rng.uniform(0.2, 3.0), 64)
        w = build_weights(a, g).weights
        t = g.nodes
        exact = c0 * t**a / a + c1 * t ** (a + 1) / (a * (a + 1))
        worst = max(worst, float(np.abs(w @ (c0 + c1 * t) - exact).max()))
    return worst <= 1e-12, f"max linear-exactness error = {worst:.2e}"


def _qd_positive():
    ok = all(np.all(build_weights(a, TimeGrid(1.0, 200)).weights >= 0) for a in (0.1, 0.5, 0.9, 1.0))
    return bool(ok), "all weights non-negative"


def _qd_order():
    vals = []
    for n in (64, 128, 256):
        g = TimeGrid(1.0, n)
        vals.append(build_weights(0.5, g).weights[-1] @ np.sin(g.nodes))
    order = math.log2(abs(vals[0] - vals[1]) / abs(vals[1] - vals[2]))
    return order >= 1.8, f"observed order {order:.2f}"


# -- grammian ----------------------------------------------------------------


def _gr_psd():
    op = SpectralOperator(16)
    b = ControlOperator.section4(16)
    for a in (0.3, 0.5, 1.0):
        cs = ControlSystem(op, a, TimeGrid(1.0, 256), b, b)
        cs.gamma1, cs.gamma2  # constructor enforces symmetry and PSD
    return True, "Gamma_1, Gamma_2 symmetric PSD for alpha in {0.3, 0.5, 1}"


def _gr_resolvent():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        m = rng.normal(size=(12, 12))
        m = m @ m.T
        g = Gramian(m / np.linalg.eigvalsh(m)[-1], "gamma1", 1.0, 0.5)  # Grammian-sized: ||Gamma|| = 1
        v = rng.normal(size=12)
        lam = 10.0 ** rng.uniform(-6, 0)
        x = resolvent_apply(lam, g, v)
        worst = max(worst, np.linalg.norm(lam * x + g.matrix @ x - v) / np.linalg.norm(v))
    return worst <= 1e-10, f"max relative resolvent residual = {worst:.2e}"


def _gr_diagonal():
    # Hadamard assembly against a per-mode loop over the same product rule
    op = SpectralOperator(6)
    grid = TimeGrid(1.0, 128)
    b = ControlOperator(np.diag([1.0, 0.5, 2.0, 1.5, 0.7, 1.2]))
    g = ControlSystem(op, 0.5, grid, b, b).gamma1.matrix
    off = np.abs(g - np.diag(np.diag(g))).max()
    w = build_weights(0.5, grid).weights[-1]
    worst = 0.0
    for n in range(1, 7):
        lag = grid.a - grid.nodes
        vals = [float(mittag_leffler(-(n * n) * x**0.5, 0.5, 0.5)) ** 2 for x in lag]
        ref = sum(wj * vj for wj, vj in zip(w, vals)) * b.matrix[n - 1, n - 1] ** 2
        worst = max(worst, abs(g[n - 1, n - 1] - ref))
    return off == 0.0 and worst <= 1e-8, f"off-diagonal {off:.1e}, diagonal vs per-mode sum {worst:.2e}"


def _gr_monotone():
    op = SpectralOperator(8)
    b = ControlOperator.section4(8)
    g = ControlSystem(op, 0.5, TimeGrid(1.0, 256), b, b).gamma1
    lams = 10.0 ** -np.linspace(0, 6, 25)
    seq = lemma26_decay(g, np.random.default_rng(6).normal(size=(10, 8)), lams).sequences
    return bool(np.all(np.diff(seq, axis=1) <= 1e-15)), "lambda ||R(lambda) x|| non-increasing"


# -- dynamics ----------------------------------------------------------------


def _dyn_scenario(**kw):
    from .dynamics import Scenario

    base = dict(u0="sinx:1", u_target="mode:1,1", kernel="expkernel:1,1", xi="sinx:0.5",
                h_spec=((0.5, 0.3), (0.25, 0.7)))
    base.update(kw)
    return Scenario(**base)


def _dyn_nonlocal():
    from .dynamics import fixed_point_solve, scale_for_contraction

    s = _dyn_scenario()
    s = s.with_(g_scale=scale_for_contraction(s, 0.5))
    traj, c, d = fixed_point_solve(s)
    err = np.abs(traj.states[0] + d.h_frozen - s.system.b2.matrix @ c.mu2 - s.u0_vec).max()
    return err <= 1e-13, f"|u(0) + h(u) - B2 mu2 - u0| = {err:.2e}"


def _dyn_picard():
    from .dynamics import fixed_point_solve, scale_for_contraction

    s = _dyn_scenario()
    s = s.with_(g_scale=scale_for_contraction(s, 0.5))
    _, _, d = fixed_point_solve(s, 1e-3)
    r = d.observed_ratio
    return r <= d.contraction_estimate_K + 0.1, f"observed ratio {r:.3f}, K = {d.contraction_estimate_K:.3f}"


def _dyn_linear():
    from .dynamics import fixed_point_solve, mild_solution, selection_path, terminal_functional, free_evolution
    from .grammian import control_law

    s = _dyn_scenario(h_spec=())
    traj, _, d = fixed_point_solve(s)
    v = selection_path(s)
    c = control_law(s.system, terminal_functional(free_evolution(s), v, s), s.lam)
    direct = mild_solution(c, v, s)
    err = np.abs(traj.states - direct.states).max()
    return err <= 1e-8 and d.iterations <= 3, f"{d.iterations} iterations, deviation from direct solve {err:.2e}"


def _dyn_delay():
    from .dynamics import Scenario, fixed_point_solve, scale_for_contraction

    s = _dyn_scenario()
    s = s.with_(g_scale=scale_for_contraction(s, 0.5))
    try:
        s.with_(sigma="scaled:1.5")
        tampered = False
    except DelayViolation:
        tampered = True
    from .dynamics import delayed_sample

    traj = fixed_point_solve(s)[0]
    t = s.grid.nodes
    a = delayed_sample(traj, s.sigma_fn(), t)
    b = delayed_sample(traj, lambda t: np.minimum(np.sin(t), t), t)
    return tampered and np.array_equal(a, b), "future-reaching delay rejected; min(sigma, t) reproduces output"


CHECKS: dict[str, list[tuple[str, Callable]]] = {
    "special_fn": [
        ("normalization", _sf_normalization), ("laplace_identity", _sf_laplace), ("first_moment", _sf_moment),
        ("nonnegativity", _sf_nonneg), ("complete_monotonicity", _sf_monotone), ("recurrence", _sf_recurrence),
    ],
    "spectral": [("round_trip", _sp_roundtrip), ("norm_monotone", _sp_monotone), ("power_inverse", _sp_inverse)],
    "fracops": [
        ("propagator_bounds", _fo_bounds), ("strong_continuity", _fo_continuity), ("semigroup_alpha1", _fo_semigroup),
        ("fundamental_theorem", _fo_fundamental), ("density_crosscheck", _fo_density),
    ],
    "quadrature": [("linear_exactness", _qd_exact), ("positivity", _qd_positive), ("refinement_order", _qd_order)],
    "grammian": [
        ("symmetric_psd", _gr_psd), ("resolvent_identity", _gr_resolvent), ("diagonal_decomposition", _gr_diagonal),
        ("lambda_monotone", _gr_monotone),
    ],
    "dynamics": [
        ("nonlocal_condition", _dyn_nonlocal), ("picard_ratio", _dyn_picard), ("linear_consistency", _dyn_linear),
        ("delay_sanity", _dyn_delay),
    ],
}
SUITES = ("all", *CHECKS)


def run_checks(selector: str) -> list[CheckResult]:
    if selector not in SUITES:
        raise DomainError(f"unknown suite {selector!r}; choose from {', '.join(SUITES)}")
    modules = list(CHECKS) if selector == "all" else [selector]
    out = []
    for mod in modules:
        for name, fn in CHECKS[mod]:
            t0 = time.perf_counter()
            try:
                ok, detail = fn()
            except Exception as exc:  # a crash is a failed check, not a crashed suite
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            out.append(CheckResult(mod, name, bool(ok), detail, time.perf_counter() - t0))
    return out
