"""Scenario data, the nonlinear ingredients and the Picard fixed-point solver.

The state equation is the mild-solution identity

    u(t) = S(t)[B2 mu2 + u0 - h(u) - g(0, u(sigma(0)))] + g(t, u(sigma(t)))
           + int_0^t (t-s)^(alpha-1) {A T(t-s) g(s, u(sigma(s)))
                                      + T(t-s) [v(delta(s)) + B1 mu1(s)]} ds

discretised with the product-trapezoid weights and the propagator lag
tables. One call of :func:`mild_solution` is one application of the
fixed-point map at a frozen iterate; :func:`fixed_point_solve` iterates it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from . import descriptors
from .errors import DelayViolation, DomainError, NonConvergenceError
from .fracops import bound_check_lemma25
from .grammian import COUPLINGS, ControlOperator, ControlPair, ControlSystem, control_law
from .quadrature import TimeGrid
from .special_fn import FractionalOrder
from .spectral import SobolevIndex, SpectralOperator

DEFAULT_LAMBDAS = [10.0**-k for k in range(7)]
SELECTIONS = ("midpoint", "lower", "upper")


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------


def _state(spec, op: SpectralOperator) -> np.ndarray:
    """Coefficient list (padded/truncated to N) or an x-function descriptor."""
    if isinstance(spec, str):
        return op.project(lambda x: descriptors.x_function(spec)(x))
    c = np.zeros(op.n_modes)
    v = np.asarray(spec, dtype=float).ravel()
    c[: min(v.size, op.n_modes)] = v[: op.n_modes]
    return c


@dataclass(frozen=True, eq=False)
class Scenario:
    """Full problem datum. Build from JSON with :meth:`from_dict`.

    ``u_target`` may be the string "free" for the free-evolution endpoint
    S(a) u0, which is reachable with zero control when g = h = v = 0.
    """

    alpha: float = 0.5
    a: float = 1.0
    n_modes: int = 16
    n_steps: int = 256
    g_scale: float = 0.0
    h_spec: tuple = ()
    kernel: str = "zero"
    xi: str = "zero"
    band: tuple = (1.0, 1.0)
    selection: str = "midpoint"
    sigma: str = "sin"
    delta: str = "sin"
    b1: Any = "section4"
    b2: Any = "section4"
    u0: Any = "zero"
    u_target: Any = "zero"
    lam: float = 1e-2
    lambdas: tuple = tuple(DEFAULT_LAMBDAS)
    p: float = 0.5
    q: float = 0.1
    tol: float = 1e-8
    max_iter: int = 200
    coupling: str = "joint"
    name: str = "scenario"

    def __post_init__(self) -> None:
        FractionalOrder(self.alpha)
        SobolevIndex(self.q)
        if not 0.0 < self.p < 1.0:
            raise DomainError("p must lie in (0, 1)")
        if not self.lam > 0 or any(l <= 0 for l in self.lambdas):
            raise DomainError("lambda values must be positive")
        if any(np.diff(self.lambdas) >= 0):
            raise DomainError("lambda list must be strictly decreasing")
        if self.selection not in SELECTIONS:
            raise DomainError(f"selection must be one of {SELECTIONS}")
        if self.coupling not in COUPLINGS:
            raise DomainError(f"coupling must be one of {COUPLINGS}")
        if len(self.band) != 2 or self.band[0] > self.band[1]:
            raise DomainError("band must be [lo, hi] with lo <= hi")
        object.__setattr__(self, "h_spec", tuple(tuple(map(float, ck)) for ck in self.h_spec))
        for c, tk in self.h_spec:
            if not 0.0 < tk < self.a:
                raise DomainError(f"nonlocal time {tk} must lie in (0, a)")
        object.__setattr__(self, "lambdas", tuple(float(l) for l in self.lambdas))
        # build eagerly so bad descriptors fail at load time
        self.op, self.grid, self.system  # noqa: B018
        descriptors.kernel(self.kernel), descriptors.x_function(self.xi)
        self.check_delays()

    # -- derived objects ---------------------------------------------------
    @cached_property
    def op(self) -> SpectralOperator:
        return SpectralOperator(self.n_modes)

    @cached_property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.a, self.n_steps)

    @cached_property
    def system(self) -> ControlSystem:
        return ControlSystem(
            self.op, self.alpha, self.grid,
            ControlOperator.from_spec(self.b1, self.n_modes),
            ControlOperator.from_spec(self.b2, self.n_modes),
        )

    @cached_property
    def u0_vec(self) -> np.ndarray:
        return _state(self.u0, self.op)

    @cached_property
    def target_vec(self) -> np.ndarray:
        if isinstance(self.u_target, str) and self.u_target == "free":
            return self.system.table.s[-1] * self.u0_vec
        return _state(self.u_target, self.op)

    def sigma_fn(self):
        return descriptors.delay(self.sigma)

    def delta_fn(self):
        return descriptors.delay(self.delta)

    def check_delays(self) -> None:
        """|sigma(t)| <= t, |delta(t)| <= t on the grid, and no negative times."""
        t = self.grid.nodes
        for name, desc in (("sigma", self.sigma), ("delta", self.delta)):
            d = descriptors.delay(desc)(t)
            if np.any(d > t + 1e-14) or np.any(d < -1e-14):
                bad = float(t[np.argmax((d > t + 1e-14) | (d < -1e-14))])
                raise DelayViolation(f"{name} = {desc!r} leaves [0, t] at t = {bad:g}")

    def with_(self, **kw) -> "Scenario":
        return replace(self, **kw)

    # -- serialisation -----------------------------------------------------
    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown scenario fields: {sorted(unknown)}")
        d = dict(d)
        for key in ("h_spec", "lambdas", "band"):
            if key in d:
                d[key] = tuple(tuple(x) if isinstance(x, list) else x for x in d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = [list(x) if isinstance(x, tuple) else x for x in v]
            elif isinstance(v, np.ndarray):
                v = v.tolist()
            out[f.name] = v
        return out


def load_scenario(path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise DomainError("scenario file must hold a JSON object")
    try:
        return Scenario.from_dict(data)
    except TypeError as exc:
        raise DomainError(str(exc)) from exc


def save_scenario(scen: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scen.to_dict(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# trajectories and the nonlinear ingredients
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: TimeGrid
    states: np.ndarray  # (n_steps + 1, N)

    def __post_init__(self) -> None:
        s = np.asarray(self.states, dtype=float)
        if s.ndim != 2 or s.shape[0] != len(self.grid):
            raise DomainError("trajectory needs one state per grid node")
        object.__setattr__(self, "states", s)

    def at(self, t) -> np.ndarray:
        """Piecewise-linear interpolation; t may be an array."""
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-14) or np.any(t > self.grid.a * (1 + 1e-14)):
            raise DomainError("interpolation time outside [0, a]")
        pos = np.clip(t / self.grid.h, 0.0, self.grid.n_steps)
        k = np.minimum(np.floor(pos).astype(int), self.grid.n_steps - 1)
        frac = (pos - k)[..., None]
        return (1.0 - frac) * self.states[k] + frac * self.states[k + 1]

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]


def delayed_sample(traj: Trajectory, delay, t):
    """u(delay(t)); ``delay`` is a descriptor string or a callable."""
    d_fn = descriptors.delay(delay) if isinstance(delay, str) else delay
    t = np.asarray(t, dtype=float)
    d = np.asarray(d_fn(t), dtype=float)
    if np.any(d > t + 1e-14):
        raise DelayViolation("delay asks for a future state")
    if np.any(d < -1e-14):
        raise DelayViolation("delay leaves the time interval")
    return traj.at(d)


def eval_g(t, u_delayed, scen: Scenario) -> np.ndarray:
    """Projection of x arctan(scale u(x)); t is unused by the example form.

    ``u_delayed`` is a coefficient array (any leading shape) or a callable
    giving u pointwise in x.
    """
    op = scen.op
    x = op.grid()
    if callable(u_delayed):
        vals = np.broadcast_to(np.asarray(u_delayed(x), dtype=float), x.shape)
        return op.project_samples(x * np.arctan(scen.g_scale * vals))
    u = np.asarray(u_delayed, dtype=float)
    if scen.g_scale == 0.0:
        return np.zeros_like(u)
    return op.project_samples(x * np.arctan(scen.g_scale * op.to_grid(u)))


def eval_h(traj: Trajectory, scen: Scenario) -> np.ndarray:
    out = np.zeros(traj.states.shape[1])
    for c, tk in scen.h_spec:
        out += c * traj.at(tk)
    return out


def _band_factor(scen: Scenario) -> float:
    lo, hi = scen.band
    return {"midpoint": 0.5 * (lo + hi), "lower": lo, "upper": hi}[scen.selection]


def forcing_integral(scen: Scenario) -> np.ndarray:
    """Coefficients of int_0^t b(t,s) exp(xi(x, sin s)) ds at every node.

    Trapezoid on the grid nodes in [0, t], evaluated pointwise in x and then
    projected. When f_spec declares a band [lo, hi] b, the selected kernel
    is the configured multiple of b.
    """
    op, t = scen.op, scen.grid.nodes
    x = op.grid()
    b = descriptors.kernel(scen.kernel)(t[:, None], t[None, :]) * _band_factor(scen)
    xi = descriptors.x_function(scen.xi)
    e = np.exp(np.stack([xi(x, math.sin(s)) for s in t]))  # (nodes, x)
    w = np.tril(np.full((len(t), len(t)), scen.grid.h))
    w[np.arange(len(t)), np.arange(len(t))] *= 0.5
    w[:, 0] *= 0.5
    w[0, 0] = 0.0
    return op.project_samples((w * b) @ e)


def shape_control(scen: Scenario) -> np.ndarray:
    """Control coordinates mu with B1 mu closest to xi(., t) at every node."""
    op, t = scen.op, scen.grid.nodes
    xi = descriptors.x_function(scen.xi)
    coeffs = np.stack([op.project(lambda x, tt=tt: xi(x, tt)) for tt in t])
    return coeffs @ np.linalg.pinv(scen.system.b1.matrix).T


def eval_forcing_selection(t_index: int, mu1_at_t, scen: Scenario, forcing=None) -> np.ndarray:
    """v(delta(t_k)) = int_0^{t_k} b exp(xi) ds - B1 mu1(t_k) (projected)."""
    if forcing is None:
        forcing = forcing_integral(scen)
    return forcing[t_index] - scen.system.b1.matrix @ np.asarray(mu1_at_t, dtype=float)


def selection_path(scen: Scenario) -> np.ndarray:
    """The forced selection at every node, paired with the shape control."""
    f = forcing_integral(scen)
    return f - shape_control(scen) @ scen.system.b1.matrix.T


def forcing_bound(scen: Scenario) -> float:
    """sup_t ||int_0^t b exp(xi) ds||, an admissible omega."""
    return float(np.max(np.linalg.norm(forcing_integral(scen), axis=1)))


# ---------------------------------------------------------------------------
# mild solution and terminal functional
# ---------------------------------------------------------------------------


def _lagged(weights: np.ndarray, kernel: np.ndarray, phi: np.ndarray) -> np.ndarray:
    n1 = phi.shape[0]
    out = np.zeros_like(phi)
    for k in range(1, n1):
        out[k] = np.einsum("j,jn,jn->n", weights[k, : k + 1], kernel[k::-1], phi[: k + 1])
    return out


def _g_path(u: Trajectory, scen: Scenario) -> np.ndarray:
    t = scen.grid.nodes
    if scen.g_scale == 0.0:
        return np.zeros_like(u.states)
    return eval_g(t, delayed_sample(u, scen.sigma_fn(), t), scen)


def mild_solution(controls: ControlPair, v_traj, scen: Scenario, frozen: Trajectory | None = None) -> Trajectory:
    """One application of the fixed-point map at the frozen iterate."""
    sys = scen.system
    tab, w = sys.table, sys.weights.weights
    if frozen is None:
        frozen = Trajectory(scen.grid, np.zeros((len(scen.grid), scen.n_modes)))
    v = np.asarray(v_traj, dtype=float)
    g = _g_path(frozen, scen)
    base = sys.b2.matrix @ controls.mu2 + scen.u0_vec - eval_h(frozen, scen) - g[0]
    drive = v + controls.mu1 @ sys.b1.matrix.T
    conv = _lagged(w, tab.t, drive)
    if scen.g_scale != 0.0:
        conv += _lagged(w, tab.at, g)
    return Trajectory(scen.grid, tab.s * base + g + conv)


def terminal_functional(u: Trajectory, v_traj, scen: Scenario) -> np.ndarray:
    """P(u): target minus every control-free contribution to u(a)."""
    sys = scen.system
    tab, wk = sys.table, sys.weights.weights[-1]
    g = _g_path(u, scen)
    free = tab.s[-1] * (scen.u0_vec - eval_h(u, scen) - g[0]) + g[-1]
    integrand = tab.t[::-1] * np.asarray(v_traj, dtype=float) + tab.at[::-1] * g
    return scen.target_vec - free - wk @ integrand


def free_evolution(scen: Scenario) -> Trajectory:
    return Trajectory(scen.grid, scen.system.table.s * scen.u0_vec)


# ---------------------------------------------------------------------------
# fixed point
# ---------------------------------------------------------------------------


@dataclass
class FixedPointDiagnostics:
    iterations: int = 0
    sup_changes: list = field(default_factory=list)
    contraction_estimate_K: float = float("nan")
    converged: bool = False
    relaxation: float = 1.0
    h_frozen: np.ndarray | None = field(default=None, repr=False)
    terminal_P: np.ndarray | None = field(default=None, repr=False)

    @property
    def observed_ratio(self) -> float:
        """Geometric-mean contraction over the iterations with nonzero change."""
        s = [c for c in self.sup_changes if c > 0]
        if len(s) < 3:
            return 0.0
        s = s[1:]  # the first step measures distance from the start guess
        return float((s[-1] / s[0]) ** (1.0 / (len(s) - 1)))


def contraction_estimate(scen: Scenario) -> tuple[float, bool]:
    """K = L1 [M ||A^-p|| + ||A^-p|| + a^(p alpha)/(p alpha) C], C estimated empirically.

    M = 1 and ||A^-p|| = 1 in the sine basis. L1 bounds the Lipschitz
    constant of A^p g from H_q to H_q on the truncated space:
    |x| <= pi, arctan is 1-Lipschitz and A^(p+q) is at most N^(2(p+q)).
    """
    if scen.g_scale == 0.0:
        return 0.0, True
    l1 = math.pi * abs(scen.g_scale) * scen.n_modes ** (2.0 * (scen.p + scen.q))
    c = bound_check_lemma25(scen.alpha, scen.grid, 1.0 - scen.p, scen.op).constant
    pa = scen.p * scen.alpha
    k = l1 * (2.0 + scen.a**pa / pa * c)
    return k, k < 1.0


def scale_for_contraction(scen: Scenario, target_k: float) -> float:
    """arctan scale giving contraction_estimate == target_k (K is linear in it)."""
    k1, _ = contraction_estimate(scen.with_(g_scale=1.0))
    return target_k / k1


def _sup_q(diff: np.ndarray, scen: Scenario) -> float:
    return float(np.max(scen.op.norm_q(diff, scen.q)))


def fixed_point_solve(scen: Scenario, lam: float | None = None):
    """Picard iteration; returns (trajectory, controls, diagnostics).

    Raises NonConvergenceError (diagnostics attached) when the cap is hit.
    """
    lam = scen.lam if lam is None else lam
    diag = FixedPointDiagnostics(contraction_estimate_K=contraction_estimate(scen)[0])
    v = selection_path(scen)
    u = free_evolution(scen)
    theta, halved = 1.0, False
    best = math.inf
    for it in range(1, scen.max_iter + 1):
        p_vec = terminal_functional(u, v, scen)
        controls = control_law(scen.system, p_vec, lam, scen.coupling)
        new = mild_solution(controls, v, scen, u)
        change = _sup_q(new.states - u.states, scen)
        diag.iterations = it
        diag.sup_changes.append(change)
        if change <= scen.tol:
            diag.converged = True
            diag.relaxation = theta
            diag.h_frozen = eval_h(u, scen)
            diag.terminal_P = p_vec
            return new, controls, diag
        if not math.isfinite(change) or (it > 3 and change > 10.0 * best):
            if halved or not math.isfinite(change):
                break
            theta, halved = 0.5 * theta, True
            u = free_evolution(scen)
            continue
        best = min(best, change)
        u = Trajectory(scen.grid, u.states + theta * (new.states - u.states))
    diag.relaxation = theta
    raise NonConvergenceError(f"Picard iteration did not reach tol {scen.tol:g} in {diag.iterations} steps", diag)


def terminal_error(traj: Trajectory, scen: Scenario) -> float:
    return float(np.linalg.norm(scen.target_vec - traj.terminal))


# ---------------------------------------------------------------------------
# residual of the differential form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    modes: np.ndarray
    per_mode: np.ndarray  # sup over the checked nodes
    t_min: float
    t_max: float

    @property
    def max(self) -> float:
        return float(self.per_mode.max())


def residual_check(
    traj: Trajectory, controls: ControlPair, v_traj, scen: Scenario,
    t_min: float = 0.0, t_max: float | None = None,
) -> ResidualReport:
    """sup_t |D^alpha(u - g) - A u - v - B1 mu1| per low mode (n <= max(1, N/4)).

    Only nodes in [t_min, t_max] are checked. For alpha < 1 the solution
    behaves like t^alpha at the origin and the control like (a - t)^alpha
    at the horizon; the L1 derivative does not converge uniformly across
    either layer, so a window away from both is needed for a refinement
    study.
    """
    t_max = scen.a if t_max is None else t_max
    from .fracops import caputo_derivative

    nmax = max(1, scen.n_modes // 4)
    g = _g_path(traj, scen)
    lhs = caputo_derivative(traj.states - g, scen.grid, scen.alpha)
    rhs = scen.op.eigenvalues * traj.states + np.asarray(v_traj) + controls.mu1 @ scen.system.b1.matrix.T
    t = scen.grid.nodes
    mask = (t >= t_min) & (t <= t_max + 1e-12) & (t > 0)
    r = np.abs(lhs - rhs)[mask][:, :nmax]
    return ResidualReport(np.arange(1, nmax + 1), r.max(axis=0), t_min, t_max)
