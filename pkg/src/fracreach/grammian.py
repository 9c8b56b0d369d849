"""Controllability Grammians, their resolvents and the control law.

Everything lives in spectral coordinates. The discrete Grammian

    Gamma_1 = sum_j W[K, j] T(a - t_j) B1 B1^T T(a - t_j)

uses the same product-integration weights as the mild solution, so a control
built from it steers the *discrete* system with the algebra of the
continuous one: the terminal error equals lambda R(lambda, Gamma) P to
round-off. Because every T(t) is diagonal the sum is a Hadamard product
(B1 B1^T) o (Tm^T diag(w) Tm), which is symmetric PSD by construction.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import DomainError
from .fracops import PropagatorTable, propagator_table
from .quadrature import ConvolutionWeights, TimeGrid, build_weights
from .special_fn import _as_alpha
from .spectral import SpectralOperator

COND_WARN = 1e12


class IllConditionedWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class ControlOperator:
    """Matrix from control coordinates to sine coefficients (N x M)."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=float, ndmin=2)
        if m.ndim != 2 or not np.all(np.isfinite(m)):
            raise DomainError("control operator must be a finite 2-D matrix")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @classmethod
    def section4(cls, n_modes: int) -> "ControlOperator":
        """(B mu) = 2 mu_2 w_1 + sum_{n>=2} mu_n w_n, controls indexed n = 2..N.

        Column n-2 carries mu_n; mode 1 and mode 2 are both driven by mu_2,
        so the rank is N - 1 and the range misses (2, -1, 0, ...)/sqrt(5).
        """
        if n_modes < 2:
            raise DomainError("the example operator needs N >= 2")
        m = np.zeros((n_modes, n_modes - 1))
        m[0, 0] = 2.0
        m[np.arange(1, n_modes), np.arange(n_modes - 1)] = 1.0
        return cls(m)

    @classmethod
    def identity(cls, n_modes: int) -> "ControlOperator":
        return cls(np.eye(n_modes))

    @classmethod
    def zero(cls, n_modes: int, n_controls: int | None = None) -> "ControlOperator":
        return cls(np.zeros((n_modes, n_controls or n_modes)))

    @classmethod
    def from_spec(cls, spec, n_modes: int) -> "ControlOperator":
        """Scenario field: "section4", "identity", "zero" or a nested list."""
        if isinstance(spec, str):
            try:
                return {"section4": cls.section4, "identity": cls.identity, "zero": cls.zero}[spec](n_modes)
            except KeyError:
                raise DomainError(f"unknown control operator {spec!r}") from None
        op = cls(np.asarray(spec, dtype=float))
        if op.shape[0] != n_modes:
            raise DomainError(f"control operator has {op.shape[0]} rows, expected {n_modes}")
        return op


@dataclass(frozen=True, eq=False)
class Gramian:
    """Symmetric PSD controllability matrix; checked on construction."""

    matrix: np.ndarray
    kind: str
    horizon: float
    alpha: float

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if self.kind not in ("gamma1", "gamma2", "joint"):
            raise DomainError(f"unknown Grammian kind {self.kind!r}")
        scale = max(1.0, float(np.abs(m).max(initial=0.0)))
        if np.abs(m - m.T).max(initial=0.0) > 1e-12 * scale:
            raise DomainError("Grammian is not symmetric")
        m = 0.5 * (m + m.T)
        ev = np.linalg.eigvalsh(m)
        if ev.size and ev[0] < -1e-10 * max(ev[-1], 0.0) - 1e-300:
            raise DomainError(f"Grammian is not PSD (min eigenvalue {ev[0]:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def __add__(self, other: "Gramian") -> "Gramian":
        return Gramian(self.matrix + other.matrix, "joint", self.horizon, self.alpha)

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "horizon": self.horizon, "alpha": self.alpha,
             "shape": list(self.matrix.shape), "matrix": self.matrix.ravel().tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "Gramian":
        d = json.loads(text)
        return cls(np.asarray(d["matrix"]).reshape(d["shape"]), d["kind"], d["horizon"], d["alpha"])


def _check_rows(b: ControlOperator, op: SpectralOperator) -> None:
    if b.shape[0] != op.n_modes:
        raise DomainError(f"control operator has {b.shape[0]} rows, expected {op.n_modes}")


def _gamma1_from(table: PropagatorTable, w: ConvolutionWeights, b1: ControlOperator) -> np.ndarray:
    k = table.grid.n_steps
    w_lag = w.weights[k, ::-1]  # weight attached to lag a - t_j
    tm = table.t
    return (b1.matrix @ b1.matrix.T) * ((tm * w_lag[:, None]).T @ tm)


def build_gamma1(op: SpectralOperator, b1: ControlOperator, order, grid: TimeGrid) -> Gramian:
    """Discrete int_0^a (a-s)^(alpha-1) T(a-s) B1 B1^T T(a-s) ds."""
    _check_rows(b1, op)
    alpha = _as_alpha(order)
    m = _gamma1_from(propagator_table(grid, op, alpha), build_weights(alpha, grid), b1)
    return Gramian(0.5 * (m + m.T), "gamma1", grid.a, alpha)


def build_gamma2(op: SpectralOperator, b2: ControlOperator, order, a: float) -> Gramian:
    """S(a) B2 B2^T S(a)."""
    _check_rows(b2, op)
    alpha = _as_alpha(order)
    from .fracops import s_symbol

    s = s_symbol(float(a), op, alpha)
    m = s[:, None] * (b2.matrix @ b2.matrix.T) * s[None, :]
    return Gramian(0.5 * (m + m.T), "gamma2", float(a), alpha)


def resolvent_apply(lam: float, g: Gramian | np.ndarray, v) -> np.ndarray:
    """(lam I + Gamma)^-1 v by Cholesky; v may hold several right-hand sides as columns."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    m = g.matrix if isinstance(g, Gramian) else np.asarray(g, dtype=float)
    a = m + lam * np.eye(m.shape[0])
    cond = np.linalg.cond(a)
    if cond > COND_WARN:
        warnings.warn(f"lambda I + Gamma has condition number {cond:.2e}", IllConditionedWarning, stacklevel=2)
    v = np.asarray(v, dtype=float)
    factor = linalg.cho_factor(a)
    x = linalg.cho_solve(factor, v)
    return x + linalg.cho_solve(factor, v - a @ x)  # one refinement step


@dataclass(frozen=True)
class DecayReport:
    """lam ||R(lam, Gamma) x|| along the lambda path, one row per test vector."""

    lambdas: np.ndarray
    sequences: np.ndarray
    decaying: np.ndarray  # final <= 0.1 * first

    @property
    def ratios(self) -> np.ndarray:
        first = self.sequences[:, 0]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(first > 0, self.sequences[:, -1] / first, np.nan)

    @property
    def all_decaying(self) -> bool:
        return bool(np.all(self.decaying))


def lemma26_decay(g: Gramian, test_vectors: Sequence, lambdas: Sequence[float]) -> DecayReport:
    lams = np.asarray(lambdas, dtype=float)
    if np.any(lams <= 0) or np.any(np.diff(lams) >= 0):
        raise DomainError("lambdas must be positive and strictly decreasing")
    x = np.atleast_2d(np.asarray(test_vectors, dtype=float))
    # eigen-decomposition makes the whole path exact and cheap
    ev, q = np.linalg.eigh(g.matrix)
    ev = np.clip(ev, 0.0, None)
    coef = x @ q
    seq = np.array([[np.linalg.norm(lam / (lam + ev) * c) for lam in lams] for c in coef])
    return DecayReport(lams, seq, seq[:, -1] <= 0.1 * seq[:, 0])


# ---------------------------------------------------------------------------
# control synthesis
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ControlSystem:
    """Linear part of the problem: everything the control law needs.

    Tables, weights and Grammians are built lazily and cached, so one
    instance can serve a whole lambda sweep.
    """

    op: SpectralOperator
    alpha: float
    grid: TimeGrid
    b1: ControlOperator
    b2: ControlOperator

    def __post_init__(self) -> None:
        _check_rows(self.b1, self.op)
        _check_rows(self.b2, self.op)

    @cached_property
    def weights(self) -> ConvolutionWeights:
        return build_weights(self.alpha, self.grid)

    @cached_property
    def table(self) -> PropagatorTable:
        return propagator_table(self.grid, self.op, self.alpha)

    @cached_property
    def gamma1(self) -> Gramian:
        m = _gamma1_from(self.table, self.weights, self.b1)
        return Gramian(0.5 * (m + m.T), "gamma1", self.grid.a, self.alpha)

    @cached_property
    def gamma2(self) -> Gramian:
        s = self.table.s[-1]
        m = s[:, None] * (self.b2.matrix @ self.b2.matrix.T) * s[None, :]
        return Gramian(0.5 * (m + m.T), "gamma2", self.grid.a, self.alpha)

    @cached_property
    def gamma(self) -> Gramian:
        return self.gamma1 + self.gamma2


@dataclass(frozen=True, eq=False)
class ControlPair:
    """mu1 sampled on the grid (n_steps + 1, M1) and the constant vector mu2."""

    mu1: np.ndarray
    mu2: np.ndarray

    def __post_init__(self) -> None:
        if np.ndim(self.mu1) != 2:
            raise DomainError("mu1 must be a (nodes, controls) array")

    @classmethod
    def zero(cls, system: ControlSystem) -> "ControlPair":
        return cls(np.zeros((system.grid.n_steps + 1, system.b1.shape[1])), np.zeros(system.b2.shape[1]))

    def mu1_energy(self, grid: TimeGrid) -> float:
        """L2(J) norm of mu1 by the trapezoid rule."""
        sq = np.sum(self.mu1**2, axis=1)
        return float(np.sqrt(grid.h * (sq.sum() - 0.5 * (sq[0] + sq[-1]))))


COUPLINGS = ("joint", "separate")


def control_law(system: ControlSystem, p_vec, lam: float, coupling: str = "joint") -> ControlPair:
    """Controls steering the discrete system towards u_a given P.

    ``joint`` solves one regularized problem with Gamma = Gamma_1 + Gamma_2,
    giving terminal error lam R(lam, Gamma) P. ``separate`` is the literal
    law with independent resolvents for each Grammian; its terminal error is
    (lam R_1 + lam R_2 - I) P, which does not vanish as lam -> 0 when both
    controls act on the same modes.
    """
    p_vec = np.asarray(p_vec, dtype=float)
    if coupling == "joint":
        y1 = y2 = resolvent_apply(lam, system.gamma, p_vec)
    elif coupling == "separate":
        y1 = resolvent_apply(lam, system.gamma1, p_vec)
        y2 = resolvent_apply(lam, system.gamma2, p_vec)
    else:
        raise DomainError(f"coupling must be one of {COUPLINGS}")
    tm = system.table.t[::-1]  # row j holds T(a - t_j)
    mu1 = (tm * y1) @ system.b1.matrix
    mu2 = system.b2.matrix.T @ (system.table.s[-1] * y2)
    return ControlPair(mu1, mu2)


def synthesize_controls(u_traj, v_traj, scen, lam: float | None = None) -> ControlPair:
    """Controls from the terminal functional P evaluated at a frozen iterate."""
    from .dynamics import terminal_functional

    lam = scen.lam if lam is None else lam
    p_vec = terminal_functional(u_traj, v_traj, scen)
    return control_law(scen.system, p_vec, lam, scen.coupling)
