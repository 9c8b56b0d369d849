"""Fractional integral, Caputo derivative and the diagonal propagators.

In the sine eigenbasis the solution operators act mode by mode:

    S_alpha(t):     c_n -> E_{alpha,1}(-n^2 t^alpha) c_n
    T_alpha(t):     c_n -> E_{alpha,alpha}(-n^2 t^alpha) c_n
    A T_alpha(t):   c_n -> -n^2 E_{alpha,alpha}(-n^2 t^alpha) c_n

Signals sampled on a :class:`~fracreach.quadrature.TimeGrid` are numpy arrays
with the node index first; any trailing axes (e.g. spectral modes) ride along.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import TimeGrid, build_weights, convolve_all
from .special_fn import FractionalOrder, _as_alpha, mittag_leffler
from .spectral import SpectralOperator, _q

# ---------------------------------------------------------------------------
# integral and derivative on time grids
# ---------------------------------------------------------------------------


def _check_samples(values, grid: TimeGrid) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[0] != grid.n_steps + 1:
        raise ValueError(f"expected {grid.n_steps + 1} samples, got {values.shape[0]}")
    return values


def frac_integral(values, grid: TimeGrid, order: FractionalOrder | float) -> np.ndarray:
    """Riemann-Liouville integral I^alpha f at every node (0 at t_0).

    Exact when f is piecewise linear on the grid.
    """
    alpha = _as_alpha(order)
    f = _check_samples(values, grid)
    return convolve_all(build_weights(alpha, grid), f) / math.gamma(alpha)


def _l1_coefficients(alpha: float, n: int) -> np.ndarray:
    m = np.arange(n, dtype=float)
    b = (m + 1.0) ** (1.0 - alpha) - m ** (1.0 - alpha)
    b[0] = 1.0  # also covers alpha = 1 where 0**0 would cancel it
    return b


def caputo_derivative(values, grid: TimeGrid, order: FractionalOrder | float) -> np.ndarray:
    """Caputo derivative by the L1 scheme; the t_0 entry is set to 0.

    Equivalent to applying I^(1-alpha) to the piecewise-constant derivative
    of the linear interpolant, so it is exact on piecewise-linear data and
    returns exactly zero on constants. ``alpha = 1`` gives backward
    differences.
    """
    alpha = _as_alpha(order)
    f = _check_samples(values, grid)
    n = grid.n_steps
    diffs = np.diff(f, axis=0)
    b = _l1_coefficients(alpha, n)
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    toeplitz = np.where(j <= k, b[np.clip(k - j, 0, n - 1)], 0.0)
    out = np.zeros_like(f)
    out[1:] = np.tensordot(toeplitz, diffs, axes=(1, 0))
    return out * grid.h ** (-alpha) / math.gamma(2.0 - alpha)


# ---------------------------------------------------------------------------
# propagators
# ---------------------------------------------------------------------------


def _arg(t, op: SpectralOperator, alpha: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("propagators are defined for t >= 0")
    return op.eigenvalues * (t[..., None] ** alpha)


def s_symbol(t, op: SpectralOperator, order) -> np.ndarray:
    """Diagonal of S_alpha(t): E_alpha(-n^2 t^alpha), shape t.shape + (N,)."""
    alpha = _as_alpha(order)
    return mittag_leffler(_arg(t, op, alpha), alpha, 1.0)


def t_symbol(t, op: SpectralOperator, order) -> np.ndarray:
    """Diagonal of T_alpha(t): E_{alpha,alpha}(-n^2 t^alpha); 1/Gamma(alpha) at t = 0."""
    alpha = _as_alpha(order)
    return mittag_leffler(_arg(t, op, alpha), alpha, alpha)


def at_symbol(t, op: SpectralOperator, order) -> np.ndarray:
    """Diagonal of A T_alpha(t)."""
    return op.eigenvalues * t_symbol(t, op, order)


def s_alpha_apply(t: float, coeffs, op: SpectralOperator, order) -> np.ndarray:
    return s_symbol(t, op, order) * np.asarray(coeffs, dtype=float)


def t_alpha_apply(t: float, coeffs, op: SpectralOperator, order) -> np.ndarray:
    return t_symbol(t, op, order) * np.asarray(coeffs, dtype=float)


def a_t_alpha_apply(t: float, coeffs, op: SpectralOperator, order) -> np.ndarray:
    return at_symbol(t, op, order) * np.asarray(coeffs, dtype=float)


@dataclass(frozen=True)
class PropagatorTable:
    """Propagator diagonals at every grid lag t = m h, m = 0..n_steps.

    On a uniform grid S(t_k - t_j) only depends on k - j, so one table serves
    every convolution in the mild-solution formula.
    """

    grid: TimeGrid
    s: np.ndarray
    t: np.ndarray
    at: np.ndarray


def propagator_table(grid: TimeGrid, op: SpectralOperator, order) -> PropagatorTable:
    lags = grid.nodes
    tt = t_symbol(lags, op, order)
    return PropagatorTable(grid, s_symbol(lags, op, order), tt, op.eigenvalues * tt)


def lagged_convolution(weights: np.ndarray, kernel: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """out[k] = sum_{j<=k} weights[k, j] * kernel[k - j] * phi[j], mode-wise.

    ``kernel`` and ``phi`` have shape (n+1, N); ``weights`` is the scalar
    product-integration matrix.
    """
    n1 = phi.shape[0]
    out = np.zeros_like(phi, dtype=float)
    for k in range(1, n1):
        out[k] = (weights[k, : k + 1, None] * kernel[k::-1] * phi[: k + 1]).sum(axis=0)
    return out


# ---------------------------------------------------------------------------
# bound diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    """Empirical constant for ||A^q T_alpha(t)|| <= C t^(-q alpha).

    ``constant`` is the sup over grid times and modes of
    n^(2q) |E_{alpha,alpha}(-n^2 t^alpha)| t^(q alpha); ``profile`` is the
    same sup taken per time node. ``m_q`` converts the constant to the
    semigroup constant M_q of the analytic bound.
    """

    alpha: float
    q: float
    n_modes: int
    times: np.ndarray
    profile: np.ndarray
    constant: float
    m_q: float
    bounded: bool


def bound_check_lemma25(order, grid: TimeGrid, q, op: SpectralOperator) -> BoundReport:
    alpha = _as_alpha(order)
    qv = _q(q)
    t = grid.nodes[1:]
    vals = np.abs(t_symbol(t, op, alpha)) * op.modes ** (2.0 * qv) * (t ** (qv * alpha))[:, None]
    profile = vals.max(axis=1)
    const = float(profile.max())
    m_q = const * math.gamma(1.0 + alpha * (1.0 - qv)) / (alpha * math.gamma(2.0 - qv))
    return BoundReport(alpha, qv, op.n_modes, t, profile, const, m_q, bool(np.all(np.isfinite(profile))))
