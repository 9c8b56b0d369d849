"""Product integration for weakly singular convolutions on a uniform grid.

The rule approximates

    int_0^{t_k} (t_k - s)^(alpha - 1) phi(s) ds  ~  sum_j W[k, j] phi(t_j)

by integrating the kernel exactly against the piecewise-linear interpolant
of phi (the "product trapezoid" rule). On a uniform grid with h = a / n:

    W[k, 0] = h^a / (a (a+1)) * ((k-1)^(a+1) - (k-1-a) k^a)
    W[k, j] = h^a / (a (a+1)) * ((k-j+1)^(a+1) - 2 (k-j)^(a+1) + (k-j-1)^(a+1))
    W[k, k] = h^a / (a (a+1))

For a = 1 this is the composite trapezoid rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .special_fn import FractionalOrder, _as_alpha


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k a / n_steps on J = [0, a]."""

    a: float
    n_steps: int

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise DomainError(f"horizon must be positive, got {self.a}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def h(self) -> float:
        return self.a / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.a, self.n_steps + 1)

    def __len__(self) -> int:
        return self.n_steps + 1

    def refine(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.a, self.n_steps * factor)


def _lag_weights(alpha: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Interior weights by lag m = k - j (m >= 1) and the j = 0 column, unscaled.

    Both are written with expm1/log1p so the second differences of
    m^(alpha+1) keep full relative accuracy for large m.
    """
    m = np.arange(1, n + 1, dtype=float)
    p = alpha + 1.0
    interior = np.empty(n + 1)
    interior[0] = 1.0
    with np.errstate(divide="ignore"):  # log1p(-1) = -inf at m = 1 is exact here
        interior[1:] = m**p * (np.expm1(p * np.log1p(1.0 / m)) + np.expm1(p * np.log1p(-1.0 / m)))
        first = np.zeros(n + 1)
        first[1:] = m**alpha * ((m - 1.0) * np.expm1(alpha * np.log1p(-1.0 / m)) + alpha)
    return interior, first


@dataclass(frozen=True)
class ConvolutionWeights:
    """Lower-triangular product-integration weights for one (alpha, grid)."""

    alpha: float
    grid: TimeGrid
    weights: np.ndarray = field(repr=False)

    def row(self, k: int) -> np.ndarray:
        return self.weights[k, : k + 1]


def build_weights(order: FractionalOrder | float, grid: TimeGrid) -> ConvolutionWeights:
    """Product-trapezoid weights for the kernel (t - s)^(alpha - 1)."""
    alpha = _as_alpha(order)
    n = grid.n_steps
    scale = grid.h**alpha / (alpha * (alpha + 1.0))
    interior, first = _lag_weights(alpha, n)
    k = np.arange(n + 1)[:, None]
    j = np.arange(n + 1)[None, :]
    lag = np.clip(k - j, 0, n)
    W = np.where(j <= k, interior[lag], 0.0)
    W[1:, 0] = first[1:]
    W[0, 0] = 0.0
    W *= scale
    W.setflags(write=False)
    return ConvolutionWeights(alpha, grid, W)


def convolve(w: ConvolutionWeights, phi, k: int):
    """sum_{j <= k} W[k, j] phi(t_j).

    ``phi`` holds one sample per grid node on its first axis; the samples may
    be scalars or coefficient vectors.
    """
    if not 0 <= k <= w.grid.n_steps:
        raise IndexError(f"node index {k} outside 0..{w.grid.n_steps}")
    phi = np.asarray(phi, dtype=float)
    if phi.shape[0] != w.grid.n_steps + 1:
        raise DomainError("phi must carry one sample per grid node")
    out = np.tensordot(w.row(k), phi[: k + 1], axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out


def convolve_all(w: ConvolutionWeights, phi) -> np.ndarray:
    """Convolution at every node at once (W @ phi)."""
    phi = np.asarray(phi, dtype=float)
    return np.tensordot(w.weights, phi, axes=(1, 0))
