"""Dirichlet sine basis on [0, pi] and the diagonal calculus it induces.

States are plain numpy arrays of coefficients ``c[n-1]`` against the
orthonormal eigenfunctions ``w_n(x) = sqrt(2/pi) sin(n x)``. Stacks of
states (e.g. a trajectory sampled on a time grid) carry the mode index on
the last axis, and every function here broadcasts over leading axes.

Fractional powers follow the positive-operator convention: ``A^q`` acts as
``n^(2q)``, so ``||A^-q|| = 1`` attained at n = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError

_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


@dataclass(frozen=True)
class SobolevIndex:
    q: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.q < 1.0:
            raise DomainError(f"Sobolev index must lie in [0, 1), got {self.q}")


def _q(q) -> float:
    return q.q if isinstance(q, SobolevIndex) else SobolevIndex(float(q)).q


@dataclass(frozen=True)
class SpectralOperator:
    """Truncated Dirichlet Laplacian on [0, pi] with eigenvalues -n^2, n = 1..N."""

    n_modes: int
    panels_per_mode: int = 8
    modes: np.ndarray = field(init=False, repr=False, compare=False)
    eigenvalues: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if int(self.n_modes) != self.n_modes or self.n_modes < 2:
            raise DomainError(f"need at least 2 modes, got {self.n_modes}")
        n = np.arange(1, self.n_modes + 1, dtype=float)
        object.__setattr__(self, "modes", n)
        object.__setattr__(self, "eigenvalues", -(n**2))

    # -- collocation ------------------------------------------------------
    @property
    def n_panels(self) -> int:
        return self.panels_per_mode * self.n_modes

    def grid(self) -> np.ndarray:
        """Simpson nodes on [0, pi] (n_panels + 1 points)."""
        return np.linspace(0.0, np.pi, self.n_panels + 1)

    def simpson_weights(self) -> np.ndarray:
        m = self.n_panels
        w = np.ones(m + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * (np.pi / m) / 3.0

    def basis(self, x) -> np.ndarray:
        """Matrix of eigenfunction values, shape ``x.shape + (N,)``."""
        x = np.asarray(x, dtype=float)
        return _SQRT_2_OVER_PI * np.sin(x[..., None] * self.modes)

    # -- projection / reconstruction --------------------------------------
    def project_samples(self, values: np.ndarray) -> np.ndarray:
        """Sine coefficients of functions sampled on :meth:`grid`.

        ``values`` has the collocation index on the last axis.
        """
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.n_panels + 1:
            raise DomainError("samples must live on the Simpson collocation grid")
        return (values * self.simpson_weights()) @ self.basis(self.grid())

    def project(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Coefficients  c_n = int_0^pi f(x) w_n(x) dx  by composite Simpson.

        ``f`` must accept a numpy array. Simpson with 8N panels integrates
        sin(mx) sin(nx) exactly whenever m + n < 8N, so band-limited inputs
        round-trip to machine precision.
        """
        x = self.grid()
        vals = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
        return self.project_samples(vals)

    def reconstruct(self, coeffs, x):
        """Evaluate the sine series at points x in [0, pi]."""
        xa = np.asarray(x, dtype=float)
        if np.any(xa < 0.0) or np.any(xa > np.pi):
            raise DomainError("reconstruction points must lie in [0, pi]")
        c = np.asarray(coeffs, dtype=float)
        out = self.basis(xa) @ c if c.ndim == 1 else c @ self.basis(xa).T
        return float(out) if np.ndim(out) == 0 else out

    def to_grid(self, coeffs) -> np.ndarray:
        """Pointwise values on the collocation grid, for nonlinear maps."""
        return np.asarray(coeffs, dtype=float) @ self.basis(self.grid()).T

    # -- diagonal calculus --------------------------------------------------
    def frac_power_apply(self, coeffs, q, sign: int = 1) -> np.ndarray:
        """Apply (-A)^(sign*q): coefficient n is scaled by n^(2 q sign)."""
        if sign not in (1, -1):
            raise DomainError("sign must be +1 or -1")
        qv = _q(q)
        return np.asarray(coeffs, dtype=float) * self.modes ** (2.0 * qv * sign)

    def norm_q(self, coeffs, q=0.0):
        """Graph norm ||A^q u|| = sqrt(sum n^(4q) c_n^2), over the last axis."""
        qv = _q(q)
        c = np.asarray(coeffs, dtype=float)
        return np.sqrt(np.sum(self.modes ** (4.0 * qv) * c**2, axis=-1))

    def inverse_power_norm(self, q) -> float:
        """Operator norm of A^-q on the truncated space (largest n^-2q)."""
        return float(np.max(self.modes ** (-2.0 * _q(q))))

    def truncation_tail(self, coeffs) -> float:
        """Share of the L2 norm carried by the last quartile of modes.

        A large value means the truncation is cutting off real content.
        """
        c = np.asarray(coeffs, dtype=float)
        k = max(1, self.n_modes // 4)
        total = np.sqrt(np.sum(c**2, axis=-1))
        tail = np.sqrt(np.sum(c[..., -k:] ** 2, axis=-1))
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(total > 0, tail / np.where(total > 0, total, 1.0), 0.0)
        return float(np.max(ratio))


def unit_mode(n_modes: int, mode: int) -> np.ndarray:
    """Coefficient vector of w_mode (1-based)."""
    c = np.zeros(n_modes)
    c[mode - 1] = 1.0
    return c
