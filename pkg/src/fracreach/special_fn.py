"""Gamma, Mittag-Leffler and Wright-type density evaluation on the real line.

The two-parameter Mittag-Leffler function

    E_{a,b}(z) = sum_k z^k / Gamma(a k + b)

is evaluated by one of four strategies, chosen per argument:

``"zero"``
    z == 0, the value is 1/Gamma(b).
``"exponential"``
    a == b == 1, evaluated as exp(z) so the tail keeps relative accuracy.
``"taylor"``
    the power series, used for z > 0 (all terms positive) and for
    |z| <= ``TAYLOR_RADIUS`` on the negative axis.
``"asymptotic"``
    the algebraic expansion  -sum_{k=1}^{K} z^{-k} / Gamma(b - a k)  for
    0 < a < 1 and large negative z, used only when the first omitted term is
    below ``ASYMPTOTIC_TOL``.
``"contour"``
    inversion of the Laplace transform s^{a-b} / (s^a - z) by the trapezoid
    rule on a Weideman-Trefethen parabola. For real z < 0 and a <= 1 every
    singularity sits on the closed negative real axis, which the parabola
    wraps, so no residues need to be added.

The density ``zeta_alpha`` is the Mainardi function. Its power series is
entire but alternates with huge terms once theta grows, so past a
cancellation threshold it is recomputed from a positive integral
representation (one-sided stable law written in Zolotarev form).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NonConvergenceError, PoleError

ML_ZMIN = -1.0e6
ML_ZMAX = 50.0
TAYLOR_RADIUS = 1.0
TAYLOR_MAX_TERMS = 250
ASYMPTOTIC_TERMS = 10
ASYMPTOTIC_TOL = 1.0e-15
CONTOUR_NODES = 32
TAIL_CUTOFF = 40.0

_GAMMA_OVERFLOW = 171.6243769563027
_SERIES_MAX_LOG_TERM = math.log(1e3)


@dataclass(frozen=True)
class FractionalOrder:
    """Order of the Caputo derivative, 0 < alpha <= 1."""

    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise DomainError(f"fractional order must lie in (0, 1], got {self.alpha}")

    def __float__(self) -> float:
        return float(self.alpha)


@dataclass(frozen=True)
class MLParams:
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not (self.alpha > 0.0 and self.beta > 0.0):
            raise DomainError(f"Mittag-Leffler indices must be positive, got {self}")


@dataclass(frozen=True)
class MLResult:
    """Scalar Mittag-Leffler value plus how it was obtained."""

    value: float
    strategy: str
    terms: int


def _as_alpha(order: FractionalOrder | float) -> float:
    if isinstance(order, FractionalOrder):
        return order.alpha
    return FractionalOrder(float(order)).alpha


# ---------------------------------------------------------------------------
# Gamma
# ---------------------------------------------------------------------------


def gamma_fn(x):
    """Gamma function with explicit pole and overflow errors.

    Accepts scalars or arrays. Raises :class:`PoleError` at 0, -1, -2, ...
    and :class:`OverflowError` above ~171.62 where the result leaves the
    double range.
    """
    xa = np.asarray(x, dtype=float)
    if np.any((xa <= 0) & (xa == np.round(xa))):
        raise PoleError(f"gamma has a pole at non-positive integers, got {x}")
    if np.any(xa > _GAMMA_OVERFLOW):
        raise OverflowError(f"gamma({x}) overflows double precision")
    out = special.gamma(xa)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Mittag-Leffler
# ---------------------------------------------------------------------------


def _taylor(z: np.ndarray, alpha: float, beta: float, max_terms: int):
    """Power series, vectorised over z. Returns (values, terms used).

    For z > 0 the terms grow until k ~ z^(1/alpha) / alpha, so the term cap
    is raised to cover the peak; the growth E ~ exp(z^(1/alpha)) / alpha is
    checked for overflow before summing. Near |z| = 1 the terms decay like
    1/Gamma(alpha k + beta), which for small alpha also needs a longer series.
    """
    max_terms = max(max_terms, int(25.0 / alpha) + 50)
    zmax = float(np.max(z, initial=0.0))
    if zmax > 0:
        growth = zmax ** (1.0 / alpha)
        if growth - math.log(alpha) > 709.0:
            raise OverflowError("Mittag-Leffler function overflows double precision")
        max_terms = max(max_terms, int(3.0 * growth / alpha) + 50)
    total = np.zeros_like(z)
    biggest = np.zeros_like(z)
    logz = np.log(np.abs(np.where(z == 0, 1.0, z)))
    sign = np.sign(z)
    done = np.zeros(z.shape, dtype=bool)
    for k in range(max_terms):
        logmag = k * logz - special.gammaln(alpha * k + beta)
        if np.any(logmag > 709.0):
            raise OverflowError("Mittag-Leffler series overflows double precision")
        term = np.where(done, 0.0, sign**k * np.exp(logmag))
        total += term
        biggest = np.maximum(biggest, np.abs(term))
        # the series is only past its peak once the term ratio drops below 1
        ratio_small = (k + 1) * logz - special.gammaln(alpha * (k + 1) + beta) < logmag
        done |= ratio_small & (np.abs(term) <= 1e-17 * np.maximum(np.abs(total), 1e-300))
        if done.all():
            break
    else:
        raise NonConvergenceError(
            f"Mittag-Leffler series did not converge in {max_terms} terms",
            {"alpha": alpha, "beta": beta, "z": z.tolist()},
        )
    if np.any(biggest * np.finfo(float).eps > 1e-12 * np.maximum(1.0, np.abs(total))):
        raise NonConvergenceError(
            "cancellation in the Mittag-Leffler series exceeds the accuracy target",
            {"alpha": alpha, "beta": beta, "max_term": float(biggest.max())},
        )
    return total, k + 1


def _asymptotic(z: np.ndarray, alpha: float, beta: float, nterms: int):
    k = np.arange(1, nterms + 1)
    coef = special.rgamma(beta - alpha * k)
    powers = z[:, None] ** (-k[None, :].astype(float))
    return -(powers * coef).sum(axis=1)


def _asymptotic_ok(z: np.ndarray, alpha: float, beta: float, nterms: int) -> np.ndarray:
    if alpha >= 1.0:
        # exponentially small contributions are not negligible at alpha = 1
        return np.zeros(z.shape, dtype=bool)
    # bound the remainder by the next two omitted terms (one may vanish)
    nxt = [abs(special.rgamma(beta - alpha * m)) for m in (nterms + 1, nterms + 2)]
    absz = np.abs(z)
    err = nxt[0] * absz ** (-(nterms + 1.0)) + nxt[1] * absz ** (-(nterms + 2.0))
    return err < ASYMPTOTIC_TOL


def _contour(z: np.ndarray, alpha: float, beta: float, nodes: int) -> np.ndarray:
    theta = -np.pi + (np.arange(nodes) + 0.5) * (2.0 * np.pi / nodes)
    s = nodes * (0.1309 - 0.1194 * theta**2 + 0.25j * theta)
    ds = nodes * (-0.2388 * theta + 0.25j)
    weight = np.exp(s) * s ** (alpha - beta) * ds
    integrand = weight[None, :] / (s[None, :] ** alpha - z[:, None])
    return (integrand.sum(axis=1) / (1j * nodes)).real


def _check_range(z: np.ndarray) -> None:
    if not np.all(np.isfinite(z)):
        raise DomainError("Mittag-Leffler argument must be finite")
    if np.any(z < ML_ZMIN) or np.any(z > ML_ZMAX):
        raise DomainError(
            f"Mittag-Leffler argument outside operating range [{ML_ZMIN:g}, {ML_ZMAX:g}]"
        )


def _evaluate(z: np.ndarray, alpha: float, beta: float, max_terms: int):
    """Vectorised evaluation; returns values and per-entry strategy labels."""
    out = np.empty_like(z)
    label = np.empty(z.shape, dtype=object)
    terms = 0

    zero = z == 0.0
    out[zero] = special.rgamma(beta)
    label[zero] = "zero"

    if alpha == 1.0 and beta == 1.0:
        # keeps full relative accuracy (and positivity) far into the tail
        out[~zero] = np.exp(z[~zero])
        label[~zero] = "exponential"
        return out, label, 1

    taylor = ~zero & ((z > 0) | (np.abs(z) <= TAYLOR_RADIUS))
    if alpha > 1.0:
        # no contour guarantee off (0, 1]; the series is the only route
        taylor = ~zero
    if taylor.any():
        out[taylor], terms = _taylor(z[taylor], alpha, beta, max_terms)
        label[taylor] = "taylor"

    rest = ~(zero | taylor)
    if rest.any():
        zr = z[rest]
        asym = _asymptotic_ok(zr, alpha, beta, ASYMPTOTIC_TERMS)
        vals = np.empty_like(zr)
        labs = np.empty(zr.shape, dtype=object)
        if asym.any():
            vals[asym] = _asymptotic(zr[asym], alpha, beta, ASYMPTOTIC_TERMS)
            labs[asym] = "asymptotic"
        if (~asym).any():
            vals[~asym] = _contour(zr[~asym], alpha, beta, CONTOUR_NODES)
            labs[~asym] = "contour"
        out[rest] = vals
        label[rest] = labs
    return out, label, terms


def mittag_leffler(z, alpha: float, beta: float = 1.0, *, max_terms: int = TAYLOR_MAX_TERMS):
    """Two-parameter Mittag-Leffler function E_{alpha,beta}(z) for real z.

    Parameters
    ----------
    z : float or array_like
        Real arguments in ``[ML_ZMIN, ML_ZMAX]``.
    alpha, beta : float
        Positive indices. The contour route covers ``alpha <= 1``; for larger
        alpha only the series is available and it raises when cancellation
        would spoil the result.

    Returns
    -------
    float or numpy.ndarray
        Same shape as ``z``. Absolute accuracy is about 1e-14 on the
        operating range for ``alpha <= 1``.
    """
    MLParams(alpha, beta)
    za = np.asarray(z, dtype=float)
    flat = za.reshape(-1)
    _check_range(flat)
    out, _, _ = _evaluate(flat, float(alpha), float(beta), max_terms)
    out = out.reshape(za.shape)
    return float(out) if out.ndim == 0 else out


def ml_evaluate(z: float, alpha: float, beta: float = 1.0) -> MLResult:
    """Scalar evaluation that also reports the strategy used."""
    MLParams(alpha, beta)
    flat = np.array([float(z)])
    _check_range(flat)
    out, label, terms = _evaluate(flat, float(alpha), float(beta), TAYLOR_MAX_TERMS)
    strategy = str(label[0])
    if strategy == "contour":
        terms = CONTOUR_NODES
    elif strategy == "asymptotic":
        terms = ASYMPTOTIC_TERMS
    elif strategy == "zero":
        terms = 1
    return MLResult(float(out[0]), strategy, int(terms))


# ---------------------------------------------------------------------------
# Wright-type (Mainardi) probability density
# ---------------------------------------------------------------------------


def _density_series(theta: float, alpha: float):
    """Series  (1/pi) sum_n (-theta)^(n-1) Gamma(n alpha) sin(n pi alpha) / (n-1)!.

    Returns (value, cancellation) where cancellation is eps * sum|t_n| / |value|.
    """
    terms = []
    absum = 0.0
    logt = math.log(theta) if theta > 0 else -math.inf
    for n in range(1, 2000):
        logmag = (n - 1) * logt + math.lgamma(n * alpha) - math.lgamma(n) if theta > 0 else (
            math.lgamma(alpha) if n == 1 else -math.inf
        )
        if logmag > _SERIES_MAX_LOG_TERM:
            # the remaining digits would drown in cancellation
            return math.nan, math.inf
        mag = math.exp(logmag) / math.pi
        term = (-1.0) ** (n - 1) * mag * math.sin(n * math.pi * alpha)
        terms.append(term)
        absum += abs(term)
        if n > 2 and mag < 1e-20:
            next_log = n * logt + math.lgamma((n + 1) * alpha) - math.lgamma(n + 1)
            if next_log < logmag:
                break
    else:
        return math.nan, math.inf
    value = math.fsum(terms)
    cancellation = np.finfo(float).eps * absum / max(abs(value), 1e-300)
    return value, cancellation


def _density_integral(theta: float, alpha: float) -> float:
    """Positive integral form, valid for 0 < alpha < 1 and theta > 0."""
    r = 1.0 / (1.0 - alpha)
    lth = math.log(theta)

    def log_a(phi: float) -> float:
        return (alpha * r * math.log(math.sin(alpha * phi))
                + math.log(math.sin((1.0 - alpha) * phi)) - r * math.log(math.sin(phi)))

    def integrand(phi: float) -> float:
        if phi <= 0.0 or phi >= math.pi:
            return 0.0
        la = log_a(phi)
        expo = r * lth + la
        if expo > 700.0:
            return 0.0
        return math.exp(alpha * r * lth + la - math.exp(expo))

    # log_a increases monotonically in phi; the integrand peaks where
    # theta^r * A(phi) = 1, which can be very sharp when alpha is near 1
    lo, hi = 1e-12, math.pi - 1e-12
    target = -r * lth
    points = None
    if log_a(lo) < target < log_a(hi):
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if log_a(mid) < target:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-14:
                break
        peak = 0.5 * (lo + hi)
        # local width of the peak in phi is about 1 / (d log_a / d phi)
        step = 1e-7 * max(peak, 1e-6)
        slope = (log_a(min(peak + step, math.pi - 1e-15)) - log_a(peak - step)) / (2 * step)
        width = 1.0 / slope if slope > 0 else 0.0
        points = sorted({min(max(peak + m * width, 1e-15), math.pi - 1e-15)
                         for m in (-30.0, -10.0, -3.0, -1.0, 0.0, 1.0, 3.0)})
    val, _ = integrate.quad(integrand, 0.0, math.pi, points=points, limit=400,
                            epsabs=1e-16, epsrel=1e-12)
    if not math.isfinite(val):
        raise NonConvergenceError("density integral diverged", {"theta": theta, "alpha": alpha})
    return val / (math.pi * (1.0 - alpha))


def _wright_scalar(theta: float, alpha: float, max_cancellation: float) -> float:
    if theta < 0.0:
        raise DomainError(f"density argument must be >= 0, got {theta}")
    if theta == 0.0:
        return math.gamma(alpha) * math.sin(math.pi * alpha) / math.pi
    value, cancel = _density_series(theta, alpha)
    if cancel <= max_cancellation and math.isfinite(value):
        return value
    return _density_integral(theta, alpha)


def wright_density(theta, alpha: FractionalOrder | float, *, max_cancellation: float = 1e-13):
    """Probability density zeta_alpha(theta) on [0, inf).

    Uses the power series while its relative rounding error (estimated from
    the term magnitudes) stays below ``max_cancellation`` and the integral
    form otherwise. ``alpha = 1`` is rejected: the density degenerates to a
    point mass at theta = 1 (see :func:`density_laplace` for that limit).
    """
    a = _as_alpha(alpha)
    if a == 1.0:
        raise DomainError("zeta_1 is a point mass at theta=1, not a density")
    th = np.asarray(theta, dtype=float)
    vals = np.array([_wright_scalar(float(t), a, max_cancellation) for t in th.reshape(-1)])
    vals = vals.reshape(th.shape)
    return float(vals) if vals.ndim == 0 else vals


def density_integral(alpha: FractionalOrder | float, weight, *, cutoff: float = TAIL_CUTOFF,
                     epsabs: float = 1e-12) -> float:
    """Integrate ``weight(theta) * zeta_alpha(theta)`` over [0, cutoff].

    ``alpha = 1`` returns ``weight(1)``, the point-mass limit.
    """
    a = _as_alpha(alpha)
    if a == 1.0:
        return float(weight(1.0))
    peak = 1.0 / math.gamma(1.0 + a)
    breaks = sorted({min(peak, cutoff / 2), min(1.0, cutoff / 2), min(2.0, cutoff / 2)})

    def f(th: float) -> float:
        return weight(th) * _wright_scalar(th, a, 1e-13)

    val, err = integrate.quad(f, 0.0, cutoff, points=breaks, limit=500, epsabs=epsabs, epsrel=1e-11)
    if err > 1e-8:
        raise NonConvergenceError(
            "density quadrature missed its tolerance", {"alpha": a, "error_estimate": err}
        )
    return val


def density_laplace(alpha: FractionalOrder | float, z: float, *, cutoff: float = TAIL_CUTOFF) -> float:
    """Laplace transform  int_0^inf zeta_alpha(theta) exp(-z theta) dtheta,  z >= 0."""
    if z < 0:
        raise DomainError(f"density_laplace requires z >= 0, got {z}")
    return density_integral(alpha, lambda th: math.exp(-z * th), cutoff=cutoff)


def density_moment(alpha: FractionalOrder | float, order: int = 1, *, cutoff: float = TAIL_CUTOFF) -> float:
    """Moment  int theta^order zeta_alpha(theta) dtheta; the first equals 1/Gamma(1+alpha)."""
    return density_integral(alpha, lambda th: th**order, cutoff=cutoff)
