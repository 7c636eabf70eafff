"""Scalar helper functions used by the cardinality estimators.

All functions here operate on plain floats (or numpy arrays where noted)
and are exact fixpoint or series evaluations, not approximations with
tunable accuracy: the loops run until the partial result stops changing
in double precision.

``ExtendedReal`` values are ordinary floats where ``math.inf`` is a
valid, meaningful result (for example ``sigma(1.0)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

ExtendedReal = float

LN2 = math.log(2.0)

ALPHA_INF = 1.0 / (2.0 * LN2)


def sigma_with_iterations(x: float) -> tuple[ExtendedReal, int]:
    """Like :func:`sigma`, but also report the number of loop passes."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"sigma is defined on [0, 1], got {x!r}")
    if x == 1.0:
        # the series diverges at 1; the loop below would never terminate
        return math.inf, 0
    y = 1.0
    z = x
    n = 0
    while True:
        x = x * x
        z_prev = z
        z = z + x * y
        y = y + y
        n += 1
        if z == z_prev:
            return z, n


def sigma(x: float) -> ExtendedReal:
    """Power series sum ``x + sum_k x^(2^k) * 2^(k-1)`` for x in [0, 1].

    Evaluated term by term until the double-precision partial sum stops
    changing. ``sigma(1.0)`` is ``inf``.
    """
    return sigma_with_iterations(x)[0]


def tau_with_iterations(x: float) -> tuple[float, int]:
    """Like :func:`tau`, but also report the number of loop passes."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"tau is defined on [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0, 0
    y = 1.0
    z = 1.0 - x
    n = 0
    while True:
        x = math.sqrt(x)
        z_prev = z
        y = 0.5 * y
        z = z - (1.0 - x) * (1.0 - x) * y
        n += 1
        if z == z_prev:
            return z / 3.0, n


def tau(x: float) -> float:
    """Repeated-square-root series ``(1 - x - sum_k (1 - x^(2^-k))^2 * 2^-k) / 3``.

    Evaluated for x in [0, 1] until the double-precision partial sum
    stops changing; 0 at both endpoints.
    """
    return tau_with_iterations(x)[0]


def h(x: float) -> float:
    """``1 - x / (e^x - 1)`` evaluated without cancellation for x >= 0.

    Uses a Taylor polynomial below 0.04, the ``expm1`` form in the middle,
    and saturates to 1.0 above 700 where ``e^x - 1`` would overflow.
    """
    if x < 0.0:
        raise ValueError(f"h is defined on [0, inf), got {x!r}")
    if x == 0.0:
        return 0.0
    if x > 700.0:
        return 1.0
    if x < 0.04:
        u = 0.5 * x
        v = u * u
        return u - v / 3.0 + v * v * (1.0 / 45.0 - v / 472.5)
    return 1.0 - x / math.expm1(x)


def h_recursion_step(x: float, h2x: float) -> float:
    """Given ``h2x == h(2 * x)``, return ``h(4 * x)``.

    One step of the argument-doubling recursion. Relative error in the
    ``h2x`` input contracts through the step, so chaining steps from a
    small, accurately known starting argument is numerically stable.
    """
    return (x + h2x * (1.0 - h2x)) / (x + (1.0 - h2x))


def xi(x):
    """Periodic series ``ln(2) * sum_k 2^(k+x) * exp(-2^(k+x))`` over all integers k.

    Has period 1 in ``x`` and stays within about ``1e-5`` of 1.0. Accepts
    a float or a numpy array; the symmetric term window is widened until
    the next term is below ``1e-20`` of the running total.
    """
    scalar = np.isscalar(x) or getattr(x, "ndim", 1) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    # reduce to [0, 1) so the exponentials in the window cannot overflow
    xs = xs - np.floor(xs)
    total = np.zeros_like(xs)
    k = 0
    while True:
        t = np.exp2(xs + k)
        term = t * np.exp(-t)
        if k > 0:
            t2 = np.exp2(xs - k)
            term = term + t2 * np.exp(-t2)
        total += term
        if k > 3 and float(np.max(term)) < 1e-20 * float(np.min(total)):
            break
        k += 1
    out = LN2 * total
    if scalar:
        return float(out[0])
    return out


def alpha(m) -> float:
    """Scale constant for a sketch with ``m`` registers.

    Defined through a normalizing integral; computed by adaptive
    quadrature. ``alpha(math.inf)`` returns the limiting constant
    ``1 / (2 ln 2)``. The integral diverges for ``m == 1``, where the
    scale factor degenerates to exactly 0.0.
    """
    if m == math.inf:
        return ALPHA_INF
    if not isinstance(m, (int, np.integer)):
        raise ValueError(f"m must be an integer or math.inf, got {m!r}")
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m!r}")
    if m == 1:
        return 0.0
    val, _ = quad(
        lambda u: math.log2(1.0 + u) ** m / (u * u),
        0.0,
        1.0,
        epsabs=0.0,
        epsrel=1e-11,
        limit=200,
    )
    return 1.0 / (m * val)


def _sigma_array(x: np.ndarray) -> np.ndarray:
    """Vectorized :func:`sigma` for values in [0, 1); same per-element math."""
    x = x.astype(np.float64, copy=True)
    y = np.ones_like(x)
    z = x.copy()
    while True:
        np.multiply(x, x, out=x)
        z_prev = z.copy()
        z += x * y
        y += y
        # once an element's sum stops changing it stays fixed: the added
        # terms are decreasing, so later ones underflow against z too
        if np.array_equal(z, z_prev):
            return z


def _tau_array(x: np.ndarray) -> np.ndarray:
    """Vectorized :func:`tau`; endpoints 0 and 1 map to 0."""
    x = x.astype(np.float64, copy=True)
    out = np.zeros_like(x)
    interior = (x > 0.0) & (x < 1.0)
    x = x[interior]
    y = np.ones_like(x)
    z = 1.0 - x
    while True:
        np.sqrt(x, out=x)
        z_prev = z.copy()
        y *= 0.5
        z -= (1.0 - x) ** 2 * y
        if np.array_equal(z, z_prev):
            break
    out[interior] = z / 3.0
    return out


@dataclass(frozen=True)
class SigmaTauTables:
    """Precomputed ``m * sigma(j / m)`` and ``m * tau(1 - j / m)`` for j = 0..m.

    Trades ``O(m)`` memory for constant-time lookups in the estimator hot
    path. ``scaled_sigma[m]`` is ``inf`` (all registers still zero).
    """

    m: int
    scaled_sigma: np.ndarray
    scaled_tau: np.ndarray

    @classmethod
    def for_register_count(cls, m: int) -> "SigmaTauTables":
        if m < 1:
            raise ValueError(f"m must be at least 1, got {m!r}")
        grid = np.arange(m + 1, dtype=np.float64) / m
        scaled_sigma = np.empty(m + 1, dtype=np.float64)
        scaled_sigma[:m] = m * _sigma_array(grid[:m])
        scaled_sigma[m] = math.inf
        scaled_tau = m * _tau_array(1.0 - grid)
        scaled_sigma.setflags(write=False)
        scaled_tau.setflags(write=False)
        return cls(m=m, scaled_sigma=scaled_sigma, scaled_tau=scaled_tau)
