"""Spherical Bessel/Hankel functions and Legendre polynomials.

Recurrence-based kernels sized for scattering series truncated around
order 32: real positive arguments, orders up to ~64. j_n is evaluated
by downward (Miller) recurrence normalized against the closed-form
j_0/j_1, which stays stable for n > x where the upward recurrence
blows up; y_n (and hence h_n^(1)) runs upward, which is stable.
Derivatives come from the recurrence identity

    f_n'(x) = f_{n-1}(x) - ((n + 1)/x) * f_n(x)

shared by j, y and h^(1), with the order -1 members supplied in closed
form (j_{-1} = cos(x)/x, y_{-1} = sin(x)/x).
"""

from __future__ import annotations

import math

import numpy as np

# Extra orders above n_max where the Miller recursion is seeded; the
# seed error decays faster than geometrically over this margin.
_MILLER_MARGIN = 32
_RESCALE_LIMIT = 1e250


def _check_args(n: int, x: float) -> None:
    if n < 0:
        raise ValueError(f"order must be nonnegative, got n={n}")
    if not x > 0:
        raise ValueError(f"argument must be positive, got x={x}")


def spherical_jn_seq(n_max: int, x: float) -> np.ndarray:
    """Return [j_0(x), ..., j_n_max(x)].

    Downward (Miller) recurrence normalized against the closed-form
    j_0/j_1 where upward recursion would be unstable (n_max >= x);
    plain upward recurrence where it is stable (x > n_max); leading
    series term j_n = x^n/(2n+1)!! for tiny arguments.
    """
    _check_args(n_max, x)
    vals = np.empty(n_max + 1)
    if x < 1e-8:
        # relative series truncation error O(x^2) is below double precision
        term = math.sin(x) / x
        vals[0] = term
        for n in range(1, n_max + 1):
            term *= x / (2 * n + 1)
            vals[n] = term
        return vals
    if x > n_max:
        vals[0] = math.sin(x) / x
        if n_max >= 1:
            vals[1] = (math.sin(x) / x - math.cos(x)) / x
        for n in range(1, n_max):
            vals[n + 1] = (2 * n + 1) / x * vals[n] - vals[n - 1]
        return vals

    n_start = n_max + _MILLER_MARGIN
    down = np.zeros(n_start + 2)
    down[n_start] = 1e-30
    for n in range(n_start, 0, -1):
        down[n - 1] = (2 * n + 1) / x * down[n] - down[n + 1]
        if abs(down[n - 1]) > _RESCALE_LIMIT:
            down[n - 1:] /= _RESCALE_LIMIT
    j0 = math.sin(x) / x
    j1 = (math.sin(x) / x - math.cos(x)) / x
    # normalize against whichever closed form is farther from a zero
    if abs(j0) >= abs(j1):
        scale = j0 / down[0]
    else:
        scale = j1 / down[1]
    return down[: n_max + 1] * scale


def spherical_yn_seq(n_max: int, x: float) -> np.ndarray:
    """Return [y_0(x), ..., y_n_max(x)] by upward recurrence."""
    _check_args(n_max, x)
    vals = np.empty(n_max + 1)
    vals[0] = -math.cos(x) / x
    if n_max >= 1:
        vals[1] = -(math.cos(x) / x + math.sin(x)) / x
    for n in range(1, n_max):
        vals[n + 1] = (2 * n + 1) / x * vals[n] - vals[n - 1]
    return vals


def spherical_h1_seq(n_max: int, x: float) -> np.ndarray:
    """Return [h_0^(1)(x), ..., h_n_max^(1)(x)] = j + i*y."""
    return spherical_jn_seq(n_max, x) + 1j * spherical_yn_seq(n_max, x)


def spherical_bessel_j(n: int, x: float) -> float:
    """Spherical Bessel function of the first kind, j_n(x)."""
    _check_args(n, x)
    return float(spherical_jn_seq(n, x)[n])


def spherical_bessel_y(n: int, x: float) -> float:
    """Spherical Bessel function of the second kind, y_n(x)."""
    _check_args(n, x)
    return float(spherical_yn_seq(n, x)[n])


def spherical_hankel_h1(n: int, x: float) -> complex:
    """Spherical Hankel function of the first kind, j_n(x) + i*y_n(x)."""
    _check_args(n, x)
    return complex(spherical_bessel_j(n, x) + 1j * spherical_bessel_y(n, x))


def sph_derivative(f_nm1, f_n, n: int, x: float):
    """Derivative of a spherical Bessel-family function from its values.

    Evaluates f_n'(x) = f_{n-1}(x) - ((n+1)/x) f_n(x), valid for j, y
    and h^(1) alike. For n = 0 the caller supplies the order -1 value
    (cos(x)/x for j, sin(x)/x for y, exp(ix)/x for h^(1)).
    """
    if not x > 0:
        raise ValueError(f"argument must be positive, got x={x}")
    return f_nm1 - (n + 1) / x * f_n


def _deriv_seq(seq: np.ndarray, f_m1, x: float) -> np.ndarray:
    below = np.concatenate([[f_m1], seq[:-1]])
    orders = np.arange(len(seq))
    return below - (orders + 1) / x * seq


def spherical_jn_deriv_seq(n_max: int, x: float) -> np.ndarray:
    """Return [j_0'(x), ..., j_n_max'(x)]."""
    return _deriv_seq(spherical_jn_seq(n_max, x), math.cos(x) / x, x)


def spherical_h1_deriv_seq(n_max: int, x: float) -> np.ndarray:
    """Return [h_0^(1)'(x), ..., h_n_max^(1)'(x)]."""
    h_m1 = (math.cos(x) + 1j * math.sin(x)) / x
    return _deriv_seq(spherical_h1_seq(n_max, x), h_m1, x)


def legendre_p(n: int, t: float) -> float:
    """Legendre polynomial P_n(t) on [-1, 1] via the three-term recurrence."""
    if n < 0:
        raise ValueError(f"order must be nonnegative, got n={n}")
    if t < -1.0 or t > 1.0:
        raise ValueError(f"argument must lie in [-1, 1], got t={t}")
    if n == 0:
        return 1.0
    p_prev, p = 1.0, t
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * t * p - k * p_prev) / (k + 1)
    return p
