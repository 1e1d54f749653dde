"""Filon-type quadrature for integrals of f(x) exp(i omega x) on [0, h].

The weights b_i(i theta) = int_0^1 l_i(x) exp(i theta x) dx integrate the
cardinal polynomials l_i on the nodes against the oscillatory factor. They
are built from the moments mu_m(theta) = int_0^1 x^m exp(i theta x) dx.

The weights themselves expand l_i in powers of the centred variable
u = 2x - 1, whose Vandermonde matrix on [-1, 1] is far better conditioned
than the one on [0, 1]; the matching moments are
nu_m(phi) = int_{-1}^1 u^m exp(i phi u) du with phi = theta / 2.
"""

from __future__ import annotations

import numpy as np

from .numcore import QuadratureRule

THETA_SWITCH = 0.5
_TAYLOR_MAX_TERMS = 400


def _moment_taylor(theta: float, m: int) -> complex:
    # sum_k (i theta)^k / (k! (m + k + 1))
    total = 0j
    term = 1.0 + 0j
    for k in range(_TAYLOR_MAX_TERMS):
        if k > 0:
            term *= 1j * theta / k
        add = term / (m + k + 1)
        total += add
        if k > abs(theta) and abs(add) < 1e-18:
            break
    return total


def filon_moments(theta: float, mmax: int) -> np.ndarray:
    """mu_0 ... mu_mmax at theta.

    Upward recursion mu_m = (e^{i theta} - m mu_{m-1}) / (i theta) is used
    while it is stable (|theta| >= max(THETA_SWITCH, m)); the Taylor series
    covers the rest.
    """
    if mmax < 0:
        raise ValueError("mmax must be >= 0")
    theta = float(theta)
    mu = np.empty(mmax + 1, dtype=complex)
    e = np.exp(1j * theta)
    for m in range(mmax + 1):
        if abs(theta) >= max(THETA_SWITCH, m):
            prev = (e - 1.0) / (1j * theta) if m == 0 else mu[m - 1]
            mu[m] = prev if m == 0 else (e - m * prev) / (1j * theta)
        else:
            mu[m] = _moment_taylor(theta, m)
    return mu


def filon_moment(theta: float, m: int) -> complex:
    if m < 0:
        raise ValueError("moment order must be >= 0")
    return complex(filon_moments(theta, m)[m])


def cardinal_monomials(points) -> np.ndarray:
    """Coefficient matrix A with l_i(x) = sum_m A[m, i] x^m."""
    c = np.asarray(points, dtype=float)
    if np.any(np.diff(np.sort(c)) <= 0):
        raise ValueError("points must be distinct")
    V = np.vander(c, increasing=True)
    return np.linalg.inv(V)


def _centred_taylor(phi: float, m: int) -> complex:
    # sum_k (i phi)^k / k! * (1 + (-1)^(m+k)) / (m + k + 1)
    total = 0j
    term = 1.0 + 0j
    for k in range(_TAYLOR_MAX_TERMS):
        if k > 0:
            term *= 1j * phi / k
        if (m + k) % 2 == 0:
            add = 2.0 * term / (m + k + 1)
            total += add
            if k > abs(phi) and abs(add) < 1e-18:
                break
    return total


def centred_moments(phi: float, mmax: int) -> np.ndarray:
    """nu_0 ... nu_mmax with nu_m(phi) = int_{-1}^1 u^m exp(i phi u) du."""
    if mmax < 0:
        raise ValueError("mmax must be >= 0")
    phi = float(phi)
    nu = np.empty(mmax + 1, dtype=complex)
    ep, em = np.exp(1j * phi), np.exp(-1j * phi)
    for m in range(mmax + 1):
        if abs(phi) >= max(THETA_SWITCH, m):
            prev = 0.0 if m == 0 else nu[m - 1]
            nu[m] = (ep - (-1) ** m * em - m * prev) / (1j * phi)
        else:
            nu[m] = _centred_taylor(phi, m)
    return nu


def _centred_monomials(points) -> np.ndarray:
    """Coefficients of l_i in powers of u = 2x - 1."""
    return cardinal_monomials(2.0 * np.asarray(points, dtype=float) - 1.0)


def filon_weights(points, theta: float) -> np.ndarray:
    A = _centred_monomials(points)
    nu = centred_moments(0.5 * theta, len(points) - 1)
    return 0.5 * np.exp(0.5j * theta) * (nu @ A)


def filon_weights_dtheta(points, theta: float) -> np.ndarray:
    """Derivative of the weights in theta: i int_0^1 x l_i(x) exp(i theta x) dx."""
    A = _centred_monomials(points)
    nu = centred_moments(0.5 * theta, len(points))
    # x = (1 + u) / 2
    return 0.25j * np.exp(0.5j * theta) * ((nu[:-1] + nu[1:]) @ A)


def filon_integrate(f, omega: float, h: float, points) -> complex:
    """Q = h sum_i b_i(i h omega) f(c_i h), approximating int_0^h f(x) exp(i omega x) dx."""
    c = np.asarray(points.points if isinstance(points, QuadratureRule) else points, dtype=float)
    vals = np.array([f(ci * h) for ci in c])
    return complex(h * np.dot(filon_weights(c, h * omega), vals))


def taylor_moment_reference(theta: float, m: int, terms: int = 200) -> complex:
    """Plain power series; only for checks at modest |theta|."""
    total, term = 0j, 1.0 + 0j
    for k in range(terms):
        if k > 0:
            term *= 1j * theta / k
        total += term / (m + k + 1)
    return total
