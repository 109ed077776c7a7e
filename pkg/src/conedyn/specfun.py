"""Special functions and quadrature used by the quantum modules.

One home for everything the eigenproblems need: Gamma, Bessel J of real
order, generalized Laguerre and (physicists') Hermite polynomials, the
polynomial branch of the Kummer function U, the sign function, and
Gauss-Legendre / adaptive quadrature.

Gamma and Bessel J delegate to scipy.special behind domain guards; the
orthogonal polynomials use their upward three-term recurrences directly
(stable for the orders needed here, n <= 50), which keeps an independent
route available for cross-checking against scipy in the test suite.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.special

from .errors import AccuracyError, DomainError

__all__ = [
    "QuadratureRule",
    "gamma",
    "bessel_j",
    "laguerre",
    "hermite",
    "kummer_u_poly",
    "sign",
    "gauss_legendre",
    "integrate_quad",
]


def gamma(x):
    """Gamma function for positive real argument.

    Poles and the negative axis are rejected: the normalization constants
    that need Gamma only ever evaluate it at x > 0.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise DomainError("gamma requires x > 0")
    out = scipy.special.gamma(x)
    return float(out) if out.ndim == 0 else out


def bessel_j(nu, x):
    """Bessel function of the first kind J_nu(x) for real order nu >= -1/2.

    Orders below -1/2 are rejected: the continuum normalization built on
    the closure relation breaks down there, so the quantum modules never
    need them.  Arguments must be nonnegative; lower-nappe radial profiles
    are evaluated on |l|.
    """
    if nu < -0.5:
        raise DomainError(f"bessel_j requires nu >= -1/2, got {nu}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise DomainError("bessel_j requires x >= 0")
    out = scipy.special.jv(nu, x)
    return float(out) if out.ndim == 0 else out


def laguerre(n: int, a: float, x):
    """Generalized Laguerre polynomial L_n^a(x) via the upward recurrence.

    (k+1) L_{k+1}^a = (2k + 1 + a - x) L_k^a - (k + a) L_{k-1}^a
    """
    if n < 0 or n != int(n):
        raise DomainError(f"laguerre requires integer n >= 0, got {n!r}")
    if a <= -1.0:
        raise DomainError(f"laguerre requires a > -1, got {a}")
    n = int(n)
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return float(prev) if prev.ndim == 0 else prev
    cur = 1.0 + a - x
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + a - x) * cur - (k + a) * prev) / (k + 1)
    return float(cur) if cur.ndim == 0 else cur


def hermite(n: int, x):
    """Physicists' Hermite polynomial H_n(x) via H_{k+1} = 2x H_k - 2k H_{k-1}."""
    if n < 0 or n != int(n):
        raise DomainError(f"hermite requires integer n >= 0, got {n!r}")
    n = int(n)
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return float(prev) if prev.ndim == 0 else prev
    cur = 2.0 * x
    for k in range(1, n):
        prev, cur = cur, 2.0 * x * cur - 2.0 * k * prev
    return float(cur) if cur.ndim == 0 else cur


def kummer_u_poly(n: int, b: float, x):
    """Kummer function U(-n, b, x) on its polynomial branch.

    For nonnegative integer n the confluent hypergeometric function of the
    second kind degenerates to U(-n, b, x) = (-1)^n n! L_n^{b-1}(x).  Only
    this branch is needed: the bound-state quantization makes the first
    argument a nonpositive integer.
    """
    if n < 0 or n != int(n):
        raise DomainError(f"kummer_u_poly requires integer n >= 0, got {n!r}")
    n = int(n)
    return (-1.0) ** n * math.factorial(n) * laguerre(n, b - 1.0, x)


def sign(x):
    """Sign function: -1, 0, or +1 (elementwise on arrays)."""
    out = np.sign(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a fixed quadrature rule on (-1, 1)."""

    nodes: np.ndarray
    weights: np.ndarray

    def apply(self, f, a: float, b: float) -> float:
        """Apply the rule to f on [a, b] by affine mapping."""
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        x = mid + half * self.nodes
        return float(half * np.sum(self.weights * np.asarray(f(x), dtype=float)))


def gauss_legendre(n: int) -> QuadratureRule:
    """Gauss-Legendre rule with n nodes (exact on polynomials of degree 2n-1)."""
    if n < 1:
        raise DomainError(f"gauss_legendre requires n >= 1, got {n}")
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(nodes=nodes, weights=weights)


def integrate_quad(f, a: float, b: float, tol: float = 1e-10,
                   rule: QuadratureRule | None = None,
                   endpoint_exponents: tuple[float, float] | None = None,
                   limit: int = 400) -> float:
    """Integrate f over [a, b], adaptively or with a fixed rule.

    With ``rule`` given, applies the fixed rule on the (finite) interval.
    Otherwise runs adaptive quadrature to absolute/relative tolerance
    ``tol``; either endpoint may be infinite.  ``endpoint_exponents``
    (p, q) declares integrable algebraic behavior (x-a)^p (b-x)^q so the
    adaptive scheme can soak it up (requires a finite interval and
    p, q > -1).

    Raises :class:`AccuracyError`, carrying the best estimate, when the
    requested tolerance cannot be certified.
    """
    if rule is not None:
        if not (np.isfinite(a) and np.isfinite(b)):
            raise DomainError("fixed-rule quadrature needs a finite interval")
        return rule.apply(f, a, b)

    kwargs = dict(epsabs=tol, epsrel=tol, limit=limit)
    if endpoint_exponents is not None:
        p, q = endpoint_exponents
        if p <= -1.0 or q <= -1.0:
            raise DomainError("endpoint exponents must exceed -1")
        if not (np.isfinite(a) and np.isfinite(b)):
            raise DomainError("endpoint exponents require a finite interval")
        kwargs.update(weight="alg", wvar=(p, q))

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", scipy.integrate.IntegrationWarning)
        value, err = scipy.integrate.quad(f, a, b, **kwargs)
    trouble = [w for w in caught if issubclass(w.category, scipy.integrate.IntegrationWarning)]
    if trouble and err > tol * max(1.0, abs(value)):
        raise AccuracyError(
            f"quadrature did not converge on [{a}, {b}]: "
            f"estimated error {err:.3e} exceeds tol {tol:.3e}",
            estimate=value,
        )
    return value
