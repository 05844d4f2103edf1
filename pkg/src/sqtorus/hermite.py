"""Hermite (Wick) polynomials with variance parameter.

``H_0 = 1`` and ``H_n = x H_{n-1} - sigma2 * H_{n-1}'``.  The coefficient form is
built by that recursion with generic arithmetic, so passing a
:class:`fractions.Fraction` (or an int) for ``sigma2`` gives exact
coefficients.  Numerical evaluation uses the equivalent three-term recurrence
``H_n = x H_{n-1} - (n-1) sigma2 H_{n-2}``.
"""

from dataclasses import dataclass
from math import comb

import numpy as np

MAX_DEGREE = 12


@dataclass(frozen=True)
class HermitePoly:
    """Monic Hermite polynomial ``H_n^{sigma2}`` in coefficient form.

    ``coeffs[j]`` multiplies ``x**j``.
    """

    degree: int
    variance: object
    coeffs: tuple

    def __call__(self, x):
        # Horner; kept for tests, evaluation proper goes through hermite_eval
        out = 0 * np.asarray(x, dtype=float) + self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            out = out * x + c
        return out

    def derivative(self):
        return tuple(j * c for j, c in enumerate(self.coeffs))[1:]


def _check(n, sigma2):
    if n < 0 or int(n) != n:
        raise ValueError(f"degree must be a non-negative integer, got {n!r}")
    if sigma2 < 0:
        raise ValueError(f"variance must be >= 0, got {sigma2!r}")


def hermite_coeffs(n, sigma2):
    """Coefficients of ``H_n^{sigma2}`` from the derivative recursion."""
    _check(n, sigma2)
    coeffs = [1]
    for _ in range(n):
        # x * H  shifts up; sigma2 * H' shifts down with weights j
        new = [0] * (len(coeffs) + 1)
        for j, c in enumerate(coeffs):
            new[j + 1] += c
            if j > 0:
                new[j - 1] -= sigma2 * j * c
        coeffs = new
    return HermitePoly(degree=int(n), variance=sigma2, coeffs=tuple(coeffs))


def hermite_eval(n, sigma2, x):
    """Evaluate ``H_n^{sigma2}(x)``; ``x`` may be a scalar or an array."""
    _check(n, sigma2)
    x = np.asarray(x, dtype=float)
    if n == 0:
        out = np.ones_like(x)
    else:
        prev, cur = np.ones_like(x), x.copy()
        for m in range(2, n + 1):
            prev, cur = cur, x * cur - (m - 1) * sigma2 * prev
        out = cur
    return out if out.ndim else float(out)


def hermite_all(n, sigma2, x):
    """Stack ``[H_0(x), ..., H_n(x)]`` along a new leading axis."""
    _check(n, sigma2)
    x = np.asarray(x, dtype=float)
    out = np.empty((n + 1,) + x.shape)
    out[0] = 1.0
    if n >= 1:
        out[1] = x
    for m in range(2, n + 1):
        out[m] = x * out[m - 1] - (m - 1) * sigma2 * out[m - 2]
    return out


def hermite_shift(n, sigma2, x, y):
    """Binomial expansion ``sum_j C(n, j) x^j H_{n-j}(y)``, equal to ``H_n(x + y)``."""
    _check(n, sigma2)
    x = np.asarray(x, dtype=float)
    hs = hermite_all(n, sigma2, y)
    total = np.zeros(np.broadcast(x, hs[0]).shape)
    xpow = np.ones_like(x)
    for j in range(n + 1):
        total = total + comb(n, j) * xpow * hs[n - j]
        xpow = xpow * x
    return total if total.ndim else float(total)
