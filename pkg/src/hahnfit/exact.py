"""Exact rational reference path for the discrete Chebyshev family.

Every quantity in the defining sum is rational at rational arguments, so for
small lattices (N up to a few tens) the polynomial values, squared norms and
pairwise grid inner products can be computed without any rounding at all.
This is the reference the floating-point paths are validated against.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .analytic import HahnParams, pochhammer

__all__ = [
    "hahn_value_exact",
    "hahn_norm_sq_exact",
    "normalized_hahn_value_exact",
    "grid_inner_product_exact",
    "normalized_value_matrix",
]


def hahn_value_exact(params: HahnParams, x) -> Fraction:
    """Q_n^N(x) as an exact Fraction; x may be int or Fraction."""
    N, n = params.N, params.n
    xf = Fraction(x)
    total = Fraction(0)
    for k in range(n + 1):
        fall_x = pochhammer(xf, -k)
        if fall_x == 0:
            break
        term = (
            Fraction((-1) ** k)
            * pochhammer(n, -k)
            * pochhammer(n + 1, k)
            * fall_x
            / (math.factorial(k) ** 2 * pochhammer(N, -k))
        )
        total += term
    return total


def hahn_norm_sq_exact(params: HahnParams) -> Fraction:
    """(N+1)_{n+1} / ((2n+1) (N)_{-n}) as an exact Fraction."""
    N, n = params.N, params.n
    return Fraction(pochhammer(N + 1, n + 1), (2 * n + 1) * pochhammer(N, -n))


def normalized_hahn_value_exact(params: HahnParams, x) -> float:
    """Unit-norm value computed from exact rationals, rounded to float at the end."""
    q = hahn_value_exact(params, x)
    if q == 0:
        return 0.0
    h = hahn_norm_sq_exact(params)
    ratio_sq = q * q / h
    return math.copysign(math.sqrt(float(ratio_sq)), q)


def grid_inner_product_exact(N: int, i: int, j: int) -> Fraction:
    """sum_{x=0}^{N} Q_i^N(x) Q_j^N(x), exactly."""
    pi = HahnParams(N=N, n=i)
    pj = HahnParams(N=N, n=j)
    return sum(
        (hahn_value_exact(pi, x) * hahn_value_exact(pj, x) for x in range(N + 1)),
        Fraction(0),
    )


def normalized_value_matrix(N: int, max_degree: int | None = None) -> np.ndarray:
    """(N+1) x (M+1) matrix of exact unit-norm values at the grid points."""
    M = N if max_degree is None else max_degree
    out = np.empty((N + 1, M + 1))
    for n in range(M + 1):
        params = HahnParams(N=N, n=n)
        h = hahn_norm_sq_exact(params)
        for x in range(N + 1):
            q = hahn_value_exact(params, x)
            if q == 0:
                out[x, n] = 0.0
            else:
                out[x, n] = math.copysign(math.sqrt(float(q * q / h)), q)
    return out
