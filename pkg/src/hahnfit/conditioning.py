"""Condition-number diagnostics contrasting the raw monomial design matrix with
the orthogonal basis.

The monomial condition numbers of interest exceed what double-precision SVD can
resolve, so the Gram matrix is formed in exact rational arithmetic on a rational
grid and its eigenvalue ratio is taken with a multi-precision solver; the design
matrix condition estimate is the square root of that ratio.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from mpmath import mp

__all__ = ["monomial_condition_estimate", "basis_gram_condition"]


def monomial_condition_estimate(n_points: int, max_degree: int, dps: int = 60) -> float:
    """Spectral condition estimate of the monomial design matrix on the uniform
    rational grid {0, 1/(n-1), ..., 1}, degrees 0..max_degree.

    Gram entries G[i][k] = sum_j x_j^(i+k) are exact; eigenvalues are computed at
    ``dps`` decimal digits and cond(design) = sqrt(cond(Gram)).
    """
    if n_points < 2 or max_degree < 0:
        raise ValueError("need n_points >= 2 and max_degree >= 0")
    xs = [Fraction(j, n_points - 1) for j in range(n_points)]
    powers = [[x**d for d in range(2 * max_degree + 1)] for x in xs]
    gram = [
        [sum(powers[j][i + k] for j in range(n_points)) for k in range(max_degree + 1)]
        for i in range(max_degree + 1)
    ]
    old_dps = mp.dps
    try:
        mp.dps = dps
        A = mp.matrix(max_degree + 1)
        for i in range(max_degree + 1):
            for k in range(max_degree + 1):
                g = gram[i][k]
                A[i, k] = mp.mpf(g.numerator) / mp.mpf(g.denominator)
        eigenvalues, _ = mp.eigsy(A)
        lam = [eigenvalues[i] for i in range(max_degree + 1)]
        lam_min = min(lam)
        lam_max = max(lam)
        if lam_min <= 0:
            return float("inf")
        return float(mp.sqrt(lam_max / lam_min))
    finally:
        mp.dps = old_dps


def basis_gram_condition(values: np.ndarray) -> float:
    """Double-precision condition number of the Gram matrix of basis columns."""
    gram = values.T @ values
    return float(np.linalg.cond(gram))
