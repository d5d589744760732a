"""Closed-form evaluation of discrete Chebyshev (Hahn, alpha = beta = 0) polynomials
on the integer lattice {0, ..., N} with unit weights, plus the endpoint-decay
estimation machinery built on the summand profile of the defining sum.

Individual summands of the defining sum span hundreds of orders of magnitude, so
all evaluation runs in a sign/log-magnitude representation: terms are generated
by a multiplicative recurrence on (sign, log|term|), rescaled by the largest
magnitude and accumulated with exact compensated summation.  Results that exceed
the double range overflow to +-inf rather than raising.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "HahnParams",
    "SummandProfile",
    "RootBounds",
    "DecayRegimeWarning",
    "pochhammer",
    "hahn_value",
    "hahn_value_log",
    "hahn_norm_sq",
    "log_norm_sq",
    "normalized_hahn_value",
    "summand_profile",
    "summand_ratio",
    "cubic_f",
    "cubic_f_tilde",
    "tilde_params",
    "root_bounds",
    "in_decay_regime",
    "decay_bound",
]

_LOG_FLOAT_MAX = math.log(np.finfo(np.float64).max)


class DecayRegimeWarning(UserWarning):
    """Parameters fall outside the regime (large degree, small argument) where the
    monotonicity/concavity argument behind the root bounds is established."""


@dataclass(frozen=True)
class HahnParams:
    """Degree/lattice pair for the discrete Chebyshev family on {0, ..., N}."""

    N: int
    n: int

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError(f"lattice upper index must be >= 1, got N={self.N}")
        if not 0 <= self.n <= self.N:
            raise ValueError(f"degree must satisfy 0 <= n <= N, got n={self.n}, N={self.N}")


def pochhammer(a, k: int):
    """Generalized Pochhammer symbol (a)_k.

    Rising product a(a+1)...(a+k-1) for k > 0, the empty product 1 for k = 0,
    and the falling product a(a-1)...(a+k+1) for k < 0.  Exact for int and
    Fraction inputs; float inputs may overflow to +-inf, which is accepted.
    """
    if k == 0:
        return a ** 0  # 1 in the type of `a`
    result = a ** 0
    if k > 0:
        for i in range(k):
            result = result * (a + i)
    else:
        for i in range(-k):
            result = result * (a - i)
    return result


def _term_logs(n: int, N: int, x: float) -> tuple[list[float], list[int]]:
    """Log-magnitudes and signs of the summands of the defining sum at argument x,
    alternation included.  Terms after an exact zero of the falling factorial of
    x all vanish and are dropped.
    """
    logs = [0.0]
    signs = [1]
    log_t = 0.0
    sign_t = 1
    for k in range(1, n + 1):
        fx = x - k + 1
        if fx == 0.0:
            break
        log_t += (
            math.log(n - k + 1)
            + math.log(n + k)
            + math.log(abs(fx))
            - 2.0 * math.log(k)
            - math.log(N - k + 1)
        )
        sign_t *= -1 if fx > 0 else 1  # the factor sign times the alternation
        logs.append(log_t)
        signs.append(sign_t)
    return logs, signs


def _accumulate(logs: list[float], signs: list[int]) -> tuple[int, float]:
    """Sum sign_i * exp(log_i) in a scale-free way; returns (sign, log|sum|)."""
    peak = max(logs)
    if peak == -math.inf:
        return 0, -math.inf
    total = math.fsum(s * math.exp(l - peak) for l, s in zip(logs, signs))
    if total == 0.0:
        return 0, -math.inf
    return (1 if total > 0 else -1), peak + math.log(abs(total))


def _exp_signed(sign: int, log_abs: float) -> float:
    if sign == 0 or log_abs == -math.inf:
        return 0.0
    if log_abs > _LOG_FLOAT_MAX:
        return math.inf * sign
    return sign * math.exp(log_abs)


def hahn_value_log(params: HahnParams, x: float) -> tuple[int, float]:
    """(sign, log|Q_n^N(x)|) of the unnormalized polynomial; sign 0 means exact zero.

    Arguments beyond the lattice midpoint are reflected through the exact
    symmetry Q_n^N(N - x) = (-1)^n Q_n^N(x): the defining sum cancels
    catastrophically on the far wing but is benign on the near one.
    """
    x = float(x)
    flip = 1
    if x > params.N / 2.0:
        x = params.N - x
        flip = (-1) ** params.n
    logs, signs = _term_logs(params.n, params.N, x)
    sign, log_abs = _accumulate(logs, signs)
    return sign * flip, log_abs


def hahn_value(params: HahnParams, x: float) -> float:
    """Value of the degree-n discrete Chebyshev polynomial at real argument x.

    At integer x = m only the first min(m, n) + 1 summands are nonzero; between
    integers all n + 1 contribute and the value can be astronomically large.
    """
    sign, log_abs = hahn_value_log(params, x)
    return _exp_signed(sign, log_abs)


def log_norm_sq(params: HahnParams) -> float:
    """log of the squared grid norm sum_{x=0}^{N} Q_n^N(x)^2."""
    N, n = params.N, params.n
    return (
        math.lgamma(N + n + 2)
        - 2.0 * math.lgamma(N + 1)
        + math.lgamma(N - n + 1)
        - math.log(2 * n + 1)
    )


def hahn_norm_sq(params: HahnParams) -> float:
    """Squared grid norm of Q_n^N; strictly positive, may overflow to +inf."""
    lg = log_norm_sq(params)
    if lg > _LOG_FLOAT_MAX:
        return math.inf
    return math.exp(lg)


def normalized_hahn_value(params: HahnParams, x: float) -> float:
    """Value of the unit-norm polynomial, Q_n^N(x) / sqrt(norm_sq)."""
    sign, log_abs = hahn_value_log(params, x)
    if sign == 0:
        return 0.0
    return _exp_signed(sign, log_abs - 0.5 * log_norm_sq(params))


@dataclass(frozen=True)
class SummandProfile:
    """Signed summands q(k) of the defining sum at integer argument m <= n.

    ``values[k]`` is the k-th summand without the (-1)^k alternation; on this
    domain all of them are positive.  ``peak_abs`` is the largest magnitude,
    attained at ``peak_index``.  ``log_abs_values`` carries the magnitudes in
    log space for parameter ranges where the floats overflow.
    """

    N: int
    n: int
    m: int
    values: np.ndarray
    peak_index: int
    peak_abs: float
    log_abs_values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


def _check_profile_args(N: int, n: int, m: int) -> None:
    if m > n:
        raise ValueError(f"summand profile requires m <= n, got m={m}, n={n}")
    if not 0 <= m:
        raise ValueError(f"m must be nonnegative, got {m}")
    if not n <= N:
        raise ValueError(f"degree must satisfy n <= N, got n={n}, N={N}")
    if N < 1:
        raise ValueError(f"lattice upper index must be >= 1, got N={N}")


def summand_ratio(N: int, n: int, m: int, k: int) -> float:
    """|q(k) / q(k-1)| in closed form: (n-k+1)(n+k)(m-k+1) / (k^2 (N-k+1))."""
    _check_profile_args(N, n, m)
    if not 1 <= k <= min(m, n):
        raise ValueError(f"ratio defined for 1 <= k <= min(m, n), got k={k}")
    return ((n - k + 1) * (n + k) * (m - k + 1)) / (k * k * (N - k + 1))


def summand_profile(N: int, n: int, m: int) -> SummandProfile:
    """All summands q(k), k = 0..min(m, n), with the peak located by ratio scan.

    The scan takes the peak at the last k before the ratio |q(k)/q(k-1)| first
    drops to <= 1; if the ratio re-crosses 1 afterwards the scan is abandoned
    for a full argmax over magnitudes.
    """
    _check_profile_args(N, n, m)
    kmax = min(m, n)
    logs = np.zeros(kmax + 1)
    ratios = np.empty(kmax + 1)
    ratios[0] = math.inf
    for k in range(1, kmax + 1):
        r = summand_ratio(N, n, m, k)
        ratios[k] = r
        logs[k] = logs[k - 1] + math.log(r)

    below = ratios[1:] <= 1.0
    if not below.any():
        peak = kmax
    else:
        first = int(np.argmax(below)) + 1
        if below[first - 1 :].all():
            peak = first - 1
        else:
            peak = int(np.argmax(logs))

    with np.errstate(over="ignore"):
        values = np.exp(logs)
    peak_abs = float(values[peak])
    values.setflags(write=False)
    logs.setflags(write=False)
    return SummandProfile(N=N, n=n, m=m, values=values, peak_index=peak,
                          peak_abs=peak_abs, log_abs_values=logs)


def tilde_params(N: int, n: int, m: int) -> tuple[int, int, int]:
    """Substituted parameters (N+2, n(n+1), m+1) of the reduced cubic."""
    return N + 2, n * (n + 1), m + 1


def cubic_f(N: int, n: int, m: int, k: float) -> float:
    """Cubic whose root in (0, m+1) locates the summand peak:
    2k^3 - (N+m+3)k^2 + ((m+1) - n(n+1))k + (m+1)n(n+1).
    """
    Nt, nt, mt = tilde_params(N, n, m)
    return cubic_f_tilde(Nt, nt, mt, k)


def cubic_f_tilde(Nt: int, nt: int, mt: int, k: float) -> float:
    """The same cubic in substituted form: 2k^3 - (Nt+mt)k^2 + (mt-nt)k + mt*nt."""
    return 2.0 * k**3 - (Nt + mt) * k**2 + (mt - nt) * k + mt * nt


def _cubic_fprime_tilde(Nt: int, nt: int, mt: int, k: float) -> float:
    return 6.0 * k**2 - 2.0 * (Nt + mt) * k + (mt - nt)


class RootBounds(tuple):
    """(lower, upper) bracket for the cubic's root in (0, m+1)."""

    __slots__ = ()

    def __new__(cls, lower: float, upper: float):
        return super().__new__(cls, (lower, upper))

    @property
    def lower(self) -> float:
        return self[0]

    @property
    def upper(self) -> float:
        return self[1]


def in_decay_regime(N: int, n: int, m: int) -> bool:
    """Whether (N, n, m) sits in the regime n >= N/2, m <= N/10 backing the bounds."""
    return 2 * n >= N and 10 * m <= N


def root_bounds(N: int, n: int, m: int) -> RootBounds:
    """Bracket for the peak-locating root: one secant step from below, one
    Newton step from above, both launched from k0 = m+1.

    Outside the regime checked by :func:`in_decay_regime` the values are still
    returned but a :class:`DecayRegimeWarning` is emitted; the bracketing
    guarantee rests on monotonicity and concavity that hold in-regime.
    """
    _check_profile_args(N, n, m)
    if not in_decay_regime(N, n, m):
        warnings.warn(
            f"(N={N}, n={n}, m={m}) is outside the regime n >= N/2, m <= N/10; "
            "returned bounds may not bracket the root",
            DecayRegimeWarning,
            stacklevel=2,
        )
    Nt, nt, mt = tilde_params(N, n, m)
    secant_den = nt - (mt + 1 - Nt) * mt
    if secant_den == 0:
        raise ZeroDivisionError("secant step has zero denominator")
    lower = mt * nt / secant_den
    fprime = _cubic_fprime_tilde(Nt, nt, mt, mt)
    if fprime == 0:
        raise ZeroDivisionError("Newton step has zero derivative")
    upper = mt - cubic_f_tilde(Nt, nt, mt, mt) / fprime
    return RootBounds(lower, upper)


def decay_bound(N: int, n: int, m: int) -> float:
    """Endpoint decay estimate m * max_k |q(k)| on the unit-norm scale.

    Bounds the magnitude of the normalized polynomial at integer argument m,
    1 <= m <= n; tight for small m.
    """
    _check_profile_args(N, n, m)
    if m < 1:
        raise ValueError(f"decay bound requires m >= 1, got m={m}")
    profile = summand_profile(N, n, m)
    log_bound = (
        math.log(m)
        + float(profile.log_abs_values[profile.peak_index])
        - 0.5 * log_norm_sq(HahnParams(N=N, n=n))
    )
    if log_bound > _LOG_FLOAT_MAX:
        return math.inf
    return math.exp(log_bound)
