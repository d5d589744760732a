import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hahnfit.analytic import (
    DecayRegimeWarning,
    HahnParams,
    cubic_f,
    cubic_f_tilde,
    decay_bound,
    hahn_norm_sq,
    hahn_value,
    in_decay_regime,
    normalized_hahn_value,
    pochhammer,
    root_bounds,
    summand_profile,
    summand_ratio,
    tilde_params,
)


class TestPochhammer:
    def test_empty_product(self):
        for a in (0, 1, -3, 0.5, 7.25):
            assert pochhammer(a, 0) == 1

    def test_negative_index_float(self):
        assert pochhammer(0.3, -10) == pytest.approx(-42884, rel=1e-3)

    def test_reflection_small(self):
        # (-a)_k == (-1)^k (a)_{-k}, value checked against a direct product
        direct = (-7) * (-6) * (-5)
        assert pochhammer(-7, 3) == direct
        assert (-1) ** 3 * pochhammer(7, -3) == direct

    def test_reflection_exhaustive(self):
        for a in range(1, 21):
            for k in range(a + 1):
                assert pochhammer(-a, k) == (-1) ** k * pochhammer(a, -k)

    def test_exact_for_fractions(self):
        assert pochhammer(Fraction(1, 2), 3) == Fraction(15, 8)
        assert pochhammer(Fraction(1, 2), -2) == Fraction(-1, 4)

    @given(st.integers(-30, 30), st.integers(-8, 8))
    def test_recursion_property(self, a, k):
        if k >= 0:
            # rising: (a)_{k+1} = (a)_k * (a + k)
            assert pochhammer(a, k + 1) == pochhammer(a, k) * (a + k)
        else:
            # falling: (a)_{k-1} = (a)_k * (a + k)
            assert pochhammer(a, k - 1) == pochhammer(a, k) * (a + k)


class TestHahnValue:
    def test_rejects_degenerate_lattice(self):
        with pytest.raises(ValueError):
            HahnParams(N=0, n=0)
        with pytest.raises(ValueError):
            HahnParams(N=10, n=11)

    def test_value_at_zero_is_one(self):
        for N in (1, 7, 30, 120, 200):
            for n in {1, N // 2, N}:
                if n >= 1:
                    assert hahn_value(HahnParams(N=N, n=n), 0.0) == pytest.approx(1.0, rel=1e-12)

    def test_value_at_one_closed_form(self):
        assert hahn_value(HahnParams(N=10, n=3), 1.0) == pytest.approx(-0.2, rel=1e-12)
        for N, n in ((20, 5), (100, 75), (50, 2)):
            expected = 1 - n * (n + 1) / N
            assert hahn_value(HahnParams(N=N, n=n), 1.0) == pytest.approx(expected, rel=1e-10)

    def test_truncation_at_integer_arguments(self):
        # at x = m only the first min(m, n)+1 summands survive; the value must
        # match a direct rational evaluation of that truncated sum
        N, n, m = 40, 17, 4
        total = Fraction(0)
        for k in range(m + 1):
            total += (
                Fraction((-1) ** k)
                * pochhammer(n, -k)
                * pochhammer(n + 1, k)
                * pochhammer(m, -k)
                / (math.factorial(k) ** 2 * pochhammer(N, -k))
            )
        assert hahn_value(HahnParams(N=N, n=n), float(m)) == pytest.approx(float(total), rel=1e-10)

    def test_norm_sq_trivial_and_derived(self):
        assert hahn_norm_sq(HahnParams(N=13, n=0)) == pytest.approx(14.0, rel=1e-12)
        # degree 1 on {0,1,2} takes values (1, 0, -1): squared norm 2
        assert hahn_norm_sq(HahnParams(N=2, n=1)) == pytest.approx(2.0, rel=1e-12)

    def test_normalized_table_values(self):
        p = HahnParams(N=30, n=30)
        assert normalized_hahn_value(p, 0.0) == pytest.approx(2.9079e-9, rel=1e-3)
        assert normalized_hahn_value(p, 1.0) == pytest.approx(-8.7236e-8, rel=1e-3)
        assert normalized_hahn_value(p, 0.5) == pytest.approx(-1.2398e6, rel=1e-3)
        assert normalized_hahn_value(p, 1.5) == pytest.approx(67920.4, rel=1e-3)
        assert normalized_hahn_value(p, 2.5) == pytest.approx(-6460.054, rel=1e-3)
        assert normalized_hahn_value(p, 3.5) == pytest.approx(898.31, rel=1e-3)

    def test_normalized_constant(self):
        assert normalized_hahn_value(HahnParams(N=10, n=0), 7.0) == pytest.approx(
            1 / math.sqrt(11), rel=1e-12
        )

    def test_endpoint_order_at_75_100(self):
        v = normalized_hahn_value(HahnParams(N=100, n=75), 0.0)
        assert math.isclose(math.log10(abs(v)), -14, abs_tol=1.0)

    def test_midpoint_symmetry(self):
        for N in (12, 25, 40):
            for n in (3, N // 2, N - 1):
                p = HahnParams(N=N, n=n)
                for m in range(0, N // 2):
                    left = abs(normalized_hahn_value(p, float(m)))
                    right = abs(normalized_hahn_value(p, float(N - m)))
                    assert left == right
                    half = abs(normalized_hahn_value(p, m + 0.25))
                    assert half == abs(normalized_hahn_value(p, N - m - 0.25))


class TestSummandMachinery:
    def test_ratio_closed_form(self):
        assert summand_ratio(100, 75, 5, 1) == pytest.approx(285.0)
        assert summand_ratio(1, 1, 1, 1) == pytest.approx(2.0)

    def test_ratio_rejects_k_zero(self):
        with pytest.raises(ValueError):
            summand_ratio(100, 75, 5, 0)

    def test_ratio_matches_value_quotients(self):
        prof = summand_profile(50, 37, 5)
        for k in range(1, 6):
            r = summand_ratio(50, 37, 5, k)
            assert r == pytest.approx(abs(prof.values[k] / prof.values[k - 1]), rel=1e-10)
            assert (r <= 1) == (abs(prof.values[k]) <= abs(prof.values[k - 1]))

    def test_profile_rejects_m_above_n(self):
        with pytest.raises(ValueError):
            summand_profile(50, 10, 11)

    def test_profile_trivial_m0(self):
        prof = summand_profile(33, 12, 0)
        assert list(prof.values) == [1.0]
        assert prof.peak_index == 0
        assert prof.peak_abs == 1.0

    def test_profile_length_and_peak(self):
        prof = summand_profile(100, 75, 5)
        assert len(prof.values) == 6
        assert prof.peak_index == 5
        prof8 = summand_profile(100, 75, 8)
        assert prof8.peak_index == 7
        assert prof8.peak_abs == max(abs(v) for v in prof8.values)

    def test_peak_table(self):
        expected = [1, 2, 3, 4, 5, 6, 7, 7, 8, 9]
        for m, k in zip(range(1, 11), expected):
            assert summand_profile(100, 75, m).peak_index == k


class TestCubicAndBounds:
    def test_cubic_endpoints(self):
        for N, n, m in ((100, 75, 10), (50, 37, 4), (200, 150, 20)):
            assert cubic_f(N, n, m, 0.0) == (m + 1) * n * (n + 1)
            assert cubic_f(N, n, m, m + 1.0) == pytest.approx((m + 1) ** 2 * (m - N))
        assert cubic_f(100, 75, 10, 11.0) == pytest.approx(121 * (-90))

    def test_cubic_sign_change(self):
        assert cubic_f(100, 75, 10, 0.0) > 0
        assert cubic_f(100, 75, 10, 11.0) < 0

    def test_substituted_form_agrees(self):
        Nt, nt, mt = tilde_params(100, 75, 10)
        assert (Nt, nt, mt) == (102, 5700, 11)
        for k in (0.0, 1.5, 7.0, 11.0):
            assert cubic_f(100, 75, 10, k) == cubic_f_tilde(Nt, nt, mt, k)

    def test_bracketing_reference_instances(self):
        lower, upper = root_bounds(100, 75, 5)
        assert cubic_f(100, 75, 5, lower) > 0
        assert cubic_f(100, 75, 5, upper) < 0
        lower, upper = root_bounds(1000, 750, 100)
        assert lower <= upper
        assert cubic_f(1000, 750, 100, lower) > 0
        assert cubic_f(1000, 750, 100, upper) < 0

    def test_bracketing_regime_grid(self):
        for N in (100, 200):
            n = math.ceil(0.75 * N)
            for m in range(1, N // 10 + 1):
                lower, upper = root_bounds(N, n, m)
                assert lower <= upper
                assert cubic_f(N, n, m, lower) >= 0
                assert cubic_f(N, n, m, upper) <= 0

    def test_out_of_regime_warns(self):
        assert not in_decay_regime(100, 20, 5)
        with pytest.warns(DecayRegimeWarning):
            root_bounds(100, 20, 5)

    def test_in_regime_silent(self):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            root_bounds(100, 75, 5)


class TestDecayBound:
    def test_reference_values(self):
        assert decay_bound(100, 75, 1) == pytest.approx(1.18e-12, rel=2e-2)
        # order-of-magnitude row near the end of the reference range
        assert math.isclose(math.log10(decay_bound(100, 75, 10)), math.log10(5e-2), abs_tol=1.0)

    def test_dominates_normalized_values(self):
        for N in (50, 100):
            n = math.ceil(0.75 * N)
            p = HahnParams(N=N, n=n)
            for m in range(1, 11):
                assert decay_bound(N, n, m) >= abs(normalized_hahn_value(p, float(m)))

    def test_rejects_m_zero(self):
        with pytest.raises(ValueError):
            decay_bound(100, 75, 0)
