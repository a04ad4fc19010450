"""Hermite polynomial evaluation, leverage functions, and curve summaries.

The recurrence is checked against the closed-form polynomials, and the
defining moment properties (zero mean, orthogonality with norm k! under
the standard normal) are checked by Monte Carlo at 5 standard errors.
"""

import math

import numpy as np
import pytest

from hermvol import (
    CurveSummary,
    HermiteOrder,
    LeverageSpec,
    hermite_basis,
    hermite_eval,
    leverage_curve,
    leverage_eval,
)
from hermvol.hermite import DEFAULT_MAX_ORDER, as_order


def closed_form(k, z):
    """First five polynomials written out longhand."""
    z = np.asarray(z, dtype=float)
    return [
        np.ones_like(z),
        z,
        z**2 - 1.0,
        z**3 - 3.0 * z,
        z**4 - 6.0 * z**2 + 3.0,
    ][k]


class TestRecurrence:
    def test_matches_closed_forms_through_order_four(self):
        rng = np.random.default_rng(41)
        z = rng.standard_normal(200) * 2.0
        for k in range(5):
            np.testing.assert_allclose(
                hermite_eval(k, z), closed_form(k, z), rtol=1e-13, atol=1e-13
            )

    def test_scalar_values(self):
        assert hermite_eval(0, 3.0) == 1.0
        assert hermite_eval(1, 3.0) == 3.0
        assert hermite_eval(2, 2.0) == 3.0
        assert hermite_eval(3, 2.0) == 2.0
        assert hermite_eval(4, 2.0) == -5.0

    def test_quartic_includes_constant_term(self):
        """H_4(0) = +3; dropping the constant would break E[H_4] = 0."""
        assert hermite_eval(4, 0.0) == 3.0

    def test_scalar_input_returns_float(self):
        out = hermite_eval(3, 1.5)
        assert isinstance(out, float)

    def test_basis_stacks_the_same_values(self):
        rng = np.random.default_rng(42)
        z = rng.standard_normal((7, 3))
        basis = hermite_basis(4, z)
        assert basis.shape == (7, 3, 4)
        for j in range(1, 5):
            np.testing.assert_allclose(
                basis[..., j - 1], hermite_eval(j, z), rtol=1e-13, atol=1e-13
            )

    def test_basis_of_order_zero_is_empty(self):
        basis = hermite_basis(0, np.zeros(5))
        assert basis.shape == (5, 0)


class TestMomentProperties:
    """Monte Carlo versions of the defining expectations (suite-scale).

    The acceptance module repeats these at M = 10^6 for all j, k <= 6;
    here a smaller M keeps the check to well under a second.
    """

    M = 200_000

    def test_zero_expectation(self):
        rng = np.random.default_rng(43)
        z = rng.standard_normal(self.M)
        for k in range(1, 7):
            se = math.sqrt(math.factorial(k) / self.M)
            mean = float(np.mean(hermite_eval(k, z)))
            assert abs(mean) < 5 * se, f"E[H_{k}] = {mean:.4g} vs 5 se = {5 * se:.4g}"

    def test_orthogonality_and_norms(self):
        rng = np.random.default_rng(44)
        z = rng.standard_normal(self.M)
        vals = [hermite_eval(k, z) for k in range(7)]
        for j in range(1, 7):
            for k in range(j, 7):
                prod = vals[j] * vals[k]
                target = math.factorial(k) if j == k else 0.0
                se = float(np.std(prod)) / math.sqrt(self.M)
                err = abs(float(np.mean(prod)) - target)
                assert err < 5 * se, f"(j, k) = ({j}, {k}): err {err:.4g} vs {5 * se:.4g}"


class TestOrderValidation:
    def test_rejects_negative_and_oversized_orders(self):
        with pytest.raises(ValueError):
            HermiteOrder(-1)
        with pytest.raises(ValueError):
            HermiteOrder(DEFAULT_MAX_ORDER + 1)
        with pytest.raises(ValueError):
            as_order(99)

    def test_rejects_non_integers(self):
        with pytest.raises(ValueError):
            HermiteOrder(1.5)
        with pytest.raises(ValueError):
            HermiteOrder(True)

    def test_explicit_bound_overrides_default(self):
        assert as_order(8, bound=10).k == 8

    def test_order_zero_is_allowed(self):
        assert int(HermiteOrder(0)) == 0


class TestLeverage:
    def test_order_one_is_a_line(self):
        spec = LeverageSpec(as_order(1), [-0.045])
        z = np.linspace(-3, 3, 11)
        np.testing.assert_allclose(leverage_eval(spec, z), -0.045 * z, rtol=1e-14)

    def test_order_zero_is_identically_zero(self):
        spec = LeverageSpec(as_order(0), [])
        assert leverage_eval(spec, 1.7) == 0.0
        np.testing.assert_array_equal(leverage_eval(spec, np.ones(4)), np.zeros(4))

    def test_combination_matches_manual_sum(self):
        coeffs = [0.2, -0.1, 0.05]
        spec = LeverageSpec(as_order(3), coeffs)
        z = np.linspace(-2, 2, 9)
        want = sum(c * closed_form(j + 1, z) for j, c in enumerate(coeffs))
        np.testing.assert_allclose(leverage_eval(spec, z), want, rtol=1e-13)

    def test_coefficient_count_must_match_order(self):
        with pytest.raises(ValueError):
            LeverageSpec(as_order(2), [0.1])
        with pytest.raises(ValueError):
            LeverageSpec(as_order(1), [0.1, 0.2])

    def test_coefficients_must_be_finite(self):
        with pytest.raises(ValueError):
            LeverageSpec(as_order(1), [np.nan])


class TestLeverageCurve:
    def test_single_draw_collapses_the_band(self):
        spec = LeverageSpec(as_order(1), [-0.5])
        grid = np.linspace(-2, 2, 5)
        out = leverage_curve([spec], grid)
        assert isinstance(out, CurveSummary)
        np.testing.assert_allclose(out.mean, -0.5 * grid, rtol=1e-14)
        np.testing.assert_array_equal(out.lo, out.mean)
        np.testing.assert_array_equal(out.hi, out.mean)

    def test_band_brackets_the_mean(self):
        rng = np.random.default_rng(45)
        specs = [
            LeverageSpec(as_order(2), rng.normal(scale=0.1, size=2))
            for _ in range(400)
        ]
        grid = np.linspace(-3, 3, 21)
        out = leverage_curve(specs, grid)
        assert np.all(out.lo <= out.mean + 1e-12)
        assert np.all(out.mean <= out.hi + 1e-12)

    def test_symmetric_draws_give_near_zero_mean(self):
        """phi and -phi in equal numbers average to the zero curve."""
        specs = [
            LeverageSpec(as_order(1), [c]) for c in (0.3, -0.3, 0.1, -0.1)
        ]
        out = leverage_curve(specs, np.linspace(-2, 2, 7))
        np.testing.assert_allclose(out.mean, 0.0, atol=1e-15)

    def test_order_zero_draws_give_flat_zero_curve(self):
        specs = [LeverageSpec(as_order(0), []) for _ in range(3)]
        out = leverage_curve(specs, np.linspace(-1, 1, 5))
        np.testing.assert_array_equal(out.mean, np.zeros(5))
        np.testing.assert_array_equal(out.lo, np.zeros(5))
        np.testing.assert_array_equal(out.hi, np.zeros(5))

    def test_mixed_orders_are_rejected(self):
        specs = [
            LeverageSpec(as_order(1), [0.1]),
            LeverageSpec(as_order(2), [0.1, 0.0]),
        ]
        with pytest.raises(ValueError):
            leverage_curve(specs, np.linspace(-1, 1, 3))

    def test_empty_draws_are_rejected(self):
        with pytest.raises(ValueError):
            leverage_curve([], np.linspace(-1, 1, 3))

    def test_empty_grid_is_rejected(self):
        with pytest.raises(ValueError):
            leverage_curve([LeverageSpec(as_order(1), [0.1])], [])
