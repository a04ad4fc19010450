"""Probabilists' Hermite polynomials and polynomial leverage functions.

The leverage function applied to a standardized return shock is a linear
combination of Hermite polynomials H_1 .. H_k (probabilists' convention,
orthogonal under the standard normal). Every H_j with j >= 1 has zero
mean under N(0, 1), so the leverage term never shifts the unconditional
level of log volatility regardless of the coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Default cap on the polynomial order. High orders are numerically fine
# but statistically pointless here; raise the bound explicitly if needed.
DEFAULT_MAX_ORDER = 6


@dataclass(frozen=True)
class HermiteOrder:
    """Validated polynomial order for a leverage function.

    k = 0 means no leverage term at all.
    """

    k: int
    bound: int = DEFAULT_MAX_ORDER

    def __post_init__(self) -> None:
        if not isinstance(self.k, (int, np.integer)) or isinstance(self.k, bool):
            raise ValueError(f"order must be an integer, got {self.k!r}")
        if self.bound < 0:
            raise ValueError(f"order bound must be non-negative, got {self.bound}")
        if not 0 <= self.k <= self.bound:
            raise ValueError(f"order must lie in [0, {self.bound}], got {self.k}")

    def __int__(self) -> int:
        return int(self.k)


def as_order(order: int | HermiteOrder, bound: int = DEFAULT_MAX_ORDER) -> HermiteOrder:
    """Coerce a plain integer to a validated HermiteOrder."""
    if isinstance(order, HermiteOrder):
        return order
    return HermiteOrder(order, bound)


@dataclass(frozen=True, eq=False)
class LeverageSpec:
    """Coefficients (phi_1, ..., phi_k) of a Hermite leverage function."""

    order: HermiteOrder
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        order = as_order(self.order)
        coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if coeffs.ndim != 1 or coeffs.size != order.k:
            raise ValueError(
                f"expected {order.k} coefficients for order {order.k}, "
                f"got shape {coeffs.shape}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("leverage coefficients must be finite")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def k(self) -> int:
        return self.order.k


def hermite_eval(k: int | HermiteOrder, z):
    """Evaluate the probabilists' Hermite polynomial H_k at z.

    Uses the three-term recurrence H_{j+1}(z) = z H_j(z) - j H_{j-1}(z)
    with H_0 = 1 and H_1 = z. Accepts scalars or arrays.
    """
    k = as_order(k).k
    z = np.asarray(z, dtype=float)
    h_prev = np.ones_like(z)
    if k == 0:
        return h_prev if z.ndim else float(h_prev)
    h = z.copy()
    for j in range(1, k):
        h, h_prev = z * h - j * h_prev, h
    return h if z.ndim else float(h)


def hermite_basis(k: int | HermiteOrder, z) -> np.ndarray:
    """Stack (H_1(z), ..., H_k(z)) along a trailing axis.

    Returns shape z.shape + (k,); a scalar z gives shape (k,). One pass
    of the recurrence, shared across all orders up to k.
    """
    k = as_order(k).k
    z = np.asarray(z, dtype=float)
    out = np.empty(z.shape + (k,))
    if k == 0:
        return out
    h_prev = np.ones_like(z)
    h = z.copy()
    out[..., 0] = h
    for j in range(1, k):
        h, h_prev = z * h - j * h_prev, h
        out[..., j] = h
    return out


def leverage_eval(spec: LeverageSpec, z):
    """Evaluate the leverage function sum_j phi_j H_j(z).

    Identically zero for order 0. Vectorized over z.
    """
    z = np.asarray(z, dtype=float)
    if spec.k == 0:
        out = np.zeros_like(z)
        return out if z.ndim else 0.0
    out = hermite_basis(spec.order, z) @ spec.coeffs
    return out if z.ndim else float(out)


@dataclass(frozen=True, eq=False)
class CurveSummary:
    """Pointwise posterior summary of a leverage curve on a shock grid."""

    grid: np.ndarray
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def leverage_curve(specs: list[LeverageSpec], grid) -> CurveSummary:
    """Summarize posterior draws of the leverage function on a grid.

    Parameters
    ----------
    specs : list of LeverageSpec
        Posterior coefficient draws; all must share one order.
    grid : array_like
        Shock values at which to evaluate the curve.

    Returns
    -------
    CurveSummary
        Pointwise mean and central 95% band (2.5% / 97.5% quantiles).
        A single draw collapses the band onto the mean.
    """
    if len(specs) == 0:
        raise ValueError("need at least one posterior draw to summarize a curve")
    orders = {s.k for s in specs}
    if len(orders) > 1:
        raise ValueError(f"mixed leverage orders in posterior draws: {sorted(orders)}")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-d array")
    k = orders.pop()
    if k == 0:
        zeros = np.zeros_like(grid)
        return CurveSummary(grid, zeros, zeros.copy(), zeros.copy())
    coeffs = np.stack([s.coeffs for s in specs])          # (draws, k)
    values = hermite_basis(k, grid) @ coeffs.T            # (grid, draws)
    lo, hi = np.quantile(values, [0.025, 0.975], axis=1)
    return CurveSummary(grid, values.mean(axis=1), lo, hi)
