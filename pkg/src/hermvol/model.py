"""Stochastic volatility with polynomial leverage: parameters, densities,
reparameterizations, and the simulator.

The observation equation is y_t = exp(x_t/2) eps_t with standard normal
eps_t, and the log-variance follows

    x_t = mu + beta x_{t-1} + l(eps_{t-1}) + omega u_t,

where l is a Hermite leverage function of order k (order 0 drops the
term) and u_t is standard normal, independent of eps. The order-1 case
is an exact reparameterization of the classic correlated-noise leverage
model with correlation rho and state scale tau: phi_1 = rho tau and
omega = sqrt(1 - rho^2) tau.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log, pi, sqrt

import numpy as np

from .hermite import HermiteOrder, LeverageSpec, as_order, leverage_eval
from .series import ReturnSeries

_HALF_LOG_2PI = 0.5 * log(2.0 * pi)


@dataclass(frozen=True, eq=False)
class SvParams:
    """Full parameter set (mu, beta, phi_1..phi_k, omega)."""

    mu: float
    beta: float
    leverage: LeverageSpec
    omega: float

    def __post_init__(self) -> None:
        for name in ("mu", "beta", "omega"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")

    @property
    def order(self) -> HermiteOrder:
        return self.leverage.order

    def state_coeffs(self) -> np.ndarray:
        """Regression coefficients (mu, beta, phi_1, ..., phi_k)."""
        return np.concatenate(([self.mu, self.beta], self.leverage.coeffs))


def make_params(mu, beta, coeffs=(), omega=0.15) -> SvParams:
    """Convenience constructor from plain floats and a coefficient tuple."""
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    spec = LeverageSpec(HermiteOrder(coeffs.size), coeffs)
    return SvParams(float(mu), float(beta), spec, float(omega))


@dataclass(frozen=True)
class LinearLeverageParams:
    """Correlated-noise formulation: shock correlation rho, state scale tau."""

    mu: float
    beta: float
    rho: float
    tau: float

    def __post_init__(self) -> None:
        if not abs(self.rho) < 1:
            raise ValueError(f"|rho| must be < 1, got {self.rho}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


@dataclass(eq=False)
class SimOutput:
    """A simulated path: returns plus the latent states and shocks."""

    returns: ReturnSeries
    latent: np.ndarray
    shocks: np.ndarray


def reparam_to_uncorrelated(p: LinearLeverageParams) -> SvParams:
    """Map (rho, tau) to the order-1 coefficients (phi_1, omega)."""
    phi1 = p.rho * p.tau
    omega = sqrt(1.0 - p.rho**2) * p.tau
    return make_params(p.mu, p.beta, [phi1], omega)


def reparam_from_uncorrelated(p: SvParams) -> LinearLeverageParams:
    """Invert make_params back to (rho, tau); requires order 1."""
    if p.order.k != 1:
        raise ValueError(f"reparameterization needs order 1, got {p.order.k}")
    phi1 = float(p.leverage.coeffs[0])
    tau = sqrt(phi1**2 + p.omega**2)
    return LinearLeverageParams(p.mu, p.beta, phi1 / tau, tau)


def obs_logdensity(y, x):
    """Log density of y under N(0, exp(x)). Vectorized over both inputs.

    Evaluates -log(2 pi)/2 - x/2 - y^2 / (2 exp(x)) with the exponential
    suppressed so huge |x| degrades to -inf instead of raising.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        out = -_HALF_LOG_2PI - 0.5 * x - 0.5 * y * y * np.exp(-x)
    if out.ndim:
        return out
    return float(out)


def state_mean(theta: SvParams, x_prev, eps_prev):
    """Conditional mean of x_t given x_{t-1} and the previous shock.

    This is also the one-step-ahead lookahead the auxiliary filter
    resamples against.
    """
    return theta.mu + theta.beta * np.asarray(x_prev, dtype=float) + leverage_eval(
        theta.leverage, eps_prev
    )


def shock_from_obs(y, x):
    """Recover the standardized shock eps_t = y_t exp(-x_t/2)."""
    return np.asarray(y, dtype=float) * np.exp(-0.5 * np.asarray(x, dtype=float))


def stationary_moments(theta: SvParams) -> tuple[float, float]:
    """Mean and variance of the no-leverage stationary skeleton.

    The leverage term has zero mean under the shock distribution, so it
    leaves the stationary mean untouched; its variance contribution is
    deliberately ignored here (initialization approximation).
    """
    if not abs(theta.beta) < 1:
        raise ValueError(f"stationary moments need |beta| < 1, got {theta.beta}")
    mean = theta.mu / (1.0 - theta.beta)
    var = theta.omega**2 / (1.0 - theta.beta**2)
    return mean, var


def simulate(theta: SvParams, T: int, x0="stationary", seed: int = 0) -> SimOutput:
    """Simulate a path of length T.

    Parameters
    ----------
    theta : SvParams
    T : int
        Number of observations, at least 1.
    x0 : "stationary" or float
        Either the stationary Gaussian start or an exact initial state.
    seed : int
        Generator seed. Draw order is fixed (x1 if stationary, then all
        eps, then all u) and never depends on the leverage order, so
        nested models produce identical paths from identical seeds.

    Returns
    -------
    SimOutput
        Returns labeled 1..T plus the latent path and shocks.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    rng = np.random.default_rng(seed)
    x = np.empty(T)
    if isinstance(x0, str):
        if x0 != "stationary":
            raise ValueError(f"x0 must be a real or 'stationary', got {x0!r}")
        mean, var = stationary_moments(theta)
        x[0] = mean + sqrt(var) * rng.standard_normal()
    else:
        x[0] = float(x0)
    eps = rng.standard_normal(T)
    u = rng.standard_normal(T - 1)
    for t in range(1, T):
        x[t] = (
            theta.mu
            + theta.beta * x[t - 1]
            + leverage_eval(theta.leverage, eps[t - 1])
            + theta.omega * u[t - 1]
        )
    y = np.exp(0.5 * x) * eps
    series = ReturnSeries(list(range(1, T + 1)), y)
    return SimOutput(series, x, eps)
