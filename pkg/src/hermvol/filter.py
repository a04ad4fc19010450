"""Sequential Monte Carlo filters that learn states and parameters online.

Two algorithms share the machinery here. The main one is a two-stage
auxiliary filter with per-particle conjugate sufficient statistics: at
each observation it (1) resamples particles by the predictive density at
the state transition's conditional mean (the lookahead), (2) propagates
states, (3) reweights by the ratio correcting the lookahead, (4) folds
the new transition into each particle's Normal-Inverse-Gamma regression
statistics, and (5) redraws the static parameters from their conditional
posterior. The baseline filter propagates the extended state (x, theta)
blindly, weights by the observation density, and resamples; it can
optionally refresh parameters from the same sufficient statistics.

Conjugate structure: given the previous state and shock, the state
equation is a linear regression of x_t on (1, x_{t-1}, H_1(eps_{t-1}),
..., H_k(eps_{t-1})) with coefficient vector gamma = (mu, beta, phi)
and noise variance omega^2, so a Normal-Inverse-Gamma prior stays
closed under updating. Particles store the regression's accumulated
precision as a Cholesky factor; updates are rank-1 and solves are
triangular, all vectorized across the cloud.

Randomness contract: every (step, purpose) pair owns a counter-based
stream keyed on (seed, t, purpose), so draw counts in one purpose never
shift any other, runs are bitwise reproducible at any thread count, and
coefficient draws of nested orders consume a common stream prefix.
Use step_stream to replay any portion of a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._stacked import chol_update, quad_form_inv, solve_upper_t, spd_solve
from .hermite import HermiteOrder, LeverageSpec, as_order, hermite_basis
from .model import (
    SvParams,
    obs_logdensity,
    shock_from_obs,
    state_mean,
    stationary_moments,
)
from .series import ReturnSeries

# Stationarity guard on the persistence coefficient: posterior draws are
# rejection-resampled into (-BETA_BOUND, BETA_BOUND), then clamped after
# BETA_MAX_TRIES failures (clamp events are counted, never hidden).
BETA_BOUND = 0.999
BETA_MAX_TRIES = 100
_BETA_CLAMP = BETA_BOUND - 1e-9

# Coefficient-draw blocks always consume this many normal rows so that
# runs at different leverage orders stay stream-aligned on the shared
# (mu, beta) components even across rejection redraws.
_GAMMA_PAD_ROWS = 8

# Degeneracy policy: warn when ESS stays below N / ESS_WARN_DIVISOR for
# ESS_WARN_STREAK consecutive steps. No jittering, ever.
ESS_WARN_DIVISOR = 100
ESS_WARN_STREAK = 50

# Stream purposes for the per-step counter-based generators.
STREAM_INIT_PARAMS = 0
STREAM_INIT_STATE = 1
STREAM_STAGE1 = 2
STREAM_PROPAGATE = 3
STREAM_STAGE2 = 4
STREAM_OMEGA = 5
STREAM_COEFFS = 6


class DegeneracyError(RuntimeError):
    """Raised when every particle weight underflows to zero."""


def step_stream(seed: int, t: int, purpose: int) -> np.random.Generator:
    """Dedicated generator for one (step, purpose) slot of a run."""
    ss = np.random.SeedSequence((int(seed), int(t), int(purpose)))
    return np.random.Generator(np.random.Philox(ss))


def logmeanexp(lw: np.ndarray) -> float:
    """log of the mean of exp(lw), stable under large negative entries."""
    m = float(np.max(lw))
    if not math.isfinite(m):
        return -math.inf if m < 0 else m
    return m + math.log(float(np.mean(np.exp(lw - m))))


def _normalized_from_log(lw: np.ndarray) -> np.ndarray:
    w = np.exp(lw - np.max(lw))
    return w / w.sum()


# ---------------------------------------------------------------------------
# Priors and sufficient statistics


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Normal-Inverse-Gamma prior for one leverage order.

    gamma | omega^2 ~ Normal(b0, omega^2 * V0) and omega^2 ~
    InverseGamma(c0, d0). By default A0 is read as the covariance V0 and
    (c0, d0) as shape and scale; the two flags switch to the precision
    reading (V0 = A0^-1) and the halved convention (c0/2, d0/2).
    """

    A0: np.ndarray
    b0: np.ndarray
    c0: float
    d0: float
    x0_mode: object = "stationary"
    a0_is_precision: bool = False
    invgamma_halved: bool = False

    def __post_init__(self) -> None:
        A0 = np.asarray(self.A0, dtype=float)
        b0 = np.asarray(self.b0, dtype=float)
        if A0.ndim != 2 or A0.shape[0] != A0.shape[1]:
            raise ValueError(f"A0 must be square, got shape {A0.shape}")
        if b0.shape != (A0.shape[0],):
            raise ValueError("b0 length must match A0 dimension")
        if A0.shape[0] < 2:
            raise ValueError("prior dimension must be at least 2 (mu, beta)")
        if not np.allclose(A0, A0.T, rtol=1e-10, atol=1e-12):
            raise ValueError("A0 must be symmetric")
        try:
            np.linalg.cholesky(A0)
        except np.linalg.LinAlgError:
            raise ValueError("A0 must be positive definite") from None
        if not (self.c0 > 0 and self.d0 > 0):
            raise ValueError("c0 and d0 must be positive")
        mode = self.x0_mode
        if isinstance(mode, str):
            if mode != "stationary":
                raise ValueError(f"unknown x0_mode {mode!r}")
        else:
            m, v = mode
            if not (np.isfinite(m) and v > 0):
                raise ValueError(f"explicit x0 mode needs finite mean, variance > 0")
        object.__setattr__(self, "A0", A0)
        object.__setattr__(self, "b0", b0)

    @property
    def dim(self) -> int:
        return self.b0.size

    @property
    def order(self) -> int:
        return self.dim - 2

    def precision(self) -> np.ndarray:
        """Prior precision of gamma (per unit omega^2)."""
        if self.a0_is_precision:
            return self.A0
        return np.linalg.inv(self.A0)

    def ig_shape_scale(self) -> tuple[float, float]:
        if self.invgamma_halved:
            return 0.5 * self.c0, 0.5 * self.d0
        return float(self.c0), float(self.d0)


@dataclass(frozen=True)
class PriorScheme:
    """Order-independent prior template, materialized per leverage order.

    Defaults give diag(a0_mu, a0_beta, a0_phi, ..., a0_phi) for A0 and
    (b0_mu, b0_beta, b0_phi, ...) for b0, matching the common weakly
    informative choice of a tight persistence prior around b0_beta.
    """

    a0_mu: float = 1.0
    a0_beta: float = 0.01
    a0_phi: float = 1.0
    b0_mu: float = 0.0
    b0_beta: float = 0.95
    b0_phi: float = 0.0
    c0: float = 5.0
    d0: float = 0.4
    x0_mode: object = "stationary"
    a0_is_precision: bool = False
    invgamma_halved: bool = False

    def for_order(self, order: int | HermiteOrder) -> PriorSpec:
        k = as_order(order).k
        A0 = np.diag([self.a0_mu, self.a0_beta] + [self.a0_phi] * k)
        b0 = np.array([self.b0_mu, self.b0_beta] + [self.b0_phi] * k)
        return PriorSpec(
            A0,
            b0,
            self.c0,
            self.d0,
            self.x0_mode,
            self.a0_is_precision,
            self.invgamma_halved,
        )


DEFAULT_PRIOR = PriorScheme()


def _as_prior_spec(prior, order: HermiteOrder) -> PriorSpec:
    if isinstance(prior, PriorScheme):
        return prior.for_order(order)
    if not isinstance(prior, PriorSpec):
        raise ValueError(f"prior must be a PriorSpec or PriorScheme, got {prior!r}")
    if prior.order != order.k:
        raise ValueError(
            f"prior dimension {prior.dim} does not match order {order.k} "
            f"(needs {order.k + 2})"
        )
    return prior


@dataclass(frozen=True, eq=False)
class SufficientStats:
    """Conjugate accumulators of the state-equation regression.

    A is the accumulated precision (prior precision plus sum of w w'),
    Ab the matching precision-weighted mean, (c, d) the Inverse-Gamma
    shape and scale for omega^2, and n the number of folded pairs.
    """

    A: np.ndarray
    Ab: np.ndarray
    c: float
    d: float
    n: int

    def __post_init__(self) -> None:
        A = np.asarray(self.A, dtype=float)
        Ab = np.asarray(self.Ab, dtype=float)
        if A.shape != (Ab.size, Ab.size):
            raise ValueError("A and Ab dimensions disagree")
        if not (self.c > 0 and self.d > 0):
            raise ValueError("c and d must stay positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Ab", Ab)

    @property
    def order(self) -> int:
        return self.Ab.size - 2

    @classmethod
    def from_prior(cls, prior: PriorSpec) -> "SufficientStats":
        lam = prior.precision()
        c0, d0 = prior.ig_shape_scale()
        return cls(lam, lam @ prior.b0, c0, d0, 0)


def _regressor(order: int, x_prev: float, eps_prev: float) -> np.ndarray:
    return np.concatenate(([1.0, float(x_prev)], hermite_basis(order, float(eps_prev))))


def update_stats(
    s: SufficientStats, x_new: float, x_prev: float, eps_prev: float
) -> SufficientStats:
    """Fold one state transition into the regression statistics.

    The regressor is (1, x_prev, H_1(eps_prev), ..., H_k(eps_prev)) and
    the response is x_new. The scale update adds the one-step predictive
    squared residual e^2 / (1 + w' A^-1 w), which telescopes to the
    batch normal-equations value.
    """
    w = _regressor(s.order, x_prev, eps_prev)
    b_prev = np.linalg.solve(s.A, s.Ab)
    e = float(x_new) - w @ b_prev
    s_pp = 1.0 + w @ np.linalg.solve(s.A, w)
    return SufficientStats(
        s.A + np.outer(w, w),
        s.Ab + w * float(x_new),
        s.c + 0.5,
        s.d + 0.5 * e * e / s_pp,
        s.n + 1,
    )


def sample_theta(
    s: SufficientStats, order: int | HermiteOrder, rng: np.random.Generator
) -> SvParams:
    """Draw parameters from the conditional posterior given the stats.

    omega^2 ~ InverseGamma(c, d), then gamma | omega^2 ~ Normal(A^-1 Ab,
    omega^2 A^-1), with beta rejection-resampled into the stationarity
    band and clamped as a last resort. Draw order: one gamma variate,
    then coefficient normals (redraws continue the same stream).
    """
    order = as_order(order)
    if order.k != s.order:
        raise ValueError(f"stats are for order {s.order}, requested {order.k}")
    try:
        L = np.linalg.cholesky(s.A)
    except np.linalg.LinAlgError:
        raise ValueError("accumulated precision is numerically singular") from None
    omega2 = s.d / rng.standard_gamma(s.c)
    b = np.linalg.solve(s.A, s.Ab)
    omega = math.sqrt(omega2)
    for _ in range(BETA_MAX_TRIES):
        gamma = b + omega * np.linalg.solve(L.T, rng.standard_normal(s.Ab.size))
        if abs(gamma[1]) < BETA_BOUND:
            break
    else:
        gamma[1] = math.copysign(_BETA_CLAMP, gamma[1])
    spec = LeverageSpec(order, gamma[2:])
    return SvParams(float(gamma[0]), float(gamma[1]), spec, omega)


# ---------------------------------------------------------------------------
# Particle cloud


@dataclass(eq=False)
class Particle:
    """Read-only view of one particle (state, parameters, statistics)."""

    x: float
    theta: SvParams
    stats: SufficientStats


class ParticleCloud:
    """The filter's working state: N particles plus run bookkeeping.

    Internally the cloud is a structure of arrays: states, coefficient
    draws, omega^2 draws, and stacked sufficient statistics (Cholesky
    factor of the precision, precision-weighted mean, scale). The
    `particles` property materializes the particle view on demand.
    """

    def __init__(
        self,
        order: HermiteOrder,
        prior: PriorSpec,
        seed: int,
        x: np.ndarray,
        gamma: np.ndarray,
        omega2: np.ndarray,
        chol_prec: np.ndarray,
        ab: np.ndarray,
        d: np.ndarray,
        c: float,
        refresh_params: bool = True,
        frozen_theta: SvParams | None = None,
    ) -> None:
        self.order = order
        self.prior = prior
        self.seed = int(seed)
        self.x = x
        self.gamma = gamma
        self.omega2 = omega2
        self.chol_prec = chol_prec
        self.ab = ab
        self.d = d
        self.c = float(c)
        self.n_obs = 0
        self.t = 0
        self.cum_log_marglik = 0.0
        self.last_log_pred: float | None = None
        self.ess = float(x.size)
        self.refresh_params = refresh_params
        self.frozen_theta = frozen_theta
        self.beta_clamp_count = 0
        self.warnings: list[dict] = []
        self._low_ess_streak = 0
        # Cached posterior mean A^-1 Ab, maintained alongside the stats.
        self.post_mean = spd_solve(chol_prec, ab)

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def particles(self) -> list[Particle]:
        out = []
        for i in range(self.n):
            spec = LeverageSpec(self.order, self.gamma[i, 2:])
            theta = SvParams(
                float(self.gamma[i, 0]),
                float(self.gamma[i, 1]),
                spec,
                math.sqrt(float(self.omega2[i])),
            )
            L = self.chol_prec[i]
            stats = SufficientStats(
                L @ L.T, self.ab[i].copy(), self.c, float(self.d[i]), self.n_obs
            )
            out.append(Particle(float(self.x[i]), theta, stats))
        return out

    def posterior_summary(self) -> dict:
        """Particle means and central 95% intervals of the parameters."""
        def summarize(v):
            lo, hi = np.quantile(v, [0.025, 0.975])
            return {"mean": float(np.mean(v)), "lo": float(lo), "hi": float(hi)}

        omega = np.sqrt(self.omega2)
        out = {
            "mu": summarize(self.gamma[:, 0]),
            "beta": summarize(self.gamma[:, 1]),
            "phi": [summarize(self.gamma[:, 2 + j]) for j in range(self.order.k)],
            "omega": summarize(omega),
        }
        return out


def _draw_gamma_block(
    rng: np.random.Generator,
    mean: np.ndarray,
    omega: np.ndarray,
    chol_prec: np.ndarray,
    clamp_counter: list[int],
) -> np.ndarray:
    """Draw gamma ~ N(mean, omega^2 (L L')^-1) with the beta guard.

    Normals come transposed, component rows first, and every block
    consumes the same fixed row count regardless of the order, so lower
    orders read a prefix of the same stream at every block boundary.
    Rejections redraw whole rows; stragglers get beta clamped and
    counted.
    """
    n, p = mean.shape
    rows = max(p, _GAMMA_PAD_ROWS)
    z = rng.standard_normal((rows, n))[:p].T
    gamma = mean + omega[:, None] * solve_upper_t(chol_prec, z)
    bad = np.flatnonzero(np.abs(gamma[:, 1]) >= BETA_BOUND)
    tries = 0
    while bad.size and tries < BETA_MAX_TRIES:
        z = rng.standard_normal((rows, bad.size))[:p].T
        redraw = mean[bad] + omega[bad, None] * solve_upper_t(chol_prec[bad], z)
        gamma[bad] = redraw
        bad = bad[np.abs(redraw[:, 1]) >= BETA_BOUND]
        tries += 1
    if bad.size:
        gamma[bad, 1] = np.copysign(_BETA_CLAMP, gamma[bad, 1])
        clamp_counter[0] += int(bad.size)
    return gamma


def init_cloud(
    prior: PriorSpec | PriorScheme,
    order: int | HermiteOrder,
    N: int,
    seed: int,
    refresh_params: bool = True,
    frozen_theta: SvParams | None = None,
) -> ParticleCloud:
    """Draw the starting cloud from the prior.

    Each particle draws omega^2 from the Inverse-Gamma prior and gamma
    from its conditional normal (beta guarded into the stationarity
    band), then an initial state per the prior's x0_mode. Statistics
    start at the prior. Passing frozen_theta pins every particle's
    parameters and disables learning (used by the oracle comparisons).
    """
    order = as_order(order)
    if N < 2:
        raise ValueError(f"need at least 2 particles, got {N}")
    if int(seed) < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed}")
    prior = _as_prior_spec(prior, order)
    p = prior.dim
    lam = prior.precision()
    chol0 = np.linalg.cholesky(lam)
    c0, d0 = prior.ig_shape_scale()
    chol_prec = np.broadcast_to(chol0, (N, p, p)).copy()
    ab = np.broadcast_to(lam @ prior.b0, (N, p)).copy()
    d = np.full(N, d0)

    clamps = [0]
    if frozen_theta is None:
        rng = step_stream(seed, 0, STREAM_INIT_PARAMS)
        omega2 = d0 / rng.standard_gamma(c0, size=N)
        mean = np.broadcast_to(prior.b0, (N, p))
        gamma = _draw_gamma_block(rng, mean, np.sqrt(omega2), chol_prec, clamps)
    else:
        if frozen_theta.order.k != order.k:
            raise ValueError("frozen parameters disagree with the requested order")
        gamma = np.broadcast_to(frozen_theta.state_coeffs(), (N, p)).copy()
        omega2 = np.full(N, frozen_theta.omega**2)

    rng_x = step_stream(seed, 0, STREAM_INIT_STATE)
    z = rng_x.standard_normal(N)
    if isinstance(prior.x0_mode, str):
        mean_x = gamma[:, 0] / (1.0 - gamma[:, 1])
        var_x = omega2 / (1.0 - gamma[:, 1] ** 2)
        x = mean_x + np.sqrt(var_x) * z
    else:
        m, v = prior.x0_mode
        x = m + math.sqrt(v) * z

    cloud = ParticleCloud(
        order,
        prior,
        seed,
        x,
        gamma,
        omega2,
        chol_prec,
        ab,
        d,
        c0,
        refresh_params=refresh_params,
        frozen_theta=frozen_theta,
    )
    cloud.beta_clamp_count = clamps[0]
    return cloud


# ---------------------------------------------------------------------------
# Resampling


def resample(
    weights: np.ndarray,
    N: int,
    scheme: str = "systematic",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Draw N ancestor indices from a normalized weight vector.

    The systematic scheme uses a single uniform rotation and guarantees
    each index a count within floor/ceil of N * w_i; multinomial draws
    independently (higher variance, exactly unbiased).
    """
    if rng is None:
        raise ValueError("resample requires an explicit generator")
    w = np.asarray(weights, dtype=float)
    if np.any(np.isnan(w)):
        raise ValueError("weights contain NaN")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if total == 0.0:
        raise DegeneracyError("all resampling weights are zero")
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"weights must be normalized, sum = {total!r}")
    cs = np.cumsum(w)
    cs[-1] = 1.0
    if scheme == "systematic":
        positions = (np.arange(N) + rng.random()) / N
    elif scheme == "multinomial":
        positions = rng.random(N)
    else:
        raise ValueError(f"unknown resampling scheme {scheme!r}")
    idx = np.searchsorted(cs, positions, side="right")
    return np.minimum(idx, w.size - 1)


def ess_of(weights: np.ndarray) -> float:
    """Effective sample size 1 / sum(w^2) of normalized weights."""
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


# ---------------------------------------------------------------------------
# Filter steps


def _lookahead(cloud: ParticleCloud, y_prev) -> tuple[np.ndarray, np.ndarray]:
    """Regressor rows and conditional means for the pending transition.

    Before the second observation there is no usable shock, so the
    leverage columns are zero and the transition runs through its
    no-leverage part only; the regressor matches exactly.
    """
    n, k = cloud.n, cloud.order.k
    w = np.empty((n, k + 2))
    w[:, 0] = 1.0
    w[:, 1] = cloud.x
    if k:
        if y_prev is None:
            w[:, 2:] = 0.0
        else:
            eps = shock_from_obs(y_prev, cloud.x)
            w[:, 2:] = hermite_basis(k, eps)
    g = np.einsum("np,np->n", cloud.gamma, w)
    return w, g


def _finish_step(cloud: ParticleCloud, log_pred: float, ess: float, t_next: int) -> None:
    cloud.cum_log_marglik += log_pred
    cloud.last_log_pred = log_pred
    cloud.ess = ess
    cloud.t = t_next
    if ess < cloud.n / ESS_WARN_DIVISOR:
        cloud._low_ess_streak += 1
        if cloud._low_ess_streak >= ESS_WARN_STREAK:
            cloud.warnings.append({"t": t_next, "ess": ess, "kind": "low_ess_streak"})
            cloud._low_ess_streak = 0
    else:
        cloud._low_ess_streak = 0


def _refresh_theta(cloud: ParticleCloud, t_next: int) -> None:
    """Steps 4 follow-up: redraw parameters from each particle's posterior."""
    rng_o = step_stream(cloud.seed, t_next, STREAM_OMEGA)
    cloud.omega2 = cloud.d / rng_o.standard_gamma(cloud.c, size=cloud.n)
    rng_c = step_stream(cloud.seed, t_next, STREAM_COEFFS)
    clamps = [0]
    cloud.gamma = _draw_gamma_block(
        rng_c, cloud.post_mean, np.sqrt(cloud.omega2), cloud.chol_prec, clamps
    )
    cloud.beta_clamp_count += clamps[0]


def _fold_transitions(
    cloud: ParticleCloud, w_rows: np.ndarray, x_new: np.ndarray
) -> None:
    """Vectorized Step 4: rank-1 precision updates across the cloud.

    Expects cloud.chol_prec / ab / d / post_mean already gathered to the
    surviving ancestry; w_rows and x_new are the matching regressors and
    responses.
    """
    s_pp = 1.0 + quad_form_inv(cloud.chol_prec, w_rows)
    e = x_new - np.einsum("np,np->n", w_rows, cloud.post_mean)
    chol_update(cloud.chol_prec, w_rows)
    cloud.ab += w_rows * x_new[:, None]
    cloud.d += 0.5 * e * e / s_pp
    cloud.c += 0.5
    cloud.n_obs += 1
    cloud.post_mean = spd_solve(cloud.chol_prec, cloud.ab)


def plav_step(cloud: ParticleCloud, y_t: float, y_prev: float | None) -> ParticleCloud:
    """Advance the auxiliary particle-learning filter by one observation.

    Stages: lookahead resample, propagate, correction resample, fold
    statistics, redraw parameters. The one-step predictive estimate is
    the product of the two stages' mean unnormalized weights, added to
    cum_log_marglik in log space.
    """
    if not np.isfinite(y_t):
        raise ValueError(f"non-finite observation {y_t!r}")
    t_next = cloud.t + 1
    w_rows, g = _lookahead(cloud, y_prev)
    lw1 = obs_logdensity(y_t, g)
    m1 = logmeanexp(lw1)
    if not math.isfinite(m1):
        raise DegeneracyError(f"all lookahead weights vanished at t={t_next}")
    a = resample(
        _normalized_from_log(lw1), cloud.n, "systematic",
        step_stream(cloud.seed, t_next, STREAM_STAGE1),
    )
    u = step_stream(cloud.seed, t_next, STREAM_PROPAGATE).standard_normal(cloud.n)
    g_a = g[a]
    x_hat = g_a + np.sqrt(cloud.omega2[a]) * u
    lw2 = obs_logdensity(y_t, x_hat) - lw1[a]
    m2 = logmeanexp(lw2)
    if not math.isfinite(m2):
        raise DegeneracyError(f"all propagated weights vanished at t={t_next}")
    w2 = _normalized_from_log(lw2)
    b = resample(w2, cloud.n, "systematic", step_stream(cloud.seed, t_next, STREAM_STAGE2))

    idx = a[b]
    cloud.x = x_hat[b]
    if cloud.frozen_theta is None:
        cloud.chol_prec = cloud.chol_prec[idx]
        cloud.ab = cloud.ab[idx]
        cloud.d = cloud.d[idx]
        cloud.post_mean = cloud.post_mean[idx]
        _fold_transitions(cloud, w_rows[idx], cloud.x)
        _refresh_theta(cloud, t_next)
    _finish_step(cloud, m1 + m2, ess_of(w2), t_next)
    return cloud


def naive_pl_step(cloud: ParticleCloud, y_t: float, y_prev: float | None) -> ParticleCloud:
    """Advance the baseline extended-state filter by one observation.

    Blind propagation, observation-density weighting, one resample. The
    predictive estimate is the plain average of the unnormalized
    weights. Parameters ride inside the extended state; when the cloud
    is configured to refresh, they are redrawn from the conjugate
    posterior after resampling (otherwise they only survive selection,
    which is exactly the degeneracy this baseline exists to exhibit).
    """
    if not np.isfinite(y_t):
        raise ValueError(f"non-finite observation {y_t!r}")
    t_next = cloud.t + 1
    w_rows, g = _lookahead(cloud, y_prev)
    u = step_stream(cloud.seed, t_next, STREAM_PROPAGATE).standard_normal(cloud.n)
    x_hat = g + np.sqrt(cloud.omega2) * u
    lw = obs_logdensity(y_t, x_hat)
    m = logmeanexp(lw)
    if not math.isfinite(m):
        raise DegeneracyError(f"all particle weights vanished at t={t_next}")
    w = _normalized_from_log(lw)
    idx = resample(w, cloud.n, "systematic", step_stream(cloud.seed, t_next, STREAM_STAGE1))

    cloud.x = x_hat[idx]
    if cloud.frozen_theta is None:
        cloud.chol_prec = cloud.chol_prec[idx]
        cloud.ab = cloud.ab[idx]
        cloud.d = cloud.d[idx]
        cloud.post_mean = cloud.post_mean[idx]
        _fold_transitions(cloud, w_rows[idx], cloud.x)
        if cloud.refresh_params:
            _refresh_theta(cloud, t_next)
        else:
            cloud.gamma = cloud.gamma[idx]
            cloud.omega2 = cloud.omega2[idx]
    _finish_step(cloud, m, ess_of(w), t_next)
    return cloud


# ---------------------------------------------------------------------------
# Run driver


@dataclass(eq=False)
class FilterResult:
    """Serializable outcome of one filtering run."""

    order: int
    algorithm: str
    particles: int
    seed: int
    burn: int
    posterior: dict
    posterior_draws: dict
    per_t_logpred: np.ndarray
    cum_log_marglik: float
    ess_trace: np.ndarray
    x_filtered_mean: np.ndarray
    diagnostics: dict
    checkpoints: dict = field(default_factory=dict)

    @property
    def scored_logpred(self) -> np.ndarray:
        """Per-step log predictive over the scoring window t > burn."""
        return self.per_t_logpred[self.burn :]


_STEPS: dict[str, Callable] = {
    "plav": plav_step,
    "naive": naive_pl_step,
    "pl": naive_pl_step,
}


def run_filter(
    series,
    order: int | HermiteOrder,
    prior: PriorSpec | PriorScheme = DEFAULT_PRIOR,
    N: int = 10_000,
    seed: int = 0,
    algorithm: str = "plav",
    burn: int = 0,
    fixed_theta: SvParams | None = None,
    checkpoints=None,
) -> FilterResult:
    """Filter a return series and summarize the parameter posterior.

    Parameters
    ----------
    series : ReturnSeries or array_like
        Observations; arrays are wrapped with integer labels.
    order : int or HermiteOrder
        Leverage order k (0 disables the leverage term).
    prior : PriorSpec or PriorScheme
        Concrete prior for this order, or a template materialized here.
    N, seed : int
        Cloud size and run seed.
    algorithm : {"plav", "naive", "pl"}
        Two-stage learner, frozen-parameter baseline, or the baseline
        with conjugate parameter refreshing.
    burn : int
        Steps excluded from cum_log_marglik (the learning period).
    fixed_theta : SvParams, optional
        Freeze parameters at these values (state filtering only).
    checkpoints : iterable of int, optional
        Times at which to snapshot posterior summaries; the final time
        is always summarized.

    Returns
    -------
    FilterResult
    """
    if not isinstance(series, ReturnSeries):
        y = np.asarray(series, dtype=float)
        series = ReturnSeries(list(range(1, y.size + 1)), y)
    y = series.y
    T = y.size
    if T < 2:
        raise ValueError(f"need at least 2 observations, got {T}")
    if not 0 <= burn <= T:
        raise ValueError(f"burn must lie in [0, {T}], got {burn}")
    if algorithm not in _STEPS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    order = as_order(order)
    step = _STEPS[algorithm]
    cloud = init_cloud(
        prior,
        order,
        N,
        seed,
        refresh_params=(algorithm != "naive"),
        frozen_theta=fixed_theta,
    )
    wanted = set(int(t) for t in checkpoints) if checkpoints else set()

    per_t = np.empty(T)
    ess_trace = np.empty(T)
    x_mean = np.empty(T)
    snapshots: dict[int, dict] = {}
    for t in range(1, T + 1):
        y_prev = float(y[t - 2]) if t >= 2 else None
        step(cloud, float(y[t - 1]), y_prev)
        per_t[t - 1] = cloud.last_log_pred
        ess_trace[t - 1] = cloud.ess
        x_mean[t - 1] = float(np.mean(cloud.x))
        if t in wanted:
            snapshots[t] = cloud.posterior_summary()

    diagnostics = {
        "beta_clamped": int(cloud.beta_clamp_count),
        "degeneracy_warnings": list(cloud.warnings),
        "min_ess": float(ess_trace.min()),
    }
    draws = {
        "mu": cloud.gamma[:, 0].copy(),
        "beta": cloud.gamma[:, 1].copy(),
        "phi": cloud.gamma[:, 2:].copy(),
        "omega": np.sqrt(cloud.omega2),
    }
    return FilterResult(
        order=order.k,
        algorithm=algorithm,
        particles=N,
        seed=int(seed),
        burn=int(burn),
        posterior=cloud.posterior_summary(),
        posterior_draws=draws,
        per_t_logpred=per_t,
        cum_log_marglik=float(per_t[burn:].sum()),
        ess_trace=ess_trace,
        x_filtered_mean=x_mean,
        diagnostics=diagnostics,
        checkpoints=snapshots,
    )


# ---------------------------------------------------------------------------
# Grid oracle


@dataclass(eq=False)
class GridFilterResult:
    """Discretized exact filtering output, for cross-checking filters."""

    grid: np.ndarray
    filtered_mean: np.ndarray
    per_t_logpred: np.ndarray
    densities: np.ndarray


def grid_filter_oracle(
    series, theta: SvParams, grid: tuple[float, float, int]
) -> GridFilterResult:
    """Brute-force filtering by discretizing the state space.

    Predict with the Gaussian transition kernel evaluated pointwise (the
    previous shock recomputed per grid point from the previous return),
    update with the observation density, renormalize. Independent of the
    particle machinery by construction; used as a test oracle for
    fixed-parameter runs.
    """
    if not isinstance(series, ReturnSeries):
        yv = np.asarray(series, dtype=float)
        series = ReturnSeries(list(range(1, yv.size + 1)), yv)
    y = series.y
    lo, hi, num = grid
    if num < 2:
        raise ValueError("grid needs at least 2 points")
    mean0, var0 = stationary_moments(theta)
    sd0 = math.sqrt(var0)
    if hi - lo < 8 * sd0:
        raise ValueError(
            f"grid span {hi - lo:.4g} is narrower than 8 stationary sds ({8 * sd0:.4g})"
        )
    pts = np.linspace(lo, hi, int(num))
    T = y.size

    log_p = -0.5 * (pts - mean0) ** 2 / var0
    p_filt = np.exp(log_p - log_p.max())
    p_filt /= p_filt.sum()

    means = np.empty(T)
    logpred = np.empty(T)
    densities = np.empty((T, pts.size))
    om2 = theta.omega**2
    for t in range(1, T + 1):
        if t == 1:
            m = theta.mu + theta.beta * pts
        else:
            eps = shock_from_obs(y[t - 2], pts)
            m = state_mean(theta, pts, eps)
        # Transition matrix column j: density of arriving at each grid
        # point from point j, column-normalized to kill truncation loss.
        diff = pts[:, None] - m[None, :]
        log_k = -0.5 * diff * diff / om2
        log_k -= log_k.max(axis=0)
        kernel = np.exp(log_k)
        kernel /= kernel.sum(axis=0)
        p_pred = kernel @ p_filt

        lobs = obs_logdensity(y[t - 1], pts)
        with np.errstate(divide="ignore"):
            lw = lobs + np.log(p_pred)
        step_pred = logmeanexp(lw) + math.log(pts.size)
        logpred[t - 1] = step_pred
        p_filt = np.exp(lw - lw.max())
        p_filt /= p_filt.sum()
        edge = p_filt[0] + p_filt[-1]
        if edge > 1e-6:
            raise ValueError(
                f"grid too narrow: boundary mass {edge:.3g} at t={t}"
            )
        means[t - 1] = float(pts @ p_filt)
        densities[t - 1] = p_filt
    return GridFilterResult(pts, means, logpred, densities)
