"""Online model choice across leverage orders.

Each candidate order is scored by its cumulative one-step-ahead log
predictive density over the post-burn window, accumulated by the filter
itself, so selection costs one filtering run per order. The log
predictive density ratio (LPDR) compares the best member of one order
class against the best of another on the same per-step predictives.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .filter import DEFAULT_PRIOR, run_filter
from .hermite import as_order


def order_seed(seed: int, order: int) -> int:
    """Stable per-order child seed.

    Keyed on the (seed, order) pair so adding candidate orders never
    perturbs existing runs and nearby seeds never collide across orders.
    """
    ss = np.random.SeedSequence((int(seed), int(order)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def log_marglik(
    series,
    order: int,
    prior=DEFAULT_PRIOR,
    N: int = 10_000,
    seed: int = 0,
    burn: int = 0,
) -> tuple[float, np.ndarray]:
    """Cumulative and per-step log predictive density for one order.

    Returns (cumulative, per_t) where per_t covers only the scoring
    window t > burn; burn = T gives (0.0, empty).
    """
    result = run_filter(series, order, prior, N=N, seed=seed, burn=burn)
    per_t = result.scored_logpred.copy()
    return float(per_t.sum()), per_t


@dataclass(eq=False)
class OrderScore:
    cum_log_marglik: float
    per_t_logpred: np.ndarray


@dataclass(eq=False)
class SelectionReport:
    """Scores per order plus the selected order and how ties resolved."""

    per_order: dict[int, OrderScore]
    best_order: int
    burn: int
    tie_break_applied: bool = False


def pick_best(cum_by_order: dict[int, float]) -> tuple[int, bool]:
    """Highest cumulative score wins; exact ties go to the smaller order."""
    if not cum_by_order:
        raise ValueError("no candidate orders to choose from")
    top = max(cum_by_order.values())
    winners = sorted(k for k, v in cum_by_order.items() if v == top)
    return winners[0], len(winners) > 1


def _score_orders(
    series, orders, prior, N, seed, burn, max_workers
) -> dict[int, OrderScore]:
    orders = sorted(set(int(k) for k in orders))

    def one(k: int) -> OrderScore:
        cum, per_t = log_marglik(series, k, prior, N=N, seed=order_seed(seed, k), burn=burn)
        return OrderScore(cum, per_t)

    if max_workers is not None and max_workers > 1 and len(orders) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            scores = list(pool.map(one, orders))
    else:
        scores = [one(k) for k in orders]
    return dict(zip(orders, scores))


def select_order(
    series,
    k_max: int,
    prior=DEFAULT_PRIOR,
    N: int = 10_000,
    seed: int = 0,
    burn: int = 0,
    max_workers: int | None = None,
) -> SelectionReport:
    """Score every order 0..k_max and pick the best.

    Orders run with independent child seeds (see order_seed) and may be
    scored in parallel threads; results are identical either way.
    """
    k_max = as_order(k_max).k
    per_order = _score_orders(
        series, range(k_max + 1), prior, N, seed, burn, max_workers
    )
    best, tied = pick_best({k: s.cum_log_marglik for k, s in per_order.items()})
    return SelectionReport(per_order, best, int(burn), tied)


@dataclass(eq=False)
class LpdrSeries:
    """Cumulative log predictive density ratio between two order classes.

    values[j] accumulates the per-step log-density differences (best of
    class_b minus best of class_a) over the scoring window; a positive
    final value favors class_b.
    """

    values: np.ndarray
    class_a: tuple[int, ...]
    class_b: tuple[int, ...]
    best_a: int
    best_b: int

    @property
    def final(self) -> float:
        return float(self.values[-1]) if self.values.size else 0.0


def lpdr_from_scores(scores: dict[int, OrderScore], class_a, class_b) -> LpdrSeries:
    """Build the class comparison from already-computed order scores."""
    class_a = tuple(sorted(set(int(k) for k in class_a)))
    class_b = tuple(sorted(set(int(k) for k in class_b)))
    if not class_a or not class_b:
        raise ValueError("both order classes must be nonempty")
    missing = (set(class_a) | set(class_b)) - set(scores)
    if missing:
        raise ValueError(f"no scores for orders {sorted(missing)}")
    best_a, _ = pick_best({k: scores[k].cum_log_marglik for k in class_a})
    best_b, _ = pick_best({k: scores[k].cum_log_marglik for k in class_b})
    diff = scores[best_b].per_t_logpred - scores[best_a].per_t_logpred
    return LpdrSeries(np.cumsum(diff), class_a, class_b, best_a, best_b)


def lpdr(
    series,
    class_a,
    class_b,
    prior=DEFAULT_PRIOR,
    N: int = 10_000,
    seed: int = 0,
    burn: int = 0,
    max_workers: int | None = None,
) -> LpdrSeries:
    """Compare the best order of class_a against the best of class_b.

    Every order uses the same child seed it would get under
    select_order, so class comparisons reuse identical runs.
    """
    scores = _score_orders(
        series, set(class_a) | set(class_b), prior, N, seed, burn, max_workers
    )
    return lpdr_from_scores(scores, class_a, class_b)
