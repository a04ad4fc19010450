"""Command-line front end: ingestion, experiments, and serialized reports.

Four subcommands share one pipeline: `simulate` writes synthetic series,
`fit` runs one filter, `select` races leverage orders, `curve` turns a
fit's posterior draws into news-impact-curve data. Primary outputs are
CSV for series-shaped data and JSON for structured results; each command
also renders a figure next to its output unless --no-figures is given.

Exit codes: 0 success, 1 input/output error, 2 configuration error
(argparse uses the same code for usage errors), 3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, fields as dataclass_fields, replace

import numpy as np

from . import figures
from .filter import (
    DEFAULT_PRIOR,
    DegeneracyError,
    PriorScheme,
    PriorSpec,
    run_filter,
)
from .hermite import DEFAULT_MAX_ORDER, LeverageSpec, leverage_curve
from .model import make_params, shock_from_obs, simulate
from .selection import lpdr_from_scores, select_order
from .series import ReturnSeries

log = logging.getLogger("hermvol")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3

THREADS_ENV = "HERMVOL_THREADS"

# Simulation defaults: the linear-leverage reference setting.
DEFAULT_MU = -0.026
DEFAULT_BETA = 0.970
DEFAULT_PHI1 = -0.045
DEFAULT_OMEGA = 0.143
DEFAULT_TAU = 0.150


class InputError(Exception):
    """Bad input data or unusable files; exits with code 1."""


@dataclass(frozen=True)
class RunConfig:
    """Shared command configuration resolved from flags."""

    input: str | None = None
    date_col: str = "t"
    value_col: str = "y"
    mode: str = "returns"
    return_scale: float = 100.0
    particles: int = 10_000
    k_max: int = DEFAULT_MAX_ORDER
    order: int = 1
    seed: int = 0
    burn: int | None = None
    algorithm: str = "plav"
    prior_path: str | None = None
    out: str | None = None
    figures: bool = True

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        known = {f.name for f in dataclass_fields(cls)}
        picked = {k: v for k, v in vars(args).items() if k in known and v is not None}
        if getattr(args, "no_figures", False):
            picked["figures"] = False
        return cls(**picked)


# ---------------------------------------------------------------------------
# ingestion

def _parse_labels(raw: list[str]):
    """Interpret the label column as ints, floats, ISO dates, or strings.

    The whole column must parse uniformly; otherwise labels stay strings.
    """
    for cast in (int, float, datetime.date.fromisoformat):
        try:
            return [cast(s) for s in raw]
        except (ValueError, TypeError):
            continue
    return list(raw)


def ingest(path: str, config: RunConfig) -> tuple[ReturnSeries, int]:
    """Read a CSV into a ReturnSeries; returns (series, dropped_rows)."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for col in (config.date_col, config.value_col):
                if col not in header:
                    raise InputError(f"column {col!r} not in header {header}")
            raw_labels, values, dropped = [], [], 0
            for row in reader:
                cell = (row.get(config.value_col) or "").strip()
                try:
                    v = float(cell)
                except ValueError:
                    v = float("nan")
                if not np.isfinite(v):
                    dropped += 1
                    continue
                raw_labels.append((row.get(config.date_col) or "").strip())
                values.append(v)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except csv.Error as exc:
        raise InputError(f"cannot parse {path} as CSV: {exc}") from exc

    if dropped:
        log.info("dropped %d rows with missing values from %s", dropped, path)
    if len(values) < 3:
        raise InputError(f"{path}: only {len(values)} usable rows; need at least 3")

    labels = _parse_labels(raw_labels)
    order = sorted(range(len(labels)), key=lambda i: labels[i])
    labels = [labels[i] for i in order]
    y = np.asarray(values, dtype=float)[order]
    for a, b in zip(labels, labels[1:]):
        if not a < b:
            raise InputError(f"duplicate label {b!r} in {path}")

    if config.mode == "prices":
        if np.any(y <= 0.0):
            raise InputError(f"{path}: non-positive prices in prices mode")
        y = config.return_scale * np.diff(np.log(y))
        labels = labels[1:]
    elif config.mode != "returns":
        raise InputError(f"unknown ingestion mode {config.mode!r}")
    try:
        return ReturnSeries(labels, y), dropped
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# serialization helpers

def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_csv(path: str, header: list[str], columns: list[np.ndarray]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in zip(*columns):
        writer.writerow([c if isinstance(c, str) else _fmt(c) for c in row])
    _atomic_write(path, buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, datetime.date):
        return obj.isoformat()
    return obj


def _write_json(path: str, doc: dict) -> None:
    _atomic_write(path, json.dumps(_jsonable(doc), indent=2) + "\n")


def _label_out(label):
    return label.isoformat() if isinstance(label, datetime.date) else label


def _figure_path(out: str) -> str:
    root, _ = os.path.splitext(out)
    return f"{root}.png"


def _resolve_burn(burn: int | None, T: int) -> int:
    # learning-period convention: first fifth of the sample when unset
    return int(0.2 * T) if burn is None else int(burn)


def _load_prior(path: str | None, order: int | None):
    """Prior overrides from JSON: scheme fields, or a full matrix spec."""
    if path is None:
        return DEFAULT_PRIOR
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read prior file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in prior file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"prior file {path} must hold a JSON object")

    if "A0" in data or "b0" in data:
        if order is None:
            raise ValueError(
                "full-matrix prior files fix a single order; "
                "use scheme fields (a0_mu, c0, ...) for selection"
            )
        try:
            spec = PriorSpec(
                A0=np.asarray(data["A0"], dtype=float),
                b0=np.asarray(data["b0"], dtype=float),
                c0=float(data.get("c0", DEFAULT_PRIOR.c0)),
                d0=float(data.get("d0", DEFAULT_PRIOR.d0)),
                x0_mode=data.get("x0_mode", "stationary"),
                a0_is_precision=bool(data.get("a0_is_precision", False)),
                invgamma_halved=bool(data.get("invgamma_halved", False)),
            )
        except KeyError as exc:
            raise ValueError(f"bad prior file {path}: missing {exc}") from exc
        if spec.order != order:
            raise ValueError(
                f"prior file {path} is for order {spec.order}, run uses {order}"
            )
        return spec

    known = {f.name for f in dataclass_fields(PriorScheme)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown prior fields in {path}: {sorted(unknown)}")
    try:
        return replace(DEFAULT_PRIOR, **data)
    except TypeError as exc:
        raise ValueError(f"bad prior file {path}: {exc}") from exc


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV}={raw!r} is not an integer")
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_args(args)
    k = int(args.order)
    if args.phi is not None:
        coeffs = [float(s) for s in args.phi.split(",")]
        if len(coeffs) != k:
            raise ValueError(f"--phi gives {len(coeffs)} coefficients for order {k}")
    else:
        coeffs = ([DEFAULT_PHI1] + [0.0] * (k - 1)) if k else []
    if args.tau is not None:
        if k != 0:
            raise ValueError("--tau is the innovation scale of the order-0 model")
        omega = float(args.tau)
    elif args.omega is not None:
        omega = float(args.omega)
    else:
        omega = DEFAULT_TAU if k == 0 else DEFAULT_OMEGA
    theta = make_params(float(args.mu), float(args.beta), coeffs, omega)

    sim = simulate(theta, int(args.length), seed=cfg.seed)
    out = cfg.out or "simulated.csv"
    _write_csv(
        out,
        ["t", "y", "x", "eps"],
        [
            np.asarray([str(_label_out(l)) for l in sim.returns.labels]),
            sim.returns.y,
            sim.latent,
            sim.shocks,
        ],
    )
    _write_json(
        f"{out}.meta.json",
        {
            "mu": theta.mu,
            "beta": theta.beta,
            "order": k,
            "phi": list(theta.leverage.coeffs),
            "omega": theta.omega,
            "length": int(args.length),
            "seed": cfg.seed,
        },
    )
    if cfg.figures:
        figures.render_simulation(
            sim.returns.labels, sim.returns.y, sim.latent, _figure_path(out)
        )
    log.info("wrote %s (T=%d, order=%d)", out, int(args.length), k)
    return EXIT_OK


def _posterior_doc(result) -> dict:
    post = result.posterior
    doc = {
        "mu": post["mu"],
        "beta": post["beta"],
        "phi": post["phi"],
        "omega": post["omega"],
    }
    return doc


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_args(args)
    if cfg.input is None:
        raise ValueError("--input is required for fit")
    series, dropped = ingest(cfg.input, cfg)
    burn = _resolve_burn(cfg.burn, len(series))
    prior = _load_prior(cfg.prior_path, cfg.order)

    t0 = time.perf_counter()
    result = run_filter(
        series,
        order=cfg.order,
        prior=prior,
        N=cfg.particles,
        seed=cfg.seed,
        algorithm=cfg.algorithm,
        burn=burn,
    )
    elapsed = time.perf_counter() - t0

    eps_hat = shock_from_obs(series.y, result.x_filtered_mean)
    shock_interval = [float(q) for q in np.quantile(eps_hat, [0.025, 0.975])]
    diagnostics = dict(result.diagnostics)
    diagnostics["dropped_rows"] = dropped

    out = cfg.out or "fit.json"
    doc = {
        "model": {
            "order": int(result.order),
            "algorithm": result.algorithm,
            "particles": int(result.particles),
            "seed": int(result.seed),
            "burn": int(burn),
            "series_length": len(series),
            "input": cfg.input,
        },
        "posterior": _posterior_doc(result),
        "posterior_draws": result.posterior_draws,
        "per_t_logpred": result.scored_logpred,
        "cum_log_marglik": result.cum_log_marglik,
        "ess": result.ess_trace,
        "x_filtered_mean": result.x_filtered_mean,
        "shock_interval": shock_interval,
        "labels": [_label_out(l) for l in series.labels],
        "diagnostics": diagnostics,
    }
    _write_json(out, doc)
    # timing is real wall-clock and varies run to run, so it lives in a
    # sidecar to keep the primary document byte-reproducible
    _write_json(f"{out}.timing.json", {"timing_seconds": elapsed})
    if cfg.figures:
        figures.render_fit(
            series.labels,
            series.y,
            result.x_filtered_mean,
            result.ess_trace,
            result.per_t_logpred,
            cfg.particles,
            _figure_path(out),
        )
    log.info(
        "fit order=%d algorithm=%s cum_log_marglik=%.3f (%.1fs)",
        cfg.order, cfg.algorithm, result.cum_log_marglik, elapsed,
    )
    return EXIT_OK


def cmd_select(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_args(args)
    if cfg.input is None:
        raise ValueError("--input is required for select")
    series, dropped = ingest(cfg.input, cfg)
    burn = _resolve_burn(cfg.burn, len(series))
    prior = _load_prior(cfg.prior_path, None)
    workers = _thread_count()

    t0 = time.perf_counter()
    report = select_order(
        series,
        cfg.k_max,
        prior=prior,
        N=cfg.particles,
        seed=cfg.seed,
        burn=burn,
        max_workers=workers,
    )
    elapsed = time.perf_counter() - t0

    orders = sorted(report.per_order)
    doc = {
        "config": {
            "k_max": int(cfg.k_max),
            "particles": int(cfg.particles),
            "seed": int(cfg.seed),
            "burn": int(burn),
            "series_length": len(series),
            "input": cfg.input,
            "dropped_rows": dropped,
        },
        "per_order": {
            str(k): {
                "cum_log_marglik": report.per_order[k].cum_log_marglik,
                "per_t_logpred": report.per_order[k].per_t_logpred,
            }
            for k in orders
        },
        "best_order": int(report.best_order),
        "tie_break_applied": bool(report.tie_break_applied),
    }
    lpdr_series = None
    if cfg.k_max >= 2:
        lpdr_series = lpdr_from_scores(
            report.per_order, range(2), range(2, cfg.k_max + 1)
        )
        doc["lpdr"] = {
            "class_a": list(lpdr_series.class_a),
            "class_b": list(lpdr_series.class_b),
            "best_a": int(lpdr_series.best_a),
            "best_b": int(lpdr_series.best_b),
            "values": lpdr_series.values,
            "final": lpdr_series.final,
        }
    else:
        doc["lpdr_notice"] = (
            "class comparison skipped: k_max < 2 leaves the higher-order "
            "class empty"
        )

    out = cfg.out or "selection.json"
    _write_json(out, doc)
    _write_json(f"{out}.timing.json", {"timing_seconds": elapsed})
    if cfg.figures:
        figures.render_selection(
            orders,
            [report.per_order[k].cum_log_marglik for k in orders],
            None if lpdr_series is None else lpdr_series.values,
            _figure_path(out),
        )
    log.info(
        "select k_max=%d best_order=%d (%.1fs)", cfg.k_max, report.best_order, elapsed
    )
    return EXIT_OK


def _parse_grid(spec: str) -> np.ndarray:
    try:
        lo_s, hi_s, step_s = spec.split(":")
        lo, hi, step = float(lo_s), float(hi_s), float(step_s)
    except ValueError:
        raise ValueError(f"--grid must look like lo:hi:step, got {spec!r}")
    if step <= 0 or hi <= lo:
        raise ValueError(f"--grid needs lo < hi and step > 0, got {spec!r}")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def cmd_curve(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_args(args)
    try:
        with open(args.fit, encoding="utf-8") as fh:
            fit_doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read fit file {args.fit}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in fit file {args.fit}: {exc}") from exc

    draws = fit_doc.get("posterior_draws")
    if not isinstance(draws, dict) or "phi" not in draws:
        raise InputError(f"{args.fit} has no posterior draws; re-run fit")
    phi = np.asarray(draws["phi"], dtype=float)
    if phi.ndim == 1:
        phi = phi[:, None] if phi.size else phi.reshape(0, 0)
    k = int(fit_doc.get("model", {}).get("order", phi.shape[1]))

    grid = _parse_grid(args.grid)
    specs = [LeverageSpec(k, row) for row in phi]
    curve = leverage_curve(specs, grid)

    out = cfg.out or "curve.csv"
    _write_csv(out, ["z", "mean", "lo", "hi"], [curve.grid, curve.mean, curve.lo, curve.hi])
    shock_interval = fit_doc.get("shock_interval")
    _write_json(
        f"{out}.meta.json",
        {
            "order": k,
            "draws": int(phi.shape[0]),
            "shock_interval": shock_interval,
            "source_fit": args.fit,
        },
    )
    if cfg.figures:
        figures.render_curve(
            curve.grid, curve.mean, curve.lo, curve.hi, shock_interval,
            _figure_path(out),
        )
    log.info("wrote %s (%d grid points, order %d)", out, grid.size, k)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _add_io_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="CSV file to ingest")
    p.add_argument("--date-col", dest="date_col", default="t",
                   help="label column name (default t)")
    p.add_argument("--value-col", dest="value_col", default="y",
                   help="value column name (default y)")
    p.add_argument("--mode", choices=("returns", "prices"), default="returns",
                   help="treat the value column as returns or prices")
    p.add_argument("--return-scale", dest="return_scale", type=float, default=100.0,
                   help="scale for log-price differences (default 100)")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--particles", type=int, default=10_000,
                   help="particle count N (default 10000)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn", type=int, default=None,
                   help="scoring burn-in; default is 20%% of the series")
    p.add_argument("--prior", dest="prior_path",
                   help="JSON file with prior overrides")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hermvol",
        description="Sequential inference for stochastic volatility with "
                    "polynomial leverage.",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic return series")
    p.add_argument("--mu", type=float, default=DEFAULT_MU)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--order", type=int, default=1, help="leverage order k")
    p.add_argument("--phi",
                   help="comma-separated leverage coefficients; pass "
                        "negative lists with the equals form, e.g. "
                        "--phi=-0.045,-0.05")
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--tau", type=float, default=None,
                   help="order-0 innovation scale (alias for --omega at k=0)")
    p.add_argument("--length", "-T", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output CSV path (default simulated.csv)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run one filter and report the posterior")
    _add_io_flags(p)
    _add_run_flags(p)
    p.add_argument("--order", type=int, default=1, help="leverage order k")
    p.add_argument("--algorithm", choices=("plav", "naive", "pl"), default="plav")
    p.add_argument("--out", help="output JSON path (default fit.json)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select", help="race leverage orders 0..k_max")
    _add_io_flags(p)
    _add_run_flags(p)
    p.add_argument("--kmax", dest="k_max", type=int, default=DEFAULT_MAX_ORDER)
    p.add_argument("--out", help="output JSON path (default selection.json)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("curve", help="news-impact curve from a fit's draws")
    p.add_argument("--fit", required=True, help="fit JSON produced by `fit`")
    p.add_argument("--grid", default="-3:3:0.1",
                   help="shock grid lo:hi:step; pass negative bounds with "
                        "the equals form, e.g. --grid=-3:3:0.1")
    p.add_argument("--out", help="output CSV path (default curve.csv)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_curve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except InputError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except DegeneracyError as exc:
        log.error("filter degenerated: %s", exc)
        return EXIT_DEGENERATE
    except ValueError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
