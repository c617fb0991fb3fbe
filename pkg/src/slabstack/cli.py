"""Command-line interface.

Subcommands ``exact``, ``recurrence``, ``montecarlo`` print tables; ``figure``
writes the data behind the three standard plots as CSV with a JSON sidecar.
Exit codes: 0 success, 2 invalid input, 3 numerical convergence failure,
4 matrix/scalar cross-check mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .bounds import (
    conjecture_trend,
    envelopes,
    lambda_bound,
    ratio_and_extrapolate,
    upsilon,
)
from .errors import CapacityError, ConvergenceError, MatrixCheckError, SlabDomainError
from .model import exact_statistics, slab_params
from .montecarlo import RngSpec, run_mc
from .recurrence import TARGETS, TAU, RecurrenceConfig, average_series

log = logging.getLogger("slabstack")

EXIT_INPUT, EXIT_CONVERGENCE, EXIT_CROSSCHECK = 2, 3, 4

CLI_TARGETS = ("tau", "logtau", "invtau", "cosh", "cosh2")


# -- output -----------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_json_value(x) for x in v]
    return v


def render_csv(columns: Sequence[str], rows: List[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _metadata(args, tau1: Optional[float], error_estimates=None, **extra) -> dict:
    # the output path and worker count do not affect the data
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "out", "workers")}
    meta = {
        "command": args.command,
        "flags": flags,
        "tool_version": __version__,
    }
    if tau1 is not None:
        p = slab_params(tau1)
        meta["derived_constants"] = {
            "C": p.C,
            "S": p.S,
            "theta": p.theta,
            "upsilon": upsilon(tau1),
            "lambda": lambda_bound(tau1),
        }
    meta["error_estimates"] = error_estimates
    meta.update(extra)
    return _json_value(meta)


def _emit(args, columns, rows, meta: dict, sidecar: bool = False) -> None:
    if args.format == "json":
        text = json.dumps({**meta, "columns": list(columns),
                           "rows": [{c: _json_value(r.get(c)) for c in columns} for r in rows]},
                          indent=2, sort_keys=True) + "\n"
    else:
        text = render_csv(columns, rows)
    if args.out is None or str(args.out) == "-":
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.write_text(text, encoding="utf-8")
    if sidecar and args.format == "csv":
        side = out.with_name(out.name + ".json")
        side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- commands ---------------------------------------------------------------

EXACT_COLUMNS = (
    "tau1", "N", "mean_log_tau", "bk_lower", "ray", "mean_inv_tau", "log_mean_inv_tau",
    "mean_cosh", "log_mean_cosh", "mean_cosh_sq", "log_mean_cosh_sq",
    "normalized_cosh_variance", "mean_tau2", "mean_tau3",
)


def cmd_exact(args) -> int:
    st = exact_statistics(args.tau1, args.n)
    _emit(args, EXACT_COLUMNS, [st.as_row()], _metadata(args, args.tau1))
    return 0


def _config(args) -> RecurrenceConfig:
    return RecurrenceConfig(delta_eta=args.grid_delta, quad_nodes=args.quad_nodes)


def cmd_recurrence(args) -> int:
    if args.n_max < 2:
        raise SlabDomainError("--n-max must be >= 2")
    target = TARGETS[args.target]
    res = average_series(args.tau1, args.n_max, target, _config(args))
    rows = []
    for N in range(2, args.n_max + 1):
        v = res.at(N)
        if res.log_values:
            value, log_value = (math.exp(v) if v < 709 else math.inf), v
        else:
            value, log_value = v, (math.log(v) if v > 0 else None)
        rows.append({"N": N, "value": value, "log_value": log_value,
                     "error_estimate": float(res.error_estimate[N - 1])})
    cols = ("N", "value", "log_value", "error_estimate")
    meta = _metadata(args, args.tau1, error_estimates={
        "max": float(res.error_estimate.max()),
        "log_domain": res.log_values,
    })
    _emit(args, cols, rows, meta)
    return 0


MC_COLUMNS = (
    "tau1", "N", "trials", "mean_tau", "se_tau", "mean_log_tau", "se_log_tau",
    "exact_mean_log_tau", "jensen_ok", "log_mean_inv_tau", "rel_se_inv_tau",
    "inv_tau_unreliable", "log_mean_cosh", "rel_se_cosh", "log_mean_cosh_sq",
    "rel_se_cosh_sq",
)


def mc_rows(tau1, results) -> List[dict]:
    rows = []
    for N, s in results.items():
        rows.append({
            "tau1": tau1,
            "N": N,
            "trials": s.count,
            "mean_tau": s.tau_mean,
            "se_tau": s.se_tau,
            "mean_log_tau": s.log_tau_mean,
            "se_log_tau": s.se_log_tau,
            "exact_mean_log_tau": N * math.log(tau1),
            "jensen_ok": s.jensen_ok,
            "log_mean_inv_tau": s.log_mean("inv_tau"),
            "rel_se_inv_tau": s.rel_se("inv_tau"),
            "inv_tau_unreliable": s.unreliable("inv_tau"),
            "log_mean_cosh": s.log_mean("cosh"),
            "rel_se_cosh": s.rel_se("cosh"),
            "log_mean_cosh_sq": s.log_mean("cosh_sq"),
            "rel_se_cosh_sq": s.rel_se("cosh_sq"),
        })
    return rows


def cmd_montecarlo(args) -> int:
    res = run_mc(args.tau1, args.n, args.trials, RngSpec(args.seed, args.stream),
                 matrix_check=args.matrix_check, workers=args.workers)
    meta = _metadata(args, args.tau1)
    _emit(args, MC_COLUMNS, mc_rows(args.tau1, res), meta)
    return 0


def figure_fig4(args):
    tau1, n_max = args.tau1, args.n_max
    series = average_series(tau1, n_max, TAU, _config(args))
    env = envelopes(tau1, n_max)
    mc_ns = list(range(args.mc_every, n_max + 1, args.mc_every)) if args.trials > 0 else []
    mc = run_mc(tau1, mc_ns, args.trials, RngSpec(args.seed, args.stream),
                workers=args.workers) if mc_ns else {}
    rows = []
    for i, N in enumerate(env.N):
        N = int(N)
        s = mc.get(N)
        rows.append({
            "N": N,
            "log_recurrence": series.at(N),
            "log_mc": math.log(s.tau_mean) if s and s.tau_mean > 0 else None,
            "mc_se": s.se_tau / s.tau_mean if s and s.tau_mean > 0 else None,
            "log_upper": env.upper_envelope_log[i],
            "log_lower": env.lower_envelope_log[i],
            "log_bk": env.bk_lower_log[i],
        })
    cols = ("N", "log_recurrence", "log_mc", "mc_se", "log_upper", "log_lower", "log_bk")
    errs = {"recurrence_log_abs": series.error_estimate[1:].tolist(),
            "recurrence_log_abs_max": float(series.error_estimate.max())}
    return cols, rows, errs, {"mc_N": mc_ns}


def figure_fig5(args):
    rows = []
    for t in np.linspace(0.0, 1.0, 201)[1:]:
        t = float(t)
        rows.append({"tau1": t, "upsilon": upsilon(t), "lambda": lambda_bound(t), "tau1_line": t})
    return ("tau1", "upsilon", "lambda", "tau1_line"), rows, None, {}


def figure_fig6(args):
    tau1, n_max = args.tau1, args.n_max
    if n_max < 4:
        raise SlabDomainError("fig6 needs --n-max >= 4")
    series = average_series(tau1, n_max, TAU, _config(args))
    tau2 = tau1 / (2.0 - tau1)
    r, A, B = ratio_and_extrapolate(tau2, {N: series.at(N) for N in range(3, n_max + 1)})
    ups, lam = upsilon(tau1), lambda_bound(tau1)
    rows = [{"N": N, "r_N": r[N], "A_N": A.get(N), "B_N": B.get(N),
             "upsilon_line": ups, "lambda_line": lam} for N in sorted(r)]
    trend = conjecture_trend(ups, A, N_from=min(50, n_max))
    log.info("conjecture trend: %s", json.dumps(_json_value(trend), sort_keys=True))
    errs = {"recurrence_log_abs_max": float(series.error_estimate.max())}
    return ("N", "r_N", "A_N", "B_N", "upsilon_line", "lambda_line"), rows, errs, {
        "conjecture_trend": trend}


FIGURES = {"fig4": figure_fig4, "fig5": figure_fig5, "fig6": figure_fig6}


def cmd_figure(args) -> int:
    cols, rows, errs, extra = FIGURES[args.which](args)
    tau1 = None if args.which == "fig5" else args.tau1
    if args.out is None:
        args.out = f"{args.which}.csv"
    meta = _metadata(args, tau1, error_estimates=errs, **extra)
    _emit(args, cols, rows, meta, sidecar=True)
    return 0


# -- parser -----------------------------------------------------------------


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _tau1(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s}") from None
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"tau1 must lie in (0, 1], got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slabstack",
        description="Transmission statistics of a stack of identical slabs with random gaps.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, tau_default=None):
        p.add_argument("--tau1", type=_tau1, required=tau_default is None, default=tau_default,
                       help="single-slab transmission probability")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--out", default=None, help="output path (default: stdout)")

    def grid(p):
        p.add_argument("--grid-delta", type=float, default=RecurrenceConfig.delta_eta)
        p.add_argument("--quad-nodes", type=int, default=RecurrenceConfig.quad_nodes)

    def mc(p):
        p.add_argument("--trials", type=int, default=400_000)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--stream", type=int, default=0)
        p.add_argument("--workers", type=_positive_int, default=1)

    p = sub.add_parser("exact", help="closed-form statistics")
    common(p)
    p.add_argument("--n", type=_positive_int, required=True)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("recurrence", help="phase-averaging recurrence, N = 2 .. n-max")
    common(p)
    p.add_argument("--n-max", type=int, default=3)
    p.add_argument("--target", choices=CLI_TARGETS, default="tau")
    grid(p)
    p.set_defaults(func=cmd_recurrence)

    p = sub.add_parser("montecarlo", help="Monte Carlo ensemble statistics")
    common(p)
    p.add_argument("--n", type=_positive_int, nargs="+", required=True)
    mc(p)
    p.add_argument("--matrix-check", action="store_true",
                   help="re-simulate 1 in 1000 trials (N <= 50) with full 2x2 matrices")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("figure", help="datasets for the standard figures")
    p.add_argument("which", choices=sorted(FIGURES))
    common(p, tau_default=0.85)
    p.add_argument("--n-max", type=int, default=200)
    p.add_argument("--mc-every", type=_positive_int, default=10,
                   help="fig4: run Monte Carlo at every k-th N")
    grid(p)
    mc(p)
    p.set_defaults(func=cmd_figure)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"slabstack: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except MatrixCheckError as exc:
        print(f"slabstack: cross-check failed: {exc}", file=sys.stderr)
        return EXIT_CROSSCHECK
    except (SlabDomainError, CapacityError, ValueError) as exc:
        print(f"slabstack: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
