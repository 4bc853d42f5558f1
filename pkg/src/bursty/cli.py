"""Command-line front end: ``bursty analyze | simulate | fit``.

Exit status: 0 success, 1 usage or ingestion error, 2 analysis
precondition failure, 3 fit did not converge (outputs are still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .burstiness import assess, binned_profile, write_delta_mu_csv
from .errors import BurstyError, IngestError, InsufficientDataError, UndefinedStatisticError
from .event_series import KEEP_ZEROS, IngestConfig, inter_event_times, jitter, parse_events
from .gibbs_fitter import PriorConfig, fit
from .ripley import k_profile
from .stat_tests import test_arrival_uniformity, test_interevent_exponential
from .two_state_model import TwoStateParams, read_trajectory_csv, simulate

SCHEMA_VERSION = "1"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PRECONDITION = 2
EXIT_NONCONVERGED = 3

STRONG_P = 0.001
MARGINAL_P = 0.05

_UNAVAILABLE_ERRORS = (InsufficientDataError, UndefinedStatisticError)


class UsageError(Exception):
    pass


class PreconditionError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ------------------------------------------------------------------ config


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Keys may use
    dashes or underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


def _floats(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _window(text: str):
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("window must be START,END")
    return tuple(vals)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bursty", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, fmt_default):
        p.add_argument("--config", help="key=value file supplying any flag")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="primary output path")
        p.add_argument("--format", choices=("json", "csv"), default=fmt_default)

    def ingest(p):
        p.add_argument("--input", required=True)
        p.add_argument("--network", help="network_id to select from an events file")
        p.add_argument("--delimiter", default=",")
        p.add_argument("--timestamp-format", choices=("auto", "iso", "epoch"), default="auto")
        p.add_argument("--window", type=_window, help="START,END of the observation window")
        p.add_argument("--tie-policy", choices=("keep", "jitter"), default="keep")

    a = sub.add_parser("analyze", help="run the burstiness test battery")
    common(a, "json")
    ingest(a)
    a.add_argument("--mc-trials", type=int, default=10_000)
    a.add_argument("--coverage", type=float, default=0.95)
    a.add_argument("--grid", type=_floats, help="comma-separated half-widths t1,t2,...")
    a.add_argument("--edge-policy", choices=("interior-only", "uncorrected"), default="interior-only")
    a.add_argument("--null-variance", choices=("conditional", "independent"), default="conditional")

    s = sub.add_parser("simulate", help="simulate the two-state model")
    common(s, "csv")
    s.add_argument("--lambda0", type=float, required=True)
    s.add_argument("--lambda1", type=float, required=True)
    s.add_argument("--p0", type=float, required=True)
    s.add_argument("--p1", type=float, required=True)
    s.add_argument("--events", type=int, required=True)
    s.add_argument("--initial", choices=("0", "1", "random"), default="random")

    f = sub.add_parser("fit", help="Gibbs-sample the two-state model")
    common(f, "json")
    ingest(f)
    f.add_argument("--chains", type=int, default=10)
    f.add_argument("--iters", type=int, default=5000)
    f.add_argument("--burnin", type=int, default=1500)
    f.add_argument("--thin", type=int, default=1)
    f.add_argument("--rhat-threshold", type=float, default=1.1)
    f.add_argument("--init", choices=("ordered-prior", "prior"), default="ordered-prior")
    return parser


def _subparsers(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def parse_args(argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    parser = build_parser()
    if known.config:
        cfg = read_config(known.config)
        used = set()
        for sp in _subparsers(parser).values():
            dests = {a.dest for a in sp._actions}
            hits = {k: v for k, v in cfg.items() if k in dests and k != "config"}
            for action in sp._actions:
                if action.dest in hits:
                    action.required = False
            sp.set_defaults(**hits)
            used |= set(hits)
        unknown = set(cfg) - used
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a command is required: analyze, simulate or fit")
    return args


# ------------------------------------------------------------------ output


def _side(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv_text(writer_fn) -> str:
    buf = io.StringIO()
    writer_fn(buf)
    return buf.getvalue()


def _classify(p):
    if p is None:
        return "unavailable"
    if p <= STRONG_P:
        return "+"
    if p <= MARGINAL_P:
        return "marginal +"
    return "-"


def _attempt(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs), None
    except _UNAVAILABLE_ERRORS as exc:
        return None, str(exc)


def _unavailable(reason):
    return {"available": False, "reason": reason}


def _load_series(args):
    if not args.network:
        raise UsageError("--network is required for an events file")
    cfg = IngestConfig(args.network, args.delimiter, args.timestamp_format, args.window)
    try:
        with open(args.input, encoding="utf-8", newline="") as fh:
            return parse_events(fh, cfg)
    except OSError as exc:
        raise IngestError(f"cannot read {args.input}: {exc.strerror}") from None


def _tie_policy(args):
    return jitter(args.seed) if args.tie_policy == "jitter" else KEEP_ZEROS


# ----------------------------------------------------------------- analyze


def verdict_row(kolmogorov, ripley, burst) -> dict:
    """One-line +/- summary derived from p-values and envelope flags.

    The Kolmogorov column uses the larger of the two Kolmogorov p-values
    (both nulls must be rejected); the K column uses the profile's
    Bonferroni-adjusted smallest p-value.
    """
    ps = [r.p_value for r in kolmogorov if r is not None]
    k_p = max(ps) if ps else None
    r_p = ripley.family_p_value() if ripley is not None else None
    if burst is None:
        b = m = "unavailable"
    else:
        b = "+" if burst.significant_delta else "-"
        m = "unavailable" if burst.mu is None else "+" if burst.significant_mu else "-"
    return {"kolmogorov": _classify(k_p), "k_statistic": _classify(r_p), "burstiness": b, "memory": m}


def run_analyze(args) -> dict:
    series = _load_series(args)
    if series.n < 2:
        raise PreconditionError(f"need at least 2 events to analyze, got {series.n}")
    policy = _tie_policy(args)
    iets = inter_event_times(series, policy)

    arrival, arrival_err = _attempt(test_arrival_uniformity, series)
    inter, inter_err = _attempt(test_interevent_exponential, iets)
    profile, profile_err = _attempt(k_profile, series, args.grid, args.edge_policy, args.null_variance)
    burst, burst_err = _attempt(assess, iets, args.mc_trials, args.seed, args.coverage)
    binned, binned_err = _attempt(binned_profile, iets)

    report = {
        "schema_version": SCHEMA_VERSION,
        "network_id": series.network_id,
        "event_count": series.n,
        "window": list(series.window),
        "kolmogorov": {
            "arrival": arrival.to_dict() if arrival else _unavailable(arrival_err),
            "interevent": inter.to_dict() if inter else _unavailable(inter_err),
        },
        "ripley": profile.to_dict() if profile else _unavailable(profile_err),
        "burstiness": burst.to_dict() if burst else _unavailable(burst_err),
        "binned_profile": binned.to_dict() if binned else _unavailable(binned_err),
        "verdict_row": verdict_row([arrival, inter], profile, burst),
        "config": {
            "command": "analyze",
            "input": str(args.input),
            "network": args.network,
            "seed": args.seed,
            "mc_trials": args.mc_trials,
            "coverage": args.coverage,
            "grid": args.grid,
            "tie_policy": policy.describe(),
            "edge_policy": args.edge_policy,
            "null_variance": args.null_variance,
            "timestamp_format": args.timestamp_format,
            "delimiter": args.delimiter,
            "window": list(args.window) if args.window else None,
        },
    }

    out = Path(args.out)
    json_path = out if args.format == "json" else _side(out, ".report.json")
    _write_text(json_path, _dump_json(report))
    if args.format == "csv":
        row = report["verdict_row"]
        _write_text(out, _csv_text(lambda fh: _write_verdict_csv(fh, series, row)))
    if profile is not None:
        _write_text(_side(out, ".ripley.csv"), _csv_text(profile.write_csv))
    if binned is not None:
        _write_text(_side(out, ".binned.csv"), _csv_text(binned.write_csv))
    if burst is not None:
        rows = [(series.network_id, burst.delta, burst.mu)]
        _write_text(_side(out, ".delta_mu.csv"), _csv_text(lambda fh: write_delta_mu_csv(fh, rows)))
    return report


def _write_verdict_csv(fh, series, row):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["network_id", "observations", "kolmogorov", "k_statistic", "burstiness", "memory"])
    w.writerow([series.network_id, series.n, row["kolmogorov"], row["k_statistic"], row["burstiness"], row["memory"]])


# ---------------------------------------------------------------- simulate


def run_simulate(args):
    try:
        params = TwoStateParams(args.lambda0, args.lambda1, args.p0, args.p1)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.events < 1:
        raise UsageError("--events must be >= 1")
    traj = simulate(params, args.events, args.initial, args.seed)
    out = Path(args.out)
    if args.format == "csv":
        _write_text(out, _csv_text(traj.write_csv))
    else:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "params": {"lambda0": params.lambda0, "lambda1": params.lambda1, "p0": params.p0, "p1": params.p1},
            "events": args.events,
            "initial": args.initial,
            "seed": args.seed,
            "event_times": traj.event_times.tolist(),
            "hidden_states": traj.states.tolist(),
        }
        _write_text(out, _dump_json(doc))
    return traj


# --------------------------------------------------------------------- fit


def _load_durations(args):
    try:
        with open(args.input, encoding="utf-8", newline="") as fh:
            head = fh.readline()
            fh.seek(0)
            if head.strip().startswith("event_time"):
                try:
                    times, _ = read_trajectory_csv(fh)
                except (ValueError, IndexError) as exc:
                    raise IngestError(f"bad trajectory file: {exc}") from None
                if np.any(np.diff(times) < 0):
                    raise IngestError("trajectory event_time column must be non-decreasing")
                return np.diff(times), "trajectory"
    except OSError as exc:
        raise IngestError(f"cannot read {args.input}: {exc.strerror}") from None
    series = _load_series(args)
    if series.n < 3:
        raise PreconditionError(f"need at least 3 events to fit, got {series.n}")
    return inter_event_times(series, _tie_policy(args)).durations, "events"


def run_fit(args):
    durations, kind = _load_durations(args)
    if durations.size < 2:
        raise PreconditionError(f"need at least 2 durations to fit, got {durations.size}")
    if args.chains < 1 or args.iters < 1 or not 0 <= args.burnin < args.iters or args.thin < 1:
        raise UsageError("need chains >= 1, thin >= 1 and 0 <= burnin < iters")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        post = fit(
            durations,
            PriorConfig(),
            chains=args.chains,
            iterations=args.iters,
            burn_in=args.burnin,
            master_seed=args.seed,
            rhat_threshold=args.rhat_threshold,
            init=args.init,
        )
    for w in caught:
        print(f"bursty: warning: {w.message}", file=sys.stderr)
    doc = post.to_dict()
    doc["schema_version"] = SCHEMA_VERSION
    doc["config"] = {
        "command": "fit",
        "input": str(args.input),
        "input_kind": kind,
        "network": args.network,
        "seed": args.seed,
        "chains": args.chains,
        "iters": args.iters,
        "burnin": args.burnin,
        "thin": args.thin,
        "rhat_threshold": args.rhat_threshold,
        "init": args.init,
        "tie_policy": _tie_policy(args).describe(),
    }
    doc["thin"] = args.thin
    out = Path(args.out)
    if args.format == "json":
        json_path, draws_path = out, _side(out, ".draws.csv")
    else:
        json_path, draws_path = _side(out, ".summary.json"), out
    _write_text(json_path, _dump_json(doc))
    _write_text(draws_path, _csv_text(lambda fh: post.write_draws_csv(fh, args.thin)))
    return post


# -------------------------------------------------------------------- main


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        if args.command == "analyze":
            run_analyze(args)
        elif args.command == "simulate":
            run_simulate(args)
        else:
            post = run_fit(args)
            if post.converged is False:
                return EXIT_NONCONVERGED
    except (UsageError, IngestError) as exc:
        print(f"bursty: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PreconditionError, BurstyError) as exc:
        print(f"bursty: error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
