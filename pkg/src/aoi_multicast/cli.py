"""Command-line front end: analytic evaluation, simulation, sweeps, and
deadline/quorum optimization with machine-readable output.

Conventions:

* JSON for single evaluations, CSV for sweeps; every output echoes the full
  parameter set so no file is ambiguous without its command line.
* Any file output gets a run manifest (``<file>.manifest.json``) holding the
  fully resolved configuration; re-running from a manifest reproduces the
  output byte for byte (analytic) or bit for bit (simulation, same seed).
* Exit codes: 0 success, 2 parameter validation, 3 numerical degeneracy,
  4 I/O failure.
* ``--rate``/``--shift`` accept plain decimals or simple fractions ("1/3")
  to avoid precision loss on common parameter values.
* An optional TOML config supplies the same keys as the flags; flags win.
  The default thread count comes from ``AOI_MULTICAST_THREADS`` (else 1).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from fractions import Fraction

from . import __version__
from .orderstats import DegenerateConditioning, OverflowRisk, QuadratureNonConvergence
from .params import ParamError, validate
from .renewal import BREAKDOWN_FIELDS, average_aoi
from .simulator import EMPIRICAL_FIELDS, SimConfig, estimate
from .optimize import argmin_quorum, minimize_deadline, sweep_deadline, sweep_quorum

CSV_SCHEMA = "aoi-multicast-csv-v1"

#: Identifiers of the validated formula variants baked into the closed forms,
#: recorded in every manifest so outputs are traceable to the exact algebra.
FORMULA_VARIANTS = {
    "quorum_time_second_moment": "quadratic-bracket-plus-one",
    "deadline_tail_exponent": "shift-adjusted",
    "service_cdf_tail_index": "per-level",
    "deadline_first_probability": "block-assembled",
}

EXIT_VALIDATION = 2
EXIT_DEGENERACY = 3
EXIT_IO = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _parse_number(text: str) -> float:
    """Decimal, simple fraction ('1/3'), or 'inf'."""
    s = str(text).strip().lower()
    if s in ("inf", "infinity", "+inf"):
        return math.inf
    if "/" in s:
        return float(Fraction(s))
    return float(s)


def _jsonable(value):
    if value is None:
        return None
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        if math.isnan(value):
            return None
    return value


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        if math.isnan(value):
            return "nan"
        return repr(value)
    return value


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}", EXIT_IO)
    except tomllib.TOMLDecodeError as exc:
        raise CliError(f"malformed config file: {exc}", EXIT_VALIDATION)


def _resolve(args, config: dict, key: str, flag_value, default=None, parse=None):
    """Flag beats config file beats default."""
    if flag_value is not None:
        return flag_value
    if key in config:
        raw = config[key]
        return parse(raw) if parse is not None else raw
    return default


def _resolved_params(args, config: dict):
    n = _resolve(args, config, "n", args.n)
    k = _resolve(args, config, "k", args.k)
    rate = _resolve(args, config, "rate", args.rate, parse=_parse_number)
    shift = _resolve(args, config, "shift", args.shift, parse=_parse_number)
    deadline = _resolve(args, config, "deadline", args.deadline, parse=_parse_number)
    missing = [name for name, v in
               [("--n", n), ("--k", k), ("--rate", rate), ("--shift", shift),
                ("--deadline", deadline)] if v is None]
    if missing:
        raise CliError(f"missing required parameters: {', '.join(missing)}", EXIT_VALIDATION)
    try:
        return validate(n, k, rate, shift, deadline)
    except ParamError as exc:
        raise CliError(f"{type(exc).__name__}: {exc}", EXIT_VALIDATION)


def _default_threads() -> int:
    env = os.environ.get("AOI_MULTICAST_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _write_manifest(output_path: str, subcommand: str, resolved: dict) -> None:
    manifest = {
        "schema": "aoi-multicast-manifest-v1",
        "tool": "aoi-multicast",
        "version": __version__,
        "command": subcommand,
        "resolved": {k: _jsonable(v) for k, v in resolved.items()},
        "formula_variants": FORMULA_VARIANTS,
    }
    path = output_path + ".manifest.json"
    try:
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise CliError(f"cannot write manifest: {exc}", EXIT_IO)


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    try:
        with open(output, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write output file: {exc}", EXIT_IO)


def _breakdown_json(breakdown) -> str:
    payload = {k: _jsonable(v) for k, v in breakdown.to_dict().items()}
    return json.dumps(payload, indent=2) + "\n"


def _breakdown_csv(breakdown) -> str:
    row = breakdown.to_dict()
    lines = [f"# schema={CSV_SCHEMA}",
             ",".join(BREAKDOWN_FIELDS),
             ",".join(str(_csv_cell(row[k])) for k in BREAKDOWN_FIELDS)]
    return "\n".join(lines) + "\n"


def cmd_analytic(args) -> int:
    config = _load_config(args.config)
    p = _resolved_params(args, config)
    breakdown = average_aoi(p)
    text = _breakdown_csv(breakdown) if args.format == "csv" else _breakdown_json(breakdown)
    _emit(text, args.output)
    if args.output is not None:
        _write_manifest(args.output, "analytic",
                        {**breakdown.to_dict(), "format": args.format})
    return 0


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    p = _resolved_params(args, config)
    updates = _resolve(args, config, "updates", args.updates, default=100_000)
    trials = _resolve(args, config, "trials", args.trials, default=5)
    seed = _resolve(args, config, "seed", args.seed, default=0)
    warmup = _resolve(args, config, "warmup", args.warmup, default=1000)
    threads = args.threads if args.threads is not None else _default_threads()
    try:
        cfg = SimConfig(params=p, n_updates=int(updates), n_trials=int(trials),
                        seed=int(seed), warmup_updates=int(warmup))
    except ValueError as exc:
        raise CliError(str(exc), EXIT_VALIDATION)

    est = estimate(cfg, n_jobs=threads, trace_path=args.trace)
    resolved = {
        "n": p.n_devices, "k": p.k_quorum, "rate": p.rate, "shift": p.shift,
        "deadline": p.deadline, "updates": cfg.n_updates, "trials": cfg.n_trials,
        "seed": cfg.seed, "warmup": cfg.warmup_updates, "compare": args.compare,
        "format": args.format,
    }

    payload = {"params": {k: _jsonable(v) for k, v in resolved.items()
                          if k in ("n", "k", "rate", "shift", "deadline")},
               "simulated": {k: [_jsonable(x) for x in v]
                             for k, v in est.to_dict().items()
                             if isinstance(v, list)},
               "n_effective_cycles": est.n_effective_cycles}
    if args.compare:
        breakdown = average_aoi(p)
        analytic = breakdown.to_dict()
        verdicts = {}
        for name in ("avg_aoi", *EMPIRICAL_FIELDS):
            a = analytic[name] if name != "avg_aoi" else breakdown.avg_aoi
            point, hw = est.avg_aoi if name == "avg_aoi" else est.empirical[name]
            if a is None or math.isnan(point) or math.isnan(hw):
                verdicts[name] = None
            else:
                verdicts[name] = bool(abs(a - point) <= hw)
        payload["analytic"] = {k: _jsonable(v) for k, v in analytic.items()}
        payload["within_ci"] = verdicts

    if args.format == "csv":
        names = ["avg_aoi", *EMPIRICAL_FIELDS]
        header = ["n", "k", "rate", "shift", "deadline"]
        row = [p.n_devices, p.k_quorum, p.rate, p.shift, _csv_cell(p.deadline)]
        for name in names:
            point, hw = est.avg_aoi if name == "avg_aoi" else est.empirical[name]
            header += [f"sim_{name}", f"sim_{name}_hw95"]
            row += [_csv_cell(point), _csv_cell(hw)]
        text = "\n".join([f"# schema={CSV_SCHEMA}", ",".join(header),
                          ",".join(str(x) for x in row)]) + "\n"
    else:
        text = json.dumps(payload, indent=2) + "\n"
    _emit(text, args.output)
    if args.output is not None:
        _write_manifest(args.output, "simulate", resolved)
    return 0


def _sweep_csv(records, with_sim: bool) -> str:
    header = ["sweep_var", "sweep_value", *BREAKDOWN_FIELDS]
    if with_sim:
        header += ["sim_avg_aoi", "sim_avg_aoi_hw95"]
    header.append("error")
    lines = [f"# schema={CSV_SCHEMA}", ",".join(header)]
    for rec in records:
        cells = [rec.var_name, _csv_cell(float(rec.var_value))]
        if rec.analytic is not None:
            row = rec.analytic.to_dict()
            cells += [_csv_cell(row[k]) for k in BREAKDOWN_FIELDS]
        else:
            cells += [""] * len(BREAKDOWN_FIELDS)
        if with_sim:
            if rec.sim is not None:
                cells += [_csv_cell(rec.sim.avg_aoi[0]), _csv_cell(rec.sim.avg_aoi[1])]
            else:
                cells += ["", ""]
        cells.append(rec.error or "")
        lines.append(",".join(str(c) for c in cells))
    return "\n".join(lines) + "\n"


def _sim_kwargs_from(args, config: dict) -> dict | None:
    if not args.with_sim:
        return None
    return {
        "n_updates": int(_resolve(args, config, "updates", args.updates, default=100_000)),
        "n_trials": int(_resolve(args, config, "trials", args.trials, default=5)),
        "seed": int(_resolve(args, config, "seed", args.seed, default=0)),
        "warmup_updates": int(_resolve(args, config, "warmup", args.warmup, default=1000)),
    }


def cmd_sweep(args) -> int:
    config = _load_config(args.config)
    sim = _sim_kwargs_from(args, config)
    n = _resolve(args, config, "n", args.n)
    rate = _resolve(args, config, "rate", args.rate, parse=_parse_number)
    shift = _resolve(args, config, "shift", args.shift, parse=_parse_number)
    if n is None or rate is None or shift is None:
        raise CliError("sweep requires --n, --rate, and --shift", EXIT_VALIDATION)
    if args.var == "deadline":
        k = _resolve(args, config, "k", args.k)
        if k is None or args.lo is None or args.hi is None or args.step is None:
            raise CliError("deadline sweep requires --k, --lo, --hi, --step", EXIT_VALIDATION)
        try:
            records = sweep_deadline(int(n), int(k), rate, shift,
                                     args.lo, args.hi, args.step, sim=sim)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_VALIDATION)
        resolved = {"var": "deadline", "n": n, "k": k, "rate": rate, "shift": shift,
                    "lo": args.lo, "hi": args.hi, "step": args.step}
    else:
        deadline = _resolve(args, config, "deadline", args.deadline, parse=_parse_number)
        if deadline is None:
            raise CliError("quorum sweep requires --deadline", EXIT_VALIDATION)
        records = sweep_quorum(int(n), rate, shift, deadline, sim=sim)
        resolved = {"var": "quorum", "n": n, "rate": rate, "shift": shift,
                    "deadline": deadline}
    if sim is not None:
        resolved.update(sim)
    text = _sweep_csv(records, with_sim=sim is not None)
    _emit(text, args.output)
    if args.output is not None:
        _write_manifest(args.output, "sweep", resolved)
    return 0


def cmd_optimize(args) -> int:
    config = _load_config(args.config)
    n = _resolve(args, config, "n", args.n)
    rate = _resolve(args, config, "rate", args.rate, parse=_parse_number)
    shift = _resolve(args, config, "shift", args.shift, parse=_parse_number)
    if n is None or rate is None or shift is None:
        raise CliError("optimize requires --n, --rate, and --shift", EXIT_VALIDATION)
    if args.var == "deadline":
        k = _resolve(args, config, "k", args.k)
        if k is None or args.lo is None or args.hi is None:
            raise CliError("deadline optimization requires --k, --lo, --hi", EXIT_VALIDATION)
        try:
            res = minimize_deadline(int(n), int(k), rate, shift,
                                    args.lo, args.hi, tol=args.tol)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_VALIDATION)
        payload = {"var": "deadline", "t_d_star": res.t_d_star,
                   "aoi_star": res.aoi_star,
                   "boundary_minimum": res.boundary_minimum,
                   "n_evaluations": res.n_evaluations}
    else:
        deadline = _resolve(args, config, "deadline", args.deadline, parse=_parse_number)
        if deadline is None:
            raise CliError("quorum optimization requires --deadline", EXIT_VALIDATION)
        records = sweep_quorum(int(n), rate, shift, deadline)
        k_star = argmin_quorum(records)
        best = next(r for r in records if int(r.var_value) == k_star)
        payload = {"var": "quorum", "k_star": k_star,
                   "aoi_star": best.analytic.avg_aoi}
    text = json.dumps(payload, indent=2) + "\n"
    _emit(text, args.output)
    if args.output is not None:
        _write_manifest(args.output, "optimize", payload)
    return 0


def _add_param_flags(sub) -> None:
    sub.add_argument("--n", type=int, help="total number of devices")
    sub.add_argument("--k", type=int, help="devices required to serve an update")
    sub.add_argument("--rate", type=_parse_number, help="service rate (decimal or fraction)")
    sub.add_argument("--shift", type=_parse_number, help="deterministic service-time floor")
    sub.add_argument("--deadline", type=_parse_number, help="hard deadline ('inf' allowed)")
    sub.add_argument("--config", help="TOML config supplying the same keys; flags win")
    sub.add_argument("--output", help="write to this file instead of stdout (adds a manifest)")


def _add_sim_flags(sub) -> None:
    sub.add_argument("--updates", type=int, help="updates per trial")
    sub.add_argument("--trials", type=int, help="independent replications")
    sub.add_argument("--seed", type=int, help="master seed (trial i uses seed XOR i)")
    sub.add_argument("--warmup", type=int, help="updates discarded before accounting")
    sub.add_argument("--threads", type=int,
                     help="worker threads (default: AOI_MULTICAST_THREADS or all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoi-multicast",
        description="Average age of information for K-of-N multicast status "
                    "updates under a hard service deadline.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("analytic", help="closed-form breakdown for one parameter point")
    _add_param_flags(sub)
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    sub.set_defaults(func=cmd_analytic)

    sub = subs.add_parser("simulate", help="Monte Carlo estimate with confidence intervals")
    _add_param_flags(sub)
    _add_sim_flags(sub)
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    sub.add_argument("--compare", action="store_true",
                     help="emit analytic values side by side with a within-CI verdict")
    sub.add_argument("--trace", help="write per-cycle NDJSON records to this file")
    sub.set_defaults(func=cmd_simulate)

    sub = subs.add_parser("sweep", help="grid sweep over the deadline or the quorum size")
    _add_param_flags(sub)
    _add_sim_flags(sub)
    sub.add_argument("--var", choices=("deadline", "quorum"), required=True)
    sub.add_argument("--lo", type=_parse_number)
    sub.add_argument("--hi", type=_parse_number)
    sub.add_argument("--step", type=_parse_number)
    sub.add_argument("--with-sim", action="store_true",
                     help="attach a Monte Carlo estimate to every grid point")
    sub.set_defaults(func=cmd_sweep)

    sub = subs.add_parser("optimize", help="minimize the average age over one variable")
    _add_param_flags(sub)
    sub.add_argument("--var", choices=("deadline", "quorum"), required=True)
    sub.add_argument("--lo", type=_parse_number)
    sub.add_argument("--hi", type=_parse_number)
    sub.add_argument("--tol", type=float, default=1e-4)
    sub.set_defaults(func=cmd_optimize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ParamError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DegenerateConditioning, QuadratureNonConvergence, OverflowRisk) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DEGENERACY
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
