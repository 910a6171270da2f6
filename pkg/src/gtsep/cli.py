"""Command-line front end: ``gtsep {analyze,curves,simulate,phase,bound}``.

Exit codes: 0 success, 1 I/O failure, 2 bad arguments or out-of-domain values.
"""
import argparse
import contextlib
import json
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import bounds, channel, sim
from .exceptions import DimensionError, ParameterError
from .model import NoiseChannel, RecoveryCriterion
from .special import LOG2

EXIT_OK, EXIT_IO, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _num(x):
    """9 significant digits; infinities become strings so the JSON stays valid."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return float(f"{x:.9g}")


def _nums(a):
    return [_num(v) for v in np.asarray(a, dtype=float).ravel()]


def _emit_json(obj, fh):
    json.dump(obj, fh, indent=2, sort_keys=True)
    fh.write("\n")


@contextlib.contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _channel(model, rho):
    if model == "noiseless":
        return NoiseChannel.noiseless()
    if rho is None:
        raise UsageError("--rho is required for the symmetric model")
    if not 0.0 < rho < 0.5:
        raise UsageError(f"--rho must lie in (0, 1/2), got {rho}")
    return NoiseChannel.symmetric(rho)


def _nu(value, k):
    if value in (None, "log2"):
        return LOG2
    if value == "nu_symm":
        return channel.nu_symm(k)
    try:
        return float(value)
    except ValueError:
        raise UsageError(f"--nu must be a number, 'log2' or 'nu_symm', got {value!r}")


def parse_grid(text, integer=False):
    """``a,b,c`` or ``lo:hi:count`` (count evenly spaced points, ends included)."""
    try:
        if ":" in text:
            lo, hi, count = text.split(":")
            pts = np.linspace(float(lo), float(hi), int(count))
        else:
            pts = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise UsageError(f"cannot parse grid {text!r}")
    if pts.size == 0:
        raise UsageError("empty grid")
    if integer:
        return sorted({int(round(v)) for v in pts})
    return [float(v) for v in pts]


# ---------------------------------------------------------------------------
# subcommands


def cmd_analyze(args):
    ch = _channel(args.model, args.rho)
    nu = _nu(args.nu, args.k)
    marg = channel.channel_marginals(args.k, nu, ch)
    table = channel.info_density_table(marg)
    stats = channel.info_stats(marg, table)
    if args.model == "noiseless":
        i1_asym = channel.i1_asymptotic_noiseless(args.k)
    else:
        i1_asym = channel.i1_asymptotic_symmetric(nu, args.rho, args.k)
    out = {
        "model": args.model,
        "rho": args.rho,
        "k": args.k,
        "nu": _num(nu),
        "nu_symm": _num(channel.nu_symm(args.k)),
        "p_x1": _num(marg.p_x),
        "p_y0": _num(marg.p_y[0]),
        "p_y": _nums(marg.p_y),
        "p_y_given_x": [_nums(r) for r in marg.p_y_given_x],
        "iota": [_nums(r) for r in table.values],
        "iota_reachable": table.reachable.tolist(),
        "i1": _num(stats.i1),
        "i1_asymptotic": _num(i1_asym),
        "k_i1": _num(args.k * stats.i1),
        "c_mean": _num(stats.c_mean),
        "c_var": _num(stats.c_var),
        "c_max": _num(stats.c_max),
    }
    _emit_json(out, sys.stdout)


def cmd_curves(args):
    if args.model == "symmetric":
        _channel(args.model, args.rho)
    grid = parse_grid(args.theta_grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError("--theta-grid must be strictly increasing")
    modes = tuple(m.strip() for m in args.modes.split(",") if m.strip())
    rows = bounds.figure1_curves(args.model, grid, modes, rho=args.rho,
                                 nu_policy=args.nu_policy)
    with _open_out(args.out) as fh:
        bounds.write_curves_csv(rows, fh)


def _load_schema():
    text = resources.files("gtsep").joinpath("schemas/experiment.schema.json").read_text()
    return json.loads(text)


def validate_config(obj):
    """List of 'path: message' strings for every schema violation."""
    validator = jsonschema.Draft202012Validator(_load_schema())
    errs = sorted(validator.iter_errors(obj), key=lambda e: list(map(str, e.absolute_path)))
    return [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errs]


def cmd_simulate(args):
    cfg_path = Path(args.config)
    with open(cfg_path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise UsageError(f"{cfg_path}: invalid JSON ({e})")
    problems = validate_config(obj)
    if problems:
        raise UsageError("config does not match schema:\n  " + "\n  ".join(problems))
    cfg, decoders = sim.config_from_dict(obj)
    results = sim.run_comparison(cfg, decoders, threads=args.threads)
    stem = cfg_path.with_suffix("")
    csv_path = args.csv or f"{stem}.results.csv"
    json_path = args.json or f"{stem}.results.json"
    with open(csv_path, "w", newline="") as fh:
        sim.write_results_csv(results, fh)
    with open(json_path, "w") as fh:
        sim.dump_json(sim.results_to_json(cfg, results), fh)
    for label, res in results.items():
        rates = " ".join(f"{pt.n}:{pt.success_rate:.3f}" for pt in res.points)
        print(f"{label:>12}  {rates}")
    print(f"wrote {csv_path} and {json_path}")


def cmd_phase(args):
    ch = _channel(args.model, args.rho)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    cfg = sim.ExperimentConfig(
        args.p, args.k, ch, _nu(args.nu, args.k), tuple(parse_grid(args.n_grid, True)),
        sim.DecoderSpec("separate", delta=args.delta), RecoveryCriterion.avg_errors(),
        args.trials, args.seed)
    rows = sim.nerr_sweep(cfg, threads=args.threads)
    with _open_out(args.out) as fh:
        sim.write_phase_csv(rows, fh)


def cmd_bound(args):
    ch = _channel(args.model, args.rho)
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    nu = _nu(args.nu, args.k)
    marg = channel.channel_marginals(args.k, nu, ch)
    stats = channel.info_stats(marg)
    up = bounds.pe_upper_bound_exact(args.n, args.p, args.k, marg, args.gamma,
                                     args.samples, args.seed)
    lo = bounds.pe_lower_bound_item(args.n, args.p, args.k, marg, args.samples, args.seed)
    # the concentration bound on the same tail, at gamma = n I1 (1 - delta2)
    psi = None
    if args.n > 0:
        delta2 = 1.0 - args.gamma / (args.n * stats.i1)
        if 0.0 < delta2 < 1.0:
            if args.model == "noiseless":
                psi = bounds.psi_noiseless(args.n, args.k, delta2)
            else:
                psi = bounds.psi_bernstein(args.n, args.k, stats, delta2)
            psi = {"delta2": _num(delta2), "value": _num(psi)}
    out = {
        "model": args.model,
        "rho": args.rho,
        "p": args.p,
        "k": args.k,
        "n": args.n,
        "nu": _num(nu),
        "gamma": _num(args.gamma),
        "samples": args.samples,
        "seed": args.seed,
        "upper": {
            "value": _num(min(up.value, 1.0)),
            "raw": _num(up.value),
            "stderr": _num(up.stderr),
            "miss_term": _num(up.miss_term),
            "false_alarm_term": _num(up.false_alarm_term),
            "tail_prob": _num(up.tail.prob),
            "tail_stderr": _num(up.tail.stderr),
        },
        "lower": {
            "value": _num(min(max(lo.value, 0.0), 1.0)),
            "stderr": _num(lo.stderr),
            "threshold": _num(lo.threshold),
            "tail_prob": _num(lo.tail.prob),
        },
        "psi": psi,
    }
    _emit_json(out, sys.stdout)


# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="gtsep",
                                 description="Separate decoding for group testing.")
    sub = ap.add_subparsers(dest="command", required=True)

    def model_flags(p):
        p.add_argument("--model", choices=("noiseless", "symmetric"), default="noiseless")
        p.add_argument("--rho", type=float, default=None)

    a = sub.add_parser("analyze", help="single-item channel analysis as JSON")
    a.add_argument("--k", type=int, default=30)
    a.add_argument("--nu", default="log2", help="number, 'log2' or 'nu_symm'")
    model_flags(a)
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("curves", help="rate constants c(theta) as CSV")
    model_flags(c)
    c.add_argument("--theta-grid", default="0.01:0.99:99",
                   help="'lo:hi:count' or comma-separated values")
    c.add_argument("--modes", default=",".join(bounds.CURVES))
    c.add_argument("--nu-policy", choices=bounds.NU_POLICIES, default="log2")
    c.add_argument("--out", default="-")
    c.set_defaults(func=cmd_curves)

    s = sub.add_parser("simulate", help="run an experiment config")
    s.add_argument("--config", required=True)
    s.add_argument("--csv", default=None, help="default <config>.results.csv")
    s.add_argument("--json", default=None, help="default <config>.results.json")
    s.add_argument("--threads", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    ph = sub.add_parser("phase", help="E[N_err]/k sweep for separate decoding")
    model_flags(ph)
    ph.add_argument("--p", type=int, required=True)
    ph.add_argument("--k", type=int, required=True)
    ph.add_argument("--n-grid", required=True, help="'lo:hi:count' or comma-separated")
    ph.add_argument("--trials", type=int, default=100)
    ph.add_argument("--seed", type=int, default=0)
    ph.add_argument("--nu", default="log2")
    ph.add_argument("--delta", type=float, default=0.5)
    ph.add_argument("--threads", type=int, default=None)
    ph.add_argument("--out", default="-")
    ph.set_defaults(func=cmd_phase)

    b = sub.add_parser("bound", help="finite-n error bounds as JSON")
    model_flags(b)
    b.add_argument("--p", type=int, required=True)
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--gamma", type=float, required=True)
    b.add_argument("--samples", type=int, default=100_000)
    b.add_argument("--nu", default="log2")
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bound)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (UsageError, ParameterError, DimensionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
