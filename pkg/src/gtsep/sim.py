"""Seeded Monte Carlo experiments over (n, trial) grids.

Each trial draws a fresh defective set, test matrix and noise from streams
keyed by (master_seed, n, trial_index, tag), so any trial can be replayed on
its own and results do not depend on scheduling or thread count.
"""
import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import channel_marginals, info_density_table, info_stats, nu_symm
from .decoders import (SeparateDecoderConfig, decode_comp, decode_dd, decode_ncomp,
                       decode_separate, default_gamma)
from .exceptions import ParameterError
from .model import (NoiseChannel, RecoveryCriterion, TestDesign, generate_test_matrix,
                    run_tests, sample_defective_set)
from .rng import derive_key
from .special import LOG2

RESULT_HEADER = ("n", "decoder", "success_rate", "ci_lo", "ci_hi",
                 "mean_fp", "mean_fn", "trials", "seed")
PHASE_HEADER = ("n", "ratio", "stderr", "mean_fp", "mean_fn", "trials")


@dataclass(frozen=True)
class DecoderSpec:
    name: str
    delta: float = 0.5      # separate: gamma = n I1 (1 - delta)
    Delta: float = 1.5      # ncomp slack
    rho: float = None       # ncomp crossover; defaults to the channel's

    def __post_init__(self):
        if self.name not in ("separate", "comp", "dd", "ncomp"):
            raise ParameterError(f"unknown decoder {self.name!r}")
        if self.name == "separate" and not 0.0 <= self.delta < 1.0:
            raise ParameterError(f"separate decoder needs delta in [0, 1), got {self.delta}")

    @property
    def label(self):
        return self.name


@dataclass(frozen=True)
class ExperimentConfig:
    p: int
    k: int
    channel: NoiseChannel
    nu: float
    n_values: tuple
    decoder: DecoderSpec = DecoderSpec("separate")
    criterion: RecoveryCriterion = RecoveryCriterion()
    trials: int = 100
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        if not 0 < self.k < self.p:
            raise ParameterError(f"need 0 < k < p, got p={self.p}, k={self.k}")
        if self.trials < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials}")
        if not self.n_values or min(self.n_values) < 0:
            raise ParameterError("n_values must be a non-empty list of n >= 0")
        if not 0.0 < self.nu / self.k <= 1.0:
            raise ParameterError(f"need 0 < nu/k <= 1, got nu={self.nu}")
        self.criterion.validate(self.p, self.k)


@dataclass(frozen=True)
class TrialOutcome:
    fp: int
    fn: int
    success: bool


def trial_seed(master_seed, n, trial_index, tag):
    """128-bit seed for one stream (tag in {S, X, noise}) of one trial."""
    return derive_key(master_seed, n, trial_index, tag)


def _draw(cfg, n, t):
    inst = sample_defective_set(cfg.p, cfg.k, trial_seed(cfg.master_seed, n, t, "S"))
    design = TestDesign(n, cfg.nu, cfg.k)
    x = generate_test_matrix(design, cfg.p, trial_seed(cfg.master_seed, n, t, "X"))
    y = run_tests(x, inst, cfg.channel, trial_seed(cfg.master_seed, n, t, "noise"))
    return inst, x, y


class _Runner:
    """Holds the per-config constants every trial needs."""

    def __init__(self, cfg, decoders):
        self.cfg = cfg
        self.decoders = tuple(decoders)
        if any(d.name == "separate" for d in self.decoders):
            m = channel_marginals(cfg.k, cfg.nu, cfg.channel)
            self.iota = info_density_table(m)
            self.i1 = info_stats(m, self.iota).i1

    def _decode(self, spec, x, y):
        if spec.name == "separate":
            gamma = default_gamma(x.n, self.i1, spec.delta)
            return decode_separate(x, y, SeparateDecoderConfig(gamma, self.iota))
        if spec.name == "comp":
            return decode_comp(x, y)
        if spec.name == "dd":
            return decode_dd(x, y)
        rho = spec.rho if spec.rho is not None else (self.cfg.channel.rho or 0.0)
        return decode_ncomp(x, y, rho, spec.Delta)

    def trial(self, n, t):
        inst, x, y = _draw(self.cfg, n, t)
        truth = inst.beta
        out = []
        for spec in self.decoders:
            est = np.zeros(self.cfg.p, dtype=bool)
            est[list(self._decode(spec, x, y).estimated_set)] = True
            fp = int(np.count_nonzero(est & ~truth))
            fn = int(np.count_nonzero(truth & ~est))
            out.append(TrialOutcome(fp, fn, self.cfg.criterion.success(fp, fn)))
        return out


def run_trial(cfg, n, trial_index):
    """False positives, false negatives and success for one seeded trial."""
    return _Runner(cfg, [cfg.decoder]).trial(n, trial_index)[0]


def wilson_interval(successes, trials, z=1.959963984540054):
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    # the endpoints are exactly 0 / 1 at the extremes; avoid rounding just inside
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class SimPoint:
    n: int
    trials: int
    success_count: int
    mean_fp: float
    mean_fn: float
    ci_lo: float
    ci_hi: float
    fp: np.ndarray = field(repr=False)
    fn: np.ndarray = field(repr=False)

    @property
    def success_rate(self):
        return self.success_count / self.trials

    @property
    def mean_nerr(self):
        return self.mean_fp + self.mean_fn

    @property
    def nerr_stderr(self):
        nerr = self.fp + self.fn
        return float(nerr.std(ddof=1) / math.sqrt(self.trials)) if self.trials > 1 else 0.0


@dataclass(frozen=True)
class SimResult:
    decoder: DecoderSpec
    master_seed: int
    points: tuple

    def __getitem__(self, n):
        for pt in self.points:
            if pt.n == n:
                return pt
        raise KeyError(n)


def _threads():
    env = os.environ.get("GT_THREADS")
    if env:
        try:
            v = int(env)
        except ValueError:
            raise ParameterError(f"GT_THREADS must be a positive integer, got {env!r}")
        if v < 1:
            raise ParameterError(f"GT_THREADS must be a positive integer, got {env!r}")
        return v
    return os.cpu_count() or 1


def _point(n, outcomes):
    fp = np.array([o.fp for o in outcomes], dtype=np.int64)
    fn = np.array([o.fn for o in outcomes], dtype=np.int64)
    wins = sum(o.success for o in outcomes)
    lo, hi = wilson_interval(wins, len(outcomes))
    t = len(outcomes)
    return SimPoint(n, t, wins, int(fp.sum()) / t, int(fn.sum()) / t, lo, hi, fp, fn)


def run_comparison(cfg, decoders=None, threads=None):
    """Run every decoder on the same draws; returns {label: SimResult}."""
    decoders = tuple(decoders) if decoders else (cfg.decoder,)
    labels = [d.label for d in decoders]
    if len(set(labels)) != len(labels):
        raise ParameterError(f"decoder labels must be unique, got {labels}")
    runner = _Runner(cfg, decoders)
    units = [(n, t) for n in cfg.n_values for t in range(cfg.trials)]
    threads = threads or _threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda u: runner.trial(*u), units))
    else:
        results = [runner.trial(*u) for u in units]
    out = {}
    for d_idx, spec in enumerate(decoders):
        points = []
        for i, n in enumerate(cfg.n_values):
            chunk = results[i * cfg.trials:(i + 1) * cfg.trials]
            points.append(_point(n, [r[d_idx] for r in chunk]))
        out[spec.label] = SimResult(spec, cfg.master_seed, tuple(points))
    return out


def run_experiment(cfg, threads=None):
    return run_comparison(cfg, (cfg.decoder,), threads)[cfg.decoder.label]


@dataclass(frozen=True)
class NerrRow:
    n: int
    ratio: float
    stderr: float
    mean_fp: float
    mean_fn: float
    trials: int


def nerr_sweep(cfg, threads=None):
    """E[N_err]/k with its standard error at each n, sorted by n."""
    if cfg.decoder.name != "separate":
        raise ParameterError("the N_err sweep is defined for the separate decoder")
    res = run_experiment(cfg, threads)
    rows = [NerrRow(pt.n, pt.mean_nerr / cfg.k, pt.nerr_stderr / cfg.k,
                    pt.mean_fp, pt.mean_fn, pt.trials) for pt in res.points]
    return sorted(rows, key=lambda r: r.n)


# ---------------------------------------------------------------------------
# serialisation


def _fmt(x):
    return f"{x:.9g}"


def write_results_csv(results, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(RESULT_HEADER)
    for label, res in results.items():
        for pt in res.points:
            w.writerow([pt.n, label, _fmt(pt.success_rate), _fmt(pt.ci_lo), _fmt(pt.ci_hi),
                        _fmt(pt.mean_fp), _fmt(pt.mean_fn), pt.trials, res.master_seed])


def write_phase_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PHASE_HEADER)
    for r in rows:
        w.writerow([r.n, _fmt(r.ratio), _fmt(r.stderr), _fmt(r.mean_fp),
                    _fmt(r.mean_fn), r.trials])


def _round(x):
    return float(_fmt(x))


def results_to_json(cfg, results):
    return {
        "config": config_to_dict(cfg, [r.decoder for r in results.values()]),
        "results": {
            label: [{"n": pt.n, "trials": pt.trials, "success_count": pt.success_count,
                     "success_rate": _round(pt.success_rate),
                     "ci_lo": _round(pt.ci_lo), "ci_hi": _round(pt.ci_hi),
                     "mean_fp": _round(pt.mean_fp), "mean_fn": _round(pt.mean_fn),
                     "mean_nerr": _round(pt.mean_nerr)} for pt in res.points]
            for label, res in results.items()
        },
    }


def _channel_from_dict(d):
    kind = d["kind"]
    if kind == "noiseless":
        return NoiseChannel.noiseless()
    if kind == "symmetric":
        return NoiseChannel.symmetric(d["rho"])
    return NoiseChannel.general(d["table"])


def _channel_to_dict(ch):
    if ch.kind == "noiseless":
        return {"kind": "noiseless"}
    if ch.kind == "symmetric":
        return {"kind": "symmetric", "rho": ch.rho}
    return {"kind": "general", "table": list(ch.table)}


def _decoder_from_dict(d):
    return DecoderSpec(d["name"], d.get("delta", 0.5), d.get("Delta", 1.5), d.get("rho"))


def config_from_dict(d):
    """ExperimentConfig plus the full decoder list from a validated config dict."""
    nu = d.get("nu", LOG2)
    if nu == "nu_symm":
        nu = nu_symm(d["k"])
    elif nu == "log2":
        nu = LOG2
    decoders = [_decoder_from_dict(x) for x in d["decoders"]]
    crit = d.get("criterion", {"kind": "exact"})
    criterion = RecoveryCriterion(crit["kind"], crit.get("dpos", 0), crit.get("dneg", 0))
    cfg = ExperimentConfig(d["p"], d["k"], _channel_from_dict(d["channel"]), float(nu),
                           tuple(d["n_values"]), decoders[0], criterion, d["trials"],
                           d.get("master_seed", 0))
    return cfg, decoders


def config_to_dict(cfg, decoders=None):
    decoders = decoders or [cfg.decoder]
    return {
        "p": cfg.p, "k": cfg.k, "nu": cfg.nu, "channel": _channel_to_dict(cfg.channel),
        "n_values": list(cfg.n_values),
        "decoders": [{"name": d.name, "delta": d.delta, "Delta": d.Delta, "rho": d.rho}
                     for d in decoders],
        "criterion": {"kind": cfg.criterion.kind, "dpos": cfg.criterion.dpos,
                      "dneg": cfg.criterion.dneg},
        "trials": cfg.trials, "master_seed": cfg.master_seed,
    }


def dump_json(obj, fh):
    json.dump(obj, fh, indent=2, sort_keys=True)
    fh.write("\n")
