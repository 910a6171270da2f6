"""Concentration functions, finite-n bounds and asymptotic test-count thresholds.

Asymptotic thresholds are reported as leading coefficients: a threshold
``coeff_nats`` means n = coeff_nats * k log(p/k) * (1 + o(1)). With k = p^theta,
log p = log(p/k) / (1 - theta) and log k = theta log(p/k) / (1 - theta).
The plotted constant is c(theta) = 1 / (coeff_nats log 2), i.e. the threshold
in units of k log2(p/k).
"""
import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .channel import info_density_table
from .exceptions import ParameterError
from .rng import stream
from .special import LOG2, binary_conv, binary_entropy, grid_golden_min, kl_binary

DELTA_RANGE = (1e-6, 1.0 - 1e-6)
NU_RANGE = (1e-3, 10.0)
GRID_POINTS = 2048
NU_POLICIES = ("log2", "nu_symm", "optimize")
MODES = ("exact", "fp_only", "fn_only", "both")
CURVES = MODES + ("joint", "joint_partial", "converse")
CSV_HEADER = ("theta", "mode", "model", "c", "coeff_nats", "delta2", "nu")


def _clamp01(x):
    return min(max(x, 0.0), 1.0)


# ---------------------------------------------------------------------------
# concentration functions


def psi_bernstein(n, k, stats, delta2):
    """Bernstein bound on P[|i1^n - n I1| >= n delta2 I1], clamped to [0, 1]."""
    if not math.isfinite(stats.c_max):
        raise ParameterError(
            "c_max is infinite (a reachable cell has information density -inf); "
            "use psi_noiseless for the noiseless channel or check the channel table")
    if delta2 <= 0:
        raise ParameterError(f"need delta2 > 0, got {delta2}")
    num = 0.5 * (n / k) * stats.c_mean ** 2 * delta2 ** 2
    den = stats.c_var + stats.c_mean * stats.c_max * delta2 / 3.0
    return _clamp01(2.0 * math.exp(-num / den))


def _noiseless_rate(delta2):
    return (1.0 - delta2) * math.log1p(-delta2) + delta2


def psi_noiseless(n, k, delta2):
    """Lower-tail concentration of i1^n for the noiseless channel at nu = nu_symm."""
    if not 0.0 < delta2 < 1.0:
        raise ParameterError(f"need delta2 in (0, 1), got {delta2}")
    return _clamp01(math.exp(-(n * LOG2 ** 2 / k) * _noiseless_rate(delta2)))


# ---------------------------------------------------------------------------
# distribution of the information-density sum


@dataclass(frozen=True)
class TailEstimate:
    prob: float
    stderr: float
    samples: int


def _density_sums(counts, values):
    """Rows of counts (.., 4) over cells [00, 01, 10, 11] dotted with the table."""
    v = values.ravel()
    with np.errstate(invalid="ignore"):
        terms = np.where(counts > 0, counts * v, 0.0)
    return terms.sum(axis=-1)


def density_tail_mc(n, marginals, threshold, samples=100_000, seed=0, table=None):
    """Monte Carlo estimate of P[i1^n(X1, Y) <= threshold]."""
    if samples < 1:
        raise ParameterError("need at least one Monte Carlo sample")
    table = table or info_density_table(marginals)
    probs = marginals.joint.ravel()
    rng = stream(seed, "density-tail", n)
    counts = rng.multinomial(n, probs / probs.sum(), size=samples)
    hits = np.count_nonzero(_density_sums(counts, table.values) <= threshold)
    prob = hits / samples
    return TailEstimate(prob, math.sqrt(prob * (1.0 - prob) / samples), samples)


def density_tail_exact(n, marginals, threshold, table=None, max_n=40):
    """P[i1^n <= threshold] by enumerating outcome-count compositions."""
    if n > max_n:
        raise ParameterError(f"exact enumeration limited to n <= {max_n}")
    table = table or info_density_table(marginals)
    a, b, c = np.meshgrid(*(np.arange(n + 1),) * 3, indexing="ij")
    d = n - a - b - c
    ok = d >= 0
    counts = np.stack([a[ok], b[ok], c[ok], d[ok]], axis=-1)
    probs = marginals.joint.ravel()
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1)
        logp = logp + np.where(counts > 0, counts * np.log(probs), 0.0).sum(axis=1)
    weight = np.exp(logp)
    hit = _density_sums(counts, table.values) <= threshold
    return float(weight[hit].sum())


@dataclass(frozen=True)
class UpperBound:
    value: float
    stderr: float
    tail: TailEstimate
    miss_term: float
    false_alarm_term: float


def pe_upper_bound_exact(n, p, k, marginals, gamma, samples=100_000, seed=0):
    """k P[i1^n <= gamma] + (p - k) e^-gamma (unclamped)."""
    if gamma <= 0:
        raise ParameterError(f"need gamma > 0, got {gamma}")
    tail = density_tail_mc(n, marginals, gamma, samples, seed)
    miss = k * tail.prob
    fa = (p - k) * math.exp(-gamma)
    return UpperBound(miss + fa, k * tail.stderr, tail, miss, fa)


@dataclass(frozen=True)
class LowerBound:
    value: float
    stderr: float
    threshold: float
    tail: TailEstimate


def pe_lower_bound_item(n, p, k, marginals, samples=100_000, seed=0):
    """(k/p) P[i1^n <= log((p-k)/k)]: error floor for any separate decoder, per item."""
    if not 0 < k < p:
        raise ParameterError(f"need 0 < k < p, got p={p}, k={k}")
    thr = math.log((p - k) / k)
    tail = density_tail_mc(n, marginals, thr, samples, seed)
    return LowerBound((k / p) * tail.prob, (k / p) * tail.stderr, thr, tail)


# ---------------------------------------------------------------------------
# asymptotic thresholds


@dataclass(frozen=True)
class ThresholdResult:
    coeff_nats: float
    theta: float = None
    mode: str = None
    model: str = None
    argmin_delta2: float = None
    argopt_nu: float = None

    @property
    def c_theta(self):
        return 1.0 / (self.coeff_nats * LOG2)


def _check_theta(theta):
    if not 0.0 < theta < 1.0:
        raise ParameterError(f"need theta in (0, 1), got {theta}")


def _check_rho(rho):
    if rho is None or not 0.0 < rho < 0.5:
        raise ParameterError(f"symmetric model needs rho in (0, 1/2), got {rho}")


def symmetric_rate(nu, rho):
    """nu D2(rho || rho * e^-nu): the large-k limit of k I1 under symmetric noise."""
    return nu * kl_binary(rho, binary_conv(rho, math.exp(-nu)))


def noiseless_rate(nu):
    """Large-k limit of k I1 for the noiseless channel at intensity nu."""
    return -nu * math.log1p(-math.exp(-nu))


def optimal_nu(rho):
    """The nu maximising the large-k k I1 (rho = 0 is the noiseless channel)."""
    rate = noiseless_rate if rho == 0.0 else (lambda v: symmetric_rate(v, rho))
    nu, neg = grid_golden_min(lambda v: -rate(v), *NU_RANGE, points=GRID_POINTS)
    return nu, -neg


def symmetric_bernstein_limits(rho, nu=None):
    """(c_mean, c_var, c_max) in the k -> inf limit under symmetric noise.

    With nu = None (nu = nu_symm or log 2) these are the closed forms with
    P_Y = (1/2, 1/2); c_var is the X1 = 1 second moment, which bounds the
    variance. A general nu replaces 1/2 by zeta = rho * e^-nu.
    """
    if nu is None:
        c_mean = LOG2 * (LOG2 - binary_entropy(rho))
        c_var = LOG2 * ((1 - rho) * math.log(2 * (1 - rho)) ** 2
                        + rho * math.log(2 * rho) ** 2)
        return c_mean, c_var, math.log(1.0 / (2.0 * rho))
    zeta = binary_conv(rho, math.exp(-nu))
    hit, miss = math.log((1 - rho) / (1 - zeta)), math.log(rho / zeta)
    c_var = nu * ((1 - rho) * hit ** 2 + rho * miss ** 2)
    return symmetric_rate(nu, rho), c_var, max(abs(hit), abs(miss))


def _minimise_delta(objective):
    return grid_golden_min(objective, *DELTA_RANGE, points=GRID_POINTS)


def achievability_coeff(theta, model="noiseless", mode="exact", nu_policy="log2",
                        rho=None, stats=None):
    """Separate-decoding threshold for exact or partial recovery.

    ``model`` is "noiseless", "symmetric" (needs ``rho``) or "general" (needs
    the exact ``stats`` of the channel at the k of interest).
    """
    _check_theta(theta)
    if mode not in MODES:
        raise ParameterError(f"unknown mode {mode!r}; choose from {MODES}")
    if nu_policy not in NU_POLICIES:
        raise ParameterError(f"unknown nu policy {nu_policy!r}; choose from {NU_POLICIES}")
    nu = None
    if model == "noiseless":
        if nu_policy == "optimize":
            nu, c_mean = optimal_nu(0.0)
        else:
            nu, c_mean = LOG2, LOG2 ** 2

        def concentration(d):
            return 1.0 / (LOG2 ** 2 * _noiseless_rate(d))
    elif model in ("symmetric", "general"):
        if model == "symmetric":
            _check_rho(rho)
            if nu_policy == "optimize":
                nu = optimal_nu(rho)[0]
                c_mean, c_var, c_max = symmetric_bernstein_limits(rho, nu)
            else:
                nu = LOG2
                c_mean, c_var, c_max = symmetric_bernstein_limits(rho)
        else:
            if stats is None:
                raise ParameterError("general model needs InfoDensityStats")
            c_mean, c_var, c_max = stats.c_mean, stats.c_var, stats.c_max
            if mode in ("exact", "fp_only") and not math.isfinite(c_max):
                raise ParameterError("Bernstein threshold needs a finite c_max")

        def concentration(d):
            return (c_var + c_mean * c_max * d / 3.0) / (0.5 * c_mean ** 2 * d ** 2)
    else:
        raise ParameterError(f"unknown model {model!r}")

    log_p = 1.0 / (1.0 - theta)       # log p   / log(p/k)
    log_k = theta / (1.0 - theta)     # log k   / log(p/k)
    delta = None
    if mode == "both":
        coeff = 1.0 / c_mean
    elif mode == "fn_only":
        coeff = log_p / c_mean
    else:
        lead = log_p if mode == "exact" else 1.0
        delta, coeff = _minimise_delta(
            lambda d: max(lead / (c_mean * (1.0 - d)), log_k * concentration(d)))
    return ThresholdResult(coeff, theta, mode, model, delta, nu)


def converse_coeff(theta, model="noiseless", nu=LOG2, rho=None, stats=None):
    """Below this many tests any separate decoder has E[N_err] >= k (1 - o(1)).

    ``nu`` may be a number or "optimize" (the nu giving the smallest threshold).
    """
    _check_theta(theta)
    if model == "noiseless":
        return ThresholdResult(1.0 / LOG2 ** 2, theta, "converse", model, None, LOG2)
    if model == "symmetric":
        _check_rho(rho)
        if nu == "optimize":
            nu, rate = optimal_nu(rho)
        else:
            rate = symmetric_rate(nu, rho)
        return ThresholdResult(1.0 / rate, theta, "converse", model, None, nu)
    if model == "general":
        if stats is None:
            raise ParameterError("general model needs InfoDensityStats")
        return ThresholdResult(1.0 / stats.c_mean, theta, "converse", model)
    raise ParameterError(f"unknown model {model!r}")


def joint_optimum_coeff(theta, model="noiseless", rho=None):
    """Information-theoretic exact-recovery threshold of joint decoding."""
    _check_theta(theta)
    if model == "noiseless":
        ratio = theta / (1.0 - theta)

        def objective(nu):
            e = math.exp(-nu)
            return max(1.0 / binary_entropy(e), ratio / (e * nu))
        nu, coeff = grid_golden_min(objective, *NU_RANGE, points=GRID_POINTS)
        return ThresholdResult(coeff, theta, "joint", model, None, nu)
    if model == "symmetric":
        _check_rho(rho)
        return ThresholdResult(1.0 / (LOG2 - binary_entropy(rho)), theta, "joint", model)
    raise ParameterError(f"unknown model {model!r}")


def joint_partial_coeff(theta, model="noiseless", rho=None):
    """Joint-decoding threshold with a vanishing fraction of errors (all theta)."""
    _check_theta(theta)
    r = 0.0 if model == "noiseless" else rho
    if model == "symmetric":
        _check_rho(rho)
    elif model != "noiseless":
        raise ParameterError(f"unknown model {model!r}")
    return ThresholdResult(1.0 / (LOG2 - binary_entropy(r)), theta, "joint_partial", model)


@dataclass(frozen=True)
class CurveRow:
    theta: float
    mode: str
    model: str
    c: float
    coeff_nats: float
    delta2: float
    nu: float


def figure1_curves(model, theta_grid, modes=CURVES, rho=None, nu_policy="log2",
                   converse_nu=None):
    """c(theta) rows for each requested curve, ordered by curve then theta."""
    grid = [float(t) for t in theta_grid]
    if any(not 0.0 < t < 1.0 for t in grid):
        raise ParameterError("theta grid must lie strictly inside (0, 1)")
    unknown = set(modes) - set(CURVES)
    if unknown:
        raise ParameterError(f"unknown curves {sorted(unknown)}; choose from {CURVES}")
    if converse_nu is None:
        converse_nu = "optimize" if nu_policy == "optimize" else LOG2
    rows = []
    for mode in modes:
        for theta in grid:
            if mode in MODES:
                r = achievability_coeff(theta, model, mode, nu_policy, rho)
            elif mode == "joint":
                r = joint_optimum_coeff(theta, model, rho)
            elif mode == "joint_partial":
                r = joint_partial_coeff(theta, model, rho)
            else:
                r = converse_coeff(theta, model, converse_nu, rho)
            rows.append(CurveRow(theta, mode, model, r.c_theta, r.coeff_nats,
                                 r.argmin_delta2, r.argopt_nu))
    return rows


def fmt(x):
    """9 significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return f"{x:.9g}"


def write_curves_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([fmt(r.theta), r.mode, r.model, fmt(r.c), fmt(r.coeff_nats),
                    fmt(r.delta2), fmt(r.nu)])
