import csv
import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from gtsep import bounds
from gtsep.bounds import (achievability_coeff, converse_coeff, density_tail_exact,
                          density_tail_mc, figure1_curves, joint_optimum_coeff,
                          joint_partial_coeff, optimal_nu, pe_lower_bound_item,
                          pe_upper_bound_exact, psi_bernstein, psi_noiseless,
                          symmetric_bernstein_limits, symmetric_rate, write_curves_csv)
from gtsep.channel import channel_marginals, info_density_table, info_stats, nu_symm
from gtsep.exceptions import ParameterError
from gtsep.model import NoiseChannel
from gtsep.sim import ExperimentConfig, run_experiment
from gtsep.special import LOG2, binary_entropy


def _sym(k, rho, nu=None):
    return channel_marginals(k, nu if nu is not None else nu_symm(k),
                             NoiseChannel.symmetric(rho))


# --- concentration and tails ------------------------------------------------

def test_psi_bernstein_needs_finite_cmax():
    m = channel_marginals(10, LOG2, NoiseChannel.noiseless())
    with pytest.raises(ParameterError):
        psi_bernstein(100, 10, info_stats(m), 0.5)


def test_psi_clamped_and_decreasing():
    s = info_stats(_sym(10, 0.11))
    vals = [psi_bernstein(n, 10, s, 0.5) for n in (1, 100, 1000, 10000)]
    assert vals[0] == 1.0
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert 0.0 <= vals[-1] < 1e-3
    assert psi_noiseless(10 ** 6, 10, 0.5) == 0.0
    with pytest.raises(ParameterError):
        psi_noiseless(10, 10, 1.0)


def test_exact_tail_matches_sequence_enumeration():
    # independent oracle: sum over all 4^n cell sequences
    m = _sym(4, 0.1, 0.9)
    tab = info_density_table(m)
    probs = m.joint.ravel()
    vals = tab.values.ravel()
    n, thr = 5, 0.3
    total = 0.0
    for seq in itertools.product(range(4), repeat=n):
        if sum(vals[c] for c in seq) <= thr:
            total += math.prod(probs[c] for c in seq)
    assert density_tail_exact(n, m, thr) == pytest.approx(total, rel=1e-10)


def test_exact_tail_handles_neg_inf():
    m = channel_marginals(3, LOG2, NoiseChannel.noiseless())
    # a single (1, 0) cell sends the sum to -inf, so P[sum <= -1e6] = P[some (1,0)]
    n = 6
    p10 = m.joint[1, 0]
    assert density_tail_exact(n, m, -1e6) == pytest.approx(1 - (1 - p10) ** n, rel=1e-10)


@pytest.mark.parametrize("rho,n", [(0.0, 30), (0.11, 30), (0.2, 12)])
def test_mc_tail_agrees_with_exact(rho, n):
    ch = NoiseChannel.noiseless() if rho == 0 else NoiseChannel.symmetric(rho)
    m = channel_marginals(6, LOG2, ch)
    s = info_stats(m)
    thr = n * s.i1 * 0.5
    exact = density_tail_exact(n, m, thr)
    est = density_tail_mc(n, m, thr, samples=40_000, seed=3)
    assert abs(est.prob - exact) < 4 * max(est.stderr, 1e-3)


@pytest.mark.parametrize("delta", [0.3, 0.6])
@pytest.mark.parametrize("n", [1000, 2000])
def test_bernstein_dominates_tail(n, delta):
    k = 5
    m = _sym(k, 0.11)
    s = info_stats(m)
    t = density_tail_mc(n, m, n * s.i1 * (1 - delta), samples=20_000, seed=1)
    assert t.prob <= psi_bernstein(n, k, s, delta) + 3 * t.stderr


@pytest.mark.parametrize("n,delta", [(10, 0.6), (25, 0.3), (40, 0.9)])
def test_noiseless_psi_dominates_exact_tail(n, delta):
    k = 10
    m = channel_marginals(k, nu_symm(k), NoiseChannel.noiseless())
    i1 = info_stats(m).i1
    assert density_tail_exact(n, m, n * i1 * (1 - delta)) <= psi_noiseless(n, k, delta)


# --- finite-n error bounds --------------------------------------------------

def test_upper_bound_terms():
    m = channel_marginals(3, LOG2, NoiseChannel.noiseless())
    ub = pe_upper_bound_exact(120, 200, 3, m, 8.0, samples=20_000, seed=0)
    assert ub.miss_term == pytest.approx(3 * ub.tail.prob)
    assert ub.false_alarm_term == pytest.approx(197 * math.exp(-8.0))
    assert ub.value == pytest.approx(ub.miss_term + ub.false_alarm_term)
    with pytest.raises(ParameterError):
        pe_upper_bound_exact(10, 20, 2, m, 0.0)


def test_upper_bound_dominates_simulated_error():
    p, k, n = 200, 3, 140
    m = channel_marginals(k, LOG2, NoiseChannel.noiseless())
    gamma = n * info_stats(m).i1 * 0.5
    ub = pe_upper_bound_exact(n, p, k, m, gamma, samples=50_000, seed=0)
    res = run_experiment(ExperimentConfig(p, k, NoiseChannel.noiseless(), LOG2, (n,),
                                          trials=600, master_seed=1))
    err = 1 - res.points[0].success_rate
    assert ub.value < 1
    assert err <= ub.value + 3 * math.sqrt(ub.value / 600) + 3 * ub.stderr


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 400), st.integers(1, 20), st.floats(0.0, 0.3))
def test_lower_bound_at_most_k_over_p(n, k, rho):
    ch = NoiseChannel.noiseless() if rho == 0 else NoiseChannel.symmetric(rho)
    p = 10 * k + 5
    lb = pe_lower_bound_item(n, p, k, channel_marginals(k, LOG2, ch),
                             samples=500, seed=0)
    assert 0.0 <= lb.value <= k / p
    assert lb.threshold == pytest.approx(math.log((p - k) / k))


# --- asymptotic thresholds --------------------------------------------------

def _crossing_coeff(theta, c_mean, g, lead):
    """Min over delta of max(lead/(c(1-d)), theta/(1-theta) g(d)) via root finding."""
    r = theta / (1 - theta)
    h = lambda d: lead / (c_mean * (1 - d)) - r * g(d)
    d = optimize.brentq(h, 1e-9, 1 - 1e-9, xtol=1e-15)
    return lead / (c_mean * (1 - d))


@pytest.mark.parametrize("theta", [0.05, 0.25, 0.5, 0.8])
@pytest.mark.parametrize("mode", ["exact", "fp_only"])
def test_noiseless_coeff_matches_root_finding(theta, mode):
    lead = 1 / (1 - theta) if mode == "exact" else 1.0
    g = lambda d: 1 / (LOG2 ** 2 * ((1 - d) * math.log1p(-d) + d))
    ref = _crossing_coeff(theta, LOG2 ** 2, g, lead)
    got = achievability_coeff(theta, "noiseless", mode).coeff_nats
    assert got == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("theta", [0.1, 0.5])
def test_symmetric_coeff_matches_root_finding(theta):
    rho = 0.11
    cm = LOG2 * (LOG2 - binary_entropy(rho))
    cv = LOG2 * ((1 - rho) * math.log(2 * (1 - rho)) ** 2 + rho * math.log(2 * rho) ** 2)
    cx = math.log(1 / (2 * rho))
    g = lambda d: (cv + cm * cx * d / 3) / (0.5 * cm ** 2 * d ** 2)
    ref = _crossing_coeff(theta, cm, g, 1 / (1 - theta))
    got = achievability_coeff(theta, "symmetric", "exact", rho=rho).coeff_nats
    assert got == pytest.approx(ref, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.95), st.sampled_from([None, 0.05, 0.2]))
def test_mode_ordering(theta, rho):
    model = "noiseless" if rho is None else "symmetric"
    c = {m: achievability_coeff(theta, model, m, rho=rho).coeff_nats for m in bounds.MODES}
    tol = 1e-9
    assert c["both"] <= c["fp_only"] + tol
    assert c["both"] <= c["fn_only"] + tol
    assert c["fp_only"] <= c["exact"] + tol
    assert c["fn_only"] <= c["exact"] + tol


def test_noiseless_closed_forms():
    for theta in (0.1, 0.5, 0.9):
        assert achievability_coeff(theta).c_theta <= LOG2
        assert achievability_coeff(theta, mode="both").c_theta == pytest.approx(LOG2)
        assert achievability_coeff(theta, mode="fn_only").c_theta == pytest.approx(
            LOG2 * (1 - theta))
        assert converse_coeff(theta).c_theta == pytest.approx(LOG2)


def test_noiseless_exact_small_theta_limit():
    gap = [LOG2 - achievability_coeff(t).c_theta for t in (1e-4, 1e-6, 1e-8)]
    assert all(g > 0 for g in gap)
    # the gap shrinks like sqrt(theta)
    assert gap[0] / gap[1] == pytest.approx(10, rel=0.05)
    assert gap[2] < 1e-4


def test_joint_noiseless():
    for theta in (0.05, 0.25, 1 / 3 - 1e-6):
        r = joint_optimum_coeff(theta)
        assert r.c_theta == pytest.approx(1.0, abs=1e-9)
        assert r.argopt_nu == pytest.approx(LOG2, abs=1e-4)
    above = [joint_optimum_coeff(t).c_theta for t in (0.4, 0.6, 0.8)]
    assert 1 > above[0] > above[1] > above[2] > 0


def test_symmetric_joint_and_partial():
    rho = 0.11
    assert joint_optimum_coeff(0.2, "symmetric", rho).c_theta == pytest.approx(
        1 / (LOG2 * (1 / (LOG2 - binary_entropy(rho)))))
    assert joint_partial_coeff(0.7).c_theta == pytest.approx(1.0)


@pytest.mark.parametrize("rho", [0.05, 0.11, 0.3])
def test_log2_rate_identity(rho):
    zeta = rho * (1 - 0.5) + 0.5 * (1 - rho)
    assert zeta == 0.5
    assert symmetric_rate(LOG2, rho) == pytest.approx(LOG2 * (LOG2 - binary_entropy(rho)),
                                                      abs=1e-12)


def test_optimal_nu_matches_scipy():
    rho = 0.11
    ref = optimize.minimize_scalar(lambda v: -symmetric_rate(v, rho), bounds=(0.01, 5),
                                   method="bounded", options={"xatol": 1e-10})
    nu, rate = optimal_nu(rho)
    assert nu == pytest.approx(ref.x, abs=1e-5)
    assert rate == pytest.approx(-ref.fun, rel=1e-10)
    assert rate > symmetric_rate(LOG2, rho)
    nu0, _ = optimal_nu(0.0)
    assert nu0 == pytest.approx(LOG2, abs=1e-5)


def test_optimize_policy_improves_symmetric():
    base = achievability_coeff(0.3, "symmetric", "both", rho=0.11)
    opt = achievability_coeff(0.3, "symmetric", "both", "optimize", rho=0.11)
    assert opt.c_theta > base.c_theta
    assert opt.argopt_nu != pytest.approx(LOG2, abs=1e-3)


def test_bernstein_limits_general_nu_reduce_at_log2():
    rho = 0.2
    a = symmetric_bernstein_limits(rho)
    b = symmetric_bernstein_limits(rho, LOG2)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_general_model_uses_stats():
    k = 10 ** 4
    s = info_stats(_sym(k, 0.11))
    g = achievability_coeff(0.3, "general", "exact", stats=s)
    sym = achievability_coeff(0.3, "symmetric", "exact", rho=0.11)
    assert g.coeff_nats == pytest.approx(sym.coeff_nats, rel=1e-3)
    assert converse_coeff(0.3, "general", stats=s).coeff_nats == pytest.approx(1 / s.c_mean)


def test_argument_errors():
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ParameterError):
            achievability_coeff(bad)
    with pytest.raises(ParameterError):
        achievability_coeff(0.5, "symmetric", rho=0.5)
    with pytest.raises(ParameterError):
        achievability_coeff(0.5, mode="nope")
    with pytest.raises(ParameterError):
        achievability_coeff(0.5, nu_policy="nope")
    with pytest.raises(ParameterError):
        achievability_coeff(0.5, "general")


# --- curve tables -----------------------------------------------------------

GRID = [i / 100 for i in range(1, 100)]


@pytest.fixture(scope="module")
def noiseless_rows():
    return figure1_curves("noiseless", GRID)


def test_curve_rows_per_mode(noiseless_rows):
    for mode in bounds.CURVES:
        thetas = [r.theta for r in noiseless_rows if r.mode == mode]
        assert len(thetas) == 99
        assert all(b > a for a, b in zip(thetas, thetas[1:]))


def test_curve_ordering_against_joint(noiseless_rows):
    by = {(r.mode, r.theta): r.c for r in noiseless_rows}
    for t in GRID:
        assert by["exact", t] <= by["joint", t] + 1e-12
        for m in ("fp_only", "fn_only", "both", "converse"):
            assert by[m, t] <= by["joint_partial", t] + 1e-12
        assert by["converse", t] == pytest.approx(by["both", t], abs=1e-12)


def test_symmetric_curves_ordering():
    rows = figure1_curves("symmetric", [0.1, 0.5, 0.9], rho=0.11)
    by = {(r.mode, r.theta): r.c for r in rows}
    for t in (0.1, 0.5, 0.9):
        assert by["exact", t] <= by["joint", t]
        assert by["both", t] <= by["joint_partial", t]


def test_csv_roundtrip(noiseless_rows):
    buf = io.StringIO()
    write_curves_csv(noiseless_rows, buf)
    buf.seek(0)
    parsed = list(csv.DictReader(buf))
    assert list(parsed[0]) == list(bounds.CSV_HEADER)
    assert len(parsed) == len(noiseless_rows)
    for r, row in zip(noiseless_rows, parsed):
        assert float(row["c"]) == pytest.approx(r.c, rel=1e-8)
        assert float(row["theta"]) == pytest.approx(r.theta, rel=1e-8)


def test_curve_errors():
    with pytest.raises(ParameterError):
        figure1_curves("noiseless", [0.0, 0.5])
    with pytest.raises(ParameterError):
        figure1_curves("noiseless", [0.5], modes=("exact", "bogus"))
