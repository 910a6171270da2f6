"""Exact single-item channel analysis for Bernoulli designs.

With item 1 defective, X1 ~ Bernoulli(nu/k) and the other k-1 defectives
contribute a Binomial(k-1, nu/k) count, so every quantity here is an exact
finite-k evaluation; the ``*_asymptotic_*`` helpers give the k -> inf forms.
"""
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ParameterError
from .special import LOG2, binary_conv, binary_entropy, kl_binary

# log-space recursion above this k
_LOG_PMF_K = 1000


def nu_symm(k):
    """The nu with (1 - nu/k)^k = 1/2, i.e. k (1 - 2^(-1/k))."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    return -k * math.expm1(-LOG2 / k)


def _binom_pmf(m, q):
    """Binomial(m, q) pmf over 0..m via multiplicative recursion.

    The log-space branch returns the pmf up to a common scale factor; callers
    normalise.
    """
    if q == 1.0:
        pmf = np.zeros(m + 1)
        pmf[m] = 1.0
        return pmf
    i = np.arange(m)
    step = np.log(m - i) - np.log(i + 1) + math.log(q) - math.log1p(-q)
    log0 = m * math.log1p(-q)
    if m + 1 > _LOG_PMF_K or log0 < -700.0:
        logpmf = log0 + np.concatenate(([0.0], np.cumsum(step)))
        return np.exp(logpmf - logpmf.max())
    pmf = np.empty(m + 1)
    pmf[0] = math.exp(log0)
    pmf[1:] = pmf[0] * np.cumprod(np.exp(step))
    return pmf


@dataclass(frozen=True)
class ChannelMarginals:
    """P_X, P_{Y|X1} and P_Y for one defective item; arrays indexed [x][y] / [y]."""
    k: int
    nu: float
    p_x: float
    p_y_given_x: np.ndarray
    p_y: np.ndarray

    @property
    def joint(self):
        """P(x, y) = P_X(x) P_{Y|X1}(y|x)."""
        px = np.array([1.0 - self.p_x, self.p_x])
        return px[:, None] * self.p_y_given_x


def channel_marginals(k, nu, channel):
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    q = nu / k
    if not 0.0 < q <= 1.0:
        raise ParameterError(f"need 0 < nu/k <= 1, got nu={nu}, k={k}")
    table = channel.q_table(k)
    pmf = _binom_pmf(k - 1, q)
    cond = np.empty((2, 2))
    for x in (0, 1):
        t = table[x:x + k]
        one = float(pmf @ t)
        zero = float(pmf @ (1.0 - t))
        total = one + zero
        cond[x] = (zero / total, one / total)
    p_y = (1.0 - q) * cond[0] + q * cond[1]
    cond.setflags(write=False)
    p_y.setflags(write=False)
    return ChannelMarginals(k, float(nu), q, cond, p_y)


@dataclass(frozen=True)
class InfoDensityTable:
    """iota[x][y] = log(P_{Y|X1}(y|x) / P_Y(y)) in nats.

    Cells with P_Y(y) = 0 can never be observed; they are marked unreachable
    and hold 0.0 so they never move a decision statistic.
    """
    values: np.ndarray
    reachable: np.ndarray

    def __getitem__(self, x):
        return self.values[x]

    @property
    def has_neg_inf(self):
        return bool(np.isneginf(self.values[self.reachable]).any())


def info_density_table(marginals):
    values = np.zeros((2, 2))
    reachable = np.zeros((2, 2), dtype=bool)
    for y in (0, 1):
        py = marginals.p_y[y]
        if py <= 0.0:
            continue
        reachable[:, y] = True
        for x in (0, 1):
            c = marginals.p_y_given_x[x, y]
            values[x, y] = -math.inf if c == 0.0 else math.log(c / py)
    values.setflags(write=False)
    reachable.setflags(write=False)
    return InfoDensityTable(values, reachable)


@dataclass(frozen=True)
class InfoDensityStats:
    k: int
    i1: float
    c_mean: float
    c_var: float
    c_max: float


def expected_density(marginals, table):
    """E[iota(X1, Y)] over cells of positive probability (this is I1)."""
    joint = marginals.joint
    live = joint > 0.0
    return float(np.sum(joint[live] * table.values[live]))


def info_stats(marginals, table=None):
    """I1 and the Bernstein parameters c_mean, c_var, c_max.

    c_max is +inf when a reachable cell has iota = -inf (noiseless channel);
    callers needing a finite value must check.
    """
    if table is None:
        table = info_density_table(marginals)
    i1 = expected_density(marginals, table)
    joint = marginals.joint
    live = joint > 0.0
    var = float(np.sum(joint[live] * (table.values[live] - i1) ** 2))
    c_max = float(np.max(np.abs(table.values[table.reachable])))
    k = marginals.k
    return InfoDensityStats(k, i1, k * i1, k * var, c_max)


def mutual_information_entropies(marginals):
    """I1 as H(Y) - H(Y|X1), an independent route to the same number."""
    px = np.array([1.0 - marginals.p_x, marginals.p_x])
    h_y = binary_entropy(marginals.p_y[1])
    h_y_x = sum(px[x] * binary_entropy(marginals.p_y_given_x[x, 1]) for x in (0, 1))
    return h_y - h_y_x


def i1_asymptotic_noiseless(k):
    return LOG2 ** 2 / k


def i1_asymptotic_symmetric(nu, rho, k):
    """(nu/k) D2(rho || rho * e^-nu), the large-k form of I1 under symmetric noise."""
    if not 0.0 <= rho < 0.5:
        raise ParameterError(f"need rho in [0, 1/2), got {rho}")
    if nu <= 0.0:
        raise ParameterError(f"need nu > 0, got {nu}")
    # zeta is the limiting P[Y = 0]; the gap P[Y=0 | X1=0] - zeta is O(1/k)
    # and drops out of the leading term.
    zeta = binary_conv(rho, math.exp(-nu))
    return (nu / k) * kl_binary(rho, zeta)
