"""Separate decoding of items and the COMP / DD / NCOMP baselines.

All decoders work on the packed column view of the test matrix. For each item
the separate decoder only needs the four outcome counts n_xy (tests where the
item's entry is x and the outcome is y), obtained by AND + popcount against
the packed outcome vector and its complement.
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, ParameterError
from .model import unpack_bits


@dataclass(frozen=True)
class DecodeResult:
    estimated_set: tuple
    per_item_scores: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "estimated_set",
                           tuple(int(j) for j in self.estimated_set))

    @property
    def size(self):
        return len(self.estimated_set)


@dataclass(frozen=True)
class SeparateDecoderConfig:
    gamma: float
    iota: object  # InfoDensityTable

    def __post_init__(self):
        if not np.isfinite(self.gamma):
            raise ParameterError(f"threshold must be finite, got {self.gamma}")


def _check(matrix, obs):
    if obs.n != matrix.n:
        raise DimensionError(f"{obs.n} observations for a matrix with {matrix.n} tests")


def default_gamma(n, i1, delta=0.5):
    """gamma = n I1 (1 - delta)."""
    return n * i1 * (1.0 - delta)


def outcome_counts(matrix, obs):
    """Per-item counts (n00, n01, n10, n11), each an int64 array of length p."""
    _check(matrix, obs)
    ypos, _ = obs.packed()
    n1 = matrix.column_weights
    n11 = np.bitwise_count(matrix.cols & ypos).sum(axis=1, dtype=np.int64)
    n10 = n1 - n11
    n_pos = int(obs.y.sum())
    n01 = n_pos - n11
    n00 = (matrix.n - n_pos) - n10
    return n00, n01, n10, n11


def _scores(counts, iota):
    """Sum of n_xy * iota[x][y]; a cell with count 0 contributes 0 even if -inf."""
    n00, n01, n10, n11 = counts
    v = iota.values
    total = np.zeros(n00.shape[0])
    with np.errstate(invalid="ignore"):
        for c, val in ((n00, v[0, 0]), (n01, v[0, 1]), (n10, v[1, 0]), (n11, v[1, 1])):
            total += np.where(c > 0, c * val, 0.0)
    return total


def decode_separate_item(column, obs, cfg):
    """Threshold test for a single item given its column of the test matrix."""
    x = np.asarray(column, dtype=bool)
    if x.shape != obs.y.shape:
        raise DimensionError(f"column of length {x.shape[0]} vs {obs.n} observations")
    y = obs.y
    counts = tuple(np.array([np.count_nonzero((x == a) & (y == b))])
                   for a, b in ((0, 0), (0, 1), (1, 0), (1, 1)))
    return bool(_scores(counts, cfg.iota)[0] > cfg.gamma)


def decode_separate(matrix, obs, cfg):
    scores = _scores(outcome_counts(matrix, obs), cfg.iota)
    return DecodeResult(np.flatnonzero(scores > cfg.gamma), scores)


def _comp_mask(matrix, obs):
    _check(matrix, obs)
    _, yneg = obs.packed()
    in_negative = (matrix.cols & yneg).any(axis=1)
    return ~in_negative


def decode_comp(matrix, obs):
    """Every item that appears in no negative test is declared defective."""
    return DecodeResult(np.flatnonzero(_comp_mask(matrix, obs)))


def decode_dd(matrix, obs):
    """Definite defectives: unique possible defective in some positive test."""
    pd = np.flatnonzero(_comp_mask(matrix, obs))
    if pd.size == 0 or matrix.n == 0:
        return DecodeResult(())
    members = unpack_bits(matrix.cols[pd], matrix.n)       # |PD| x n
    per_test = members.sum(axis=0)
    single = np.flatnonzero(obs.y & (per_test == 1))
    if single.size == 0:
        return DecodeResult(())
    owners = pd[np.argmax(members[:, single], axis=0)]
    return DecodeResult(np.unique(owners))


def decode_ncomp(matrix, obs, rho, Delta=1.5):
    """Declare j defective iff its positive-test fraction is >= 1 - rho (1 + Delta).

    An item in no test has an undefined fraction and is declared non-defective.
    """
    if not 0.0 <= rho < 0.5:
        raise ParameterError(f"need rho in [0, 1/2), got {rho}")
    if Delta < 0:
        raise ParameterError(f"need Delta >= 0, got {Delta}")
    n00, n01, n10, n11 = outcome_counts(matrix, obs)
    n1 = n10 + n11
    thr = 1.0 - rho * (1.0 + Delta)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = n11 / n1
    hit = (n1 > 0) & (ratio >= thr)
    return DecodeResult(np.flatnonzero(hit), np.where(n1 > 0, ratio, np.nan))


DECODERS = ("separate", "comp", "dd", "ncomp")


def decode(name, matrix, obs, **params):
    """Dispatch by decoder name."""
    if name == "separate":
        return decode_separate(matrix, obs, params["cfg"])
    if name == "comp":
        return decode_comp(matrix, obs)
    if name == "dd":
        return decode_dd(matrix, obs)
    if name == "ncomp":
        return decode_ncomp(matrix, obs, params["rho"], params.get("Delta", 1.5))
    raise ParameterError(f"unknown decoder {name!r}; choose from {DECODERS}")
