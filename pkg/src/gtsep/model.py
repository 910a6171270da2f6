"""Problem instances, Bernoulli test designs and observation synthesis."""
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, ParameterError
from .rng import stream

WORD_BITS = 64

# Below this density the matrix is drawn as a Bernoulli point process
# (geometric gaps) instead of one uniform per entry.
_SPARSE_DENSITY = 0.125


def _readonly(a):
    a.setflags(write=False)
    return a


def pack_bits(bits):
    """Pack a (..., m) boolean array little-endian into (..., ceil(m/64)) uint64 words."""
    bits = np.asarray(bits, dtype=bool)
    m = bits.shape[-1]
    words = -(-m // WORD_BITS)
    packed = np.packbits(bits, axis=-1, bitorder="little")
    pad = words * 8 - packed.shape[-1]
    if pad:
        widths = [(0, 0)] * (packed.ndim - 1) + [(0, pad)]
        packed = np.pad(packed, widths)
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)


def unpack_bits(words, m):
    """Inverse of :func:`pack_bits`, truncated to m bits."""
    words = np.ascontiguousarray(words, dtype="<u8")
    raw = words.view(np.uint8)
    return np.unpackbits(raw, axis=-1, count=m, bitorder="little").astype(bool)


@dataclass(frozen=True)
class ProblemInstance:
    p: int
    k: int
    defective_set: tuple

    def __post_init__(self):
        s = tuple(int(j) for j in self.defective_set)
        object.__setattr__(self, "defective_set", s)
        if not 0 < self.k < self.p:
            raise ParameterError(f"need 0 < k < p, got p={self.p}, k={self.k}")
        if len(s) != self.k:
            raise ParameterError(f"defective set has {len(s)} items, expected k={self.k}")
        if any(b <= a for a, b in zip(s, s[1:])):
            raise ParameterError("defective set must be strictly increasing")
        if s and (s[0] < 0 or s[-1] >= self.p):
            raise ParameterError("defective index out of range [0, p)")

    @property
    def beta(self):
        """Indicator vector of the defective set."""
        b = np.zeros(self.p, dtype=bool)
        b[list(self.defective_set)] = True
        return b


@dataclass(frozen=True)
class TestDesign:
    """Bernoulli design: each entry is 1 with probability nu / k."""
    __test__ = False

    n: int
    nu: float
    k: int

    def __post_init__(self):
        if self.n < 0:
            raise ParameterError(f"number of tests must be >= 0, got {self.n}")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.nu / self.k <= 1.0:
            raise ParameterError(f"need 0 <= nu/k <= 1, got nu={self.nu}, k={self.k}")

    @property
    def density(self):
        return self.nu / self.k


class TestMatrix:
    """Binary n x p test matrix, bit-packed row-major with a packed column copy.

    ``rows[i]`` holds the p bits of test i, ``cols[j]`` the n bits of item j.
    Bit t of a line lives in word t // 64 at position t % 64.
    """
    __test__ = False

    def __init__(self, n, p, rows, cols):
        self.n = int(n)
        self.p = int(p)
        rows = np.asarray(rows, dtype=np.uint64)
        cols = np.asarray(cols, dtype=np.uint64)
        if rows.shape != (self.n, -(-self.p // WORD_BITS)):
            raise DimensionError(f"row words have shape {rows.shape} for n={n}, p={p}")
        if cols.shape != (self.p, -(-self.n // WORD_BITS)):
            raise DimensionError(f"column words have shape {cols.shape} for n={n}, p={p}")
        self.rows = _readonly(rows)
        self.cols = _readonly(cols)
        self._col_weights = None

    @classmethod
    def from_dense(cls, x):
        x = np.asarray(x)
        if x.ndim != 2:
            raise DimensionError("dense test matrix must be 2-D")
        if x.size and not np.isin(x, (0, 1)).all():
            raise ParameterError("test matrix entries must be 0 or 1")
        x = x.astype(bool)
        return cls(x.shape[0], x.shape[1], pack_bits(x), pack_bits(x.T))

    @classmethod
    def from_rows(cls, n, p, rows):
        rows = np.asarray(rows, dtype=np.uint64)
        return cls.from_dense(unpack_bits(rows, p).reshape(n, p))

    @classmethod
    def _from_positions(cls, n, p, r, c):
        wr, wc = -(-p // WORD_BITS), -(-n // WORD_BITS)
        one = np.uint64(1)
        rows = np.zeros(n * wr, dtype=np.uint64)
        np.bitwise_or.at(rows, r * wr + c // WORD_BITS,
                         np.left_shift(one, (c % WORD_BITS).astype(np.uint64)))
        cols = np.zeros(p * wc, dtype=np.uint64)
        np.bitwise_or.at(cols, c * wc + r // WORD_BITS,
                         np.left_shift(one, (r % WORD_BITS).astype(np.uint64)))
        return cls(n, p, rows.reshape(n, wr), cols.reshape(p, wc))

    def to_dense(self):
        if self.n == 0:
            return np.zeros((0, self.p), dtype=bool)
        return unpack_bits(self.rows, self.p)

    def column(self, j):
        return unpack_bits(self.cols[j], self.n)

    @property
    def column_weights(self):
        """Number of tests containing each item."""
        if self._col_weights is None:
            self._col_weights = _readonly(
                np.bitwise_count(self.cols).sum(axis=1, dtype=np.int64))
        return self._col_weights

    @property
    def shape(self):
        return (self.n, self.p)

    def __eq__(self, other):
        return (isinstance(other, TestMatrix) and self.shape == other.shape
                and np.array_equal(self.rows, other.rows))

    def __repr__(self):
        return f"TestMatrix(n={self.n}, p={self.p})"


@dataclass(frozen=True)
class NoiseChannel:
    """Test-outcome kernel q_N = P[Y=1 | N defectives in the test]."""
    kind: str
    rho: float = None
    table: tuple = None

    def __post_init__(self):
        if self.kind == "noiseless":
            pass
        elif self.kind == "symmetric":
            if self.rho is None or not 0.0 <= self.rho < 0.5:
                raise ParameterError(f"symmetric noise needs rho in [0, 1/2), got {self.rho}")
        elif self.kind == "general":
            if self.table is None or len(self.table) == 0:
                raise ParameterError("general channel needs a non-empty q_N table")
            t = tuple(float(v) for v in self.table)
            if not all(0.0 <= v <= 1.0 for v in t):
                raise ParameterError("q_N entries must lie in [0, 1]")
            object.__setattr__(self, "table", t)
        else:
            raise ParameterError(f"unknown channel kind {self.kind!r}")

    @classmethod
    def noiseless(cls):
        return cls("noiseless")

    @classmethod
    def symmetric(cls, rho):
        return cls("symmetric", rho=float(rho))

    @classmethod
    def general(cls, table):
        return cls("general", table=tuple(table))

    def q_table(self, k):
        """q_N for N = 0..k as a float array."""
        if self.kind == "general":
            if len(self.table) < k + 1:
                raise ParameterError(
                    f"q_N table covers N <= {len(self.table) - 1}, need N up to k={k}")
            return np.array(self.table[:k + 1])
        lo, hi = (0.0, 1.0) if self.kind == "noiseless" else (self.rho, 1.0 - self.rho)
        q = np.full(k + 1, hi)
        q[0] = lo
        return q


@dataclass(frozen=True)
class Observations:
    y: np.ndarray = field(repr=False)

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 1:
            raise DimensionError("observations must be a 1-D vector")
        if y.size and not np.isin(y, (0, 1)).all():
            raise ParameterError("observations must be binary")
        object.__setattr__(self, "y", _readonly(y.astype(bool)))

    @property
    def n(self):
        return self.y.shape[0]

    def packed(self):
        """(y, not y) packed into 64-bit words, padding bits zero in both."""
        return pack_bits(self.y), pack_bits(~self.y)


@dataclass(frozen=True)
class RecoveryCriterion:
    kind: str = "exact"
    dpos: int = 0
    dneg: int = 0

    def __post_init__(self):
        if self.kind not in ("exact", "partial", "avg_errors"):
            raise ParameterError(f"unknown recovery criterion {self.kind!r}")
        if self.kind != "partial" and (self.dpos or self.dneg):
            raise ParameterError(f"{self.kind} criterion takes no error allowances")
        if self.dpos < 0 or self.dneg < 0:
            raise ParameterError("error allowances must be non-negative")

    @classmethod
    def exact(cls):
        return cls("exact")

    @classmethod
    def partial(cls, dpos, dneg):
        return cls("partial", int(dpos), int(dneg))

    @classmethod
    def avg_errors(cls):
        return cls("avg_errors")

    def validate(self, p, k):
        if self.dpos > p - k - 1 or self.dneg > k - 1:
            raise ParameterError(
                f"need dpos <= p-k-1 = {p - k - 1} and dneg <= k-1 = {k - 1}")

    def success(self, fp, fn):
        # avg_errors has no pass/fail notion of its own; it is scored as exact.
        return fp <= self.dpos and fn <= self.dneg


def sample_defective_set(p, k, seed):
    """Uniformly random k-subset of range(p)."""
    if not 0 < k < p:
        raise ParameterError(f"need 0 < k < p, got p={p}, k={k}")
    rng = stream(seed, "defectives", p, k)
    if k <= p // 64:
        chosen = {}
        while len(chosen) < k:
            for j in rng.integers(0, p, size=2 * (k - len(chosen))).tolist():
                chosen.setdefault(j, None)
                if len(chosen) == k:
                    break
        s = sorted(chosen)
    else:
        idx = np.arange(p)
        picks = rng.integers(np.arange(k), p)
        for i, j in enumerate(picks.tolist()):
            idx[i], idx[j] = idx[j], idx[i]
        s = sorted(idx[:k].tolist())
    return ProblemInstance(p, k, tuple(s))


def generate_test_matrix(design, p, seed):
    """i.i.d. Bernoulli(nu/k) matrix with design.n rows and p columns."""
    if p < 1:
        raise ParameterError(f"need p >= 1, got {p}")
    n, q = design.n, design.density
    if n == 0 or q == 0.0:
        return TestMatrix.from_dense(np.zeros((n, p), dtype=bool))
    if q == 1.0:
        return TestMatrix.from_dense(np.ones((n, p), dtype=bool))
    rng = stream(seed, "matrix", n, p)
    if q >= _SPARSE_DENSITY:
        return TestMatrix.from_dense(rng.random((n, p)) < q)
    total = n * p
    mean = total * q
    chunks, pos = [], -1
    while pos < total - 1:
        gaps = rng.geometric(q, size=int(mean + 6.0 * np.sqrt(mean) + 64))
        idx = pos + np.cumsum(gaps)
        chunks.append(idx)
        pos = int(idx[-1])
    flat = np.concatenate(chunks)
    flat = flat[flat < total]
    return TestMatrix._from_positions(n, p, flat // p, flat % p)


def defectives_per_test(matrix, instance):
    """N(S, X^(i)) for every row i."""
    if matrix.p != instance.p:
        raise DimensionError(f"matrix has p={matrix.p}, instance has p={instance.p}")
    if matrix.n == 0:
        return np.zeros(0, dtype=np.int64)
    cols = matrix.cols[list(instance.defective_set)]
    return unpack_bits(cols, matrix.n).sum(axis=0, dtype=np.int64)


def run_tests(matrix, instance, channel, seed):
    """Draw Y^(i) ~ Bernoulli(q_N) independently for each test."""
    counts = defectives_per_test(matrix, instance)
    q = channel.q_table(instance.k)
    u = stream(seed, "noise", matrix.n).random(matrix.n)
    return Observations(u < q[counts])
