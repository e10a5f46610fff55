"""Uniform sample generation on the open unit cube.

Three methods share one interface: i.i.d. counter-based pseudo-random draws,
base-2 digital (Sobol') nets with a random digital shift, and Owen-scrambled
nets realized as a keyed permutation tree.  Also provides the inverse normal
CDF used to turn uniforms into Gaussian increments, and Warnock's closed-form
L2 star discrepancy as a uniformity diagnostic.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import erfc

from .hashing import U64, hash_fields, mix64, uniforms_from_hash

BITS = 32
MAX_INDEX = 1 << BITS
_DATA_FILE = Path(__file__).parent / "data" / "joe-kuo-d1100.txt"

METHODS = ("iid", "digital_shift", "owen")
NET_METHODS = ("digital_shift", "owen")


class UnsupportedDimensionError(ValueError):
    """Requested dimension exceeds the bundled direction-number table."""


class SampleCountError(ValueError):
    """Sample count violates a sampler precondition (e.g. not a power of 2)."""


# ---------------------------------------------------------------------------
# Direction numbers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirectionTable:
    """Per-dimension generator columns of the base-2 digital sequence.

    ``columns[j, k]`` is the k-th 32-bit generator column of dimension j+1.
    Dimension 1 is the van der Corput sequence (columns 2^(31-k)); higher
    dimensions come from primitive-polynomial recurrences over the bundled
    initial direction numbers.
    """

    max_dims: int
    bits: int
    columns: np.ndarray  # (max_dims, bits) uint32

    def __post_init__(self):
        if self.columns.shape != (self.max_dims, self.bits):
            raise ValueError("column array shape does not match header")


def _columns_from_initial(degree: int, poly: int, m_init, bits: int = BITS) -> np.ndarray:
    """Expand initial direction numbers m_1..m_s to all `bits` columns.

    Standard recurrence: V_k = a_1 V_{k-1} ^ ... ^ a_{s-1} V_{k-s+1}
    ^ V_{k-s} ^ (V_{k-s} >> s), with V_k = m_k << (bits - k).
    """
    v = np.zeros(bits, dtype=np.uint64)
    for k in range(1, min(degree, bits) + 1):
        v[k - 1] = np.uint64(m_init[k - 1]) << np.uint64(bits - k)
    for k in range(degree + 1, bits + 1):
        w = v[k - degree - 1] ^ (v[k - degree - 1] >> np.uint64(degree))
        for i in range(1, degree):
            if (poly >> (degree - 1 - i)) & 1:
                w ^= v[k - i - 1]
        v[k - 1] = w
    return v.astype(np.uint32)


@functools.lru_cache(maxsize=4)
def load_direction_table(path: str | None = None) -> DirectionTable:
    """Parse a `d s a m_1 ... m_s` direction-number file (dimension 1 implied)."""
    fname = Path(path) if path else _DATA_FILE
    rows = {}
    with open(fname) as fh:
        for line in fh:
            parts = line.split()
            if not parts or not parts[0].isdigit():
                continue  # header / comments
            d = int(parts[0])
            s = int(parts[1])
            a = int(parts[2])
            m = [int(x) for x in parts[3 : 3 + s]]
            rows[d] = (s, a, m)
    max_dims = max(rows) if rows else 1
    cols = np.zeros((max_dims, BITS), dtype=np.uint32)
    cols[0] = [1 << (BITS - 1 - k) for k in range(BITS)]  # van der Corput
    for d, (s, a, m) in rows.items():
        cols[d - 1] = _columns_from_initial(s, a, m)
    return DirectionTable(max_dims=max_dims, bits=BITS, columns=cols)


# ---------------------------------------------------------------------------
# Point set types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplerSpec:
    """How the uniform stream is simulated: method, dimension and seed."""

    method: str
    s: int
    seed: int

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown sampling method {self.method!r}")
        if self.s < 1:
            raise ValueError("dimension must be >= 1")
        if self.method in NET_METHODS and self.s > load_direction_table().max_dims:
            raise UnsupportedDimensionError(
                f"dimension {self.s} exceeds direction table "
                f"({load_direction_table().max_dims} dims)"
            )


@dataclass(frozen=True)
class PointSet:
    """n x s block of points strictly inside (0,1), with provenance."""

    values: np.ndarray
    spec: SamplerSpec
    start_index: int = 0

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def s(self) -> int:
        return self.values.shape[1]


# ---------------------------------------------------------------------------
# Digit-word generation
# ---------------------------------------------------------------------------

def sobol_raw(index: int, dim: int, table: DirectionTable | None = None) -> int:
    """Digit word of the base-2 digital sequence at `index` in dimension `dim`.

    The word is the GF(2) matrix-vector product of the dimension's generator
    columns with the binary digits of the index, i.e. the XOR of the columns
    selected by the set bits of `index`.  Dimension 1 reproduces the van der
    Corput radical inverse.
    """
    if table is None:
        table = load_direction_table()
    if not 0 <= index < MAX_INDEX:
        raise ValueError(f"index must be in [0, 2^{BITS})")
    if not 1 <= dim <= table.max_dims:
        raise UnsupportedDimensionError(
            f"dimension {dim} outside table range 1..{table.max_dims}"
        )
    word = _sobol_words(np.array([index], dtype=np.uint64), (dim,), table)
    return int(word[0, 0])


def _sobol_words(indices: np.ndarray, dims, table: DirectionTable) -> np.ndarray:
    """Vectorized digit words: (n,) indices x dims tuple -> (n, len(dims)) uint32."""
    idx = np.asarray(indices, dtype=np.uint64)
    cols = table.columns[np.asarray(dims) - 1]  # (s, BITS)
    out = np.zeros((idx.shape[0], cols.shape[0]), dtype=np.uint32)
    for b in range(BITS):
        sel = ((idx >> np.uint64(b)) & np.uint64(1)).astype(np.uint32)
        out ^= sel[:, None] * cols[None, :, b]
    return out


# ---------------------------------------------------------------------------
# Randomization: Owen scrambling and digital shift
# ---------------------------------------------------------------------------

_LEVELS = np.arange(BITS, dtype=U64).reshape(BITS, 1, 1)
_PREFIX_SHIFTS = (U64(BITS) - _LEVELS).astype(U64)
_SCRAMBLE_CHUNK = 1 << 18  # cap on 32 * n * s working-set elements


def _node_keys(words: np.ndarray) -> np.ndarray:
    """Permutation-tree node ids for every (level, point, dim) triple.

    Node identity is the (level, input-prefix-above-level) pair packed into
    one integer; words hold 32-bit values in uint64, so the level-0 shift by
    32 cleanly produces the empty prefix.
    """
    w = words.astype(U64)
    prefixes = w[None, :, :] >> _PREFIX_SHIFTS
    return (prefixes << U64(6)) | _LEVELS


def _owen_scramble_words(words: np.ndarray, dims, seed: int,
                         node: np.ndarray | None = None) -> np.ndarray:
    """Nested uniform scramble of digit words, one permutation tree per dim.

    The flip of output bit k is the low bit of a hash keyed by (seed, dim)
    and the k-bit input prefix above it, so it depends on nothing else; for a
    fixed key the map is a bijection and each tree node is an unbiased coin.
    """
    n, s = words.shape
    if node is None and BITS * n * s > _SCRAMBLE_CHUNK:
        rows = max(1, _SCRAMBLE_CHUNK // (BITS * s))
        return np.concatenate(
            [_owen_scramble_words(words[lo : lo + rows], dims, seed)
             for lo in range(0, n, rows)]
        )
    if node is None:
        node = _node_keys(words)
    dimkey = hash_fields(seed, np.asarray(dims, dtype=U64))  # (s,)
    h = mix64(dimkey[None, None, :] ^ node)
    flips = (h & U64(1)) << (U64(BITS - 1) - _LEVELS)
    return (words ^ np.bitwise_xor.reduce(flips, axis=0).astype(np.uint32))


def owen_scramble(word: int, dim: int, seed: int) -> int:
    """Scramble one 32-bit digit word with the (dim, seed) permutation tree."""
    arr = np.array([[word]], dtype=np.uint32)
    return int(_owen_scramble_words(arr, (dim,), seed)[0, 0])


def _shift_words(words: np.ndarray, dims, seed: int) -> np.ndarray:
    """Digital shift: XOR one (dim, seed)-keyed random word onto every point."""
    shift = hash_fields(seed, np.asarray(dims, dtype=U64), 0x5D1657A3)
    return words ^ (shift & U64(0xFFFFFFFF)).astype(np.uint32)[None, :]


def _words_to_unit(words: np.ndarray) -> np.ndarray:
    """Map digit words to (0,1); an all-zero word is nudged to 2^-33."""
    vals = words.astype(np.float64) * 2.0**-BITS
    vals[words == 0] = 2.0**-33
    return vals


# ---------------------------------------------------------------------------
# Generation front end
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=4)
def _net_block(s: int, n: int, start_index: int):
    """Digit words (and, for small blocks, node keys) of one index block.

    Rescramble-per-batch training reuses the same block thousands of times
    with fresh seeds, so the seed-independent parts are worth caching.
    """
    indices = np.arange(start_index, start_index + n, dtype=np.uint64)
    words = _sobol_words(indices, tuple(range(1, s + 1)), load_direction_table())
    node = _node_keys(words) if BITS * n * s <= _SCRAMBLE_CHUNK else None
    words.setflags(write=False)
    if node is not None:
        node.setflags(write=False)
    return words, node


def generate(spec: SamplerSpec, n: int, start_index: int = 0) -> PointSet:
    """Generate n points of the stream described by `spec`.

    Net methods require n to be a power of two (the sample-size hypothesis of
    the scrambled-net error rate) and consume sequence indices
    [start_index, start_index + n).  The iid method draws each coordinate from
    a counter-based stream keyed by (seed, index, dim).
    """
    if n < 1:
        raise SampleCountError("need at least one point")
    if start_index < 0:
        raise ValueError("start_index must be non-negative")
    if spec.method == "iid":
        indices = np.arange(start_index, start_index + n, dtype=np.uint64)
        dims = np.arange(1, spec.s + 1, dtype=U64)
        h = hash_fields(spec.seed, indices[:, None], dims[None, :])
        values = uniforms_from_hash(h)
    else:
        if n & (n - 1):
            raise SampleCountError(
                f"net methods need a power-of-2 sample count, got {n}"
            )
        if start_index + n > MAX_INDEX:
            raise SampleCountError(
                f"index range [{start_index}, {start_index + n}) exceeds 2^{BITS}"
            )
        dims = tuple(range(1, spec.s + 1))
        words, node = _net_block(spec.s, n, start_index)
        if spec.method == "owen":
            words = _owen_scramble_words(words, dims, spec.seed, node=node)
        else:
            words = _shift_words(words, dims, spec.seed)
        values = _words_to_unit(words)
    return PointSet(values=values, spec=spec, start_index=start_index)


# ---------------------------------------------------------------------------
# Inverse normal CDF
# ---------------------------------------------------------------------------

# Acklam's rational approximation to the normal quantile (|error| < 1.2e-9),
# sharpened by one Halley step against the erfc-based CDF below.
_ACK_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACK_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)
_ACK_SPLIT = 0.02425


def normal_cdf(z):
    """Standard normal CDF via erfc (reference-quality in both tails)."""
    z = np.asarray(z, dtype=np.float64)
    out = 0.5 * erfc(-z / np.sqrt(2.0))
    return out if out.ndim else float(out)


def _acklam(p: np.ndarray) -> np.ndarray:
    """Rational approximation on p in (0, 0.5]; the tail branch is negative
    by construction of the coefficients."""
    a, b, c, d = _ACK_A, _ACK_B, _ACK_C, _ACK_D
    z = np.empty_like(p)
    lo = p < _ACK_SPLIT
    if np.any(lo):
        q = np.sqrt(-2.0 * np.log(p[lo]))
        num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
        den = (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        z[lo] = num / den
    mid = ~lo
    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = ((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]
        den = ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        z[mid] = q * num / den
    return z


def inverse_normal_cdf(u):
    """Normal quantile z with |Phi(z) - u| <= 1e-9 on (0,1).

    Rational approximation plus one Halley refinement through the erfc-based
    CDF; antisymmetric by construction (evaluated on min(u, 1-u)).
    """
    scalar = np.isscalar(u)
    u = np.asarray(u, dtype=np.float64)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("inverse normal CDF defined on the open interval (0,1)")
    flip = u > 0.5
    p = np.where(flip, 1.0 - u, u)
    z = _acklam(p)
    # Halley step for f(z) = Phi(z) - p: f'' / f' = -z.
    err = 0.5 * erfc(-z / np.sqrt(2.0)) - p
    dens = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    r = err / dens
    z = z - r / (1.0 + 0.5 * z * r)
    z = np.where(flip, -z, z)
    z = np.where(u == 0.5, 0.0, z)
    return float(z) if scalar else z


# ---------------------------------------------------------------------------
# L2 star discrepancy (Warnock)
# ---------------------------------------------------------------------------

def l2_star_discrepancy(points) -> float:
    """Warnock's closed form for the L2 star discrepancy of a point set.

    D^2 = 3^-s - (2/n) sum_i prod_j (1-x_ij^2)/2
        + (1/n^2) sum_{i,k} prod_j (1 - max(x_ij, x_kj)).
    """
    x = points.values if isinstance(points, PointSet) else np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("need an (n, s) block with n >= 1")
    n, s = x.shape
    term1 = 3.0 ** (-s)
    term2 = np.prod((1.0 - x * x) / 2.0, axis=1).sum() * (2.0 / n)
    pair = np.ones((n, n))
    for j in range(s):
        pair *= 1.0 - np.maximum(x[:, j][:, None], x[:, j][None, :])
    term3 = pair.sum() / (n * n)
    return float(np.sqrt(max(term1 - term2 + term3, 0.0)))
