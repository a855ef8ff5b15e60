"""Quadrature rules: Monte Carlo, polynomial lattice rules and their randomizations.

Polynomial lattice rules live over GF(b).  Polynomials are stored as
integers whose base-``b`` digits are the coefficients (digit ``i`` belongs
to ``z**i``).  A rule with modulus ``p`` (degree ``m``) and generating
vector ``q`` has the ``n = b**m`` points

    x_h = (v(h q_1 / p), ..., v(h q_d / p)),   h = 0 .. n-1,

where ``v`` keeps the first ``m`` Laurent digits of a rational function and
reads them as a base-``b`` fraction.

Generating vectors are built component by component (CBC) with the exact
worst-case error in a product kernel as criterion.  When ``p`` is
irreducible, every candidate permutes the same one-dimensional point set
along the cyclic group GF(b**m)*, so the criterion of all candidates is a
cyclic correlation; it is evaluated with FFTs.  Near-ties (within the
rounding level of the criterion) go to the smallest polynomial.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.fft

from .errors import DiscretizationError, DomainError, UnsupportedSpaceError
from .tensor_spaces import ProductFunction, ProductKernel, integrate_exact

__all__ = [
    "QuadratureRule",
    "PolynomialLattice",
    "RandomizedRuleFamily",
    "monte_carlo_rule",
    "default_modulus",
    "is_irreducible",
    "plr_points",
    "interlace",
    "digital_shift",
    "owen_scramble",
    "wce",
    "shift_averaged_wce",
    "scrambled_wce",
    "scrambled_kernel_table",
    "cbc_construct",
    "randomized_error",
    "format_generating_vector",
    "parse_generating_vector",
]

# primitive polynomials over GF(2), bit i = coefficient of z**i
_BINARY_MODULI = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10000011,
    8: 0b100011101,
    9: 0b1000010001,
    10: 0b10000001001,
    11: 0b100000000101,
    12: 0b1000001010011,
    13: 0b10000000011011,
    14: 0b100010001000011,
    15: 0b1000000000000011,
    16: 0b10001000000001011,
    17: 0b100000000000001001,
    18: 0b1000000000010000001,
    19: 0b10000000000000100111,
    20: 0b100000000000000001001,
}

# near-tie bands relative to the size of the criterion terms: direct sums
# are accurate to a few ulps, FFT correlations lose about log2(n) more
_TIE_RTOL_DIRECT = 1e-15
_TIE_RTOL_FFT = 1e-14
_WCE_CLAMP = -1e-10
_MAX_CYCLIC_POINTS = 2**14


def digit_depth(b: int) -> int:
    """Number of base-``b`` digits kept by digit operations (52 bits)."""
    return int(math.floor(52 / math.log2(b) + 1e-12))


# ---------------------------------------------------------------------------
# GF(b)[z] arithmetic on digit arrays
# ---------------------------------------------------------------------------


def _to_digits(values, b: int, length: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64).copy()
    out = np.zeros(v.shape + (length,), dtype=np.int64)
    for i in range(length):
        out[..., i] = v % b
        v //= b
    return out


def _from_digits(digits: np.ndarray, b: int) -> np.ndarray:
    powers = b ** np.arange(digits.shape[-1], dtype=np.int64)
    return digits @ powers


def _degree(poly: int, b: int) -> int:
    deg = -1
    while poly:
        poly //= b
        deg += 1
    return deg


def _mulmod(a: np.ndarray, c: np.ndarray, p: np.ndarray, b: int) -> np.ndarray:
    """Digits of ``a * c mod p``; ``a`` is ``(..., m)``, ``c`` is ``(m,)``, ``p`` is monic ``(m+1,)``."""
    m = p.shape[0] - 1
    prod = np.zeros(a.shape[:-1] + (2 * m,), dtype=np.int64)
    for j in np.flatnonzero(c):
        prod[..., j : j + m] += a * c[j]
    prod %= b
    for deg in range(2 * m - 1, m - 1, -1):
        coef = prod[..., deg]
        if np.any(coef):
            prod[..., deg - m : deg + 1] -= coef[..., None] * p
            prod %= b
    return prod[..., :m]


def _polymod_power(base: np.ndarray, exponent: int, p: np.ndarray, b: int) -> np.ndarray:
    m = p.shape[0] - 1
    result = np.zeros(m, dtype=np.int64)
    result[0] = 1
    while exponent:
        if exponent & 1:
            result = _mulmod(result, base, p, b)
        base = _mulmod(base, base, p, b)
        exponent >>= 1
    return result


def _prime_factors(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        while n % d == 0:
            out.append(d)
            n //= d
        d += 1
    if n > 1:
        out.append(n)
    return sorted(set(out))


def _check_base(b: int) -> None:
    if b < 2 or any(b % d == 0 for d in range(2, int(math.isqrt(b)) + 1)):
        raise DomainError("base must be prime")


def _modulus_digits(modulus: int, b: int) -> np.ndarray:
    m = _degree(modulus, b)
    p = _to_digits(modulus, b, m + 1)
    if p[m] != 1:
        raise DomainError("modulus must be monic")
    return p


def _element_order_is_full(elem: np.ndarray, p: np.ndarray, b: int) -> bool:
    m = p.shape[0] - 1
    n1 = b**m - 1
    one = np.zeros(m, dtype=np.int64)
    one[0] = 1
    if not np.array_equal(_polymod_power(elem, n1, p, b), one):
        return False
    return all(not np.array_equal(_polymod_power(elem, n1 // q, p, b), one) for q in _prime_factors(n1))


def is_irreducible(modulus: int, b: int) -> bool:
    """Trial division by all monic polynomials of degree ``<= m/2``."""
    _check_base(b)
    p = _modulus_digits(modulus, b)
    m = p.shape[0] - 1
    if m == 1:
        return True
    if p[0] == 0:
        return False
    for d in range(1, m // 2 + 1):
        for low in range(b**d):
            divisor = _to_digits(low + b**d, b, d + 1)
            # remainder of p by divisor
            rem = p.copy()
            for deg in range(m, d - 1, -1):
                coef = rem[deg] % b
                if coef:
                    rem[deg - d : deg + 1] -= coef * divisor
                    rem %= b
            if not np.any(rem[:d]):
                return False
    return True


@functools.lru_cache(maxsize=None)
def default_modulus(b: int, m: int) -> int:
    """A primitive degree-``m`` polynomial over GF(b) (table for ``b = 2``, search otherwise)."""
    _check_base(b)
    if m < 1:
        raise DomainError("m must be positive")
    if b == 2 and m in _BINARY_MODULI:
        return _BINARY_MODULI[m]
    z = np.zeros(m, dtype=np.int64)
    if m > 1:
        z[1] = 1
    for low in range(1, b**m):
        modulus = b**m + low
        p = _modulus_digits(modulus, b)
        elem = z if m > 1 else np.array([(-p[0]) % b])
        if _element_order_is_full(elem, p, b):
            return modulus
    raise DiscretizationError(f"no primitive polynomial found for b={b}, m={m}")


@functools.lru_cache(maxsize=32)
def _field_tables(b: int, m: int, modulus: int):
    """Powers of a generator of GF(b**m)* and the Laurent values ``v(a / p)`` for all ``a``."""
    p = _modulus_digits(modulus, b)
    n = b**m
    values = _laurent_values(np.arange(n), p, b)
    if not is_irreducible(modulus, b):
        return None, values
    gen = None
    for cand in range(1, n):
        elem = _to_digits(cand, b, m)
        if n == 2 or _element_order_is_full(elem, p, b):
            gen = elem
            break
    powers = np.zeros(n - 1, dtype=np.int64)
    cur = np.zeros(m, dtype=np.int64)
    cur[0] = 1
    for a in range(n - 1):
        powers[a] = _from_digits(cur, b)
        cur = _mulmod(cur, gen, p, b)
    return powers, values


def _laurent_values(encodings: np.ndarray, p: np.ndarray, b: int) -> np.ndarray:
    """``v(a(z) / p(z))`` with ``m`` Laurent digits, for polynomials ``a`` of degree < m."""
    m = p.shape[0] - 1
    rem = np.zeros((encodings.size, m + 1), dtype=np.int64)
    rem[:, :m] = _to_digits(encodings, b, m)
    out = np.zeros(encodings.size)
    for k in range(1, m + 1):
        rem[:, 1:] = rem[:, :-1].copy()
        rem[:, 0] = 0
        u = rem[:, m].copy()
        rem = (rem - u[:, None] * p[None, :]) % b
        out += u * float(b) ** (-k)
    return out


# ---------------------------------------------------------------------------
# rules
# ---------------------------------------------------------------------------


@dataclass
class QuadratureRule:
    """Nodes in ``[0, 1)^s`` with real coefficients and a provenance tag.

    ``active_sets`` optionally records, per node, the coordinates that may
    differ from the default value (used by the cost models).
    """

    nodes: np.ndarray
    weights: np.ndarray
    provenance: str = "plr"
    active_sets: list[frozenset] | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.nodes.shape[0] != self.weights.size or self.weights.size < 1:
            raise DomainError("need at least one node and one coefficient per node")
        if np.any(self.nodes < 0) or np.any(self.nodes >= 1):
            raise DomainError("nodes must lie in [0, 1)^s")

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def s(self) -> int:
        return self.nodes.shape[1]

    def apply(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(self.weights @ np.asarray(f(self.nodes), dtype=float))


def monte_carlo_rule(n: int, s: int, seed: int, replicate: int = 0) -> QuadratureRule:
    rng = np.random.default_rng([seed, replicate])
    return QuadratureRule(rng.random((n, s)), np.full(n, 1.0 / n), "mc")


@dataclass(frozen=True)
class PolynomialLattice:
    """Polynomial lattice over GF(b) with ``b**m`` points.

    ``generating_vector`` holds ``interlace * s`` polynomials (internal
    dimension); consecutive blocks of ``interlace`` coordinates are merged
    by digit interlacing.
    """

    b: int
    m: int
    modulus: int
    generating_vector: tuple[int, ...]
    interlace: int = 1

    def __post_init__(self) -> None:
        _check_base(self.b)
        if _degree(self.modulus, self.b) != self.m:
            raise DomainError("modulus degree must equal m")
        if any(not 0 <= q < self.b**self.m for q in self.generating_vector):
            raise DomainError("generating polynomials must have degree < m")
        if len(self.generating_vector) % self.interlace:
            raise DomainError("internal dimension must be a multiple of the interlacing factor")

    @property
    def n(self) -> int:
        return self.b**self.m

    @property
    def s(self) -> int:
        return len(self.generating_vector) // self.interlace

    def internal_points(self) -> np.ndarray:
        """Points in the internal dimension ``interlace * s`` (before interlacing)."""
        p = _modulus_digits(self.modulus, self.b)
        h = _to_digits(np.arange(self.n), self.b, self.m)
        cols = []
        for q in self.generating_vector:
            prod = _mulmod(h, _to_digits(q, self.b, self.m), p, self.b)
            cols.append(_laurent_values(_from_digits(prod, self.b), p, self.b))
        return np.column_stack(cols) if cols else np.zeros((self.n, 0))

    def rule(self) -> QuadratureRule:
        tag = "plr" if self.interlace == 1 else "interlaced-plr"
        return QuadratureRule(plr_points(self), np.full(self.n, 1.0 / self.n), tag, info={"lattice": self})


def plr_points(lattice: PolynomialLattice) -> np.ndarray:
    """The ``b**m`` points of the rule (interlaced when ``interlace > 1``)."""
    pts = lattice.internal_points()
    if lattice.interlace > 1:
        pts = interlace(pts, lattice.interlace, lattice.b)
    return pts


# ---------------------------------------------------------------------------
# digit operations
# ---------------------------------------------------------------------------


def _point_digits(points: np.ndarray, b: int, depth: int) -> np.ndarray:
    """Base-``b`` digits ``(..., depth)`` of points in [0, 1), most significant first."""
    x = np.asarray(points, dtype=float)
    if b == 2:
        ints = np.floor(x * 2.0**depth).astype(np.uint64)
        shifts = np.arange(depth - 1, -1, -1, dtype=np.uint64)
        return ((ints[..., None] >> shifts) & np.uint64(1)).astype(np.int64)
    ints = np.floor(x * float(b) ** depth).astype(np.int64)
    ints = np.minimum(ints, b**depth - 1)
    out = np.zeros(x.shape + (depth,), dtype=np.int64)
    for i in range(depth - 1, -1, -1):
        out[..., i] = ints % b
        ints //= b
    return out


def _digits_to_points(digits: np.ndarray, b: int) -> np.ndarray:
    depth = digits.shape[-1]
    ints = np.zeros(digits.shape[:-1], dtype=np.int64)
    for i in range(depth):
        ints = ints * b + digits[..., i]
    return ints / float(b) ** depth


def interlace(points, r: int, b: int = 2) -> np.ndarray:
    """Digit interlacing of consecutive blocks of ``r`` coordinates.

    Digit ``i`` of block member ``j`` lands at position ``(i - 1) r + j``;
    the result keeps ``digit_depth(b)`` digits.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if r < 1 or pts.shape[1] % r:
        raise DomainError("dimension must be divisible by r")
    if r == 1:
        return pts.copy()
    depth = digit_depth(b)
    per = -(-depth // r)
    digits = _point_digits(pts, b, per)
    n, d = pts.shape
    blocks = digits.reshape(n, d // r, r, per)
    merged = np.swapaxes(blocks, 2, 3).reshape(n, d // r, r * per)[..., :depth]
    return _digits_to_points(merged, b)


def digital_shift(points, shift, b: int = 2) -> np.ndarray:
    """Digitwise addition modulo ``b`` of ``shift`` to every point."""
    depth = digit_depth(b)
    d = _point_digits(np.asarray(points, dtype=float), b, depth)
    sd = _point_digits(np.asarray(shift, dtype=float), b, depth)
    return _digits_to_points((d + sd) % b, b)


_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mix(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = z + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def _keyed(*keys) -> np.ndarray:
    """Counter-based hash of a tuple of integer keys (arrays broadcast)."""
    h = np.zeros((), dtype=np.uint64)
    for k in keys:
        h = _mix(h ^ np.asarray(k, dtype=np.uint64))
    return h


def owen_scramble(points, b: int, seed: int, replicate: int) -> np.ndarray:
    """Nested uniform scrambling of every coordinate.

    The permutation applied to digit ``l`` of coordinate ``j`` is a pure
    function of ``(seed, replicate, j, l, first l digits)``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    depth = digit_depth(b)
    digits = _point_digits(pts, b, depth)
    n, s = pts.shape
    out = np.empty_like(digits)
    coord = np.arange(s, dtype=np.uint64)[None, :]
    prefix = np.zeros((n, s), dtype=np.uint64)
    base = _keyed(seed & 0xFFFFFFFFFFFFFFFF, replicate)
    for level in range(depth):
        key = _keyed(base, coord, level, prefix)
        d = digits[..., level]
        if b == 2:
            out[..., level] = d ^ (key & np.uint64(1)).astype(np.int64)
        else:
            # random permutation of 0..b-1: rank b hashed values
            draws = _mix(key[..., None] ^ np.arange(1, b + 1, dtype=np.uint64))
            perm = np.argsort(draws, axis=-1, kind="stable")
            out[..., level] = np.take_along_axis(perm, d[..., None], axis=-1)[..., 0]
        prefix = prefix * np.uint64(b) + d.astype(np.uint64)
    return _digits_to_points(out, b)


# ---------------------------------------------------------------------------
# worst-case errors
# ---------------------------------------------------------------------------


def _clamp(e2: float) -> float:
    if e2 < _WCE_CLAMP:
        raise DiscretizationError(f"negative squared worst-case error {e2:.3e}")
    return math.sqrt(max(e2, 0.0))


def wce_squared(rule: QuadratureRule, kernel: ProductKernel, block: int = 1024) -> float:
    """``int int K - 2 sum_i w_i int K(t_i, .) + sum_ik w_i w_k K(t_i, t_k)``."""
    if rule.s != kernel.s:
        raise DomainError("rule and kernel dimensions differ")
    w = rule.weights
    total = kernel.double_integral() - 2.0 * float(w @ kernel.mean(rule.nodes))
    for start in range(0, rule.n, block):
        rows = slice(start, start + block)
        total += float(w[rows] @ kernel.gram(rule.nodes[rows], rule.nodes) @ w)
    return total


def wce(rule: QuadratureRule, kernel: ProductKernel) -> float:
    """Exact worst-case error of a linear rule in ``H(kernel)``."""
    return _clamp(wce_squared(rule, kernel))


def _xor_shift_average(space, gamma: float, constant: float, b: int, u: np.ndarray, grid: int = 1 << 14):
    """``int (constant + k(t, t (+) u)) dt`` for each digit difference ``u``."""
    t = (np.arange(grid) + 0.5) / grid
    out = np.empty(u.shape)
    flat = u.ravel()
    res = out.ravel()
    for i, du in enumerate(flat):
        tt = digital_shift(t, np.full_like(t, du), b)
        res[i] = constant + float(np.mean(space.kernel(gamma, t, tt)))
    return res.reshape(u.shape)


def shift_averaged_wce(rule: QuadratureRule, kernel: ProductKernel, b: int = 2, grid: int = 1 << 14) -> float:
    """Root mean square of the worst-case error over uniform digital shifts.

    Uses the shift-invariant kernel ``E_sigma K(x (+) sigma, y (+) sigma)``
    evaluated by a midpoint rule over the shift.
    """
    if rule.s != kernel.s:
        raise DomainError("rule and kernel dimensions differ")
    w = rule.weights
    n = rule.n
    depth = digit_depth(b)
    digits = _point_digits(rule.nodes, b, depth)
    total = np.ones((n, n))
    for j in range(rule.s):
        diff = (digits[:, None, j, :] - digits[None, :, j, :]) % b
        dvals = _digits_to_points(diff, b)
        uniq, inv = np.unique(dvals, return_inverse=True)
        avg = _xor_shift_average(kernel.space, kernel.weights.weight(j + 1), kernel.constant, b, uniq, grid)
        total *= avg[inv].reshape(n, n)
    e2 = float(w @ total @ w) - kernel.double_integral()
    return _clamp(e2)


# ---------------------------------------------------------------------------
# mean square worst-case error under nested scrambling
# ---------------------------------------------------------------------------
#
# After scrambling, a pair of points whose (internal) coordinates share
# exactly l leading digits becomes a random pair that shares l random
# digits, differs in digit l + 1 and is independent beyond.  The scrambled
# kernel therefore only depends on the vector of shared-prefix lengths.  On
# {x < y} the homogeneous kernels (Anchored at 0 or 1, ANOVA, Korobov) are
# polynomials, so each table entry is a finite combination of joint digit
# moments.  Moments of sums of independent digit contributions multiply as
# exponential generating functions.


def _egf_product(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    deg = a.shape[0]
    out = np.zeros_like(a)
    for i in range(deg):
        for j in range(deg - i):
            if a[i, j] != 0.0:
                out[i:, j:] += a[i, j] * c[: deg - i, : deg - j]
    return out


@functools.lru_cache(maxsize=None)
def _digit_egfs(b: int, degree: int) -> dict[str, np.ndarray]:
    """Divided joint moments ``E[d1**i d2**j] / (i! j!)`` of one digit pair, per pair type."""
    d = np.arange(b, dtype=float)
    fact = np.array([math.factorial(k) for k in range(degree + 1)], dtype=float)
    pw = d[:, None] ** np.arange(degree + 1)[None, :]
    pairs = {
        "shared": [(u, u) for u in range(b)],
        "independent": [(u, v) for u in range(b) for v in range(b)],
        "ordered": [(u, v) for u in range(b) for v in range(b) if u < v],
        "distinct": [(u, v) for u in range(b) for v in range(b) if u != v],
    }
    out = {}
    for name, pp in pairs.items():
        mom = np.mean([np.outer(pw[u], pw[v]) for u, v in pp], axis=0)
        out[name] = mom / np.outer(fact, fact)
    return out


def _scaled_egf(egf: np.ndarray, weight: float) -> np.ndarray:
    deg = egf.shape[0]
    k = np.arange(deg)
    return egf * weight ** (k[:, None] + k[None, :])


@functools.lru_cache(maxsize=None)
def _upper_polynomial(space) -> np.ndarray:
    """Coefficients ``C[a, c]`` with ``k_1(x, y) = sum C[a, c] x**a y**c`` for ``x < y``."""
    if not space.homogeneous:
        raise UnsupportedSpaceError("the scrambled criterion needs a homogeneous flavor")
    degree = 2 * space.r
    grid = (np.arange(1, 24) - 0.5) / 23
    x, y = np.meshgrid(grid, grid, indexing="ij")
    keep = x < y
    x, y = x[keep], y[keep]
    powers = [(a, c) for a in range(degree + 1) for c in range(degree + 1 - a)]
    design = np.column_stack([x**a * y**c for a, c in powers])
    target = space.kernel(1.0, x, y)
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    if np.max(np.abs(design @ coef - target)) > 1e-10 * max(1.0, np.max(np.abs(target))):
        raise UnsupportedSpaceError(f"{space} is not a polynomial kernel off the diagonal")
    table = np.zeros((degree + 1, degree + 1))
    for (a, c), v in zip(powers, coef):
        table[a, c] = v
    return table


@functools.lru_cache(maxsize=None)
def scrambled_kernel_table(space, b: int, m: int, r: int = 1) -> np.ndarray:
    """Scramble-averaged ``k_1`` indexed by shared-prefix lengths of ``r`` interlaced digits.

    Axis ``i`` holds the prefix length ``0 .. m - 1`` of internal coordinate
    ``i`` of a block; index ``m`` means the coordinates agree in all digits.
    """
    poly = _upper_polynomial(space)
    degree = poly.shape[0] - 1
    fact = np.array([math.factorial(k) for k in range(degree + 1)], dtype=float)
    egfs = _digit_egfs(b, degree)
    depth = digit_depth(b)
    table = np.empty((m + 1,) * r)
    diag = None
    for idx in np.ndindex(*table.shape):
        if all(l == m for l in idx):
            if diag is None:
                t, w = np.polynomial.legendre.leggauss(40)
                t = 0.5 * (t + 1)
                diag = float(0.5 * w @ space.kernel(1.0, t, t))
            table[idx] = diag
            continue
        first = min((l * r + i + 1) for i, l in enumerate(idx) if l < m)
        egf = np.zeros((degree + 1, degree + 1))
        egf[0, 0] = 1.0
        for pos in range(1, depth + 1):
            i, j = (pos - 1) % r, (pos - 1) // r + 1
            l = idx[i]
            if l == m or j <= l:
                kind = "shared"
            elif pos == first:
                kind = "ordered"
            elif j == l + 1:
                kind = "distinct"
            else:
                kind = "independent"
            egf = _egf_product(egf, _scaled_egf(egfs[kind], float(b) ** (-pos)))
        moments = egf * np.outer(fact, fact)
        table[idx] = float(np.sum(poly * moments))
    return table


def _prefix_lengths(values: np.ndarray, b: int, m: int) -> np.ndarray:
    """Leading zero digits of m-digit values (``m`` for zero)."""
    ints = np.rint(np.asarray(values) * float(b) ** m).astype(np.int64)
    return m - np.searchsorted(b ** np.arange(m + 1, dtype=np.int64), ints, side="right")


def scrambled_wce(lattice: PolynomialLattice, kernel: ProductKernel) -> float:
    """Root mean square over nested scramblings of the worst-case error of the lattice rule.

    The scrambling acts on the internal coordinates, followed by
    interlacing.  Uses that the point set is a group under digitwise
    addition, so the double sum collapses to ``n`` terms.
    """
    if lattice.s > kernel.s:
        raise DomainError("kernel has fewer coordinates than the rule")
    b, m, r = lattice.b, lattice.m, lattice.interlace
    pts = lattice.internal_points()
    lengths = _prefix_lengths(pts, b, m)
    table = scrambled_kernel_table(kernel.space, b, m, r)
    total = np.ones(lattice.n)
    reference = 1.0
    for t in range(lattice.s):
        gamma = kernel.weights.weight(t + 1)
        block = tuple(lengths[:, t * r + i] for i in range(r))
        total *= kernel.constant + gamma * table[block]
        reference *= kernel.constant + kernel.space.kernel_double_integral(gamma)
    return _clamp(float(np.mean(total)) - reference)


# ---------------------------------------------------------------------------
# CBC construction
# ---------------------------------------------------------------------------


def _pick(values: np.ndarray, encodings: np.ndarray, scale: float, rtol: float = _TIE_RTOL_DIRECT) -> int:
    """Index of the minimum; near-ties go to the smallest encoding."""
    best = float(values.min())
    tied = np.flatnonzero(values <= best + rtol * max(scale, abs(best)))
    return int(tied[np.argmin(encodings[tied])])


def _cyclic_double_sum(pmat: np.ndarray, yvals: np.ndarray, omega, chunk: int = 256) -> np.ndarray:
    """``S(c) = sum_{a,a'} P[a,a'] omega(Y[a+c], Y[a'+c])`` for every shift ``c`` (indices mod N)."""
    nn = yvals.size
    acc = np.zeros(nn // 2 + 1, dtype=complex)
    ar = np.arange(nn)
    for start in range(0, nn, chunk):
        delta = np.arange(start, min(start + chunk, nn))
        cols = (ar[None, :] + delta[:, None]) % nn
        d = pmat[ar[None, :], cols]
        e = omega(yvals[ar][None, :], yvals[cols])
        acc += np.sum(np.conj(scipy.fft.rfft(d, axis=1)) * scipy.fft.rfft(e, axis=1), axis=0)
    return scipy.fft.irfft(acc, n=nn)


def _cyclic_single_sum(vec: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """``sum_a vec[a] vals[a + c]`` for every ``c``."""
    nn = vec.size
    return scipy.fft.irfft(np.conj(scipy.fft.rfft(vec)) * scipy.fft.rfft(vals), n=nn)


def _factor_functions(kernel: ProductKernel, coord: int):
    gamma = kernel.weights.weight(coord)
    space, const = kernel.space, kernel.constant

    def omega(x, y):
        return const + space.kernel(gamma, x, y)

    def mu(x):
        return const + space.kernel_mean(gamma, x)

    return omega, mu, const + space.kernel_double_integral(gamma)


def cbc_construct(
    b: int,
    m: int,
    s: int,
    kernel: ProductKernel,
    interlace_r: int = 1,
    modulus: int | None = None,
    candidates: Sequence[int] | None = None,
    max_candidates: int = 255,
    criterion: str = "wce",
) -> PolynomialLattice:
    """Greedy component-by-component generating vector.

    For internal coordinate ``j = 1 .. interlace_r * s`` the polynomial
    minimizing the worst-case error of the (interlaced) rule in ``kernel``
    restricted to its first ``ceil(j / interlace_r)`` coordinates is chosen.
    ``candidates`` restricts the search (default: all nonzero polynomials of
    degree < m).

    Irreducible moduli without interlacing use the exact cyclic evaluation
    over all candidates.  Otherwise each candidate costs O(n**2); when more
    than ``max_candidates`` polynomials are eligible, a reproducible random
    subset of that size (always containing 1) is searched per coordinate.

    ``criterion="scrambled"`` replaces the worst-case error of the rule by
    its root mean square over nested scramblings (see ``scrambled_wce``);
    this search always covers every candidate.
    """
    _check_base(b)
    if kernel.s < s:
        raise DomainError("kernel has fewer coordinates than requested")
    modulus = default_modulus(b, m) if modulus is None else int(modulus)
    n = b**m
    powers, values = _field_tables(b, m, modulus)
    if criterion == "scrambled":
        cand = np.arange(1, n) if candidates is None else np.asarray(sorted(set(candidates)), dtype=np.int64)
        chosen = _cbc_scrambled(b, m, s, kernel, interlace_r, modulus, cand, powers, values)
        return PolynomialLattice(b, m, modulus, tuple(int(q) for q in chosen), interlace_r)
    if criterion != "wce":
        raise DomainError("criterion must be 'wce' or 'scrambled'")
    fast = powers is not None and interlace_r == 1 and candidates is None and n > 2
    if fast:
        chosen = _cbc_cyclic(b, m, s, kernel, powers, values)
    else:
        cand = np.arange(1, n) if candidates is None else np.asarray(sorted(set(candidates)), dtype=np.int64)
        if np.any(cand <= 0) or np.any(cand >= n):
            raise DomainError("candidates must be nonzero polynomials of degree < m")
        chosen = _cbc_direct(b, m, s, kernel, interlace_r, modulus, cand, values, max_candidates)
    return PolynomialLattice(b, m, modulus, tuple(int(q) for q in chosen), interlace_r)


def _cbc_cyclic(b, m, s, kernel, powers, values):
    n = b**m
    nn = n - 1
    order = powers  # element with discrete log a
    yvals = values[order]
    # first coordinate: every candidate permutes the same point set, so all
    # tie and the identity polynomial (discrete log 0) wins
    omega, mu, dbl = _factor_functions(kernel, 1)
    chosen = [int(order[0])]
    if s == 1:
        return chosen
    if n > _MAX_CYCLIC_POINTS:
        raise DomainError(f"CBC is limited to n <= {_MAX_CYCLIC_POINTS} points in dimension > 1")
    x = np.r_[0.0, yvals]
    pmat = omega(x[:, None], x[None, :])
    mvec = mu(x)
    const = dbl
    for coord in range(2, s + 1):
        omega, mu, dbl = _factor_functions(kernel, coord)
        # contributions of h = 0 (the origin) and of all other points
        w00 = float(omega(0.0, 0.0))
        mean_part = mvec[0] * float(mu(0.0)) + _cyclic_single_sum(mvec[1:], mu(yvals))
        cross = 2.0 * _cyclic_single_sum(pmat[0, 1:], omega(np.zeros(nn), yvals))
        inner = _cyclic_double_sum(pmat[1:, 1:], yvals, omega)
        double_part = pmat[0, 0] * w00 + cross + inner
        e2 = const * dbl - 2.0 / n * mean_part + double_part / n**2
        scale = const * dbl + 2.0 / n * np.abs(mean_part).max() + np.abs(double_part).max() / n**2
        c = _pick(e2, order, scale, _TIE_RTOL_FFT)
        chosen.append(int(order[c]))
        if coord == s:
            break
        x = np.r_[0.0, yvals[(np.arange(nn) + c) % nn]]
        pmat *= omega(x[:, None], x[None, :])
        mvec *= mu(x)
        const *= dbl
    return chosen


def _candidate_subset(cand: np.ndarray, limit: int, b: int, m: int, j: int) -> np.ndarray:
    if cand.size <= limit:
        return cand
    rng = np.random.default_rng([b, m, j])
    rest = rng.choice(cand[cand != 1], size=limit - 1, replace=False)
    return np.sort(np.r_[cand[cand == 1][:1], rest]).astype(np.int64)


def _cbc_direct(b, m, s, kernel, r, modulus, cand_all, values, max_candidates):
    n = b**m
    p = _modulus_digits(modulus, b)
    h = _to_digits(np.arange(n), b, m)
    pmat = np.ones((n, n))
    mvec = np.ones(n)
    const = 1.0
    chosen: list[int] = []
    block_cols: list[np.ndarray] = []
    for j in range(r * s):
        coord = j // r + 1
        omega, mu, dbl = _factor_functions(kernel, coord)
        cand = _candidate_subset(cand_all, max_candidates, b, m, j)
        scores = np.empty(cand.size)
        xs = []
        for i, q in enumerate(cand):
            col = values[_from_digits(_mulmod(h, _to_digits(q, b, m), p, b), b)]
            stack = block_cols + [col] + [np.zeros(n)] * (r - len(block_cols) - 1)
            x = interlace(np.column_stack(stack), r, b)[:, 0] if r > 1 else col
            xs.append(x)
            scores[i] = const * dbl - 2.0 / n * float(mvec @ mu(x)) + float(
                np.sum(pmat * omega(x[:, None], x[None, :]))
            ) / n**2
        k = _pick(scores, cand, const * dbl)
        chosen.append(int(cand[k]))
        block_cols.append(values[_from_digits(_mulmod(h, _to_digits(cand[k], b, m), p, b), b)])
        if len(block_cols) == r:
            x = xs[k]
            pmat *= omega(x[:, None], x[None, :])
            mvec *= mu(x)
            const *= dbl
            block_cols = []
    return chosen


def _cbc_scrambled(b, m, s, kernel, r, modulus, cand, powers, values):
    n = b**m
    lv = _prefix_lengths(values, b, m)
    table = scrambled_kernel_table(kernel.space, b, m, r)
    cyclic = powers is not None and cand.size == n - 1
    if cyclic:
        nn = n - 1
        shifts = np.arange(nn)
        lcycle = lv[powers]
        encodings = powers
    else:
        p = _modulus_digits(modulus, b)
        h = _to_digits(np.arange(n), b, m)
        encodings = cand

    def lengths_of(batch):
        if cyclic:
            idx = (np.arange(nn)[None, :] + batch[:, None]) % nn
            return np.concatenate([np.full((batch.size, 1), m), lcycle[idx]], axis=1)
        return np.stack([lv[_from_digits(_mulmod(h, _to_digits(q, b, m), p, b), b)] for q in encodings[batch]])

    prev = np.ones(n)
    reference = 1.0
    partial: list[np.ndarray] = []
    chosen: list[int] = []
    count = encodings.size
    chunk = max(1, (1 << 22) // n)
    for j in range(r * s):
        coord = j // r + 1
        gamma = kernel.weights.weight(coord)
        factor = kernel.constant + gamma * table
        level = reference * (kernel.constant + kernel.space.kernel_double_integral(gamma))
        scores = np.empty(count)
        for start in range(0, count, chunk):
            batch = np.arange(start, min(start + chunk, count))
            lc = lengths_of(batch)
            pad = [np.full_like(lc, m)] * (r - len(partial) - 1)
            key = tuple(np.broadcast_to(a, lc.shape) for a in partial) + (lc,) + tuple(pad)
            scores[start : start + batch.size] = np.mean(prev[None, :] * factor[key], axis=1) - level
        k = _pick(scores, encodings, level)
        chosen.append(int(encodings[k]))
        partial.append(lengths_of(np.array([k]))[0])
        if len(partial) == r:
            prev = prev * factor[tuple(partial)]
            reference = level
            partial = []
    return chosen


# ---------------------------------------------------------------------------
# randomized rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RandomizedRuleFamily:
    """Randomizations of a polynomial lattice rule.

    ``kind`` is ``"shift"`` (uniform digital shift) or ``"owen"`` (nested
    scrambling of the internal coordinates, followed by interlacing).
    """

    lattice: PolynomialLattice
    kind: str
    seed: int

    def __post_init__(self) -> None:
        if self.kind not in ("shift", "owen"):
            raise DomainError("randomization kind must be 'shift' or 'owen'")

    def realization(self, replicate: int) -> QuadratureRule:
        lat = self.lattice
        pts = lat.internal_points()
        if self.kind == "owen":
            pts = owen_scramble(pts, lat.b, self.seed, replicate)
            tag = "scrambled-plr" if lat.interlace == 1 else "interlaced-scrambled-plr"
        else:
            rng = np.random.default_rng([self.seed & 0xFFFFFFFF, self.seed >> 32, replicate])
            pts = digital_shift(pts, rng.random(pts.shape[1])[None, :], lat.b)
            tag = "shifted-plr"
        if lat.interlace > 1:
            pts = interlace(pts, lat.interlace, lat.b)
        return QuadratureRule(pts, np.full(lat.n, 1.0 / lat.n), tag, info={"replicate": replicate})


@dataclass(frozen=True)
class RandomizedError:
    rmse: float
    bias: float
    std: float
    replicates: int
    estimates: tuple[float, ...]


def randomized_error(
    family: RandomizedRuleFamily, f: ProductFunction, kernel: ProductKernel, replicates: int
) -> RandomizedError:
    """Sample RMSE and mean bias of ``Q(f) - I(f)`` over independent realizations."""
    if replicates < 2:
        raise DomainError("need at least two replicates")
    exact = integrate_exact(kernel, f)
    est = np.array([family.realization(k).apply(f) for k in range(replicates)])
    err = est - exact
    return RandomizedError(
        rmse=float(np.sqrt(np.mean(err**2))),
        bias=float(np.mean(err)),
        std=float(np.std(err, ddof=1)),
        replicates=replicates,
        estimates=tuple(float(e) for e in est),
    )


# ---------------------------------------------------------------------------
# text format of generating vectors
# ---------------------------------------------------------------------------


def format_generating_vector(lattice: PolynomialLattice) -> str:
    """Header line plus one polynomial per line as base-b digits (lowest degree first)."""
    lines = [f"# b={lattice.b} m={lattice.m} modulus={_digit_string(lattice.modulus, lattice.b, lattice.m + 1)} interlace={lattice.interlace}"]
    lines += [_digit_string(q, lattice.b, lattice.m) for q in lattice.generating_vector]
    return "\n".join(lines) + "\n"


def _digit_string(value: int, b: int, length: int) -> str:
    return "".join(str(d) for d in _to_digits(value, b, length))


def parse_generating_vector(text: str) -> PolynomialLattice:
    header, *rows = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not header.startswith("#"):
        raise DomainError("missing generating-vector header")
    fields = dict(item.split("=", 1) for item in header[1:].split())
    b, m = int(fields["b"]), int(fields["m"])
    to_int = lambda digits: int(sum(int(d) * b**i for i, d in enumerate(digits)))  # noqa: E731
    modulus = to_int(fields["modulus"])
    q = tuple(to_int(row) for row in rows)
    return PolynomialLattice(b, m, modulus, q, int(fields.get("interlace", 1)))
