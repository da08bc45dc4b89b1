"""Exact dyadic arithmetic, bit strings and finite distributions over bit strings.

Distributions are stored densely: an integer numerator per outcome plus one shared
power-of-two exponent. Outcome index bit ``i`` is coordinate ``i``.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

DEFAULT_BUDGET = 25
_INT64_EXP_LIMIT = 60


class BudgetError(ValueError):
    """Raised when an enumeration would exceed the configured bit budget."""


def check_budget(bits: int, budget: int | None = None, what: str = "enumeration") -> None:
    limit = DEFAULT_BUDGET if budget is None else budget
    if bits > limit:
        raise BudgetError(f"{what} needs 2^{bits} cells, budget is 2^{limit}")


def tow(x: int) -> int:
    if x < 0:
        raise ValueError("tow is defined for x >= 0")
    out = 1
    for _ in range(x):
        out = 1 << out
    return out


def _trailing_zeros(v: int) -> int:
    return (v & -v).bit_length() - 1


class Dyadic:
    """Exact value num / 2^denom_exp kept in canonical form."""

    __slots__ = ("num", "denom_exp")

    def __init__(self, num: int = 0, denom_exp: int = 0):
        num = int(num)
        denom_exp = int(denom_exp)
        if num == 0:
            denom_exp = 0
        else:
            if denom_exp < 0:
                num <<= -denom_exp
                denom_exp = 0
            tz = min(_trailing_zeros(abs(num)), denom_exp)
            num >>= tz
            denom_exp -= tz
        self.num = num
        self.denom_exp = denom_exp

    @classmethod
    def coerce(cls, v) -> "Dyadic":
        if isinstance(v, Dyadic):
            return v
        if isinstance(v, (int, np.integer)):
            return cls(int(v), 0)
        if isinstance(v, Fraction):
            return cls.from_fraction(v)
        if isinstance(v, str):
            return cls.parse(v)
        raise TypeError(f"cannot convert {type(v).__name__} to Dyadic")

    @classmethod
    def from_fraction(cls, f: Fraction) -> "Dyadic":
        d = f.denominator
        if d & (d - 1):
            raise ValueError(f"{f} is not dyadic")
        return cls(f.numerator, d.bit_length() - 1)

    @classmethod
    def parse(cls, s: str) -> "Dyadic":
        m = re.fullmatch(r"\s*(-?\d+)\s*/\s*2\^(\d+)\s*", s)
        if m:
            return cls(int(m.group(1)), int(m.group(2)))
        return cls.from_fraction(Fraction(s))

    def to_fraction(self) -> Fraction:
        return Fraction(self.num, 1 << self.denom_exp)

    def __str__(self) -> str:
        return f"{self.num}/2^{self.denom_exp}"

    def __repr__(self) -> str:
        return f"Dyadic({self.num}, {self.denom_exp})"

    def __float__(self) -> float:
        return float(self.to_fraction())

    def _align(self, other: "Dyadic") -> tuple[int, int, int]:
        e = max(self.denom_exp, other.denom_exp)
        return self.num << (e - self.denom_exp), other.num << (e - other.denom_exp), e

    def __add__(self, other):
        try:
            other = Dyadic.coerce(other)
        except TypeError:
            return NotImplemented
        a, b, e = self._align(other)
        return Dyadic(a + b, e)

    __radd__ = __add__

    def __sub__(self, other):
        try:
            other = Dyadic.coerce(other)
        except TypeError:
            return NotImplemented
        a, b, e = self._align(other)
        return Dyadic(a - b, e)

    def __rsub__(self, other):
        return Dyadic.coerce(other) - self

    def __mul__(self, other):
        try:
            other = Dyadic.coerce(other)
        except TypeError:
            return NotImplemented
        return Dyadic(self.num * other.num, self.denom_exp + other.denom_exp)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Dyadic.coerce(other)
        if other.num == 0:
            raise ZeroDivisionError("division by zero")
        if abs(other.num) != 1:
            raise ValueError("division only by powers of two keeps dyadics closed")
        return Dyadic(self.num * other.num, self.denom_exp - other.denom_exp)

    def shift(self, k: int) -> "Dyadic":
        """Multiply by 2^k."""
        return Dyadic(self.num, self.denom_exp - k)

    def __neg__(self):
        return Dyadic(-self.num, self.denom_exp)

    def __abs__(self):
        return Dyadic(abs(self.num), self.denom_exp)

    def _cmp(self, other) -> int:
        if isinstance(other, Fraction):
            f = self.to_fraction()
            return (f > other) - (f < other)
        other = Dyadic.coerce(other)
        a, b, _ = self._align(other)
        return (a > b) - (a < b)

    def __eq__(self, other):
        try:
            return self._cmp(other) == 0
        except TypeError:
            return NotImplemented

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __hash__(self):
        return hash(self.to_fraction())

    def __bool__(self):
        return self.num != 0


ZERO = Dyadic(0)
ONE = Dyadic(1)


class ComplexDyadicSqrt2:
    """Amplitude (re + i*im) / sqrt(2)^sqrt2_exp with integer re, im."""

    __slots__ = ("re", "im", "sqrt2_exp")

    def __init__(self, re: int, im: int = 0, sqrt2_exp: int = 0):
        re, im, k = int(re), int(im), int(sqrt2_exp)
        if re == 0 and im == 0:
            k = 0
        while k >= 2 and re % 2 == 0 and im % 2 == 0:
            re //= 2
            im //= 2
            k -= 2
        self.re, self.im, self.sqrt2_exp = re, im, k

    def _align(self, other):
        a, b = self, other
        if a.sqrt2_exp < b.sqrt2_exp:
            a, b = b, a
        # only even gaps can be aligned with integer coordinates
        gap = a.sqrt2_exp - b.sqrt2_exp
        if gap % 2:
            raise ValueError("cannot add amplitudes with odd sqrt(2) gap")
        s = 1 << (gap // 2)
        return a.re, a.im, b.re * s, b.im * s, a.sqrt2_exp

    def __add__(self, other):
        ar, ai, br, bi, k = self._align(other)
        return ComplexDyadicSqrt2(ar + br, ai + bi, k)

    def __mul__(self, other):
        if isinstance(other, int):
            other = ComplexDyadicSqrt2(other)
        return ComplexDyadicSqrt2(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
            self.sqrt2_exp + other.sqrt2_exp,
        )

    def __eq__(self, other):
        if not isinstance(other, ComplexDyadicSqrt2):
            return NotImplemented
        return (self.re, self.im, self.sqrt2_exp) == (other.re, other.im, other.sqrt2_exp)

    def __hash__(self):
        return hash((self.re, self.im, self.sqrt2_exp))

    def __repr__(self):
        return f"ComplexDyadicSqrt2({self.re}, {self.im}, {self.sqrt2_exp})"

    @staticmethod
    def i_power(k: int) -> "ComplexDyadicSqrt2":
        return ComplexDyadicSqrt2(*[(1, 0), (0, 1), (-1, 0), (0, -1)][k % 4])

    def modulus_squared(self) -> Dyadic:
        return Dyadic(self.re * self.re + self.im * self.im, self.sqrt2_exp)


@dataclass(frozen=True)
class BitString:
    """Bit string whose i-th character is bit i of ``value``."""

    value: int
    length: int

    def __post_init__(self):
        if self.length < 0 or self.value < 0 or self.value >> self.length:
            raise ValueError("value does not fit in length")

    @classmethod
    def from_str(cls, s: str) -> "BitString":
        v = 0
        for i, ch in enumerate(s):
            if ch not in "01":
                raise ValueError(f"bad bit character {ch!r}")
            v |= (ch == "1") << i
        return cls(v, len(s))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitString":
        bits = list(bits)
        return cls(sum(int(b) << i for i, b in enumerate(bits)), len(bits))

    def __str__(self) -> str:
        return index_to_bits(self.value, self.length)

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.value >> i) & 1

    def bits(self) -> list[int]:
        return [(self.value >> i) & 1 for i in range(self.length)]

    @property
    def weight(self) -> int:
        return bin(self.value).count("1")

    def __xor__(self, other: "BitString") -> "BitString":
        if self.length != other.length:
            raise ValueError("xor needs equal lengths")
        return BitString(self.value ^ other.value, self.length)

    def concat(self, other: "BitString") -> "BitString":
        return BitString(self.value | (other.value << self.length), self.length + other.length)


def index_to_bits(idx: int, length: int) -> str:
    return "".join("1" if (idx >> i) & 1 else "0" for i in range(length))


def bits_to_index(s: str) -> int:
    return BitString.from_str(s).value


def popcount_array(idx: np.ndarray) -> np.ndarray:
    """Hamming weights of a non-negative integer array."""
    idx = np.asarray(idx, dtype=np.uint64)
    out = np.zeros(idx.shape, dtype=np.int64)
    while idx.any():
        out += (idx & np.uint64(1)).astype(np.int64)
        idx = idx >> np.uint64(1)
    return out


def _fit_dtype(num: np.ndarray, exp: int) -> np.ndarray:
    if exp <= _INT64_EXP_LIMIT:
        if num.dtype == object:
            return np.array([int(v) for v in num.ravel()], dtype=np.int64).reshape(num.shape)
        return num.astype(np.int64, copy=False)
    if num.dtype != object:
        num = num.astype(object)
    return num


def _canonical(num: np.ndarray, exp: int) -> tuple[np.ndarray, int]:
    acc = int(np.bitwise_or.reduce(num.ravel())) if num.size else 0
    if acc == 0 or exp == 0:
        return num, exp
    k = min(_trailing_zeros(acc), exp)
    if k:
        if num.dtype == object:
            num = np.array([v >> k for v in num], dtype=object)
        else:
            num = num >> k
        exp -= k
    return _fit_dtype(num, exp), exp


class ExactDist:
    """Exact pmf over {0,1}^length with masses num[idx] / 2^exp."""

    __slots__ = ("length", "num", "exp")

    def __init__(self, length: int, num, exp: int, *, validate: bool = True, budget: int | None = None):
        check_budget(length, budget, "distribution")
        num = np.asarray(num)
        if num.dtype != object:
            num = num.astype(np.int64)
        num = _fit_dtype(num.ravel(), exp)
        if num.shape != (1 << length,):
            raise ValueError(f"expected {1 << length} masses, got {num.shape}")
        if validate:
            if num.size and int(num.min()) < 0:
                raise ValueError("negative mass")
            total = sum(int(v) for v in num) if num.dtype == object else int(num.sum())
            if total != 1 << exp:
                raise ValueError("masses do not sum to 1")
        num, exp = _canonical(num, exp)
        num.setflags(write=False)
        self.length = length
        self.num = num
        self.exp = exp

    # constructors
    @classmethod
    def point(cls, bits: str | BitString) -> "ExactDist":
        b = bits if isinstance(bits, BitString) else BitString.from_str(bits)
        num = np.zeros(1 << b.length, dtype=np.int64)
        num[b.value] = 1
        return cls(b.length, num, 0)

    @classmethod
    def uniform(cls, length: int) -> "ExactDist":
        return cls(length, np.ones(1 << length, dtype=np.int64), length)

    @classmethod
    def from_pmf(cls, length: int, pmf: dict) -> "ExactDist":
        items = {}
        for k, v in pmf.items():
            idx = k.value if isinstance(k, BitString) else (bits_to_index(k) if isinstance(k, str) else int(k))
            items[idx] = Dyadic.coerce(v)
        exp = max((d.denom_exp for d in items.values()), default=0)
        dtype = np.int64 if exp <= _INT64_EXP_LIMIT else object
        num = np.zeros(1 << length, dtype=dtype)
        for idx, d in items.items():
            num[idx] = d.num << (exp - d.denom_exp)
        return cls(length, num, exp)

    # accessors
    def mass(self, key) -> Dyadic:
        idx = key.value if isinstance(key, BitString) else (bits_to_index(key) if isinstance(key, str) else int(key))
        return Dyadic(int(self.num[idx]), self.exp)

    def pmf(self) -> dict[str, Dyadic]:
        nz = np.flatnonzero(self.num)
        return {index_to_bits(int(i), self.length): Dyadic(int(self.num[i]), self.exp) for i in nz}

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.num)

    def probabilities(self) -> np.ndarray:
        """Float view, only for display and screening."""
        return np.array([float(v) for v in self.num]) / 2.0**self.exp if self.num.dtype == object else self.num / 2.0**self.exp

    def scaled(self, exp: int) -> np.ndarray:
        """Numerators re-expressed over 2^exp (exp >= self.exp)."""
        if exp < self.exp:
            raise ValueError("cannot lower exponent")
        k = exp - self.exp
        if exp > _INT64_EXP_LIMIT:
            return np.array([int(v) << k for v in self.num], dtype=object)
        return self.num.astype(np.int64) << k

    def __eq__(self, other):
        if not isinstance(other, ExactDist):
            return NotImplemented
        return self.length == other.length and self.exp == other.exp and bool(np.array_equal(self.num, other.num))

    def __hash__(self):
        return hash((self.length, self.exp, tuple(int(v) for v in self.support())))

    def __repr__(self):
        items = list(self.pmf().items())
        body = ", ".join(f"{k}: {v}" for k, v in items[:8])
        more = ", ..." if len(items) > 8 else ""
        return f"ExactDist(len={self.length}, {{{body}{more}}})"

    # serialization
    def to_json_obj(self) -> dict:
        return {"len": self.length, "pmf": {k: str(v) for k, v in sorted(self.pmf().items())}}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ExactDist":
        length = int(obj["len"])
        for k in obj["pmf"]:
            if len(k) != length:
                raise ValueError(f"key {k!r} has wrong length")
        return cls.from_pmf(length, obj["pmf"])

    @classmethod
    def from_json(cls, text: str) -> "ExactDist":
        return cls.from_json_obj(json.loads(text))


@dataclass(frozen=True)
class ProductDist:
    """Independent bits; biases[i] = Pr[bit i = 1]."""

    biases: tuple

    def __init__(self, biases: Sequence):
        bs = tuple(Dyadic.coerce(b) for b in biases)
        for b in bs:
            if b < 0 or b > 1:
                raise ValueError(f"bias {b} outside [0,1]")
        object.__setattr__(self, "biases", bs)

    @classmethod
    def uniform(cls, k: int, gamma="1/2") -> "ProductDist":
        return cls([Dyadic.coerce(gamma)] * k)

    def __len__(self):
        return len(self.biases)

    def concat(self, other: "ProductDist") -> "ProductDist":
        return ProductDist(self.biases + other.biases)

    def to_exact(self, budget: int | None = None) -> ExactDist:
        check_budget(len(self.biases), budget, "product expansion")
        out = ExactDist(0, np.array([1], dtype=np.int64), 0)
        for b in self.biases:
            e = b.denom_exp
            bit = ExactDist(1, np.array([(1 << e) - b.num, b.num], dtype=np.int64 if e <= _INT64_EXP_LIMIT else object), e)
            out = product(out, bit)
        return out


def _as_exact(p) -> ExactDist:
    return p.to_exact() if isinstance(p, ProductDist) else p


def _common(p: ExactDist, q: ExactDist) -> tuple[np.ndarray, np.ndarray, int]:
    e = max(p.exp, q.exp)
    return p.scaled(e), q.scaled(e), e


def _sum_int(a: np.ndarray) -> int:
    return sum(int(v) for v in a) if a.dtype == object else int(a.sum(dtype=np.int64))


def tv_distance(p, q) -> Dyadic:
    p, q = _as_exact(p), _as_exact(q)
    if p.length != q.length:
        raise ValueError(f"length mismatch: {p.length} vs {q.length}")
    a, b, e = _common(p, q)
    return Dyadic(_sum_int(np.abs(a - b)), e + 1)


def tv_event_characterization_check(p, q) -> bool:
    """Largest event gap p(E) - q(E), attained at E = {p > q}, equals the half-L1 distance."""
    p, q = _as_exact(p), _as_exact(q)
    if p.length != q.length:
        raise ValueError("length mismatch")
    a, b, e = _common(p, q)
    d = a - b
    pos = Dyadic(_sum_int(d[d > 0]), e)
    neg = Dyadic(_sum_int(-d[d < 0]), e)
    return pos == tv_distance(p, q) and pos == neg


def marginal_array(num: np.ndarray, length: int, coords: Sequence[int]) -> np.ndarray:
    """Sum a 2^length array down to ``coords``; output bit j is coordinate coords[j]."""
    coords = [int(c) for c in coords]
    if not coords:
        raise ValueError("empty coordinate set")
    if any(c < 0 or c >= length for c in coords) or len(set(coords)) != len(coords):
        raise ValueError(f"bad coordinates {coords} for length {length}")
    arr = np.asarray(num).reshape((2,) * length) if length else np.asarray(num)
    dropped = tuple(length - 1 - b for b in range(length) if b not in coords)
    if dropped:
        arr = arr.sum(axis=dropped)
    remaining = sorted(coords, reverse=True)
    l = len(coords)
    perm = [remaining.index(coords[l - 1 - a]) for a in range(l)]
    return np.ascontiguousarray(np.transpose(arr, perm)).ravel()


def marginal(p: ExactDist, coords: Sequence[int]) -> ExactDist:
    """Projection; output bit j is input coordinate coords[j]."""
    out = marginal_array(p.num, p.length, coords)
    return ExactDist(len(coords), out, p.exp, validate=False)


def mix(weights: Sequence, dists: Sequence[ExactDist]) -> ExactDist:
    weights = [Dyadic.coerce(w) for w in weights]
    dists = [_as_exact(d) for d in dists]
    if len(weights) != len(dists) or not dists:
        raise ValueError("weights and dists must be non-empty and aligned")
    if any(w < 0 for w in weights) or sum(weights, ZERO) != ONE:
        raise ValueError("weights must be non-negative and sum to 1")
    L = dists[0].length
    if any(d.length != L for d in dists):
        raise ValueError("length mismatch")
    e = max(w.denom_exp + d.exp for w, d in zip(weights, dists))
    obj = e > _INT64_EXP_LIMIT
    acc = np.zeros(1 << L, dtype=object if obj else np.int64)
    for w, d in zip(weights, dists):
        if w.num == 0:
            continue
        k = e - w.denom_exp - d.exp
        if obj:
            acc = acc + np.array([int(v) * w.num << k for v in d.num], dtype=object)
        else:
            acc += (d.num.astype(np.int64) * w.num) << k
    return ExactDist(L, acc, e)


def product(p, q, budget: int | None = None) -> ExactDist:
    """Joint of independent p and q; p's coordinates come first."""
    p, q = _as_exact(p), _as_exact(q)
    L = p.length + q.length
    check_budget(L, budget, "product")
    e = p.exp + q.exp
    if e > _INT64_EXP_LIMIT:
        num = np.outer(q.num.astype(object), p.num.astype(object)).ravel()
    else:
        num = np.outer(q.num, p.num).ravel()
    return ExactDist(L, num, e, validate=False, budget=budget)


def kfold(p, k: int, budget: int | None = None) -> ExactDist:
    if k < 1:
        raise ValueError("k must be >= 1")
    p = _as_exact(p)
    check_budget(p.length * k, budget, "k-fold product")
    out = p
    for _ in range(k - 1):
        out = product(out, p, budget)
    return out


def _draw_below(rng: np.random.Generator, exp: int, count: int):
    """Uniform integers in [0, 2^exp)."""
    if exp <= 62:
        return rng.integers(0, 1 << exp, size=count, dtype=np.int64)
    words = (exp + 31) // 32
    raw = rng.integers(0, 1 << 32, size=(count, words), dtype=np.int64)
    out = np.empty(count, dtype=object)
    for i in range(count):
        v = 0
        for w in raw[i]:
            v = (v << 32) | int(w)
        out[i] = v >> (words * 32 - exp)
    return out


def sample_indices(p, seed: int, count: int) -> np.ndarray:
    """Outcome indices drawn exactly from p with a PCG64 stream seeded by ``seed``."""
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = np.random.default_rng(seed)
    if isinstance(p, ProductDist):
        out = np.zeros(count, dtype=np.int64)
        for i, b in enumerate(p.biases):
            draws = _draw_below(rng, b.denom_exp, count)
            out |= (np.asarray(draws < b.num, dtype=np.int64)) << i
        return out
    cum = np.cumsum(p.num) if p.num.dtype != object else np.array(np.cumsum(p.num), dtype=object)
    draws = _draw_below(rng, p.exp, count)
    if p.num.dtype == object:
        import bisect

        cl = list(cum)
        return np.array([bisect.bisect_right(cl, d) for d in draws], dtype=np.int64)
    return np.searchsorted(cum, draws, side="right").astype(np.int64)


def sample(p, seed: int, count: int) -> list[BitString]:
    length = len(p) if isinstance(p, ProductDist) else p.length
    return [BitString(int(i), length) for i in sample_indices(p, seed, count)]


def empirical(indices: np.ndarray, length: int) -> np.ndarray:
    """Empirical frequencies as floats (for concentration tests only)."""
    counts = np.bincount(np.asarray(indices, dtype=np.int64), minlength=1 << length)
    return counts / max(1, len(indices))


def blockwise_tv(pairs: Iterable) -> Dyadic:
    """Exact TV of two joints given block by block.

    Each item is ((wp, P_x), (wq, Q_x)): the weight of block x under each joint and
    the conditional law inside it. Returns sum_x (1/2) sum_r |wp P_x(r) - wq Q_x(r)|.
    """
    total = ZERO
    for (wp, P), (wq, Q) in pairs:
        wp, wq = Dyadic.coerce(wp), Dyadic.coerce(wq)
        if P.length != Q.length:
            raise ValueError("block length mismatch")
        e = max(wp.denom_exp + P.exp, wq.denom_exp + Q.exp)
        if e + 2 > 62:
            a = np.array([int(v) * wp.num << (e - wp.denom_exp - P.exp) for v in P.num], dtype=object)
            b = np.array([int(v) * wq.num << (e - wq.denom_exp - Q.exp) for v in Q.num], dtype=object)
        else:
            a = (P.num * wp.num) << (e - wp.denom_exp - P.exp)
            b = (Q.num * wq.num) << (e - wq.denom_exp - Q.exp)
        total = total + Dyadic(_sum_int(np.abs(a - b)), e + 1)
    return total
