"""Constant-locality classical samplers and the D_host to D_hard reduction.

Every construction is a LocalFunction of unbiased bits, so exactness and locality can
be checked by enumeration. Input layouts are recorded on each SamplerSpec.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable

from .core import Dyadic, ExactDist, ProductDist, product, tv_distance
from .distributions import DhardParams, Tree, dhard_exact, dhost_exact
from .localfn import LocalFunction, output_dist


@dataclass
class SamplerSpec:
    name: str
    params: dict
    function: LocalFunction
    input_biases: ProductDist
    claimed_locality: int
    target: Callable[[], ExactDist]
    target_desc: dict = field(default_factory=dict)
    layout: dict = field(default_factory=dict)

    def output(self) -> ExactDist:
        return output_dist(self.function, self.input_biases)

    def tv(self) -> Dyadic:
        return tv_distance(self.output(), self.target())

    def locality_ok(self) -> bool:
        return self.function.locality <= self.claimed_locality


class _Builder:
    """Collects outputs as (deps, fn) pairs over named input indices."""

    def __init__(self):
        self.n_inputs = 0
        self.layout: dict[str, list[int]] = {}
        self.outs: list[tuple[list[int], Callable]] = []

    def inputs(self, name: str, k: int) -> list[int]:
        idx = list(range(self.n_inputs, self.n_inputs + k))
        self.layout[name] = idx
        self.n_inputs += k
        return idx

    def add(self, deps, fn):
        self.outs.append((list(deps), fn))

    def build(self) -> LocalFunction:
        return LocalFunction.from_callables(self.n_inputs, self.outs)


def _xor(*bits):
    v = 0
    for b in bits:
        v ^= b
    return v


# Small expression helpers: each term is (deps, fn) so terms can be XOR-combined.


def _term(deps, fn):
    return (list(deps), fn)


def _xor_terms(*terms):
    """XOR of terms, possibly sharing inputs."""
    deps = sorted({d for t in terms for d in t[0]})

    def fn(*bits):
        env = dict(zip(deps, bits))
        return _xor(*(t[1](*(env[d] for d in t[0])) for t in terms))

    return deps, fn


def _select(b: int, t1, t0):
    """b ? t1 : t0"""
    deps = sorted({b} | set(t1[0]) | set(t0[0]))

    def fn(*bits):
        env = dict(zip(deps, bits))
        chosen = t1 if env[b] else t0
        return chosen[1](*(env[d] for d in chosen[0]))

    return deps, fn


def _const(v):
    return _term([], lambda: v)


def _var(i):
    return _term([i], lambda a: a)


def _and(i, j):
    return _term([i, j], lambda a, b: a & b)


def _cyclic_parity_terms(r: list[int]) -> list:
    """r_1 xor r_2, ..., r_k xor r_1: uniform over even-parity k-bit strings (k >= 2)."""
    k = len(r)
    if k == 1:
        return [_const(0)]
    return [_term([r[i], r[(i + 1) % k]], lambda a, b: a ^ b) for i in range(k)]


def parity_sampler(n: int, parity: int = 0) -> SamplerSpec:
    if n < 2:
        raise ValueError("n >= 2")
    B = _Builder()
    r = B.inputs("r", n)
    terms = _cyclic_parity_terms(r)
    if parity & 1:
        terms[-1] = _xor_terms(terms[-1], _const(1))
    for t in terms:
        B.add(*t)

    def target():
        from .core import popcount_array
        import numpy as np

        num = (popcount_array(np.arange(1 << n)) & 1 == (parity & 1)).astype(np.int64)
        return ExactDist(n, num, n - 1)

    return SamplerSpec("parity", {"n": n, "parity": parity & 1}, B.build(), ProductDist.uniform(B.n_inputs), 2, target, {"kind": "parity", "n": n, "parity": parity & 1}, B.layout)


def build_prop_nc0_upper(n: int, m: int | None = None) -> SamplerSpec:
    """D_hard(n, m) for m >= C(n+1, 2) from unbiased bits, locality 6.

    Inputs: z-chain r_1..r_m, then (u_i, v_i) with x_i = u_i AND v_i, then b. Output
    y_j = z_j xor xt_a xt_b over the pairs of xt = (x, b); surplus entries are z alone.
    """
    if n < 1:
        raise ValueError("n >= 1")
    need = comb(n + 1, 2)
    m = need if m is None else m
    if m < need:
        raise ValueError(f"m must be at least {need}")
    B = _Builder()
    r = B.inputs("z", m)
    uv = B.inputs("x_pairs", 2 * n)
    b = B.inputs("b", 1)[0]
    z = _cyclic_parity_terms(r)
    xt = [_and(uv[2 * i], uv[2 * i + 1]) for i in range(n)] + [_var(b)]
    for i in range(n):
        B.add(*xt[i])
    pairs = [(a, c) for a in range(n + 1) for c in range(a + 1, n + 1)]
    for j in range(m):
        if j < len(pairs):
            a, c = pairs[j]
            prod = _product_term(xt[a], xt[c])
            B.add(*_xor_terms(z[j], prod))
        else:
            B.add(*z[j])
    return SamplerSpec(
        "prop_nc0_upper",
        {"n": n, "m": m},
        B.build(),
        ProductDist.uniform(B.n_inputs),
        6,
        lambda: dhard_exact(DhardParams(n, m)),
        {"kind": "dhard", "n": n, "m": m, "star": False},
        B.layout,
    )


def _product_term(t1, t2):
    deps = sorted(set(t1[0]) | set(t2[0]))

    def fn(*bits):
        env = dict(zip(deps, bits))
        return t1[1](*(env[d] for d in t1[0])) & t2[1](*(env[d] for d in t2[0]))

    return deps, fn


def _upper2_terms(B: _Builder, n: int, m: int):
    """x and y terms of the unbiased-x construction plus the r_2 term (for the remark)."""
    s = B.inputs("z", m)
    q = B.inputs("x_odd", n - 1)
    yo = B.inputs("y_odd", m)
    rr = B.inputs("r", n - 1)  # r_2..r_n
    b = B.inputs("b", 1)[0]
    r = [None, None] + rr + [None]  # 1-based with r_1 = r_{n+1} = 0

    def rv(i):
        return _const(0) if r[i] is None else _var(r[i])

    x_odd = [_var(q[0])] + [_term([q[i - 1], q[i]], lambda a, c: a ^ c) for i in range(1, n - 1)] + [_term([q[n - 2]], lambda a: a ^ 1)]
    x_even = [_xor_terms(rv(i), rv(i + 1)) for i in range(1, n + 1)]
    z = _cyclic_parity_terms(s)
    w = []
    for i in range(2, n + 1):
        ri, rn = rv(i), rv(i + 1)
        w.append(_xor_terms(ri, _product_term(ri, rn)))
    xs = [_select(b, x_odd[i], x_even[i]) for i in range(n)]
    ys = []
    for j in range(m):
        ye = _xor_terms(z[j], w[j]) if j < len(w) else z[j]
        ys.append(_select(b, _var(yo[j]), ye))
    return xs, ys, rv(2)


def build_prop_nc0_upper2(n: int, m: int | None = None) -> SamplerSpec:
    """D_hard*(n, m) for m >= n-1 from unbiased bits, locality 6.

    Inputs: z-chain, x_odd chain q, fresh y_odd, r_2..r_n, selector b.
    """
    if n < 2:
        raise ValueError("n >= 2")
    m = n - 1 if m is None else m
    if m < n - 1:
        raise ValueError("m must be at least n-1")
    B = _Builder()
    xs, ys, _ = _upper2_terms(B, n, m)
    for t in xs + ys:
        B.add(*t)
    return SamplerSpec(
        "prop_nc0_upper2",
        {"n": n, "m": m},
        B.build(),
        ProductDist.uniform(B.n_inputs),
        6,
        lambda: dhard_exact(DhardParams(n, m, star=True)),
        {"kind": "dhard", "n": n, "m": m, "star": True},
        B.layout,
    )


def build_remark_extension(n: int, C: int, star: bool = True) -> SamplerSpec:
    """Smaller-m variants at locality C + 6.

    star: m = n - C. x = x1 o x2 with x1 fresh (C-1 bits) and (x2, y) from the
    unbiased-x construction on n - C + 1 bits; when |x1| is odd the first bit of x2 is
    flipped, and y_1 absorbs the parity correction, which depends on x1 and r_2 only.

    non-star: m = C(n+1, 2) - C. Pair products x_i x_j (i < j) take one entry each,
    and the n products x_i b are packed into n - C entries b * (xor of a group).
    """
    if C < 1:
        raise ValueError("C >= 1")
    if star:
        return _remark_star(n, C)
    return _remark_dhard(n, C)


def _remark_star(n: int, C: int) -> SamplerSpec:
    m = n - C
    n2 = n - C + 1
    if m < 1 or n2 < 2:
        raise ValueError("need m = n - C >= 1")
    B = _Builder()
    x1 = B.inputs("x1", C - 1)
    xs, ys, r2 = _upper2_terms(B, n2, m)
    k = len(x1)

    def corr_fn(*bits):
        w = sum(bits[:k])
        r2v = bits[k]
        if w % 2 == 0:
            return (w // 2) & 1
        return ((w - 1) // 2 & 1) ^ (1 - r2v)

    corr = (list(x1) + r2[0], corr_fn)
    odd_x1 = (list(x1), lambda *bits: sum(bits) & 1)
    for i in x1:
        B.add(*_var(i))
    B.add(*_xor_terms(xs[0], odd_x1))
    for t in xs[1:]:
        B.add(*t)
    B.add(*_xor_terms(ys[0], corr))
    for t in ys[1:]:
        B.add(*t)
    return SamplerSpec(
        "remark_extension",
        {"n": n, "C": C, "star": True, "m": m},
        B.build(),
        ProductDist.uniform(B.n_inputs),
        C + 6,
        lambda: dhard_exact(DhardParams(n, m, star=True)),
        {"kind": "dhard", "n": n, "m": m, "star": True},
        B.layout,
    )


def _remark_dhard(n: int, C: int) -> SamplerSpec:
    m = comb(n + 1, 2) - C
    groups_n = n - C
    if m < 1 or groups_n < 1:
        raise ValueError("need n - C >= 1 and m >= 1")
    size = -(-n // groups_n)
    if 3 + 2 * size > C + 6:
        raise ValueError(f"grouping {n} b-terms into {groups_n} entries needs locality {3 + 2 * size} > C + 6")
    B = _Builder()
    r = B.inputs("z", m)
    uv = B.inputs("x_pairs", 2 * n)
    b = B.inputs("b", 1)[0]
    z = _cyclic_parity_terms(r)
    x = [_and(uv[2 * i], uv[2 * i + 1]) for i in range(n)]
    for t in x:
        B.add(*t)
    entries = [_product_term(x[a], x[c]) for a in range(n) for c in range(a + 1, n)]
    groups = [list(range(g, n, groups_n)) for g in range(groups_n)]
    for G in groups:
        entries.append(_product_term(_var(b), _xor_terms(*(x[i] for i in G))))
    assert len(entries) == m
    for j in range(m):
        B.add(*_xor_terms(z[j], entries[j]))
    return SamplerSpec(
        "remark_extension",
        {"n": n, "C": C, "star": False, "m": m},
        B.build(),
        ProductDist.uniform(B.n_inputs),
        C + 6,
        lambda: dhard_exact(DhardParams(n, m)),
        {"kind": "dhard", "n": n, "m": m, "star": False},
        B.layout,
    )


@dataclass
class Reduction:
    tree: Tree
    function: LocalFunction
    aux_count: int
    layout: dict

    @property
    def K(self) -> int:
        return self.tree.K

    def input_dist(self) -> ExactDist:
        return product(dhost_exact(self.tree), ExactDist.uniform(self.aux_count))

    def output(self) -> ExactDist:
        return output_dist(self.function, self.input_dist())

    def target(self) -> ExactDist:
        V = self.tree.vertex_count
        return dhard_exact(DhardParams(V, V + self.K))


def build_reduction(tree: Tree) -> Reduction:
    """Map (X, Y, W) and fresh bits to (X, Y xor Y', Yt).

    Y' is a |V|-bit string of parity b (a chain ending in b); Yt lists the K terms
    X_v W_e over e on the root-to-v path, each xored into a chain s_0 = b, s_K = 0 so
    that Yt is uniform with parity b xor sum X_v W_e. Inputs: X, Y, W, b, r_1..r_{V-1},
    s_1..s_{K-1}.
    """
    V, E = tree.vertex_count, tree.edge_count
    if E < 1:
        raise ValueError("the reduction needs at least one edge")
    terms = [(v, e) for v, path in enumerate(tree.paths_from()) for e in path]
    K = len(terms)
    B = _Builder()
    X = B.inputs("X", V)
    Y = B.inputs("Y", V)
    W = B.inputs("W", E)
    b = B.inputs("b", 1)[0]
    r = B.inputs("r", V - 1)
    s = B.inputs("s", K - 1)
    for v in range(V):
        B.add(*_var(X[v]))
    for v in range(V):
        if v == 0:
            yp = _var(r[0])
        elif v < V - 1:
            yp = _term([r[v - 1], r[v]], lambda a, c: a ^ c)
        else:
            yp = _term([r[V - 2], b], lambda a, c: a ^ c)
        B.add(*_xor_terms(_var(Y[v]), yp))
    sv = [b] + s + [None]
    for k, (v, e) in enumerate(terms):
        parts = [_and(X[v], W[e]), _var(sv[k])]
        if sv[k + 1] is not None:
            parts.append(_var(sv[k + 1]))
        B.add(*_xor_terms(*parts))
    return Reduction(tree, B.build(), 1 + (V - 1) + (K - 1), B.layout)


def catalogue() -> dict[str, Callable[..., SamplerSpec]]:
    return {
        "parity": parity_sampler,
        "prop_nc0_upper": build_prop_nc0_upper,
        "prop_nc0_upper2": build_prop_nc0_upper2,
        "remark_extension": build_remark_extension,
    }
