"""Local functions, their dependency graphs, restrictions and graph elimination."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import Dyadic, ExactDist, ProductDist, check_budget, mix, product

MAX_TABLE_DEPS = 12


def _table_bits(table: int, k: int) -> np.ndarray:
    return np.array([(table >> a) & 1 for a in range(1 << k)], dtype=np.int64)


def _normalize(deps: Sequence[int], table: int) -> tuple[tuple[int, ...], int]:
    """Sort dependencies (and drop repeats), re-indexing the truth table to match."""
    deps = [int(d) for d in deps]
    k = len(deps)
    uniq = sorted(set(deps))
    if uniq == deps:
        return tuple(deps), int(table)
    pos = {d: j for j, d in enumerate(uniq)}
    new = 0
    for a in range(1 << len(uniq)):
        old = 0
        for j, d in enumerate(deps):
            old |= ((a >> pos[d]) & 1) << j
        new |= ((table >> old) & 1) << a
    return tuple(uniq), new


@dataclass(frozen=True)
class LocalFunction:
    """outputs[i] = (sorted input indices, truth table); table bit a is the value on
    the assignment where dependency j takes bit j of a."""

    input_count: int
    outputs: tuple

    def __post_init__(self):
        outs = []
        for deps, table in self.outputs:
            deps, table = _normalize(deps, table)
            if len(deps) > MAX_TABLE_DEPS:
                raise ValueError(f"output depends on {len(deps)} > {MAX_TABLE_DEPS} inputs")
            if any(d < 0 or d >= self.input_count for d in deps):
                raise ValueError(f"dependency out of range in {deps}")
            if table < 0 or table >> (1 << len(deps)):
                raise ValueError("truth table has the wrong length")
            outs.append((deps, table))
        object.__setattr__(self, "outputs", tuple(outs))

    @classmethod
    def from_callables(cls, input_count: int, specs: Iterable[tuple[Sequence[int], Callable[..., int]]]) -> "LocalFunction":
        """Each spec is (deps, fn) with fn taking the dependency bits in the given order."""
        outs = []
        for deps, fn in specs:
            deps = list(deps)
            table = 0
            for a in range(1 << len(deps)):
                bits = [(a >> j) & 1 for j in range(len(deps))]
                table |= (int(fn(*bits)) & 1) << a
            outs.append((deps, table))
        return cls(input_count, tuple(outs))

    @property
    def output_count(self) -> int:
        return len(self.outputs)

    @property
    def locality(self) -> int:
        return max((len(d) for d, _ in self.outputs), default=0)

    def used_inputs(self) -> list[int]:
        return sorted({i for d, _ in self.outputs for i in d})

    def evaluate(self, inputs: int) -> int:
        out = 0
        for j, (deps, table) in enumerate(self.outputs):
            a = 0
            for k, d in enumerate(deps):
                a |= ((inputs >> d) & 1) << k
            out |= ((table >> a) & 1) << j
        return out

    def evaluate_all(self, idx: np.ndarray, positions: dict | None = None) -> np.ndarray:
        """Vectorised evaluation; ``positions`` maps an input index to its bit in idx."""
        idx = np.asarray(idx, dtype=np.int64)
        out = np.zeros(idx.shape, dtype=np.int64)
        for j, (deps, table) in enumerate(self.outputs):
            a = np.zeros(idx.shape, dtype=np.int64)
            for k, d in enumerate(deps):
                p = d if positions is None else positions[d]
                a |= ((idx >> p) & 1) << k
            out |= _table_bits(table, len(deps))[a] << j
        return out

    def to_json_obj(self) -> dict:
        return {
            "inputs": self.input_count,
            "outputs": [
                {"deps": list(d), "table": "".join(str((t >> a) & 1) for a in range(1 << len(d)))}
                for d, t in self.outputs
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "LocalFunction":
        outs = []
        for o in obj["outputs"]:
            s = o["table"]
            if len(s) != 1 << len(o["deps"]):
                raise ValueError("truth table has the wrong length")
            outs.append((tuple(o["deps"]), sum(int(c) << a for a, c in enumerate(s))))
        return cls(int(obj["inputs"]), tuple(outs))

    @classmethod
    def from_json(cls, text: str) -> "LocalFunction":
        return cls.from_json_obj(json.loads(text))

    def with_table_bit_flipped(self, output: int, entry: int) -> "LocalFunction":
        if not 0 <= output < self.output_count:
            raise ValueError(f"no output {output}")
        outs = list(self.outputs)
        d, t = outs[output]
        if not 0 <= entry < 1 << len(d):
            raise ValueError(f"output {output} has no table entry {entry}")
        outs[output] = (d, t ^ (1 << entry))
        return LocalFunction(self.input_count, tuple(outs))


def identity(k: int) -> LocalFunction:
    return LocalFunction(k, tuple(((i,), 0b10) for i in range(k)))


def compose(g: LocalFunction, f: LocalFunction, aux: int = 0) -> LocalFunction:
    """g(f(r), s): g reads f's outputs in its first f.output_count inputs and ``aux``
    fresh inputs after them, which become inputs f.input_count.. of the result."""
    if g.input_count != f.output_count + aux:
        raise ValueError("g must read f's outputs followed by the aux bits")
    outs = []
    for deps, table in g.outputs:
        new_deps = sorted(
            {i for d in deps if d < f.output_count for i in f.outputs[d][0]}
            | {f.input_count + d - f.output_count for d in deps if d >= f.output_count}
        )
        pos = {v: k for k, v in enumerate(new_deps)}
        new_table = 0
        for a in range(1 << len(new_deps)):
            x = 0
            for v, k in pos.items():
                x |= ((a >> k) & 1) << v
            b = 0
            for k, d in enumerate(deps):
                if d < f.output_count:
                    fd, ft = f.outputs[d]
                    fa = sum(((x >> v) & 1) << j for j, v in enumerate(fd))
                    bit = (ft >> fa) & 1
                else:
                    bit = (x >> (f.input_count + d - f.output_count)) & 1
                b |= bit << k
            new_table |= ((table >> b) & 1) << a
        outs.append((tuple(new_deps), new_table))
    return LocalFunction(f.input_count + aux, tuple(outs))


def output_dist(f: LocalFunction, pi: ProductDist | ExactDist, budget: int | None = None) -> ExactDist:
    """Exact law of f(pi), enumerating only the inputs f actually reads."""
    check_budget(f.output_count, budget, "output distribution")
    if isinstance(pi, ProductDist):
        if len(pi) != f.input_count:
            raise ValueError("product distribution has the wrong number of bits")
        used = f.used_inputs()
        check_budget(len(used), budget, "input enumeration")
        law = ProductDist([pi.biases[i] for i in used]).to_exact()
        positions = {d: k for k, d in enumerate(used)}
    else:
        if pi.length != f.input_count:
            raise ValueError("input distribution has the wrong length")
        check_budget(pi.length, budget, "input enumeration")
        law = pi
        positions = None
    support = np.flatnonzero(law.num)
    outs = f.evaluate_all(support, positions)
    acc = np.zeros(1 << f.output_count, dtype=law.num.dtype)
    np.add.at(acc, outs, law.num[support])
    return ExactDist(f.output_count, acc, law.exp, budget=budget)


@dataclass(frozen=True)
class DepGraph:
    left_count: int
    right_count: int
    adj: tuple  # adj[i] = sorted inputs of output i

    @property
    def d(self) -> int:
        return max((len(a) for a in self.adj), default=0)

    def right_adj(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.right_count)]
        for i, a in enumerate(self.adj):
            for j in a:
                out[j].append(i)
        return out

    def induced_left(self, left: Sequence[int]) -> "DepGraph":
        return DepGraph(len(left), self.right_count, tuple(self.adj[i] for i in left))


def dep_graph(f: LocalFunction) -> DepGraph:
    return DepGraph(f.output_count, f.input_count, tuple(d for d, _ in f.outputs))


def neighborhoods(g: DepGraph, i: int, S: Iterable[int] = (), left: Iterable[int] | None = None) -> set[int]:
    """N_S(i): i together with outputs sharing a surviving input with it."""
    S = set(S)
    mine = set(g.adj[i]) - S
    pool = range(g.left_count) if left is None else left
    return {i} | {u for u in pool if mine & (set(g.adj[u]) - S)}


@dataclass(frozen=True)
class Restriction:
    fixed: dict = field(default_factory=dict)

    @classmethod
    def from_bits(cls, S: Sequence[int], rho: int) -> "Restriction":
        return cls({s: (rho >> k) & 1 for k, s in enumerate(S)})


def restrict(f: LocalFunction, rho: Restriction | dict) -> LocalFunction:
    fixed = rho.fixed if isinstance(rho, Restriction) else dict(rho)
    for k, v in fixed.items():
        if not 0 <= k < f.input_count or v not in (0, 1):
            raise ValueError(f"bad restriction entry {k}: {v}")
    outs = []
    for deps, table in f.outputs:
        keep = [d for d in deps if d not in fixed]
        new = 0
        for a in range(1 << len(keep)):
            full = 0
            kp = 0
            for j, d in enumerate(deps):
                if d in fixed:
                    bit = fixed[d]
                else:
                    bit = (a >> kp) & 1
                    kp += 1
                full |= bit << j
            new |= ((table >> full) & 1) << a
        outs.append((tuple(keep), new))
    return LocalFunction(f.input_count, tuple(outs))


def decompose_check(f: LocalFunction, pi: ProductDist, S: Sequence[int], budget: int | None = None) -> bool:
    """f(pi) equals the pi-weighted mixture of the restricted functions over all rho on S."""
    S = list(S)
    if len(S) > 12:
        raise ValueError("|S| must be at most 12")
    whole = output_dist(f, pi, budget)
    if not S:
        return whole == output_dist(restrict(f, {}), pi, budget)
    weights, parts = [], []
    for rho in range(1 << len(S)):
        w = Dyadic(1)
        for k, s in enumerate(S):
            b = pi.biases[s]
            w = w * (b if (rho >> k) & 1 else Dyadic(1) - b)
        weights.append(w)
        parts.append(output_dist(restrict(f, Restriction.from_bits(S, rho)), pi, budget))
    return mix(weights, parts) == whole


# elimination


def _greedy_vertices(adj: Sequence[Sequence[int]], S: set[int]) -> list[int]:
    taken: set[int] = set()
    R = []
    for i, a in enumerate(adj):
        live = set(a) - S
        if not live & taken:
            R.append(i)
            taken |= live
    return R


@dataclass
class VertexElimination:
    S: list
    R: list
    beta: Fraction
    lam: Fraction
    size_ok: bool
    count_ok: bool
    verified: bool

    @property
    def guarantees_met(self) -> bool:
        return self.size_ok and self.count_ok


def vertex_elimination_threshold(d: int, beta) -> Fraction:
    d = max(1, d)
    return Fraction(2 * d) * (2 * d * Fraction(beta) + 1) ** (2 * d)


def eliminate_vertices(g: DepGraph, beta, lam) -> VertexElimination:
    """Delete every input above a degree threshold, then greedily keep outputs in index
    order whose surviving inputs are unused. The threshold maximising |R| subject to
    |S| <= |R|/beta wins; ties go to the smaller S."""
    beta, lam = Fraction(beta), Fraction(lam)
    if beta < 1 or lam < 1:
        raise ValueError("beta and lambda must be >= 1")
    d = max(1, g.d)
    if lam < vertex_elimination_threshold(d, beta):
        raise ValueError(f"lambda {lam} below 2d(2d*beta+1)^(2d) for d={d}, beta={beta}")
    rdeg = [len(r) for r in g.right_adj()]
    best = None
    for tau in sorted(set(rdeg) | {0}):
        S = {j for j, k in enumerate(rdeg) if k > tau}
        R = _greedy_vertices(g.adj, S)
        if len(S) * beta > len(R):
            continue
        key = (len(R), -len(S))
        if best is None or key > best[0]:
            best = (key, sorted(S), R)
    _, S, R = best  # tau = max degree gives S = {} which is always admissible
    size_ok = len(S) * beta <= len(R)
    count_ok = len(R) * lam >= g.left_count
    res = VertexElimination(S, R, beta, lam, size_ok, count_ok, False)
    res.verified = check_vertex_elimination(g.adj, res)
    return res


def check_vertex_elimination(adj: Sequence[Sequence[int]], res: VertexElimination) -> bool:
    """Independent re-check from raw adjacency: pairwise non-connected and the reported bounds."""
    S = set(res.S)
    for i, j in combinations(res.R, 2):
        if (set(adj[i]) - S) & (set(adj[j]) - S):
            return False
    if len(set(res.R)) != len(res.R):
        return False
    if res.size_ok != (len(res.S) * res.beta <= len(res.R)):
        return False
    if res.count_ok != (len(res.R) * res.lam >= len(adj)):
        return False
    return True


@dataclass
class NeighborhoodElimination:
    S: list
    indices: list
    t: int
    feasible: bool
    size_ok: bool = False
    count_ok: bool = False
    t_ok: bool = False
    verified: bool = False
    diagnostic: str = ""

    @property
    def r(self) -> int:
        return len(self.indices)


def eliminate_neighborhoods(
    g: DepGraph,
    F: Callable[[int], float] = lambda t: 1,
    lam=1,
    kappa=None,
    x_part: int | None = None,
) -> NeighborhoodElimination:
    """Find inputs S and outputs i_1..i_r whose neighbourhoods after deleting S are
    pairwise non-connected, each of size at most t.

    With ``x_part = n`` only outputs in [n] count, both as candidates and as members
    of a neighbourhood. Deletion thresholds on input degree are tried and the one
    giving the most indices wins, subject to |S| <= r/F(t) and t <= kappa.
    """
    lam = Fraction(lam)
    kappa = float("inf") if kappa is None else kappa
    left = list(range(g.left_count if x_part is None else x_part))
    rdeg = [len(r) for r in g.right_adj()]
    best = None
    for tau in sorted(set(rdeg) | {0}):
        S = {j for j, k in enumerate(rdeg) if k > tau}
        taken: set[int] = set()
        chosen, sizes = [], []
        for i in left:
            N = neighborhoods(g, i, S, left)
            if len(N) > kappa:
                continue
            J = set().union(*(set(g.adj[u]) - S for u in N))
            if not J & taken:
                chosen.append(i)
                sizes.append(len(N))
                taken |= J
        if not chosen:
            continue
        t = max(sizes)
        if len(S) * F(t) > len(chosen):
            continue
        key = (len(chosen), -len(S))
        if best is None or key > best[0]:
            best = (key, sorted(S), chosen, t)
    if best is None:
        return NeighborhoodElimination([], [], 0, False, diagnostic="no threshold gives a non-empty admissible selection")
    _, S, chosen, t = best
    res = NeighborhoodElimination(S, chosen, t, True)
    res.size_ok = len(S) * F(t) <= len(chosen)
    res.count_ok = len(chosen) * lam >= len(left)
    res.t_ok = t <= kappa
    res.verified = check_neighborhood_elimination(g.adj, res, F, x_part)
    return res


def check_neighborhood_elimination(adj, res: NeighborhoodElimination, F=lambda t: 1, x_part: int | None = None) -> bool:
    """Independent re-check from raw adjacency lists."""
    S = set(res.S)
    pool = range(len(adj) if x_part is None else x_part)
    live = {u: set(adj[u]) - S for u in range(len(adj))}
    nb = {}
    for i in res.indices:
        if i not in pool:
            return False
        nb[i] = {u for u in pool if u == i or live[u] & live[i]}
        if len(nb[i]) > res.t:
            return False
    for i, j in combinations(res.indices, 2):
        for u in nb[i]:
            for v in nb[j]:
                if live[u] & live[v]:
                    return False
    if len(set(res.indices)) != len(res.indices):
        return False
    return res.size_ok == (len(res.S) * F(res.t) <= len(res.indices))
