"""Target distributions: D_hard, its unbiased-x variant, and D_host over a tree."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import numpy as np

from .core import (
    BitString,
    Dyadic,
    ExactDist,
    check_budget,
    kfold,
    popcount_array,
    product,
)


@dataclass(frozen=True)
class DhardParams:
    n: int
    m: int
    star: bool = False

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be >= 1")


@dataclass(frozen=True)
class Tree:
    vertex_count: int
    edges: tuple
    root: int = 0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        object.__setattr__(self, "edges", edges)
        V = self.vertex_count
        if V < 1:
            raise ValueError("a tree needs a vertex")
        if len(edges) != V - 1:
            raise ValueError("a tree on V vertices has V-1 edges")
        if not 0 <= self.root < V:
            raise ValueError("root out of range")
        for u, v in edges:
            if not (0 <= u < V and 0 <= v < V) or u == v:
                raise ValueError(f"bad edge {(u, v)}")
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for w, _ in self.adjacency[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != V:
            raise ValueError("tree is not connected")

    @cached_property
    def adjacency(self) -> list[list[tuple[int, int]]]:
        """adj[u] = [(neighbour, edge index), ...]"""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.vertex_count)]
        for i, (u, v) in enumerate(self.edges):
            adj[u].append((v, i))
            adj[v].append((u, i))
        return adj

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @property
    def max_degree(self) -> int:
        return max(self.degree(v) for v in range(self.vertex_count))

    def paths_from(self, root: int | None = None) -> list[list[int]]:
        """Edge indices on the path from root to each vertex."""
        r = self.root if root is None else root
        paths: list[list[int] | None] = [None] * self.vertex_count
        paths[r] = []
        q = deque([r])
        while q:
            u = q.popleft()
            for w, e in self.adjacency[u]:
                if paths[w] is None:
                    paths[w] = paths[u] + [e]
                    q.append(w)
        return paths  # type: ignore[return-value]

    @property
    def K(self) -> int:
        return sum(len(p) for p in self.paths_from())

    def with_root(self, root: int) -> "Tree":
        return Tree(self.vertex_count, self.edges, root, self.name)

    def to_json_obj(self) -> dict:
        return {"vertices": self.vertex_count, "edges": [list(e) for e in self.edges], "root": self.root}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Tree":
        return cls(int(obj["vertices"]), tuple(tuple(e) for e in obj["edges"]), int(obj.get("root", 0)))

    # named families
    @classmethod
    def edge(cls) -> "Tree":
        return cls(2, ((0, 1),), 0, "edge")

    @classmethod
    def path(cls, k: int) -> "Tree":
        if k < 2:
            raise ValueError("path needs k >= 2")
        return cls(k, tuple((i, i + 1) for i in range(k - 1)), 0, f"path:{k}")

    @classmethod
    def comb(cls, k: int) -> "Tree":
        """k spine vertices, each with a tooth of k-1 further vertices.

        Vertex (r, c) has index c*k + r; r = 0 is the spine. Spine edges come first.
        """
        if k < 2:
            raise ValueError("comb needs k >= 2")
        edges = [(c * k, (c + 1) * k) for c in range(k - 1)]
        for c in range(k):
            edges += [(c * k + r - 1, c * k + r) for r in range(1, k)]
        return cls(k * k, tuple(edges), 0, f"comb:{k}")


def parse_tree(spec: str) -> Tree:
    """Parse ``edge``, ``path:k``, ``comb:k`` or ``file:PATH``."""
    if spec == "edge":
        return Tree.edge()
    kind, _, arg = spec.partition(":")
    if kind == "path":
        return Tree.path(int(arg))
    if kind == "comb":
        return Tree.comb(int(arg))
    if kind == "file":
        with open(arg) as fh:
            return Tree.from_json_obj(json.load(fh))
    raise ValueError(f"unknown tree spec {spec!r}")


def _x_numerators(n: int, star: bool) -> tuple[np.ndarray, int]:
    """Numerators of U_{1/4}^n (or U_{1/2}^n) over 2^exp."""
    if star:
        return np.ones(1 << n, dtype=np.int64), n
    w = popcount_array(np.arange(1 << n))
    return np.power(3, n - w).astype(np.int64), 2 * n


def dhard_exact(params: DhardParams | int, m: int | None = None, star: bool = False, budget: int | None = None) -> ExactDist:
    """Exact pmf with x in the low n coordinates and y in the next m."""
    if not isinstance(params, DhardParams):
        params = DhardParams(int(params), int(m), star)
    n, m = params.n, params.m
    check_budget(n + m, budget, "D_hard")
    xnum, xexp = _x_numerators(n, params.star)
    wx = popcount_array(np.arange(1 << n))
    py = popcount_array(np.arange(1 << m)) & 1
    odd = (wx & 1).astype(bool)
    target = (wx // 2) & 1
    # rows indexed by y, columns by x
    even_part = 2 * (py[:, None] == target[None, :])
    table = np.where(odd[None, :], 1, even_part) * xnum[None, :]
    return ExactDist(n + m, table.ravel(), xexp + m, budget=budget)


def _edge_map(tree: Tree) -> tuple[np.ndarray, np.ndarray]:
    """For every z in {0,1}^V, the packed W index and z itself."""
    V = tree.vertex_count
    z = np.arange(1 << V, dtype=np.int64)
    w = np.zeros_like(z)
    for i, (u, v) in enumerate(tree.edges):
        w |= (((z >> u) ^ (z >> v)) & 1) << i
    return z, w


def dhost_conditional(tree: Tree, x: int) -> tuple[Dyadic, ExactDist]:
    """Pr[X = x] and the conditional law of (Y, W) given X = x (Y low, W high)."""
    V, E = tree.vertex_count, tree.edge_count
    z, w = _edge_map(tree)
    wx = bin(x).count("1")
    weight = Dyadic(3 ** (V - wx), 2 * V)
    par = (popcount_array(z & x) + wx // 2) & 1
    counts = np.zeros((2, 1 << E), dtype=np.int64)
    np.add.at(counts, (par, w), 1)
    if wx % 2:
        block = np.broadcast_to((counts[0] + counts[1])[:, None], (1 << E, 1 << V))
    else:
        py = popcount_array(np.arange(1 << V)) & 1
        block = 2 * counts[py].T
    return weight, ExactDist(V + E, np.ascontiguousarray(block).ravel(), 2 * V)


def dhost_blocks(tree: Tree) -> Iterator[tuple[int, Dyadic, ExactDist]]:
    for x in range(1 << tree.vertex_count):
        w, cond = dhost_conditional(tree, x)
        yield x, w, cond


def dhost_exact(tree: Tree, budget: int | None = None) -> ExactDist:
    """Exact pmf over (X, Y, W): X in coordinates [0,V), Y in [V,2V), W after."""
    V, E = tree.vertex_count, tree.edge_count
    check_budget(2 * V + E, budget, "D_host")
    full = np.zeros((1 << E, 1 << V, 1 << V), dtype=np.int64)
    for x, weight, cond in dhost_blocks(tree):
        # weight = 3^(V-|x|) / 4^V, cond over 2^(2V); joint over 2^(4V)
        scale = weight.num << (2 * V - weight.denom_exp)
        full[:, :, x] = cond.scaled(2 * V).reshape(1 << E, 1 << V) * scale
    return ExactDist(2 * V + E, full.ravel(), 4 * V, budget=budget)


def dhost_power(tree: Tree, k: int, pad: int = 0, budget: int | None = None) -> ExactDist:
    base = dhost_exact(tree, budget=budget)
    check_budget(base.length * k + pad, budget, "D_host power")
    out = kfold(base, k, budget=budget)
    if pad:
        out = product(out, ExactDist.point("0" * pad), budget=budget)
    return out


def _uniform_with_parity(rng: np.random.Generator, m: int, parity: np.ndarray) -> np.ndarray:
    """m-1 free bits plus a last bit fixing the parity."""
    free = rng.integers(0, 1 << (m - 1), size=len(parity), dtype=np.int64) if m > 1 else np.zeros(len(parity), dtype=np.int64)
    last = (popcount_array(free) & 1) ^ parity
    return free | (last.astype(np.int64) << (m - 1))


def dhard_sample_indices(params: DhardParams, seed: int, count: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n, m = params.n, params.m
    if params.star:
        x = rng.integers(0, 1 << n, size=count, dtype=np.int64)
    else:
        x = np.zeros(count, dtype=np.int64)
        for i in range(n):
            x |= (rng.integers(0, 4, size=count) == 0).astype(np.int64) << i
    wx = popcount_array(x)
    y_free = rng.integers(0, 1 << m, size=count, dtype=np.int64)
    y_fixed = _uniform_with_parity(rng, m, (wx // 2) & 1)
    y = np.where(wx & 1, y_free, y_fixed)
    return x | (y << n)


def dhost_sample_indices(tree: Tree, seed: int, count: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    V = tree.vertex_count
    x = np.zeros(count, dtype=np.int64)
    for i in range(V):
        x |= (rng.integers(0, 4, size=count) == 0).astype(np.int64) << i
    z = rng.integers(0, 1 << V, size=count, dtype=np.int64)
    w = np.zeros(count, dtype=np.int64)
    for i, (u, v) in enumerate(tree.edges):
        w |= (((z >> u) ^ (z >> v)) & 1) << i
    wx = popcount_array(x)
    y_free = rng.integers(0, 1 << V, size=count, dtype=np.int64)
    y_fixed = _uniform_with_parity(rng, V, (popcount_array(z & x) + wx // 2) & 1)
    y = np.where(wx & 1, y_free, y_fixed)
    return x | (y << V) | (w << (2 * V))


def dhard_sampler(params: DhardParams, seed: int, count: int) -> list[BitString]:
    L = params.n + params.m
    return [BitString(int(i), L) for i in dhard_sample_indices(params, seed, count)]


def dhost_sampler(tree: Tree, seed: int, count: int) -> list[BitString]:
    L = 3 * tree.vertex_count - 1
    return [BitString(int(i), L) for i in dhost_sample_indices(tree, seed, count)]
