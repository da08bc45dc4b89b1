"""Circuit builders: parity halving, its relaxed tree version, and the D_host sampler."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .core import ExactDist
from .distributions import Tree
from .qsim import CNOT, CS, H, TOFFOLI, ExactState, QCircuit


def comb_tree(side: int) -> Tree:
    """Spanning tree of the side x side grid: the first row plus every column."""
    if side == 1:
        return Tree(1, (), 0, "comb:1")
    return Tree.comb(side)


@dataclass(frozen=True)
class EdgeColoring:
    color: tuple  # color[e] in 1..num_colors

    @property
    def num_colors(self) -> int:
        return max(self.color, default=0)

    def is_proper(self, tree: Tree) -> bool:
        for v in range(tree.vertex_count):
            cs = [self.color[e] for _, e in tree.adjacency[v]]
            if len(cs) != len(set(cs)):
                return False
        return True


def edge_color(tree: Tree) -> EdgeColoring:
    """Greedy DFS from the root: each child edge takes the smallest color free at both ends."""
    color = [0] * tree.edge_count
    seen = {tree.root}
    stack = [tree.root]
    while stack:
        u = stack.pop()
        for w, e in tree.adjacency[u]:
            if w in seen:
                continue
            seen.add(w)
            used = {color[f] for _, f in tree.adjacency[u]} | {color[f] for _, f in tree.adjacency[w]}
            c = 1
            while c in used:
                c += 1
            color[e] = c
            stack.append(w)
    return EdgeColoring(tuple(color))


def _leaf_rooted_schedule(tree: Tree) -> tuple[list[int], list[int], list[int]]:
    """Root at the smallest leaf; return parent, parent-edge and sibling color per vertex.

    Colors run 1..(max children); every vertex has at most max_degree - 1 children.
    """
    V = tree.vertex_count
    root = min(v for v in range(V) if tree.degree(v) == 1)
    parent = [-1] * V
    pedge = [-1] * V
    color = [0] * V
    q = deque([root])
    seen = {root}
    while q:
        u = q.popleft()
        c = 0
        for w, e in tree.adjacency[u]:
            if w in seen:
                continue
            seen.add(w)
            c += 1
            parent[w], pedge[w], color[w] = u, e, c
            q.append(w)
    return parent, pedge, color


def _fan_layers(tree: Tree, zq, wq, ncolors: int) -> list[list]:
    """CNOT fan computing W_e = Z_u xor Z_v in 2*ncolors layers."""
    parent, pedge, color = _leaf_rooted_schedule(tree)
    layers: list[list] = [[] for _ in range(2 * ncolors)]
    for v in range(tree.vertex_count):
        if parent[v] < 0:
            continue
        c = color[v]
        layers[2 * c - 2].append(CNOT(zq[parent[v]], wq[pedge[v]]))
        layers[2 * c - 1].append(CNOT(zq[v], wq[pedge[v]]))
    return layers


def build_php(n: int) -> QCircuit:
    """x on qubits [0,n), the cat register on [n,2n): CS(x_i, y_i) then H on y."""
    if n < 1:
        raise ValueError("n >= 1")
    x = list(range(n))
    y = list(range(n, 2 * n))
    layers = [[CS(x[i], y[i]) for i in range(n)], [H(q) for q in y]]
    return QCircuit(2 * n, layers, registers={"X": x, "Y": y})


def cat_state(n: int, x: int) -> ExactState:
    """|x> on the first n qubits tensored with (|0^n> + |1^n>)/sqrt(2)."""
    st = ExactState.basis(2 * n, x)
    st.re[x | (((1 << n) - 1) << n)] = 1
    st.sqrt2_exp = 1
    return st


def _fan_colors(tree: Tree) -> int:
    return max(tree.max_degree, 2) - 1


def build_rphp(tree: Tree) -> QCircuit:
    """x on [0,V), Z on [V,2V), W on [2V,2V+E)."""
    V, E = tree.vertex_count, tree.edge_count
    xq = list(range(V))
    zq = list(range(V, 2 * V))
    wq = list(range(2 * V, 2 * V + E))
    layers = [[H(q) for q in zq]]
    layers += _fan_layers(tree, zq, wq, _fan_colors(tree))
    layers.append([CS(xq[v], zq[v]) for v in range(V)])
    layers.append([H(q) for q in zq])
    return QCircuit(V + V + E, layers, registers={"X": xq, "Z": zq, "W": wq})


def build_dhost_circuit(tree: Tree, with_layout: bool = True) -> QCircuit:
    """Depth 2*max(Delta,2)+1 sampler whose first 3V-1 qubits measure to D_host.

    Qubits: X on [0,V), Z (measured as Y) on [V,2V), W on [2V,3V-1), then two
    ancillas per vertex. Layer 1 puts A and Z in |+>; the Toffolis make each X_v an
    AND of two fresh coins while the CNOT fan writes W; the CS layer imprints
    i^{x_v z_v}; the last layer applies H to Z.
    """
    V, E = tree.vertex_count, tree.edge_count
    if V < 2:
        raise ValueError("need a tree with at least one edge")
    xq = list(range(V))
    zq = list(range(V, 2 * V))
    wq = list(range(2 * V, 2 * V + E))
    aq = list(range(3 * V - 1, 5 * V - 1))
    layers = [[H(q) for q in aq] + [H(q) for q in zq]]
    fan = _fan_layers(tree, zq, wq, _fan_colors(tree))
    fan[0] = [TOFFOLI(aq[2 * v], aq[2 * v + 1], xq[v]) for v in range(V)] + fan[0]
    layers += fan
    layers.append([CS(xq[v], zq[v]) for v in range(V)])
    layers.append([H(q) for q in zq])
    layout = None
    if with_layout:
        try:
            layout = grid_layout_for(tree)
        except ValueError:
            layout = None
    return QCircuit(5 * V - 1, layers, layout, {"X": xq, "Z": zq, "W": wq, "A": aq})


# layouts


def _longest_path(tree: Tree) -> list[int]:
    def far(src):
        dist = {src: 0}
        prev = {src: -1}
        q = deque([src])
        while q:
            u = q.popleft()
            for w, _ in tree.adjacency[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    prev[w] = u
                    q.append(w)
        end = max(dist, key=lambda v: (dist[v], -v))
        return end, prev

    a, _ = far(0)
    b, prev = far(a)
    path = [b]
    while prev[path[-1]] != -1:
        path.append(prev[path[-1]])
    return path


def _edge_between(tree: Tree, u: int, v: int) -> int:
    for w, e in tree.adjacency[u]:
        if w == v:
            return e
    raise ValueError("not adjacent")


def grid_layout_for(tree: Tree) -> list[tuple[int, int]]:
    """Grid cells for build_dhost_circuit(tree) when the tree is a path with pendant paths.

    A longest path is laid horizontally (Z on even columns, W between). The path
    hanging from spine vertex c goes up for even c and down for odd c. Ancillas and X
    of each vertex sit on three consecutive cells next to its Z.
    """
    V, E = tree.vertex_count, tree.edge_count
    spine = _longest_path(tree)
    on_spine = set(spine)
    teeth: list[list[int]] = []
    used = set(spine)
    for c, s in enumerate(spine):
        hang = [w for w, _ in tree.adjacency[s] if w not in on_spine]
        if len(hang) > 1:
            raise ValueError("unsupported tree shape for grid layout")
        tooth = []
        prev, cur = s, hang[0] if hang else None
        while cur is not None:
            tooth.append(cur)
            used.add(cur)
            nxt = [w for w, _ in tree.adjacency[cur] if w != prev]
            if len(nxt) > 1:
                raise ValueError("unsupported tree shape for grid layout")
            prev, cur = cur, (nxt[0] if nxt else None)
        teeth.append(tooth)
    if len(used) != V:
        raise ValueError("unsupported tree shape for grid layout")

    xq = lambda v: v
    zq = lambda v: V + v
    wq = lambda e: 2 * V + e
    aq = lambda v, j: 3 * V - 1 + 2 * v + j
    cell: dict[int, tuple[int, int]] = {}
    for c, s in enumerate(spine):
        col = 2 * c
        up = c % 2 == 0
        sgn = -1 if up else 1
        cell[zq(s)] = (0, col)
        if c + 1 < len(spine):
            cell[wq(_edge_between(tree, s, spine[c + 1]))] = (0, col + 1)
        side = -sgn
        cell[aq(s, 0)] = (side, col - 1)
        cell[xq(s)] = (side, col)
        cell[aq(s, 1)] = (side, col + 1)
        prev = s
        for r, v in enumerate(teeth[c], start=1):
            cell[wq(_edge_between(tree, prev, v))] = (sgn * (2 * r - 1), col)
            row = sgn * 2 * r
            cell[zq(v)] = (row, col)
            cell[xq(v)] = (row, col + 1)
            cell[aq(v, 0)] = (row, col + 2)
            cell[aq(v, 1)] = (row, col + 3)
            prev = v
    n = 5 * V - 1
    if len(cell) != n:
        raise ValueError("layout does not cover every qubit")
    r0 = min(rc[0] for rc in cell.values())
    c0 = min(rc[1] for rc in cell.values())
    out = [(cell[q][0] - r0, cell[q][1] - c0) for q in range(n)]
    if len(set(out)) != n:
        raise ValueError("unsupported tree shape for grid layout")
    return out


def php_y_distribution(n: int, x: int) -> ExactDist:
    """y-register law of the parity-halving circuit on input x with a cat register."""
    from .qsim import measure_dist, run_state

    st = run_state(build_php(n), cat_state(n, x))
    return measure_dist(st, list(range(n, 2 * n)))
