"""Exact layered statevector simulation over {H, CS, CNOT, TOFFOLI}.

Amplitudes are Gaussian integers over a shared power of sqrt(2). Qubit 0 is the
least significant bit of the basis index.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .core import BitString, BudgetError, Dyadic, ExactDist, marginal_array

GATE_ARITY = {"H": 1, "CS": 2, "CNOT": 2, "TOFFOLI": 3}
FULL_QUBIT_BUDGET = 26


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if kind not in GATE_ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.qubits) != GATE_ARITY[kind] or len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"{kind} needs {GATE_ARITY[kind]} distinct qubits, got {self.qubits}")

    def to_json_obj(self) -> dict:
        return {"kind": self.kind, "qubits": list(self.qubits)}


def H(q):
    return Gate("H", (q,))


def CS(a, b):
    return Gate("CS", (a, b))


def CNOT(c, t):
    return Gate("CNOT", (c, t))


def TOFFOLI(a, b, t):
    return Gate("TOFFOLI", (a, b, t))


@dataclass
class QCircuit:
    qubit_count: int
    layers: list
    layout: list | None = None
    registers: dict = field(default_factory=dict)

    def __post_init__(self):
        self.layers = [list(layer) for layer in self.layers]
        for i, layer in enumerate(self.layers):
            check_layer(layer, self.qubit_count, i)
        if self.layout is not None:
            self.layout = [tuple(int(v) for v in rc) for rc in self.layout]
            if len(self.layout) != self.qubit_count:
                raise ValueError("layout must give one cell per qubit")

    @property
    def depth(self) -> int:
        return len(self.layers)

    def gates(self) -> Iterator[tuple[int, Gate]]:
        for i, layer in enumerate(self.layers):
            for g in layer:
                yield i, g

    def gate_kinds(self) -> set[str]:
        return {g.kind for _, g in self.gates()}

    def without_gate(self, layer: int, index: int) -> "QCircuit":
        layers = [list(l) for l in self.layers]
        del layers[layer][index]
        return QCircuit(self.qubit_count, layers, self.layout, dict(self.registers))

    def to_json_obj(self) -> dict:
        obj = {"qubits": self.qubit_count, "layers": [[g.to_json_obj() for g in l] for l in self.layers]}
        if self.layout is not None:
            obj["layout"] = [list(rc) for rc in self.layout]
        return obj

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "QCircuit":
        layers = [[Gate(g["kind"], tuple(g["qubits"])) for g in l] for l in obj["layers"]]
        return cls(int(obj["qubits"]), layers, obj.get("layout"))

    @classmethod
    def from_json(cls, text: str) -> "QCircuit":
        return cls.from_json_obj(json.loads(text))


def check_layer(layer: Sequence[Gate], qubit_count: int, index: int = 0) -> None:
    used: set[int] = set()
    for g in layer:
        for q in g.qubits:
            if not 0 <= q < qubit_count:
                raise ValueError(f"layer {index}: qubit {q} out of range")
            if q in used:
                raise ValueError(f"layer {index}: qubit {q} used twice")
            used.add(q)


class ExactState:
    """State sum_k (re[k] + i im[k]) / sqrt(2)^sqrt2_exp |k>."""

    __slots__ = ("qubit_count", "re", "im", "sqrt2_exp")

    def __init__(self, qubit_count: int, re: np.ndarray, im: np.ndarray, sqrt2_exp: int):
        self.qubit_count = qubit_count
        self.re = np.asarray(re, dtype=np.int64)
        self.im = np.asarray(im, dtype=np.int64)
        self.sqrt2_exp = int(sqrt2_exp)

    @classmethod
    def basis(cls, qubit_count: int, index: int = 0) -> "ExactState":
        if qubit_count > FULL_QUBIT_BUDGET:
            raise BudgetError(f"{qubit_count} qubits exceed full statevector budget {FULL_QUBIT_BUDGET}")
        re = np.zeros(1 << qubit_count, dtype=np.int64)
        re[index] = 1
        return cls(qubit_count, re, np.zeros_like(re), 0)

    def copy(self) -> "ExactState":
        return ExactState(self.qubit_count, self.re.copy(), self.im.copy(), self.sqrt2_exp)

    def amplitude(self, index: int):
        from .core import ComplexDyadicSqrt2

        return ComplexDyadicSqrt2(int(self.re[index]), int(self.im[index]), self.sqrt2_exp)

    def norm_ok(self) -> bool:
        total = int((self.re * self.re).sum() + (self.im * self.im).sum())
        return total == 1 << self.sqrt2_exp

    def canonicalize(self) -> "ExactState":
        while self.sqrt2_exp >= 2:
            acc = int(np.bitwise_or.reduce(self.re) | np.bitwise_or.reduce(self.im))
            if acc & 1 or acc == 0:
                break
            self.re >>= 1
            self.im >>= 1
            self.sqrt2_exp -= 2
        if not (self.re.any() or self.im.any()):
            self.sqrt2_exp = 0
        return self

    def __eq__(self, other):
        if not isinstance(other, ExactState):
            return NotImplemented
        a, b = self.copy().canonicalize(), other.copy().canonicalize()
        return (
            a.qubit_count == b.qubit_count
            and a.sqrt2_exp == b.sqrt2_exp
            and np.array_equal(a.re, b.re)
            and np.array_equal(a.im, b.im)
        )


def _view(arr: np.ndarray, n: int) -> np.ndarray:
    return arr.reshape((2,) * n) if n else arr


def _axis(n: int, q: int) -> int:
    return n - 1 - q


def _apply_h(state: ExactState, q: int) -> None:
    n = state.qubit_count
    for name in ("re", "im"):
        x = getattr(state, name).reshape(-1, 2, 1 << q)
        a = x[:, 0, :].copy()
        b = x[:, 1, :]
        x[:, 0, :] = a + b
        x[:, 1, :] = a - b
    state.sqrt2_exp += 1


def _controlled_slice(n: int, controls: Sequence[int]) -> tuple:
    sl = [slice(None)] * n
    for c in controls:
        sl[_axis(n, c)] = 1
    return tuple(sl)


def _apply_phase_i(state: ExactState, qubits: Sequence[int]) -> None:
    """Multiply every basis state with all ``qubits`` set by i."""
    n = state.qubit_count
    sl = _controlled_slice(n, qubits)
    re, im = _view(state.re, n), _view(state.im, n)
    r = re[sl].copy()
    re[sl] = -im[sl]
    im[sl] = r


def _apply_x_controlled(state: ExactState, controls: Sequence[int], target: int) -> None:
    n = state.qubit_count
    sl = _controlled_slice(n, controls)
    # axis of the target inside the sliced view
    ax = _axis(n, target) - sum(1 for c in controls if _axis(n, c) < _axis(n, target))
    for name in ("re", "im"):
        v = _view(getattr(state, name), n)
        v[sl] = np.flip(v[sl], axis=ax).copy()


def apply_gate(state: ExactState, g: Gate) -> None:
    if g.kind == "H":
        _apply_h(state, g.qubits[0])
    elif g.kind == "CS":
        _apply_phase_i(state, g.qubits)
    elif g.kind == "CNOT":
        _apply_x_controlled(state, g.qubits[:1], g.qubits[1])
    else:
        _apply_x_controlled(state, g.qubits[:2], g.qubits[2])


def apply_layer(state: ExactState, layer: Sequence[Gate]) -> ExactState:
    check_layer(layer, state.qubit_count)
    out = state.copy()
    for g in layer:
        apply_gate(out, g)
    return out.canonicalize()


def run_state(circuit: QCircuit, state: ExactState) -> ExactState:
    if state.qubit_count != circuit.qubit_count:
        raise ValueError("state and circuit sizes differ")
    out = state.copy()
    for layer in circuit.layers:
        for g in layer:
            apply_gate(out, g)
        out.canonicalize()
    return out


def run(circuit: QCircuit, inp: BitString | str | int = 0) -> ExactState:
    if isinstance(inp, str):
        inp = BitString.from_str(inp)
    if isinstance(inp, BitString):
        if inp.length != circuit.qubit_count:
            raise ValueError("input length differs from qubit count")
        inp = inp.value
    return run_state(circuit, ExactState.basis(circuit.qubit_count, int(inp)))


def born_numerators(state: ExactState) -> np.ndarray:
    return state.re * state.re + state.im * state.im


def measure_dist(state: ExactState, coords: Sequence[int] | None = None) -> ExactDist:
    """Exact Born marginal on ``coords`` (all qubits by default)."""
    n = state.qubit_count
    coords = list(range(n)) if coords is None else list(coords)
    num = marginal_array(born_numerators(state), n, coords)
    return ExactDist(len(coords), num, state.sqrt2_exp, budget=max(n, 25))


# factored simulation


@dataclass
class FactoredBlock:
    x: int
    weight: Dyadic
    cond: ExactDist


def _components(qubits: Sequence[int], gates: Sequence[Gate]) -> list[list[int]]:
    parent = {q: q for q in qubits}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for g in gates:
        r = find(g.qubits[0])
        for q in g.qubits[1:]:
            parent[find(q)] = r
    groups: dict[int, list[int]] = {}
    for q in qubits:
        groups.setdefault(find(q), []).append(q)
    return sorted((sorted(v) for v in groups.values()), key=lambda c: c[0])


def _sub_circuit(qubits: list[int], layers: list[list[Gate]]) -> QCircuit:
    pos = {q: i for i, q in enumerate(qubits)}
    sub = [[Gate(g.kind, tuple(pos[q] for q in g.qubits)) for g in layer if g.qubits[0] in pos] for layer in layers]
    return QCircuit(len(qubits), sub)


def factored_blocks(circuit: QCircuit, x_qubits: Sequence[int], measured: Sequence[int]) -> tuple[ExactDist, Iterator[FactoredBlock]]:
    """Simulate a circuit whose ``x_qubits`` become classical before they are used.

    Gates are split into a preparation part (never touching measured non-x qubits), a
    rest part (never touching x qubits or preparation ancillas) and CS gates coupling
    one x qubit with one rest qubit. The x-qubits' reduced state after preparation must
    be diagonal; each CS then acts as a phase on its rest qubit when x is set. Returns
    the law of x and an iterator over (x, Pr[x], law of the remaining measured qubits).
    """
    x_qubits = list(x_qubits)
    xset = set(x_qubits)
    rest = [q for q in measured if q not in xset]
    rest_set = set(rest)
    prep_layers: list[list[Gate]] = []
    rest_layers: list[list[tuple[str, Gate]]] = []
    prep_qubits: set[int] = set(x_qubits)
    for layer in circuit.layers:
        pl, rl = [], []
        for g in layer:
            qs = set(g.qubits)
            if qs & rest_set:
                if qs <= rest_set:
                    rl.append(("gate", g))
                elif g.kind == "CS" and len(qs & xset) == 1 and len(qs & rest_set) == 1:
                    rl.append(("cross", g))
                else:
                    raise ValueError(f"gate {g} mixes registers in an unsupported way")
            else:
                pl.append(g)
                prep_qubits |= qs
        prep_layers.append(pl)
        rest_layers.append(rl)
    # x must not be touched by preparation gates after the first cross gate
    first_cross = next((i for i, rl in enumerate(rest_layers) if any(k == "cross" for k, _ in rl)), len(rest_layers))
    for i in range(first_cross, len(prep_layers)):
        for g in prep_layers[i]:
            if set(g.qubits) & xset:
                raise ValueError("x qubit changed after being used as a classical control")
    prep_all = sorted(prep_qubits)
    prep_gates = [g for l in prep_layers for g in l]

    x_law = np.ones(1, dtype=np.int64)
    x_exp = 0
    x_order: list[int] = []
    for comp in _components(prep_all, prep_gates):
        cx = [q for q in comp if q in xset]
        if not cx:
            continue
        if len(comp) > FULL_QUBIT_BUDGET:
            raise BudgetError("preparation component too large")
        st = run(_sub_circuit(comp, prep_layers))
        pos = [comp.index(q) for q in cx]
        _check_diagonal(st, pos)
        law = measure_dist(st, pos)
        x_law = np.outer(law.scaled(law.exp), x_law).ravel()
        x_exp += law.exp
        x_order += cx
    if sorted(x_order) != sorted(x_qubits):
        raise ValueError("some x qubits are never prepared")
    perm_law = ExactDist(len(x_order), x_law, x_exp)
    # re-order to the requested x order
    x_dist = _reorder(perm_law, x_order, x_qubits)

    nrest = len(rest)
    if nrest > FULL_QUBIT_BUDGET:
        raise BudgetError("rest register too large for statevector simulation")
    rpos = {q: i for i, q in enumerate(rest)}
    xpos = {q: i for i, q in enumerate(x_qubits)}
    prefix = ExactState.basis(nrest, 0)
    for rl in rest_layers[:first_cross]:
        for _, g in rl:
            apply_gate(prefix, Gate(g.kind, tuple(rpos[q] for q in g.qubits)))
        prefix.canonicalize()

    def blocks() -> Iterator[FactoredBlock]:
        for x in np.flatnonzero(x_dist.num):
            x = int(x)
            st = prefix.copy()
            for rl in rest_layers[first_cross:]:
                for kind, g in rl:
                    if kind == "gate":
                        apply_gate(st, Gate(g.kind, tuple(rpos[q] for q in g.qubits)))
                    else:
                        xq = next(q for q in g.qubits if q in xset)
                        rq = next(q for q in g.qubits if q in rest_set)
                        if (x >> xpos[xq]) & 1:
                            _apply_phase_i(st, [rpos[rq]])
                st.canonicalize()
            yield FactoredBlock(x, x_dist.mass(x), measure_dist(st))

    return x_dist, blocks()


def _reorder(d: ExactDist, have: list[int], want: list[int]) -> ExactDist:
    from .core import marginal

    return marginal(d, [have.index(q) for q in want])


def _check_diagonal(st: ExactState, pos: list[int]) -> None:
    """Reduced state on ``pos`` has no coherences: rho[a,b] = 0 for a != b."""
    n = st.qubit_count
    others = [q for q in range(n) if q not in pos]
    amp = (st.re + 1j * st.im).reshape((2,) * n) if n else st.re
    order = [_axis(n, q) for q in reversed(pos)] + [_axis(n, q) for q in reversed(others)]
    m = np.transpose(amp, order).reshape(1 << len(pos), -1)
    # integer Gram matrix computed from the exact parts
    re = np.real(m).astype(np.int64)
    im = np.imag(m).astype(np.int64)
    g_re = re @ re.T + im @ im.T
    g_im = im @ re.T - re @ im.T
    off = ~np.eye(len(g_re), dtype=bool)
    if g_re[off].any() or g_im[off].any():
        raise ValueError("x register is not classical after preparation")


def run_factored_blocks(tree, circuit: QCircuit | None = None) -> tuple[ExactDist, Iterator[FactoredBlock]]:
    """Blocks of the D_host circuit for ``tree`` (or a modified copy of it)."""
    from .circuits import build_dhost_circuit

    c = build_dhost_circuit(tree) if circuit is None else circuit
    regs = c.registers
    measured = regs["X"] + regs["Z"] + regs["W"]
    return factored_blocks(c, regs["X"], measured)


def run_factored(tree, budget: int | None = None) -> ExactDist:
    """(X, Y, W) distribution of the D_host circuit assembled from per-x blocks."""
    from .core import check_budget

    V = tree.vertex_count
    L = 3 * V - 1
    check_budget(L, budget, "factored output")
    x_dist, blocks = run_factored_blocks(tree)
    exp = None
    parts = []
    for b in blocks:
        parts.append(b)
    exp = max(b.weight.denom_exp + b.cond.exp for b in parts)
    num = np.zeros((1 << (L - V), 1 << V), dtype=np.int64)
    for b in parts:
        num[:, b.x] = b.cond.scaled(b.cond.exp) * b.weight.num << (exp - b.weight.denom_exp - b.cond.exp)
    return ExactDist(L, num.ravel(), exp, budget=budget)


# validation


@dataclass
class ValidationReport:
    depth: int
    gate_kinds: list
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json_obj(self) -> dict:
        return {
            "depth": self.depth,
            "gate_kinds": self.gate_kinds,
            "ok": self.ok,
            "violations": [{"constraint": c, "layer": l, "detail": d} for c, l, d in self.violations],
        }


def _adjacent(a, b) -> bool:
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1


def _in_a_line(cells) -> bool:
    rows = {c[0] for c in cells}
    cols = {c[1] for c in cells}
    if len(rows) == 1:
        vals = sorted(c[1] for c in cells)
    elif len(cols) == 1:
        vals = sorted(c[0] for c in cells)
    else:
        return False
    return all(b - a == 1 for a, b in zip(vals, vals[1:]))


def validate(
    circuit: QCircuit,
    max_depth: int | None = None,
    gate_set: set | None = None,
    hadamard_first_last_only: bool = False,
    geometric: bool = False,
) -> ValidationReport:
    """Layers are reported 1-based."""
    rep = ValidationReport(circuit.depth, sorted(circuit.gate_kinds()))
    if max_depth is not None and circuit.depth > max_depth:
        rep.violations.append(("max_depth", None, f"depth {circuit.depth} > {max_depth}"))
    last = circuit.depth - 1
    for i, g in circuit.gates():
        if gate_set is not None and g.kind not in gate_set:
            rep.violations.append(("gate_set", i + 1, f"{g.kind} not allowed"))
        if hadamard_first_last_only and g.kind == "H" and i not in (0, last):
            rep.violations.append(("hadamard_first_last_only", i + 1, f"H on qubit {g.qubits[0]}"))
    if geometric:
        lay = circuit.layout
        if lay is None:
            rep.violations.append(("geometric", None, "no layout"))
        else:
            if len(set(lay)) != len(lay):
                rep.violations.append(("geometric", None, "layout not injective"))
            for i, g in circuit.gates():
                cells = [lay[q] for q in g.qubits]
                if g.kind in ("CS", "CNOT") and not _adjacent(*cells):
                    rep.violations.append(("geometric", i + 1, f"{g.kind} on {g.qubits} not adjacent"))
                if g.kind == "TOFFOLI" and not _in_a_line(cells):
                    rep.violations.append(("geometric", i + 1, f"TOFFOLI on {g.qubits} not on consecutive cells"))
    return rep


def factored_tv_to_dhost(tree, circuit: QCircuit | None = None) -> Dyadic:
    """Exact TV between the D_host circuit's (X,Y,W) law and D_host, block by block."""
    from .core import blockwise_tv
    from .distributions import dhost_conditional

    _, blocks = run_factored_blocks(tree, circuit)
    seen = set()

    def pairs():
        for b in blocks:
            seen.add(b.x)
            w, cond = dhost_conditional(tree, b.x)
            yield (b.weight, b.cond), (w, cond)
        # x values the circuit never produces still carry target mass
        for x in range(1 << tree.vertex_count):
            if x not in seen:
                w, cond = dhost_conditional(tree, x)
                yield (Dyadic(0), cond), (w, cond)

    return blockwise_tv(pairs())
