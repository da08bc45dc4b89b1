import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shallowsep.circuits import build_dhost_circuit, build_rphp
from shallowsep.core import ExactDist, tv_distance
from shallowsep.distributions import Tree, dhost_exact
from shallowsep.qsim import (
    CNOT,
    CS,
    H,
    TOFFOLI,
    ExactState,
    Gate,
    QCircuit,
    apply_layer,
    measure_dist,
    run,
    run_factored,
    validate,
)


def test_gate_examples():
    s = run(QCircuit(1, [[H(0)], [H(0)]]), "0")
    assert s == ExactState.basis(1, 0)
    s = apply_layer(ExactState.basis(2, 3), [CS(0, 1)])
    assert s.im[3] == 1 and s.re[3] == 0
    s = apply_layer(ExactState.basis(3, 0b011), [TOFFOLI(0, 1, 2)])
    assert s.re[0b111] == 1
    assert run(QCircuit(3, []), "010").re[0b010] == 1
    s = run(QCircuit(1, [[H(0)]]), "0")
    assert s.sqrt2_exp == 1 and list(s.re) == [1, 1]
    assert measure_dist(s, [0]) == ExactDist.uniform(1)
    assert measure_dist(run(QCircuit(3, []), "101")) == ExactDist.point("101")


def test_layer_errors():
    with pytest.raises(ValueError):
        apply_layer(ExactState.basis(2), [H(0), CNOT(0, 1)])
    with pytest.raises(ValueError):
        apply_layer(ExactState.basis(2), [H(2)])
    with pytest.raises(ValueError):
        Gate("CNOT", (1, 1))
    with pytest.raises(ValueError):
        Gate("RY", (0,))


def random_circuit(draw, n):
    layers = []
    for _ in range(draw(st.integers(0, 6))):
        qs = draw(st.permutations(list(range(n))))
        layer, i = [], 0
        while i < n:
            kind = draw(st.sampled_from(["H", "CS", "CNOT", "TOFFOLI"]))
            k = {"H": 1, "CS": 2, "CNOT": 2, "TOFFOLI": 3}[kind]
            if i + k > n:
                break
            layer.append(Gate(kind, tuple(qs[i : i + k])))
            i += k
        layers.append(layer)
    return QCircuit(n, layers)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_norm_preserved_and_involutions(data):
    n = data.draw(st.integers(3, 5))
    c = random_circuit(data.draw, n)
    x = data.draw(st.integers(0, (1 << n) - 1))
    s = run(c, x)
    assert s.norm_ok()
    # gate algebra on the reached state
    q = data.draw(st.permutations(list(range(n))))
    for gates, reps in (([H(q[0])], 2), ([CNOT(q[0], q[1])], 2), ([TOFFOLI(q[0], q[1], q[2])], 2), ([CS(q[0], q[1])], 4)):
        t = s
        for _ in range(reps):
            t = apply_layer(t, gates)
            assert t.norm_ok()
        assert t == s


def test_factored_matches_full():
    trees = [Tree.edge(), Tree.path(3), Tree.path(4), Tree(4, ((0, 1), (0, 2), (0, 3))), Tree.comb(2)]
    for t in trees:
        V = t.vertex_count
        full = measure_dist(run(build_dhost_circuit(t)), list(range(3 * V - 1)))
        assert run_factored(t) == full
        assert full == dhost_exact(t)


def test_x_zero_branch_even_parity():
    t = Tree.path(3)
    d = run_factored(t)
    V = 3
    for i in d.support():
        if int(i) & 7 == 0:
            assert bin((int(i) >> V) & 7).count("1") % 2 == 0


def test_validator_flags_hadamard_in_middle():
    c = QCircuit(2, [[H(0)], [H(1)], [CNOT(0, 1)], [H(0)]])
    rep = validate(c, hadamard_first_last_only=True)
    assert not rep.ok and [v[1] for v in rep.violations] == [2]
    rep = validate(c, max_depth=3, gate_set={"H"})
    assert {v[0] for v in rep.violations} == {"max_depth", "gate_set"}


def test_circuit_json_roundtrip():
    c = build_dhost_circuit(Tree.edge())
    c2 = QCircuit.from_json(c.to_json())
    assert c2.to_json() == c.to_json()
    assert c2.layers == c.layers and c2.layout == c.layout


def test_rphp_relation_all_basis_inputs():
    for t in (Tree.edge(), Tree.path(3), Tree(3, ((0, 1), (0, 2)))):
        V, E = t.vertex_count, t.edge_count
        c = build_rphp(t)
        for x in range(1 << V):
            wx = bin(x).count("1")
            d = measure_dist(run(c, x), list(range(V, 2 * V + E)))
            for i in d.support():
                y, w = int(i) & ((1 << V) - 1), int(i) >> V
                if wx % 2 == 0:
                    # some z consistent with w satisfies the parity relation
                    ok = False
                    for z in range(1 << V):
                        wz = sum((((z >> u) ^ (z >> v)) & 1) << k for k, (u, v) in enumerate(t.edges))
                        if wz == w and bin(y).count("1") % 2 == (bin(z & x).count("1") + wx // 2) % 2:
                            ok = True
                    assert ok
