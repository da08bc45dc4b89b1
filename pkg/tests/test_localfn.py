import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from shallowsep.core import ExactDist, ProductDist, tv_distance
from shallowsep.localfn import (
    DepGraph,
    LocalFunction,
    Restriction,
    check_neighborhood_elimination,
    check_vertex_elimination,
    compose,
    decompose_check,
    dep_graph,
    eliminate_neighborhoods,
    eliminate_vertices,
    identity,
    vertex_elimination_threshold,
    neighborhoods,
    output_dist,
    restrict,
)


def parity_pairs():
    # outputs y1^y2, y2^y3, y3^y4, y1^y4 (0-based inputs)
    return LocalFunction.from_callables(4, [((0, 1), lambda a, b: a ^ b), ((1, 2), lambda a, b: a ^ b), ((2, 3), lambda a, b: a ^ b), ((0, 3), lambda a, b: a ^ b)])


def test_output_dist_examples():
    pi = ProductDist(["1/4", "1/2", "3/8"])
    assert output_dist(identity(3), pi) == pi.to_exact()
    xor = LocalFunction.from_callables(2, [((0, 1), lambda a, b: a ^ b)])
    assert output_dist(xor, ProductDist.uniform(2)) == ExactDist.uniform(1)
    d = output_dist(parity_pairs(), ProductDist.uniform(4))
    assert len(d.support()) == 8
    assert all(d.mass(int(i)) == Fraction(1, 8) and bin(int(i)).count("1") % 2 == 0 for i in d.support())


def test_unsorted_deps_are_normalised():
    f = LocalFunction(2, (((1, 0), 0b0010),))  # true when dep0 (=input 1) is 1 and dep1 (=input 0) is 0
    assert f.outputs[0][0] == (0, 1)
    assert f.evaluate(0b10) == 1 and f.evaluate(0b01) == 0


def test_json_roundtrip_and_errors():
    f = parity_pairs()
    assert LocalFunction.from_json(f.to_json()) == f
    assert f.to_json_obj()["outputs"][0]["table"] == "0110"
    with pytest.raises(ValueError):
        LocalFunction(2, (((0, 5), 0),))
    with pytest.raises(ValueError):
        LocalFunction(13, ((tuple(range(13)), 0),))


def test_neighbourhood_examples():
    g = dep_graph(identity(3))
    assert all(neighborhoods(g, i) == {i} for i in range(3))
    g = dep_graph(parity_pairs())
    assert neighborhoods(g, 0) == {0, 1, 3}
    const = LocalFunction(1, (((), 1), ((0,), 2)))
    assert neighborhoods(dep_graph(const), 0) == {0}


def test_restrict_examples():
    f = parity_pairs()
    full = restrict(f, {0: 1, 1: 0, 2: 1, 3: 1})
    assert all(d == () for d, _ in full.outputs)
    assert restrict(f, Restriction()) == f
    r = restrict(f, {1: 0})
    assert r.outputs[0] == ((0,), 0b10) and r.outputs[1] == ((2,), 0b10)


def test_decompose_examples():
    f = parity_pairs()
    pi = ProductDist(["1/2", "1/4", "3/4", "1/8"])
    assert decompose_check(f, pi, [])
    assert decompose_check(f, pi, [1])


def random_local(rng, n_in, n_out, d):
    outs = []
    for _ in range(n_out):
        k = rng.randint(0, min(d, n_in))
        deps = tuple(sorted(rng.sample(range(n_in), k)))
        outs.append((deps, rng.getrandbits(1 << k)))
    return LocalFunction(n_in, tuple(outs))


def random_pi(rng, n):
    return ProductDist([Fraction(rng.randint(0, 8), 8) for _ in range(n)])


def test_decompose_random_3local():
    rng = random.Random(3)
    for _ in range(20):
        f = random_local(rng, 10, 6, 3)
        pi = random_pi(rng, 10)
        S = rng.sample(range(10), 3)
        assert decompose_check(f, pi, S)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32))
def test_restriction_locality_and_consistency(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 8)
    f = random_local(rng, n, rng.randint(1, 5), rng.randint(1, 4))
    S = rng.sample(range(n), rng.randint(0, n))
    rho = {s: rng.randint(0, 1) for s in S}
    assert restrict(f, rho).locality <= f.locality
    assert decompose_check(f, random_pi(rng, n), S)


def test_compose_matches_sequential_evaluation():
    rng = random.Random(5)
    for _ in range(20):
        f = random_local(rng, 6, 4, 3)
        g = random_local(rng, 6, 3, 3)  # reads 4 outputs of f plus 2 aux
        h = compose(g, f, aux=2)
        for inp in range(1 << 8):
            mid = f.evaluate(inp & 0b111111) | ((inp >> 6) << 4)
            assert h.evaluate(inp) == g.evaluate(mid)


def test_eliminate_vertices_examples():
    lam = vertex_elimination_threshold(1, 1)
    g = DepGraph(4, 3, ((), (), (), ()))
    res = eliminate_vertices(g, 1, lam)
    assert res.S == [] and res.R == [0, 1, 2, 3] and res.verified
    g = dep_graph(identity(4))
    res = eliminate_vertices(g, 1, lam)
    assert res.S == [] and res.R == [0, 1, 2, 3]
    star = DepGraph(5, 1, tuple(((0,),) * 5))
    res = eliminate_vertices(star, 1, lam)
    assert set(res.S) <= {0} and res.R == [0, 1, 2, 3, 4] and res.verified
    with pytest.raises(ValueError):
        eliminate_vertices(star, 1, lam - 1)


def test_eliminate_neighbourhood_examples():
    g = DepGraph(4, 2, ((), (), (), ()))
    res = eliminate_neighborhoods(g)
    assert res.S == [] and res.r == 4 and res.t == 1 and res.verified
    res = eliminate_neighborhoods(dep_graph(parity_pairs()))
    assert res.feasible and res.verified
    uni = DepGraph(6, 7, tuple((0, i + 1) for i in range(6)))
    res = eliminate_neighborhoods(uni)
    assert 0 in res.S and res.r == 6 and res.verified
    bad = eliminate_neighborhoods(uni, F=lambda t: 100, kappa=1)
    assert not bad.feasible and bad.diagnostic


def test_checkers_reject_bad_answers():
    g = dep_graph(parity_pairs())
    res = eliminate_vertices(g, 1, vertex_elimination_threshold(2, 1))
    res.R = [0, 1]
    assert not check_vertex_elimination(g.adj, res)
    nres = eliminate_neighborhoods(g)
    nres.indices = [0, 2]
    nres.S = []
    assert not check_neighborhood_elimination(g.adj, nres)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_elimination_postconditions_random(seed):
    rng = random.Random(seed)
    d = rng.randint(1, 3)
    f = random_local(rng, rng.randint(1, 12), rng.randint(1, 12), d)
    g = dep_graph(f)
    beta = rng.choice([1, 2])
    res = eliminate_vertices(g, beta, vertex_elimination_threshold(max(1, g.d), beta))
    assert res.verified and check_vertex_elimination(g.adj, res)
    F = rng.choice([lambda t: 1, lambda t: t])
    n = rng.randint(1, g.left_count)
    for xp in (None, n):
        nres = eliminate_neighborhoods(g, F=F, x_part=xp)
        if nres.feasible:
            assert nres.verified and check_neighborhood_elimination(g.adj, nres, F, xp)
