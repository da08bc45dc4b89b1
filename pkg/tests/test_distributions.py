from fractions import Fraction

import numpy as np
import pytest

from shallowsep.core import (
    BudgetError,
    ExactDist,
    ProductDist,
    blockwise_tv,
    empirical,
    kfold,
    marginal,
    popcount_array,
    product,
    tv_distance,
)
from shallowsep.distributions import (
    DhardParams,
    Tree,
    dhard_exact,
    dhard_sample_indices,
    dhard_sampler,
    dhost_blocks,
    dhost_conditional,
    dhost_exact,
    dhost_power,
    dhost_sample_indices,
    parse_tree,
)


def brute_dhard(n, m, star=False):
    """Enumerate the generative definition with Fractions."""
    pmf = {}
    for x in range(1 << n):
        wx = bin(x).count("1")
        px = Fraction(1, 2**n) if star else Fraction(3 ** (n - wx), 4**n)
        for y in range(1 << m):
            if wx % 2:
                py = Fraction(1, 2**m)
            else:
                py = Fraction(2, 2**m) if bin(y).count("1") % 2 == (wx // 2) % 2 else Fraction(0)
            if px * py:
                pmf[x | (y << n)] = px * py
    return pmf


def brute_dhost(tree):
    V = tree.vertex_count
    pmf = {}
    for x in range(1 << V):
        wx = bin(x).count("1")
        px = Fraction(3 ** (V - wx), 4**V)
        for z in range(1 << V):
            w = sum((((z >> u) ^ (z >> v)) & 1) << i for i, (u, v) in enumerate(tree.edges))
            for y in range(1 << V):
                if wx % 2:
                    py = Fraction(1, 2**V)
                else:
                    par = (bin(z & x).count("1") + wx // 2) % 2
                    py = Fraction(2, 2**V) if bin(y).count("1") % 2 == par else Fraction(0)
                key = x | (y << V) | (w << 2 * V)
                pmf[key] = pmf.get(key, 0) + px * Fraction(1, 2**V) * py
    return {k: v for k, v in pmf.items() if v}


def as_fractions(d: ExactDist):
    return {int(i): d.mass(int(i)).to_fraction() for i in d.support()}


def test_dhard_examples():
    d = dhard_exact(DhardParams(1, 1))
    assert d == ExactDist.from_pmf(2, {"00": "3/4", "10": "1/8", "11": "1/8"})
    assert d.mass("01") == 0
    s = dhard_exact(DhardParams(1, 1, star=True))
    assert s == ExactDist.from_pmf(2, {"00": "1/2", "10": "1/4", "11": "1/4"})
    assert marginal(dhard_exact(DhardParams(2, 2)), [0, 1]) == ProductDist(["1/4"] * 2).to_exact()


@pytest.mark.parametrize("n,m", [(1, 1), (2, 3), (3, 2), (4, 4)])
@pytest.mark.parametrize("star", [False, True])
def test_dhard_matches_enumeration_oracle(n, m, star):
    assert as_fractions(dhard_exact(DhardParams(n, m, star))) == brute_dhard(n, m, star)


def test_dhard_budget():
    with pytest.raises(BudgetError):
        dhard_exact(DhardParams(20, 10))
    with pytest.raises(ValueError):
        DhardParams(0, 1)


@pytest.mark.parametrize("tree", [Tree.edge(), Tree.path(3), Tree.path(4), Tree(4, ((0, 1), (0, 2), (0, 3)))])
def test_dhost_matches_enumeration_oracle(tree):
    assert as_fractions(dhost_exact(tree)) == brute_dhost(tree)


def test_dhost_properties():
    for tree in (Tree.edge(), Tree.path(3), Tree.comb(2)):
        V = tree.vertex_count
        d = dhost_exact(tree)
        assert marginal(d, list(range(V))) == ProductDist(["1/4"] * V).to_exact()
        # X = 0 forces even Y
        for i in d.support():
            x, y = int(i) & ((1 << V) - 1), (int(i) >> V) & ((1 << V) - 1)
            if x == 0:
                assert bin(y).count("1") % 2 == 0
        for x in range(1 << V):
            if bin(x).count("1") % 2:
                _, cond = dhost_conditional(tree, x)
                assert marginal(cond, list(range(V))) == ExactDist.uniform(V)
        # every W is in the image of the edge-difference map
        W = marginal(d, list(range(2 * V, 3 * V - 1)))
        assert W == ExactDist.uniform(V - 1)
    assert marginal(dhost_exact(Tree.edge()), [4]) == ExactDist.uniform(1)


def test_dhost_blocks_reassemble():
    tree = Tree.path(3)
    full = dhost_exact(tree)
    V = tree.vertex_count
    pairs = []
    for x, w, cond in dhost_blocks(tree):
        idx = x + (np.arange(1 << (2 * V - 1)) << V)
        sub = full.scaled(full.exp)[idx]
        blk = ExactDist(2 * V - 1, sub, full.exp, validate=False)
        pairs.append(((1, blk), (w, cond)))
    assert blockwise_tv(pairs) == 0


def test_dhost_power():
    t = Tree.edge()
    assert dhost_power(t, 1, 0) == dhost_exact(t)
    assert dhost_power(t, 1, 2) == product(dhost_exact(t), ExactDist.point("00"))
    assert dhost_power(t, 2, 0) == kfold(dhost_exact(t), 2)


def test_tree_shapes_and_json(tmp_path):
    c = Tree.comb(3)
    assert c.vertex_count == 9 and c.max_degree == 3
    assert Tree.path(5).max_degree == 2 and Tree.edge().max_degree == 1
    assert Tree.edge().K == 1 and Tree.path(3).K == 3
    assert Tree.path(3).with_root(1).K == 2
    p = tmp_path / "t.json"
    import json

    p.write_text(json.dumps(c.to_json_obj()))
    assert parse_tree(f"file:{p}") == c
    with pytest.raises(ValueError):
        Tree(3, ((0, 1), (0, 1)))
    with pytest.raises(ValueError):
        Tree(3, ((0, 1),))


def test_samplers_concentrate_and_repeat():
    params = DhardParams(1, 1)
    idx = dhard_sample_indices(params, 5, 10**6)
    emp = empirical(idx, 2)
    exact = dhard_exact(params).probabilities()
    assert 0.5 * np.abs(emp - exact).sum() < 0.01
    assert [str(b) for b in dhard_sampler(params, 9, 20)] == [str(b) for b in dhard_sampler(params, 9, 20)]
    tree = Tree.edge()
    h = dhost_sample_indices(tree, 3, 200000)
    for v in range(2):
        assert abs(((h >> v) & 1).mean() - 0.25) < 0.01
    emp = empirical(h, 5)
    assert 0.5 * np.abs(emp - dhost_exact(tree).probabilities()).sum() < 0.01
    assert np.array_equal(dhost_sample_indices(tree, 3, 50), dhost_sample_indices(tree, 3, 50))
    # support check: all drawn strings have positive mass
    d = dhost_exact(Tree.path(3))
    hs = dhost_sample_indices(Tree.path(3), 1, 5000)
    assert (d.num[hs] > 0).all()
