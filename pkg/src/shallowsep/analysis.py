"""Lower-bound machinery as concrete checks: the potential h, neighbourhood types,
the mod-4 decay bound, brute-force adversaries and direct-product experiments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product as iproduct
from typing import Sequence

import numpy as np

from .core import (
    BitString,
    DEFAULT_BUDGET,
    BudgetError,
    ComplexDyadicSqrt2,
    Dyadic,
    ExactDist,
    ProductDist,
    check_budget,
    popcount_array,
    tv_distance,
)
from .localfn import (
    LocalFunction,
    Restriction,
    dep_graph,
    neighborhoods,
    output_dist,
    restrict,
)


# potential function


def potential_h(x: BitString, y: BitString) -> ComplexDyadicSqrt2:
    """h(x, y) = i^(|x| + 2|y|)."""
    return ComplexDyadicSqrt2.i_power(x.weight + 2 * y.weight)


def _h_class_sums(dist: ExactDist, n: int) -> list[int]:
    idx = np.flatnonzero(dist.num)
    wx = popcount_array(idx & ((1 << n) - 1))
    wy = popcount_array(idx >> n)
    cls = (wx + 2 * wy) % 4
    vals = dist.num[idx]
    return [sum(int(v) for v in vals[cls == c]) for c in range(4)]


def expected_h(dist: ExactDist, split: tuple[int, int]) -> ComplexDyadicSqrt2:
    """E[h(x, y)] with x the first n coordinates, returned exactly."""
    n, m = split
    if n + m != dist.length or n < 0 or m < 0:
        raise ValueError(f"split {split} does not match length {dist.length}")
    c = _h_class_sums(dist, n)
    return ComplexDyadicSqrt2(c[0] - c[2], c[1] - c[3], 2 * dist.exp)


def complex_parts(z: ComplexDyadicSqrt2) -> tuple[Dyadic, Dyadic]:
    """Real and imaginary parts as dyadics (only for even sqrt(2) exponents)."""
    if z.sqrt2_exp % 2:
        raise ValueError("odd sqrt(2) exponent has no dyadic parts")
    k = z.sqrt2_exp // 2
    return Dyadic(z.re, k), Dyadic(z.im, k)


# decay of E[i^A]


@dataclass(frozen=True)
class DecayCheck:
    eta: Fraction
    lhs: Fraction  # |E[i^A]|^2
    rhs: Fraction  # (1 - eta/4)^2
    holds: bool


def decay_bound_check(masses: Sequence) -> DecayCheck:
    """Compare |E[i^A]|^2 with (1 - eta/4)^2 where eta = 1 - max_a Pr[A = a mod 4]."""
    p = [Fraction(v) for v in masses]
    if len(p) != 4 or any(v < 0 for v in p) or sum(p) != 1:
        raise ValueError("need four non-negative masses summing to 1")
    eta = 1 - max(p)
    re, im = p[0] - p[2], p[1] - p[3]
    lhs = re * re + im * im
    rhs = (1 - eta / 4) ** 2
    return DecayCheck(eta, lhs, rhs, lhs <= rhs)


# neighbourhood classification


@dataclass(frozen=True)
class NeighborhoodReport:
    index: int
    neighborhood: tuple
    tv: Dyadic
    kind: str  # "Type1" or "Type2"
    threshold: Dyadic

    def to_json_obj(self) -> dict:
        return {
            "index": self.index,
            "neighborhood": list(self.neighborhood),
            "tv": str(self.tv),
            "type": self.kind,
            "threshold": str(self.threshold),
        }


def classify_neighborhoods(
    f: LocalFunction,
    pi: ProductDist,
    S: Sequence[int],
    indices: Sequence[int],
    t: int,
    rho: Restriction | dict | None = None,
    x_part: int | None = None,
    budget: int | None = None,
) -> list[NeighborhoodReport]:
    """Type of each N_S(i) intersected with the first ``x_part`` outputs.

    The marginal of f_rho(pi) on that set is compared with the 1/4-biased product;
    the neighbourhood is Type1 when the TV is at least 2^(-5t). Without ``rho`` the
    unrestricted f is used, with neighbourhoods still taken after deleting S.
    """
    n = f.output_count if x_part is None else x_part
    g = dep_graph(f)
    fr = f if rho is None else restrict(f, rho)
    thr = Dyadic(1, 5 * t)
    out = []
    for i in indices:
        N = sorted(neighborhoods(g, i, S, range(n)))
        check_budget(len(N), budget, "neighbourhood marginal")
        sub = LocalFunction(f.input_count, tuple(fr.outputs[u] for u in N))
        law = output_dist(sub, pi, budget)
        tv = tv_distance(law, ProductDist.uniform(len(N), "1/4"))
        out.append(NeighborhoodReport(i, tuple(N), tv, "Type1" if tv >= thr else "Type2", thr))
    return out


# exact laws with rational (possibly non-dyadic) biases


def _to_fractions(dist: ExactDist) -> np.ndarray:
    den = 1 << dist.exp
    return np.array([Fraction(int(v), den) for v in dist.num], dtype=object)


def fraction_output_law(f: LocalFunction, biases: Sequence, budget: int | None = None) -> np.ndarray:
    """Law of f under independent bits with rational biases, as Fractions."""
    biases = [Fraction(b) for b in biases]
    if len(biases) != f.input_count:
        raise ValueError("bias vector has the wrong length")
    check_budget(f.output_count, budget, "output distribution")
    used = f.used_inputs()
    check_budget(len(used), budget, "input enumeration")
    idx = np.arange(1 << len(used), dtype=np.int64)
    outs = f.evaluate_all(idx, {d: k for k, d in enumerate(used)})
    law = np.array([Fraction(0)] * (1 << f.output_count), dtype=object)
    for a, o in zip(idx, outs):
        w = Fraction(1)
        for k, d in enumerate(used):
            w *= biases[d] if (a >> k) & 1 else 1 - biases[d]
        law[o] += w
    return law


def fraction_tv(p: np.ndarray, q: np.ndarray) -> Fraction:
    if len(p) != len(q):
        raise ValueError("length mismatch")
    return sum((abs(a - b) for a, b in zip(p, q)), Fraction(0)) / 2


def fraction_kfold(p: np.ndarray, k: int) -> np.ndarray:
    out = p
    for _ in range(k - 1):
        out = np.outer(p, out).ravel()
    return out


# adversary search


@dataclass
class AdversaryResult:
    d: int
    best_tv: Fraction
    function: LocalFunction
    biases: tuple
    family: str
    notes: list = field(default_factory=list)

    def recheck(self, target: ExactDist) -> Fraction:
        return fraction_tv(fraction_output_law(self.function, self.biases), _to_fractions(target))

    def to_json_obj(self) -> dict:
        return {
            "d": self.d,
            "best_tv": str(self.best_tv),
            "best_tv_decimal": float(self.best_tv),
            "biases": [str(b) for b in self.biases],
            "function": self.function.to_json_obj(),
            "family": self.family,
            "notes": list(self.notes),
        }


def _set_partitions(items: list[int]):
    """Restricted growth strings: block label per item."""
    if not items:
        yield []
        return

    def rec(i, labels, top):
        if i == len(items):
            yield list(labels)
            return
        for b in range(top + 2):
            labels.append(b)
            yield from rec(i + 1, labels, max(top, b))
            labels.pop()

    yield from rec(0, [], -1)


@dataclass
class _Structure:
    """Per output: ("c", value) or ("v", group, negated)."""

    L: int
    kinds: list
    groups: int

    def patterns(self) -> tuple[int, list[tuple[int, int]]]:
        """For each group value a (0/1) the output bits it forces; constants folded in."""
        base = 0
        for j, k in enumerate(self.kinds):
            if k[0] == "c" and k[1]:
                base |= 1 << j
        pat = []
        for g in range(self.groups):
            on = off = 0
            for j, k in enumerate(self.kinds):
                if k[0] == "v" and k[1] == g:
                    if k[2]:
                        off |= 1 << j
                    else:
                        on |= 1 << j
            pat.append((off, on))
        return base, pat

    def function(self) -> LocalFunction:
        outs = []
        for k in self.kinds:
            if k[0] == "c":
                outs.append(((), k[1]))
            else:
                outs.append(((k[1],), 0b01 if k[2] else 0b10))
        return LocalFunction(max(self.groups, 1), tuple(outs))


def _structures(L: int):
    for cs in iproduct(("c0", "c1", "v"), repeat=L):
        var = [j for j in range(L) if cs[j] == "v"]
        for labels in _set_partitions(var):
            G = max(labels, default=-1) + 1
            firsts = {}
            for j, g in zip(var, labels):
                firsts.setdefault(g, j)
            free = [j for j, g in zip(var, labels) if firsts[g] != j]
            for negs in iproduct((False, True), repeat=len(free)):
                neg = dict(zip(free, negs))
                kinds = []
                lab = dict(zip(var, labels))
                for j in range(L):
                    if cs[j] == "v":
                        kinds.append(("v", lab[j], neg.get(j, False)))
                    else:
                        kinds.append(("c", int(cs[j][1])))
                yield _Structure(L, kinds, G)


class _D1Law:
    def __init__(self, st: _Structure, Q: np.ndarray):
        self.base, self.pat = st.patterns()
        self.Q = Q
        self.size = len(Q)

    def law(self, p: Sequence[Fraction]) -> list:
        out = [Fraction(0)] * self.size
        G = len(self.pat)
        for a in range(1 << G):
            w = Fraction(1)
            o = self.base
            for g in range(G):
                bit = (a >> g) & 1
                w *= p[g] if bit else 1 - p[g]
                o |= self.pat[g][bit]
            out[o] += w
        return out

    def tv(self, p) -> Fraction:
        return sum((abs(a - b) for a, b in zip(self.law(p), self.Q)), Fraction(0)) / 2

    def float_tv_grid(self, grid: np.ndarray) -> tuple[float, tuple]:
        G = len(self.pat)
        Qf = np.array([float(v) for v in self.Q])
        mesh = np.array(list(iproduct(grid, repeat=G)))
        acc = np.zeros((len(mesh), self.size))
        for a in range(1 << G):
            w = np.ones(len(mesh))
            o = self.base
            for g in range(G):
                bit = (a >> g) & 1
                w = w * (mesh[:, g] if bit else 1 - mesh[:, g])
                o |= self.pat[g][bit]
            acc[:, o] += w
        tvs = np.abs(acc - Qf).sum(axis=1) / 2
        k = int(np.argmin(tvs))
        return float(tvs[k]), tuple(mesh[k])


def _rational_roots(a: Fraction, b: Fraction, c: Fraction) -> list[Fraction]:
    if a == 0:
        if b == 0:
            return []
        return [-c / b]
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    rn, rd = math.isqrt(disc.numerator), math.isqrt(disc.denominator)
    if rn * rn != disc.numerator or rd * rd != disc.denominator:
        return []
    r = Fraction(rn, rd)
    return sorted({(-b - r) / (2 * a), (-b + r) / (2 * a)})


def _optimise_d1(law: _D1Law, start: list[Fraction]) -> tuple[Fraction, list[Fraction]]:
    p = list(start)
    best = law.tv(p)
    G = len(p)
    Q = law.Q
    for _ in range(100):
        improved = False
        # exact coordinate descent over breakpoints
        for g in range(G):
            lo = law.law(p[:g] + [Fraction(0)] + p[g + 1:])
            hi = law.law(p[:g] + [Fraction(1)] + p[g + 1:])
            cands = {Fraction(0), Fraction(1)}
            for o in range(law.size):
                A = hi[o] - lo[o]
                if A:
                    x = (Q[o] - lo[o]) / A
                    if 0 <= x <= 1:
                        cands.add(x)
            for x in sorted(cands):
                trial = p[:g] + [x] + p[g + 1:]
                v = law.tv(trial)
                if v < best:
                    best, p, improved = v, trial, True
        # pairwise vertices: two cells pinned to their targets
        for g, h in combinations(range(G), 2):
            corner = {}
            for a in (0, 1):
                for b in (0, 1):
                    q = list(p)
                    q[g], q[h] = Fraction(a), Fraction(b)
                    corner[a, b] = law.law(q)
            coef = []
            for o in range(law.size):
                c00, c10, c01, c11 = corner[0, 0][o], corner[1, 0][o], corner[0, 1][o], corner[1, 1][o]
                coef.append((c11 - c10 - c01 + c00, c10 - c00, c01 - c00, c00 - Q[o]))
            for o1, o2 in combinations(range(law.size), 2):
                a1, b1, c1, e1 = coef[o1]
                a2, b2, c2, e2 = coef[o2]
                roots = _rational_roots(-c1 * a2 + c2 * a1, -(c1 * b2 + e1 * a2) + (c2 * b1 + e2 * a1), -e1 * b2 + e2 * b1)
                for y in roots:
                    if not 0 <= y <= 1:
                        continue
                    for a, b, c, e in ((a1, b1, c1, e1), (a2, b2, c2, e2)):
                        den = a * y + b
                        if den:
                            x = -(c * y + e) / den
                            break
                    else:
                        continue
                    if not 0 <= x <= 1:
                        continue
                    trial = list(p)
                    trial[g], trial[h] = x, y
                    v = law.tv(trial)
                    if v < best:
                        best, p, improved = v, trial, True
        if not improved or best == 0:
            break
    return best, p


def _adversary_d1(target: ExactDist, grid_exp: int) -> AdversaryResult:
    L = target.length
    if L > 6:
        raise BudgetError("1-local search is limited to 6 output bits")
    Q = _to_fractions(target)
    best = None
    for st in _structures(L):
        law = _D1Law(st, Q)
        G = st.groups
        if G:
            steps = 1 << (grid_exp if G <= 3 else 2)
            grid = np.linspace(0, 1, steps + 1)
            _, start = law.float_tv_grid(grid)
            start = [Fraction(int(round(v * steps)), steps) for v in start]
            tv, p = _optimise_d1(law, start)
        else:
            p = []
            tv = law.tv(p)
        if best is None or tv < best[0]:
            best = (tv, st, p)
            if tv == 0:
                break
    tv, st, p = best
    biases = tuple(p) if p else (Fraction(1, 2),)
    return AdversaryResult(1, tv, st.function(), biases, "1-local canonical: each output is const or reads one shared/fresh input, negation up to bias symmetry")


def _dep_structures(L: int, d: int):
    """Output j reads d inputs; inputs are labelled in order of first use."""

    def rec(j, deps, top):
        if j == L:
            yield [tuple(x) for x in deps]
            return
        seen = set()
        for k in range(d + 1):
            for old in combinations(range(top), k):
                new = tuple(range(top, top + d - k))
                key = old + new
                if key in seen:
                    continue
                seen.add(key)
                deps.append(key)
                yield from rec(j + 1, deps, top + d - k)
                deps.pop()

    yield from rec(0, [], 0)


def _adversary_grid(d: int, target: ExactDist, grid_exp: int, budget: int | None) -> tuple[float, LocalFunction, tuple] | None:
    L = target.length
    Qf = np.array([float(v) for v in _to_fractions(target)])
    structs = list(_dep_structures(L, d))
    steps = 1 << grid_exp
    ntab = 1 << (1 << d)
    work = 0
    for deps in structs:
        k = max(max(x) for x in deps) + 1
        work += ntab ** L * (steps + 1) ** k
    if work > (1 << (DEFAULT_BUDGET if budget is None else budget)):
        raise BudgetError(f"{d}-local grid search needs about 2^{work.bit_length()} evaluations")
    grid = np.linspace(0, 1, steps + 1)
    best = None
    for deps in structs:
        k = max(max(x) for x in deps) + 1
        mesh = np.array(list(iproduct(grid, repeat=k)))
        # weight of every input assignment at every grid point
        W = np.ones((len(mesh), 1 << k))
        for a in range(1 << k):
            for i in range(k):
                W[:, a] *= mesh[:, i] if (a >> i) & 1 else 1 - mesh[:, i]
        # local address of each output for each assignment
        addr = np.zeros((L, 1 << k), dtype=np.int64)
        for j, dj in enumerate(deps):
            for a in range(1 << k):
                addr[j, a] = sum(((a >> v) & 1) << s for s, v in enumerate(dj))
        for tabs in iproduct(range(ntab), repeat=L):
            o = np.zeros(1 << k, dtype=np.int64)
            for j in range(L):
                o |= ((tabs[j] >> addr[j]) & 1) << j
            acc = np.zeros((len(mesh), 1 << L))
            for a in range(1 << k):
                acc[:, o[a]] += W[:, a]
            tvs = np.abs(acc - Qf).sum(axis=1) / 2
            i = int(np.argmin(tvs))
            if best is None or tvs[i] < best[0] - 1e-12:
                f = LocalFunction(k, tuple(zip(deps, tabs)))
                biases = tuple(Fraction(int(round(v * steps)), steps) for v in mesh[i])
                best = (float(tvs[i]), f, biases)
    return best


def adversary_search(d: int, target: ExactDist, budget: int | None = None, grid_exp: int = 3) -> AdversaryResult:
    """Smallest exact TV to ``target`` over a canonical family of d-local samplers.

    d = 1 covers every 1-local function up to relabelling and negation, with biases
    optimised exactly. For d >= 2 the family is every choice of d-input windows and
    truth tables with biases on a grid of step 2^-grid_exp; the (d-1) result is
    kept when it is better, so the answer never increases with d.
    """
    if d < 1:
        raise ValueError("d >= 1")
    if d == 1:
        return _adversary_d1(target, grid_exp)
    prev = adversary_search(d - 1, target, budget, grid_exp)
    if prev.best_tv == 0:
        return AdversaryResult(d, prev.best_tv, prev.function, prev.biases, prev.family, prev.notes + [f"reused the {d - 1}-local optimum"])
    found = _adversary_grid(d, target, grid_exp, budget)
    notes = [f"{d}-local grid search with bias step 2^-{grid_exp}; not complete over all biases"]
    if found is not None:
        _, f, biases = found
        exact = fraction_tv(fraction_output_law(f, biases), _to_fractions(target))
        if exact < prev.best_tv:
            return AdversaryResult(d, exact, f, biases, f"{d}-local windows, all truth tables", notes)
    return AdversaryResult(d, prev.best_tv, prev.function, prev.biases, prev.family, prev.notes + notes + [f"kept the {d - 1}-local optimum"])


# direct products


def tv_product_lower_bound(epsilon, b: int) -> float:
    """1 - 2 exp(-epsilon^2 b / 2)."""
    eps = float(Fraction(epsilon) if not isinstance(epsilon, Dyadic) else epsilon.to_fraction())
    if not 0 <= eps <= 1 or b < 1:
        raise ValueError("need 0 <= epsilon <= 1 and b >= 1")
    return 1 - 2 * math.exp(-eps * eps * b / 2)


@dataclass(frozen=True)
class DirectProductReport:
    k: int
    per_copy_tv: Fraction
    kfold_tv: Fraction
    delta: Fraction
    lemma_bound: float
    bound_holds: bool
    at_least_per_copy: bool

    def to_json_obj(self) -> dict:
        return {
            "k": self.k,
            "per_copy_tv": str(self.per_copy_tv),
            "kfold_tv": str(self.kfold_tv),
            "kfold_tv_decimal": float(self.kfold_tv),
            "delta": str(self.delta),
            "lemma_bound": self.lemma_bound,
            "bound_holds": self.bound_holds,
            "at_least_per_copy": self.at_least_per_copy,
        }


def direct_product_experiment(
    f: LocalFunction, pi, target: ExactDist, k: int, delta=None, budget: int | None = None
) -> DirectProductReport:
    """Exact TV between k independent copies of f(pi) and target^k.

    ``pi`` is a ProductDist or a sequence of rational biases. The bound uses
    ``delta`` when given, otherwise the measured per-copy TV.
    """
    check_budget(target.length * k, budget, "k-fold product")
    biases = [b.to_fraction() for b in pi.biases] if isinstance(pi, ProductDist) else [Fraction(b) for b in pi]
    P = fraction_output_law(f, biases, budget)
    Q = _to_fractions(target)
    per = fraction_tv(P, Q)
    kt = fraction_tv(fraction_kfold(P, k), fraction_kfold(Q, k))
    dl = per if delta is None else Fraction(delta)
    bound = tv_product_lower_bound(dl, k)
    # the bound is irrational; compare against the exact rational value of the float
    return DirectProductReport(k, per, kt, dl, bound, kt >= Fraction(bound), kt >= per)


# conditioning (union bound over restrictions)


@dataclass(frozen=True)
class ConditioningReport:
    ell: int
    eta1: Fraction
    eta2: Fraction
    bound: Fraction
    measured: Fraction
    holds: bool


def conditioning_bound_check(
    f: LocalFunction, pi: ProductDist, S: Sequence[int], target: ExactDist, split: tuple[int, int], budget: int | None = None
) -> ConditioningReport:
    """Evaluate eta2/(b-a) - (l+1)*eta1 on the restrictions of f over S with
    phi = Re h (range [-1, 1]) and compare with the measured TV(f(pi), target).

    eta2 ranges over the measured expectation gaps; for each choice eta1 is the
    smallest value making every restriction satisfy one of the two alternatives.
    """
    S = list(S)
    if len(S) > 12:
        raise ValueError("|S| must be at most 12")
    whole = output_dist(f, pi, budget)
    measured = tv_distance(whole, target).to_fraction()
    q_phi = complex_parts(expected_h(target, split))[0].to_fraction()
    comps = []
    for rho in range(1 << len(S)):
        w = Fraction(1)
        for k, s in enumerate(S):
            b = pi.biases[s].to_fraction()
            w *= b if (rho >> k) & 1 else 1 - b
        if w == 0:
            continue
        P = output_dist(restrict(f, Restriction.from_bits(S, rho)), pi, budget)
        gap = q_phi - complex_parts(expected_h(P, split))[0].to_fraction()
        comps.append((tv_distance(P, target).to_fraction(), gap))
    ell = len(comps)
    best = None
    for eta2 in sorted({max(Fraction(0), min(g, Fraction(2))) for _, g in comps} | {Fraction(0)}):
        eta1 = max((1 - tv for tv, g in comps if g < eta2), default=Fraction(0))
        bound = eta2 / 2 - (ell + 1) * eta1
        if best is None or bound > best[2]:
            best = (eta1, eta2, bound)
    eta1, eta2, bound = best
    return ConditioningReport(ell, eta1, eta2, bound, measured, bound <= measured)
