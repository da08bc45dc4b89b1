"""The acceptance checks behind ``shallowsep report``, plus fault injection."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .analysis import (
    adversary_search,
    complex_parts,
    decay_bound_check,
    direct_product_experiment,
    expected_h,
)
from .circuits import build_dhost_circuit, php_y_distribution
from .core import Dyadic, ExactDist, ProductDist, tv_distance
from .distributions import Tree, dhard_exact, dhost_exact, parse_tree
from .localfn import (
    LocalFunction,
    check_neighborhood_elimination,
    check_vertex_elimination,
    decompose_check,
    dep_graph,
    eliminate_neighborhoods,
    eliminate_vertices,
    vertex_elimination_threshold,
    output_dist,
)
from .qsim import QCircuit, factored_tv_to_dhost, measure_dist, run, validate
from .samplers import (
    build_prop_nc0_upper,
    build_prop_nc0_upper2,
    build_reduction,
    build_remark_extension,
)

GATE_SET = {"H", "CS", "CNOT", "TOFFOLI"}
FULL_SIM_QUBITS = 20


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {"name": self.name, "ok": self.ok, "detail": self.detail}


# faults


@dataclass(frozen=True)
class Fault:
    kind: str  # "table" or "gate"
    args: tuple

    @classmethod
    def parse(cls, text: str) -> "Fault":
        """``table:OUTPUT:ENTRY`` or ``gate:TREE:LAYER:INDEX`` (layer 1-based, index 0-based)."""
        parts = text.split(":")
        if parts[0] == "table" and len(parts) == 3:
            return cls("table", (int(parts[1]), int(parts[2])))
        if parts[0] == "gate" and len(parts) >= 4:
            tree = ":".join(parts[1:-2])
            return cls("gate", (tree, int(parts[-2]), int(parts[-1])))
        raise ValueError(f"bad fault spec {text!r}")

    def apply_table(self, f: LocalFunction) -> LocalFunction:
        out, entry = self.args
        return f.with_table_bit_flipped(out, entry)

    def apply_gate(self, c: QCircuit) -> QCircuit:
        _, layer, index = self.args
        if not 1 <= layer <= c.depth or not 0 <= index < len(c.layers[layer - 1]):
            raise ValueError(f"no gate {index} in layer {layer}")
        return c.without_gate(layer - 1, index)


def dhost_circuit_tv(tree: Tree, circuit: QCircuit | None = None, factored: bool | None = None, budget: int | None = None) -> tuple[Dyadic, str]:
    """Exact TV of the circuit's (X, Y, W) law to D_host, and the mode used."""
    c = build_dhost_circuit(tree) if circuit is None else circuit
    if factored is None:
        factored = c.qubit_count > FULL_SIM_QUBITS
    if factored:
        return factored_tv_to_dhost(tree, c), "factored"
    regs = c.registers
    st = run(c)
    law = measure_dist(st, regs["X"] + regs["Z"] + regs["W"])
    return tv_distance(law, dhost_exact(tree, budget=budget)), "full"


def sampler_tv(f: LocalFunction, pi, target: ExactDist) -> Dyadic:
    return tv_distance(output_dist(f, pi), target)


# individual checks


def check_quantum_exact(budget=None) -> CheckResult:
    rows = {}
    for spec in ("edge", "path:3", "comb:2"):
        tv, mode = dhost_circuit_tv(parse_tree(spec), factored=False, budget=budget)
        rows[spec] = {"tv": str(tv), "mode": mode}
    for spec in ("path:5", "path:6", "path:7", "path:8", "path:9", "comb:3"):
        tv, mode = dhost_circuit_tv(parse_tree(spec), factored=True)
        rows[spec] = {"tv": str(tv), "mode": mode}
    return CheckResult("quantum_exact", all(r["tv"] == "0/2^0" for r in rows.values()), rows)


def check_circuit_structure(budget=None) -> CheckResult:
    c = build_dhost_circuit(Tree.comb(3))
    rep = validate(c, max_depth=7, gate_set=GATE_SET, hadamard_first_last_only=True, geometric=True)
    ok = c.depth == 7 and rep.ok and c.gate_kinds() <= GATE_SET
    return CheckResult("circuit_structure", ok, rep.to_json_obj())


def check_php(budget=None) -> CheckResult:
    bad = []
    for n in range(1, 7):
        for x in range(1 << n):
            w = bin(x).count("1")
            got = php_y_distribution(n, x)
            want = ExactDist.uniform(n) if w % 2 else _parity_uniform(n, (w // 2) % 2)
            if tv_distance(got, want) != 0:
                bad.append((n, x))
    return CheckResult("php", not bad, {"failures": bad})


def _parity_uniform(n: int, parity: int) -> ExactDist:
    pmf = {format(y, f"0{n}b")[::-1]: Dyadic(1, n - 1) for y in range(1 << n) if bin(y).count("1") % 2 == parity}
    return ExactDist.from_pmf(n, pmf)


def check_potential(budget=None) -> CheckResult:
    bad = []
    for n in range(1, 7):
        for m in range(1, 5):
            re, im = complex_parts(expected_h(dhard_exact(n, m), (n, m)))
            if re != Dyadic(1, 1) + Dyadic(1, n + 1) or im != 0:
                bad.append((n, m, str(re), str(im)))
    return CheckResult("potential", not bad, {"failures": bad})


def _classical_cases():
    for n in (1, 2, 3):
        yield f"upper n={n}", build_prop_nc0_upper(n), 6
    for n in (2, 3, 4):
        yield f"upper2 n={n}", build_prop_nc0_upper2(n), 6
    for n, C, star in ((3, 1, True), (4, 2, True), (2, 1, False), (4, 2, False)):
        yield f"remark n={n} C={C} star={star}", build_remark_extension(n, C, star), C + 6


def check_classical_upper(budget=None, fault: Fault | None = None) -> CheckResult:
    rows = {}
    ok = True
    for name, spec, bound in _classical_cases():
        f = spec.function
        if fault is not None and name == "upper n=1":
            f = fault.apply_table(f)
        tv = sampler_tv(f, spec.input_biases, spec.target())
        good = tv == 0 and f.locality <= bound
        ok &= good
        rows[name] = {"tv": str(tv), "locality": f.locality, "bound": bound, "ok": good}
    return CheckResult("classical_upper", ok, rows)


def check_reduction(budget=None) -> CheckResult:
    rows = {}
    ok = True
    for spec in ("edge", "path:3"):
        red = build_reduction(parse_tree(spec))
        tv = tv_distance(red.output(), red.target())
        good = tv == 0 and red.function.locality <= 5
        ok &= good
        rows[spec] = {"tv": str(tv), "locality": red.function.locality, "K": red.K}
    return CheckResult("reduction", ok, rows)


ADVERSARY_EXPECTED = Fraction(1, 8)


def check_adversary_floor(budget=None) -> CheckResult:
    target = dhard_exact(1, 1)
    r = adversary_search(1, target, budget)
    recheck = r.recheck(target)
    ok = r.best_tv == ADVERSARY_EXPECTED and recheck == r.best_tv
    return CheckResult(
        "adversary_floor",
        ok,
        {"expected": str(ADVERSARY_EXPECTED), "best_tv": str(r.best_tv), "recheck": str(recheck), "biases": [str(b) for b in r.biases]},
    )


def check_decay(budget=None, seed: int = 0, count: int = 10000) -> CheckResult:
    rng = random.Random(seed)
    cases = [[1, 0, 0, 0], [Fraction(1, 2), Fraction(1, 2), 0, 0], [Fraction(1, 4)] * 4]
    for _ in range(count):
        w = [rng.randint(0, 1000) for _ in range(4)]
        if not any(w):
            w[0] = 1
        cases.append([Fraction(v, sum(w)) for v in w])
    bad = [str(c) for c in cases if not decay_bound_check(c).holds]
    return CheckResult("decay", not bad, {"cases": len(cases), "failures": bad[:5]})


def random_instance(rng: random.Random, n_in: int = 10, n_out: int = 6, d: int = 3):
    outs = []
    for _ in range(n_out):
        k = rng.randint(0, d)
        deps = tuple(sorted(rng.sample(range(n_in), k)))
        outs.append((deps, rng.getrandbits(1 << k)))
    f = LocalFunction(n_in, tuple(outs))
    pi = ProductDist([Dyadic(rng.randint(0, 8), 3) for _ in range(n_in)])
    S = rng.sample(range(n_in), rng.randint(0, 4))
    return f, pi, S


def check_decomposition(budget=None, seed: int = 0, count: int = 200) -> CheckResult:
    rng = random.Random(seed)
    bad_dec = bad_elim = 0
    for _ in range(count):
        f, pi, S = random_instance(rng)
        if not decompose_check(f, pi, S, budget):
            bad_dec += 1
        g = dep_graph(f)
        beta = rng.choice([1, 2])
        v = eliminate_vertices(g, beta, vertex_elimination_threshold(max(1, g.d), beta))
        nb = eliminate_neighborhoods(g)
        if not (v.verified and check_vertex_elimination(g.adj, v)):
            bad_elim += 1
        if nb.feasible and not (nb.verified and check_neighborhood_elimination(g.adj, nb)):
            bad_elim += 1
    return CheckResult("decomposition", bad_dec == 0 and bad_elim == 0, {"instances": count, "decompose_failures": bad_dec, "elimination_failures": bad_elim})


def check_direct_product(budget=None) -> CheckResult:
    target = dhard_exact(1, 1)
    r = adversary_search(1, target, budget)
    rows = {}
    ok = True
    prev = r.best_tv
    for k in (2, 3, 4):
        rep = direct_product_experiment(r.function, r.biases, target, k, delta=Fraction(1, 8))
        mono = rep.kfold_tv >= prev
        prev = rep.kfold_tv
        good = mono and rep.bound_holds
        ok &= good
        rows[str(k)] = {"kfold_tv": str(rep.kfold_tv), "bound": rep.lemma_bound, "monotone": mono, "bound_holds": rep.bound_holds}
    return CheckResult("direct_product", ok, {"delta": "1/8", "witness_tv": str(r.best_tv), "rows": rows})


def check_fault_sensitivity(budget=None) -> CheckResult:
    """Every single truth-table flip of upper (n=1) and every single gate removal from
    the edge circuit must move the output law."""
    spec = build_prop_nc0_upper(1)
    target = spec.target()
    missed = []
    flips = 0
    for j, (deps, _) in enumerate(spec.function.outputs):
        for e in range(1 << len(deps)):
            flips += 1
            if sampler_tv(spec.function.with_table_bit_flipped(j, e), spec.input_biases, target) == 0:
                missed.append(f"table {j}:{e}")
    tree = Tree.edge()
    c = build_dhost_circuit(tree)
    drops = 0
    for li, layer in enumerate(c.layers):
        for gi in range(len(layer)):
            drops += 1
            if dhost_circuit_tv(tree, c.without_gate(li, gi), factored=False)[0] == 0:
                missed.append(f"gate {li + 1}:{gi}")
    return CheckResult("fault_sensitivity", not missed, {"table_flips": flips, "gate_drops": drops, "undetected": missed})


def check_injected_fault(fault: Fault, budget=None) -> CheckResult:
    """The faulty object must still hit its target exactly; a detected fault fails here."""
    if fault.kind == "table":
        spec = build_prop_nc0_upper(1)
        tv = sampler_tv(fault.apply_table(spec.function), spec.input_biases, spec.target())
        where = "upper n=1"
    else:
        tree = parse_tree(fault.args[0])
        c = fault.apply_gate(build_dhost_circuit(tree))
        try:
            tv, _ = dhost_circuit_tv(tree, c, budget=budget)
        except ValueError as exc:  # factored simulation refuses the modified circuit
            return CheckResult("injected_fault", False, {"fault": fault.kind, "error": str(exc)})
        where = fault.args[0]
    return CheckResult("injected_fault", tv == 0, {"fault": fault.kind, "target": where, "tv": str(tv)})


CHECKS: dict[str, Callable[..., CheckResult]] = {
    "quantum_exact": check_quantum_exact,
    "circuit_structure": check_circuit_structure,
    "php": check_php,
    "potential": check_potential,
    "classical_upper": check_classical_upper,
    "reduction": check_reduction,
    "adversary_floor": check_adversary_floor,
    "decay": check_decay,
    "decomposition": check_decomposition,
    "direct_product": check_direct_product,
    "fault_sensitivity": check_fault_sensitivity,
}


def run_checks(names=None, fault: Fault | None = None, budget=None) -> list[CheckResult]:
    names = list(CHECKS) if names is None else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ValueError(f"unknown checks {unknown}")
    out = []
    for name in names:
        if name == "classical_upper":
            out.append(check_classical_upper(budget, fault if fault and fault.kind == "table" else None))
        else:
            out.append(CHECKS[name](budget))
    if fault is not None:
        out.append(check_injected_fault(fault, budget))
    return out
