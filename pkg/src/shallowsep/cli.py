"""Command-line front end. Every command prints a report and exits 0 (all checks
pass), 1 (a check failed) or 2 (bad configuration or budget)."""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import __version__
from .analysis import (
    adversary_search,
    complex_parts,
    direct_product_experiment,
    expected_h,
)
from .checks import CHECKS, FULL_SIM_QUBITS, GATE_SET, Fault, dhost_circuit_tv, run_checks
from .circuits import build_dhost_circuit
from .core import DEFAULT_BUDGET, Dyadic, ExactDist, check_budget, sample, tv_distance
from .distributions import (
    DhardParams,
    dhard_exact,
    dhard_sampler,
    dhost_exact,
    dhost_sampler,
    parse_tree,
)
from .localfn import (
    LocalFunction,
    dep_graph,
    eliminate_neighborhoods,
    eliminate_vertices,
    vertex_elimination_threshold,
    output_dist,
)
from .qsim import validate
from .samplers import (
    build_prop_nc0_upper,
    build_prop_nc0_upper2,
    build_reduction,
    build_remark_extension,
    parity_sampler,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _decimal(d) -> float:
    return float(d.to_fraction() if isinstance(d, Dyadic) else Fraction(d))


def _emit(args, result: dict, ok: bool, human: list[str] | None = None) -> int:
    report = {
        "command": args.command,
        "config": _config(args),
        "seed": args.seed,
        "version": __version__,
        "ok": ok,
        "result": result,
    }
    text = json.dumps(report, sort_keys=True, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    if args.json:
        print(text)
    else:
        for line in human if human is not None else _flatten(result):
            print(line)
        print(f"status: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def _flatten(obj, prefix="") -> list[str]:
    if isinstance(obj, dict):
        out = []
        for k in sorted(obj):
            out += _flatten(obj[k], f"{prefix}{k}.")
        return out
    return [f"{prefix[:-1]}: {json.dumps(obj, sort_keys=True)}"]


def _write(path: str, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text + "\n")


# targets and builders shared by several commands


def _target(args) -> ExactDist:
    if args.target in ("dhard", "dhard-star"):
        return dhard_exact(DhardParams(args.n, args.m, args.target == "dhard-star"), budget=args.budget)
    if args.target == "dhost":
        return dhost_exact(parse_tree(args.tree), budget=args.budget)
    raise ConfigError(f"unknown target {args.target}")


def _classical(args):
    """(function, input law, target, locality bound) for a named construction."""
    name = args.name
    if name == "reduction":
        red = build_reduction(parse_tree(args.tree))
        return red.function, red.input_dist(), red.target(), 5, {"K": red.K, "aux": red.aux_count}
    if name == "parity":
        spec = parity_sampler(args.n, args.parity)
    elif name == "upper":
        spec = build_prop_nc0_upper(args.n, args.m)
    elif name == "upper2":
        spec = build_prop_nc0_upper2(args.n, args.m)
    elif name == "remark":
        if args.C is None:
            raise ConfigError("--C is required for the remark construction")
        spec = build_remark_extension(args.n, args.C, not args.no_star)
    else:
        raise ConfigError(f"unknown construction {name}")
    return spec.function, spec.input_biases, spec.target(), spec.claimed_locality, {"target": spec.target_desc}


# commands


def cmd_verify_quantum(args) -> int:
    tree = parse_tree(args.tree)
    c = build_dhost_circuit(tree)
    if args.fault:
        f = Fault.parse(args.fault)
        if f.kind != "gate":
            raise ConfigError("verify-quantum takes gate faults only")
        c = f.apply_gate(c)
    if args.emit_circuit:
        _write(args.emit_circuit, c.to_json())
    bound = 2 * max(tree.max_degree, 2) + 1
    geometric = c.layout is not None
    val = validate(c, max_depth=bound, gate_set=GATE_SET, hadamard_first_last_only=True, geometric=geometric)
    factored = args.factored or c.qubit_count > FULL_SIM_QUBITS
    if not factored:
        check_budget(c.qubit_count, args.budget, "statevector")
    try:
        tv, mode = dhost_circuit_tv(tree, c, factored=factored, budget=args.budget)
        err = None
    except ValueError as exc:
        # factored mode refuses circuits it cannot split per x value
        if not factored:
            raise
        tv, mode, err = None, "factored", str(exc)
    result = {
        "tree": tree.to_json_obj(),
        "qubits": c.qubit_count,
        "depth": c.depth,
        "depth_bound": bound,
        "geometric_layout": geometric,
        "validation": val.to_json_obj(),
        "mode": mode,
        "tv": None if tv is None else str(tv),
    }
    if err:
        result["error"] = err
    ok = tv is not None and tv == 0 and val.ok
    human = [
        f"tree: {args.tree}  qubits: {c.qubit_count}  depth: {c.depth} (bound {bound})",
        f"validation: {'ok' if val.ok else val.to_json_obj()['violations']}",
        f"simulation: {mode}",
        f"TV to D_host: {result['tv']}" + (f"  ({err})" if err else ""),
    ]
    return _emit(args, result, ok, human)


def cmd_verify_classical(args) -> int:
    f, pi, target, bound, extra = _classical(args)
    if args.fault:
        flt = Fault.parse(args.fault)
        if flt.kind != "table":
            raise ConfigError("verify-classical takes table faults only")
        f = flt.apply_table(f)
    if args.emit_function:
        _write(args.emit_function, f.to_json())
    tv = tv_distance(output_dist(f, pi, args.budget), target)
    result = {"name": args.name, "locality": f.locality, "locality_bound": bound, "tv": str(tv), "inputs": f.input_count, "outputs": f.output_count}
    result.update(extra)
    ok = tv == 0 and f.locality <= bound
    human = [f"{args.name}: locality {f.locality} (bound {bound}), TV to target {tv}"]
    return _emit(args, result, ok, human)


def cmd_exact(args) -> int:
    d = _target(args)
    result = {"dist": d.to_json_obj(), "length": d.length, "support_size": int(len(d.support()))}
    human = [f"{k}: {v}" for k, v in sorted(d.pmf().items())]
    return _emit(args, result, True, human)


def cmd_tv(args) -> int:
    with open(args.p) as fh:
        p = ExactDist.from_json(fh.read())
    with open(args.q) as fh:
        q = ExactDist.from_json(fh.read())
    tv = tv_distance(p, q)
    return _emit(args, {"tv": str(tv), "tv_decimal": _decimal(tv)}, True, [f"TV: {tv}  ({_decimal(tv):.6g})"])


def cmd_sample(args) -> int:
    if args.count < 0:
        raise ConfigError("--count must be non-negative")
    if args.dist:
        with open(args.dist) as fh:
            draws = sample(ExactDist.from_json(fh.read()), args.seed, args.count)
    elif args.target in ("dhard", "dhard-star"):
        draws = dhard_sampler(DhardParams(args.n, args.m, args.target == "dhard-star"), args.seed, args.count)
    else:
        draws = dhost_sampler(parse_tree(args.tree), args.seed, args.count)
    out = [str(b) for b in draws]
    return _emit(args, {"samples": out}, True, out)


def cmd_adversary(args) -> int:
    target = _target(args)
    r = adversary_search(args.d, target, args.budget, args.grid_exp)
    recheck = r.recheck(target)
    result = r.to_json_obj()
    result["recheck"] = str(recheck)
    ok = recheck == r.best_tv
    if args.expect is not None:
        result["expected"] = args.expect
        ok &= r.best_tv == Fraction(args.expect)
    human = [
        f"d={args.d} best TV {r.best_tv} (~{float(r.best_tv):.6g}), recheck {recheck}",
        f"biases: {', '.join(str(b) for b in r.biases)}",
        f"family: {r.family}",
    ] + [f"note: {n}" for n in r.notes]
    return _emit(args, result, ok, human)


def cmd_potential(args) -> int:
    d = _target(args)
    if args.target == "dhost":
        raise ConfigError("potential is defined on (x, y) targets")
    re, im = complex_parts(expected_h(d, (args.n, args.m)))
    result = {"re": str(re), "im": str(im), "re_decimal": _decimal(re)}
    ok = True
    if args.target == "dhard":
        want = Dyadic(1, 1) + Dyadic(1, args.n + 1)
        result["expected"] = str(want)
        ok = re == want and im == 0
    return _emit(args, result, ok, [f"E[h] = {re} + {im} i" + (f"  (expected {result['expected']})" if "expected" in result else "")])


def cmd_directprod(args) -> int:
    target = _target(args)
    r = adversary_search(args.d, target, args.budget, args.grid_exp)
    delta = Fraction(args.delta) if args.delta is not None else None
    rows = []
    ok = True
    prev = None
    for k in range(1, args.k + 1):
        rep = direct_product_experiment(r.function, r.biases, target, k, delta=delta, budget=args.budget)
        row = rep.to_json_obj()
        row["monotone"] = prev is None or rep.kfold_tv >= prev
        ok &= row["monotone"] and rep.bound_holds and rep.at_least_per_copy
        prev = rep.kfold_tv
        rows.append(row)
    result = {"witness": r.to_json_obj(), "rows": rows}
    human = [f"witness TV {r.best_tv}"] + [
        f"k={row['k']}: kfold TV {row['kfold_tv']} (~{row['kfold_tv_decimal']:.6g}) bound {row['lemma_bound']:.6g} {'ok' if row['bound_holds'] and row['monotone'] else 'FAIL'}"
        for row in rows
    ]
    return _emit(args, result, ok, human)


def cmd_eliminate(args) -> int:
    if args.function:
        with open(args.function) as fh:
            f = LocalFunction.from_json(fh.read())
    elif args.name:
        f = _classical(args)[0]
    else:
        raise ConfigError("give --function FILE or --name")
    g = dep_graph(f)
    if args.mode == "vertex":
        d = max(1, g.d)
        lam = Fraction(args.lam) if args.lam is not None else vertex_elimination_threshold(d, args.beta)
        res = eliminate_vertices(g, args.beta, lam)
        result = {
            "mode": "vertex",
            "S": res.S,
            "R": res.R,
            "beta": str(res.beta),
            "lambda": str(res.lam),
            "size_ok": res.size_ok,
            "count_ok": res.count_ok,
            "verified": res.verified,
        }
        ok = res.verified
    else:
        res = eliminate_neighborhoods(g, x_part=args.x_part)
        result = {
            "mode": "neighborhood",
            "S": res.S,
            "indices": res.indices,
            "t": res.t,
            "r": res.r,
            "feasible": res.feasible,
            "verified": res.verified,
            "diagnostic": res.diagnostic,
        }
        ok = res.feasible and res.verified
    return _emit(args, result, ok)


def cmd_report(args) -> int:
    names = args.checks.split(",") if args.checks else None
    fault = Fault.parse(args.fault) if args.fault else None
    results = run_checks(names, fault, args.budget)
    ok = all(r.ok for r in results)
    width = max(len(r.name) for r in results)
    human = [f"{r.name:<{width}}  {'PASS' if r.ok else 'FAIL'}" for r in results]
    return _emit(args, {"checks": [r.to_json_obj() for r in results]}, ok, human)


# parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="random seed (recorded in every report)")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="cap on enumerated bits")
    p.add_argument("--json", action="store_true", help="print the JSON report")
    p.add_argument("--out", help="also write the JSON report here")


def _target_args(p: argparse.ArgumentParser, default="dhard") -> None:
    p.add_argument("--target", choices=["dhard", "dhard-star", "dhost"], default=default)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--tree", default="edge")


def _classical_args(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--name", choices=["parity", "upper", "upper2", "remark", "reduction"], required=required)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--C", type=int, default=None)
    p.add_argument("--no-star", action="store_true", help="remark: target D_hard (1/4-biased x) instead of the uniform-x variant")
    p.add_argument("--parity", type=int, default=0)
    p.add_argument("--tree", default="edge")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shallowsep", description="Exact checks for shallow quantum and local classical samplers.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-quantum", help="build, validate and simulate the D_host circuit")
    p.add_argument("--tree", default="edge")
    p.add_argument("--factored", action="store_true", help="simulate per x value instead of the full statevector")
    p.add_argument("--emit-circuit", metavar="PATH")
    p.add_argument("--fault", help="gate:TREE:LAYER:INDEX drops one gate")
    _common(p)
    p.set_defaults(func=cmd_verify_quantum)

    p = sub.add_parser("verify-classical", help="check a local sampler or the reduction exactly")
    _classical_args(p, required=True)
    p.add_argument("--emit-function", metavar="PATH")
    p.add_argument("--fault", help="table:OUTPUT:ENTRY flips one truth-table bit")
    _common(p)
    p.set_defaults(func=cmd_verify_classical)

    p = sub.add_parser("exact", help="print an exact target distribution")
    _target_args(p)
    _common(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("tv", help="exact TV between two distribution files")
    p.add_argument("--p", required=True)
    p.add_argument("--q", required=True)
    _common(p)
    p.set_defaults(func=cmd_tv)

    p = sub.add_parser("sample", help="draw seeded samples")
    _target_args(p)
    p.add_argument("--dist", help="sample from a distribution file instead")
    p.add_argument("--count", type=int, default=10)
    _common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("adversary", help="best d-local approximation of a target")
    _target_args(p)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--grid-exp", type=int, default=3)
    p.add_argument("--expect", help="fail unless the best TV equals this fraction")
    _common(p)
    p.set_defaults(func=cmd_adversary)

    p = sub.add_parser("potential", help="exact E[h] of a target")
    _target_args(p)
    _common(p)
    p.set_defaults(func=cmd_potential)

    p = sub.add_parser("directprod", help="k-fold TV of the adversary witness")
    _target_args(p)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--grid-exp", type=int, default=3)
    p.add_argument("--delta", default="1/8", help="per-copy distance used in the bound")
    _common(p)
    p.set_defaults(func=cmd_directprod)

    p = sub.add_parser("eliminate", help="graph elimination on a local function")
    _classical_args(p, required=False)
    p.add_argument("--function", help="LocalFunction JSON file")
    p.add_argument("--mode", choices=["vertex", "neighborhood"], default="vertex")
    p.add_argument("--beta", type=int, default=1)
    p.add_argument("--lam", default=None)
    p.add_argument("--x-part", type=int, default=None)
    _common(p)
    p.set_defaults(func=cmd_eliminate)

    p = sub.add_parser("report", help="run the acceptance checks")
    p.add_argument("--checks", help=f"comma list from {','.join(CHECKS)}")
    p.add_argument("--fault", help="table:OUTPUT:ENTRY (upper, n=1) or gate:TREE:LAYER:INDEX")
    _common(p)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
