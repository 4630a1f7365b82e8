"""Command-line entry point: ``ctinf generate|estimate|maximize|benchmark``.

Exit codes: 0 success, 2 invalid input, 3 capacity or contract violation.
Every randomized command requires ``--seed``; numbers print with 17
significant digits so repeated runs are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from pathlib import Path

import numpy as np

from . import baselines, budgetmax, continest, oracle
from .errors import CapacityError, ContractError, ValidationError
from .instance import read_instance
from .netmodel import (
    assign_random_laws,
    format_network,
    generate_kronecker,
    generate_uniform,
    read_network,
)

PRESETS = {
    "core-periphery": [[0.9, 0.5], [0.5, 0.3]],
    "random": [[0.5, 0.5], [0.5, 0.5]],
    "hierarchical": [[0.9, 0.1], [0.1, 0.9]],
}


def _num(x) -> str:
    return format(float(x), ".17g")


def _range(text: str, what: str):
    try:
        parts = [float(p) for p in text.split(":")]
    except ValueError:
        raise ValidationError(f"{what}: expected numbers separated by ':'") from None
    return parts


def _int_list(text: str, what: str) -> list[int]:
    try:
        return [int(p) for p in text.replace(",", " ").split()]
    except ValueError:
        raise ValidationError(f"{what}: expected a comma-separated list of integers") from None


def _emit(text: str, output) -> None:
    if output is None or output == "-":
        sys.stdout.write(text)
    else:
        try:
            Path(output).write_text(text)
        except OSError as exc:
            raise ValidationError(f"cannot write {output}: {exc.strerror}") from None


def _seeds(seed: int, k: int):
    return np.random.SeedSequence(seed).spawn(k)


# -- generate ------------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.base is not None:
        base = np.array(args.base, dtype=float).reshape(2, 2)
    else:
        base = np.array(PRESETS[args.preset])
    lo, hi = _range(args.param_range, "--param-range")
    graph_seed, law_seed = _seeds(args.seed, 2)
    net = generate_kronecker(base, args.power, graph_seed)
    net = assign_random_laws(net, args.laws, (lo, hi), law_seed)
    _emit(format_network(net), args.output)
    return 0


# -- estimate ------------------------------------------------------------------

def _horizons(args) -> np.ndarray:
    if args.t_grid is not None:
        parts = _range(args.t_grid, "--t-grid")
        if len(parts) != 3 or parts[2] < 1 or parts[2] != int(parts[2]):
            raise ValidationError("--t-grid expects lo:hi:count")
        return np.linspace(parts[0], parts[1], int(parts[2]))
    if args.T is None:
        raise ValidationError("one of --T or --t-grid is required")
    return np.array([args.T])


def cmd_estimate(args) -> int:
    net = read_network(args.network)
    sources = _int_list(args.sources, "--sources")
    Ts = _horizons(args)
    if np.any(Ts < 0):
        raise ValidationError("time horizons must be >= 0")
    order = np.argsort(Ts, kind="stable")
    t0 = time.perf_counter()
    if args.method == "ns":
        counts = oracle.ns_counts(net, sources, Ts[order], args.n, args.seed, args.workers)
        sorted_res = [oracle.summarize(counts[:, h]) for h in range(len(Ts))]
    else:
        sorted_res = continest.continest_estimate(net, sources, list(Ts[order]), args.n, args.m, args.seed, args.workers)
    wall = time.perf_counter() - t0
    res = [None] * len(Ts)
    for pos, h in enumerate(order):
        res[h] = sorted_res[pos]
    m = args.m if args.method == "continest" else 0
    if args.t_grid is None and args.output is None:
        est = res[0]
        sys.stdout.write(
            f"value={_num(est.value)} stderr={_num(est.stderr)} n={est.n_used} m={m} "
            f"method={args.method}\n"
        )
        sys.stderr.write(f"wall_time={wall:.3f}\n")
        return 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["T", "value", "stderr", "n", "m", "method"])
    for T, est in zip(Ts, res):
        w.writerow([_num(T), _num(est.value), _num(est.stderr), est.n_used, m, args.method])
    _emit(buf.getvalue(), args.output)
    sys.stderr.write(f"wall_time={wall:.3f}\n")
    return 0


# -- maximize ------------------------------------------------------------------

def build_problem(instance, n, m, seed, delta, workers=1, budgeted=None):
    """Sketch-backed problem with one independent seed stream per product."""
    system = instance.constraint_system(budgeted)
    oracles = []
    for p, net, ss in zip(instance.products, instance.networks, _seeds(seed, instance.num_products)):
        oracles.append(budgetmax.SketchOracle.from_network(net, p.horizon, n, m, ss, instance.targets, workers))
    return budgetmax.AllocationProblem(
        system,
        oracles,
        np.array([p.weight for p in instance.products]),
        delta,
        [p.horizon for p in instance.products],
        workers,
        instance.networks,
    )


def allocation_csv(problem, alloc) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["product", "user", "gain_at_selection", "threshold", "density"])
    for s in alloc.trace:
        w.writerow([s.product, s.user, _num(s.gain), _num(s.threshold), _num(s.density)])
    return buf.getvalue()


def cmd_maximize(args) -> int:
    inst = read_instance(args.instance)
    if args.uniform and inst.has_costs:
        raise ContractError("--uniform conflicts with the instance's cost file; drop --uniform to use budgets")
    if args.uniform and args.budgeted:
        raise ValidationError("--uniform and --budgeted are mutually exclusive")
    budgeted = True if args.budgeted else (False if args.uniform else None)
    problem = build_problem(inst, args.n, args.m, args.seed, args.delta, args.workers, budgeted)
    if args.baseline is not None:
        kind = baselines.BaselineKind.parse(args.baseline)
        rng = np.random.default_rng(_seeds(args.seed, inst.num_products + 1)[-1])
        alloc = baselines.greedy_degree(problem, kind, rng=rng)
        label = f"baseline={kind.value}"
    elif problem.constraints.knapsacks is not None:
        alloc = budgetmax.enumerate_densities(problem)
        label = "method=enumerate-densities"
    else:
        alloc = budgetmax.maximize_uniform(problem)
        label = "method=uniform"
    _emit(allocation_csv(problem, alloc), args.output)
    rho = "nan" if alloc.rho is None else _num(alloc.rho)
    sys.stderr.write(
        f"value={_num(alloc.value)} k_a={alloc.k_a} rho={rho} delta={_num(args.delta)} "
        f"selected={len(alloc.selected)} {label} wall_time={alloc.wall_time:.3f}\n"
    )
    return 0


# -- benchmark -----------------------------------------------------------------

def benchmark_rows(sizes, edge_factors, seed, n=100, m=5, T=1.0, laws="weibull", products=0, targets=32, delta=0.1):
    """Timing rows ``(nodes, edges, build+estimate seconds, value, ...)``, sorted by size."""
    points = sorted({(int(v), int(round(f * v))) for v in sizes for f in edge_factors})
    # compile the kernels up front so the first row does not pay for it
    warm = assign_random_laws(generate_uniform(8, 16, 0), laws, (0.1, 10.0), 0)
    continest.continest_estimate(warm, [0], T, 2, m, 0)
    rows = []
    for (V, E), ss in zip(points, _seeds(seed, len(points))):
        g_seed, l_seed, s_seed, o_seed = ss.spawn(4)
        net = assign_random_laws(generate_uniform(V, E, g_seed), laws, (0.1, 10.0), l_seed)
        src = [int(np.argmax(net.out_degree()))] if V else []
        t0 = time.perf_counter()
        est = continest.continest_estimate(net, src, T, n, m, s_seed)
        est_time = time.perf_counter() - t0
        row = {"nodes": V, "edges": E, "estimate_seconds": est_time, "estimate_value": est.value}
        if products:
            from .constraints import ConstraintSystem, GroundSet, PartitionMatroid

            cand = np.argsort(-net.out_degree(), kind="stable")[: min(targets, V)]
            ground = GroundSet(products, np.sort(cand))
            system = ConstraintSystem(
                ground, [PartitionMatroid.users(ground, 1), PartitionMatroid.products(ground, max(1, len(cand) // 4))]
            )
            t0 = time.perf_counter()
            oracles = [
                budgetmax.SketchOracle.from_network(net, T, n, m, s, ground.users) for s in o_seed.spawn(products)
            ]
            alloc = budgetmax.maximize_uniform(budgetmax.AllocationProblem(system, oracles, delta=delta))
            row["maximize_seconds"] = time.perf_counter() - t0
            row["maximize_value"] = alloc.value
        rows.append(row)
    return rows


def cmd_benchmark(args) -> int:
    sizes = _int_list(args.sizes, "--sizes")
    factors = [float(f) for f in args.edge_factors.split(",")]
    rows = benchmark_rows(sizes, factors, args.seed, args.n, args.m, args.T, args.laws, args.products, args.targets)
    buf = io.StringIO()
    cols = ["nodes", "edges", "estimate_value", "estimate_seconds"]
    if args.products:
        cols += ["maximize_value", "maximize_seconds"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([r[c] if c in ("nodes", "edges") else _num(r[c]) for c in cols])
    _emit(buf.getvalue(), args.output)
    return 0


# -- argument parsing ----------------------------------------------------------

def _delta(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("delta must lie in (0, 1)")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctinf", description="Continuous-time influence estimation and allocation")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a Kronecker network with random transmission laws")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--base", type=float, nargs=4, metavar=("A", "B", "C", "D"))
    g.add_argument("--power", type=int, required=True)
    g.add_argument("--laws", choices=["exponential", "rayleigh", "weibull"], default="weibull")
    g.add_argument("--param-range", default="0.1:10")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--output")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("estimate", help="estimate influence of a source set")
    e.add_argument("--network", required=True)
    e.add_argument("--sources", required=True, help="comma-separated node ids (may be empty)")
    e.add_argument("--T", type=float)
    e.add_argument("--t-grid", help="lo:hi:count")
    e.add_argument("--method", choices=["continest", "ns"], default="continest")
    e.add_argument("-n", type=_positive_int, default=10_000)
    e.add_argument("-m", type=_positive_int, default=5)
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--workers", type=_positive_int, default=1)
    e.add_argument("--output", help="CSV output path")
    e.set_defaults(func=cmd_estimate)

    x = sub.add_parser("maximize", help="allocate products to users")
    x.add_argument("--instance", required=True)
    x.add_argument("--delta", type=_delta, default=0.1)
    x.add_argument("--uniform", action="store_true", help="require a uniform-cost instance")
    x.add_argument("--budgeted", action="store_true", help="treat per-product costs as knapsacks")
    x.add_argument("--baseline", choices=[k.value for k in baselines.BaselineKind])
    x.add_argument("-n", type=_positive_int, default=200)
    x.add_argument("-m", type=_positive_int, default=5)
    x.add_argument("--seed", type=int, required=True)
    x.add_argument("--workers", type=_positive_int, default=1)
    x.add_argument("--output")
    x.set_defaults(func=cmd_maximize)

    b = sub.add_parser("benchmark", help="timing sweep over network sizes and densities")
    b.add_argument("--sizes", default="1024")
    b.add_argument("--edge-factors", default="2,4")
    b.add_argument("--laws", choices=["exponential", "rayleigh", "weibull"], default="weibull")
    b.add_argument("--T", type=float, default=1.0)
    b.add_argument("-n", type=_positive_int, default=100)
    b.add_argument("-m", type=_positive_int, default=5)
    b.add_argument("--products", type=int, default=0, help="also time a uniform allocation with this many products")
    b.add_argument("--targets", type=_positive_int, default=32)
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--output")
    b.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CapacityError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
