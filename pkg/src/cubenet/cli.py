"""Command-line front end.

Subcommands: `topo build|stats`, `tables 1|2|3`, `analyze
partition|repair`, `gossip run|sweep`, `consensus run|sweep`.  Tabular
output is RFC-4180-style CSV with a header row; topologies and run
manifests are JSON.  Every data file gets a manifest sidecar naming
the command, parameters, and seed.  Exit codes: 0 ok, 2 usage/spec
error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time

from . import __version__
from .consensus import ConsensusConfig, cross_size_std, run_consensus, sweep_consensus
from .errors import CubenetError, NumericError
from .gossip import GossipConfig, linear_fit_r2, run_gossip, sweep_sizes
from .reliability import (
    FailureParams,
    analyze_hierarchical,
    partition_tolerance,
)
from .topology import (
    RecursionSpec,
    Topology,
    build_complete_hypercube,
    build_recursive,
    build_ring_lattice,
    build_rooted_tree,
    build_star,
)
from .errors import SpecError

EXIT_USAGE = 2
EXIT_NUMERIC = 3


def read_spec_file(path: str) -> dict:
    """Topology spec as JSON or key=value lines."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.strip()
    if stripped.startswith("{"):
        return json.loads(stripped)
    spec: dict = {}
    for line in stripped.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SpecError(f"bad spec line {line!r}; expected key=value")
        key, value = line.split("=", 1)
        spec[key.strip()] = value.strip()
    return spec


def _parse_int_list(value) -> list[int]:
    if isinstance(value, list):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(",") if v != ""]


def _parse_float_list(value) -> list[float]:
    if isinstance(value, list):
        return [float(v) for v in value]
    return [float(v) for v in str(value).split(",") if v != ""]


def topology_from_spec(spec: dict) -> Topology:
    kind = spec.get("kind", "recursive" if "mode" in spec or "dims" in spec else None)
    if kind is None:
        raise SpecError("spec needs a 'kind' (or 'mode'/'dims' for recursive)")
    if kind == "hypercube":
        return build_complete_hypercube(int(spec["dim"]))
    if kind == "tree":
        return build_rooted_tree(int(spec["n"]), int(spec.get("degree", 3)))
    if kind == "ring":
        return build_ring_lattice(int(spec["n"]), int(spec["degree"]))
    if kind == "star":
        return build_star(int(spec["n"]))
    if kind == "recursive":
        return build_recursive(recursion_spec_from_dict(spec))
    raise SpecError(f"unknown topology kind {kind!r}")


def recursion_spec_from_dict(spec: dict) -> RecursionSpec:
    mode = str(spec.get("mode", "symmetric"))
    dims = _parse_int_list(spec["dims"])
    distances = _parse_float_list(spec["classes"]) if "classes" in spec else None
    if mode in ("symmetric", "sym", "completely-symmetric"):
        if len(set(dims)) != 1:
            raise SpecError("symmetric mode needs one repeated dimension")
        return RecursionSpec.symmetric(dims[0], len(dims), distances)
    if mode in ("semi", "semi-symmetric"):
        return RecursionSpec.semi(dims, distances)
    raise SpecError(f"unsupported recursion mode {mode!r} in spec files")


def write_manifest(out_path: str, command: str, params: dict, seed, wall_clock_s: float) -> None:
    manifest = {
        "command": command,
        "params": params,
        "seed": seed,
        "artifact_version": __version__,
        "outputs": [out_path],
        "wall_clock_s": wall_clock_s,
    }
    with open(out_path + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_rows(out, header: list[str], rows: list[list]) -> None:
    if out in (None, "-"):
        fh = sys.stdout
        close = False
    else:
        fh = open(out, "w", newline="", encoding="utf-8")
        close = True
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if close:
            fh.close()


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


# -- subcommands --------------------------------------------------------


def cmd_topo(args) -> int:
    if args.action == "build":
        spec = read_spec_file(args.spec)
        start = time.perf_counter()
        topo = topology_from_spec(spec)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(topo.to_json())
                fh.write("\n")
            write_manifest(args.out, "topo build", spec, None, time.perf_counter() - start)
    else:  # stats
        topo = _load_topology(args.topology)
    census = topo.class_census()
    census_str = "/".join(str(census[cid]) for cid in sorted(census))
    degrees = topo.degrees()
    print(
        f"N={topo.n_nodes} L={topo.n_links} "
        f"degree={min(degrees)}..{max(degrees)} census={census_str}"
    )
    return 0


def _load_topology(path: str) -> Topology:
    with open(path, encoding="utf-8") as fh:
        return Topology.from_json(fh.read())


TABLE1_DIMS = (2, 3, 4, 5)
TABLE3_N64 = [
    ("tree", "regular rooted tree", None),
    ("ring", "ring lattice", None),
    ("cube", "0 recursion (6)", RecursionSpec.symmetric(6, 1)),
    ("cube", "1 completely symmetric recursion (3-3)", RecursionSpec.symmetric(3, 2)),
    ("cube", "2 completely symmetric recursions (2-2-2)", RecursionSpec.symmetric(2, 3)),
    ("cube", "1 semi-symmetric recursion (4-2)", RecursionSpec.semi((4, 2))),
]
TABLE3_N4096 = [
    ("tree", "regular rooted tree", None),
    ("ring", "ring lattice", None),
    ("cube", "0 recursion (12)", RecursionSpec.symmetric(12, 1)),
    ("cube", "1 completely symmetric recursion (6-6)", RecursionSpec.symmetric(6, 2)),
    ("cube", "2 completely symmetric recursions (4-4-4)", RecursionSpec.symmetric(4, 3)),
    ("cube", "2 semi-symmetric recursions (5-4-3)", RecursionSpec.semi((5, 4, 3))),
]


def table1_rows() -> list[list]:
    rows = []
    for recursions in (0, 1, 2):
        for dim in TABLE1_DIMS:
            spec = RecursionSpec.symmetric(dim, recursions + 1)
            n = 2 ** (dim * (recursions + 1))
            links = 2 ** (dim * (recursions + 1) - 1) * dim * (recursions + 1)
            rows.append([recursions, dim, n, links])
    return rows


def table2_rows() -> list[list]:
    rows = []
    for recursions, dims in ((0, (4,)), (1, (4, 3)), (2, (4, 3, 2))):
        total = sum(dims)
        rows.append([recursions, "-".join(map(str, dims)), 2**total, 2 ** (total - 1) * total])
    return rows


def _census_by_distance(topo: Topology) -> dict[float, int]:
    census = topo.class_census()
    return {topo.classes[cid].distance_km: count for cid, count in census.items()}


def table3_rows(n_values=(64, 4096), with_reliability=False, budget=4000, seed=0) -> list[list]:
    rows = []
    for n, entries in ((64, TABLE3_N64), (4096, TABLE3_N4096)):
        if n not in n_values:
            continue
        # baseline degree matches the single-level hypercube of the same size
        degree = {64: 6, 4096: 12}[n]
        for kind, label, spec in entries:
            if kind == "tree":
                topo = build_rooted_tree(n, degree)
            elif kind == "ring":
                topo = build_ring_lattice(n, degree)
            else:
                topo = build_recursive(spec)
            by_distance = _census_by_distance(topo)
            counts = [by_distance.get(d, 0) for d in (5000.0, 3000.0, 420.0)]
            row = [n, label, *counts]
            if with_reliability and n == 64:
                row.extend(_reliability_columns(topo, spec, budget, seed))
            rows.append(row)
    return rows


def _reliability_columns(topo, spec, budget, seed):
    import math

    if spec is not None and spec.r > 1:
        agg = analyze_hierarchical(spec, budget=budget, seed=seed, enum_cap=100_000)
        p, t, method = agg.p, agg.t, "aggregated"
    else:
        report = partition_tolerance(topo, budget=budget, seed=seed, enum_cap=100_000)
        p, t, method = report.p, report.t, report.method
    neglog = math.inf if p >= 1.0 else -math.log10(1.0 - p)
    return [_fmt(p), _fmt(neglog), _fmt(t) if t is not None else "", method]


def cmd_tables(args) -> int:
    start = time.perf_counter()
    if args.table == 1:
        header = ["recursions", "dim", "nodes", "links"]
        rows = table1_rows()
    elif args.table == 2:
        header = ["recursions", "dims", "nodes", "links"]
        rows = table2_rows()
    else:
        header = ["nodes", "method", "links_5000km", "links_3000km", "links_420km"]
        if args.reliability:
            header += ["p", "neg_lg_1mp", "avg_min_repair_h", "method_tag"]
        rows = table3_rows(with_reliability=args.reliability, budget=args.budget, seed=args.seed)
    _write_rows(args.out, header, rows)
    if args.out:
        write_manifest(
            args.out,
            f"tables {args.table}",
            {"reliability": getattr(args, "reliability", False)},
            args.seed,
            time.perf_counter() - start,
        )
    return 0


def cmd_analyze(args) -> int:
    start = time.perf_counter()
    topo = _load_topology(args.topology)
    params = FailureParams(k=args.k)
    report = partition_tolerance(
        topo,
        params,
        budget=args.budget,
        seed=args.seed,
        enum_cap=args.enum_cap,
        workers=args.workers,
    )
    header = [
        "topology_id", "N", "L", "k", "lambda", "mu", "i",
        "pi_i", "p_wrong_i", "stderr", "method",
    ]
    topo_id = topo.kind
    single = {lk.class_id for lk in topo.links}
    if len(single) == 1:
        cls = topo.classes[single.pop()]
        lam, mu = cls.lam, cls.mu
    else:
        lam = mu = float("nan")
    rows = [
        [
            topo_id, topo.n_nodes, topo.n_links, report.k, _fmt(lam), _fmt(mu),
            e.i, _fmt(e.pi_i), _fmt(e.p_wrong), _fmt(e.stderr), e.method,
        ]
        for e in report.per_state
    ]
    rows.append(
        [
            topo_id, topo.n_nodes, topo.n_links, report.k, _fmt(lam), _fmt(mu),
            "summary", _fmt(report.p), _fmt(report.t) if report.t is not None else "",
            _fmt(report.stderr), report.method,
        ]
    )
    _write_rows(args.out, header, rows)
    if args.action == "repair":
        t_str = "none" if report.t is None else f"{report.t:.6g}"
        print(f"p={report.p:.12g} avg_min_repair_h={t_str}", file=sys.stderr)
    if args.out:
        write_manifest(
            args.out,
            f"analyze {args.action}",
            {"topology": args.topology, "k": args.k, "budget": args.budget,
             "enum_cap": args.enum_cap, "workers": args.workers},
            args.seed,
            time.perf_counter() - start,
        )
    return 0


def cmd_gossip(args) -> int:
    start = time.perf_counter()
    config = GossipConfig(
        cycles=args.cycles, fanout=args.fanout, delay_prob=args.delay, seed=args.seed
    )
    if args.action == "run":
        topo = _load_topology(args.topology)
        metrics = run_gossip(topo, config)
        header = ["cycle", "forwarded"]
        rows = [[c, int(v)] for c, v in enumerate(metrics.forwarded_per_cycle)]
        rows.append(["total", metrics.total_forwarded])
        params = {"topology": args.topology}
    else:  # sweep
        sizes = _parse_int_list(args.sizes)
        topos = []
        for n in sizes:
            dim = n.bit_length() - 1
            if 2**dim != n:
                raise SpecError(f"sweep sizes must be powers of two, got {n}")
            topos.append((f"hypercube-{n}", build_complete_hypercube(dim)))
        rows_out = sweep_sizes(topos, config, seeds=tuple(range(args.seed, args.seed + 3)))
        header = ["label", "N", "mean_total"]
        rows = [[r.label, r.n_nodes, _fmt(r.mean_total)] for r in rows_out]
        params = {"sizes": sizes}
    _write_rows(args.out, header, rows)
    if args.out:
        params.update({"cycles": args.cycles, "fanout": args.fanout, "delay": args.delay})
        write_manifest(args.out, f"gossip {args.action}", params, args.seed,
                       time.perf_counter() - start)
    return 0


def cmd_consensus(args) -> int:
    start = time.perf_counter()
    config = ConsensusConfig(
        tx_rate=args.tx_rate,
        link_bandwidth=args.bandwidth,
        link_latency=args.latency,
        leader_policy=args.leader_policy,
        rounds=args.rounds,
        seed=args.seed,
    )
    if args.action == "run":
        topo = _load_topology(args.topology)
        report = run_consensus(topo, config)
        header = ["round", "leader", "round_time_s", "committed_tx", "throughput_tps"]
        rows = [
            [r, leader, _fmt(t), c, _fmt(c / t)]
            for r, (leader, t, c) in enumerate(
                zip(report.leader_history, report.per_round_time, report.per_round_committed)
            )
        ]
        rows.append(["summary", "", _fmt(report.elapsed_s), sum(report.per_round_committed),
                     _fmt(report.tx_per_second)])
        params = {"topology": args.topology}
    else:  # sweep
        sizes = _parse_int_list(args.sizes)
        topos = []
        for n in sizes:
            dim = n.bit_length() - 1
            if 2**dim != n:
                raise SpecError(f"sweep sizes must be powers of two, got {n}")
            topos.append(("hypercube", build_complete_hypercube(dim)))
            topos.append(("star", build_star(n)))
        rows_out = sweep_consensus(topos, config)
        header = ["kind", "N", "throughput_tps"]
        rows = [[r.kind, r.n_nodes, _fmt(r.tx_per_second)] for r in rows_out]
        rows.append(["std:hypercube", "", _fmt(cross_size_std(rows_out, "hypercube"))])
        rows.append(["std:star", "", _fmt(cross_size_std(rows_out, "star"))])
        params = {"sizes": sizes}
    _write_rows(args.out, header, rows)
    if args.out:
        params.update(
            {"rounds": args.rounds, "leader_policy": args.leader_policy,
             "bandwidth": args.bandwidth, "latency": args.latency, "tx_rate": args.tx_rate}
        )
        write_manifest(args.out, f"consensus {args.action}", params, args.seed,
                       time.perf_counter() - start)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cubenet", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--out", default=None, help="output file (default stdout)")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p_topo = sub.add_parser("topo", help="build or inspect topologies")
    topo_sub = p_topo.add_subparsers(dest="action", required=True)
    p_build = topo_sub.add_parser("build")
    p_build.add_argument("--spec", required=True, help="JSON or key=value spec file")
    common(p_build, seed=False)
    p_build.set_defaults(func=cmd_topo)
    p_stats = topo_sub.add_parser("stats")
    p_stats.add_argument("--topology", required=True)
    p_stats.set_defaults(func=cmd_topo, out=None)

    p_tables = sub.add_parser("tables", help="regenerate the construction tables")
    p_tables.add_argument("table", type=int, choices=(1, 2, 3))
    p_tables.add_argument("--reliability", action="store_true",
                          help="add reliability columns to the N=64 block of table 3")
    p_tables.add_argument("--budget", type=int, default=4000)
    common(p_tables)
    p_tables.set_defaults(func=cmd_tables)

    p_analyze = sub.add_parser("analyze", help="partition tolerance analysis")
    p_analyze.add_argument("action", choices=("partition", "repair"))
    p_analyze.add_argument("--topology", required=True)
    p_analyze.add_argument("--k", type=int, default=None)
    p_analyze.add_argument("--budget", type=int, default=20000)
    p_analyze.add_argument("--enum-cap", type=int, default=2_000_000)
    p_analyze.add_argument("--workers", type=int, default=1)
    common(p_analyze)
    p_analyze.set_defaults(func=cmd_analyze)

    p_gossip = sub.add_parser("gossip", help="gossip simulation")
    p_gossip.add_argument("action", choices=("run", "sweep"))
    p_gossip.add_argument("--topology")
    p_gossip.add_argument("--sizes", default="16,32,64,128")
    p_gossip.add_argument("--cycles", type=int, default=5000)
    p_gossip.add_argument("--fanout", type=int, default=4)
    p_gossip.add_argument("--delay", type=float, default=0.0)
    common(p_gossip)
    p_gossip.set_defaults(func=cmd_gossip)

    p_cons = sub.add_parser("consensus", help="consensus round simulation")
    p_cons.add_argument("action", choices=("run", "sweep"))
    p_cons.add_argument("--topology")
    p_cons.add_argument("--sizes", default="4,16,64")
    p_cons.add_argument("--rounds", type=int, default=200)
    p_cons.add_argument("--leader-policy", default="random")
    p_cons.add_argument("--bandwidth", type=float, default=10e9)
    p_cons.add_argument("--latency", type=float, default=0.0)
    p_cons.add_argument("--tx-rate", type=float, default=60000.0)
    common(p_cons)
    p_cons.set_defaults(func=cmd_consensus)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gossip" and args.action == "run" and not args.topology:
        parser.error("gossip run requires --topology")
    if args.command == "consensus" and args.action == "run" and not args.topology:
        parser.error("consensus run requires --topology")
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CubenetError, FileNotFoundError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
