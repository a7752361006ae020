"""Command-line harness: file fetches, overhead benchmarks, the analyzer
front end and a few topology/directory utilities."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import analyzer, simnet, topology as topo_mod
from .directory import Directory
from .names import Name
from .simnet import MODES, PLAIN, CostModel, Fetch, FetchMetrics, Simulator, TraceLog
from .topology import ConfigError, Topology

log = logging.getLogger(__name__)

DESK_SIZES = (64 * 1024, 1024 * 1024, 8 * 1024 * 1024)
CSV_COLUMNS = ("mode", "size", "run", "total_ms", "setup_ms", "overhead_ratio")


@dataclass
class FetchResult:
    metrics: FetchMetrics
    trace: TraceLog
    producer_interests: int
    sim: Simulator

    def record(self) -> dict:
        m = self.metrics
        return {
            "consumer": m.consumer,
            "name": m.name.to_uri(),
            "mode": m.mode,
            "size": m.size,
            "segments": m.segments,
            "complete": m.complete,
            "total_ms": m.total_ms,
            "setup_ms": m.setup_ms,
            "include_setup": m.include_setup,
            "bytes_on_wire": m.bytes_on_wire,
            "producer_interests": self.producer_interests,
            "rtts_ms": m.rtts_ms,
        }


def _default_name(topology: Topology) -> Name:
    producers = topology.by_role("producer")
    if not producers:
        raise ConfigError("topology has no producer")
    return topology.nodes[producers[0]].prefix / "file"


def cmd_fetch(topology: Topology, name: Name | str | None = None, mode: str = PLAIN,
              size: int = 1024 * 1024, seed: int = 0, include_setup: bool = True,
              costs: CostModel | None = None, consumer: str | None = None) -> FetchResult:
    """Fetch ``size`` bytes from the first producer and report timings."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {', '.join(MODES)}")
    consumers = topology.by_role("consumer")
    if not consumers:
        raise ConfigError("topology has no consumer")
    consumer = consumer or consumers[0]
    name = _default_name(topology) if name is None else name
    sim = Simulator(topology, seed, costs=costs)
    sim.submit(Fetch(consumer, name, size, mode, include_setup=include_setup))
    trace = sim.run()
    metrics = sim.metrics[0]
    if not metrics.complete:
        raise simnet.FetchTimeout(f"{len(metrics.failed)} segments of {metrics.name} failed")
    producer_interests = sum(sim.app(p).interests_received for p in topology.by_role("producer"))
    return FetchResult(metrics, trace, producer_interests, sim)


def cmd_bench(sizes=DESK_SIZES, repeats: int = 1, seed: int = 0,
              topology: Topology | None = None, include_setup: bool = True,
              trace_dir: str | Path | None = None) -> list[dict]:
    """Run every mode at every size ``repeats`` times.

    Run ``r`` uses seed ``seed + r`` for all three modes so that the ratio
    compares like with like.
    """
    topology = topology or topo_mod.line4()
    rows = []
    for size in sizes:
        for run in range(repeats):
            baseline = None
            for mode in MODES:
                result = cmd_fetch(topology, None, mode, size, seed + run, include_setup)
                total = result.metrics.total_ms
                if mode == PLAIN:
                    baseline = total
                rows.append({"mode": mode, "size": size, "run": run, "total_ms": total,
                             "setup_ms": result.metrics.setup_ms,
                             "overhead_ratio": total / baseline})
                if trace_dir is not None:
                    Path(trace_dir).mkdir(parents=True, exist_ok=True)
                    result.trace.write(Path(trace_dir) / f"{mode}-{size}-{run}.trace")
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({**row, "total_ms": f"{row['total_ms']:.3f}",
                         "setup_ms": f"{row['setup_ms']:.3f}",
                         "overhead_ratio": f"{row['overhead_ratio']:.4f}"})
    return buf.getvalue()


def cmd_analyze(scenario_file: str | Path) -> tuple[int, list[dict]]:
    """Return (exit code, verdicts)."""
    scenario = analyzer.load_scenario(scenario_file)
    verdicts = analyzer.analyze(scenario)
    ok = all(v["verdict"] in ("Anonymous", "Unlinkable") for v in verdicts)
    return (0 if ok else 2), verdicts


# -- argument handling -----------------------------------------------------------

def _load_topology(path: str | None) -> Topology:
    return topo_mod.line4() if path is None else Topology.load(path)


def _sizes(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="andana", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="fetch one segmented file")
    p.add_argument("--topology", help="topology JSON (default: 4-node line)")
    p.add_argument("--name", help="content name (default: <first producer>/file)")
    p.add_argument("--mode", choices=MODES, default=PLAIN)
    p.add_argument("--size", type=int, default=1024 * 1024, help="bytes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--include-setup", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--trace", help="write the trace log here")

    p = sub.add_parser("bench", help="overhead grid over modes and sizes")
    p.add_argument("--topology")
    p.add_argument("--sizes", type=_sizes, default=list(DESK_SIZES), help="comma-separated bytes")
    p.add_argument("--size", type=int, help="single size, overrides --sizes")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--include-setup", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--csv", help="write CSV here instead of stdout")
    p.add_argument("--trace-dir", help="write one trace log per run into this directory")

    p = sub.add_parser("analyze", help="evaluate an anonymity scenario")
    p.add_argument("--scenario", required=True)

    p = sub.add_parser("topology", help="generate a topology file")
    p.add_argument("shape", choices=("line4", "star"))
    p.add_argument("--consumers", type=int, default=3)
    p.add_argument("--latency-ms", type=float, default=None)
    p.add_argument("-o", "--output")

    p = sub.add_parser("directory", help="directory snapshots")
    dsub = p.add_subparsers(dest="action", required=True)
    d = dsub.add_parser("dump", help="snapshot the ARs of a topology")
    d.add_argument("--topology")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("-o", "--output", required=True)
    d = dsub.add_parser("load", help="list the ARs in a snapshot")
    d.add_argument("path")
    d.add_argument("--now", type=int, default=0, help="ms, for certificate expiry")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return _dispatch(args)
    except (ConfigError, OSError, ValueError, KeyError, simnet.FetchTimeout,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "fetch":
        result = cmd_fetch(_load_topology(args.topology), args.name, args.mode, args.size,
                           args.seed, args.include_setup)
        if args.trace:
            result.trace.write(args.trace)
        print(json.dumps(result.record(), indent=2))
        return 0

    if args.command == "bench":
        sizes = [args.size] if args.size else args.sizes
        rows = cmd_bench(sizes, args.repeats, args.seed, _load_topology(args.topology),
                         args.include_setup, args.trace_dir)
        text = rows_to_csv(rows)
        if args.csv:
            Path(args.csv).write_text(text)
        else:
            sys.stdout.write(text)
        return 0

    if args.command == "analyze":
        code, verdicts = cmd_analyze(args.scenario)
        print(json.dumps(verdicts, indent=2))
        return code

    if args.command == "topology":
        kwargs = {} if args.latency_ms is None else {"latency_ms": args.latency_ms}
        topo = topo_mod.line4(**kwargs) if args.shape == "line4" else topo_mod.star(
            args.consumers, **kwargs)
        if args.output:
            topo.dump(args.output)
        else:
            print(topo.dumps())
        return 0

    if args.command == "directory":
        if args.action == "dump":
            sim = Simulator(_load_topology(args.topology), args.seed)
            sim.directory.dump(args.output)
            print(f"wrote {len(sim.directory.list_ars())} descriptors to {args.output}")
            return 0
        directory = Directory.load(args.path)
        for desc in directory.list_ars(args.now):
            print(f"{desc.namespace.to_uri()}\t{desc.organization}\t"
                  f"{desc.signing_fingerprint.hex()[:16]}\t{len(desc.encryption_certificates)}")
        return 0
    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
