"""Command-line entry point: run scenarios, the evasion matrix and the sweeps."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import coflow, harness, scenario
from .topology import build_fat_tree


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=1, help="master seed (default 1)")
    p.add_argument("--out", type=Path, default=None, help="directory for CSV/JSON outputs")
    p.add_argument("--parallel", type=int, default=1, help="worker processes")
    p.add_argument("--trace", action="store_true", help="record per-packet traces")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="underradar",
                                 description="Simulate attacks from compromised switches "
                                             "and the monitors that try to catch them.")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="run one scenario file (baseline + attacked)")
    p.add_argument("scenario", type=Path)
    _common(p)

    p = sub.add_parser("matrix", help="every attack against every monitor")
    _common(p)

    p = sub.add_parser("incast-sweep", help="victim-pod FCT over load x pulse proportion")
    _common(p)
    p.add_argument("--loads", type=_floats, default=list(harness.INCAST_LOADS))
    p.add_argument("--pps", type=_floats, default=list(harness.INCAST_PPS))
    p.add_argument("--k", type=int, default=6)

    p = sub.add_parser("coflow-sweep", help="coflow failure vs misclassification")
    _common(p)
    p.add_argument("--n", type=int, default=10_000, help="coflows per trial")
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--pmc", type=_floats, default=None, help="comma-separated p_mc grid")

    p = sub.add_parser("dump-topology", help="print a topology as TSV")
    p.add_argument("source", nargs="?", default=None,
                   help="scenario file (default: fat-tree given by --k)")
    p.add_argument("--k", type=int, default=4)
    _common(p)
    return ap


def _write(out: Path | None, name: str, text: str) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def cmd_run(args) -> int:
    try:
        rep = harness.run_scenario(args.scenario, seed=args.seed, trace=args.trace, out=args.out)
    except scenario.ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(rep.to_json(), indent=2, sort_keys=True, default=str))
    return 0


def cmd_matrix(args) -> int:
    res = harness.run_matrix(seed=args.seed, parallel=args.parallel, out=args.out)
    print(res.render(), end="")
    return 1 if res.mismatches() else 0


def cmd_incast(args) -> int:
    rows = harness.run_incast_sweep(args.loads, args.pps, seed=args.seed,
                                    parallel=args.parallel, out=args.out, k=args.k)
    print(harness._csv(rows, harness.INCAST_CSV_COLUMNS), end="")
    return 0


def cmd_coflow(args) -> int:
    figs = harness.run_coflow_sweep(n=args.n, trials=args.trials, seed=args.seed,
                                    out=args.out, pmc_grid=args.pmc)
    for name, rows in figs.items():
        print(f"# {name}")
        print(coflow.rows_to_csv(rows), end="")
    return 0


def cmd_dump(args) -> int:
    if args.source:
        try:
            topo = scenario.build_topology(scenario.load(args.source))
        except scenario.ScenarioError as exc:
            print(f"invalid scenario: {exc}", file=sys.stderr)
            return 2
    else:
        topo = build_fat_tree(args.k)
    text = topo.dump()
    _write(args.out, "topology.tsv", text)
    print(text, end="")
    return 0


COMMANDS = {"run": cmd_run, "matrix": cmd_matrix, "incast-sweep": cmd_incast,
            "coflow-sweep": cmd_coflow, "dump-topology": cmd_dump}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.monotonic()
    rc = COMMANDS[args.verb](args)
    print(f"# {args.verb} finished in {time.monotonic() - t0:.1f}s", file=sys.stderr)
    return rc


if __name__ == "__main__":
    sys.exit(main())
