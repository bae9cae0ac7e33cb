"""Command line front end.

Sub-commands: ``elect``, ``simulate``, ``check`` and ``trace-replay``.
Machine-readable results go to stdout, diagnostics to stderr.

Exit codes: 0 success, 1 a verdict failed, 2 usage or input error,
3 an invariant was violated during simulation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import scenarios
from .election import elect
from .io import InputError, metrics_csv, read_ballots, read_config, read_scenario, write_genesis
from .monitors import InvariantViolation, check_trace
from .oracle import check_proportionality, classic_stv
from .simnet import Scenario, ScenarioError, Simulator, Trace

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_VIOLATION = 3


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _dump(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def cmd_elect(args) -> int:
    config = read_config(args.config, quota_mode=args.quota, transfer=args.transfer)
    ballots = read_ballots(args.ballots)
    if len(ballots) < config.ballot_threshold:
        _err(f"{args.ballots}: {len(ballots)} ballots, need at least n - t = {config.ballot_threshold}")
        return EXIT_USAGE
    started = time.perf_counter()
    result, counted, rejected = elect(config, ballots)
    for ballot, reason in rejected:
        _err(f"{args.ballots}: ballot from {ballot.voter!r} rejected: {reason}")
    if result is None:
        _err(f"only {len(counted)} valid ballots from distinct voters; need {config.ballot_threshold}")
        return EXIT_USAGE
    out = result.to_dict()
    verdict_ok = True
    if args.oracle:
        mode = args.check_mode
        if mode == "auto":
            mode = "enumerate" if config.m <= 10 else "sampled"
        verdict = check_proportionality(counted, config, result, mode=mode, samples=args.samples, seed=args.seed)
        oracle = {
            "proportionality": {
                "mode": mode,
                "ok": verdict.ok,
                "checked": verdict.checked,
                "witness": None if verdict.witness is None else [verdict.witness[0], verdict.witness[1], list(verdict.witness[2])],
            },
            "classic_stv": None,
        }
        verdict_ok = verdict.ok
        if config.t == 0 and len(counted) == config.n:
            reference = classic_stv(counted, config.n, config.k, config.candidates, config.transfer)
            same = reference.members == result.members
            oracle["classic_stv"] = {"members": list(reference.members), "matches": same}
            verdict_ok = verdict_ok and same
        out["oracle"] = oracle
    _err(f"elect: {time.perf_counter() - started:.3f}s wall-clock (informational)")
    print(json.dumps(out))
    return EXIT_OK if verdict_ok else EXIT_FAIL


def _load_scenario(source: str) -> Scenario:
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        builder = scenarios.BUILDERS.get(name)
        if builder is None:
            raise InputError(f"unknown builtin scenario {name!r}; choose from {sorted(scenarios.BUILDERS)}")
        if name == "mixed":
            return builder(4, 0)
        if name == "reconfiguration":
            return builder(7)
        return builder()
    return read_scenario(source)


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    os.makedirs(args.out, exist_ok=True)
    binary = args.trace_format == "binary"
    trace_path = os.path.join(args.out, "trace.jsonl.gz" if binary else "trace.jsonl")
    sim = Simulator(scenario, args.trace_level)
    write_genesis(os.path.join(args.out, "genesis.json"), sim.genesis)
    started = time.perf_counter()
    try:
        result = sim.run()
    except InvariantViolation as err:
        sim.trace.write(trace_path, binary)
        witness = os.path.join(args.out, "violation.json")
        with open(witness, "w", encoding="utf-8") as fh:
            json.dump(err.to_dict(), fh, indent=2, sort_keys=True)
        _err(f"invariant violated: {err.monitor} at event {err.event_index}; witness in {witness}")
        _dump({"violation": err.to_dict(), "witness_path": witness})
        return EXIT_VIOLATION
    result.trace.write(trace_path, binary)
    with open(os.path.join(args.out, "metrics.csv"), "w", encoding="utf-8") as fh:
        fh.write(metrics_csv(result.metrics_rows()))
    with open(os.path.join(args.out, "chain.jsonl"), "wb") as fh:
        fh.write(result.chain_dump())
    summary = result.summary()
    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    _err(f"simulate: {time.perf_counter() - started:.3f}s wall-clock (informational)")
    _dump(summary)
    if summary["liveness_failures"]:
        _err(f"liveness bound missed by {len(summary['liveness_failures'])} transactions")
        return EXIT_VIOLATION
    return EXIT_OK


def _load_trace(path: str) -> Trace:
    try:
        return Trace.load(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except (ValueError, EOFError) as exc:
        raise InputError(f"{path}: corrupt trace ({exc})") from None


def cmd_check(args) -> int:
    trace = _load_trace(args.trace)
    try:
        report = check_trace(trace.header, trace.records)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        _err(f"{args.trace}: corrupt trace ({exc!r})")
        return EXIT_USAGE
    _dump(report.to_dict())
    for failure in report.failures:
        _err(f"check failed: {failure}")
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_trace_replay(args) -> int:
    trace = _load_trace(args.trace)
    try:
        scenario = Scenario.from_dict(trace.header["scenario"])
        level = trace.header.get("trace_level", "events")
    except (KeyError, ScenarioError, TypeError, ValueError) as exc:
        _err(f"{args.trace}: cannot rebuild scenario ({exc})")
        return EXIT_USAGE
    sim = Simulator(scenario, level)
    try:
        sim.run()
    except InvariantViolation:
        pass
    original = trace.dumps()
    replayed = sim.trace.dumps()
    identical = original == replayed
    first = None
    if not identical:
        a, b = original.splitlines(), replayed.splitlines()
        first = next((i + 1 for i, (x, y) in enumerate(zip(a, b)) if x != y), min(len(a), len(b)) + 1)
    _dump({"identical": identical, "records": len(sim.trace.records), "first_difference_line": first})
    return EXIT_OK if identical else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="govchain", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("elect", help="run a standalone election from a ballot file")
    p.add_argument("--config", required=True)
    p.add_argument("--ballots", required=True)
    p.add_argument("--quota", choices=("exact", "floored"), default=None)
    p.add_argument("--transfer", choices=("weighted", "count"), default=None)
    p.add_argument("--oracle", action="store_true", help="verify proportionality and compare with classic STV")
    p.add_argument("--check-mode", choices=("auto", "enumerate", "exhaustive", "sampled"), default="auto")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_elect)

    p = sub.add_parser("simulate", help="run a simulation scenario")
    p.add_argument("--scenario", required=True, help="scenario JSON file or builtin:<name>")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--trace-format", choices=("jsonl", "binary"), default="jsonl")
    p.add_argument("--trace-level", choices=("events", "full"), default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="re-verify safety and validity over a recorded trace")
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("trace-replay", help="re-run a trace's scenario and compare byte for byte")
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_trace_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
