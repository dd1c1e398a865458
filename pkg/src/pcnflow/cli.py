"""Command-line front end: gen, run, verify, decompose, execute.

Every run is a pure function of (input files, flags, seed): randomized
choices derive from the seed, artifacts are written with fixed key order,
and repeated invocations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import random
import sys

from . import mpc
from .cycles import (
    CycleFlow,
    decompose,
    decomposition_from_json_dict,
    decomposition_to_dot,
    decomposition_to_json_dict,
    validate_decomposition,
)
from .execution import (
    AdversarySpec,
    PartialCycle,
    adversary_from_json_dict,
    events_to_json,
    executions_to_json_dict,
    ledger_to_json_dict,
    net_balance_delta,
    run_execution,
    setup_cycle_htlcs,
)
from .model import (
    ModelError,
    RebalancingInstance,
    build_instance,
    ChannelConstraint,
    dump_instance,
    load_instance,
)
from .oracle import max_circulation_objective
from .solver import (
    SolveReport,
    SolverError,
    circulation_from_json_dict,
    circulation_to_json_dict,
    solve_rebalancing,
)

# Oracle verification is feasible only at desk scale.
ORACLE_MAX_EDGES = 10
ORACLE_MAX_CAPACITY = 5

# Guard against accidental week-long oblivious solves from default bounds.
MAX_UNCONFIRMED_SCHEDULE = 20_000


class InfeasibleShape(ValueError):
    """Requested random shape cannot satisfy the structural rules."""


def generate_instance(
    n: int, m: int, cap_max: int, weight_max: int, seed: int
) -> RebalancingInstance:
    """Random instance: no self loops, duplicates or antiparallel pairs.

    Each unordered node pair can host one directed edge, so at most
    n(n-1)/2 edges fit. Declared bounds are set snugly to the requested
    maxima; keeping them tight is what keeps secret-shared solves cheap.
    """
    if n < 2 or m < 0 or m > n * (n - 1) // 2:
        raise InfeasibleShape(f"cannot place {m} edges on {n} nodes")
    if cap_max < 1 or weight_max < 0:
        raise InfeasibleShape("cap_max must be >= 1 and weight_max >= 0")
    rng = random.Random(seed)
    width = len(str(n - 1))
    names = [f"n{i:0{width}d}" for i in range(n)]
    chosen: dict[tuple[str, str], ChannelConstraint] = {}
    low_weight = 1 if weight_max >= 1 else 0
    while len(chosen) < m:
        u, v = rng.randrange(n), rng.randrange(n)
        if u == v:
            continue
        key = (names[u], names[v])
        if key in chosen or (key[1], key[0]) in chosen:
            continue
        chosen[key] = ChannelConstraint(
            key[0],
            key[1],
            rng.randint(1, cap_max),
            rng.randint(low_weight, weight_max) if weight_max else 0,
        )
    return build_instance(
        names,
        chosen.values(),
        capacity_bound=cap_max,
        weight_bound=max(1, weight_max),
    )


def child_seed(seed: int, *labels) -> int:
    text = "/".join(str(x) for x in (seed, *labels))
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def verify_artifacts(
    instance: RebalancingInstance,
    circulation_doc: dict,
    decomposition_doc: dict | None,
    report_doc: dict | None = None,
) -> list[str]:
    """Re-check pipeline outputs; returns a list of reasons, empty when ok."""
    reasons: list[str] = []
    try:
        circ = circulation_from_json_dict(circulation_doc, instance)
    except (ModelError, ValueError) as exc:
        return [f"circulation invalid: {exc}"]

    if report_doc is not None and report_doc.get("objective") != circ.objective():
        reasons.append(
            f"report objective {report_doc.get('objective')} != circulation {circ.objective()}"
        )

    if decomposition_doc is not None:
        try:
            dec = decomposition_from_json_dict(decomposition_doc, circ)
        except (ModelError, ValueError) as exc:
            reasons.append(f"decomposition invalid: {exc}")
        else:
            if not validate_decomposition(dec):
                reasons.append("decomposition does not sum to the circulation")

    small = instance.m <= ORACLE_MAX_EDGES and all(
        e.capacity <= ORACLE_MAX_CAPACITY for e in instance.edges
    )
    if small:
        best = max_circulation_objective(instance)
        if circ.objective() < best:
            reasons.append(f"objective {circ.objective()} below oracle optimum {best}")
        elif circ.objective() > best:
            reasons.append(
                f"objective {circ.objective()} above oracle optimum {best} (infeasible?)"
            )
    return reasons


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _load_adversary(path: str | None) -> AdversarySpec:
    if path is None:
        return AdversarySpec.honest()
    with open(path, encoding="utf-8") as fh:
        return adversary_from_json_dict(json.load(fh))


def _report_doc(report: SolveReport) -> dict:
    return {
        "objective": report.objective,
        "iterations": report.iterations,
        "terminated_early": report.terminated_early,
    }


def _run_pipeline(args) -> int:
    instance = load_instance(args.instance)
    os.makedirs(args.outdir, exist_ok=True)

    report = solve_rebalancing(instance, iteration_bound=args.iter_bound)
    mpc_artifacts: dict[str, str] = {}
    if args.mpc:
        delegates = mpc.select_delegates(instance.nodes, args.k, args.seed)
        session = mpc.MpcSession(args.k, args.seed)
        shared = session.share_instance(instance)
        schedule = args.schedule
        if schedule is None:
            schedule = mpc.default_schedule(shared.public_shape())
            if schedule > MAX_UNCONFIRMED_SCHEDULE:
                raise ModelError(
                    f"declared bounds imply a {schedule}-round oblivious schedule; "
                    "tighten the instance bounds or pass --schedule explicitly"
                )
        shared_flows, transcript = session.private_solve(shared, schedule)
        circ = session.reconstruct_circulation(shared_flows, instance)
        full = schedule >= mpc.default_schedule(shared.public_shape())
        if full and circ.objective() != report.objective and args.iter_bound is None:
            raise SolverError(
                "private solve objective diverged from the plaintext optimum"
            )
        report = SolveReport(
            circulation=circ,
            objective=circ.objective(),
            iterations=schedule,
            terminated_early=not full,
        )
        mpc_artifacts["mpc_transcript.txt"] = transcript.dumps()
        mpc_artifacts["delegates.json"] = _json(
            {"k": args.k, "delegates": list(delegates.delegates)}
        )

    circulation = report.circulation
    dec = decompose(circulation)
    executions = [
        setup_cycle_htlcs(c, child_seed(args.seed, "cycle", i))
        for i, c in enumerate(dec.cycles)
    ]
    adversary = _load_adversary(args.adversary)
    ledger, statuses = run_execution(executions, adversary)

    _write(f"{args.outdir}/instance.json", dump_instance(instance))
    _write(f"{args.outdir}/circulation.json", _json(circulation_to_json_dict(circulation)))
    _write(f"{args.outdir}/report.json", _json(_report_doc(report)))
    _write(f"{args.outdir}/decomposition.json", _json(decomposition_to_json_dict(dec)))
    _write(f"{args.outdir}/executions.json", _json(executions_to_json_dict(executions)))
    _write(f"{args.outdir}/ledger.json", _json(ledger_to_json_dict(ledger)))
    _write(f"{args.outdir}/events.json", events_to_json(ledger))
    for name, text in sorted(mpc_artifacts.items()):
        _write(f"{args.outdir}/{name}", text)
    if args.dot:
        _write(args.dot, decomposition_to_dot(dec))

    for node in instance.nodes:
        if net_balance_delta(ledger, node) != 0:
            raise PartialCycle(f"balance conservation broken at {node}")

    completed = sum(1 for s in statuses if s.value == "completed")
    print(
        f"objective {report.objective}, {len(dec.cycles)} cycles, "
        f"{completed} completed, {len(statuses) - completed} aborted"
    )
    return 0


def _cmd_gen(args) -> int:
    instance = generate_instance(args.nodes, args.edges, args.cap_max, args.weight_max, args.seed)
    text = dump_instance(instance)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_decompose(args) -> int:
    instance = load_instance(args.instance)
    with open(args.circulation, encoding="utf-8") as fh:
        circ = circulation_from_json_dict(json.load(fh), instance)
    dec = decompose(circ)
    text = _json(decomposition_to_json_dict(dec))
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    if args.dot:
        _write(args.dot, decomposition_to_dot(dec))
    return 0


def _cycles_from_doc(data: dict) -> list[CycleFlow]:
    if not isinstance(data, dict) or "cycles" not in data:
        raise ModelError("malformed decomposition document")
    return [CycleFlow(tuple(raw["vertices"]), raw["weight"]) for raw in data["cycles"]]


def _cmd_execute(args) -> int:
    with open(args.decomposition, encoding="utf-8") as fh:
        cycles = _cycles_from_doc(json.load(fh))
    executions = [
        setup_cycle_htlcs(c, child_seed(args.seed, "cycle", i))
        for i, c in enumerate(cycles)
    ]
    adversary = _load_adversary(args.adversary)
    ledger, statuses = run_execution(executions, adversary)
    os.makedirs(args.outdir, exist_ok=True)
    _write(f"{args.outdir}/executions.json", _json(executions_to_json_dict(executions)))
    _write(f"{args.outdir}/ledger.json", _json(ledger_to_json_dict(ledger)))
    _write(f"{args.outdir}/events.json", events_to_json(ledger))
    print(", ".join(s.value for s in statuses) or "no cycles")
    return 0


def _cmd_verify(args) -> int:
    instance = load_instance(args.instance)
    circ_path = args.circulation or f"{args.outdir}/circulation.json"
    with open(circ_path, encoding="utf-8") as fh:
        circulation_doc = json.load(fh)
    decomposition_doc = None
    dec_path = args.decomposition or (f"{args.outdir}/decomposition.json" if args.outdir else None)
    if dec_path:
        try:
            with open(dec_path, encoding="utf-8") as fh:
                decomposition_doc = json.load(fh)
        except FileNotFoundError:
            pass
    report_doc = None
    if args.outdir:
        try:
            with open(f"{args.outdir}/report.json", encoding="utf-8") as fh:
                report_doc = json.load(fh)
        except FileNotFoundError:
            pass
    reasons = verify_artifacts(instance, circulation_doc, decomposition_doc, report_doc)
    if reasons:
        for r in reasons:
            print(f"FAIL: {r}")
        return 1
    print("OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcnflow",
        description="Optimal payment-channel rebalancing pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a random instance")
    gen.add_argument("-n", "--nodes", type=int, required=True)
    gen.add_argument("-m", "--edges", type=int, required=True)
    gen.add_argument("--cap-max", type=int, default=5)
    gen.add_argument("--weight-max", type=int, default=1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--out")
    gen.set_defaults(func=_cmd_gen)

    run = sub.add_parser("run", help="solve, decompose and execute an instance")
    run.add_argument("instance")
    run.add_argument("--outdir", required=True)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--iter-bound", type=int, default=None)
    run.add_argument("--mpc", action="store_true", help="solve over secret shares")
    run.add_argument("--k", type=int, default=3, help="delegate count for --mpc")
    run.add_argument("--schedule", type=int, default=None, help="oblivious cancel rounds")
    run.add_argument("--adversary", default=None, help="adversary policy JSON")
    run.add_argument("--dot", default=None, help="write decomposition DOT here")
    run.set_defaults(func=_run_pipeline)

    dec = sub.add_parser("decompose", help="decompose a circulation into cycles")
    dec.add_argument("instance")
    dec.add_argument("--circulation", required=True)
    dec.add_argument("-o", "--out")
    dec.add_argument("--dot", default=None)
    dec.set_defaults(func=_cmd_decompose)

    exe = sub.add_parser("execute", help="run HTLC execution for a decomposition")
    exe.add_argument("--decomposition", required=True)
    exe.add_argument("--outdir", required=True)
    exe.add_argument("--seed", type=int, default=0)
    exe.add_argument("--adversary", default=None)
    exe.set_defaults(func=_cmd_execute)

    ver = sub.add_parser("verify", help="independently re-check run artifacts")
    ver.add_argument("instance")
    ver.add_argument("--outdir", default=None)
    ver.add_argument("--circulation", default=None)
    ver.add_argument("--decomposition", default=None)
    ver.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModelError, InfeasibleShape, mpc.KTooLarge, mpc.OutOfRange) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, PartialCycle) as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
