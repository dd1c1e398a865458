"""Decompose a circulation into sign-consistent cycle flows.

The active set starts as all edges carrying flow. Each round walks the
support graph (always following the smallest-id successor) until a vertex
repeats, peels off that cycle at the minimum flow along it, and drops any
edge that hits zero. Conservation of what remains is preserved by every
peel, so the walk can never get stuck, and at least one edge dies per
round, giving at most m cycles.

Cycles are only ever found among edges still carrying flow, which is what
makes the decomposition sign-consistent: no cycle traverses an edge
against the circulation's direction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .model import ModelError, NodeId
from .solver import Circulation, InvalidCirculation


@dataclass(frozen=True)
class CycleFlow:
    """A simple directed cycle carrying a uniform amount."""

    vertices: tuple[NodeId, ...]
    weight: int

    def edges(self) -> tuple[tuple[NodeId, NodeId], ...]:
        vs = self.vertices
        return tuple((vs[i], vs[(i + 1) % len(vs)]) for i in range(len(vs)))


@dataclass(frozen=True)
class Decomposition:
    cycles: tuple[CycleFlow, ...]
    source: Circulation


def _canonical_rotation(vertices: list[NodeId]) -> tuple[NodeId, ...]:
    lead = vertices.index(min(vertices))
    return tuple(vertices[lead:] + vertices[:lead])


def decompose(circulation: Circulation) -> Decomposition:
    circulation.validate()  # InvalidCirculation: decomposition is undefined
    remaining = {
        (e.src, e.dst): f
        for e, f in zip(circulation.instance.edges, circulation.flows)
        if f > 0
    }
    # Successor lists on the support, kept sorted for determinism.
    succ: dict[NodeId, list[NodeId]] = {}
    for u, v in sorted(remaining):
        succ.setdefault(u, []).append(v)

    cycles: list[CycleFlow] = []
    while remaining:
        start = min(remaining)
        path = [start[0]]
        seen_at = {start[0]: 0}
        cur = start[0]
        while True:
            nxt = succ[cur][0]
            if nxt in seen_at:
                cycle_vertices = path[seen_at[nxt]:]
                break
            path.append(nxt)
            seen_at[nxt] = len(path) - 1
            cur = nxt

        pairs = [
            (cycle_vertices[i], cycle_vertices[(i + 1) % len(cycle_vertices)])
            for i in range(len(cycle_vertices))
        ]
        weight = min(remaining[p] for p in pairs)
        for p in pairs:
            remaining[p] -= weight
            if remaining[p] == 0:
                del remaining[p]
                succ[p[0]].remove(p[1])
                if not succ[p[0]]:
                    del succ[p[0]]
        cycles.append(CycleFlow(_canonical_rotation(cycle_vertices), weight))

    return Decomposition(cycles=tuple(cycles), source=circulation)


def validate_decomposition(d: Decomposition) -> bool:
    """Independent check of the decomposition contract.

    True iff the cycles sum edgewise to the source circulation exactly,
    every cycle is simple with positive weight on known edges, and there
    are at most m cycles.
    """
    inst = d.source.instance
    if len(d.cycles) > inst.m:
        return False
    known = {(e.src, e.dst) for e in inst.edges}
    sums: dict[tuple[NodeId, NodeId], int] = {}
    for c in d.cycles:
        if c.weight < 1 or len(c.vertices) < 2:
            return False
        if len(set(c.vertices)) != len(c.vertices):
            return False
        for pair in c.edges():
            if pair not in known:
                return False
            sums[pair] = sums.get(pair, 0) + c.weight
    for e, f in zip(inst.edges, d.source.flows):
        if sums.get((e.src, e.dst), 0) != f:
            return False
    return True


def decomposition_to_json_dict(d: Decomposition) -> dict:
    return {
        "cycles": [
            {"vertices": list(c.vertices), "weight": c.weight} for c in d.cycles
        ]
    }


def decomposition_from_json_dict(data: dict, source: Circulation) -> Decomposition:
    if not isinstance(data, dict) or set(data) != {"cycles"}:
        raise ModelError("malformed decomposition document")
    cycles = []
    for raw in data["cycles"]:
        if not isinstance(raw, dict) or set(raw) != {"vertices", "weight"}:
            raise ModelError("malformed cycle entry")
        cycles.append(CycleFlow(tuple(raw["vertices"]), raw["weight"]))
    return Decomposition(cycles=tuple(cycles), source=source)


def dump_decomposition(d: Decomposition) -> str:
    return json.dumps(decomposition_to_json_dict(d), indent=2) + "\n"


_DOT_PALETTE = (
    "firebrick", "royalblue", "forestgreen", "darkorange", "purple",
    "deeppink", "teal", "saddlebrown", "slategray", "gold",
)


def decomposition_to_dot(d: Decomposition) -> str:
    """Graphviz view of the circulation with one color per cycle."""
    color_of: dict[tuple[NodeId, NodeId], list[int]] = {}
    for i, c in enumerate(d.cycles):
        for pair in c.edges():
            color_of.setdefault(pair, []).append(i)
    lines = ["digraph circulation {"]
    for v in d.source.instance.nodes:
        lines.append(f'  "{v}";')
    for e, f in zip(d.source.instance.edges, d.source.flows):
        if f == 0:
            continue
        pair = (e.src, e.dst)
        members = color_of.get(pair, [])
        color = _DOT_PALETTE[members[0] % len(_DOT_PALETTE)] if members else "black"
        label = f"{f}" + (f" (cycles {','.join(map(str, members))})" if members else "")
        lines.append(f'  "{e.src}" -> "{e.dst}" [label="{label}", color="{color}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
