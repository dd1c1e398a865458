"""Rebalancing instances: participants, directed capacity edges, and validation.

A rebalancing instance records, for every channel that opted in, how many
coins may move in which direction and how much the owner values that
movement. All quantities are integers in the smallest currency unit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

NodeId = str

# Default bounds: up to ~10 BTC per edge at satoshi granularity, weights
# small enough that objectives stay far below the sharing modulus.
DEFAULT_CAPACITY_BOUND = 2**30
DEFAULT_WEIGHT_BOUND = 2**10

_INSTANCE_KEYS = {"nodes", "edges", "weight_bound", "capacity_bound"}
_EDGE_KEYS = {"from", "to", "capacity", "weight"}


class ModelError(ValueError):
    """Invalid instance data."""


class SelfLoop(ModelError):
    pass


class DuplicateEdge(ModelError):
    pass


class AntiparallelConflict(ModelError):
    """Both directions of a channel declared with positive capacity."""


class UnknownEndpoint(ModelError):
    pass


class CapacityOverflow(ModelError):
    pass


class WeightOverflow(ModelError):
    pass


@dataclass(frozen=True, order=True)
class ChannelConstraint:
    """One directed rebalancing-capacity declaration.

    At most ``capacity`` coins may flow from ``src`` to ``dst``; each unit
    moved is worth ``weight`` to the channel owner.
    """

    src: NodeId
    dst: NodeId
    capacity: int
    weight: int = 1


@dataclass(frozen=True)
class BalancePair:
    """Current and desired state of one channel, seen from one side."""

    balance: int
    target: int


@dataclass(frozen=True)
class RebalancingInstance:
    """Validated, canonically ordered rebalancing problem.

    Immutable after construction; safe to share across threads. ``nodes``
    is sorted and ``edges`` is sorted by (src, dst), so two instances built
    from permutations of the same inputs compare equal.
    """

    nodes: tuple[NodeId, ...]
    edges: tuple[ChannelConstraint, ...]
    weight_bound: int = DEFAULT_WEIGHT_BOUND
    capacity_bound: int = DEFAULT_CAPACITY_BOUND

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def m(self) -> int:
        return len(self.edges)

    def edge_map(self) -> dict[tuple[NodeId, NodeId], ChannelConstraint]:
        return {(e.src, e.dst): e for e in self.edges}

    def node_index(self) -> dict[NodeId, int]:
        return {v: i for i, v in enumerate(self.nodes)}


def derive_capacity(u: NodeId, v: NodeId, pair: BalancePair) -> ChannelConstraint | None:
    """Turn a (balance, target) pair for channel u-v into a directed edge.

    Moving the balance up means u pays v, so the edge points u -> v with
    capacity target - balance; the mirrored case points v -> u. A channel
    already at its target contributes no edge.
    """
    if pair.target > pair.balance:
        return ChannelConstraint(u, v, pair.target - pair.balance)
    if pair.target < pair.balance:
        return ChannelConstraint(v, u, pair.balance - pair.target)
    return None


def build_instance(
    nodes: Iterable[NodeId],
    constraints: Iterable[ChannelConstraint],
    *,
    weight_bound: int = DEFAULT_WEIGHT_BOUND,
    capacity_bound: int = DEFAULT_CAPACITY_BOUND,
) -> RebalancingInstance:
    """Validate and canonicalize an instance.

    Zero-capacity edges are dropped (a missing edge and a zero-capacity
    edge mean the same thing). Antiparallel positive pairs are rejected
    rather than netted so that inputs stay auditable.
    """
    node_list = list(nodes)
    for v in node_list:
        if not isinstance(v, str) or not v:
            raise ModelError(f"node ids must be non-empty strings, got {v!r}")
    node_set = set(node_list)
    if len(node_set) != len(node_list):
        raise ModelError("duplicate node ids")
    if weight_bound < 0 or capacity_bound < 0:
        raise ModelError("bounds must be non-negative")

    seen: dict[tuple[NodeId, NodeId], ChannelConstraint] = {}
    for c in constraints:
        if c.src == c.dst:
            raise SelfLoop(f"edge {c.src}->{c.dst}")
        if c.src not in node_set or c.dst not in node_set:
            raise UnknownEndpoint(f"edge {c.src}->{c.dst} has an unenrolled endpoint")
        if c.capacity < 0:
            raise ModelError(f"negative capacity on {c.src}->{c.dst}")
        if c.capacity > capacity_bound:
            raise CapacityOverflow(
                f"capacity {c.capacity} on {c.src}->{c.dst} exceeds bound {capacity_bound}"
            )
        if not 0 <= c.weight <= weight_bound:
            raise WeightOverflow(
                f"weight {c.weight} on {c.src}->{c.dst} outside [0, {weight_bound}]"
            )
        key = (c.src, c.dst)
        if key in seen:
            raise DuplicateEdge(f"edge {c.src}->{c.dst} declared twice")
        seen[key] = c

    for (u, v), c in seen.items():
        other = seen.get((v, u))
        if c.capacity > 0 and other is not None and other.capacity > 0:
            raise AntiparallelConflict(f"both {u}->{v} and {v}->{u} have positive capacity")

    kept = sorted((c for c in seen.values() if c.capacity > 0), key=lambda c: (c.src, c.dst))
    return RebalancingInstance(
        nodes=tuple(sorted(node_set)),
        edges=tuple(kept),
        weight_bound=weight_bound,
        capacity_bound=capacity_bound,
    )


def instance_to_json_dict(instance: RebalancingInstance) -> dict:
    return {
        "nodes": list(instance.nodes),
        "edges": [
            {"from": e.src, "to": e.dst, "capacity": e.capacity, "weight": e.weight}
            for e in instance.edges
        ],
        "weight_bound": instance.weight_bound,
        "capacity_bound": instance.capacity_bound,
    }


def instance_from_json_dict(data: dict) -> RebalancingInstance:
    """Parse the canonical on-disk format. Unknown fields are rejected."""
    if not isinstance(data, dict):
        raise ModelError("instance document must be a JSON object")
    unknown = set(data) - _INSTANCE_KEYS
    if unknown:
        raise ModelError(f"unknown instance fields: {sorted(unknown)}")
    missing = {"nodes", "edges"} - set(data)
    if missing:
        raise ModelError(f"missing instance fields: {sorted(missing)}")

    edges = []
    for raw in data["edges"]:
        if not isinstance(raw, dict):
            raise ModelError("edge entries must be objects")
        bad = set(raw) - _EDGE_KEYS
        if bad:
            raise ModelError(f"unknown edge fields: {sorted(bad)}")
        if "from" not in raw or "to" not in raw or "capacity" not in raw:
            raise ModelError("edges need from, to and capacity")
        for k in ("capacity", "weight"):
            if k in raw and not isinstance(raw[k], int):
                raise ModelError(f"edge field {k!r} must be an integer")
        edges.append(
            ChannelConstraint(raw["from"], raw["to"], raw["capacity"], raw.get("weight", 1))
        )

    for k in ("weight_bound", "capacity_bound"):
        if k in data and not isinstance(data[k], int):
            raise ModelError(f"{k} must be an integer")
    return build_instance(
        data["nodes"],
        edges,
        weight_bound=data.get("weight_bound", DEFAULT_WEIGHT_BOUND),
        capacity_bound=data.get("capacity_bound", DEFAULT_CAPACITY_BOUND),
    )


def dump_instance(instance: RebalancingInstance) -> str:
    return json.dumps(instance_to_json_dict(instance), indent=2) + "\n"


def load_instance(path: str) -> RebalancingInstance:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"not valid JSON: {exc}") from exc
    return instance_from_json_dict(data)
