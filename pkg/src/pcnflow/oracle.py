"""Brute-force reference answers for small instances.

Everything here is deliberately independent of the solver: circulations
are enumerated edge by edge with conservation pruning, and single cycles
by plain DFS. Slow but unarguable; intended for instances with at most
~10 edges and single-digit capacities.
"""

from __future__ import annotations

from .model import NodeId, RebalancingInstance


def enumerate_best_circulation(
    instance: RebalancingInstance,
) -> tuple[int, tuple[int, ...]]:
    """Exhaustive max of sum(weight * flow) over all integral circulations.

    Returns (objective, flows). Branch and bound: a partial assignment is
    abandoned when some node can no longer be balanced by its remaining
    unassigned edges, or when the optimistic remaining value cannot beat
    the incumbent.
    """
    edges = instance.edges
    m = len(edges)
    net = {v: 0 for v in instance.nodes}
    rem_in = {v: 0 for v in instance.nodes}
    rem_out = {v: 0 for v in instance.nodes}
    for e in edges:
        rem_out[e.src] += e.capacity
        rem_in[e.dst] += e.capacity
    # Optimistic value of everything not yet assigned, by edge position.
    tail_value = [0] * (m + 1)
    for i in range(m - 1, -1, -1):
        tail_value[i] = tail_value[i + 1] + edges[i].weight * edges[i].capacity

    best_obj = 0
    best_flows = (0,) * m
    assignment = [0] * m

    def feasible(v: NodeId) -> bool:
        return -rem_in[v] <= net[v] <= rem_out[v]

    def walk(i: int, obj: int) -> None:
        nonlocal best_obj, best_flows
        if i == m:
            if obj > best_obj:
                best_obj = obj
                best_flows = tuple(assignment)
            return
        if obj + tail_value[i] <= best_obj:
            return
        e = edges[i]
        u, v = e.src, e.dst
        rem_out[u] -= e.capacity
        rem_in[v] -= e.capacity
        for f in range(e.capacity, -1, -1):  # high first: good incumbents early
            net[u] -= f
            net[v] += f
            if feasible(u) and feasible(v):
                assignment[i] = f
                walk(i + 1, obj + e.weight * f)
            net[u] += f
            net[v] -= f
        assignment[i] = 0
        rem_out[u] += e.capacity
        rem_in[v] += e.capacity

    walk(0, 0)
    return best_obj, best_flows


def max_circulation_objective(instance: RebalancingInstance) -> int:
    return enumerate_best_circulation(instance)[0]


def enumerate_simple_cycles(instance: RebalancingInstance):
    """Yield every simple directed cycle as a vertex tuple.

    Cycles are emitted rooted at their smallest vertex, each exactly once.
    """
    adjacency: dict[NodeId, list[NodeId]] = {v: [] for v in instance.nodes}
    for e in instance.edges:
        adjacency[e.src].append(e.dst)
    for v in adjacency:
        adjacency[v].sort()

    for root in instance.nodes:
        path = [root]
        on_path = {root}

        def extend():
            cur = path[-1]
            for nxt in adjacency[cur]:
                if nxt == root and len(path) >= 2:
                    yield tuple(path)
                elif nxt > root and nxt not in on_path:
                    path.append(nxt)
                    on_path.add(nxt)
                    yield from extend()
                    on_path.discard(nxt)
                    path.pop()

        yield from extend()


def best_single_cycle(
    instance: RebalancingInstance,
) -> tuple[int, tuple[NodeId, ...] | None, int]:
    """Best objective achievable by one cycle flow alone.

    A cycle flow puts the same amount on every cycle edge, so the best
    amount is the minimum capacity along the cycle and the value is that
    amount times the cycle's total weight. Returns (objective, cycle,
    amount); (0, None, 0) when the instance has no cycle.
    """
    caps = {(e.src, e.dst): e.capacity for e in instance.edges}
    weights = {(e.src, e.dst): e.weight for e in instance.edges}
    best = (0, None, 0)
    for cycle in enumerate_simple_cycles(instance):
        pairs = list(zip(cycle, cycle[1:] + cycle[:1]))
        amount = min(caps[p] for p in pairs)
        value = amount * sum(weights[p] for p in pairs)
        if value > best[0]:
            best = (value, cycle, amount)
    return best
