"""Delegate sortition and a simulated secret-shared rebalancing solve.

This is a simulation of multi-party computation, not a cryptographic
implementation: shares are real additive shares over a fixed prime field,
but all k delegates live in one process and an honest dealer hands out
multiplication triples and comparison results. What the simulation does
guarantee, and what the tests pin down, are the two observable surrogates
of the privacy story:

* any k-1 shares of a value are distributed independently of the value;
* the operation transcript is a pure function of the public shape
  (participant count, edge count, declared bounds, iteration schedule),
  never of capacities or weights.

The private solve works on a complete-digraph matrix of shared capacities
and weights, so even the topology stays inside the sharing. It repeatedly
cancels gain cycles found by an oblivious Bellman-Ford whose control flow
is fixed: comparisons yield shared bits, shared bits drive arithmetic
selection, and rounds past convergence push zero. Every intermediate flow
matrix is a feasible circulation, so exhausting the schedule early simply
yields the best rebalancing found so far. The worst-case schedule needed
for exactness is edges * capacity_bound * weight_bound (one unit of
objective per productive round), which is the price of obliviousness.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass

from .model import NodeId, RebalancingInstance
from .solver import Circulation, InternalInconsistency

PRIME = (1 << 61) - 1  # Mersenne prime; fits intermediate objectives with room
_HALF = (PRIME - 1) // 2


class KTooLarge(ValueError):
    pass


class OutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class Share:
    delegate_index: int
    value: int


@dataclass(frozen=True)
class SharedVector:
    """Per-position lists of k shares; reconstructs position-wise."""

    shares: tuple[tuple[Share, ...], ...]

    def __len__(self) -> int:
        return len(self.shares)


def share(x: int, k: int, rng: random.Random) -> list[Share]:
    """Split x into k additive shares mod PRIME.

    The first k-1 shares are fresh uniform field elements drawn before x
    is ever touched, so any k-1 of the pieces carry no information about x.
    """
    if k < 2:
        raise ValueError("need at least two delegates")
    if abs(x) > _HALF:
        raise OutOfRange(f"{x} cannot be represented without wraparound")
    parts = [rng.randrange(PRIME) for _ in range(k - 1)]
    parts.append((x - sum(parts)) % PRIME)
    return [Share(i, v) for i, v in enumerate(parts)]


def reconstruct(shares) -> int:
    """Sum shares mod PRIME and map to the centered representative."""
    total = sum(s.value for s in shares) % PRIME
    return total - PRIME if total > _HALF else total


def reconstruct_vector(vector: SharedVector) -> list[int]:
    return [reconstruct(position) for position in vector.shares]


def delegate_share_file(vector: SharedVector, delegate_index: int) -> str:
    """One delegate's view of a shared vector: a JSON array of field elements."""
    values = [position[delegate_index].value for position in vector.shares]
    return json.dumps(values) + "\n"


def shared_vector_from_files(files: list[str]) -> SharedVector:
    """Rebuild a SharedVector from every delegate's share file."""
    columns = [json.loads(text) for text in files]
    length = len(columns[0])
    if any(len(c) != length for c in columns):
        raise ValueError("share files disagree on vector length")
    return SharedVector(
        tuple(
            tuple(Share(i, column[pos]) for i, column in enumerate(columns))
            for pos in range(length)
        )
    )


# ---------------------------------------------------------------------------
# Sortition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DelegateSet:
    delegates: tuple[NodeId, ...]
    seed: bytes


def _seed_bytes(seed: int | bytes) -> bytes:
    if isinstance(seed, bytes):
        return seed
    return str(int(seed)).encode()


def sortition_digest(seed: int | bytes, node: NodeId) -> bytes:
    return hashlib.sha256(_seed_bytes(seed) + b"|" + node.encode()).digest()


def select_delegates(participants, k: int, seed: int | bytes) -> DelegateSet:
    """Pick the k participants whose seeded digests are smallest."""
    pool = sorted(set(participants))
    if k < 2:
        raise ValueError("need at least two delegates")
    if k > len(pool):
        raise KTooLarge(f"k={k} exceeds {len(pool)} participants")
    ranked = sorted(pool, key=lambda v: (sortition_digest(seed, v), v))
    return DelegateSet(delegates=tuple(ranked[:k]), seed=_seed_bytes(seed))


# ---------------------------------------------------------------------------
# Arithmetic black box
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Transcript:
    """Public trace of primitive operations, one entry per op, shapes only."""

    ops: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.ops)

    def dumps(self) -> str:
        return "\n".join(self.ops) + ("\n" if self.ops else "")


class _Sv:
    """Engine-internal shared value: raw share list plus optional shadow."""

    __slots__ = ("v", "p")

    def __init__(self, v: list[int], p: int | None):
        self.v = v
        self.p = p


class ArithmeticBlackBox:
    """k-party additive-sharing engine with an honest dealer.

    All delegates run in-process; the dealer supplies Beaver triples for
    multiplication and fresh sharings of comparison bits. With
    ``shadow=True`` every operation also tracks the true integer it
    represents and asserts it stays below PRIME/2 in magnitude, catching
    wraparound bugs that shares alone would hide.
    """

    def __init__(self, k: int, rng_seed: int, shadow: bool = False):
        if k < 2:
            raise ValueError("need at least two delegates")
        self.k = k
        self.rng = random.Random(rng_seed)
        self.shadow = shadow
        self.ops: list[str] = []
        self._consts: dict[int, _Sv] = {}

    # -- plumbing ----------------------------------------------------------

    def _wrap(self, vals: list[int], plain: int | None) -> _Sv:
        if self.shadow:
            assert plain is not None
            if abs(plain) > _HALF:
                raise OutOfRange(f"intermediate value {plain} would wrap the modulus")
            got = sum(vals) % PRIME
            want = plain % PRIME
            assert got == want, "shadow value diverged from shares"
        return _Sv(vals, plain if self.shadow else None)

    def _fresh(self, x: int) -> list[int]:
        parts = [self.rng.randrange(PRIME) for _ in range(self.k - 1)]
        parts.append((x - sum(parts)) % PRIME)
        return parts

    def const(self, x: int) -> _Sv:
        cached = self._consts.get(x)
        if cached is None:
            vals = [x % PRIME] + [0] * (self.k - 1)
            cached = self._wrap(vals, x)
            self._consts[x] = cached
        return cached

    def input(self, x: int) -> _Sv:
        if abs(x) > _HALF:
            raise OutOfRange(f"{x} cannot be represented without wraparound")
        return self._wrap(self._fresh(x), x)

    def _open(self, a: _Sv) -> int:
        total = sum(a.v) % PRIME
        return total - PRIME if total > _HALF else total

    # -- logged primitives ---------------------------------------------------

    def add(self, a: _Sv, b: _Sv) -> _Sv:
        self.ops.append("add")
        vals = [(x + y) % PRIME for x, y in zip(a.v, b.v)]
        plain = a.p + b.p if self.shadow else None
        return self._wrap(vals, plain)

    def sub(self, a: _Sv, b: _Sv) -> _Sv:
        self.ops.append("add")
        vals = [(x - y) % PRIME for x, y in zip(a.v, b.v)]
        plain = a.p - b.p if self.shadow else None
        return self._wrap(vals, plain)

    def smul(self, c: int, a: _Sv) -> _Sv:
        """Multiply by a public scalar (local operation at each delegate)."""
        self.ops.append("mul public")
        vals = [(c * x) % PRIME for x in a.v]
        plain = c * a.p if self.shadow else None
        return self._wrap(vals, plain)

    def mul(self, a: _Sv, b: _Sv) -> _Sv:
        """Beaver-triple multiplication; the dealer supplies (a, b, ab)."""
        self.ops.append("mul shared")
        ta = self.rng.randrange(PRIME)
        tb = self.rng.randrange(PRIME)
        sa = self._fresh(ta)
        sb = self._fresh(tb)
        sc = self._fresh(ta * tb % PRIME)
        d = (sum((x - y) % PRIME for x, y in zip(a.v, sa))) % PRIME
        e = (sum((x - y) % PRIME for x, y in zip(b.v, sb))) % PRIME
        vals = [(c_i + d * b_i + e * a_i) % PRIME for c_i, a_i, b_i in zip(sc, sa, sb)]
        vals[0] = (vals[0] + d * e) % PRIME
        plain = a.p * b.p if self.shadow else None
        return self._wrap(vals, plain)

    def gt0(self, a: _Sv) -> _Sv:
        """Shared bit [a >= 1]; the comparison itself is a dealer service."""
        self.ops.append("cmp")
        bit = 1 if self._open(a) >= 1 else 0
        return self._wrap(self._fresh(bit), bit)

    def eq0(self, a: _Sv) -> _Sv:
        """Shared bit [a == 0]."""
        self.ops.append("cmp")
        bit = 1 if self._open(a) == 0 else 0
        return self._wrap(self._fresh(bit), bit)

    def reveal(self, a: _Sv) -> int:
        self.ops.append("reveal")
        return self._open(a)

    # -- derived helpers -----------------------------------------------------

    def select(self, bit: _Sv, x: _Sv, y: _Sv) -> _Sv:
        """y + bit * (x - y): oblivious choice driven by a shared bit."""
        return self.add(y, self.mul(bit, self.sub(x, y)))

    def eq_const(self, a: _Sv, c: int) -> _Sv:
        return self.eq0(self.sub(a, self.const(c)))


# ---------------------------------------------------------------------------
# Shared instance encoding and the oblivious solve
# ---------------------------------------------------------------------------


def _cell(i: int, j: int, n: int) -> int:
    return i * (n - 1) + (j if j < i else j - 1)


@dataclass(frozen=True)
class SharedInstance:
    """Complete-digraph encoding: n(n-1) shared capacities then weights.

    Participants and declared bounds are public; which cells hold a real
    edge is not. Cells without an edge carry capacity 0 and never admit
    flow, so the solver need not know the topology.
    """

    nodes: tuple[NodeId, ...]
    m: int
    capacity_bound: int
    weight_bound: int
    capacities: SharedVector
    weights: SharedVector

    @property
    def n(self) -> int:
        return len(self.nodes)

    def public_shape(self) -> tuple[int, int, int, int]:
        return (self.n, self.m, self.capacity_bound, self.weight_bound)


def default_schedule(shape: tuple[int, int, int, int]) -> int:
    """Worst-case cancel rounds for exactness: every productive round adds
    at least one unit of objective, and the objective tops out at
    m * capacity_bound * weight_bound."""
    _, m, cap_bound, weight_bound = shape
    return m * cap_bound * weight_bound


def _derive_seed(seed: int | bytes, label: str) -> int:
    h = hashlib.sha256(_seed_bytes(seed) + b"/" + label.encode()).digest()
    return int.from_bytes(h[:8], "big")


class MpcSession:
    """k logical delegates plus the dealer, driven deterministically.

    Message order, triples and fresh sharings are all pure functions of
    the session seed, so identical (instance, k, seed) replays produce
    identical shares and identical transcripts.
    """

    def __init__(self, k: int, seed: int | bytes, shadow: bool = False):
        self.k = k
        self.abb = ArithmeticBlackBox(k, _derive_seed(seed, "dealer"), shadow=shadow)

    def share_instance(self, instance: RebalancingInstance) -> SharedInstance:
        guard = 2 * instance.capacity_bound * instance.weight_bound * max(instance.m, 1)
        if PRIME <= guard:
            raise OutOfRange(
                "declared bounds too large for the sharing modulus: "
                f"need PRIME > {guard}"
            )
        n = instance.n
        index = instance.node_index()
        caps = [0] * (n * (n - 1))
        weights = [0] * (n * (n - 1))
        for e in instance.edges:
            c = _cell(index[e.src], index[e.dst], n)
            caps[c] = e.capacity
            weights[c] = e.weight
        return SharedInstance(
            nodes=instance.nodes,
            m=instance.m,
            capacity_bound=instance.capacity_bound,
            weight_bound=instance.weight_bound,
            capacities=self._share_values(caps),
            weights=self._share_values(weights),
        )

    def _share_values(self, values: list[int]) -> SharedVector:
        out = []
        for x in values:
            sv = self.abb.input(x)
            out.append(tuple(Share(i, v) for i, v in enumerate(sv.v)))
        return SharedVector(tuple(out))

    def _unwrap(self, vector: SharedVector) -> list[_Sv]:
        out = []
        for position in vector.shares:
            vals = [s.value for s in position]
            plain = reconstruct(position) if self.abb.shadow else None
            out.append(self.abb._wrap(vals, plain))
        return out

    def private_solve(
        self, shared: SharedInstance, schedule: int | None = None
    ) -> tuple[SharedVector, Transcript]:
        """Jointly compute an optimal rebalancing over shares.

        Returns the shared flow matrix and the transcript of primitive
        operations. With the default schedule the reconstructed flows
        attain the plaintext optimum; a shorter schedule still yields a
        feasible circulation, just possibly a smaller one.
        """
        if schedule is None:
            schedule = default_schedule(shared.public_shape())
        mark = len(self.abb.ops)
        flows = _oblivious_solve(
            self.abb,
            shared.n,
            self._unwrap(shared.capacities),
            self._unwrap(shared.weights),
            schedule,
            shared.capacity_bound,
            shared.weight_bound,
        )
        transcript = Transcript(tuple(self.abb.ops[mark:]))
        out = SharedVector(
            tuple(
                tuple(Share(i, v) for i, v in enumerate(sv.v)) for sv in flows
            )
        )
        return out, transcript

    def reconstruct_circulation(
        self, shared_flows: SharedVector, instance: RebalancingInstance
    ) -> Circulation:
        n = instance.n
        values = reconstruct_vector(shared_flows)
        index = instance.node_index()
        known = set()
        flows = []
        for e in instance.edges:
            c = _cell(index[e.src], index[e.dst], n)
            known.add(c)
            flows.append(values[c])
        stray = [v for i, v in enumerate(values) if i not in known and v != 0]
        if stray:
            raise InternalInconsistency("private solve put flow on a non-edge")
        circ = Circulation(instance, tuple(flows))
        circ.validate()
        return circ

    def reveal_per_participant(
        self, shared_flows: SharedVector, instance: RebalancingInstance
    ) -> dict[NodeId, dict[tuple[NodeId, NodeId], int]]:
        """Disclose to each participant exactly its incident edge flows."""
        n = instance.n
        index = instance.node_index()
        raw = self._unwrap(shared_flows)
        out: dict[NodeId, dict[tuple[NodeId, NodeId], int]] = {}
        for node in instance.nodes:
            disclosure = {}
            for e in instance.edges:
                if node in (e.src, e.dst):
                    c = _cell(index[e.src], index[e.dst], n)
                    disclosure[(e.src, e.dst)] = self.abb.reveal(raw[c])
            out[node] = disclosure
        return out


def _oblivious_solve(
    abb: ArithmeticBlackBox,
    n: int,
    caps: list[_Sv],
    weights: list[_Sv],
    rounds: int,
    capacity_bound: int,
    weight_bound: int,
) -> list[_Sv]:
    """Gain-cycle canceling with data-independent control flow.

    Mirrors the plaintext bounded solver round for round: a Bellman-Ford
    over all ordered node pairs (forward and undo arcs), a final pass that
    flags the first still-relaxable arc, a fixed-length predecessor walk
    that marks the detected cycle, then a masked bottleneck push. Two
    belt-and-braces guards (marked set conserves flow; marked gain is
    positive) force the push amount to zero on any malformed detection, so
    feasibility and monotonicity hold unconditionally.
    """
    # Arc a over pair (i, j): forward residual of cell (i, j), then the
    # undo residual of cell (j, i), both traversed i -> j.
    arcs: list[tuple[int, int, int, bool]] = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            arcs.append((i, j, _cell(i, j, n), True))
            arcs.append((i, j, _cell(j, i, n), False))
    num_arcs = len(arcs)
    big = 2 * (n + 3) * (weight_bound + 1)

    one = abb.const(1)
    gains = []
    costs = []
    for _, _, c, forward in arcs:
        if forward:
            gains.append(weights[c])
            costs.append(abb.smul(-1, weights[c]))
        else:
            gains.append(abb.smul(-1, weights[c]))
            costs.append(weights[c])

    flows = [abb.const(0) for _ in range(n * (n - 1))]

    for _ in range(rounds):
        residuals = []
        masked = []
        for a, (_, _, c, forward) in enumerate(arcs):
            r = abb.sub(caps[c], flows[c]) if forward else flows[c]
            residuals.append(r)
            usable = abb.gt0(r)
            penalty = abb.smul(big, abb.sub(one, usable))
            masked.append(abb.add(costs[a], penalty))

        dist = [abb.const(0) for _ in range(n)]
        pred_arc = [abb.const(num_arcs) for _ in range(n)]
        pred_tail = [abb.const(n) for _ in range(n)]
        notfound = one
        start = abb.const(0)
        for pass_no in range(n + 2):
            final = pass_no == n + 1
            for a, (tail, head, _, _) in enumerate(arcs):
                cand = abb.add(dist[tail], masked[a])
                better = abb.gt0(abb.sub(dist[head], cand))
                dist[head] = abb.select(better, cand, dist[head])
                pred_arc[head] = abb.select(better, abb.const(a), pred_arc[head])
                pred_tail[head] = abb.select(better, abb.const(tail), pred_tail[head])
                if final:
                    first = abb.mul(notfound, better)
                    notfound = abb.sub(notfound, first)
                    start = abb.add(start, abb.smul(head, first))
        found = abb.sub(one, notfound)

        # Walk n predecessor steps to land on the detected cycle.
        cur = start
        for _ in range(n):
            nxt = abb.const(0)
            for x in range(n):
                here = abb.eq_const(cur, x)
                nxt = abb.add(nxt, abb.mul(here, pred_tail[x]))
            cur = nxt

        # Walk n more steps, marking every predecessor arc traversed.
        marks = [abb.const(0) for _ in range(num_arcs)]
        for _ in range(n):
            pa = abb.const(0)
            ta = abb.const(0)
            for x in range(n):
                here = abb.eq_const(cur, x)
                pa = abb.add(pa, abb.mul(here, pred_arc[x]))
                ta = abb.add(ta, abb.mul(here, pred_tail[x]))
            for a in range(num_arcs):
                is_a = abb.eq_const(pa, a)
                overlap = abb.mul(marks[a], is_a)
                marks[a] = abb.sub(abb.add(marks[a], is_a), overlap)
            cur = ta

        # Guards: marked arcs must conserve flow at every node and carry
        # positive total gain; otherwise this round pushes nothing.
        ok = found
        for x in range(n):
            net = abb.const(0)
            for a, (tail, head, _, _) in enumerate(arcs):
                if head == x:
                    net = abb.add(net, marks[a])
                elif tail == x:
                    net = abb.sub(net, marks[a])
            ok = abb.mul(ok, abb.eq0(net))
        gain = abb.const(0)
        for a in range(num_arcs):
            gain = abb.add(gain, abb.mul(marks[a], gains[a]))
        ok = abb.mul(ok, abb.gt0(gain))

        bottleneck = abb.const(capacity_bound + 1)
        for a in range(num_arcs):
            candidate = abb.select(marks[a], residuals[a], bottleneck)
            lower = abb.gt0(abb.sub(bottleneck, candidate))
            bottleneck = abb.select(lower, candidate, bottleneck)

        delta = abb.mul(ok, bottleneck)
        for a, (_, _, c, forward) in enumerate(arcs):
            change = abb.mul(marks[a], delta)
            flows[c] = abb.add(flows[c], change) if forward else abb.sub(flows[c], change)

    return flows
