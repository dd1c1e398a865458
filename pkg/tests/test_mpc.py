import hashlib
import random

import pytest
from hypothesis import given, strategies as st

from pcnflow.cli import generate_instance
from pcnflow.model import ChannelConstraint, build_instance
from pcnflow.mpc import (
    PRIME,
    KTooLarge,
    MpcSession,
    OutOfRange,
    Share,
    SharedVector,
    default_schedule,
    delegate_share_file,
    reconstruct,
    reconstruct_vector,
    select_delegates,
    share,
    shared_vector_from_files,
    sortition_digest,
)
from pcnflow.solver import solve_rebalancing


def triangle(caps=(4, 4, 4), cap_bound=4):
    return build_instance(
        ["A", "B", "C"],
        [
            ChannelConstraint("A", "B", caps[0]),
            ChannelConstraint("B", "C", caps[1]),
            ChannelConstraint("C", "A", caps[2]),
        ],
        capacity_bound=cap_bound,
        weight_bound=1,
    )


class TestSharing:
    @given(st.integers(-(2**40), 2**40), st.integers(2, 5), st.integers(0, 1000))
    def test_round_trip(self, x, k, seed):
        assert reconstruct(share(x, k, random.Random(seed))) == x

    def test_spec_number(self):
        assert reconstruct(share(42, 3, random.Random(0))) == 42

    def test_additive_homomorphism(self):
        rng = random.Random(1)
        a, b = 1234, -987
        sa, sb = share(a, 3, rng), share(b, 3, rng)
        summed = [
            Share(i, (x.value + y.value) % PRIME) for i, (x, y) in enumerate(zip(sa, sb))
        ]
        assert reconstruct(summed) == a + b

    def test_zero_shares_sum_to_zero_mod_p(self):
        assert sum(s.value for s in share(0, 2, random.Random(2))) % PRIME == 0

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            share(PRIME, 2, random.Random(0))

    def test_needs_two_delegates(self):
        with pytest.raises(ValueError):
            share(1, 1, random.Random(0))

    def test_first_shares_independent_of_secret(self):
        # Identical randomness, different secrets: the first k-1 shares
        # coincide exactly, so they carry no information about the value.
        a = share(5, 4, random.Random(9))
        b = share(-71234, 4, random.Random(9))
        assert [s.value for s in a[:-1]] == [s.value for s in b[:-1]]
        assert a[-1].value != b[-1].value

    def test_share_file_round_trip(self):
        rng = random.Random(3)
        vector = SharedVector(
            tuple(tuple(share(x, 3, rng)) for x in (0, 7, -19, 2**30))
        )
        files = [delegate_share_file(vector, i) for i in range(3)]
        assert all(f.startswith("[") for f in files)
        rebuilt = shared_vector_from_files(files)
        assert reconstruct_vector(rebuilt) == [0, 7, -19, 2**30]

    def test_share_file_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            shared_vector_from_files(["[1, 2]", "[1]"])


class TestSortition:
    PARTICIPANTS = ["n0", "n1", "n2", "n3", "n4"]

    def test_k_equal_to_population_selects_everyone(self):
        got = select_delegates(self.PARTICIPANTS, 5, seed=3)
        assert sorted(got.delegates) == self.PARTICIPANTS

    def test_deterministic(self):
        a = select_delegates(self.PARTICIPANTS, 2, seed=3)
        b = select_delegates(self.PARTICIPANTS, 2, seed=3)
        assert a == b

    def test_matches_independent_digest_ranking(self):
        seed = 1234
        ranked = sorted(
            self.PARTICIPANTS,
            key=lambda v: hashlib.sha256(b"1234" + b"|" + v.encode()).digest(),
        )
        got = select_delegates(self.PARTICIPANTS, 2, seed)
        assert list(got.delegates) == ranked[:2]
        assert sortition_digest(seed, "n0") == hashlib.sha256(b"1234|n0").digest()

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            select_delegates(self.PARTICIPANTS, 6, seed=0)

    def test_selection_is_uniform_chi_square(self):
        counts = {v: 0 for v in self.PARTICIPANTS}
        trials = 2000
        for seed in range(trials):
            for v in select_delegates(self.PARTICIPANTS, 2, seed).delegates:
                counts[v] += 1
        expected = trials * 2 / len(self.PARTICIPANTS)
        chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
        assert chi2 < 18.47  # df=4, alpha=0.001


class TestPrivateSolve:
    def test_triangle_matches_plaintext_optimum(self):
        inst = triangle()
        session = MpcSession(3, seed=5)
        flows, _ = session.private_solve(session.share_instance(inst))
        circ = session.reconstruct_circulation(flows, inst)
        assert circ.objective() == 12

    def test_functional_equivalence_random(self):
        for seed in range(15):
            inst = generate_instance(4, 5, cap_max=2, weight_max=2, seed=seed)
            session = MpcSession(2, seed=seed)
            flows, _ = session.private_solve(session.share_instance(inst))
            got = session.reconstruct_circulation(flows, inst).objective()
            assert got == solve_rebalancing(inst).objective

    def test_schedule_zero_yields_zero_circulation(self):
        inst = triangle()
        session = MpcSession(3, seed=6)
        flows, transcript = session.private_solve(session.share_instance(inst), schedule=0)
        circ = session.reconstruct_circulation(flows, inst)
        assert circ.objective() == 0
        assert circ.flows == (0, 0, 0)

    def test_partial_schedules_match_plaintext_bounded_runs(self):
        # The oblivious engine is the masked twin of the plaintext cycle
        # canceler; flows agree round for round, not just at the optimum.
        for n, m, seed in ((3, 3, 4), (4, 6, 20), (4, 5, 31)):
            inst = generate_instance(n, m, cap_max=2, weight_max=1, seed=seed)
            for k in range(0, 5):
                session = MpcSession(2, seed=k)
                flows, _ = session.private_solve(session.share_instance(inst), schedule=k)
                circ = session.reconstruct_circulation(flows, inst)
                plain = solve_rebalancing(inst, iteration_bound=k).circulation
                assert circ.flows == plain.flows

    def test_early_stop_is_feasible_and_monotone(self):
        inst = generate_instance(4, 6, cap_max=2, weight_max=1, seed=8)
        session = MpcSession(2, seed=8)
        shared = session.share_instance(inst)
        previous = -1
        for k in range(0, 6):
            flows, _ = session.private_solve(shared, schedule=k)
            circ = session.reconstruct_circulation(flows, inst)  # validates
            assert circ.objective() >= previous
            previous = circ.objective()

    def test_shadow_mode_checks_modulus_headroom(self):
        inst = triangle()
        session = MpcSession(3, seed=7, shadow=True)
        flows, _ = session.private_solve(session.share_instance(inst))
        assert session.reconstruct_circulation(flows, inst).objective() == 12

    def test_oversized_bounds_rejected_at_sharing(self):
        inst = build_instance(
            ["A", "B"],
            [ChannelConstraint("A", "B", 1)],
            capacity_bound=2**50,
            weight_bound=2**10,
        )
        with pytest.raises(OutOfRange):
            MpcSession(2, seed=0).share_instance(inst)

    def test_default_schedule_formula(self):
        inst = triangle()
        assert default_schedule((inst.n, inst.m, inst.capacity_bound, inst.weight_bound)) == 12


class TestTranscripts:
    def test_same_shape_same_bytes(self):
        a = triangle(caps=(4, 4, 4))
        b = triangle(caps=(1, 3, 2))
        ta = MpcSession(3, seed=1)
        tb = MpcSession(3, seed=2)
        _, trans_a = ta.private_solve(ta.share_instance(a))
        _, trans_b = tb.private_solve(tb.share_instance(b))
        assert trans_a.dumps() == trans_b.dumps()

    def test_transcript_has_no_values(self):
        inst = triangle()
        session = MpcSession(3, seed=1)
        _, transcript = session.private_solve(session.share_instance(inst), schedule=1)
        allowed = {"add", "mul public", "mul shared", "cmp", "reveal"}
        assert set(transcript.ops) <= allowed

    def test_different_shape_differs(self):
        small = triangle()
        bigger = generate_instance(4, 4, cap_max=4, weight_max=1, seed=0)
        sa = MpcSession(3, seed=1)
        sb = MpcSession(3, seed=1)
        _, ta = sa.private_solve(sa.share_instance(small))
        _, tb = sb.private_solve(sb.share_instance(bigger))
        assert ta.dumps() != tb.dumps()


class TestReveal:
    def test_incidence_filter(self):
        inst = triangle()
        session = MpcSession(3, seed=3)
        flows, _ = session.private_solve(session.share_instance(inst))
        per_node = session.reveal_per_participant(flows, inst)
        assert set(per_node["A"]) == {("C", "A"), ("A", "B")}
        assert per_node["A"][("A", "B")] == 4

    def test_isolated_node_gets_nothing(self):
        inst = build_instance(
            ["A", "B", "C", "L"],
            [
                ChannelConstraint("A", "B", 2),
                ChannelConstraint("B", "C", 2),
                ChannelConstraint("C", "A", 2),
            ],
            capacity_bound=2,
            weight_bound=1,
        )
        session = MpcSession(2, seed=4)
        flows, _ = session.private_solve(session.share_instance(inst))
        assert session.reveal_per_participant(flows, inst)["L"] == {}

    def test_union_covers_every_edge_twice(self):
        inst = triangle()
        session = MpcSession(3, seed=5)
        flows, _ = session.private_solve(session.share_instance(inst))
        per_node = session.reveal_per_participant(flows, inst)
        seen: dict = {}
        for disclosure in per_node.values():
            for pair, amount in disclosure.items():
                seen.setdefault(pair, []).append(amount)
        circ = session.reconstruct_circulation(flows, inst)
        for e, f in zip(inst.edges, circ.flows):
            assert seen[(e.src, e.dst)] == [f, f]  # once per endpoint
