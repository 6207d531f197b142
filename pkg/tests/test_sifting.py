import numpy as np
import pytest

from deadtime_qkd import (ParameterError, Passive, RandomStream, TrialTrace,
                          rogers_chains, sift_4state, sift_all_active,
                          sift_deactivate, sift_naive, sift_rogers)
from deadtime_qkd.engine import stream_trace
from deadtime_qkd.sifting import NaiveScanner, RogersScanner

from conftest import params_k


def make_passive_trace(k: float, n: int, clicks: dict[int, int],
                       alice_basis: dict[int, int] | None = None,
                       bench: str = "passive") -> TrialTrace:
    """Hand-built trace: clicks is slot -> detector id; availability follows
    the non-paralyzable recovery rule for the given clicks."""
    params = params_k(k, survival=1.0)
    gap = params.dead_gap_slots
    n_det = 4
    clicked = np.full(n, -1, dtype=np.int8)
    mask = np.ones((n, n_det), dtype=bool)
    for slot, det in sorted(clicks.items()):
        assert mask[slot, det], f"crafted click at {slot} on dead detector {det}"
        clicked[slot] = det
        if bench == "deactivate":
            mask[slot + 1:min(slot + gap, n), :] = False
        else:
            mask[slot + 1:min(slot + gap, n), det] = False
    ab = np.full(n, 2, dtype=np.int8)  # default: mismatches basis 1
    for slot, basis in (alice_basis or {}).items():
        ab[slot] = basis
    arrived = clicked >= 0
    bob_basis = np.where(arrived, clicked // 2 + 1, 0).astype(np.int8)
    return TrialTrace(params=params, bench=bench, start=0, alice_basis=ab,
                      alice_bit=np.zeros(n, dtype=np.int8), arrived=arrived,
                      bob_basis=bob_basis, clicked=clicked, active_mask=mask)


class TestRogersHandTraces:
    def test_singleton_matched(self):
        trace = make_passive_trace(5, 30, {2: 0}, {2: 1})
        bits = sift_rogers(trace)
        assert len(bits) == 1
        assert bits.slot[0] == 2 and bits.basis[0] == 1 and bits.bob_bit[0] == 0

    def test_singleton_mismatched(self):
        trace = make_passive_trace(5, 30, {2: 0}, {2: 2})
        assert len(sift_rogers(trace)) == 0
        _, chains = rogers_chains(trace)
        assert len(chains) == 1 and chains.accepted[0] and not chains.sifted[0]

    def test_chain_of_three_first_match_wins(self):
        # det0 at 2 (dead till 7), det1 at 4 (dead till 9), det0 again at 8;
        # the basis is never fully active in between, so one chain of three
        clicks = {2: 0, 4: 1, 8: 0}
        trace = make_passive_trace(5, 40, clicks, {2: 2, 4: 1, 8: 1})
        bits, chains = rogers_chains(trace)
        assert len(chains) == 1
        assert chains.length[0] == 3 and chains.accepted[0]
        assert len(bits) == 1
        assert bits.slot[0] == 4 and bits.bob_bit[0] == 1  # first matching click

    def test_at_most_one_bit_despite_many_matches(self):
        trace = make_passive_trace(5, 40, {2: 0, 4: 1, 8: 0},
                                   {2: 1, 4: 1, 8: 1})
        bits = sift_rogers(trace)
        assert len(bits) == 1 and bits.slot[0] == 2

    def test_partner_recovery_absorbs_following_click(self):
        # det1 clicks at 4 while det0 (same basis) is still recovering from
        # slot 2: that click joins the open chain instead of starting one
        trace = make_passive_trace(5, 40, {2: 0, 4: 1, 12: 0},
                                   {4: 1, 12: 1})
        bits, chains = rogers_chains(trace)
        assert list(chains.start) == [2, 12]
        assert list(chains.length) == [2, 1]
        assert list(chains.accepted) == [True, True]
        assert sorted(bits.slot) == [4, 12]

    def test_chain_started_on_partially_dead_basis_is_rejected(self):
        # a chain can only start on a partially dead basis if a detector was
        # already recovering when the trace begins; craft that mask by hand
        trace = make_passive_trace(5, 30, {2: 0}, {2: 1})
        trace.active_mask[:4, 1] = False  # det1 still recovering at start
        bits, chains = rogers_chains(trace)
        assert len(chains) == 1
        assert not chains.accepted[0]
        assert len(bits) == 0  # matched, but the chain was rejected

    def test_click_at_closure_slot_starts_accepted_chain(self):
        # det0 at 2 recovers at 7; click at 7 lands exactly at the first
        # fully-active slot and must open a new accepted chain
        trace = make_passive_trace(5, 30, {2: 0, 7: 1}, {2: 2, 7: 1})
        bits, chains = rogers_chains(trace)
        assert len(chains) == 2
        assert list(chains.accepted) == [True, True]
        assert list(chains.start) == [2, 7]
        assert len(bits) == 1 and bits.slot[0] == 7

    def test_bases_processed_independently(self):
        # basis-2 detectors firing inside a basis-1 chain window do not join it
        trace = make_passive_trace(5, 40, {2: 0, 3: 2, 5: 3},
                                   {2: 1, 3: 2, 5: 2})
        bits, chains = rogers_chains(trace)
        by_start = {int(s): (int(l), bool(a)) for s, l, a in
                    zip(chains.start, chains.length, chains.accepted)}
        assert by_start[2] == (1, True)      # basis 1 singleton
        assert by_start[3] == (2, True)      # basis 2 chain {3, 5}
        assert len(bits) == 3 - 1            # slot 2 (b1) and slot 3 (b2) match

    def test_wrong_bench_rejected(self):
        trace = make_passive_trace(5, 10, {}, bench="deactivate")
        with pytest.raises(ParameterError):
            sift_rogers(trace)


class TestOtherAlgorithmsHandTraces:
    def test_all_active_drops_cross_basis_dead(self):
        # click on det2 at slot 3 while det0 (other basis!) is recovering
        trace = make_passive_trace(5, 30, {2: 0, 3: 2}, {2: 1, 3: 2})
        bits = sift_all_active(trace)
        assert list(bits.slot) == [2]
        # chain sifting would have kept slot 3: bases treated independently
        rbits = sift_rogers(trace)
        assert sorted(rbits.slot) == [2, 3]

    def test_naive_keeps_everything_matched(self):
        trace = make_passive_trace(5, 30, {2: 0, 3: 2, 4: 1}, {2: 1, 3: 2, 4: 1})
        bits = sift_naive(trace)
        assert sorted(bits.slot) == [2, 3, 4]

    def test_naive_close_pair_anticorrelation(self):
        trace = make_passive_trace(10, 40, {2: 0, 5: 1, 30: 0}, {})
        scanner = NaiveScanner()
        scanner.feed(trace)
        scanner.finish()
        assert scanner.close_pairs == 1          # (2, 5); (5, 30) is far
        assert scanner.close_pair_flip_prob == 1.0

    def test_deactivate_sifts_every_matched_click(self):
        trace = make_passive_trace(5, 40, {2: 0, 9: 3}, {2: 1, 9: 2},
                                   bench="deactivate")
        bits = sift_deactivate(trace)
        assert sorted(bits.slot) == [2, 9]
        assert list(bits.bob_bit[np.argsort(bits.slot)]) == [0, 1]


class TestFourState:
    def _active_trace(self, clicks, swaps, alice_basis, bob_basis, n=20):
        params = params_k(5, survival=1.0)
        clicked = np.full(n, -1, dtype=np.int8)
        swap = np.full(n, -1, dtype=np.int8)
        bb = np.zeros(n, dtype=np.int8)
        for slot, det in clicks.items():
            clicked[slot] = det
            swap[slot] = swaps[slot]
            bb[slot] = bob_basis[slot]
        ab = np.full(n, 9, dtype=np.int8)
        for slot, basis in alice_basis.items():
            ab[slot] = basis
        return TrialTrace(params=params, bench="active", start=0,
                          alice_basis=ab, alice_bit=np.zeros(n, dtype=np.int8),
                          arrived=clicked >= 0, bob_basis=bb, clicked=clicked,
                          active_mask=np.ones((n, 2), dtype=bool), swap=swap)

    def test_xor_bit_recovery(self):
        trace = self._active_trace(clicks={1: 1, 3: 0}, swaps={1: 0, 3: 1},
                                   alice_basis={1: 1, 3: 2},
                                   bob_basis={1: 1, 3: 2})
        bits = sift_4state(trace)
        assert list(bits.slot) == [1, 3]
        assert list(bits.bob_bit) == [1, 1]  # det1^0 = 1, det0^1 = 1

    def test_mismatched_basis_dropped(self):
        trace = self._active_trace(clicks={1: 1}, swaps={1: 0},
                                   alice_basis={1: 2}, bob_basis={1: 1})
        assert len(sift_4state(trace)) == 0

    def test_wrong_bench_rejected(self):
        trace = make_passive_trace(5, 10, {})
        with pytest.raises(ParameterError):
            sift_4state(trace)


class TestLowSpeedEquivalence:
    def test_k_below_one_all_passive_algorithms_agree(self):
        params = params_k(0.5)
        chunks = list(stream_trace(params, Passive(), "passive", 20_000,
                                   RandomStream(31)))
        trace = TrialTrace.concat(chunks)
        assert trace.active_mask.all()  # no dead-time overlap possible
        a = sift_rogers(trace)
        b = sift_all_active(trace)
        c = sift_naive(trace)
        assert np.array_equal(a.slot, b.slot) and np.array_equal(b.slot, c.slot)
        assert np.array_equal(a.bob_bit, b.bob_bit)
        assert np.array_equal(a.alice_bit, c.alice_bit)
        # and they are exactly the matched clicks
        matched = (trace.clicked >= 0) & (trace.clicked // 2 + 1 == trace.alice_basis)
        assert len(a) == int(matched.sum())


class TestChunkedScanning:
    @pytest.mark.parametrize("k", [2.0, 3.7, 10.0])
    def test_rogers_chunking_invariant(self, k):
        params = params_k(k, survival=0.8)
        chunks = list(stream_trace(params, Passive(), "passive", 30_000,
                                   RandomStream(99), chunk_slots=677))
        scanner = RogersScanner()
        for chunk in chunks:
            scanner.feed(chunk)
        bits_inc, chains_inc = scanner.finish()
        whole = TrialTrace.concat(chunks)
        bits_all, chains_all = rogers_chains(whole)
        assert np.array_equal(bits_inc.slot, bits_all.slot)
        assert np.array_equal(bits_inc.bob_bit, bits_all.bob_bit)
        assert np.array_equal(chains_inc.start, chains_all.start)
        assert np.array_equal(chains_inc.length, chains_all.length)
        assert np.array_equal(chains_inc.accepted, chains_all.accepted)
        assert np.array_equal(chains_inc.sifted, chains_all.sifted)

    def test_naive_close_pairs_chunking_invariant(self):
        params = params_k(10, survival=1.0)
        chunks = list(stream_trace(params, Passive(), "passive", 20_000,
                                   RandomStream(5), chunk_slots=501))
        inc = NaiveScanner()
        for chunk in chunks:
            inc.feed(chunk)
        inc.finish()
        whole = NaiveScanner()
        whole.feed(TrialTrace.concat(chunks))
        whole.finish()
        assert inc.close_pairs == whole.close_pairs > 0
        assert inc.close_flips == whole.close_flips
        assert np.array_equal(inc.pair_counts, whole.pair_counts)
