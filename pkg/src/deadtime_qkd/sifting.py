"""Sifting algorithms for dead-time-limited BB84 receivers.

All algorithms consume a :class:`TrialTrace` (columnar per-slot record of one
trial) and produce :class:`SiftedBits`.  Four algorithms are provided, plus a
deliberately naive baseline:

* :func:`sift_rogers` -- chain-based sifting for the free-running passive
  bench.  Each basis is processed independently: clicks are grouped into
  chains, a chain is accepted only if both detectors of its basis were active
  at the expected arrival time of its first click, and each accepted chain
  yields at most one bit (taken from its first click whose announced sender
  basis matches the chain basis).
* :func:`sift_all_active` -- post-processing only: keep a matched-basis click
  iff all detectors were active at its expected arrival time.
* :func:`sift_deactivate` -- for the bench policy that disables every detector
  whenever any one fires; every click is then guaranteed to occur with all
  detectors active, so every matched-basis click is kept.
* :func:`sift_4state` -- for the two-detector bench with four-valued
  modulation; every matched-basis click is kept and the bit is the detector
  index XOR the bit-swap flag.
* :func:`sift_naive` -- keeps every matched-basis click with no dead-time
  guard at all; within one dead time, consecutive same-basis clicks are then
  perfectly anti-correlated (the insecure baseline).

The scanner classes implement the same algorithms incrementally so the
Monte Carlo engine can stream arbitrarily long trials chunk by chunk; the
module-level functions are thin single-chunk wrappers around them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import SLOT_TOL, ParameterError, SystemParams

__all__ = [
    "RogersChains",
    "SiftedBits",
    "TrialTrace",
    "rogers_chains",
    "sift_4state",
    "sift_all_active",
    "sift_deactivate",
    "sift_naive",
    "sift_rogers",
]

PASSIVE = "passive"
DEACTIVATE = "deactivate"
ACTIVE = "active"


@dataclass
class TrialTrace:
    """Columnar per-slot record of one trial (or one chunk of one).

    ``clicked`` holds the detector id that fired (-1 for none).  On the
    four-detector benches ids are ``(basis - 1) * 2 + bit``; on the
    two-detector bench they are 0/1 and ``swap`` holds the per-pulse bit-swap
    flag.  ``bob_basis`` is 0 where no photon reached the bench.
    ``active_mask[t, d]`` is detector d's availability sampled at slot t's
    expected arrival time, before any click of that slot.
    """

    params: SystemParams
    bench: str
    start: int
    alice_basis: np.ndarray
    alice_bit: np.ndarray
    arrived: np.ndarray
    bob_basis: np.ndarray
    clicked: np.ndarray
    active_mask: np.ndarray
    swap: np.ndarray | None = None

    @property
    def n_slots(self) -> int:
        return self.alice_basis.shape[0]

    @property
    def end(self) -> int:
        return self.start + self.n_slots

    @classmethod
    def concat(cls, chunks: "list[TrialTrace]") -> "TrialTrace":
        if not chunks:
            raise ParameterError("cannot concatenate an empty list of chunks")
        first = chunks[0]
        swap = None
        if first.swap is not None:
            swap = np.concatenate([c.swap for c in chunks])
        return cls(
            params=first.params,
            bench=first.bench,
            start=first.start,
            alice_basis=np.concatenate([c.alice_basis for c in chunks]),
            alice_bit=np.concatenate([c.alice_bit for c in chunks]),
            arrived=np.concatenate([c.arrived for c in chunks]),
            bob_basis=np.concatenate([c.bob_basis for c in chunks]),
            clicked=np.concatenate([c.clicked for c in chunks]),
            active_mask=np.concatenate([c.active_mask for c in chunks]),
            swap=swap,
        )


@dataclass
class SiftedBits:
    """Columnar sifted-key record: one entry per kept detection."""

    slot: np.ndarray
    basis: np.ndarray
    alice_bit: np.ndarray
    bob_bit: np.ndarray

    def __len__(self) -> int:
        return self.slot.shape[0]

    @property
    def errors(self) -> int:
        return int(np.count_nonzero(self.alice_bit != self.bob_bit))

    @classmethod
    def empty(cls) -> "SiftedBits":
        return cls(np.empty(0, np.int64), np.empty(0, np.int8),
                   np.empty(0, np.int8), np.empty(0, np.int8))

    @classmethod
    def concat(cls, parts: "list[SiftedBits]") -> "SiftedBits":
        if not parts:
            return cls.empty()
        return cls(np.concatenate([p.slot for p in parts]),
                   np.concatenate([p.basis for p in parts]),
                   np.concatenate([p.alice_bit for p in parts]),
                   np.concatenate([p.bob_bit for p in parts]))


def _require_bench(trace: TrialTrace, *allowed: str) -> None:
    if trace.bench not in allowed:
        raise ParameterError(
            f"trace comes from the {trace.bench!r} bench; "
            f"this algorithm needs {' or '.join(repr(a) for a in allowed)}")


def _matched_click_bits(trace: TrialTrace, keep: np.ndarray | None = None
                        ) -> tuple[np.ndarray, ...]:
    """Slots/bases/bits of matched-basis clicks, optionally masked further."""
    clicked = trace.clicked
    has_click = clicked >= 0
    if trace.bench == ACTIVE:
        basis = trace.bob_basis
        bob_bit = (clicked ^ trace.swap).astype(np.int8)
    else:
        basis = (clicked // 2 + 1).astype(np.int8)
        bob_bit = (clicked % 2).astype(np.int8)
    sel = has_click & (basis == trace.alice_basis)
    if keep is not None:
        sel &= keep
    idx = np.nonzero(sel)[0]
    slots = trace.start + idx.astype(np.int64)
    return slots, basis[idx], trace.alice_bit[idx], bob_bit[idx]


# ---------------------------------------------------------------------------
# chain-based sifting (free-running passive bench)
# ---------------------------------------------------------------------------

@dataclass
class _OpenChain:
    start_slot: int
    accepted: bool
    length: int
    emitted: bool


@dataclass
class RogersChains:
    """Per-chain summary of a chain-sifting pass.

    Arrays are aligned: chain i started at ``start[i]``, contained
    ``length[i]`` clicks, was accepted iff ``accepted[i]``, and produced a
    sifted bit iff ``sifted[i]``.
    """

    start: np.ndarray
    length: np.ndarray
    accepted: np.ndarray
    sifted: np.ndarray

    def __len__(self) -> int:
        return self.start.shape[0]

    def length_histogram(self, min_start: int = 0) -> dict[int, int]:
        """Accepted-chain counts by length, for chains starting >= min_start."""
        sel = self.accepted & (self.start >= min_start)
        lengths, counts = np.unique(self.length[sel], return_counts=True)
        return {int(l): int(c) for l, c in zip(lengths, counts)}

    def sifted_histogram(self, min_start: int = 0) -> dict[int, int]:
        """Accepted-and-sifted chain counts by length."""
        sel = self.accepted & self.sifted & (self.start >= min_start)
        lengths, counts = np.unique(self.length[sel], return_counts=True)
        return {int(l): int(c) for l, c in zip(lengths, counts)}


class RogersScanner:
    """Incremental chain sifting over trace chunks, one state per basis.

    A chain ends at the first expected-arrival slot at which both detectors
    of its basis are active again; a click at that very slot starts the next
    (accepted) chain.  Chunk boundaries are invisible to the algorithm: an
    open chain is carried across and closed by the first fully-active slot
    of a later chunk.
    """

    def __init__(self, record_chains: bool = True):
        self._open: dict[int, _OpenChain | None] = {1: None, 2: None}
        self._record = record_chains
        self._bits: list[tuple[np.ndarray, ...]] = []
        self._starts: list[int] = []
        self._lengths: list[int] = []
        self._accepted: list[bool] = []
        self._sifted: list[bool] = []

    def feed(self, trace: TrialTrace) -> None:
        _require_bench(trace, PASSIVE)
        for basis in (1, 2):
            self._feed_basis(trace, basis)

    def _emit(self, trace, basis, click_idx) -> None:
        local = int(click_idx)
        bob_bit = int(trace.clicked[local]) % 2
        self._bits.append((trace.start + local, basis,
                           int(trace.alice_bit[local]), bob_bit))

    def _close(self, chain: _OpenChain) -> None:
        if self._record:
            self._starts.append(chain.start_slot)
            self._lengths.append(chain.length)
            self._accepted.append(chain.accepted)
            self._sifted.append(chain.emitted)

    def _feed_basis(self, trace: TrialTrace, basis: int) -> None:
        d0 = (basis - 1) * 2
        both = trace.active_mask[:, d0] & trace.active_mask[:, d0 + 1]
        is_click = (trace.clicked == d0) | (trace.clicked == d0 + 1)
        click_idx = np.nonzero(is_click)[0]
        both_idx = np.nonzero(both)[0]
        n_clicks = click_idx.shape[0]
        match = trace.alice_basis[click_idx] == basis

        # next_match[q]: index of the first basis-matching click at or after
        # click position q (n_clicks if none), for O(1) in-chain lookups
        sentinel = np.where(match, np.arange(n_clicks, dtype=np.int64), n_clicks)
        next_match = np.minimum.accumulate(sentinel[::-1])[::-1] \
            if n_clicks else sentinel
        match_list = next_match.tolist()

        i = 0
        chain = self._open[basis]
        if chain is not None:
            # the carried chain ends at this chunk's first fully-active slot
            end_local = int(both_idx[0]) if both_idx.size else trace.n_slots
            j = int(np.searchsorted(click_idx, end_local, side="left"))
            if chain.accepted and not chain.emitted and n_clicks \
                    and match_list[0] < j:
                self._emit(trace, basis, click_idx[match_list[0]])
                chain.emitted = True
            chain.length += j
            if both_idx.size:
                self._close(chain)
                self._open[basis] = None
            else:
                return  # never fully active in this chunk; chain stays open
            i = j

        if n_clicks == 0 or i >= n_clicks:
            return

        # For every click, the first fully-active slot strictly after it, and
        # from that the index of the click that would start the next chain.
        pos_end = np.searchsorted(both_idx, click_idx[i:], side="right")
        if both_idx.size:
            end_of = np.where(pos_end < both_idx.shape[0],
                              both_idx[np.minimum(pos_end, both_idx.shape[0] - 1)],
                              trace.n_slots)
        else:
            end_of = np.full(n_clicks - i, trace.n_slots, dtype=np.int64)
        next_start = np.searchsorted(click_idx, end_of, side="left")

        next_list = next_start.tolist()
        acc_list = both[click_idx[i:]].tolist()
        open_list = (pos_end == both_idx.shape[0]).tolist()
        click_list = click_idx.tolist()
        base = i
        while i < n_clicks:
            j = next_list[i - base]
            accepted = acc_list[i - base]
            emitted = False
            if accepted:
                m = match_list[i]
                if m < j:
                    self._emit(trace, basis, click_list[m])
                    emitted = True
            if open_list[i - base]:
                # no fully-active slot before the chunk ends: carry the chain
                self._open[basis] = _OpenChain(
                    start_slot=trace.start + click_list[i],
                    accepted=accepted, length=j - i, emitted=emitted)
            else:
                self._close(_OpenChain(trace.start + click_list[i],
                                       accepted, j - i, emitted))
            i = j

    def finish(self) -> tuple[SiftedBits, RogersChains]:
        for basis in (1, 2):
            chain = self._open[basis]
            if chain is not None:
                self._close(chain)
                self._open[basis] = None
        if self._bits:
            arr = np.asarray(self._bits, dtype=np.int64)
            order = np.argsort(arr[:, 0], kind="stable")
            arr = arr[order]
            bits = SiftedBits(arr[:, 0], arr[:, 1].astype(np.int8),
                              arr[:, 2].astype(np.int8), arr[:, 3].astype(np.int8))
        else:
            bits = SiftedBits.empty()
        chains = RogersChains(
            np.asarray(self._starts, dtype=np.int64),
            np.asarray(self._lengths, dtype=np.int64),
            np.asarray(self._accepted, dtype=bool),
            np.asarray(self._sifted, dtype=bool),
        )
        return bits, chains


def sift_rogers(trace: TrialTrace) -> SiftedBits:
    """Chain-based sifting; at most one bit per accepted chain."""
    scanner = RogersScanner(record_chains=False)
    scanner.feed(trace)
    return scanner.finish()[0]


def rogers_chains(trace: TrialTrace) -> tuple[SiftedBits, RogersChains]:
    """Chain-based sifting together with the per-chain summary."""
    scanner = RogersScanner()
    scanner.feed(trace)
    return scanner.finish()


# ---------------------------------------------------------------------------
# all-active post-processing
# ---------------------------------------------------------------------------

class AllActiveScanner:
    """Keep matched clicks at whose arrival time every detector was active."""

    def __init__(self):
        self._parts: list[SiftedBits] = []

    def feed(self, trace: TrialTrace) -> None:
        _require_bench(trace, PASSIVE)
        all_active = trace.active_mask.all(axis=1)
        self._parts.append(SiftedBits(*_matched_click_bits(trace, all_active)))

    def finish(self) -> SiftedBits:
        return SiftedBits.concat(self._parts)


def sift_all_active(trace: TrialTrace) -> SiftedBits:
    """Software-only sifting: keep a matched click iff all four detectors
    were active at its expected arrival time."""
    scanner = AllActiveScanner()
    scanner.feed(trace)
    return scanner.finish()


# ---------------------------------------------------------------------------
# deactivating bench and two-detector bench
# ---------------------------------------------------------------------------

class DeactivateScanner:
    """Sifting for the bench that disables all detectors on any click."""

    def __init__(self):
        self._parts: list[SiftedBits] = []

    def feed(self, trace: TrialTrace) -> None:
        _require_bench(trace, DEACTIVATE)
        self._parts.append(SiftedBits(*_matched_click_bits(trace)))

    def finish(self) -> SiftedBits:
        return SiftedBits.concat(self._parts)


def sift_deactivate(trace: TrialTrace) -> SiftedBits:
    """Sift every matched click of the deactivating bench.

    The bench dynamics guarantee that each click happened with all four
    detectors active, so no further guard is needed here.
    """
    scanner = DeactivateScanner()
    scanner.feed(trace)
    return scanner.finish()


class FourStateScanner:
    """Sifting for the two-detector bench: every matched click is kept."""

    def __init__(self):
        self._parts: list[SiftedBits] = []

    def feed(self, trace: TrialTrace) -> None:
        _require_bench(trace, ACTIVE)
        self._parts.append(SiftedBits(*_matched_click_bits(trace)))

    def finish(self) -> SiftedBits:
        return SiftedBits.concat(self._parts)


def sift_4state(trace: TrialTrace) -> SiftedBits:
    """Sift every matched click of the two-detector bench; the bit is the
    detector index XOR the per-pulse swap flag."""
    scanner = FourStateScanner()
    scanner.feed(trace)
    return scanner.finish()


# ---------------------------------------------------------------------------
# naive baseline
# ---------------------------------------------------------------------------

class NaiveScanner:
    """Sift every matched click with no dead-time guard (insecure baseline).

    Also tracks, per basis, consecutive click pairs closer than one dead
    time; their reported bits are necessarily opposite, which is the
    anti-correlation this baseline exists to demonstrate.
    """

    def __init__(self, min_slot: int = 0):
        self._parts: list[SiftedBits] = []
        self._last: dict[int, tuple[int, int] | None] = {1: None, 2: None}
        self._min_slot = min_slot
        self.close_pairs = 0
        self.close_flips = 0
        # joint counts of (earlier bit, later bit) over close pairs
        self.pair_counts = np.zeros((2, 2), dtype=np.int64)

    def feed(self, trace: TrialTrace) -> None:
        _require_bench(trace, PASSIVE)
        self._parts.append(SiftedBits(*_matched_click_bits(trace)))
        k = trace.params.k
        clicked = trace.clicked
        for basis in (1, 2):
            d0 = (basis - 1) * 2
            idx = np.nonzero((clicked == d0) | (clicked == d0 + 1))[0]
            if idx.size == 0:
                continue
            slots = trace.start + idx.astype(np.int64)
            bits = (clicked[idx] % 2).astype(np.int64)
            carried = self._last[basis]
            if carried is not None:
                slots = np.concatenate(([carried[0]], slots))
                bits = np.concatenate(([carried[1]], bits))
            self._last[basis] = (int(slots[-1]), int(bits[-1]))
            if slots.shape[0] < 2:
                continue
            close = ((slots[1:] - slots[:-1]) < k - SLOT_TOL) \
                & (slots[:-1] >= self._min_slot)
            a = bits[:-1][close]
            b = bits[1:][close]
            self.close_pairs += int(a.shape[0])
            self.close_flips += int(np.count_nonzero(a != b))
            np.add.at(self.pair_counts, (a, b), 1)

    def finish(self) -> SiftedBits:
        return SiftedBits.concat(self._parts)

    @property
    def close_pair_flip_prob(self) -> float | None:
        if self.close_pairs == 0:
            return None
        return self.close_flips / self.close_pairs

    @property
    def lag1_correlation(self) -> float | None:
        """Pearson correlation of bit values across close same-basis pairs."""
        n = self.pair_counts.sum()
        if n == 0:
            return None
        pa = (self.pair_counts[1, 0] + self.pair_counts[1, 1]) / n
        pb = (self.pair_counts[0, 1] + self.pair_counts[1, 1]) / n
        va = pa * (1 - pa)
        vb = pb * (1 - pb)
        if va <= 0 or vb <= 0:
            return None
        cov = self.pair_counts[1, 1] / n - pa * pb
        return float(cov / np.sqrt(va * vb))


def sift_naive(trace: TrialTrace) -> SiftedBits:
    """Sift every matched click, ignoring dead time entirely."""
    scanner = NaiveScanner()
    scanner.feed(trace)
    return scanner.finish()
