"""Vectorized, chunked Monte Carlo engine for slot-by-slot trials.

One trial is generated chunk by chunk (bounded memory, arbitrary length).
Within a chunk everything is drawn and decided with array operations; the only
sequential parts are the per-detector non-paralyzable click selections, which
operate on the (much shorter) candidate lists.

The engine consumes randomness exactly as the per-slot reference
implementation in :mod:`deadtime_qkd.reference` does -- same component
streams, same number of uniform doubles in the same order -- so for a given
``(seed, stream_id)`` both produce identical traces.  Chunk size does not
affect results either; it only bounds memory.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .core import ParameterError, RandomStream, SystemParams
from .parties import EveStrategy, FixedStateResend, InterceptResend, Passive
from .sifting import ACTIVE, DEACTIVATE, PASSIVE, TrialTrace

__all__ = ["stream_trace"]

DEFAULT_CHUNK_SLOTS = 1 << 20


def _select_fires(cands: np.ndarray, gap: int, nxt: int) -> np.ndarray:
    """Indices (into ``cands``) of candidates that actually fire.

    ``cands`` must be strictly increasing slot numbers; ``nxt`` is the first
    slot at which the detector is allowed to fire again.  Selection is the
    non-paralyzable rule: fire, then ignore candidates for ``gap - 1`` slots.
    """
    m = cands.shape[0]
    if m == 0:
        return np.empty(0, dtype=np.int64)
    if gap <= 1:
        start = int(np.searchsorted(cands, nxt, side="left"))
        return np.arange(start, m, dtype=np.int64)
    span = int(cands[-1]) - max(int(cands[0]), nxt) + 1
    if span // gap < m // 8:
        # sparse fires: jump from fire to fire by bisection
        pos: list[int] = []
        i = int(np.searchsorted(cands, nxt, side="left"))
        while i < m:
            pos.append(i)
            i = int(np.searchsorted(cands, cands[i] + gap, side="left"))
        return np.asarray(pos, dtype=np.int64)
    pos = []
    append = pos.append
    nx = nxt
    for idx, s in enumerate(cands.tolist()):
        if s >= nx:
            append(idx)
            nx = s + gap
    return np.asarray(pos, dtype=np.int64)


def _paint_active(m: int, fires: np.ndarray, gap: int, nxt_local: int) -> np.ndarray:
    """Per-slot availability over a chunk of ``m`` slots.

    ``fires`` are local fire slots, ``nxt_local`` the (possibly negative)
    local slot at which a recovery from an earlier chunk completes.  Dead
    windows never overlap because fires are at least ``gap`` apart.
    """
    if gap <= 1:
        return np.ones(m, dtype=bool)
    diff = np.zeros(m + 1, dtype=np.int32)
    if nxt_local > 0:
        diff[0] += 1
        diff[min(nxt_local, m)] -= 1
    if fires.shape[0]:
        starts = fires + 1
        ends = np.minimum(fires + gap, m)
        keep = starts < ends
        diff[starts[keep]] += 1
        diff[ends[keep]] -= 1
    return np.cumsum(diff[:m]) == 0


def _eve_arrays(strategy: EveStrategy, alice_basis: np.ndarray,
                alice_bit: np.ndarray, gen: np.random.Generator
                ) -> tuple[np.ndarray, np.ndarray]:
    """Post-eavesdropper photon state for one chunk (never vacuum here)."""
    if isinstance(strategy, Passive):
        return alice_basis, alice_bit
    m = alice_basis.shape[0]
    if isinstance(strategy, FixedStateResend):
        u = gen.random(m)
        acts = u < strategy.fraction
        basis = np.where(acts, np.int8(int(strategy.state.basis)), alice_basis)
        bit = np.where(acts, np.int8(strategy.state.bit), alice_bit)
        return basis.astype(np.int8), bit.astype(np.int8)
    if isinstance(strategy, InterceptResend):
        u = gen.random((m, 3))
        acts = u[:, 0] < strategy.fraction
        eve_basis = np.where(u[:, 1] < 0.5, 1, 2).astype(np.int8)
        matched = eve_basis == alice_basis
        eve_bit = np.where(matched, alice_bit,
                           (u[:, 2] >= 0.5).astype(np.int8)).astype(np.int8)
        basis = np.where(acts, eve_basis, alice_basis)
        bit = np.where(acts, eve_bit, alice_bit)
        return basis.astype(np.int8), bit.astype(np.int8)
    raise ParameterError(f"unsupported eavesdropper strategy {strategy!r}")


def stream_trace(params: SystemParams, eve: EveStrategy, bench: str,
                 n_slots: int, stream: RandomStream,
                 chunk_slots: int = DEFAULT_CHUNK_SLOTS) -> Iterator[TrialTrace]:
    """Yield the trial trace in chunks of at most ``chunk_slots`` slots.

    ``bench`` is one of ``"passive"``, ``"deactivate"`` (four detectors,
    all disabled on any click) or ``"active"`` (two detectors, four-valued
    modulation).  All detectors start active at slot 0.
    """
    if bench not in (PASSIVE, DEACTIVATE, ACTIVE):
        raise ParameterError(f"bench={bench!r} must be passive, deactivate or active")
    if n_slots < 1:
        raise ParameterError(f"n_slots={n_slots!r} must be >= 1")
    if chunk_slots < 1:
        raise ParameterError(f"chunk_slots={chunk_slots!r} must be >= 1")

    g_alice, g_eve, g_channel, g_bench = stream.components()
    gap = params.dead_gap_slots
    survival = params.survival
    eta_d = params.eta_d
    n_det = 2 if bench == ACTIVE else 4
    # per-detector first slot at which firing is allowed again (absolute);
    # the deactivating bench shares one recovery state across all detectors
    next_allowed = [0] * (1 if bench == DEACTIVATE else n_det)

    for a in range(0, n_slots, chunk_slots):
        b = min(a + chunk_slots, n_slots)
        m = b - a

        u_alice = g_alice.random((m, 2))
        alice_basis = np.where(u_alice[:, 0] < 0.5, 1, 2).astype(np.int8)
        alice_bit = (u_alice[:, 1] >= 0.5).astype(np.int8)

        pulse_basis, pulse_bit = _eve_arrays(eve, alice_basis, alice_bit, g_eve)

        arrived = g_channel.random(m) < survival
        arr = np.nonzero(arrived)[0]
        n_arr = arr.shape[0]
        u_bench = g_bench.random((n_arr, 3))

        bob_basis = np.zeros(m, dtype=np.int8)
        clicked = np.full(m, -1, dtype=np.int8)
        swap = None

        if bench == ACTIVE:
            mod = np.minimum((u_bench[:, 0] * 4).astype(np.int64), 3)
            basis_arr = (1 + mod // 2).astype(np.int8)
            swap_arr = (mod % 2).astype(np.int8)
            matched = basis_arr == pulse_basis[arr]
            pick = (u_bench[:, 1] >= 0.5).astype(np.int8)
            target = np.where(matched, pulse_bit[arr] ^ swap_arr, pick)
            swap = np.full(m, -1, dtype=np.int8)
            swap[arr] = swap_arr
        else:
            basis_arr = np.where(u_bench[:, 0] < 0.5, 1, 2).astype(np.int8)
            matched = basis_arr == pulse_basis[arr]
            pick = (u_bench[:, 1] >= 0.5).astype(np.int8)
            tbit = np.where(matched, pulse_bit[arr], pick)
            target = ((basis_arr - 1) * 2 + tbit).astype(np.int8)
        bob_basis[arr] = basis_arr
        ok = u_bench[:, 2] < eta_d

        active = np.empty((m, n_det), dtype=bool)
        if bench == DEACTIVATE:
            sel = np.nonzero(ok)[0]
            cands = arr[sel]
            fire_pos = _select_fires(cands, gap, next_allowed[0] - a)
            fires = cands[fire_pos]
            col = _paint_active(m, fires, gap, next_allowed[0] - a)
            active[:] = col[:, None]
            clicked[fires] = target[sel[fire_pos]]
            if fires.shape[0]:
                next_allowed[0] = a + int(fires[-1]) + gap
        else:
            for d in range(n_det):
                sel = np.nonzero(ok & (target == d))[0]
                cands = arr[sel]
                fire_pos = _select_fires(cands, gap, next_allowed[d] - a)
                fires = cands[fire_pos]
                active[:, d] = _paint_active(m, fires, gap, next_allowed[d] - a)
                clicked[fires] = d
                if fires.shape[0]:
                    next_allowed[d] = a + int(fires[-1]) + gap

        yield TrialTrace(params=params, bench=bench, start=a,
                         alice_basis=alice_basis, alice_bit=alice_bit,
                         arrived=arrived, bob_basis=bob_basis,
                         clicked=clicked, active_mask=active, swap=swap)
