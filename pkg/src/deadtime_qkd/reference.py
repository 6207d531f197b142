"""Straight-line per-slot trial loop, used to validate the vectorized engine.

This is the model written the obvious way: emit, eavesdrop, transmit, detect,
one slot at a time, with the scalar domain objects.  It consumes randomness
under the same contract as :mod:`deadtime_qkd.engine` (see
:mod:`deadtime_qkd.core`), so for equal ``(seed, stream_id)`` the two produce
element-for-element identical traces.  Keep it boring; its value is being
easy to audit.
"""

from __future__ import annotations

import numpy as np

from .core import ParameterError, RandomStream, SystemParams
from .optics import ActiveBench, PassiveBench
from .parties import EveStrategy, alice_emit, channel_transmit, eve_apply
from .sifting import ACTIVE, DEACTIVATE, PASSIVE, TrialTrace

__all__ = ["run_reference_trial"]


def run_reference_trial(params: SystemParams, eve: EveStrategy, bench: str,
                        n_slots: int, stream: RandomStream) -> TrialTrace:
    """Run one trial slot by slot and return its full trace."""
    if n_slots < 1:
        raise ParameterError(f"n_slots={n_slots!r} must be >= 1")
    g_alice, g_eve, g_channel, g_bench = stream.components()

    if bench == PASSIVE:
        bench_obj = PassiveBench(params)
    elif bench == DEACTIVATE:
        bench_obj = PassiveBench(params, deactivate_all=True)
    elif bench == ACTIVE:
        bench_obj = ActiveBench(params)
    else:
        raise ParameterError(f"bench={bench!r} must be passive, deactivate or active")
    n_det = bench_obj.n_detectors

    alice_basis = np.empty(n_slots, dtype=np.int8)
    alice_bit = np.empty(n_slots, dtype=np.int8)
    arrived = np.zeros(n_slots, dtype=bool)
    bob_basis = np.zeros(n_slots, dtype=np.int8)
    clicked = np.full(n_slots, -1, dtype=np.int8)
    active = np.empty((n_slots, n_det), dtype=bool)
    swap = np.full(n_slots, -1, dtype=np.int8) if bench == ACTIVE else None

    survival = params.survival
    for t in range(n_slots):
        record, pulse = alice_emit(t, g_alice)
        alice_basis[t] = int(record.basis)
        alice_bit[t] = record.bit
        pulse, _ = eve_apply(eve, pulse, g_eve)
        pulse = channel_transmit(pulse, survival, g_channel)
        detection = bench_obj.detect(t, pulse, g_bench)
        active[t] = detection.active_mask
        if not pulse.is_vacuum:
            arrived[t] = True
            bob_basis[t] = int(detection.bob_basis)
            if swap is not None:
                swap[t] = detection.swap
        if detection.clicked is not None:
            clicked[t] = detection.clicked

    return TrialTrace(params=params, bench=bench, start=0,
                      alice_basis=alice_basis, alice_bit=alice_bit,
                      arrived=arrived, bob_basis=bob_basis, clicked=clicked,
                      active_mask=active, swap=swap)
