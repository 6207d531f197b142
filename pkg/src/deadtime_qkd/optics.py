"""Non-paralyzable dead-time detectors and the two detection benches.

Detectors drop from efficiency ``eta_d`` to zero instantaneously on a click
and recover instantaneously after the dead time; a photon arriving during
recovery is ignored and does not extend the dead period.

Two bench layouts are modeled:

* :class:`PassiveBench` -- four detectors behind a 50/50 basis-splitting
  element.  Detector ids are ``(basis - 1) * 2 + bit``: 0 = rectilinear/V,
  1 = rectilinear/H, 2 = diagonal/45, 3 = diagonal/135.  With
  ``deactivate_all=True`` the bench additionally disables *all* detectors
  whenever any one of them fires (the active-disable sifting policy).
* :class:`ActiveBench` -- two detectors with a per-pulse modulation choice
  drawn from four values encoding (measurement basis, bit-swap flag); the
  reported bit is the detector index XOR the swap flag.

Each bench consumes exactly three uniform doubles per arriving photon, in
slot order (see :mod:`deadtime_qkd.core` for the randomness contract).
Vacuum slots consume no bench randomness but still produce a
:class:`DetectionRecord`, so availability can be estimated at every expected
arrival time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SLOT_TOL, Basis, PulseState, SystemParams

__all__ = [
    "ActiveBench",
    "DetectionRecord",
    "Detector",
    "PassiveBench",
    "is_active",
]


@dataclass
class Detector:
    """A single non-paralyzable detector.

    ``k`` is the dead time expressed in slots; the availability comparison is
    done on that continuous value, so non-integer ``k`` works unchanged.
    """

    id: int
    eta_d: float
    k: float
    last_fire: int | None = None

    def is_active(self, t: int) -> bool:
        """True if the detector can click at the expected arrival time of slot t."""
        if self.last_fire is None:
            return True
        return (t - self.last_fire) >= self.k - SLOT_TOL

    def register_hit(self, t: int, u_eff: float) -> bool:
        """Process a photon aimed at this detector; return whether it clicked.

        A hit while recovering has no effect whatsoever (non-paralyzable).
        """
        if not self.is_active(t):
            return False
        if u_eff < self.eta_d:
            self.last_fire = t
            return True
        return False


def is_active(detector: Detector, t: int) -> bool:
    """Availability query at slot ``t``; does not change detector state."""
    return detector.is_active(t)


@dataclass(frozen=True)
class DetectionRecord:
    """Outcome of one slot at the bench.

    ``active_mask`` is sampled at the expected photon arrival time, before any
    click in this slot is applied.  ``bob_basis`` (and, for the two-detector
    bench, ``swap``) are present iff a photon reached the bench.
    """

    slot: int
    clicked: int | None
    active_mask: tuple[bool, ...]
    bob_basis: Basis | None = None
    swap: int | None = None


class PassiveBench:
    """Four-detector polarization bench with passive 50/50 basis selection."""

    n_detectors = 4

    def __init__(self, params: SystemParams, deactivate_all: bool = False):
        self.params = params
        self.deactivate_all = deactivate_all
        self.detectors = [Detector(i, params.eta_d, params.k) for i in range(4)]

    def active_mask(self, t: int) -> tuple[bool, ...]:
        return tuple(d.is_active(t) for d in self.detectors)

    def detect(self, t: int, pulse: PulseState,
               rng: np.random.Generator) -> DetectionRecord:
        """Process slot ``t``.  Consumes 3 uniforms iff ``pulse`` is a photon."""
        mask = self.active_mask(t)
        if pulse.is_vacuum:
            return DetectionRecord(t, None, mask)
        u_route = rng.random()
        u_pick = rng.random()
        u_eff = rng.random()
        bob_basis = Basis.RECTILINEAR if u_route < 0.5 else Basis.DIAGONAL
        if bob_basis == pulse.basis:
            bit = pulse.bit
        else:
            bit = 0 if u_pick < 0.5 else 1
        target = (bob_basis - 1) * 2 + bit
        clicked = None
        if self.detectors[target].register_hit(t, u_eff):
            clicked = target
            if self.deactivate_all:
                for d in self.detectors:
                    d.last_fire = t
        return DetectionRecord(t, clicked, mask, bob_basis=bob_basis)


class ActiveBench:
    """Two-detector bench with active basis choice and bit-swap modulation."""

    n_detectors = 2

    def __init__(self, params: SystemParams):
        self.params = params
        self.detectors = [Detector(i, params.eta_d, params.k) for i in range(2)]

    def active_mask(self, t: int) -> tuple[bool, ...]:
        return tuple(d.is_active(t) for d in self.detectors)

    def detect(self, t: int, pulse: PulseState,
               rng: np.random.Generator) -> DetectionRecord:
        """Process slot ``t``.  Consumes 3 uniforms iff ``pulse`` is a photon.

        The modulation draw selects uniformly from four values; the reported
        bit for a click on detector ``d`` is ``d XOR swap``.
        """
        mask = self.active_mask(t)
        if pulse.is_vacuum:
            return DetectionRecord(t, None, mask)
        u_mod = rng.random()
        u_pick = rng.random()
        u_eff = rng.random()
        mod = min(int(u_mod * 4), 3)
        bob_basis = Basis(1 + mod // 2)
        swap = mod % 2
        if bob_basis == pulse.basis:
            target = pulse.bit ^ swap
        else:
            target = 0 if u_pick < 0.5 else 1
        clicked = None
        if self.detectors[target].register_hit(t, u_eff):
            clicked = target
        return DetectionRecord(t, clicked, mask, bob_basis=bob_basis, swap=swap)
