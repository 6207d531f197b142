"""Single-photon source, lossy channel, and eavesdropper strategies.

The eavesdropper sits directly at the source output, so any state she resends
still traverses the full lossy channel.  Her detectors have no dead time: her
action in a slot never depends on her earlier actions.

Strategies:

* :class:`Passive` -- listens only, never alters pulses.
* :class:`FixedStateResend` -- replaces a fraction of pulses with one fixed
  state (vertical by default), which skews the availability of the receiver's
  two measurement bases.
* :class:`InterceptResend` -- measures a fraction ``q`` of pulses in a random
  basis and resends the measured state, inducing a sifted-key error rate of
  ``q / 4``.

Draw budget per slot (see the randomness contract in
:mod:`deadtime_qkd.core`): source 2, channel 1, eavesdropper 0 / 1 / 3 for
passive / fixed-resend / intercept-resend.  Draws are consumed even when the
branch that needs them is not taken.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import VERTICAL, Basis, ParameterError, PulseState

__all__ = [
    "AliceRecord",
    "EveLog",
    "EveStrategy",
    "FixedStateResend",
    "InterceptResend",
    "Passive",
    "alice_emit",
    "channel_transmit",
    "eve_apply",
]


@dataclass(frozen=True)
class AliceRecord:
    """Sender-side log entry for one slot: the announced basis and bit."""

    slot: int
    basis: Basis
    bit: int


def alice_emit(t: int, rng: np.random.Generator) -> tuple[AliceRecord, PulseState]:
    """Emit one single-photon pulse with uniform independent basis and bit.

    Consumes exactly 2 uniforms: basis, then bit.
    """
    basis = Basis.RECTILINEAR if rng.random() < 0.5 else Basis.DIAGONAL
    bit = 0 if rng.random() < 0.5 else 1
    return AliceRecord(t, basis, bit), PulseState(basis, bit)


@dataclass(frozen=True)
class EveLog:
    """What the eavesdropper did in one slot."""

    acted: bool
    basis: Basis | None = None
    bit: int | None = None


class EveStrategy:
    """Base class; concrete strategies define draw count and pulse action."""

    #: uniforms consumed per slot, regardless of outcome
    draws_per_slot = 0

    def apply(self, pulse: PulseState,
              rng: np.random.Generator) -> tuple[PulseState, EveLog]:
        raise NotImplementedError


@dataclass(frozen=True)
class Passive(EveStrategy):
    """No interference with the quantum signal."""

    draws_per_slot = 0

    def apply(self, pulse, rng):
        return pulse, EveLog(acted=False)


@dataclass(frozen=True)
class FixedStateResend(EveStrategy):
    """Replace each pulse, with probability ``fraction``, by one fixed state."""

    state: PulseState = VERTICAL
    fraction: float = 1.0

    draws_per_slot = 1

    def __post_init__(self):
        if not 0 <= self.fraction <= 1:
            raise ParameterError(f"fraction={self.fraction!r} must be in [0, 1]")
        if self.state.is_vacuum:
            raise ParameterError("resend state must be a photon, not vacuum")

    def apply(self, pulse, rng):
        acts = rng.random() < self.fraction
        if acts and not pulse.is_vacuum:
            return self.state, EveLog(acted=True, basis=self.state.basis,
                                      bit=self.state.bit)
        return pulse, EveLog(acted=False)


@dataclass(frozen=True)
class InterceptResend(EveStrategy):
    """Measure a fraction ``q`` of pulses in a random basis and resend.

    A matched-basis measurement reproduces the sender's bit; a mismatched one
    yields a uniform bit.  The measured state is resent as a single photon.
    """

    fraction: float = 1.0

    draws_per_slot = 3

    def __post_init__(self):
        if not 0 <= self.fraction <= 1:
            raise ParameterError(f"fraction={self.fraction!r} must be in [0, 1]")

    def apply(self, pulse, rng):
        u_act = rng.random()
        u_basis = rng.random()
        u_out = rng.random()
        if u_act >= self.fraction or pulse.is_vacuum:
            return pulse, EveLog(acted=False)
        eve_basis = Basis.RECTILINEAR if u_basis < 0.5 else Basis.DIAGONAL
        if eve_basis == pulse.basis:
            outcome = pulse.bit
        else:
            outcome = 0 if u_out < 0.5 else 1
        return PulseState(eve_basis, outcome), EveLog(acted=True, basis=eve_basis,
                                                      bit=outcome)


def eve_apply(strategy: EveStrategy, pulse: PulseState,
              rng: np.random.Generator) -> tuple[PulseState, EveLog]:
    """Apply one eavesdropping strategy to one pulse."""
    return strategy.apply(pulse, rng)


def channel_transmit(pulse: PulseState, survival: float,
                     rng: np.random.Generator) -> PulseState:
    """Erase the photon with probability ``1 - survival``; vacuum passes through.

    Consumes exactly 1 uniform per slot, photon or not.
    """
    if not 0 <= survival <= 1:
        raise ParameterError(f"survival={survival!r} must be in [0, 1]")
    u = rng.random()
    if pulse.is_vacuum or u < survival:
        return pulse
    return PulseState()
