"""Shared domain types, parameter handling and the deterministic RNG contract.

Time is discretized to transmission slots: slot ``t`` corresponds to wall-clock
time ``t / rho`` seconds.  Dead-time comparisons are done in continuous seconds,
so non-integer ``k = rho * tau`` is allowed in simulation; the closed-form
availability results in :mod:`deadtime_qkd.analytic` are exact only at integer
``k``.

Randomness contract
-------------------
Every trial owns one :class:`RandomStream` identified by ``(seed, stream_id)``.
Identical ``(seed, stream_id)`` reproduce bit-identical draw sequences; distinct
stream ids give statistically independent streams (numpy ``SeedSequence`` with
a ``spawn_key``).  A trial splits its stream into four component generators
(source, eavesdropper, channel, detection bench), and every component draws a
*fixed* number of uniform doubles per slot or per arriving photon:

* source: 2 per slot (basis, bit),
* eavesdropper: 0 (passive), 1 (fixed-state resend) or 3 (intercept-resend)
  per slot,
* channel: 1 per slot,
* bench: 3 per photon arriving at the bench, in slot order.

Unused draws are discarded rather than skipped.  This makes the vectorized
engine and the per-slot reference implementation consume the same underlying
double sequence, so their traces can be compared element for element.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AnalyticValidityError",
    "Basis",
    "ParameterError",
    "PulseState",
    "RandomStream",
    "SystemParams",
    "VACUUM",
    "derive_params",
]

# Tolerance (in slots) for continuous dead-time comparisons, guarding against
# float noise in k = rho * tau when k is meant to be an exact integer.
SLOT_TOL = 1e-9


class ParameterError(ValueError):
    """A configuration or parameter value is outside its allowed range."""


class AnalyticValidityError(ValueError):
    """A closed-form expression was evaluated outside its validity range."""


class Basis(enum.IntEnum):
    """Measurement basis: 1 = rectilinear (V/H), 2 = diagonal (45/135 deg)."""

    RECTILINEAR = 1
    DIAGONAL = 2


@dataclass(frozen=True)
class PulseState:
    """One signal slot: either vacuum or a single photon in a BB84 state.

    Bit convention: rectilinear basis maps V to bit 0 and H to bit 1;
    diagonal basis maps +45 deg to bit 0 and 135 deg to bit 1.
    """

    basis: Basis | None = None
    bit: int | None = None

    def __post_init__(self):
        if (self.basis is None) != (self.bit is None):
            raise ParameterError("photon needs both basis and bit; vacuum has neither")
        if self.bit is not None and self.bit not in (0, 1):
            raise ParameterError(f"bit must be 0 or 1, got {self.bit}")
        if self.basis is not None:
            object.__setattr__(self, "basis", Basis(self.basis))

    @property
    def is_vacuum(self) -> bool:
        return self.basis is None

    @classmethod
    def photon(cls, basis: Basis | int, bit: int) -> "PulseState":
        return cls(Basis(basis), bit)


VACUUM = PulseState()

#: The fixed state used by the basis-skewing resend attack: vertical photon.
VERTICAL = PulseState(Basis.RECTILINEAR, 0)


@dataclass(frozen=True)
class SystemParams:
    """Physical and protocol parameters of one point-to-point link.

    Parameters
    ----------
    tau : float
        Detector dead time in seconds (> 0).
    rho : float
        Transmission rate in slots per second (> 0).
    alpha : float
        Fiber loss coefficient in dB/km (>= 0).
    length_km : float
        Channel length in km (>= 0).
    t_bob : float
        Internal transmittance of the receiver, in [0, 1].
    eta_d : float
        Detector efficiency, in [0, 1].
    channel_loss_db : float, optional
        If given, overrides ``alpha * length_km`` as the total channel loss
        in dB (convenience for "3 dB loss" style settings).

    Derived quantities (properties): ``k = rho * tau``, ``t_ab``, the overall
    gain ``eta = t_ab * t_bob * eta_d``, and ``dead_gap_slots``, the minimum
    number of slots between two clicks of one detector.
    """

    tau: float
    rho: float
    alpha: float = 0.0
    length_km: float = 0.0
    t_bob: float = 1.0
    eta_d: float = 1.0
    channel_loss_db: float | None = None

    def __post_init__(self):
        _require(self.tau > 0, "tau", self.tau, "must be > 0")
        _require(self.rho > 0, "rho", self.rho, "must be > 0")
        _require(self.alpha >= 0, "alpha", self.alpha, "must be >= 0")
        _require(self.length_km >= 0, "length_km", self.length_km, "must be >= 0")
        _require(0 <= self.t_bob <= 1, "t_bob", self.t_bob, "must be in [0, 1]")
        _require(0 <= self.eta_d <= 1, "eta_d", self.eta_d, "must be in [0, 1]")
        if self.channel_loss_db is not None:
            _require(self.channel_loss_db >= 0, "channel_loss_db",
                     self.channel_loss_db, "must be >= 0")

    @property
    def loss_db(self) -> float:
        if self.channel_loss_db is not None:
            return self.channel_loss_db
        return self.alpha * self.length_km

    @property
    def t_ab(self) -> float:
        """Channel transmittance 10**(-loss_db / 10)."""
        return 10.0 ** (-self.loss_db / 10.0)

    @property
    def eta(self) -> float:
        """Overall gain: channel transmittance times receiver efficiency."""
        return self.t_ab * self.t_bob * self.eta_d

    @property
    def survival(self) -> float:
        """Per-photon probability of reaching the detection bench."""
        return self.t_ab * self.t_bob

    @property
    def k(self) -> float:
        """Normalized transmission rate: slots per dead time."""
        return self.rho * self.tau

    @property
    def slot_seconds(self) -> float:
        return 1.0 / self.rho

    @property
    def dead_gap_slots(self) -> int:
        """Smallest integer g with g * slot_seconds >= tau (up to SLOT_TOL).

        A detector firing at slot t is inactive for slots t+1 .. t+g-1 and
        active again at slot t+g, which for integer k means exactly k-1
        missed slots.
        """
        return max(1, math.ceil(self.k - SLOT_TOL))


def _require(cond: bool, name: str, value, what: str) -> None:
    if not cond:
        raise ParameterError(f"{name}={value!r} {what}")


def derive_params(
    tau: float,
    rho: float,
    alpha: float = 0.0,
    length_km: float = 0.0,
    t_bob: float = 1.0,
    eta_d: float = 1.0,
    channel_loss_db: float | None = None,
) -> SystemParams:
    """Validate raw link parameters and return the derived parameter set.

    Pure: equal inputs give equal outputs.  Raises :class:`ParameterError`
    naming the offending field if any input is out of range.
    """
    return SystemParams(tau=tau, rho=rho, alpha=alpha, length_km=length_km,
                        t_bob=t_bob, eta_d=eta_d, channel_loss_db=channel_loss_db)


# Component indices for the per-trial RNG split.
STREAM_ALICE = 0
STREAM_EVE = 1
STREAM_CHANNEL = 2
STREAM_BENCH = 3


@dataclass(frozen=True)
class RandomStream:
    """Deterministic, splittable random stream for one trial or sweep point."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        _require(0 <= self.seed < 2 ** 64, "seed", self.seed,
                 "must fit in an unsigned 64-bit integer")
        _require(self.stream_id >= 0, "stream_id", self.stream_id, "must be >= 0")

    def component(self, index: int) -> np.random.Generator:
        """Generator for one model component (alice / eve / channel / bench)."""
        seq = np.random.SeedSequence(entropy=self.seed,
                                     spawn_key=(self.stream_id, index))
        return np.random.Generator(np.random.PCG64(seq))

    def components(self) -> tuple[np.random.Generator, ...]:
        """The four component generators, in fixed order."""
        return tuple(self.component(i) for i in range(4))
