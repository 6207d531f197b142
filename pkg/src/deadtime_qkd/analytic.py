"""Closed-form availability, sifted-rate, and decoy-state key-rate formulas.

These are the stationary (long-run) results against which the Monte Carlo
engine is validated.  The availability and rate expressions come from
single-chain stationarity arguments and are exact only at integer ``k``
(number of transmission slots per dead time); below ``k = 1`` dead time has
no effect and every availability equals one, which is also returned exactly.
Evaluating them at a non-integer ``k > 1`` raises
:class:`~deadtime_qkd.core.AnalyticValidityError`.

Availability under the fixed-vertical resend attack:

* basis 1 receives only V photons, so its second detector never fires and the
  basis availability reduces to a single-detector chain,
  ``1 / (1 + 0.5 (k-1) eta)``;
* basis 2 receives effectively random bits and follows the two-detector
  pair formula :func:`p00_basis2` with per-detector sift probability
  ``p = eta / 8``.

The decoy-state chain (:func:`decoy_rates`) computes, for a weak-coherent
source with mean photon number ``mu`` and background rate ``y0``: the
single-photon yield and gain, the overall gain and error rate, the
single-photon error rate, the asymptotic secure rate per pulse of the
efficient error-correction bound, and the dead-time-corrected rate obtained
by multiplying with the deactivating-bench availability where the click
probability per slot is the overall gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import AnalyticValidityError, ParameterError, SystemParams

__all__ = [
    "AvailabilityResult",
    "DecoyParams",
    "DecoyRates",
    "availability_fixed_v",
    "binary_entropy",
    "decoy_rate_limit",
    "decoy_rates",
    "p00_basis1",
    "p00_basis2",
    "p00_basis2_from_eta",
    "pa_4state",
    "pa_deactivate",
    "rate_4state",
    "rate_deactivate",
]

INTEGER_K_TOL = 1e-9


def _check_k(k: float) -> float:
    """Integer-k guard shared by all stationary formulas.

    Returns k as a float; values <= 1 are allowed (no dead-time overlap),
    non-integer values above 1 are rejected.
    """
    if k <= 1 + INTEGER_K_TOL:
        return k
    if abs(k - round(k)) > INTEGER_K_TOL:
        raise AnalyticValidityError(
            f"k={k!r}: stationary formulas are exact only at integer k "
            "(or k <= 1); simulate non-integer k instead")
    return float(round(k))


def _check_prob(name: str, x: float) -> None:
    if not 0 <= x <= 1:
        raise ParameterError(f"{name}={x!r} must be in [0, 1]")


def p00_basis1(k: float, eta: float) -> float:
    """Availability of the basis that the fixed-V attack never locks up.

    Only one of its two detectors can fire (at rate ``eta / 2`` per slot when
    active), giving ``1 / (1 + 0.5 (k - 1) eta)``.
    """
    _check_prob("eta", eta)
    k = _check_k(k)
    if k <= 1:
        return 1.0
    return 1.0 / (1.0 + 0.5 * (k - 1.0) * eta)


def p00_basis2(k: float, p: float) -> float:
    """Two-detector pair availability with per-detector sift probability p.

    Both detectors receive effectively random bits; their dead periods drift
    out of step, which is what makes the pair availability fall faster than
    the single-detector one.  Requires ``p < 0.5``.
    """
    if not 0 <= p < 0.5:
        raise ParameterError(f"p={p!r} must be in [0, 0.5)")
    k = _check_k(k)
    if k <= 1:
        return 1.0
    kp = k - 1.0
    x = 2.0 * p / (1.0 - 2.0 * p)
    y = (2.0 * p) ** 2 / (1.0 - 2.0 * p)
    return 1.0 / (1.0 + 2.0 * kp * x + (kp * kp - kp) * y)


def p00_basis2_from_eta(k: float, eta: float) -> float:
    """Pair availability with ``p = eta / 8`` (50/50 basis routing, uniform
    detector within the basis) -- the four-detector passive bench."""
    _check_prob("eta", eta)
    return p00_basis2(k, eta / 8.0)


def pa_deactivate(k: float, eta: float) -> float:
    """Availability of the deactivating bench (all four disabled on any click)."""
    _check_prob("eta", eta)
    k = _check_k(k)
    if k <= 1:
        return 1.0
    return 1.0 / (1.0 + (k - 1.0) * eta)


def pa_4state(k: float, eta: float) -> float:
    """Per-detector availability of the two-detector bench (click rate eta/2)."""
    _check_prob("eta", eta)
    k = _check_k(k)
    if k <= 1:
        return 1.0
    return 1.0 / (1.0 + 0.5 * (k - 1.0) * eta)


@dataclass(frozen=True)
class AvailabilityResult:
    """Stationary availabilities under the fixed-vertical resend attack."""

    p00_basis1: float
    p00_basis2: float
    pa_deactivate: float
    pa_4state: float
    valid_k: bool

    @property
    def ratio(self) -> float:
        return self.p00_basis2 / self.p00_basis1


def availability_fixed_v(params: SystemParams) -> AvailabilityResult:
    """All four stationary availabilities for one parameter set."""
    k, eta = params.k, params.eta
    kk = _check_k(k)
    return AvailabilityResult(
        p00_basis1=p00_basis1(k, eta),
        p00_basis2=p00_basis2_from_eta(k, eta),
        pa_deactivate=pa_deactivate(k, eta),
        pa_4state=pa_4state(k, eta),
        valid_k=(kk >= 1 and abs(kk - round(kk)) <= INTEGER_K_TOL),
    )


def rate_deactivate(params: SystemParams) -> float:
    """Sifted bits per second for the deactivating bench.

    Half of all clicks (matched bases) are kept:
    ``0.5 * rho * eta / (1 + (k - 1) eta)``; tends to ``1 / (2 tau)``.
    """
    return 0.5 * params.rho * params.eta * pa_deactivate(params.k, params.eta)


def rate_4state(params: SystemParams) -> float:
    """Sifted bits per second for the two-detector bench.

    ``0.5 * rho * eta / (1 + 0.5 (k - 1) eta)``; tends to ``1 / tau``.
    """
    return 0.5 * params.rho * params.eta * pa_4state(params.k, params.eta)


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy with the 0 log 0 = 0 convention."""
    if not 0 <= x <= 1:
        raise ParameterError(f"x={x!r} must be in [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass(frozen=True)
class DecoyParams:
    """Weak-coherent source and background parameters on top of a link.

    ``q_protocol`` is the basis-match fraction (0.5 for symmetric BB84) and
    ``f`` the bidirectional error-correction inefficiency (>= 1).  The gain
    entering the chain is ``system.eta``, i.e. channel transmittance times
    full receiver efficiency.
    """

    system: SystemParams
    mu: float
    y0: float
    e_det: float
    e0: float = 0.5
    f: float = 1.22
    q_protocol: float = 0.5

    def __post_init__(self):
        if self.mu <= 0:
            raise ParameterError(f"mu={self.mu!r} must be > 0")
        _check_prob("y0", self.y0)
        _check_prob("e_det", self.e_det)
        _check_prob("e0", self.e0)
        _check_prob("q_protocol", self.q_protocol)
        if self.f < 1:
            raise ParameterError(f"f={self.f!r} must be >= 1")


@dataclass(frozen=True)
class DecoyRates:
    """Derived decoy-state quantities, asymptotic limit.

    ``r_naive`` is the zero-dead-time secure rate per pulse (clamped at 0);
    ``r_secure = pa_decoy * r_naive`` and ``r_per_second = rho * r_secure``.
    ``secure`` is False when the entropic bound went negative.
    """

    y1: float
    q1: float
    q_mu: float
    e_mu: float
    e1: float
    r_naive: float
    pa_decoy: float
    r_secure: float
    r_per_second: float
    secure: bool


def decoy_pa(k: float, q_mu: float) -> float:
    """Deactivating-bench availability with per-slot click probability q_mu.

    Clamped to 1 below ``k = 1`` where dead time cannot overlap slots.  Unlike
    the single-photon formulas this is evaluated at any real ``k``: the rate
    sweep varies the transmission rate continuously.
    """
    _check_prob("q_mu", q_mu)
    if k <= 1:
        return 1.0
    return 1.0 / (1.0 + (k - 1.0) * q_mu)


def decoy_rates(dp: DecoyParams) -> DecoyRates:
    """Evaluate the full decoy-state chain for one parameter set."""
    eta = dp.system.eta
    y1 = dp.y0 + eta
    q1 = y1 * dp.mu * math.exp(-dp.mu)
    q_mu = dp.y0 + 1.0 - math.exp(-eta * dp.mu)
    e_mu = (dp.e0 * dp.y0 + dp.e_det * (1.0 - math.exp(-eta * dp.mu))) / q_mu
    e1 = (dp.e0 * dp.y0 + dp.e_det * eta) / y1
    r_naive = dp.q_protocol * (q1 * (1.0 - binary_entropy(e1))
                               - q_mu * dp.f * binary_entropy(e_mu))
    secure = r_naive > 0
    r_naive = max(0.0, r_naive)
    pa = decoy_pa(dp.system.k, q_mu)
    r_secure = pa * r_naive
    return DecoyRates(y1=y1, q1=q1, q_mu=q_mu, e_mu=e_mu, e1=e1,
                      r_naive=r_naive, pa_decoy=pa, r_secure=r_secure,
                      r_per_second=dp.system.rho * r_secure, secure=secure)


def decoy_rate_limit(dp: DecoyParams) -> float:
    """Secure bits per second in the infinite-transmission-rate limit.

    ``rho * pa * r_naive`` tends to ``r_naive / (tau * q_mu)`` as the
    transmission rate grows.
    """
    rates = decoy_rates(dp)
    return rates.r_naive / (dp.system.tau * rates.q_mu)
