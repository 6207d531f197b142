"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import math
import sys

import pytest

sys.path.insert(0, str(__import__("pathlib").Path(__file__).parent))

from deadtime_qkd import SystemParams

#: total channel loss giving a survival probability of exactly one half
LOSS_3DB = 10 * math.log10(2)

TAU = 100e-9


def params_k(k: float, survival: float = 0.5, eta_d: float = 1.0,
             tau: float = TAU) -> SystemParams:
    """Link parameters with the given slots-per-dead-time and survival."""
    loss = -10 * math.log10(survival) if survival < 1 else 0.0
    return SystemParams(tau=tau, rho=k / tau, channel_loss_db=loss, eta_d=eta_d)


class FakeRng:
    """Scripted stand-in for a Generator: returns preset uniforms in order."""

    def __init__(self, values):
        self.values = list(values)

    def random(self, size=None):
        assert size is None, "scalar draws only"
        return self.values.pop(0)

    @property
    def exhausted(self):
        return not self.values


@pytest.fixture
def fake_rng():
    return FakeRng
