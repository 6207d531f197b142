from fractions import Fraction

import numpy as np
import pytest

from deadtime_qkd import (Basis, FixedStateResend, InterceptResend,
                          ParameterError, Passive, PulseState, RandomStream,
                          alice_emit, channel_transmit, eve_apply)

from conftest import FakeRng
from oracles import intercept_resend_qber

V = PulseState(Basis.RECTILINEAR, 0)
D135 = PulseState(Basis.DIAGONAL, 1)


class TestAliceEmit:
    def test_four_states_uniform(self):
        gen = RandomStream(3).component(0)
        counts = {}
        n = 100_000
        for t in range(n):
            rec, pulse = alice_emit(t, gen)
            counts[(int(rec.basis), rec.bit)] = counts.get((int(rec.basis), rec.bit), 0) + 1
            assert pulse.basis == rec.basis and pulse.bit == rec.bit
        se = np.sqrt(0.25 * 0.75 / n)
        for key in ((1, 0), (1, 1), (2, 0), (2, 1)):
            assert abs(counts[key] / n - 0.25) < 4 * se

    def test_deterministic_replay(self):
        a = [alice_emit(t, RandomStream(5).component(0)) for t in range(1)]
        b = [alice_emit(t, RandomStream(5).component(0)) for t in range(1)]
        assert a == b

    def test_slot_echo(self):
        rec, _ = alice_emit(1234, RandomStream(0).component(0))
        assert rec.slot == 1234


class TestEveApply:
    def test_passive_identity_no_draws(self):
        rng = FakeRng([])
        out, log = eve_apply(Passive(), D135, rng)
        assert out == D135 and not log.acted
        assert rng.exhausted

    def test_fixed_resend_full_fraction(self):
        gen = RandomStream(8).component(1)
        for _ in range(500):
            out, log = eve_apply(FixedStateResend(), D135, gen)
            assert out == V and log.acted

    def test_fixed_resend_zero_fraction(self):
        out, log = eve_apply(FixedStateResend(fraction=0.0), D135, FakeRng([0.5]))
        assert out == D135 and not log.acted

    def test_fixed_resend_draw_budget(self):
        rng = FakeRng([0.3])
        eve_apply(FixedStateResend(fraction=0.5), D135, rng)
        assert rng.exhausted

    def test_intercept_draw_budget_even_when_idle(self):
        rng = FakeRng([0.9, 0.1, 0.1])
        out, log = eve_apply(InterceptResend(fraction=0.5), D135, rng)
        assert out == D135 and not log.acted
        assert rng.exhausted

    def test_intercept_matched_basis_keeps_bit(self):
        # act, eve picks diagonal (u >= 0.5), outcome draw unused
        out, log = eve_apply(InterceptResend(1.0), D135, FakeRng([0.0, 0.7, 0.9]))
        assert out == D135 and log.acted and log.bit == 1

    def test_intercept_mismatched_basis_uniform_bit(self):
        out, _ = eve_apply(InterceptResend(1.0), D135, FakeRng([0.0, 0.2, 0.3]))
        assert out.basis == Basis.RECTILINEAR and out.bit == 0
        out, _ = eve_apply(InterceptResend(1.0), D135, FakeRng([0.0, 0.2, 0.8]))
        assert out.basis == Basis.RECTILINEAR and out.bit == 1

    def test_fraction_validation(self):
        with pytest.raises(ParameterError):
            InterceptResend(1.5)
        with pytest.raises(ParameterError):
            FixedStateResend(fraction=-0.1)

    def test_acted_fraction_matches_q(self):
        q = 0.3
        gen = RandomStream(21).component(1)
        n = 50_000
        acted = sum(eve_apply(InterceptResend(q), V, gen)[1].acted
                    for _ in range(n))
        se = np.sqrt(q * (1 - q) / n)
        assert abs(acted / n - q) < 4 * se


class TestInterceptQberOracle:
    """The enumeration oracle itself, before any simulation relies on it."""

    def test_exact_values(self):
        assert intercept_resend_qber(1) == Fraction(1, 4)
        assert intercept_resend_qber(Fraction(3, 10)) == Fraction(3, 40)
        assert intercept_resend_qber(0) == 0

    def test_linear_in_q(self):
        for q in (Fraction(1, 5), Fraction(1, 2), Fraction(9, 10)):
            assert intercept_resend_qber(q) == q / 4


class TestChannel:
    def test_survival_one_identity(self):
        assert channel_transmit(D135, 1.0, FakeRng([0.999])) == D135

    def test_survival_zero_erases(self):
        out = channel_transmit(D135, 0.0, FakeRng([0.5]))
        assert out.is_vacuum

    def test_vacuum_passes_and_consumes_draw(self):
        rng = FakeRng([0.1])
        out = channel_transmit(PulseState(), 0.9, rng)
        assert out.is_vacuum
        assert rng.exhausted

    def test_binomial_fraction(self):
        gen = RandomStream(4).component(2)
        n = 100_000
        kept = sum(not channel_transmit(D135, 0.5, gen).is_vacuum
                   for _ in range(n))
        se = np.sqrt(0.25 / n)
        assert abs(kept / n - 0.5) < 4 * se

    def test_validation(self):
        with pytest.raises(ParameterError):
            channel_transmit(D135, 1.0001, FakeRng([0.1]))
