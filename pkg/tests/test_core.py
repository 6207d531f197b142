import math

import numpy as np
import pytest

from deadtime_qkd import (Basis, ParameterError, PulseState, RandomStream,
                          SystemParams, derive_params)


class TestDeriveParams:
    def test_hundred_km_telecom_fiber(self):
        p = derive_params(tau=100e-9, rho=1e6, alpha=0.2, length_km=100,
                          t_bob=1.0, eta_d=1.0)
        assert p.t_ab == pytest.approx(0.01, rel=1e-12)
        assert p.eta == pytest.approx(0.01, rel=1e-12)

    def test_zero_distance_identity(self):
        p = derive_params(tau=1e-7, rho=1e6, alpha=0.2, length_km=0,
                          t_bob=0.7, eta_d=0.3)
        assert p.t_ab == 1.0
        assert p.eta == pytest.approx(0.7 * 0.3, rel=1e-12)

    def test_fifty_km_at_021(self):
        p = derive_params(tau=1e-7, rho=1e6, alpha=0.21, length_km=50)
        # frozen: 10 ** -1.05 recomputed at high precision
        assert p.t_ab == pytest.approx(0.0891250938134, rel=1e-10)

    def test_loss_override(self):
        p = derive_params(tau=1e-7, rho=1e6, alpha=0.2, length_km=100,
                          channel_loss_db=3.0)
        assert p.loss_db == 3.0
        assert p.t_ab == pytest.approx(10 ** -0.3, rel=1e-12)

    @pytest.mark.parametrize("kwargs, field", [
        (dict(tau=-1e-7, rho=1e6), "tau"),
        (dict(tau=0.0, rho=1e6), "tau"),
        (dict(tau=1e-7, rho=0.0), "rho"),
        (dict(tau=1e-7, rho=1e6, alpha=-0.1), "alpha"),
        (dict(tau=1e-7, rho=1e6, length_km=-5), "length_km"),
        (dict(tau=1e-7, rho=1e6, t_bob=1.2), "t_bob"),
        (dict(tau=1e-7, rho=1e6, eta_d=-0.01), "eta_d"),
        (dict(tau=1e-7, rho=1e6, channel_loss_db=-1.0), "channel_loss_db"),
    ])
    def test_validation_names_field(self, kwargs, field):
        with pytest.raises(ParameterError, match=field):
            derive_params(**kwargs)

    def test_pure(self):
        a = derive_params(tau=1e-7, rho=2e7, alpha=0.2, length_km=25)
        b = derive_params(tau=1e-7, rho=2e7, alpha=0.2, length_km=25)
        assert a == b

    def test_k_is_rho_tau(self):
        p = derive_params(tau=2.5e-7, rho=4e7)
        assert p.k == pytest.approx(10.0, abs=1e-12)

    def test_transmittance_and_gain_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            p = derive_params(tau=1e-7, rho=10 ** rng.uniform(5, 10),
                              alpha=rng.uniform(0, 0.5),
                              length_km=rng.uniform(0, 200),
                              t_bob=rng.uniform(0, 1),
                              eta_d=rng.uniform(0, 1))
            assert 0.0 <= p.t_ab <= 1.0
            assert p.eta <= p.eta_d + 1e-15
            assert p.eta == pytest.approx(p.t_ab * p.t_bob * p.eta_d, rel=1e-12)


class TestDeadGap:
    def test_integer_k(self):
        assert SystemParams(tau=1e-6, rho=1e7).dead_gap_slots == 10

    def test_float_noise_does_not_round_up(self):
        # 1e-7 * 1e8 = 10.000000000000002 in binary floating point
        p = SystemParams(tau=1e-7, rho=1e8)
        assert p.k != 10.0
        assert p.dead_gap_slots == 10

    def test_fractional_k(self):
        assert SystemParams(tau=1e-7, rho=2.5e7).dead_gap_slots == 3
        assert SystemParams(tau=1e-7, rho=3.7e7).dead_gap_slots == 4

    def test_sub_unit_k(self):
        assert SystemParams(tau=1e-7, rho=5e6).dead_gap_slots == 1


class TestPulseState:
    def test_vacuum(self):
        v = PulseState()
        assert v.is_vacuum
        assert v.basis is None and v.bit is None

    def test_photon(self):
        ph = PulseState.photon(Basis.DIAGONAL, 1)
        assert not ph.is_vacuum
        assert ph.basis == Basis.DIAGONAL and ph.bit == 1

    def test_partial_state_rejected(self):
        with pytest.raises(ParameterError):
            PulseState(Basis.RECTILINEAR, None)
        with pytest.raises(ParameterError):
            PulseState(None, 0)
        with pytest.raises(ParameterError):
            PulseState(Basis.RECTILINEAR, 2)


class TestRandomStream:
    def test_identical_ids_reproduce(self):
        a = RandomStream(123, 4).component(0).random(16)
        b = RandomStream(123, 4).component(0).random(16)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RandomStream(123, 4).component(0).random(16)
        b = RandomStream(123, 5).component(0).random(16)
        c = RandomStream(124, 4).component(0).random(16)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_components_are_independent_streams(self):
        comps = RandomStream(9, 0).components()
        draws = [g.random(8) for g in comps]
        for i in range(len(draws)):
            for j in range(i + 1, len(draws)):
                assert not np.array_equal(draws[i], draws[j])

    def test_validation(self):
        with pytest.raises(ParameterError):
            RandomStream(-1, 0)
        with pytest.raises(ParameterError):
            RandomStream(0, -2)
