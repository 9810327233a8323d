import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from plmecho.errors import InvalidArgument, InvalidConfig
from plmecho.protocols import (
    NoiseConfig,
    ProtocolParams,
    TimescaleBudget,
    build,
    build_basic,
    build_frequency_preserving,
    build_on_demand,
    build_reprogrammed,
    estimate_noise,
    validate_timescales,
)
from plmecho.timeline import AbsorbEvent, OpticalPiEvent, RetrieveEvent, RfEvent

P = ProtocolParams()


def test_basic_structure():
    tl = build_basic(P)
    assert len(tl.events) == 6
    starts = [e.start for e in tl.events]
    assert starts == sorted(starts)
    assert [e.action for e in tl.events] == ["rf-pulse", "optical-pi", "optical-pi", "decay-interval", "absorb", "retrieve"]
    assert tl.expected_echo_time == pytest.approx(P.t_s + P.T)
    assert tl.echo_carrier == "1-3" and tl.retrieve.carrier == "1-3"
    assert tl.retrieve.end > tl.expected_echo_time + P.half_window


def test_basic_without_hold():
    p = ProtocolParams(t0=2.5 * 4e-6)
    tl = build_basic(p)
    assert len(tl.events) == 5
    assert tl.absorb.start == pytest.approx(p.prep_end)


def test_signal_window_before_prep_rejected():
    with pytest.raises(InvalidConfig):
        build_basic(ProtocolParams(t0=1e-6))


@pytest.mark.parametrize(
    "kwargs",
    [dict(T=0.0), dict(dt=-1.0), dict(signal_fwhm=math.nan), dict(tau=-1e-6), dict(theta0=7.0),
     dict(signal_shape="square"), dict(polarization=0.0)],
)
def test_param_validation(kwargs):
    with pytest.raises(InvalidConfig):
        ProtocolParams(**kwargs)


def test_frequency_preserving():
    tl = build_frequency_preserving(P)
    assert tl.echo_carrier == "2-3" and tl.retrieve.carrier == "2-3"
    swap = [e for e in tl.events if isinstance(e, RfEvent)][-1]
    assert swap.pulse.area == pytest.approx(math.pi)
    assert swap.start == pytest.approx(tl.absorb.end)
    with pytest.raises(InvalidConfig):
        build_frequency_preserving(ProtocolParams(theta0=math.pi / 3))


@pytest.mark.parametrize("pair,sign", [("1-4", 1), ("2-4", -1)])
def test_reprogrammed(pair, sign):
    tl = build_reprogrammed(P, P.T / 2, pair)
    assert tl.expected_echo_time == pytest.approx(P.t_s + P.T + sign * P.T / 2)
    pair_events = [e for e in tl.events if isinstance(e, OpticalPiEvent) and e.pulse.transition == pair and e.start > P.prep_end]
    assert len(pair_events) == 2
    assert pair_events[1].start - pair_events[0].start == pytest.approx(P.T / 2)
    assert pair_events[1].start < tl.absorb.start


def test_reprogrammed_errors():
    with pytest.raises(InvalidConfig):
        build_reprogrammed(P, P.T, "2-4")
    with pytest.raises(InvalidConfig):
        build_reprogrammed(P, 1.0)
    with pytest.raises(InvalidConfig):
        build_reprogrammed(P, 1e-6, "1-3")
    with pytest.raises(InvalidConfig):
        build_reprogrammed(P, -1e-6)


def test_reprogrammed_zero_is_basic():
    a, b = build_reprogrammed(P, 0.0), build_basic(P)
    assert [(e.action, e.start, e.end) for e in a.events] == [(e.action, e.start, e.end) for e in b.events]
    assert a.expected_echo_time == b.expected_echo_time


def test_on_demand():
    t1, t_read = P.T / 4, P.t_s + 10 * P.T
    tl = build_on_demand(P, t1, t_read)
    assert tl.expected_echo_time == pytest.approx(t_read + 0.75 * P.T)
    shelf = [e for e in tl.events if isinstance(e, OpticalPiEvent) and e.pulse.transition == "3-s"]
    assert [e.start for e in shelf] == pytest.approx([P.t_s + t1, t_read])
    assert tl.shelved_time() == pytest.approx(t_read - P.t_s - t1)
    assert isinstance(tl.events[-1], RetrieveEvent) and tl.retrieve.start == t_read


def test_on_demand_errors():
    with pytest.raises(InvalidConfig):
        build_on_demand(P, P.T, P.t_s + 2 * P.T)
    with pytest.raises(InvalidConfig):
        build_on_demand(P, 1e-6, P.t_s + 2 * P.T)  # shelf inside the signal window
    with pytest.raises(InvalidConfig):
        build_on_demand(P, P.T / 2, P.t_s + P.T / 4)


def test_dispatch():
    assert build("basic", P).variant == "basic"
    assert build("on-demand", P, t1=P.T / 2, t_read=P.t_s + P.T).variant == "on-demand"
    with pytest.raises(InvalidConfig):
        build("forward", P)


def test_every_builder_has_single_absorb_and_retrieve():
    for tl in (build_basic(P), build_frequency_preserving(P), build_reprogrammed(P, 10e-6, "2-4"),
               build_on_demand(P, 30e-6, P.t_s + 100e-6)):
        assert sum(isinstance(e, AbsorbEvent) for e in tl.events) == 1
        assert sum(isinstance(e, RetrieveEvent) for e in tl.events) == 1


EU_BUDGET = TimescaleBudget(T2_star=0.1e-6, dt_s=10e-6, T=100e-6, tau=1e-6, t0=1e-3, T2_opt=1.5e-3, T2_spin=6 * 3600.0)


def test_timescales_eu_like_budget_passes():
    report = validate_timescales(EU_BUDGET)
    assert report.passed and report.failures == []
    assert all(c.passed is not False for c in report.constraints)
    assert report.get("dt_pulse << dt_s").passed is None


def test_timescales_long_storage_fails():
    from dataclasses import replace

    report = validate_timescales(replace(EU_BUDGET, T=2 * 1.5e-3))
    assert not report.passed
    assert report.failures == ["T < T2,o"]
    assert report.get("T < T2,o").lhs == pytest.approx(3e-3)


def test_timescales_unset_fields_unchecked():
    report = validate_timescales(TimescaleBudget(T=1e-3))
    assert report.passed
    assert all(c.passed is None for c in report.constraints)


def test_timescales_prime_extends_storage():
    b = TimescaleBudget(T=1e-3, T_prime=0.6e-3, T2_opt=1.5e-3)
    assert validate_timescales(b).failures == ["T < T2,o"]


def test_budget_validation():
    with pytest.raises(InvalidArgument):
        TimescaleBudget(T=-1.0)
    with pytest.raises(InvalidArgument):
        TimescaleBudget(T=0.0)
    with pytest.raises(InvalidArgument):
        validate_timescales(EU_BUDGET, margin=0)


pos = st.floats(1e-9, 1e3)


@given(pos, pos, pos, pos, pos, pos, pos, st.floats(1.0, 100.0), st.floats(1.0, 100.0))
def test_pass_set_monotone_in_margin(t2s, dts, T, tau, t0, t2o, t2spin, m1, m2):
    b = TimescaleBudget(T2_star=t2s, dt_s=dts, dt_pulse=t2s, T=T, tau=tau, t0=t0, T2_opt=t2o, T2_spin=t2spin)
    lo, hi = sorted((m1, m2))
    assert validate_timescales(b, hi).passing() <= validate_timescales(b, lo).passing()


def test_noise_examples():
    mu, snr = estimate_noise(NoiseConfig(pulse_error=0.0), 0.9, 1.0)
    assert mu == 0.0 and snr == math.inf
    base = NoiseConfig(pulse_error=1e-3, t0=0.0)
    late = NoiseConfig(pulse_error=1e-3, t0=base.T1_opt * math.log(100))
    ratio = estimate_noise(late, 0.9, 1.0)[0] / estimate_noise(base, 0.9, 1.0)[0]
    assert abs(ratio - 0.01) <= 1e-12


def test_noise_closed_form():
    n = NoiseConfig(pulse_error=0.01, atom_number=1e12, t0=1e-3, T1_opt=2e-3, gate=5e-6, mu_geo=0.1)
    mu, snr = estimate_noise(n, 0.5, 10.0)
    assert mu == pytest.approx(1e12 * 0.01 * 0.1 * 5e-6 / 2e-3 * math.exp(-0.5))
    assert snr == pytest.approx(5.0 / mu)


@given(st.floats(1e-6, 1.0), st.floats(0.0, 20e-3), st.floats(1e-9, 20e-3))
def test_noise_decreasing_in_t0(eps, t0, dt0):
    a = estimate_noise(NoiseConfig(pulse_error=eps, t0=t0), 1.0, 1.0)[0]
    b = estimate_noise(NoiseConfig(pulse_error=eps, t0=t0 + dt0), 1.0, 1.0)[0]
    assert b < a


@given(st.floats(0.0, 0.5), st.floats(0.0, 1e15), st.floats(1e-6, 0.5))
def test_noise_linear_in_eps_n_mu(eps, n, mu_geo):
    one = estimate_noise(NoiseConfig(pulse_error=eps, atom_number=n, mu_geo=mu_geo), 1.0, 1.0)[0]
    two = estimate_noise(NoiseConfig(pulse_error=2 * eps, atom_number=n, mu_geo=mu_geo), 1.0, 1.0)[0]
    assert two == pytest.approx(2 * one, rel=1e-12, abs=1e-300)
    three = estimate_noise(NoiseConfig(pulse_error=eps, atom_number=3 * n, mu_geo=mu_geo), 1.0, 1.0)[0]
    assert three == pytest.approx(3 * one, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize(
    "kwargs", [dict(pulse_error=1.5), dict(mu_geo=0.0), dict(atom_number=-1.0), dict(T1_opt=0.0)]
)
def test_noise_config_validation(kwargs):
    with pytest.raises(InvalidArgument):
        NoiseConfig(**kwargs)
