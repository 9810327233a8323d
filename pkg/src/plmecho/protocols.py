"""Timeline builders for the memory variants, timescale gates and a noise estimate."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

from .envelope import FieldEnvelope, asymmetric_pulse, gaussian_pulse
from .errors import InvalidArgument, InvalidConfig
from .pulses import OpticalPiPulse, PlmPrep, RfPulse
from .timeline import (
    AbsorbEvent,
    DecayIntervalEvent,
    OpticalPiEvent,
    ProtocolTimeline,
    RetrieveEvent,
    RfEvent,
)

SIGNAL_SHAPES = ("gaussian", "asymmetric")


@dataclass(frozen=True)
class ProtocolParams:
    """Inputs shared by every variant (SI units, angles in rad).

    The RF pulse fires at ``t_start``; the two 1-4 pi-pulses follow at
    ``t_start + tau`` and ``t_start + tau + T``.  The signal is centred
    ``t0`` after the second pi-pulse, so ``t_s = t_start + tau + T + t0``.
    """

    theta0: float = math.pi / 2
    tau: float = 1e-6
    T: float = 40e-6
    t0: float = 50e-6
    t_start: float = 0.0
    signal_fwhm: float = 4e-6
    dt: float = 0.2e-6
    signal_shape: str = "gaussian"
    signal_amplitude: float = 1.0
    phi0: float = 0.0
    phi1: float = 0.0
    phi2: float = 0.0
    k0: tuple = (0.0, 0.0, 0.0)
    k1: tuple = (0.0, 0.0, 0.0)
    k2: tuple = (0.0, 0.0, 0.0)
    retrieve_margin: float = 3.0
    polarization: float = 1.0

    def __post_init__(self) -> None:
        for name in ("T", "signal_fwhm", "dt"):
            value = getattr(self, name)
            if value is None or not (value > 0 and math.isfinite(value)):
                raise InvalidConfig(f"{name} must be a positive finite number, got {value}")
        for name in ("tau", "t0", "retrieve_margin"):
            value = getattr(self, name)
            if value is None or not (value >= 0 and math.isfinite(value)):
                raise InvalidConfig(f"{name} must be non-negative, got {value}")
        if self.theta0 is None or not 0.0 <= self.theta0 <= 2 * math.pi:
            raise InvalidConfig(f"theta0 must lie in [0, 2pi], got {self.theta0}")
        if self.signal_shape not in SIGNAL_SHAPES:
            raise InvalidConfig(f"signal_shape must be one of {SIGNAL_SHAPES}")
        if not 0 < self.polarization <= 1:
            raise InvalidConfig("polarization must lie in (0, 1]")

    @property
    def half_window(self) -> float:
        return 2.5 * self.signal_fwhm

    @property
    def prep_end(self) -> float:
        return self.t_start + self.tau + self.T

    @property
    def t_s(self) -> float:
        return self.prep_end + self.t0

    def signal(self) -> FieldEnvelope:
        make = gaussian_pulse if self.signal_shape == "gaussian" else asymmetric_pulse
        return make(self.t_s, self.signal_fwhm, self.dt, self.half_window, self.signal_amplitude)

    def prep(self) -> PlmPrep:
        rf = RfPulse(self.theta0, self.phi0, self.k0, self.t_start)
        return PlmPrep(rf, OpticalPiPulse("1-4", self.phi1, self.k1), OpticalPiPulse("1-4", self.phi2, self.k2), self.tau, self.T)


def _check_absorb_after_prep(params: ProtocolParams, start: float) -> None:
    if params.t_s - params.half_window < start:
        raise InvalidConfig(
            f"signal window opens at {params.t_s - params.half_window:.6g} s, before {start:.6g} s; increase t0"
        )


def _retrieve(after: float, echo_time: float, params: ProtocolParams, carrier: str) -> RetrieveEvent:
    stop = echo_time + params.half_window + params.retrieve_margin * params.signal_fwhm
    if stop <= after:
        raise InvalidConfig("retrieval window would be empty")
    return RetrieveEvent(after, stop - after, carrier)


def _finish(params, events, variant, echo_time, carrier, **notes) -> ProtocolTimeline:
    return ProtocolTimeline(
        tuple(events),
        variant=variant,
        expected_echo_time=echo_time,
        echo_carrier=carrier,
        polarization=params.polarization,
        notes=dict(notes, t_s=params.t_s, T=params.T),
    )


def build_basic(params: ProtocolParams) -> ProtocolTimeline:
    """RF(theta0), pi(1-4), [T], pi(1-4), hold t0, absorb, retrieve; echo on 1-3 at t_s + T."""
    _check_absorb_after_prep(params, params.prep_end)
    rf, p1, p2 = params.prep().pulses()
    absorb = AbsorbEvent(params.signal())
    hold = absorb.start - params.prep_end
    echo_time = params.t_s + params.T
    events = [RfEvent(rf), OpticalPiEvent(p1), OpticalPiEvent(p2)]
    if hold > 0:
        events.append(DecayIntervalEvent(params.prep_end, hold))
    events += [absorb, _retrieve(absorb.end, echo_time, params, "1-3")]
    return _finish(params, events, "basic", echo_time, "1-3")


def build_frequency_preserving(params: ProtocolParams) -> ProtocolTimeline:
    """Basic sequence plus an RF pi on 1-2 after absorption; the echo leaves on 2-3."""
    if not math.isclose(params.theta0, math.pi / 2, rel_tol=0, abs_tol=1e-12):
        raise InvalidConfig(f"frequency-preserving retrieval needs theta0 = pi/2, got {params.theta0}")
    base = build_basic(params)
    absorb = base.absorb
    swap = RfEvent(RfPulse(math.pi, 0.0, None, absorb.end))
    echo_time = params.t_s + params.T
    events = list(base.events[:-1]) + [swap, _retrieve(absorb.end, echo_time, params, "2-3")]
    return _finish(params, events, "frequency-preserving", echo_time, "2-3")


def build_reprogrammed(
    params: ProtocolParams,
    T_prime: float,
    pair_transition: str = "1-4",
    pair_phase: float = 0.0,
    pair_k=None,
) -> ProtocolTimeline:
    """Basic sequence with a pi-pulse pair spaced ``T_prime`` inserted before absorption.

    A 1-4 pair moves the echo to t_s + T + T'; a 2-4 pair to t_s + T - T'.
    The pair closes one time step before the signal window opens.
    """
    if T_prime < 0 or not math.isfinite(T_prime):
        raise InvalidConfig(f"T_prime must be non-negative, got {T_prime}")
    if pair_transition not in ("1-4", "2-4"):
        raise InvalidConfig(f"pair transition must be 1-4 or 2-4, got {pair_transition!r}")
    if T_prime == 0:
        return build_basic(params)
    if pair_transition == "2-4" and T_prime >= params.T:
        raise InvalidConfig(f"a 2-4 pair needs T_prime < T ({T_prime:.6g} >= {params.T:.6g}); the echo would precede the signal")
    base = build_basic(params)
    absorb = base.absorb
    second = absorb.start - params.dt
    first = second - T_prime
    if first <= params.prep_end:
        raise InvalidConfig("not enough hold time before the signal for the pulse pair; increase t0")
    sign = 1.0 if pair_transition == "1-4" else -1.0
    echo_time = params.t_s + params.T + sign * T_prime
    rf_ev, p1_ev, p2_ev = base.events[:3]
    events = [
        rf_ev,
        p1_ev,
        p2_ev,
        DecayIntervalEvent(params.prep_end, first - params.prep_end),
        OpticalPiEvent(OpticalPiPulse(pair_transition, pair_phase, pair_k, first)),
        OpticalPiEvent(OpticalPiPulse(pair_transition, pair_phase, pair_k, second)),
        absorb,
        _retrieve(absorb.end, echo_time, params, "1-3"),
    ]
    return _finish(params, events, "reprogrammed", echo_time, "1-3", T_prime=T_prime, pair_transition=pair_transition)


def build_on_demand(params: ProtocolParams, t1: float, t_read: float) -> ProtocolTimeline:
    """Shelve the stored coherence on 3-s at t_s + t1 and release it at ``t_read`` (absolute).

    The echo follows at t_read + (T - t1).
    """
    if not t1 < params.T:
        raise InvalidConfig(f"shelving delay t1 must be below T ({t1:.6g} >= {params.T:.6g})")
    base = build_basic(params)
    absorb = base.absorb
    t_shelf = params.t_s + t1
    if t_shelf < absorb.end:
        raise InvalidConfig(
            f"shelving pulse at {t_shelf:.6g} s falls inside the signal window ending at {absorb.end:.6g} s"
        )
    if not t_read > t_shelf:
        raise InvalidConfig("readout pulse must come after the shelving pulse")
    echo_time = t_read + (params.T - t1)
    events = list(base.events[:-1]) + [
        OpticalPiEvent(OpticalPiPulse("3-s", 0.0, None, t_shelf)),
        OpticalPiEvent(OpticalPiPulse("3-s", 0.0, None, t_read)),
        _retrieve(t_read, echo_time, params, "1-3"),
    ]
    return _finish(params, events, "on-demand", echo_time, "1-3", t1=t1, t_read=t_read)


@dataclass(frozen=True)
class TimescaleBudget:
    """Durations in seconds; ``None`` leaves the matching constraints unchecked."""

    T2_star: Optional[float] = None
    dt_s: Optional[float] = None
    dt_pulse: Optional[float] = None
    T: Optional[float] = None
    T_prime: Optional[float] = None
    tau: Optional[float] = None
    t0: Optional[float] = None
    T2_opt: Optional[float] = None
    T2_spin: Optional[float] = None
    T1_opt: Optional[float] = None

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if value is None:
                continue
            if not math.isfinite(value) and value != math.inf:
                raise InvalidArgument(f"{name} must be a number, got {value}")
            if value < 0 or (value == 0 and name != "T_prime"):
                raise InvalidArgument(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class Constraint:
    name: str
    passed: Optional[bool]
    lhs: Optional[float]
    rhs: Optional[float]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TimescaleReport:
    constraints: tuple
    margin: float

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.constraints)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.constraints if c.passed is False]

    def passing(self) -> set[str]:
        return {c.name for c in self.constraints if c.passed}

    def get(self, name: str) -> Constraint:
        return next(c for c in self.constraints if c.name == name)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "margin": self.margin, "constraints": [c.to_dict() for c in self.constraints]}


def validate_timescales(budget: TimescaleBudget, margin: float = 10.0) -> TimescaleReport:
    """Check the ordering of timescales; '<<' and '>>' mean a factor ``margin``."""
    if not margin > 0:
        raise InvalidArgument("margin must be positive")
    b = budget

    def check(name, lhs, rhs, strict=False):
        if lhs is None or rhs is None:
            return Constraint(name, None, lhs, rhs)
        ok = lhs < rhs if strict else lhs <= rhs
        return Constraint(name, bool(ok), float(lhs), float(rhs))

    def scaled(v, f):
        return None if v is None else v * f

    storage = None if b.T is None else b.T + (b.T_prime or 0.0)
    constraints = (
        check("T2* << dt_s", b.T2_star, scaled(b.dt_s, 1 / margin)),
        check("dt_pulse << dt_s", b.dt_pulse, scaled(b.dt_s, 1 / margin)),
        check("T >> T2*", scaled(b.T2_star, margin), b.T),
        check("T < T2,o", storage, b.T2_opt, strict=True),
        check("tau << T2,s", b.tau, scaled(b.T2_spin, 1 / margin)),
        check("t0 < T2,s", b.t0, b.T2_spin, strict=True),
    )
    return TimescaleReport(constraints, margin)


@dataclass(frozen=True)
class NoiseConfig:
    """Luminescence from residual excitation left by imperfect pi-pulses.

    ``pulse_error`` is the excited fraction left per atom, ``gate`` the
    detection window and ``mu_geo`` the fraction of emission collected.
    """

    pulse_error: float = 0.0
    atom_number: float = 1e15
    t0: float = 0.0
    T1_opt: float = 1.9e-3
    gate: float = 10e-6
    mu_geo: float = 1e-6

    def __post_init__(self) -> None:
        if not 0 <= self.pulse_error <= 1:
            raise InvalidArgument("pulse_error must lie in [0, 1]")
        if not 0 < self.mu_geo <= 1:
            raise InvalidArgument("mu_geo must lie in (0, 1]")
        if self.atom_number < 0 or self.t0 < 0 or self.gate < 0:
            raise InvalidArgument("atom_number, t0 and gate must be non-negative")
        if not self.T1_opt > 0:
            raise InvalidArgument("T1_opt must be positive")


def estimate_noise(noise: NoiseConfig, eta: float, n_signal_photons: float) -> tuple[float, float]:
    """(mu_noise, SNR) with mu = N eps mu_geo (gate/T1) exp(-t0/T1)."""
    mu = noise.atom_number * noise.pulse_error * noise.mu_geo * (noise.gate / noise.T1_opt) * math.exp(-noise.t0 / noise.T1_opt)
    snr = math.inf if mu == 0 else eta * n_signal_photons / mu
    return mu, snr


def build(variant: str, params: ProtocolParams, **kw) -> ProtocolTimeline:
    """Dispatch by variant name."""
    builders = {
        "basic": build_basic,
        "frequency-preserving": build_frequency_preserving,
        "reprogrammed": build_reprogrammed,
        "on-demand": build_on_demand,
    }
    if variant not in builders:
        raise InvalidConfig(f"unknown variant {variant!r}; expected one of {sorted(builders)}")
    return builders[variant](params, **kw)


__all__ = [
    "ProtocolParams",
    "build",
    "build_basic",
    "build_frequency_preserving",
    "build_reprogrammed",
    "build_on_demand",
    "TimescaleBudget",
    "TimescaleReport",
    "Constraint",
    "validate_timescales",
    "NoiseConfig",
    "estimate_noise",
]
