"""Instantaneous RF and optical pi-pulses acting on :class:`EnsembleState`.

Pulses are broadband (infinitely short), so every spectral bin sees the same
unitary.  The spatial phase ``exp(i k.r)`` of each pulse is not stored per
cell; instead every level carries the wavevector of its amplitude and the
pulses update those tags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import EXCITED_INDEX, GROUND_INDEX
from .ensemble import DecayRates, EnsembleState, LevelScheme, free_evolve, normalize_transition
from .errors import InvalidArgument, PreconditionViolation

OPTICAL_PI_TRANSITIONS = ("1-4", "2-4", "3-s")


def _vec(k) -> np.ndarray:
    arr = np.zeros(3) if k is None else np.asarray(k, dtype=float).reshape(3)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument("wavevector components must be finite")
    return arr


@dataclass(frozen=True)
class RfPulse:
    """Resonant rotation on the 1-2 spin transition."""

    area: float
    phase: float = 0.0
    k: np.ndarray = field(default_factory=lambda: np.zeros(3))
    time: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.area <= 2 * math.pi):
            raise InvalidArgument(f"RF pulse area must lie in [0, 2pi], got {self.area}")
        object.__setattr__(self, "k", _vec(self.k))


@dataclass(frozen=True)
class OpticalPiPulse:
    transition: str
    phase: float = 0.0
    k: np.ndarray = field(default_factory=lambda: np.zeros(3))
    time: float = 0.0

    def __post_init__(self) -> None:
        name = normalize_transition(self.transition)
        if name not in OPTICAL_PI_TRANSITIONS:
            raise InvalidArgument(f"unknown optical transition {self.transition!r}")
        object.__setattr__(self, "transition", name)
        object.__setattr__(self, "k", _vec(self.k))


@dataclass(frozen=True)
class PlmPrep:
    """RF(theta0) at ``rf.time``, pi(1-4) after ``tau``, second pi(1-4) after ``T``.

    The ``time`` fields of the two optical pulses are ignored; their times
    follow from ``rf.time``, ``tau`` and ``T``.
    """

    rf: RfPulse
    pulse1: OpticalPiPulse
    pulse2: OpticalPiPulse
    tau: float
    T: float

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise InvalidArgument("laser pulse separation T must be positive")
        if self.tau < 0:
            raise InvalidArgument("RF-to-laser delay tau must be non-negative")
        for p in (self.pulse1, self.pulse2):
            if p.transition != "1-4":
                raise InvalidArgument("PLM preparation uses pi-pulses on 1-4")

    @property
    def composite_phase(self) -> float:
        """Phase of rho12 at zero detuning, in the co-rotating frame."""
        return self.rf.phase - self.pulse1.phase + self.pulse2.phase

    def lab_frame_phase(self, scheme: LevelScheme) -> float:
        """Composite phase including the carrier terms omega31*T - omega21*tau."""
        return self.composite_phase + scheme.omega31 * self.T - scheme.omega21 * self.tau

    @property
    def scattered_wavevector(self) -> np.ndarray:
        return self.rf.k - self.pulse1.k + self.pulse2.k

    @property
    def end_time(self) -> float:
        return self.rf.time + self.tau + self.T

    def pulses(self) -> tuple[RfPulse, OpticalPiPulse, OpticalPiPulse]:
        t1 = self.rf.time + self.tau
        p1 = OpticalPiPulse("1-4", self.pulse1.phase, self.pulse1.k, t1)
        p2 = OpticalPiPulse("1-4", self.pulse2.phase, self.pulse2.k, t1 + self.T)
        return self.rf, p1, p2


def rotation(theta: float, phi: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [[c, -1j * np.exp(-1j * phi) * s], [-1j * np.exp(1j * phi) * s, c]],
        dtype=complex,
    )


def _embed(u2: np.ndarray, i: int, j: int, dim: int) -> np.ndarray:
    u = np.eye(dim, dtype=complex)
    u[np.ix_([i, j], [i, j])] = u2
    return u


def _occupied(state: EnsembleState, level: str) -> bool:
    if level in GROUND_INDEX:
        i = GROUND_INDEX[level]
        if state.background[0, i, i].real > 1e-20:
            return True
        return bool(np.any(state.optical[:, :, :, i]))
    return bool(np.any(state.optical[:, :, EXCITED_INDEX[level], :]))


def _retag(state: EnsembleState, a: str, b: str, k: np.ndarray, theta: float) -> dict:
    """Wavevector of each level amplitude after a rotation on (a, b).

    An amplitude moved a -> b picks up +k, b -> a picks up -k.  A level fed
    from two differently-tagged sources gets NaN components.
    """
    tags = dict(state.wavevectors)
    ka = tags.get(a) if _occupied(state, a) else None
    kb = tags.get(b) if _occupied(state, b) else None
    c, s = abs(math.cos(theta / 2)), abs(math.sin(theta / 2))

    def merge(stay, moved):
        sources = [v for v, amp in ((stay, c), (moved, s)) if v is not None and amp > 1e-15]
        if not sources:
            return None
        if all(np.allclose(v, sources[0]) for v in sources):
            return sources[0].copy()
        return np.full(3, np.nan)

    tags[a] = merge(ka, None if kb is None else kb - k)
    tags[b] = merge(kb, None if ka is None else ka + k)
    return tags


def _apply_ground_unitary(state: EnsembleState, u: np.ndarray) -> EnsembleState:
    out = state.copy()
    out.background = u @ state.background @ u.conj().T
    out.optical = state.optical @ u.conj().T
    return out


def apply_rf_rotation(state: EnsembleState, pulse: RfPulse) -> EnsembleState:
    """Rotate the (1, 2) sector of every bin by the pulse area and phase."""
    if pulse.area == 0:
        return state.copy()
    u = _embed(rotation(pulse.area, pulse.phase), 0, 1, 3)
    out = _apply_ground_unitary(state, u)
    out.wavevectors = _retag(state, "1", "2", pulse.k, pulse.area)
    return out


def apply_optical_pi(state: EnsembleState, pulse: OpticalPiPulse) -> EnsembleState:
    """Swap the addressed levels with the pulse phase imprinted."""
    if pulse.transition == "3-s":
        u = rotation(math.pi, pulse.phase)
        out = state.copy()
        out.optical = np.einsum("ef,...fk->...ek", u, state.optical)
        out.wavevectors = _retag(state, "3", "s", pulse.k, math.pi)
        return out
    lower = "1" if pulse.transition == "1-4" else "2"
    u = _embed(rotation(math.pi, pulse.phase), GROUND_INDEX[lower], GROUND_INDEX["4"], 3)
    out = _apply_ground_unitary(state, u)
    out.wavevectors = _retag(state, lower, "4", pulse.k, math.pi)
    return out


def _is_fresh(state: EnsembleState) -> bool:
    expected = np.zeros((3, 3))
    expected[0, 0] = 1.0
    return bool(np.all(state.background == expected) and not np.any(state.optical))


def prepare_plm(state: EnsembleState, prep: PlmPrep) -> EnsembleState:
    """Closed-form PLM spin wave on a fresh ensemble.

    Per bin ``rho12 = (i/2) sin(theta0) exp(i Delta T) exp(i phi)``,
    ``n1 = cos^2(theta0/2)``, ``n2 = sin^2(theta0/2)``.  Equal to running
    the three pulses with ideal free evolution in between.
    """
    if not _is_fresh(state):
        raise PreconditionViolation("prepare_plm needs every atom in level 1 and no coherence")
    theta = prep.rf.area
    delta = state.spectral.detunings
    c1 = -math.cos(theta / 2) * np.exp(1j * (prep.pulse1.phase - prep.pulse2.phase)) * np.exp(-1j * delta * prep.T)
    c2 = np.full_like(c1, -1j * np.exp(1j * prep.rf.phase) * math.sin(theta / 2))
    amps = np.stack([c1, c2, np.zeros_like(c1)], axis=1)
    out = state.copy(time=prep.end_time, prep_time=prep.end_time)
    out.background = amps[:, :, None] * amps.conj()[:, None, :]

    tags = dict(state.wavevectors)
    k0, k1, k2 = prep.rf.k, prep.pulse1.k, prep.pulse2.k
    tags["1"] = (k1 - k2).copy() if abs(math.cos(theta / 2)) > 1e-12 else None
    tags["2"] = k0.copy() if abs(math.sin(theta / 2)) > 1e-12 else None
    tags["4"] = None
    out.wavevectors = tags
    return out


def prepare_plm_sequence(state: EnsembleState, prep: PlmPrep, rates: DecayRates | None = None) -> EnsembleState:
    """Same preparation built pulse by pulse (used for non-ideal rates)."""
    rf, p1, p2 = prep.pulses()
    out = apply_rf_rotation(state, rf)
    out = free_evolve(out, prep.tau, rates)
    out = apply_optical_pi(out, p1)
    out = free_evolve(out, prep.T, rates)
    out = apply_optical_pi(out, p2)
    out.prep_time = out.time
    return out


def rephasing_factor(state: EnsembleState, transition: str, T_prime: float) -> np.ndarray:
    """Closed-form per-bin factor on rho12 from a pi-pi pair (same phase) spaced ``T_prime``."""
    sign = 1.0 if normalize_transition(transition) == "1-4" else -1.0
    return -np.exp(1j * sign * state.spectral.detunings * T_prime)


def apply_rephasing_pair(
    state: EnsembleState,
    transition: str,
    T_prime: float,
    phase: float = 0.0,
    k=None,
    rates: DecayRates | None = None,
) -> EnsembleState:
    """Two identical pi-pulses on 1-4 (or 2-4) separated by ``T_prime``.

    A 1-4 pair lengthens the spin-wave dephasing by ``T_prime``, a 2-4 pair
    shortens it.  Populations come back unchanged.
    """
    name = normalize_transition(transition)
    if name not in ("1-4", "2-4"):
        raise InvalidArgument(f"rephasing pair must act on 1-4 or 2-4, not {transition!r}")
    if not T_prime > 0:
        raise InvalidArgument(f"pair separation must be positive, got {T_prime}")
    if state.n4 > 1e-12:
        raise PreconditionViolation("level 4 is populated; a pi-pulse pair would strand it")
    pulse = OpticalPiPulse(name, phase, k, state.time)
    out = apply_optical_pi(state, pulse)
    out = free_evolve(out, T_prime, rates)
    out = apply_optical_pi(out, pulse)
    if rates is None or rates.ideal:
        expected = state.rho12 * rephasing_factor(state, name, T_prime)
        if not np.allclose(out.rho12, expected, rtol=0, atol=1e-12):
            raise AssertionError("pi-pulse pair disagrees with its closed-form phase factor")
    return out
