"""Discretized inhomogeneously broadened ensemble.

The state is split into two blocks:

* a *background* density matrix over levels (1, 2, 4), one 3x3 block per
  spectral bin.  It is spatially uniform (spatial phases are carried as
  wavevector tags, see :attr:`EnsembleState.wavevectors`) and is unaffected by
  the weak signal;
* the *first-order* optical/shelf coherences ``rho[e, k]`` with ``e`` in
  (3, s) and ``k`` in (1, 2, 4), one value per (cell, bin).

See :mod:`plmecho.constants` for frames and sign conventions.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .constants import EXCITED_INDEX, EXCITED_LEVELS, GROUND_INDEX, GROUND_LEVELS, LEVEL_OFFSET, SPIN_PAIRS
from .errors import InvalidArgument

PROFILES = ("rectangular", "gaussian", "lorentzian")
DEFAULT_BINS = 401
DEFAULT_SPAN_FACTOR = 6.0
_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class SpectralGrid:
    """Optical detuning bins with normalized weights."""

    profile: str
    delta_in: float
    detunings: np.ndarray
    weights: np.ndarray
    span: float

    @property
    def n_bins(self) -> int:
        return self.detunings.size

    @property
    def spacing(self) -> float:
        return float(self.detunings[1] - self.detunings[0])

    @property
    def center_density(self) -> float:
        """Weight per unit detuning at the line centre (s/rad)."""
        density = self.weights / self.spacing
        return float(np.interp(0.0, self.detunings, density))

    @property
    def revival_time(self) -> float:
        """Time after which the discrete comb of bins spuriously rephases."""
        return 2.0 * math.pi / self.spacing

    def density(self, delta: float | np.ndarray) -> np.ndarray:
        """Linear interpolation of the sampled weight density at ``delta``."""
        return np.interp(delta, self.detunings, self.weights / self.spacing, left=0.0, right=0.0)


def build_spectral_grid(
    profile: str = "rectangular",
    delta_in: float = 2 * math.pi * 1e6,
    n_bins: int = DEFAULT_BINS,
    span: float | None = None,
) -> SpectralGrid:
    """Sample an inhomogeneous line of FWHM ``delta_in`` on ``n_bins`` bins.

    ``rectangular`` uses midpoints of ``n_bins`` equal slices of
    [-delta_in/2, delta_in/2] and equal weights.  ``gaussian`` and
    ``lorentzian`` sample the profile on an inclusive uniform grid over
    [-span/2, span/2] (default span 6*delta_in) and renormalize.
    """
    if profile not in PROFILES:
        raise InvalidArgument(f"unknown profile {profile!r}; expected one of {PROFILES}")
    if not (delta_in > 0 and math.isfinite(delta_in)):
        raise InvalidArgument(f"delta_in must be positive, got {delta_in}")
    if n_bins < 2:
        raise InvalidArgument(f"need at least 2 bins, got {n_bins}")

    if profile == "rectangular":
        if span is not None and not math.isclose(span, delta_in, rel_tol=1e-12):
            if span < delta_in:
                raise InvalidArgument("span must not be narrower than delta_in")
            raise InvalidArgument("rectangular profile spans exactly delta_in")
        width = delta_in / n_bins
        detunings = -delta_in / 2 + width * (np.arange(n_bins) + 0.5)
        weights = np.full(n_bins, 1.0 / n_bins)
        return SpectralGrid(profile, float(delta_in), detunings, weights, float(delta_in))

    span = DEFAULT_SPAN_FACTOR * delta_in if span is None else float(span)
    if span < delta_in:
        raise InvalidArgument("span must not be narrower than delta_in")
    if span < 3.0 * delta_in:
        raise InvalidArgument(f"{profile} profile needs span >= 3*delta_in to hold its wings")
    detunings = np.linspace(-span / 2, span / 2, n_bins)
    if profile == "gaussian":
        sigma = delta_in * _FWHM_TO_SIGMA
        shape = np.exp(-0.5 * (detunings / sigma) ** 2)
    else:
        shape = 1.0 / (1.0 + (2.0 * detunings / delta_in) ** 2)
    weights = shape / shape.sum()
    return SpectralGrid(profile, float(delta_in), detunings, weights, span)


@dataclass(frozen=True)
class SpatialGrid:
    length: float
    n_cells: int

    def __post_init__(self) -> None:
        if not (self.length > 0):
            raise InvalidArgument(f"medium length must be positive, got {self.length}")
        if self.n_cells < 1:
            raise InvalidArgument(f"need at least one cell, got {self.n_cells}")

    @property
    def dz(self) -> float:
        return self.length / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dz


@dataclass(frozen=True)
class LevelScheme:
    """Carrier frequencies (rad/s) and group velocity (m/s).

    Defaults are Eu:YSO-like; only ``v_g`` enters the propagation, the
    carriers feed the lab-frame phase and phase-matching magnitudes.
    """

    omega21: float = 2 * math.pi * 34.533e6
    omega32: float = 2 * math.pi * 516.85e12
    omega41: float = 2 * math.pi * 516.85e12 + 2 * math.pi * 75e6
    omega3s: float = 2 * math.pi * 516.85e12 - 2 * math.pi * 46.175e6
    v_g: float = 299_792_458.0 / 1.8

    def __post_init__(self) -> None:
        for name in ("omega21", "omega32", "omega41", "omega3s", "v_g"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidArgument(f"{name} must be positive and finite, got {value}")

    @property
    def omega31(self) -> float:
        return self.omega32 + self.omega21


@dataclass(frozen=True)
class DecayRates:
    gamma_s: float = 0.0
    gamma_o: float = 0.0
    gamma_1o: float = 0.0

    def __post_init__(self) -> None:
        for name in ("gamma_s", "gamma_o", "gamma_1o"):
            if getattr(self, name) < 0:
                raise InvalidArgument(f"{name} must be >= 0")

    @classmethod
    def from_times(cls, T2_spin: float | None = None, T2_opt: float | None = None, T1_opt: float | None = None) -> "DecayRates":
        inv = lambda t: 0.0 if t is None or math.isinf(t) else 1.0 / t
        return cls(inv(T2_spin), inv(T2_opt), inv(T1_opt))

    @property
    def ideal(self) -> bool:
        return self.gamma_s == 0 and self.gamma_o == 0


@dataclass
class EnsembleState:
    """Ensemble amplitudes; treat as immutable, every operation returns a copy."""

    spectral: SpectralGrid
    spatial: SpatialGrid
    background: np.ndarray
    optical: np.ndarray
    wavevectors: dict[str, np.ndarray | None] = field(default_factory=dict)
    atom_number: float = 1e15
    time: float = 0.0
    prep_time: float | None = None

    def copy(self, **changes) -> "EnsembleState":
        base = dict(
            background=self.background.copy(),
            optical=self.optical.copy(),
            wavevectors={k: (None if v is None else v.copy()) for k, v in self.wavevectors.items()},
        )
        base.update(changes)
        return dataclasses.replace(self, **base)

    # populations are bin independent; report bin 0
    @property
    def n1(self) -> float:
        return float(self.background[0, 0, 0].real)

    @property
    def n2(self) -> float:
        return float(self.background[0, 1, 1].real)

    @property
    def n4(self) -> float:
        return float(self.background[0, 2, 2].real)

    def population(self, level: str) -> float:
        i = GROUND_INDEX[level]
        return float(self.background[0, i, i].real)

    @property
    def rho12(self) -> np.ndarray:
        """Spin coherence <|1><2|> per bin."""
        return self.background[:, 1, 0]

    def coherence(self, lower: str, upper: str) -> np.ndarray:
        """<|lower><upper|> for an optical/shelf pair, shape (cells, bins)."""
        return self.optical[:, :, EXCITED_INDEX[upper], GROUND_INDEX[lower]]

    @property
    def sigma13(self) -> np.ndarray:
        return self.coherence("1", "3")

    @property
    def sigma23(self) -> np.ndarray:
        return self.coherence("2", "3")

    @property
    def sigma1s(self) -> np.ndarray:
        return self.coherence("1", "s")

    @property
    def sigma2s(self) -> np.ndarray:
        return self.coherence("2", "s")

    @property
    def spin_wavevector(self) -> np.ndarray | None:
        k1, k2 = self.wavevectors.get("1"), self.wavevectors.get("2")
        if k1 is None or k2 is None:
            return None
        return k2 - k1

    def check_invariants(self, atol: float = 1e-12) -> None:
        if not np.all(np.isfinite(self.background)) or not np.all(np.isfinite(self.optical)):
            raise InvalidArgument("non-finite amplitudes in ensemble state")
        pops = self.background[:, [0, 1, 2], [0, 1, 2]].real
        if not np.allclose(pops, pops[0], rtol=0, atol=atol):
            raise InvalidArgument("populations must be identical in every bin")
        if abs(pops[0].sum() - 1.0) > atol:
            raise InvalidArgument(f"ground populations sum to {pops[0].sum()!r}")
        bound = np.sqrt(pops[0, 0] * pops[0, 1]) + atol
        if np.any(np.abs(self.rho12) > bound):
            raise InvalidArgument("|rho12| exceeds sqrt(n1 n2)")


def init_state(spectral: SpectralGrid, spatial: SpatialGrid, scheme: LevelScheme | None = None, atom_number: float = 1e15) -> EnsembleState:
    """All atoms in level 1, no coherence anywhere."""
    bg = np.zeros((spectral.n_bins, 3, 3), dtype=complex)
    bg[:, 0, 0] = 1.0
    opt = np.zeros((spatial.n_cells, spectral.n_bins, 2, 3), dtype=complex)
    tags = {name: None for name in GROUND_LEVELS + EXCITED_LEVELS}
    tags["1"] = np.zeros(3)
    return EnsembleState(spectral, spatial, bg, opt, tags, atom_number=atom_number)


def _pair_class(a: str, b: str) -> str:
    return "spin" if tuple(sorted((a, b))) in SPIN_PAIRS else "optical"


def _decay_factors(intervals: Mapping[str, float], rates: DecayRates) -> dict[str, float]:
    t_spin = float(intervals.get("spin", 0.0))
    t_opt = float(intervals.get("optical", 0.0))
    if t_spin < 0 or t_opt < 0:
        raise InvalidArgument("decay intervals must be non-negative")
    return {"spin": math.exp(-rates.gamma_s * t_spin), "optical": math.exp(-rates.gamma_o * t_opt)}


def apply_decay(state: EnsembleState, intervals: Mapping[str, float], rates: DecayRates) -> EnsembleState:
    """Damp coherences: spin-class by ``exp(-gamma_s t_spin)``, optical by ``exp(-gamma_o t_opt)``.

    ``intervals`` maps ``"spin"`` / ``"optical"`` to elapsed times.
    Populations are left untouched.
    """
    factors = _decay_factors(intervals, rates)
    out = state.copy()
    for i, a in enumerate(GROUND_LEVELS):
        for j, b in enumerate(GROUND_LEVELS):
            if i != j:
                out.background[:, i, j] *= factors[_pair_class(a, b)]
    for e, a in enumerate(EXCITED_LEVELS):
        for k, b in enumerate(GROUND_LEVELS):
            out.optical[:, :, e, k] *= factors[_pair_class(a, b)]
    return out


def free_evolve(state: EnsembleState, duration: float, rates: DecayRates | None = None) -> EnsembleState:
    """Exact free precession (and optional decay) over ``duration`` seconds."""
    if duration < 0:
        raise InvalidArgument(f"negative free-evolution interval {duration}")
    out = state.copy(time=state.time + duration)
    if duration == 0:
        return out
    delta = state.spectral.detunings
    for i, a in enumerate(GROUND_LEVELS):
        for j, b in enumerate(GROUND_LEVELS):
            w = LEVEL_OFFSET[a] - LEVEL_OFFSET[b]
            if i != j and w != 0:
                out.background[:, i, j] *= np.exp(-1j * w * delta * duration)
    for e, a in enumerate(EXCITED_LEVELS):
        for k, b in enumerate(GROUND_LEVELS):
            w = LEVEL_OFFSET[a] - LEVEL_OFFSET[b]
            if w != 0:
                out.optical[:, :, e, k] *= np.exp(-1j * w * delta * duration)
    if rates is not None:
        out = apply_decay(out, {"spin": duration, "optical": duration}, rates)
    return out


_TRANSITIONS = {
    "2-3": ("2", "3"),
    "1-3": ("1", "3"),
    "1-s": ("1", "s"),
    "2-s": ("2", "s"),
    "1-2": ("1", "2"),
}


def normalize_transition(name: str) -> str:
    return name.replace("\u2013", "-").replace("\u2212", "-").replace("\u2194", "-").strip()


def macroscopic_polarization(state: EnsembleState, transition: str, cell: int = 0) -> complex:
    """Weighted sum over bins of the coherence on ``transition`` at ``cell``."""
    key = normalize_transition(transition)
    if key not in _TRANSITIONS:
        raise InvalidArgument(f"unknown transition {transition!r}")
    lower, upper = _TRANSITIONS[key]
    if key == "1-2":
        values = state.rho12
    else:
        if not 0 <= cell < state.spatial.n_cells:
            raise InvalidArgument(f"cell {cell} out of range")
        values = state.coherence(lower, upper)[cell]
    return complex(np.sum(state.spectral.weights * values))
