"""Linear Maxwell-Bloch propagation for the storage and backward-retrieval stages.

Each stage is integrated in its own retarded frame (``tau = t - z/v_g`` for
the forward signal, ``tau' = t + z/v_g`` for the backward echo), where the
field equation has no time derivative:

    dB/ds = i G sum_m w_m sigma_k(m)              (s: distance travelled)
    d sigma_k'/dtau = -lambda sigma_k' + i g rho[k, k'] B

``k`` is the lower level of the addressed transition (2 for the signal on
2-3, 1 for the echo on 1-3), ``k'`` runs over the ground levels and
``lambda = i*Delta + gamma_o``.  The atomic update is an exponential
integrator exact for piecewise-linear B; the field crossing one cell uses
the implicit midpoint rule.  The resulting cell-to-cell recurrence at each
time level is linear and solved with a first-order IIR filter.

Couplings are calibrated from the absorption coefficients:
``G g = alpha0 / (2 pi rho(0))`` with ``rho(0)`` the spectral density at
line centre, so a broadband pulse decays as ``exp(-alpha0 n_k z / 2)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .constants import EXCITED_INDEX, GROUND_INDEX, GROUND_LEVELS, LEVEL_OFFSET
from .ensemble import (
    DecayRates,
    EnsembleState,
    SpatialGrid,
    SpectralGrid,
    build_spectral_grid,
    free_evolve,
    init_state,
    normalize_transition,
)
from .envelope import FieldEnvelope, overlap_fidelity
from .errors import InvalidConfig, InvalidTimeline, NumericalFailure, PreconditionViolation
from .pulses import apply_optical_pi, apply_rf_rotation, prepare_plm, prepare_plm_sequence, _is_fresh
from .timeline import (
    AbsorbEvent,
    DecayIntervalEvent,
    OpticalPiEvent,
    PlmPrepEvent,
    ProtocolTimeline,
    RetrieveEvent,
    RfEvent,
)

BROADBAND_THRESHOLD = 20.0
DEFAULT_V_G = 299_792_458.0 / 1.8


class NarrowbandWarning(UserWarning):
    """Signal bandwidth is not small against the inhomogeneous width."""


@dataclass(frozen=True)
class StageConfig:
    """Numerical and optical parameters shared by both propagation stages.

    ``alpha0_s`` / ``alpha0_e`` are the unsaturated absorption coefficients
    on 2-3 and 1-3; their ratio fixes ``|g_s/g_e|``.  ``theta0`` and
    ``coupling_ratio`` are optional cross-checks, the populations actually
    used come from the ensemble state.
    """

    alpha0_s: float
    alpha0_e: float
    dt: float
    length: float = 0.01
    n_cells: int = 200
    v_g: float = DEFAULT_V_G
    theta0: float | None = None
    coupling_ratio: float | None = None

    def __post_init__(self) -> None:
        if self.alpha0_s < 0 or self.alpha0_e < 0:
            raise InvalidConfig("absorption coefficients must be non-negative")
        if not self.dt > 0:
            raise InvalidConfig(f"time step must be positive, got {self.dt}")
        if not self.length > 0 or self.n_cells < 1:
            raise InvalidConfig("medium length and cell count must be positive")
        if not self.v_g > 0:
            raise InvalidConfig("group velocity must be positive")
        if self.coupling_ratio is not None:
            implied = self.implied_ratio
            if not math.isclose(self.coupling_ratio, implied, rel_tol=1e-9):
                raise InvalidConfig(
                    f"coupling_ratio {self.coupling_ratio} contradicts sqrt(alpha0_s/alpha0_e) = {implied}"
                )

    @property
    def dz(self) -> float:
        return self.length / self.n_cells

    @property
    def implied_ratio(self) -> float:
        if self.alpha0_e == 0:
            return math.inf
        return math.sqrt(self.alpha0_s / self.alpha0_e)

    def alpha_s(self, theta0: float | None = None) -> float:
        theta0 = self.theta0 if theta0 is None else theta0
        return self.alpha0_s * math.sin(theta0 / 2) ** 2

    def alpha_e(self, theta0: float | None = None) -> float:
        theta0 = self.theta0 if theta0 is None else theta0
        return self.alpha0_e * math.cos(theta0 / 2) ** 2

    def couplings(self, spectral: SpectralGrid) -> dict[str, float]:
        """Atom-field coupling per transition (field and atom couplings set equal)."""
        rho0 = spectral.center_density
        return {
            "2-3": math.sqrt(self.alpha0_s / (2 * math.pi * rho0)),
            "1-3": math.sqrt(self.alpha0_e / (2 * math.pi * rho0)),
        }


@dataclass
class EchoReport:
    efficiency: float
    peak_time: float | None
    shape_fidelity: float
    echo: FieldEnvelope
    transmitted: FieldEnvelope
    delay: float
    expected_echo_time: float | None = None
    echo_carrier: str = "1-3"
    input_energy: float = 0.0
    final_state: EnsembleState | None = None

    def summary(self) -> dict:
        def num(x):
            return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else float(x)

        return {
            "efficiency": num(self.efficiency),
            "peak_time_s": num(self.peak_time),
            "fidelity": num(self.shape_fidelity),
            "delay_s": num(self.delay),
            "expected_echo_time_s": num(self.expected_echo_time),
            "echo_carrier": self.echo_carrier,
            "input_energy": num(self.input_energy),
            "echo_energy": num(self.echo.energy),
            "transmitted_energy": num(self.transmitted.energy),
        }


def _etd_weights(lam: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """exp(-lam h) and the weights of B(0), B(h) in int_0^h exp(-lam (h-s)) B(s) ds."""
    z = lam * h
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    e = np.exp(-z)
    e0 = np.where(small, 1 - z / 2 + z**2 / 6 - z**3 / 24 + z**4 / 120, -np.expm1(-zs) / zs)
    e1 = np.where(small, 0.5 - z / 3 + z**2 / 8 - z**3 / 30 + z**4 / 144, (1 - e * (1 + zs)) / zs**2)
    return e, h * e1, h * (e0 - e1)


def march(
    coh: np.ndarray,
    drive: np.ndarray,
    lam: np.ndarray,
    weights: np.ndarray,
    radiating: int,
    coupling: float,
    dz: float,
    dt: float,
    boundary: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate one stage on a fixed grid.

    Parameters
    ----------
    coh : (ncol, ncells, nbins) complex
        Coherences driven by the field, cells ordered along the direction of
        travel.  Updated copy is returned.
    drive : (ncol, nbins) complex
        ``i g rho[k, k']`` for each driven column.
    lam : (ncol, nbins) complex
        Per-bin precession plus damping rates.
    radiating : int
        Column whose bin sum sources the field.
    boundary : (nt,) complex
        Field entering the first cell at each time sample.

    Returns the field leaving the last cell at each time sample and the
    final coherences.
    """
    coh = coh.copy()
    nt = boundary.size
    ncells = coh.shape[1]
    out = np.zeros(nt, dtype=complex)
    if nt == 0:
        return out, coh
    kdz = 1j * coupling * dz
    a, fa, fb = _etd_weights(lam, dt)
    dfa = drive * fa
    dfb = drive * fb
    w = weights

    # field inside the medium at the first sample, polarization held fixed
    pol = np.sum(coh[radiating] * w, axis=1)
    b_in = boundary[0] + np.concatenate(([0.0], np.cumsum(kdz * pol)))
    out[0] = b_in[-1]
    b_mid = b_in[:-1] + 0.5 * kdz * pol

    m = complex(np.sum(w * dfb[radiating]))
    denom = 1 - 0.5 * kdz * m
    gain = 1 + kdz * m / denom
    filt_a = np.array([1.0, -gain])
    for n in range(1, nt):
        known = coh * a[:, None, :] + dfa[:, None, :] * b_mid[None, :, None]
        k_pol = np.sum(known[radiating] * w, axis=1)
        x = np.empty(ncells + 1, dtype=complex)
        x[0] = boundary[n]
        x[1:] = kdz * k_pol / denom
        b_in = lfilter([1.0], filt_a, x)
        out[n] = b_in[-1]
        pol = (k_pol + m * b_in[:-1]) / denom
        b_mid = b_in[:-1] + 0.5 * kdz * pol
        coh = known + dfb[:, None, :] * b_mid[None, :, None]
    if not (np.all(np.isfinite(out)) and np.all(np.isfinite(coh))):
        raise NumericalFailure("non-finite values during propagation")
    return out, coh


def _lambda(state: EnsembleState, rates: DecayRates | None, cols: list[int]) -> np.ndarray:
    delta = state.spectral.detunings
    gamma = 0.0 if rates is None else rates.gamma_o
    return np.stack([1j * (LEVEL_OFFSET["3"] - LEVEL_OFFSET[GROUND_LEVELS[c]]) * delta + gamma for c in cols])


def _check_grid(state: EnsembleState, cfg: StageConfig) -> None:
    if state.spatial.n_cells != cfg.n_cells or not math.isclose(state.spatial.length, cfg.length, rel_tol=1e-12):
        raise InvalidConfig("ensemble spatial grid does not match the stage configuration")


def _run_stage(
    state: EnsembleState,
    cfg: StageConfig,
    carrier: str,
    boundary: np.ndarray,
    backward: bool,
    rates: DecayRates | None,
) -> tuple[EnsembleState, np.ndarray]:
    _check_grid(state, cfg)
    lower = "1" if carrier == "1-3" else "2"
    g = cfg.couplings(state.spectral)[carrier]
    cols = [GROUND_INDEX["1"], GROUND_INDEX["2"]]
    e3 = EXCITED_INDEX["3"]
    k = GROUND_INDEX[lower]
    drive = np.stack([1j * g * state.background[:, k, c] for c in cols])
    lam = _lambda(state, rates, cols)
    z = state.spatial.centers
    length = cfg.length
    nt = boundary.size
    duration = max(nt - 1, 0) * cfg.dt

    # cells along the direction of travel, in real time tau + (distance offset)/v_g
    order = slice(None, None, -1) if backward else slice(None)
    lead = (length - z) if backward else z
    coh = np.stack([state.optical[:, :, e3, c] for c in cols])
    coh = coh * np.exp(-lam[:, None, :] * (lead / cfg.v_g)[None, :, None])
    coh = coh[:, order, :]
    out, coh = march(coh, drive, lam, state.spectral.weights, cols.index(k), g, cfg.dz, cfg.dt, boundary)
    coh = coh[:, order, :]
    coh = coh * np.exp(-lam[:, None, :] * ((length - lead) / cfg.v_g)[None, :, None])

    new = free_evolve(state, duration + length / cfg.v_g, rates)
    for i, c in enumerate(cols):
        new.optical[:, :, e3, c] = coh[i]
    return new, out


def _bandwidth_check(field: FieldEnvelope, spectral: SpectralGrid) -> None:
    width = field.intensity_fwhm()
    if width > 0 and spectral.delta_in * width < BROADBAND_THRESHOLD:
        warnings.warn(
            f"delta_in * signal duration = {spectral.delta_in * width:.3g} < {BROADBAND_THRESHOLD}; "
            "closed-form absorption and echo results assume a much narrower signal spectrum",
            NarrowbandWarning,
            stacklevel=3,
        )


def propagate_absorption(
    state: EnsembleState,
    field: FieldEnvelope,
    cfg: StageConfig,
    rates: DecayRates | None = None,
) -> tuple[EnsembleState, FieldEnvelope]:
    """Send the signal through the medium on 2-3, storing it in sigma23 and sigma13.

    The field's own time grid sets the integration grid (``field.dt`` must
    equal ``cfg.dt``).  Returns the updated state, referenced to the instant
    the last sample leaves the far face, and the transmitted envelope.
    """
    if field.carrier != "2-3" or field.direction != "forward":
        raise InvalidConfig("signal must be a forward field on the 2-3 transition")
    if not math.isclose(field.dt, cfg.dt, rel_tol=1e-9):
        raise InvalidConfig(f"field dt {field.dt} differs from stage dt {cfg.dt}")
    if state.n4 > 1e-12:
        raise PreconditionViolation("level 4 still populated when the signal arrives")
    if field.t0 < state.time - 1e-15 - 1e-9 * abs(state.time):
        raise InvalidTimeline(f"signal starts at {field.t0} before the ensemble time {state.time}")
    _bandwidth_check(field, state.spectral)
    state = free_evolve(state, max(field.t0 - state.time, 0.0), rates)
    new, out = _run_stage(state, cfg, "2-3", field.samples, backward=False, rates=rates)
    transmitted = FieldEnvelope(out, field.dt, field.t0 + cfg.length / cfg.v_g, "forward", "2-3", field.t_ref)
    return new, transmitted


def propagate_retrieval(
    state: EnsembleState,
    cfg: StageConfig,
    duration: float,
    carrier: str = "1-3",
    rates: DecayRates | None = None,
) -> tuple[EnsembleState, FieldEnvelope]:
    """Let the stored coherence radiate backward; record the field leaving z = 0.

    No field enters at z = L.  ``carrier`` picks the emitting transition
    (1-3 for the basic scheme, 2-3 after an RF pi-pulse on 1-2).
    """
    carrier = normalize_transition(carrier)
    if carrier not in ("1-3", "2-3"):
        raise InvalidConfig(f"echo carrier must be 1-3 or 2-3, not {carrier!r}")
    if duration < 0:
        raise InvalidConfig("retrieval duration must be non-negative")
    if state.n4 > 1e-12:
        raise PreconditionViolation("level 4 still populated at retrieval")
    nt = int(round(duration / cfg.dt)) + 1
    t_start = state.time + cfg.length / cfg.v_g
    new, out = _run_stage(state, cfg, carrier, np.zeros(nt, dtype=complex), backward=True, rates=rates)
    echo = FieldEnvelope(out, cfg.dt, t_start, "backward", carrier, t_start)
    return new, echo


def _advance(state: EnsembleState, t: float, rates, cfg: StageConfig) -> EnsembleState:
    gap = t - state.time
    # stages end L/v_g after their last sample on the time axis
    slack = 2 * cfg.length / cfg.v_g + 1e-12 * max(1.0, abs(t))
    if gap < -slack:
        raise InvalidTimeline(f"event at {t:.9g} s precedes ensemble time {state.time:.9g} s")
    return free_evolve(state, max(gap, 0.0), rates)


def run_timeline(
    timeline: ProtocolTimeline,
    cfg: StageConfig,
    rates: DecayRates | None = None,
    spectral: SpectralGrid | None = None,
    state: EnsembleState | None = None,
) -> EchoReport:
    """Execute every event in order and score the echo against the input."""
    spectral = spectral or (state.spectral if state is not None else build_spectral_grid())
    if state is None:
        state = init_state(spectral, SpatialGrid(cfg.length, cfg.n_cells))
    _check_grid(state, cfg)
    if timeline.optical_span() >= 0.5 * spectral.revival_time:
        raise InvalidConfig(
            f"optical precession span {timeline.optical_span():.3g} s reaches half the spectral-grid "
            f"revival time {spectral.revival_time:.3g} s; use finer spectral bins"
        )
    ideal = rates is None or rates.ideal
    state = state.copy(time=min(state.time, timeline.events[0].start))
    transmitted = echo = None
    for ev in timeline.events:
        state = _advance(state, ev.start, rates, cfg)
        if isinstance(ev, RfEvent):
            state = apply_rf_rotation(state, ev.pulse)
        elif isinstance(ev, OpticalPiEvent):
            state = apply_optical_pi(state, ev.pulse)
        elif isinstance(ev, PlmPrepEvent):
            if ideal and _is_fresh(state):
                state = prepare_plm(state, ev.prep)
            else:
                state = prepare_plm_sequence(state, ev.prep, rates)
        elif isinstance(ev, DecayIntervalEvent):
            state = _advance(state, ev.end, rates, cfg)
        elif isinstance(ev, AbsorbEvent):
            state, transmitted = propagate_absorption(state, ev.field, cfg, rates)
            if timeline.polarization != 1.0:
                state = state.copy()
                state.optical *= timeline.polarization
        elif isinstance(ev, RetrieveEvent):
            state, echo = propagate_retrieval(state, cfg, ev.duration, ev.carrier, rates)
        else:  # pragma: no cover
            raise InvalidTimeline(f"unknown event {ev!r}")

    signal = timeline.absorb.field
    e_in = signal.energy
    if e_in == 0:
        eff, fid, delay, peak = 0.0, 0.0, math.nan, None
    else:
        eff = echo.energy / e_in
        fid, delay = overlap_fidelity(echo, signal)
        peak = echo.peak_time()
    if not math.isfinite(eff):
        raise NumericalFailure("efficiency is not finite")
    return EchoReport(
        efficiency=eff,
        peak_time=peak,
        shape_fidelity=fid,
        echo=echo,
        transmitted=transmitted,
        delay=delay,
        expected_echo_time=timeline.expected_echo_time,
        echo_carrier=echo.carrier,
        input_energy=e_in,
        final_state=state,
    )


def stored_excitation(state: EnsembleState, transition: str = "2-3") -> float:
    """Excited-state population integrated over the medium, in field-energy units.

    With field and atom couplings equal this is ``int dz sum_m w_m |sigma|^2 / n_k``;
    for a stored signal it balances ``int |b_in|^2 - int |b_out|^2``.
    """
    lower = "2" if normalize_transition(transition) == "2-3" else "1"
    n = state.population(lower)
    if n == 0:
        return 0.0
    sigma = state.coherence(lower, "3")
    return float(np.sum(np.sum(np.abs(sigma) ** 2 * state.spectral.weights, axis=1)) * state.spatial.dz / n)
