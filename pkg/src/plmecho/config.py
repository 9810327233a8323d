"""YAML run configuration with strict keys and environment overrides.

Every physical key carries its SI unit as a suffix (``T_s``,
``delta_in_rad_per_s``).  Environment variables named
``PLMECHO_<SECTION>__<KEY>`` override file values; the key match is
case-insensitive and the value is parsed as YAML (so ``1e-6`` is a float).
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import yaml

from .constants import SPEED_OF_LIGHT
from .ensemble import DecayRates, SpectralGrid, build_spectral_grid
from .errors import InvalidConfig
from .oracle import OracleParams
from .propagation import StageConfig
from .protocols import NoiseConfig, ProtocolParams, ProtocolTimeline, TimescaleBudget, build

ENV_PREFIX = "PLMECHO_"
SWEEP_PARAMETERS = ("x", "total_depth", "alpha_L", "theta0")


@dataclass
class ProtocolSection:
    variant: str = "basic"
    theta0_rad: float = math.pi / 2
    tau_s: float = 1e-6
    T_s: float = 40e-6
    t0_s: float = 50e-6
    t_start_s: float = 0.0
    signal_fwhm_s: float = 4e-6
    dt_s: float = 0.2e-6
    signal_shape: str = "gaussian"
    signal_amplitude: float = 1.0
    phi0_rad: float = 0.0
    phi1_rad: float = 0.0
    phi2_rad: float = 0.0
    k0_per_m: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    k1_per_m: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    k2_per_m: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    polarization: float = 1.0
    retrieve_margin: float = 3.0
    T_prime_s: Optional[float] = None
    pair_transition: str = "1-4"
    t1_s: Optional[float] = None
    t_read_s: Optional[float] = None


@dataclass
class MediumSection:
    """Either both ``alpha0_*_per_m`` or the pair (``x``, ``total_depth``)."""

    alpha0_s_per_m: Optional[float] = None
    alpha0_e_per_m: Optional[float] = None
    x: Optional[float] = 1.0
    total_depth: Optional[float] = 4.0
    length_m: float = 0.01
    n_cells: int = 200
    v_g_m_per_s: float = SPEED_OF_LIGHT / 1.8


@dataclass
class SpectralSection:
    profile: str = "rectangular"
    delta_in_rad_per_s: float = 2 * math.pi * 1e6
    n_bins: int = 401
    span_rad_per_s: Optional[float] = None


@dataclass
class DecaySection:
    T2_spin_s: Optional[float] = None
    T2_opt_s: Optional[float] = None
    T1_opt_s: Optional[float] = None


@dataclass
class NoiseSection:
    pulse_error: float = 0.0
    atom_number: float = 1e15
    t0_s: Optional[float] = None
    T1_opt_s: float = 1.9e-3
    gate_s: float = 10e-6
    mu_geo: float = 1e-6
    n_signal_photons: float = 1.0


@dataclass
class MaterialSection:
    ion: str = "Eu"
    isotope: Optional[Any] = 151
    site: Optional[Any] = 1
    host: str = "Y2SiO5"
    b_field_T: float = 0.0


@dataclass
class SweepSection:
    """``parameters`` maps names from SWEEP_PARAMETERS to value lists; rows follow their product."""

    parameters: dict = field(default_factory=dict)


@dataclass
class OutputSection:
    dir: str = "plmecho-out"
    prefix: str = ""


@dataclass
class SimConfig:
    protocol: ProtocolSection = field(default_factory=ProtocolSection)
    medium: MediumSection = field(default_factory=MediumSection)
    spectral: SpectralSection = field(default_factory=SpectralSection)
    decay: DecaySection = field(default_factory=DecaySection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    material: Optional[MaterialSection] = None
    sweep: Optional[SweepSection] = None
    output: OutputSection = field(default_factory=OutputSection)
    timescale_margin: float = 10.0
    seed: Optional[int] = None

    # -- derived objects -------------------------------------------------
    def protocol_params(self) -> ProtocolParams:
        p = self.protocol
        return ProtocolParams(
            theta0=p.theta0_rad,
            tau=p.tau_s,
            T=p.T_s,
            t0=p.t0_s,
            t_start=p.t_start_s,
            signal_fwhm=p.signal_fwhm_s,
            dt=p.dt_s,
            signal_shape=p.signal_shape,
            signal_amplitude=p.signal_amplitude,
            phi0=p.phi0_rad,
            phi1=p.phi1_rad,
            phi2=p.phi2_rad,
            k0=tuple(p.k0_per_m),
            k1=tuple(p.k1_per_m),
            k2=tuple(p.k2_per_m),
            retrieve_margin=p.retrieve_margin,
            polarization=p.polarization,
        )

    def timeline(self, params: ProtocolParams | None = None) -> ProtocolTimeline:
        params = params or self.protocol_params()
        p = self.protocol
        kw: dict = {}
        if p.variant == "reprogrammed":
            if p.T_prime_s is None:
                raise InvalidConfig("reprogrammed variant needs protocol.T_prime_s")
            kw = {"T_prime": p.T_prime_s, "pair_transition": p.pair_transition}
        elif p.variant == "on-demand":
            if p.t1_s is None or p.t_read_s is None:
                raise InvalidConfig("on-demand variant needs protocol.t1_s and protocol.t_read_s")
            kw = {"t1": p.t1_s, "t_read": p.t_read_s}
        return build(p.variant, params, **kw)

    def absorption(self, theta0: float | None = None) -> tuple[float, float]:
        """(alpha0_s, alpha0_e) in 1/m."""
        m = self.medium
        theta0 = self.protocol.theta0_rad if theta0 is None else theta0
        if m.alpha0_s_per_m is not None or m.alpha0_e_per_m is not None:
            if m.alpha0_s_per_m is None or m.alpha0_e_per_m is None:
                raise InvalidConfig("give both medium.alpha0_s_per_m and medium.alpha0_e_per_m")
            if m.x is not None or m.total_depth is not None:
                raise InvalidConfig("set medium.x and medium.total_depth to null when giving absorption coefficients")
            return float(m.alpha0_s_per_m), float(m.alpha0_e_per_m)
        if m.x is None or m.total_depth is None:
            raise InvalidConfig("medium needs either alpha0_s/alpha0_e or x and total_depth")
        return depths_to_alpha0(m.x, m.total_depth, theta0, m.length_m)

    def stage(self, alpha0_s: float | None = None, alpha0_e: float | None = None) -> StageConfig:
        if alpha0_s is None:
            alpha0_s, alpha0_e = self.absorption()
        m = self.medium
        return StageConfig(
            alpha0_s=alpha0_s,
            alpha0_e=alpha0_e,
            dt=self.protocol.dt_s,
            length=m.length_m,
            n_cells=m.n_cells,
            v_g=m.v_g_m_per_s,
            theta0=self.protocol.theta0_rad,
        )

    def spectral_grid(self) -> SpectralGrid:
        s = self.spectral
        return build_spectral_grid(s.profile, s.delta_in_rad_per_s, s.n_bins, s.span_rad_per_s)

    def rates(self) -> DecayRates:
        d = self.decay
        return DecayRates.from_times(T2_spin=d.T2_spin_s, T2_opt=d.T2_opt_s, T1_opt=d.T1_opt_s)

    def budget(self) -> TimescaleBudget:
        p, d = self.protocol, self.decay
        T_prime = p.T_prime_s if p.variant == "reprogrammed" and p.pair_transition == "1-4" else None
        return TimescaleBudget(
            T2_star=1.0 / self.spectral.delta_in_rad_per_s,
            dt_s=p.signal_fwhm_s,
            T=p.T_s,
            T_prime=T_prime,
            tau=p.tau_s,
            t0=p.t0_s,
            T2_opt=d.T2_opt_s,
            T2_spin=d.T2_spin_s,
            T1_opt=d.T1_opt_s,
        )

    def noise_config(self) -> NoiseConfig:
        n = self.noise
        return NoiseConfig(
            pulse_error=n.pulse_error,
            atom_number=n.atom_number,
            t0=self.protocol.t0_s if n.t0_s is None else n.t0_s,
            T1_opt=n.T1_opt_s,
            gate=n.gate_s,
            mu_geo=n.mu_geo,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def depths_to_alpha0(x: float, total_depth: float, theta0: float, length: float) -> tuple[float, float]:
    if not x > 0 or not total_depth >= 0:
        raise InvalidConfig("x must be positive and total_depth non-negative")
    try:
        op = OracleParams.from_depths(x, total_depth, theta0, length)
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from exc
    return op.alpha0_s, op.alpha0_e


_SECTIONS = {
    "protocol": ProtocolSection,
    "medium": MediumSection,
    "spectral": SpectralSection,
    "decay": DecaySection,
    "noise": NoiseSection,
    "material": MaterialSection,
    "sweep": SweepSection,
    "output": OutputSection,
}
_TOP_SCALARS = ("timescale_margin", "seed")


def _coerce(name: str, value: Any, default: Any) -> Any:
    if value is None:
        return None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise InvalidConfig(f"{name} must be true or false")
        return value
    if isinstance(value, str) and (isinstance(default, float) or default is None):
        # YAML 1.1 leaves exponent literals without a dot ('2e-5') as strings
        try:
            value = float(value)
        except ValueError:
            if isinstance(default, float):
                raise InvalidConfig(f"{name} must be a number, got {value!r}") from None
    if isinstance(default, float) or (default is None and isinstance(value, (int, float)) and not isinstance(value, bool)):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidConfig(f"{name} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise InvalidConfig(f"{name} must be an integer, got {value!r}")
        return value
    if isinstance(default, str) and not isinstance(value, str):
        raise InvalidConfig(f"{name} must be a string, got {value!r}")
    if isinstance(default, list):
        if not isinstance(value, list) or len(value) != 3:
            raise InvalidConfig(f"{name} must be a list of three numbers")
        return [float(v) for v in value]
    return value


def _section(cls, data: Any, where: str):
    if data is None:
        return None
    if not isinstance(data, Mapping):
        raise InvalidConfig(f"[{where}] must be a mapping")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise InvalidConfig(f"unknown key(s) in [{where}]: {', '.join(map(str, unknown))}")
    defaults = cls()
    # fields annotated Any (material isotope/site) are normalized by the lookup itself
    kwargs = {
        k: v if "Any" in str(names[k].type) else _coerce(f"{where}.{k}", v, getattr(defaults, k))
        for k, v in data.items()
    }
    return cls(**kwargs)


def _validate_sweep(sweep: SweepSection) -> None:
    if not isinstance(sweep.parameters, Mapping) or not sweep.parameters:
        raise InvalidConfig("sweep.parameters must name at least one parameter")
    for name, values in sweep.parameters.items():
        if name not in SWEEP_PARAMETERS:
            raise InvalidConfig(f"unknown sweep parameter {name!r}; expected one of {SWEEP_PARAMETERS}")
        if not isinstance(values, list) or not values:
            raise InvalidConfig(f"sweep values for {name!r} must be a non-empty list")
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise InvalidConfig(f"sweep values for {name!r} must be finite numbers")
    if "alpha_L" in sweep.parameters and ("x" in sweep.parameters or "total_depth" in sweep.parameters):
        raise InvalidConfig("alpha_L already fixes x = 1 and the total depth; do not combine it with x or total_depth")
    if "theta0" in sweep.parameters and len(sweep.parameters) > 1:
        raise InvalidConfig("theta0 sweeps run at fixed absorption coefficients and cannot be combined")


def from_dict(data: Mapping | None) -> SimConfig:
    data = {} if data is None else data
    if not isinstance(data, Mapping):
        raise InvalidConfig("configuration root must be a mapping")
    unknown = sorted(set(data) - set(_SECTIONS) - set(_TOP_SCALARS))
    if unknown:
        raise InvalidConfig(f"unknown top-level key(s): {', '.join(map(str, unknown))}")
    kwargs: dict = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _section(cls, data[name], name)
            if kwargs[name] is None and name not in ("material", "sweep"):
                kwargs.pop(name)
    if "timescale_margin" in data:
        kwargs["timescale_margin"] = _coerce("timescale_margin", data["timescale_margin"], 10.0)
    if "seed" in data:
        kwargs["seed"] = _coerce("seed", data["seed"], 0)
    cfg = SimConfig(**kwargs)
    if cfg.sweep is not None:
        _validate_sweep(cfg.sweep)
    return cfg


def apply_env(data: dict, environ: Mapping[str, str] | None = None) -> dict:
    """Merge ``PLMECHO_SECTION__KEY`` (or ``PLMECHO_KEY`` for top-level scalars) into ``data``."""
    environ = os.environ if environ is None else environ
    out = {k: (dict(v) if isinstance(v, Mapping) else v) for k, v in data.items()}
    for var in sorted(environ):
        if not var.startswith(ENV_PREFIX):
            continue
        path = var[len(ENV_PREFIX):].split("__")
        value = _parse_env_value(environ[var])
        if len(path) == 1:
            key = _match(path[0], _TOP_SCALARS, var)
            out[key] = value
        elif len(path) == 2:
            section = _match(path[0], tuple(_SECTIONS), var)
            key = _match(path[1], tuple(f.name for f in dataclasses.fields(_SECTIONS[section])), var)
            target = out.get(section)
            target = dict(target) if isinstance(target, Mapping) else {}
            target[key] = value
            out[section] = target
        else:
            raise InvalidConfig(f"cannot interpret environment override {var}")
    return out


def _parse_env_value(text: str) -> Any:
    # YAML 1.1 reads '2e-5' (no dot) as a string; accept it as a number
    value = yaml.safe_load(text)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


def _match(name: str, choices: tuple, var: str) -> str:
    for c in choices:
        if c.lower() == name.lower():
            return c
    raise InvalidConfig(f"environment override {var} names unknown key {name!r}")


def load(path: str | None, environ: Mapping[str, str] | None = None) -> SimConfig:
    """Parse a config file (or defaults when ``path`` is None) plus environment overrides."""
    data: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise InvalidConfig(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(data, Mapping):
            raise InvalidConfig("configuration root must be a mapping")
    return from_dict(apply_env(dict(data), environ))


def dump(cfg: SimConfig) -> str:
    """Effective configuration as YAML; ``from_dict(yaml.safe_load(dump(cfg))) == cfg``."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
