"""Closed-form storage and retrieval amplitudes.

Couplings enter only through ``r = |g_s/g_e|`` and the absorption
coefficients; the absolute coupling is set to one, so the stored coherences
are meaningful up to a common scale and their ratios are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidArgument, SingularArgument


@dataclass(frozen=True)
class OracleParams:
    theta0: float
    coupling_ratio: float
    alpha0_s: float
    alpha0_e: float
    length: float
    T: float = 0.0
    phase: float = 0.0
    t_s: float = 0.0
    v_g: float = math.inf

    def __post_init__(self) -> None:
        if not self.coupling_ratio > 0:
            raise InvalidArgument("coupling ratio must be positive")
        if not self.length > 0:
            raise InvalidArgument("medium length must be positive")
        if self.alpha0_s < 0 or self.alpha0_e < 0:
            raise InvalidArgument("absorption coefficients must be non-negative")

    @property
    def alpha_s(self) -> float:
        return self.alpha0_s * math.sin(self.theta0 / 2) ** 2

    @property
    def alpha_e(self) -> float:
        return self.alpha0_e * math.cos(self.theta0 / 2) ** 2

    @property
    def x(self) -> float:
        return self.coupling_ratio * math.tan(self.theta0 / 2)

    @classmethod
    def from_depths(cls, x: float, total_depth: float, theta0: float = math.pi / 2, length: float = 1.0, **kw) -> "OracleParams":
        """Parameters with ``r tan(theta0/2) = x`` and ``(alpha_s + alpha_e) L = total_depth``.

        Keeps ``alpha0_s / alpha0_e = r**2``, which is what the coupling
        definitions of both absorption coefficients imply.
        """
        if not 0 < theta0 < math.pi:
            raise InvalidArgument("theta0 must lie strictly between 0 and pi")
        t = math.tan(theta0 / 2)
        r = x / t
        a_s = total_depth * x**2 / (1 + x**2) / length
        a_e = total_depth / (1 + x**2) / length
        return cls(theta0, r, a_s / math.sin(theta0 / 2) ** 2, a_e / math.cos(theta0 / 2) ** 2, length, **kw)


def _check_z(params: OracleParams, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(z > params.length):
        raise InvalidArgument(f"z must lie in [0, {params.length}]")
    return z


def transmitted_amplitude(params: OracleParams, z) -> np.ndarray | float:
    """Field amplitude left after depth ``z``: exp(-alpha_s z / 2)."""
    z = _check_z(params, z)
    out = np.exp(-params.alpha_s * z / 2)
    return float(out) if out.ndim == 0 else out


def stored_coherences(params: OracleParams, delta, z, spectrum_value: complex = 1.0) -> tuple:
    """(sigma23, sigma13) right after storage at t = t_s, per unit coupling g_s.

    sigma23 = -i sin^2(theta0/2) exp(-alpha_s z/2) b(delta)
    sigma13 = (1/2) sin(theta0) exp(i phase) exp(i delta T) exp(-alpha_s z/2) b(delta)
    """
    z = _check_z(params, z)
    delta = np.asarray(delta, dtype=float)
    att = np.exp(-params.alpha_s * z / 2) * spectrum_value
    th = params.theta0
    s23 = -1j * math.sin(th / 2) ** 2 * att * np.ones_like(delta)
    s13 = 0.5 * math.sin(th) * np.exp(1j * params.phase) * np.exp(1j * delta * params.T) * att
    return s23, s13


def prefactor(x: float) -> float:
    return 2 * x / (1 + x * x)


def echo_closed_form(params: OracleParams, z, t, envelope: Callable) -> np.ndarray:
    """Backward echo b_e(z, t) for an input envelope given as a function of absolute time.

    ``envelope(t)`` is the input at the entry face; the echo reproduces it
    delayed by ``T`` with prefactor ``-i 2x/(1+x^2) exp(i phase)`` and the
    depth profile ``exp(alpha_e z/2)[exp(-(a_e+a_s) z/2) - exp(-(a_e+a_s) L/2)]``.
    """
    z = _check_z(params, z)
    t = np.asarray(t, dtype=float)
    a_sum = params.alpha_s + params.alpha_e
    bracket = np.exp(params.alpha_e * z / 2) * (np.exp(-a_sum * z / 2) - np.exp(-a_sum * params.length / 2))
    pref = -1j * prefactor(params.x) * np.exp(1j * params.phase)
    shift = 0.0 if math.isinf(params.v_g) else z / params.v_g
    return pref * bracket * np.asarray(envelope(t - params.T + shift))


def retrieval_efficiency(x: float, alpha_sL: float, alpha_eL: float) -> float:
    """[2x/(1+x^2)]^2 (1 - exp(-(alpha_s L + alpha_e L)/2))^2."""
    if x < 0:
        raise InvalidArgument("symmetry parameter must be non-negative")
    if math.isinf(x):
        return 0.0
    return prefactor(x) ** 2 * (-math.expm1(-(alpha_sL + alpha_eL) / 2)) ** 2


def symmetry_parameter(coupling_ratio: float, theta0: float) -> float:
    """x = r tan(theta0/2); equals one exactly when alpha_s = alpha_e."""
    if not coupling_ratio > 0:
        raise InvalidArgument("coupling ratio must be positive")
    if not 0 < theta0 < math.pi:
        raise SingularArgument(f"theta0 = {theta0} leaves no spin coherence on one side")
    return coupling_ratio * math.tan(theta0 / 2)


def symmetry_met(coupling_ratio: float, theta0: float, tol: float = 1e-9) -> bool:
    return abs(symmetry_parameter(coupling_ratio, theta0) - 1) < tol
