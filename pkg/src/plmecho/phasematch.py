"""Wavevector bookkeeping for the echo and the Raman outputs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgument


def wavevector(x: float = 0.0, y: float = 0.0, z: float = 0.0) -> np.ndarray:
    return np.array([x, y, z], dtype=float)


def _as_vec(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument(f"{name} has non-finite components")
    return arr


@dataclass(frozen=True)
class Geometry:
    """Beam wavevectors (rad/m) and the echo magnitude the medium supports.

    ``k_target`` is |k(omega31)|, ``k_target_signal`` is |k(omega32)|;
    ``tolerance`` bounds the accumulated phase slip |dk| L in radians.
    """

    k_s: np.ndarray
    k0: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    k_target: float
    length: float
    k_target_signal: Optional[float] = None
    k_W: Optional[np.ndarray] = None
    k_R1: Optional[np.ndarray] = None
    tolerance: float = 0.1
    backward: bool = True

    def __post_init__(self) -> None:
        for name in ("k_s", "k0", "k1", "k2"):
            object.__setattr__(self, name, _as_vec(getattr(self, name), name))
        for name in ("k_W", "k_R1"):
            if getattr(self, name) is not None:
                object.__setattr__(self, name, _as_vec(getattr(self, name), name))
        if not self.k_target > 0:
            raise InvalidArgument("target wavevector magnitude must be positive")
        if not self.length > 0:
            raise InvalidArgument("medium length must be positive")
        if not self.tolerance > 0:
            raise InvalidArgument("tolerance must be positive")


@dataclass(frozen=True)
class EchoMatch:
    k_e: np.ndarray
    residual: float
    matched: bool
    backward: bool

    def to_dict(self) -> dict:
        return {
            "k_e": [float(c) for c in self.k_e],
            "residual_rad": float(self.residual),
            "matched": bool(self.matched),
            "backward": bool(self.backward),
        }


def scattered_wavevector(k0, k1, k2) -> np.ndarray:
    """Spin-wave wavevector k0 - k1 + k2."""
    return _as_vec(k0, "k0") - _as_vec(k1, "k1") + _as_vec(k2, "k2")


def echo_wavevector(geometry: Geometry) -> EchoMatch:
    """Echo direction k_s + dk_sc and its magnitude mismatch over the medium."""
    g = geometry
    k_e = g.k_s + scattered_wavevector(g.k0, g.k1, g.k2)
    residual = abs(float(np.linalg.norm(k_e)) - g.k_target) * g.length
    going_back = bool(k_e[2] < 0)
    matched = residual <= g.tolerance and (going_back if g.backward else not going_back)
    return EchoMatch(k_e, residual, matched, going_back)


def raman_output_wavevectors(geometry: Geometry) -> tuple[np.ndarray, np.ndarray]:
    """(k_out1, k_out2): ordinary Raman readout and the one shifted by the spin wave."""
    if geometry.k_W is None or geometry.k_R1 is None:
        raise InvalidArgument("Raman write/read wavevectors k_W and k_R1 are required")
    k_out1 = geometry.k_s - geometry.k_W + geometry.k_R1
    k_out2 = k_out1 + scattered_wavevector(geometry.k0, geometry.k1, geometry.k2)
    return k_out1, k_out2


def backward_geometry(k_s: float, k0: float, k1: float, k2: float, k_target: float, length: float, tolerance: float = 0.1) -> Geometry:
    """Collinear layout with k_s, k0, k1 along +z and k2 along -z (magnitudes given)."""
    return Geometry(
        k_s=wavevector(z=k_s),
        k0=wavevector(z=k0),
        k1=wavevector(z=k1),
        k2=wavevector(z=-k2),
        k_target=k_target,
        length=length,
        tolerance=tolerance,
    )
