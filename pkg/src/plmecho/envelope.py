"""Slowly varying field envelopes on a uniform time grid."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensemble import normalize_transition
from .errors import InvalidArgument

DIRECTIONS = ("forward", "backward")
CARRIERS = ("2-3", "1-3")


@dataclass(frozen=True)
class FieldEnvelope:
    """Complex samples ``b(t0 + n*dt)``.

    ``t_ref`` is the reference time of the pulse (``t_s`` for a signal);
    ``direction`` is the propagation sense along z.
    """

    samples: np.ndarray
    dt: float
    t0: float = 0.0
    direction: str = "forward"
    carrier: str = "2-3"
    t_ref: float = 0.0

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=complex).ravel()
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidArgument(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(samples)):
            raise InvalidArgument("field samples must be finite")
        if self.direction not in DIRECTIONS:
            raise InvalidArgument(f"direction must be one of {DIRECTIONS}")
        carrier = normalize_transition(self.carrier)
        if carrier not in CARRIERS:
            raise InvalidArgument(f"carrier must be one of {CARRIERS}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "carrier", carrier)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * self.n

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.dt)

    def __call__(self, t) -> np.ndarray:
        """Linear interpolation, zero outside the sampled window."""
        if self.n == 0:
            return np.zeros_like(np.asarray(t, dtype=float), dtype=complex)
        x = self.times
        re = np.interp(t, x, self.samples.real, left=0.0, right=0.0)
        im = np.interp(t, x, self.samples.imag, left=0.0, right=0.0)
        return re + 1j * im

    def scaled(self, factor: complex) -> "FieldEnvelope":
        return FieldEnvelope(self.samples * factor, self.dt, self.t0, self.direction, self.carrier, self.t_ref)

    def intensity_fwhm(self) -> float:
        """Full width at half maximum of |b|^2 (linear interpolation at the crossings)."""
        if self.n == 0:
            return 0.0
        inten = np.abs(self.samples) ** 2
        peak = inten.max()
        if peak == 0:
            return 0.0
        above = np.flatnonzero(inten >= peak / 2)
        lo, hi = above[0], above[-1]
        t = self.times

        def cross(i, j):
            if i < 0 or j >= self.n:
                return t[min(max(i, 0), self.n - 1)]
            y0, y1 = inten[i] - peak / 2, inten[j] - peak / 2
            return t[i] + (t[j] - t[i]) * (y0 / (y0 - y1) if y0 != y1 else 0.0)

        return float(cross(hi, hi + 1) - cross(lo - 1, lo))

    def peak_time(self) -> float | None:
        """Time of the |b|^2 maximum refined by a three-point parabola."""
        if self.n == 0:
            return None
        inten = np.abs(self.samples) ** 2
        i = int(np.argmax(inten))
        if inten[i] == 0:
            return None
        shift = 0.0
        if 0 < i < self.n - 1:
            a, b, c = inten[i - 1], inten[i], inten[i + 1]
            denom = a - 2 * b + c
            if denom != 0:
                shift = 0.5 * (a - c) / denom
        return float(self.t0 + (i + shift) * self.dt)


def gaussian_pulse(
    t_center: float,
    fwhm: float,
    dt: float,
    half_window: float | None = None,
    amplitude: complex = 1.0,
    carrier: str = "2-3",
) -> FieldEnvelope:
    """Gaussian signal whose intensity FWHM is ``fwhm``, sampled over t_center +- half_window."""
    if fwhm <= 0:
        raise InvalidArgument("pulse FWHM must be positive")
    half_window = 2.5 * fwhm if half_window is None else half_window
    n = int(round(2 * half_window / dt))
    t0 = t_center - half_window
    t = t0 + dt * np.arange(n)
    s = fwhm / (2 * math.sqrt(math.log(2)))
    samples = amplitude * np.exp(-0.5 * ((t - t_center) / s) ** 2)
    return FieldEnvelope(samples, dt, t0, "forward", carrier, t_center)


def asymmetric_pulse(
    t_center: float,
    fwhm: float,
    dt: float,
    half_window: float | None = None,
    amplitude: complex = 1.0,
    carrier: str = "2-3",
) -> FieldEnvelope:
    """Two unequal Gaussian lobes; not symmetric under time reversal about any point."""
    half_window = 2.5 * fwhm if half_window is None else half_window
    n = int(round(2 * half_window / dt))
    t0 = t_center - half_window
    t = t0 + dt * np.arange(n)
    s = fwhm / (4 * math.sqrt(math.log(2)))
    lead = np.exp(-0.5 * ((t - t_center + 0.5 * fwhm) / s) ** 2)
    trail = 0.45 * np.exp(-0.5 * ((t - t_center - 0.6 * fwhm) / (1.6 * s)) ** 2)
    return FieldEnvelope(amplitude * (lead + trail), dt, t0, "forward", carrier, t_center)


def overlap_fidelity(output: FieldEnvelope, template: FieldEnvelope) -> tuple[float, float]:
    """Best normalized overlap over integer-sample delays.

    Returns ``(fidelity, delay)`` where ``delay`` is the shift of
    ``template`` that maximizes ``|<out, template(t - delay)>|^2 / (|out|^2 |template|^2)``.
    Both envelopes must share ``dt``.
    """
    if output.n == 0 or template.n == 0:
        return 0.0, math.nan
    if not math.isclose(output.dt, template.dt, rel_tol=1e-9):
        raise InvalidArgument("envelopes must share the same time step")
    e_out = np.sum(np.abs(output.samples) ** 2)
    e_tpl = np.sum(np.abs(template.samples) ** 2)
    if e_out == 0 or e_tpl == 0:
        return 0.0, math.nan
    # corr[j] = sum_n out[n] * conj(tpl[n - lag]), lag = j - (template.n - 1)
    corr = np.correlate(output.samples, template.samples, mode="full")
    j = int(np.argmax(np.abs(corr)))
    lag = j - (template.n - 1)
    fid = float(np.abs(corr[j]) ** 2 / (e_out * e_tpl))
    delay = output.t0 - template.t0 + lag * output.dt
    return min(fid, 1.0), float(delay)


def reversed_envelope(env: FieldEnvelope) -> FieldEnvelope:
    return FieldEnvelope(env.samples[::-1].copy(), env.dt, env.t0, env.direction, env.carrier, env.t_ref)
