"""Fourier spectra of population traces, trace comparison and decay fits."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks

from .model import C_CM_PER_PS

__all__ = ["Spectrum", "dft_spectrum", "compare_series", "fit_decay",
           "local_maxima", "peak_fwhm", "DegenerateFitError"]


class DegenerateFitError(ValueError):
    """The reference trace carries no usable signal for a decay fit."""


@dataclass(frozen=True)
class Spectrum:
    """Amplitudes normalized to unit maximum over the grid.

    ``scale`` is the raw (unnormalized) maximum, so ``amplitudes * scale``
    recovers the absolute DFT magnitude for comparisons across traces.
    ``plot_factor`` is display metadata only and is never applied here.
    """

    wavenumbers: np.ndarray
    amplitudes: np.ndarray
    scale: float
    sticks: list = field(default_factory=list)
    plot_factor: float = 1.0

    @property
    def raw(self) -> np.ndarray:
        return self.amplitudes * self.scale

    def peak(self) -> float:
        return float(self.wavenumbers[np.argmax(self.amplitudes)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["wavenumber_cm1", "amplitude"])
        for x, a in zip(self.wavenumbers, self.amplitudes):
            w.writerow([f"{x:.17g}", f"{a:.17g}"])
        return buf.getvalue()

    def sticks_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta_e_cm1", "alpha_abs"])
        for e, a in self.sticks:
            w.writerow([f"{e:.17g}", f"{a:.17g}"])
        return buf.getvalue()


def _uniform_step(times: np.ndarray) -> float:
    if len(times) < 2:
        raise ValueError("need at least two samples")
    steps = np.diff(times)
    if steps[0] <= 0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise ValueError("time grid must be uniform and increasing")
    return float(steps[0])


def dft_spectrum(times: Sequence[float], values: Sequence[float], nu_min: float, nu_max: float,
                 n_points: int, detrend: bool = True, sticks=None) -> Spectrum:
    """|sum_j x_j exp(i 2 pi c nu t_j)| * dt on an arbitrary wavenumber grid (cm^-1).

    Rectangular window, explicit sum (no FFT). With ``detrend`` the mean of
    the trace is removed first. A trace with no signal gives all zeros.
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(values, dtype=float)
    if t.shape != x.shape:
        raise ValueError("times and values differ in length")
    dt = _uniform_step(t)
    if n_points < 2 or not nu_max > nu_min:
        raise ValueError("grid needs nu_max > nu_min and at least two points")
    # rounding residue below this is treated as no signal
    floor = 1e-12 * max(float(np.sum(np.abs(x))) * dt, 1e-300)
    if detrend:
        x = x - x.mean()
    nu = np.linspace(nu_min, nu_max, n_points)
    kernel = np.exp(1j * 2.0 * math.pi * C_CM_PER_PS * np.outer(nu, t))
    amp = np.abs(kernel @ x) * dt
    scale = float(amp.max())
    if scale <= floor:
        return Spectrum(nu, np.zeros_like(amp), 0.0, list(sticks or []))
    return Spectrum(nu, amp / scale, scale, list(sticks or []))


def compare_series(a: Sequence[float], b: Sequence[float]) -> dict:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"series lengths differ: {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    return {"max_abs_dev": float(diff.max()) if diff.size else 0.0,
            "rms_dev": float(np.sqrt(np.mean(diff ** 2))) if diff.size else 0.0}


def fit_decay(times: Sequence[float], values: Sequence[float], reference: Sequence[float],
              dim: int | None = None, min_signal: float = 0.05) -> float:
    """Decay time from a noisy trace and its noise-free reference.

    Uses p_noisy = (1 - F)/D + F p_ref, i.e. F = (p_noisy - 1/D)/(p_ref - 1/D)
    (``dim=None`` drops the 1/D floor), and fits log F = -t/tau through the
    origin by least squares over samples where |p_ref - 1/D| >= min_signal.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if not (t.shape == y.shape == ref.shape):
        raise ValueError("times, values and reference must have equal length")
    if len(t) < 10:
        raise ValueError("need at least 10 samples")
    floor = 0.0 if dim is None else 1.0 / dim
    signal = ref - floor
    mask = (np.abs(signal) >= min_signal) & (t > 0)
    if not mask.any():
        raise DegenerateFitError("reference trace is too close to the mixed-state floor")
    f = (y[mask] - floor) / signal[mask]
    if np.any(f <= 0):
        raise DegenerateFitError("noisy trace crosses the floor; survival factor not positive")
    slope = np.dot(t[mask], np.log(f)) / np.dot(t[mask], t[mask])
    if slope >= 0:
        return math.inf
    return -1.0 / slope


def local_maxima(spectrum: Spectrum, lo: float, hi: float, raw: bool = False) -> list[tuple[float, float]]:
    """Interior local maxima (wavenumber, amplitude) with lo <= nu <= hi."""
    amp = spectrum.raw if raw else spectrum.amplitudes
    peaks, _ = find_peaks(amp)
    nu = spectrum.wavenumbers
    return [(float(nu[i]), float(amp[i])) for i in peaks if lo <= nu[i] <= hi]


def peak_fwhm(spectrum: Spectrum, near: float) -> float:
    """Full width at half maximum of the local maximum closest to ``near``."""
    amp = spectrum.amplitudes
    nu = spectrum.wavenumbers
    peaks, _ = find_peaks(amp)
    if not len(peaks):
        raise ValueError("spectrum has no interior peak")
    i = peaks[np.argmin(np.abs(nu[peaks] - near))]
    half = amp[i] / 2.0
    lo = i
    while lo > 0 and amp[lo] > half:
        lo -= 1
    hi = i
    while hi < len(amp) - 1 and amp[hi] > half:
        hi += 1

    def cross(a, b):
        if amp[a] == amp[b]:
            return nu[a]
        return nu[a] + (half - amp[a]) * (nu[b] - nu[a]) / (amp[b] - amp[a])

    return float(cross(hi - 1, hi) - cross(lo, lo + 1))
