"""Continuous wavelet transform with the analytic generalized Morse wavelet,
scale selection and fixed-length feature vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import InvalidConfigError

# |psi(tau)| of the (3, 20) mother wavelet is below 1e-12 of its peak past
# |tau| = 30; wider wavelets decay more slowly, so scale the reach with the
# time-bandwidth product sqrt(beta * gamma).
_TAIL_REACH = 30.0 / np.sqrt(60.0)


def morse_peak_frequency(gamma: float, beta: float) -> float:
    """Radian peak frequency of the mother wavelet, (beta / gamma) ** (1 / gamma)."""
    return (beta / gamma) ** (1.0 / gamma)


def morse_spectrum(omega, gamma: float = 3.0, beta: float = 20.0) -> np.ndarray:
    """Generalized Morse wavelet in the frequency domain.

    ``2 * (e*gamma/beta)**(beta/gamma) * omega**beta * exp(-omega**gamma)`` for
    positive ``omega`` and zero elsewhere, so the peak value is exactly 2.
    """
    if gamma <= 0 or beta <= 0:
        raise InvalidConfigError(f"Morse parameters must be positive, got gamma={gamma}, beta={beta}")
    omega = np.asarray(omega, dtype=float)
    out = np.zeros_like(omega)
    pos = omega > 0
    w = omega[pos]
    log_norm = np.log(2.0) + (beta / gamma) * (1.0 + np.log(gamma) - np.log(beta))
    out[pos] = np.exp(log_norm + beta * np.log(w) - w**gamma)
    return out


def morse_wavelet(gamma: float, beta: float, scale: float, n: int, fs: float) -> np.ndarray:
    """Frequency samples of the Morse wavelet dilated to ``scale`` seconds.

    Returned in FFT bin order for an ``n``-point transform at sampling rate
    ``fs``; bins at negative frequencies (and the Nyquist bin) are zero.
    """
    if n < 1 or scale <= 0 or fs <= 0:
        raise InvalidConfigError(f"invalid wavelet request n={n}, scale={scale}, fs={fs}")
    omega = 2 * np.pi * sfft.fftfreq(n, d=1.0 / fs)
    return morse_spectrum(scale * omega, gamma, beta).astype(complex)


@dataclass(frozen=True)
class ScaleGrid:
    scales: np.ndarray
    center_frequencies: np.ndarray
    voices_per_octave: int
    gamma: float = 3.0
    beta: float = 20.0

    def __len__(self):
        return len(self.scales)


def make_scale_grid(
    f_min: float = 0.25,
    f_max: float = 8.0,
    voices_per_octave: int = 8,
    gamma: float = 3.0,
    beta: float = 20.0,
) -> ScaleGrid:
    """Log-spaced scales (in seconds) whose centre frequencies run from ``f_max``
    down to ``f_min``; scales are returned in descending order."""
    if not (0 < f_min < f_max) or voices_per_octave < 1:
        raise InvalidConfigError("scale grid needs 0 < f_min < f_max and voices_per_octave >= 1")
    n_steps = int(round(np.log2(f_max / f_min) * voices_per_octave))
    freqs = f_min * 2.0 ** (np.arange(n_steps + 1) / voices_per_octave)
    scales = morse_peak_frequency(gamma, beta) / (2 * np.pi * freqs)
    return ScaleGrid(scales, freqs, voices_per_octave, gamma, beta)


@dataclass(frozen=True)
class Scalogram:
    coefficients: np.ndarray
    scales: np.ndarray
    center_frequencies: np.ndarray
    n: int


def _pad_length(n: int, max_scale: float, fs: float, gamma: float, beta: float) -> int:
    reach = int(np.ceil(_TAIL_REACH * np.sqrt(beta * gamma) * max_scale * fs))
    return sfft.next_fast_len(n + reach + 1)


def cwt_rows(x, fs: float, scales, gamma: float = 3.0, beta: float = 20.0) -> np.ndarray:
    """CWT coefficients of ``x`` (last axis) at the given scales.

    Computes ``(1/sqrt(a)) * sum_n x[n] conj(psi((t_n - b) / a)) * dt`` for every
    scale ``a`` and sample time ``b`` as a zero-padded FFT product, which
    equals the direct sum because the padding exceeds the wavelet's support.
    ``x`` may be 1-D or a stack of equal-length rows; the output gains a scale
    axis just before the time axis.
    """
    x = np.asarray(x, dtype=float)
    scales = np.atleast_1d(np.asarray(scales, dtype=float))
    n = x.shape[-1]
    npad = _pad_length(n, float(scales.max()), fs, gamma, beta)
    spec = sfft.fft(x, npad, axis=-1)
    omega = 2 * np.pi * sfft.fftfreq(npad, d=1.0 / fs)
    bank = np.sqrt(scales)[:, None] * morse_spectrum(scales[:, None] * omega[None, :], gamma, beta)
    out = sfft.ifft(spec[..., None, :] * bank, axis=-1)
    return out[..., :n]


def cwt(x, fs: float, grid: ScaleGrid) -> Scalogram:
    x = np.asarray(getattr(x, "values", x), dtype=float)
    if x.ndim != 1 or x.size < 16:
        raise InvalidConfigError("cwt needs a 1-D segment of at least 16 samples")
    coefs = cwt_rows(x, fs, grid.scales, grid.gamma, grid.beta)
    return Scalogram(coefs, grid.scales, grid.center_frequencies, x.size)


@dataclass(frozen=True)
class ScalePolicy:
    """Either ``by_band(low, high)`` or ``by_index(k)`` (1-based, largest scale first)."""

    kind: str
    low: float = 0.0
    high: float = 0.0
    index: int = 0

    @classmethod
    def by_band(cls, low: float, high: float) -> "ScalePolicy":
        return cls("band", float(low), float(high))

    @classmethod
    def by_index(cls, k: int) -> "ScalePolicy":
        return cls("index", index=int(k))

    @classmethod
    def parse(cls, text: str) -> "ScalePolicy":
        """``"band:1:2"`` or ``"index:3"``."""
        parts = text.split(":")
        if parts[0] == "band" and len(parts) == 3:
            return cls.by_band(float(parts[1]), float(parts[2]))
        if parts[0] == "index" and len(parts) == 2:
            return cls.by_index(int(parts[1]))
        raise InvalidConfigError(f"cannot parse scale policy {text!r}")

    def __str__(self):
        if self.kind == "band":
            return f"band:{self.low:g}:{self.high:g}"
        return f"index:{self.index}"


def select_scale(grid: ScaleGrid, policy: ScalePolicy) -> int:
    """Index into ``grid.scales`` of the scale picked by ``policy``."""
    if policy.kind == "index":
        if not 1 <= policy.index <= len(grid):
            raise InvalidConfigError(f"scale index {policy.index} outside 1..{len(grid)}")
        order = np.argsort(-grid.scales, kind="stable")
        return int(order[policy.index - 1])
    if policy.kind == "band":
        fc = grid.center_frequencies
        inside = np.flatnonzero((fc >= policy.low) & (fc <= policy.high))
        if inside.size == 0:
            raise InvalidConfigError(f"no scale has a centre frequency in [{policy.low}, {policy.high}] Hz")
        mid = 0.5 * (policy.low + policy.high)
        return int(inside[np.argmin(np.abs(fc[inside] - mid))])
    raise InvalidConfigError(f"unknown scale policy kind {policy.kind!r}")


def fit_length(values: np.ndarray, L: int) -> np.ndarray:
    """Zero-pad at the end, or centre-truncate, the last axis to length ``L``."""
    values = np.asarray(values)
    n = values.shape[-1]
    if n == L:
        return values.copy()
    if n < L:
        pad = [(0, 0)] * (values.ndim - 1) + [(0, L - n)]
        return np.pad(values, pad)
    start = (n - L) // 2
    return values[..., start:start + L].copy()


def to_feature_vector(scalogram: Scalogram, scale_index: int, L: int) -> np.ndarray:
    """Magnitudes of one scalogram row, brought to length ``L``."""
    return fit_length(np.abs(scalogram.coefficients[scale_index]), L)
