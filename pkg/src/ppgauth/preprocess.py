"""Pre-processing: band-pass filtering, systolic peak detection, false peak
removal, peak-centred segmentation and pair averaging.

A note on two readings adopted here. The segment around peak ``i`` spans
``i - 2r .. i + 2r`` and so holds ``4r + 1`` samples, which is what makes it
cover roughly four pulses. ``r`` is the median distance between consecutive
peaks in samples (a beat period, not a rate in bpm).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal

from .errors import InsufficientSignalError, InvalidConfigError, NumericInstabilityError

STATE_PATTERN = re.compile(r"^(relax|exercise|emotion-\d+)$")

DEFAULT_HR_BANDS = {
    "relax": (40.0, 140.0),
    "exercise": (40.0, 200.0),
}


@dataclass(frozen=True)
class RawRecording:
    """A sampled PPG trace plus its labels.

    ``state`` is one of ``relax``, ``exercise`` or ``emotion-<k>``.
    """

    samples: np.ndarray
    fs: float
    subject_id: str = ""
    session_id: str = ""
    state: str = "relax"

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise InvalidConfigError("samples must be one-dimensional")
        if not np.all(np.isfinite(samples)):
            raise InvalidConfigError("samples must be finite")
        if not self.fs > 0:
            raise InvalidConfigError(f"fs must be positive, got {self.fs}")
        if not STATE_PATTERN.match(self.state):
            raise InvalidConfigError(f"unknown state {self.state!r}")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.fs

    def with_samples(self, samples) -> "RawRecording":
        return replace(self, samples=np.asarray(samples, dtype=float))

    def slice_seconds(self, start: float, stop: float | None = None) -> "RawRecording":
        i0 = int(round(start * self.fs))
        i1 = None if stop is None else int(round(stop * self.fs))
        return self.with_samples(self.samples[i0:i1])

    def check_usable(self, min_seconds: float = 10.0):
        if self.duration < min_seconds:
            raise InsufficientSignalError(
                f"recording {self.subject_id}/{self.session_id} lasts {self.duration:.1f} s, "
                f"need at least {min_seconds:g} s"
            )


@dataclass(frozen=True)
class PeakList:
    indices: np.ndarray
    prominences: np.ndarray | None = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise InvalidConfigError("peak indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)
        if self.prominences is not None:
            prom = np.asarray(self.prominences, dtype=float).ravel()
            if prom.shape != idx.shape:
                raise InvalidConfigError("prominences must align with indices")
            object.__setattr__(self, "prominences", prom)

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class PulseSegment:
    values: np.ndarray
    r: int
    center_peak_index: int = -1
    source_peaks: tuple = field(default=())


def hr_band_for_state(state: str, bands: dict | None = None) -> tuple[float, float]:
    """Plausible heart-rate band (bpm) for a physiological state.

    Emotion partitions are resting recordings and share the relax band.
    """
    bands = DEFAULT_HR_BANDS if bands is None else bands
    key = "exercise" if state == "exercise" else "relax"
    lo, hi = bands[key]
    return float(lo), float(hi)


def design_bandpass(fs: float, low_hz: float = 0.5, high_hz: float = 5.0, order: int = 38) -> np.ndarray:
    """Butterworth band-pass as second-order sections.

    ``order`` is the order of the band-pass itself, so an order-38 design is
    19 biquads (a 19th-order low-pass prototype).
    """
    nyq = fs / 2.0
    if not (0 < low_hz < high_hz < nyq):
        raise InvalidConfigError(
            f"need 0 < low_hz < high_hz < fs/2, got low={low_hz}, high={high_hz}, fs={fs}"
        )
    if order < 2 or order % 2:
        raise InvalidConfigError(f"band-pass order must be even and >= 2, got {order}")
    return signal.butter(order // 2, [low_hz, high_hz], btype="bandpass", fs=fs, output="sos")


def bandpass_filter(
    rec: RawRecording,
    low_hz: float = 0.5,
    high_hz: float = 5.0,
    order: int = 38,
    normalize: bool = True,
    transient_s: float = 2.0,
) -> RawRecording:
    """Causal band-pass filter, optionally scaled to unit peak-to-peak range.

    The filter state is initialised to the steady-state response to the first
    sample, so a constant input produces (numerically) zero output. The
    peak-to-peak range used for normalisation ignores the first
    ``transient_s`` seconds; those samples are kept so the output has the same
    length as the input.
    """
    sos = design_bandpass(rec.fs, low_hz, high_hz, order)
    x = rec.samples
    if x.size == 0:
        return rec
    zi = signal.sosfilt_zi(sos) * x[0]
    y, _ = signal.sosfilt(sos, x, zi=zi)
    if not np.all(np.isfinite(y)):
        raise NumericInstabilityError("band-pass output contains non-finite values")
    if normalize:
        skip = int(round(transient_s * rec.fs))
        steady = y[skip:] if y.size > skip else y
        span = np.ptp(steady)
        # an all-stopband input filters to round-off; leave it unscaled
        if span > 1e-9 * max(1.0, float(np.max(np.abs(x)))):
            y = y / span
    return rec.with_samples(y)


def trim_transient(rec: RawRecording, seconds: float = 2.0) -> RawRecording:
    return rec.slice_seconds(seconds)


def detect_peaks(rec: RawRecording, prominence: float = 0.25) -> PeakList:
    """Systolic peaks as prominent maxima of the squared, range-normalised signal.

    The signal is first mapped onto [0, 1] so that squaring emphasises the
    upper part of each pulse, then peaks whose prominence exceeds
    ``prominence`` times the range of the squared signal are kept. Because of
    the initial range mapping the result does not depend on the input's
    amplitude scale or offset.
    """
    x = rec.samples
    if x.size < 3:
        return PeakList(np.empty(0, dtype=np.int64), np.empty(0))
    span = np.ptp(x)
    if span <= 0:
        return PeakList(np.empty(0, dtype=np.int64), np.empty(0))
    sq = ((x - x.min()) / span) ** 2
    thr = prominence * np.ptp(sq)
    idx, props = signal.find_peaks(sq, prominence=thr)
    return PeakList(idx, props["prominences"])


def remove_false_peaks(peaks: PeakList, fs: float, hr_band=(40.0, 140.0)) -> PeakList:
    """Drop peaks that imply an implausibly fast heart rate.

    Whenever two neighbouring peaks are closer than the fastest plausible beat,
    one of them is removed: the one whose removal leaves a plausible merged
    interval; otherwise the less prominent one; otherwise the one whose removal
    leaves intervals closest to the median beat period. Intervals that are too
    long (missed beats, dropouts) cannot be fixed by removing peaks and are
    left alone; ``segment`` tolerates them.
    """
    bpm_min, bpm_max = hr_band
    if not (0 < bpm_min < bpm_max):
        raise InvalidConfigError(f"invalid heart-rate band {hr_band}")
    idx = [int(i) for i in peaks.indices]
    if len(idx) < 2:
        return PeakList(np.asarray(idx, dtype=np.int64), peaks.prominences)
    prom = list(peaks.prominences) if peaks.prominences is not None else [None] * len(idx)
    min_gap = 60.0 * fs / bpm_max
    max_gap = 60.0 * fs / bpm_min
    typical = float(np.median(np.diff(idx)))

    def plausible(gap):
        return min_gap <= gap <= max_gap

    def merged_gap_ok(j):
        # removing peak j joins its neighbours into one interval
        if j == 0 or j == len(idx) - 1:
            return True
        return plausible(idx[j + 1] - idx[j - 1])

    def irregularity(j):
        rest = idx[:j] + idx[j + 1:]
        lo, hi = max(0, j - 2), min(len(rest), j + 2)
        gaps = np.diff(rest[lo:hi])
        return float(np.sum(np.abs(gaps - typical))) if gaps.size else 0.0

    k = 0
    while k < len(idx) - 1:
        if idx[k + 1] - idx[k] >= min_gap:
            k += 1
            continue
        ok_a, ok_b = merged_gap_ok(k), merged_gap_ok(k + 1)
        if ok_a != ok_b:
            drop = k if ok_a else k + 1
        elif prom[k] is not None and prom[k] != prom[k + 1]:
            drop = k if prom[k] < prom[k + 1] else k + 1
        else:
            drop = k if irregularity(k) < irregularity(k + 1) else k + 1
        del idx[drop]
        del prom[drop]
        k = max(0, drop - 1)

    out_prom = None if peaks.prominences is None else np.asarray(prom, dtype=float)
    return PeakList(np.asarray(idx, dtype=np.int64), out_prom)


def median_period(peaks: PeakList) -> int:
    if len(peaks) < 2:
        raise InsufficientSignalError("need at least two peaks to estimate the beat period")
    return int(round(float(np.median(np.diff(peaks.indices)))))


def segment(rec: RawRecording, peaks: PeakList, r: int | None = None) -> list[PulseSegment]:
    """Cut a ``4r + 1`` sample window around every peak.

    Peaks whose window would leave the signal are skipped rather than padded.
    """
    if r is None:
        r = median_period(peaks)
    n = len(rec.samples)
    if r <= 0 or 4 * r + 1 > n:
        raise InsufficientSignalError(f"segment length {4 * r + 1} does not fit a signal of {n} samples")
    out = []
    for i in peaks.indices:
        lo, hi = i - 2 * r, i + 2 * r
        if lo < 0 or hi > n - 1:
            continue
        out.append(PulseSegment(rec.samples[lo:hi + 1].copy(), r, int(i)))
    return out


def average_pairs(segments: list[PulseSegment]) -> list[PulseSegment]:
    """Average consecutive segments two by two; an odd trailing segment is dropped."""
    if len(segments) < 2:
        raise InsufficientSignalError("need at least two segments to average")
    lengths = {len(s.values) for s in segments}
    if len(lengths) != 1:
        raise InvalidConfigError("segments must share one length")
    out = []
    for a, b in zip(segments[0::2], segments[1::2]):
        out.append(
            PulseSegment(
                0.5 * (a.values + b.values),
                a.r,
                a.center_peak_index,
                (a.center_peak_index, b.center_peak_index),
            )
        )
    return out
