"""Comparator front ends: autocorrelation of blind windows (AC/LDA) and
open-set matching on raw CWT features."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import InsufficientSignalError, InvalidConfigError, UndefinedCorrelationError
from .matching import NO_MATCH, pearson_distance_matrix


@dataclass(frozen=True)
class AcWindow:
    values: np.ndarray
    start: int
    stop: int


def window_offsets(n: int, win: int, overlap: float) -> np.ndarray:
    """Start indices of length-``win`` windows over ``n`` samples."""
    if not 0 <= overlap < 1:
        raise InvalidConfigError(f"overlap must lie in [0, 1), got {overlap}")
    if win < 1:
        raise InvalidConfigError("window must hold at least one sample")
    if win > n:
        raise InsufficientSignalError(f"window of {win} samples exceeds signal of {n}")
    stride = max(1.0, (1.0 - overlap) * win)
    count = int(np.floor((n - win) / stride + 1e-9)) + 1
    return np.floor(np.arange(count) * stride + 1e-9).astype(np.int64)


def blind_windows(rec, win_len_s: float = 5.0, overlap: float = 0.5) -> list[np.ndarray]:
    """Fixed-length overlapping windows with no reference to beat positions."""
    win = int(round(win_len_s * rec.fs))
    starts = window_offsets(len(rec.samples), win, overlap)
    return [rec.samples[s:s + win] for s in starts]


def normalized_autocorr(window, M: int) -> np.ndarray:
    """Autocorrelation at lags ``0..M-1`` divided by the lag-0 value.

    Uses the biased sum ``sum_{i=0}^{N-m-1} x[i] x[i+m]`` with no
    ``1/(N-m)`` correction.
    """
    x = np.asarray(window, dtype=float)
    N = x.size
    if not 1 <= M <= N:
        raise InvalidConfigError(f"lag count must lie in 1..{N}, got {M}")
    nfft = sfft.next_fast_len(2 * N - 1)
    X = sfft.rfft(x, nfft)
    r = sfft.irfft(X * np.conj(X), nfft)[:M]
    r0 = float(x @ x)
    if r0 <= 0:
        raise UndefinedCorrelationError("autocorrelation of an all-zero window is undefined")
    out = r / r0
    out[0] = 1.0
    return out


def ac_lag_count(fs: float, hr_typical: float = 60.0, factor: float = 1.2) -> int:
    """Default number of lags: ``factor`` typical beat periods."""
    return int(round(factor * fs * 60.0 / hr_typical))


def ac_features(rec, win_len_s=5.0, overlap=0.5, hr_typical=60.0, lag_factor=1.2, lag_rate=50.0) -> np.ndarray:
    """AC vectors of every blind window of a pre-processed recording.

    Lags are kept every ``fs / lag_rate`` samples: the band-limited signal's
    autocorrelation is fully described at that rate, and the shorter vector
    keeps the within-class scatter invertible for plain LDA.
    """
    M = ac_lag_count(rec.fs, hr_typical, lag_factor)
    step = max(1, int(round(rec.fs / lag_rate)))
    rows = []
    for w in blind_windows(rec, win_len_s, overlap):
        try:
            rows.append(normalized_autocorr(w, M)[::step])
        except UndefinedCorrelationError:
            continue
    if not rows:
        raise InsufficientSignalError("no usable autocorrelation windows")
    return np.vstack(rows)


def openset_match(gallery: dict, tests, over_templates=np.min) -> np.ndarray:
    """Pearson distance from each test vector to each enrolled class, computed
    directly on CWT features (no dimensionality reduction).

    ``gallery`` maps class label to its stored feature vectors; returns an
    array of shape (n_tests, n_classes) in the gallery's key order.
    """
    tests = np.atleast_2d(np.asarray(tests, dtype=float))
    cols = []
    for label in gallery:
        d = pearson_distance_matrix(tests, gallery[label])
        cols.append(over_templates(d, axis=1) if d.size else np.full(len(tests), NO_MATCH))
    return np.column_stack(cols)


def acda_pipeline(train_recordings, test_recordings, config=None, lda_dim=None, ntest_values=("All",)):
    """AC/LDA end to end: AC windows, LDA projection, Euclidean matching.

    ``train_recordings`` and ``test_recordings`` hold one recording per
    subject (matched by ``subject_id``). Returns the evaluation report.
    """
    from .config import RunConfig
    from .evaluation import evaluate_split

    cfg = (config or RunConfig()).replace(method="ac-lda")
    if lda_dim is not None:
        cfg = cfg.replace(m=lda_dim)
    return evaluate_split(train_recordings, test_recordings, cfg, ntest_values)
