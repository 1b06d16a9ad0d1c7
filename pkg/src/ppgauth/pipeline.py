"""Recording-to-gallery plumbing shared by enrollment, verification and the
evaluation protocols."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import preprocess as pp
from .baselines import ac_features
from .config import RunConfig
from .features import ScalePolicy, cwt_rows, fit_length, make_scale_grid, select_scale
from .matching import AGGREGATIONS, DISTANCES
from .errors import SmallSampleSizeError
from .subspace import FITTERS, SubspaceModel, TrainingSet, fit_lda, fit_pca

log = logging.getLogger(__name__)


@lru_cache(maxsize=32)
def _grid(f_min, f_max, voices, gamma, beta):
    return make_scale_grid(f_min, f_max, voices, gamma, beta)


def scale_grid(cfg: RunConfig):
    return _grid(cfg.grid_f_min, cfg.grid_f_max, cfg.voices_per_octave, cfg.morse_gamma, cfg.morse_beta)


def selected_scale(cfg: RunConfig) -> float:
    grid = scale_grid(cfg)
    return float(grid.scales[select_scale(grid, ScalePolicy.parse(cfg.scale_policy))])


def filtered(rec: pp.RawRecording, cfg: RunConfig) -> pp.RawRecording:
    out = pp.bandpass_filter(
        rec, cfg.filter_low_hz, cfg.filter_high_hz, cfg.filter_order,
        normalize=True, transient_s=cfg.transient_s,
    )
    return pp.trim_transient(out, cfg.transient_s)


def pulse_segments(rec: pp.RawRecording, cfg: RunConfig) -> list[pp.PulseSegment]:
    """Filtered, peak-centred, pair-averaged segments of one recording."""
    f = filtered(rec, cfg)
    peaks = pp.detect_peaks(f, cfg.prominence)
    peaks = pp.remove_false_peaks(peaks, f.fs, cfg.hr_band(rec.state))
    return pp.average_pairs(pp.segment(f, peaks))


def cwt_features(rec: pp.RawRecording, cfg: RunConfig) -> np.ndarray:
    """One row per averaged segment: CWT coefficients at the selected scale.

    Rows have the recording's own segment length ``4r + 1``; callers bring
    them to the gallery length.
    """
    segs = pulse_segments(rec, cfg)
    stack = np.vstack([s.values for s in segs])
    rows = cwt_rows(stack, rec.fs, [selected_scale(cfg)], cfg.morse_gamma, cfg.morse_beta)[:, 0, :]
    return np.abs(rows) if cfg.coefficient == "magnitude" else rows.real.copy()


def recording_features(rec: pp.RawRecording, cfg: RunConfig) -> np.ndarray:
    rec.check_usable()
    if cfg.method == "ac-lda":
        return ac_features(
            filtered(rec, cfg), cfg.ac_window_s, cfg.ac_overlap,
            cfg.ac_hr_typical, cfg.ac_lag_factor, cfg.ac_lag_rate,
        )
    return cwt_features(rec, cfg)


def fit_identity(ts: TrainingSet) -> SubspaceModel:
    """Open-set 'model': templates are the raw feature vectors."""
    model = SubspaceModel("identity", ts.L, ts.L, ts.classes)
    return model.enroll(ts)


def fit_fisher(ts: TrainingSet, m=None) -> SubspaceModel:
    """LDA, preceded by PCA when the within-class scatter is singular.

    The PCA dimension starts at ``N - K`` (capped by the data rank) and is
    halved until LDA's within-class scatter becomes invertible.
    """
    try:
        return fit_lda(ts, m)
    except SmallSampleSizeError:
        pass
    N, K = ts.X.shape[0], len(ts.classes)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pca = fit_pca(ts, min(N - K, ts.L))
    want = K - 1 if m is None else int(m)
    d = pca.m
    while True:
        W0 = pca.W[:, :d]
        try:
            inner = fit_lda(TrainingSet(ts.X @ W0, ts.labels), min(want, d))
            break
        except SmallSampleSizeError:
            if d <= 1:
                raise
            d = d // 2
    model = SubspaceModel("lda", ts.L, inner.m, ts.classes, W=W0 @ inner.W,
                          eigenvalues=inner.eigenvalues, meta={"pca_dim": d})
    return model.enroll(ts)


def _fit(method: str, ts: TrainingSet, cfg: RunConfig) -> SubspaceModel:
    if method == "openset":
        return fit_identity(ts)
    if method in ("cwt-lda", "ac-lda"):
        return fit_fisher(ts, cfg.m)
    name = method.split("-", 1)[1]
    if name in ("kpca", "kdda"):
        return FITTERS[name](ts, cfg.m, cfg.kernel_sigma)
    return FITTERS[name](ts, cfg.m)


@dataclass
class Gallery:
    """A fitted model plus the matching rule that goes with it."""

    model: SubspaceModel
    cfg: RunConfig

    @property
    def metric(self) -> str:
        return "euclidean" if self.cfg.method == "ac-lda" else "pearson"

    @property
    def labels(self) -> list:
        return list(self.model.templates)

    def prepare(self, rows) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        return fit_length(rows, self.model.L)

    def class_distances(self, rows) -> np.ndarray:
        """Per-vector distance to every enrolled class, shape (n_rows, K)."""
        over_templates = AGGREGATIONS[self.cfg.aggregation][0]
        proj = self.model.project_many(self.prepare(rows))
        dist = DISTANCES[self.metric]
        return np.column_stack(
            [over_templates(dist(proj, self.model.templates[c]), axis=1) for c in self.labels]
        )

    def aggregate(self, per_vector: np.ndarray, axis=0):
        return AGGREGATIONS[self.cfg.aggregation][1](per_vector, axis=axis)


def build_gallery(train_rows: dict, cfg: RunConfig) -> Gallery:
    """Fit ``cfg.method`` on per-subject feature rows of possibly unequal length."""
    L = max(np.atleast_2d(r).shape[1] for r in train_rows.values())
    groups = {sid: fit_length(np.atleast_2d(r), L) for sid, r in train_rows.items()}
    ts = TrainingSet.from_groups(groups)
    model = _fit(cfg.method, ts, cfg)
    model.meta.update({"run_method": cfg.method, "fingerprint": cfg.fingerprint()})
    return Gallery(model, cfg)
