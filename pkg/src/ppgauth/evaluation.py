"""Verification metrics (FAR, FRR, ROC, EER) and the evaluation protocols."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .errors import InsufficientSignalError, InvalidConfigError, PPGAuthError
from .pipeline import build_gallery, recording_features

log = logging.getLogger(__name__)

RESULTS_HEADER = ["dataset", "method", "protocol", "nTest", "mean_eer", "std_eer", "iterations"]


@dataclass
class ScoreSet:
    genuine: np.ndarray
    imposter: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.genuine = np.asarray(self.genuine, dtype=float).ravel()
        self.imposter = np.asarray(self.imposter, dtype=float).ravel()

    def check(self):
        if self.genuine.size == 0 or self.imposter.size == 0:
            raise InvalidConfigError("EER needs at least one genuine and one imposter score")
        if not (np.all(np.isfinite(self.genuine)) and np.all(np.isfinite(self.imposter))):
            raise InvalidConfigError("scores must be finite")


def far_frr(scores: ScoreSet, threshold: float) -> tuple[float, float]:
    """Error rates when claims scoring at or below ``threshold`` are accepted."""
    scores.check()
    far = float(np.mean(scores.imposter <= threshold))
    frr = float(np.mean(scores.genuine > threshold))
    return far, frr


@dataclass
class RocCurve:
    thresholds: np.ndarray
    far: np.ndarray
    frr: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "far", "frr"])
        for t, a, r in zip(self.thresholds, self.far, self.frr):
            w.writerow([repr(float(t)), repr(float(a)), repr(float(r))])
        return buf.getvalue()


def roc_export(scores: ScoreSet) -> RocCurve:
    """FAR and FRR at every distinct score, preceded by a ``-inf`` threshold
    (accept nothing) so the curve starts at FAR = 0, FRR = 1."""
    scores.check()
    thr = np.unique(np.concatenate([scores.genuine, scores.imposter]))
    imp = np.sort(scores.imposter)
    gen = np.sort(scores.genuine)
    far = np.searchsorted(imp, thr, side="right") / imp.size
    frr = 1.0 - np.searchsorted(gen, thr, side="right") / gen.size
    return RocCurve(
        np.concatenate([[-np.inf], thr]),
        np.concatenate([[0.0], far]),
        np.concatenate([[1.0], frr]),
    )


def eer(scores: ScoreSet) -> float:
    """Equal error rate.

    Sweeps every distinct score as a threshold and finds where FAR - FRR
    changes sign; between the two bracketing thresholds FAR and FRR are
    interpolated linearly to the point where they meet.
    """
    roc = roc_export(scores)
    d = roc.far - roc.frr
    j = int(np.argmax(d >= 0))  # d ends at +1, so a crossing always exists
    if d[j] == 0:
        return float(roc.far[j])
    a = -d[j - 1] / (d[j] - d[j - 1])
    return float(roc.far[j - 1] + a * (roc.far[j] - roc.far[j - 1]))


@dataclass
class CellResult:
    dataset: str
    method: str
    protocol: str
    ntest: object
    eers: list
    roc: RocCurve | None = None
    excluded: list = field(default_factory=list)

    @property
    def mean_eer(self) -> float:
        # correctly rounded, so identical per-iteration values average to themselves
        return math.fsum(self.eers) / len(self.eers)

    @property
    def std_eer(self) -> float:
        return float(np.std(self.eers)) if len(self.eers) > 1 else 0.0

    @property
    def iterations(self) -> int:
        return len(self.eers)

    def row(self) -> list:
        return [self.dataset, self.method, self.protocol, str(self.ntest),
                f"{self.mean_eer:.8f}", f"{self.std_eer:.8f}", str(self.iterations)]


@dataclass
class EvalReport:
    cells: list = field(default_factory=list)

    def cell(self, ntest, protocol: str | None = None) -> CellResult:
        for c in self.cells:
            if str(c.ntest) == str(ntest) and (protocol is None or c.protocol == protocol):
                return c
        raise KeyError(ntest)

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(RESULTS_HEADER)
        for c in self.cells:
            w.writerow(c.row())
        return buf.getvalue()

    def extend(self, other: "EvalReport") -> "EvalReport":
        self.cells.extend(other.cells)
        return self


def _features_or_none(rec, cfg):
    try:
        return recording_features(rec, cfg)
    except InsufficientSignalError as exc:
        log.warning("excluding %s/%s/%s: %s", rec.subject_id, rec.session_id, rec.state, exc)
        return None


def _scores_from_matrix(mean_dist: np.ndarray, true_cols: np.ndarray) -> ScoreSet:
    """Split a (trials x classes) score matrix into genuine and imposter scores."""
    mask = np.zeros_like(mean_dist, dtype=bool)
    mask[np.arange(len(true_cols)), true_cols] = True
    return ScoreSet(mean_dist[mask], mean_dist[~mask])


def _ntest_label(v):
    return "All" if v == "All" else int(v)


def evaluate_split(train_recs, test_recs, cfg: RunConfig, ntest_values=None, dataset: str = "",
                   protocol: str = "single-session", iterations: int | None = None,
                   random_starts: bool = True) -> EvalReport:
    """Enroll on one recording per subject, test on another per subject.

    For each numeric nTest and each iteration, every subject contributes one
    trial of ``nTest`` consecutive test segments (random start when
    ``random_starts``, else from the beginning), claimed against every
    enrolled identity. ``All`` uses every test segment once.
    """
    ntest_values = cfg.ntest if ntest_values is None else tuple(_ntest_label(v) for v in ntest_values)
    iterations = cfg.iterations if iterations is None else iterations
    train_rows, excluded = {}, []
    for rec in train_recs:
        rows = _features_or_none(rec, cfg)
        if rows is None or len(rows) < 2:
            excluded.append(rec.subject_id)
            continue
        train_rows[rec.subject_id] = rows
    if len(train_rows) < 2:
        raise InsufficientSignalError("fewer than two subjects could be enrolled")
    gallery = build_gallery(train_rows, cfg)
    labels = gallery.labels
    per_subject = {}
    for rec in test_recs:
        if rec.subject_id not in train_rows:
            continue
        rows = _features_or_none(rec, cfg)
        if rows is None or len(rows) == 0:
            excluded.append(rec.subject_id)
            continue
        per_subject[rec.subject_id] = gallery.class_distances(rows)
    subjects = [s for s in labels if s in per_subject]

    report = EvalReport()
    for nt in ntest_values:
        eers, pooled_g, pooled_i = [], [], []
        usable = [s for s in subjects if nt == "All" or len(per_subject[s]) >= nt]
        skipped = sorted(set(subjects) - set(usable))
        if skipped:
            log.warning("nTest=%s: too few test segments for %s", nt, ", ".join(skipped))
        if not usable:
            raise InsufficientSignalError(f"no subject has {nt} test segments")
        n_iter = 1 if nt == "All" or not random_starts else iterations
        true_cols = np.array([labels.index(s) for s in usable])
        for it in range(n_iter):
            trials = []
            for si, s in enumerate(usable):
                D = per_subject[s]
                if nt == "All":
                    chunk = D
                else:
                    start = 0
                    if random_starts:
                        rng = np.random.default_rng([cfg.seed, int(nt), it, labels.index(s)])
                        start = int(rng.integers(0, len(D) - nt + 1))
                    chunk = D[start:start + nt]
                trials.append(gallery.aggregate(chunk, axis=0))
            ss = _scores_from_matrix(np.vstack(trials), true_cols)
            eers.append(eer(ss))
            pooled_g.append(ss.genuine)
            pooled_i.append(ss.imposter)
        pooled = ScoreSet(np.concatenate(pooled_g), np.concatenate(pooled_i))
        report.cells.append(CellResult(dataset, cfg.method, protocol, nt, eers, roc_export(pooled),
                                       sorted(set(excluded) | set(skipped))))
    return report


def protocol_single_session(recordings, cfg: RunConfig, dataset: str = "", ntest_values=None,
                            iterations: int | None = None, train_seconds: float | None = None) -> EvalReport:
    """Enroll on the first ``train_seconds`` of each recording and test on the
    rest, with randomly placed consecutive test segments."""
    train_seconds = cfg.train_seconds if train_seconds is None else train_seconds
    train, test = [], []
    for rec in recordings:
        if rec.duration <= train_seconds:
            log.warning("excluding %s: recording shorter than the training window", rec.subject_id)
            continue
        train.append(rec.slice_seconds(0, train_seconds))
        test.append(rec.slice_seconds(train_seconds))
    return evaluate_split(train, test, cfg, ntest_values, dataset, "single-session", iterations)


def partition_of(rec) -> str:
    return f"{rec.session_id}/{rec.state}"


def trial_counts(partitions: dict, train_partition: str, rotate: bool) -> tuple[int, int]:
    """Genuine and imposter trial counts for one training partition.

    ``partitions`` maps partition name to the set of subjects present there.
    """
    enrolled = partitions[train_partition]
    tests = [p for p in partitions if p != train_partition]
    pool = list(partitions) if rotate else tests
    gen = sum(len(partitions[p] & enrolled) for p in tests)
    imp = sum(len(partitions[p] & enrolled) - (1 if s in partitions[p] else 0)
              for s in enrolled for p in pool)
    return gen, imp


def protocol_cross_partition(recordings, cfg: RunConfig, train_partition: str | None = None,
                             test_partitions=None, dataset: str = "", ntest_values=None,
                             train_seconds: float | None = None) -> EvalReport:
    """Enroll on one partition (``session/state``) and verify on others.

    With ``train_partition=None`` every partition takes a turn as the training
    partition, and imposter trials come from all partitions, including the
    training one; this is the emotion-rotation layout. Otherwise imposter
    trials come from ``test_partitions`` only. Test segments are taken from the
    start of each recording.
    """
    ntest_values = cfg.ntest if ntest_values is None else tuple(_ntest_label(v) for v in ntest_values)
    by_part: dict[str, dict] = {}
    for rec in recordings:
        by_part.setdefault(partition_of(rec), {})[rec.subject_id] = rec
    rotate = train_partition is None
    if rotate:
        train_parts = sorted(by_part)
    else:
        if train_partition not in by_part:
            raise InvalidConfigError(f"no recordings in partition {train_partition!r}")
        test_partitions = list(test_partitions or [p for p in by_part if p != train_partition])
        if train_partition in test_partitions:
            raise InvalidConfigError("training partition cannot also be a test partition")
        missing = [p for p in test_partitions if p not in by_part]
        if missing:
            raise InvalidConfigError(f"no recordings in partitions {missing}")
        train_parts = [train_partition]

    feats: dict[tuple, np.ndarray] = {}
    for part, recs in by_part.items():
        for sid, rec in recs.items():
            rows = _features_or_none(rec, cfg)
            if rows is not None and len(rows):
                feats[(part, sid)] = rows

    protocol = "cross-partition" if rotate else f"{train_parts[0]}->{'+'.join(test_partitions)}"
    cells = {nt: CellResult(dataset, cfg.method, protocol, nt, []) for nt in ntest_values}
    pooled = {nt: ([], []) for nt in ntest_values}
    for tp in train_parts:
        train_rows = {}
        for sid, rec in by_part[tp].items():
            src = rec if train_seconds is None else rec.slice_seconds(0, train_seconds)
            rows = feats.get((tp, sid)) if train_seconds is None else _features_or_none(src, cfg)
            if rows is not None and len(rows) >= 2:
                train_rows[sid] = rows
        if len(train_rows) < 2:
            raise InsufficientSignalError(f"fewer than two subjects enrolled from {tp}")
        gallery = build_gallery(train_rows, cfg)
        labels = gallery.labels
        tests = [p for p in by_part if p != tp] if rotate else test_partitions
        pool = sorted(by_part) if rotate else tests
        dists = {}
        for p in pool:
            for sid in labels:
                if (p, sid) in feats:
                    dists[(p, sid)] = gallery.class_distances(feats[(p, sid)])
                elif p in tests:
                    log.warning("subject %s has no usable recording in %s; excluded from that cell", sid, p)
        for nt in ntest_values:
            gen, imp = [], []
            for (p, sid), D in dists.items():
                if nt != "All" and len(D) < nt:
                    cells[nt].excluded.append(f"{sid}@{p}")
                    continue
                score = gallery.aggregate(D if nt == "All" else D[:nt], axis=0)
                own = labels.index(sid)
                if p in tests:
                    gen.append(score[own])
                imp.extend(np.delete(score, own))
            ss = ScoreSet(gen, imp, {"train_partition": tp})
            try:
                cells[nt].eers.append(eer(ss))
            except InvalidConfigError as exc:
                raise PPGAuthError(f"cell nTest={nt}, train={tp}: {exc}") from exc
            pooled[nt][0].append(ss.genuine)
            pooled[nt][1].append(ss.imposter)
    report = EvalReport()
    for nt in ntest_values:
        g, i = pooled[nt]
        cells[nt].roc = roc_export(ScoreSet(np.concatenate(g), np.concatenate(i)))
        report.cells.append(cells[nt])
    return report
