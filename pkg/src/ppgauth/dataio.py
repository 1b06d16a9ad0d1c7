"""Dataset manifests, recording CSVs and model bundles."""
from __future__ import annotations

import csv
import io
import json
import logging
import zipfile
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import (FingerprintMismatchError, InsufficientSignalError, ManifestError,
                     PPGAuthError, UnknownIdentityError)
from .matching import decide
from .pipeline import Gallery, build_gallery, recording_features
from .preprocess import RawRecording
from .subspace import SubspaceModel

log = logging.getLogger(__name__)

MANIFEST_COLUMNS = ["file", "subject", "session", "state", "fs"]
BUNDLE_FORMAT = 1
# fixed member timestamp so identical models give identical bytes
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)
_ARRAY_FIELDS = ("W", "mean", "train_X", "coef", "gram_col_mean", "eigenvalues")


# recordings -----------------------------------------------------------------

def read_recording_csv(path) -> np.ndarray:
    """Samples from a ``t,ppg`` CSV or a headerless single-column file."""
    path = Path(path)
    with open(path, newline="") as fh:
        first = fh.readline().strip()
    try:
        float(first.split(",")[0])
        has_header = False
    except ValueError:
        has_header = True
    if has_header:
        cols = [c.strip().lower() for c in first.split(",")]
        if "ppg" not in cols:
            raise ManifestError(f"{path}: header must be 't,ppg', got {first!r}")
        col = cols.index("ppg")
    else:
        col = 0
    try:
        x = np.loadtxt(path, delimiter=",", skiprows=int(has_header), usecols=col, ndmin=1)
    except ValueError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    if not np.all(np.isfinite(x)):
        bad = int(np.argmax(~np.isfinite(x))) + 1 + int(has_header)
        raise ManifestError(f"{path}: non-finite sample on line {bad}")
    return x


def write_recording_csv(path, samples, fs: float):
    """Write ``t,ppg`` with round-trip exact sample values."""
    samples = np.asarray(samples, dtype=float)
    t = np.arange(samples.size) / fs
    np.savetxt(path, np.column_stack([t, samples]), delimiter=",", fmt="%.17g",
               header="t,ppg", comments="")


# manifests ------------------------------------------------------------------

def read_manifest(path) -> list[dict]:
    """Validated manifest rows, each with an absolute ``path`` added."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    rows, seen, missing = [], set(), []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        absent = [c for c in MANIFEST_COLUMNS if c not in (reader.fieldnames or [])]
        if absent:
            raise ManifestError(f"{path}: missing columns {absent}; need {','.join(MANIFEST_COLUMNS)}")
        for row in reader:
            line = reader.line_num
            if any(not (row.get(c) or "").strip() for c in MANIFEST_COLUMNS):
                raise ManifestError(f"{path} line {line}: empty field in {row}")
            try:
                fs = float(row["fs"])
            except ValueError:
                raise ManifestError(f"{path} line {line}: fs {row['fs']!r} is not a number") from None
            if not fs > 0:
                raise ManifestError(f"{path} line {line}: fs must be positive, got {fs:g}")
            key = (row["subject"], row["session"], row["state"], row["file"])
            if key in seen:
                raise ManifestError(f"{path} line {line}: duplicate entry {key}")
            seen.add(key)
            rec_path = (path.parent / row["file"]).resolve()
            if not rec_path.exists():
                missing.append(str(rec_path))
            rows.append({**{c: row[c].strip() for c in MANIFEST_COLUMNS[:4]}, "fs": fs,
                         "path": rec_path, "line": line})
    if missing:
        raise ManifestError("recording files not found:\n  " + "\n  ".join(missing))
    return rows


def load_dataset(manifest) -> list[RawRecording]:
    out = []
    for row in read_manifest(manifest):
        try:
            out.append(RawRecording(read_recording_csv(row["path"]), row["fs"], row["subject"],
                                    row["session"], row["state"]))
        except (ValueError, PPGAuthError) as exc:
            raise ManifestError(f"{manifest} line {row['line']}: {exc}") from exc
    return out


def write_dataset(recordings, out_dir, name: str = "manifest.csv") -> Path:
    """Write recordings as CSV files plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "recordings").mkdir(parents=True, exist_ok=True)
    manifest = out_dir / name
    with open(manifest, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for rec in recordings:
            rel = f"recordings/{rec.subject_id}_{rec.session_id}_{rec.state}.csv"
            write_recording_csv(out_dir / rel, rec.samples, rec.fs)
            w.writerow([rel, rec.subject_id, rec.session_id, rec.state, repr(float(rec.fs))])
    return manifest


# model bundles --------------------------------------------------------------

def _npy_bytes(a) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.asarray(a), allow_pickle=False)
    return buf.getvalue()


def _float_or_none(v):
    return None if v is None else float(v)


def _put(zf: zipfile.ZipFile, name: str, data: bytes):
    info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def save_gallery(gallery: Gallery, path):
    """Write a self-describing model bundle (zip of ``.npy`` arrays plus JSON)."""
    m = gallery.model
    meta = {
        "format": BUNDLE_FORMAT,
        "version": __version__,
        "method": m.method,
        "L": m.L,
        "m": m.m,
        "classes": list(m.classes),
        "sigma": _float_or_none(m.sigma),
        "kernel": m.kernel,
        "gram_mean": _float_or_none(m.gram_mean),
        "model_meta": m.meta,
        "config": gallery.cfg.to_dict(),
        "fingerprint": gallery.cfg.fingerprint(),
    }
    with zipfile.ZipFile(path, "w") as zf:
        _put(zf, "metadata.json", (json.dumps(meta, indent=2, sort_keys=True) + "\n").encode())
        for name in _ARRAY_FIELDS:
            value = getattr(m, name)
            if value is not None:
                _put(zf, f"{name}.npy", _npy_bytes(value))
        for i, c in enumerate(m.classes):
            _put(zf, f"templates/{i:05d}.npy", _npy_bytes(m.templates[c]))


def load_gallery(path) -> Gallery:
    try:
        zf = zipfile.ZipFile(path)
    except (OSError, zipfile.BadZipFile) as exc:
        raise PPGAuthError(f"cannot read model bundle {path}: {exc}") from exc
    with zf:
        meta = json.loads(zf.read("metadata.json"))
        if meta.get("format") != BUNDLE_FORMAT:
            raise PPGAuthError(f"{path}: unsupported bundle format {meta.get('format')}")
        names = set(zf.namelist())
        arrays = {n: np.load(io.BytesIO(zf.read(f"{n}.npy")), allow_pickle=False)
                  for n in _ARRAY_FIELDS if f"{n}.npy" in names}
        templates = {c: np.load(io.BytesIO(zf.read(f"templates/{i:05d}.npy")), allow_pickle=False)
                     for i, c in enumerate(meta["classes"])}
    cfg = RunConfig.from_dict(meta["config"])
    if cfg.fingerprint() != meta["fingerprint"]:
        raise FingerprintMismatchError(f"{path}: stored fingerprint does not match stored config")
    model = SubspaceModel(meta["method"], meta["L"], meta["m"], meta["classes"], sigma=meta["sigma"],
                          kernel=meta["kernel"], gram_mean=meta["gram_mean"], templates=templates,
                          meta=meta["model_meta"], **arrays)
    return Gallery(model, cfg)


def check_fingerprint(gallery: Gallery, cfg: RunConfig):
    """Refuse to score features made under different settings than the gallery."""
    want, got = gallery.cfg.fingerprint(), cfg.fingerprint()
    if want != got:
        stored, asked = gallery.cfg.feature_config(), cfg.feature_config()
        diff = sorted(k for k in stored if stored[k] != asked[k])
        raise FingerprintMismatchError(
            f"model was enrolled with fingerprint {want}, this run has {got} (differs in: {', '.join(diff)})"
        )


# workflows ------------------------------------------------------------------

def enrollment_recordings(recordings, partition: str | None = None) -> list[RawRecording]:
    """One recording per subject: the first in manifest order, optionally
    restricted to a ``session/state`` partition."""
    chosen = {}
    for rec in recordings:
        if partition is not None and f"{rec.session_id}/{rec.state}" != partition:
            continue
        chosen.setdefault(rec.subject_id, rec)
    return list(chosen.values())


def enroll(cfg: RunConfig, recordings, path=None, partition: str | None = None) -> Gallery:
    """Fit a gallery on the first ``train_seconds`` of each subject's
    enrollment recording and optionally write it to ``path``."""
    recs = enrollment_recordings(recordings, partition)
    rows, failed = {}, []
    for rec in recs:
        if rec.duration < cfg.train_seconds:
            failed.append(f"{rec.subject_id} (only {rec.duration:.1f} s)")
            continue
        try:
            feats = recording_features(rec.slice_seconds(0, cfg.train_seconds), cfg)
        except InsufficientSignalError as exc:
            failed.append(f"{rec.subject_id} ({exc})")
            continue
        if len(feats) < 2:
            failed.append(f"{rec.subject_id} ({len(feats)} usable segment)")
            continue
        rows[rec.subject_id] = feats
    if failed:
        raise InsufficientSignalError("enrollment failed for: " + "; ".join(failed))
    if len(rows) < 2:
        raise InsufficientSignalError("enrollment needs at least two subjects")
    gallery = build_gallery(rows, cfg)
    if path is not None:
        save_gallery(gallery, path)
    return gallery


def verify(gallery: Gallery, rec: RawRecording, claimed_id: str, threshold: float,
           ntest=2) -> dict:
    """Score one claim from the first ``ntest`` feature vectors of ``rec``."""
    if claimed_id not in gallery.model.templates:
        raise UnknownIdentityError(f"{claimed_id!r} is not enrolled")
    feats = recording_features(rec, gallery.cfg)
    if ntest != "All":
        if len(feats) < int(ntest):
            raise InsufficientSignalError(f"recording yields {len(feats)} feature vectors, claim needs {ntest}")
        feats = feats[:int(ntest)]
    per_vector = gallery.class_distances(feats)[:, gallery.labels.index(claimed_id)]
    score = float(gallery.aggregate(per_vector))
    return {
        "claimed_id": claimed_id,
        "score": score,
        "threshold": float(threshold),
        "decision": decide(score, threshold),
        "n_vectors": int(len(feats)),
        "method": gallery.cfg.method,
        "fingerprint": gallery.cfg.fingerprint(),
    }
