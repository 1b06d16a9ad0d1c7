"""Run configuration: every tunable of the pipeline in one serialisable record."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidConfigError
from .features import ScalePolicy

METHODS = ("cwt-dlda", "cwt-lda", "cwt-pca", "cwt-kpca", "cwt-kdda", "openset", "ac-lda")

# fields that change how a recording turns into feature vectors
FEATURE_FIELDS = (
    "filter_low_hz", "filter_high_hz", "filter_order", "transient_s",
    "prominence", "hr_bands",
    "morse_gamma", "morse_beta", "grid_f_min", "grid_f_max", "voices_per_octave",
    "scale_policy", "coefficient",
    "ac_window_s", "ac_overlap", "ac_hr_typical", "ac_lag_factor", "ac_lag_rate",
)


@dataclass(frozen=True)
class RunConfig:
    filter_low_hz: float = 0.5
    filter_high_hz: float = 5.0
    filter_order: int = 38
    transient_s: float = 2.0
    prominence: float = 0.25
    hr_bands: dict = field(default_factory=lambda: {"relax": [40.0, 140.0], "exercise": [40.0, 200.0]})

    morse_gamma: float = 3.0
    morse_beta: float = 20.0
    grid_f_min: float = 0.25
    grid_f_max: float = 8.0
    voices_per_octave: int = 8
    scale_policy: str = "band:1:2"
    coefficient: str = "magnitude"

    method: str = "cwt-dlda"
    m: int | None = None
    kernel_sigma: float | None = None
    aggregation: str = "min-mean"

    ac_window_s: float = 5.0
    ac_overlap: float = 0.5
    ac_hr_typical: float = 60.0
    ac_lag_factor: float = 1.2
    ac_lag_rate: float = 50.0

    train_seconds: float = 45.0
    ntest: tuple = (2, 5, 10, 20, "All")
    iterations: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.coefficient not in ("magnitude", "real"):
            raise InvalidConfigError("coefficient must be 'magnitude' or 'real'")
        if self.filter_order % 2:
            raise InvalidConfigError("filter_order must be even")
        ScalePolicy.parse(self.scale_policy)
        ntest = tuple(v if v == "All" else int(v) for v in self.ntest)
        if any(v != "All" and v < 1 for v in ntest):
            raise InvalidConfigError("nTest values must be positive or 'All'")
        object.__setattr__(self, "ntest", ntest)
        if self.iterations < 1:
            raise InvalidConfigError("iterations must be at least 1")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["ntest"] = list(self.ntest)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "ntest" in data:
            data["ntest"] = tuple(data["ntest"])
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"{path}: {exc}") from exc

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def feature_config(self) -> dict:
        d = self.to_dict()
        return {k: d[k] for k in FEATURE_FIELDS}

    def fingerprint(self) -> str:
        """Hash of the settings that shape feature vectors."""
        blob = json.dumps(self.feature_config(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def hr_band(self, state: str) -> tuple[float, float]:
        key = "exercise" if state == "exercise" else "relax"
        lo, hi = self.hr_bands[key]
        return float(lo), float(hi)
