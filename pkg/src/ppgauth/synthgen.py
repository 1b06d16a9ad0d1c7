"""Synthetic PPG cohorts with per-subject morphology and known beat positions.

Each beat is the sum of a systolic and a diastolic Gaussian placed at fixed
fractions of the beat period. Subjects differ in those shape parameters and
in heart rate; recording states perturb them the way exercise and time lapse
perturb real PPG.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError
from .preprocess import RawRecording

# (low, high) for every sampled parameter; the first group defines identity
IDENTITY_BOX = {
    "sys_width": (0.045, 0.09),
    "dia_amp": (0.25, 0.75),
    "dia_width": (0.07, 0.15),
    "dia_pos": (0.42, 0.62),
    "base_hr": (55.0, 95.0),
    "notch_amp": (0.0, 0.25),
}
NUISANCE_BOX = {
    "sys_amp": (0.8, 1.2),
    "sys_pos": (0.18, 0.28),
    "hrv": (0.5, 2.5),
    "exercise_gain": (30.0, 50.0),
    "drift_gain": (0.08, 0.20),
}

# exercise pulls the diastolic wave this much closer to the systolic one
EXERCISE_DIASTOLIC_COMPRESSION = 0.75


@dataclass(frozen=True)
class SubjectProfile:
    sys_amp: float
    sys_width: float
    sys_pos: float
    dia_amp: float
    dia_width: float
    dia_pos: float
    base_hr: float
    hrv: float
    exercise_gain: float
    drift_gain: float
    notch_amp: float = 0.0
    subject_id: str = ""

    def __post_init__(self):
        if self.sys_amp <= 0 or self.dia_amp <= 0:
            raise InvalidConfigError("wave amplitudes must be positive")
        if not 0 < self.sys_pos < self.dia_pos < 1:
            raise InvalidConfigError("need 0 < sys_pos < dia_pos < 1")
        if not 40 <= self.base_hr <= 200:
            raise InvalidConfigError("base_hr must lie in [40, 200] bpm")

    def identity_vector(self) -> np.ndarray:
        """Identity parameters scaled to the unit box."""
        return np.array([
            (getattr(self, k) - lo) / (hi - lo) for k, (lo, hi) in IDENTITY_BOX.items()
        ])


@dataclass(frozen=True)
class SyntheticRecording:
    recording: RawRecording
    systolic_indices: np.ndarray
    profile: SubjectProfile


def sample_cohort(n_subjects: int, seed: int = 0, min_separation: float = 0.35,
                  max_tries: int = 20000) -> list[SubjectProfile]:
    """Draw profiles whose identity vectors are at least ``min_separation``
    apart (Euclidean, in the unit box)."""
    if n_subjects < 2:
        raise InvalidConfigError("a cohort needs at least two subjects")
    diameter = np.sqrt(len(IDENTITY_BOX))
    if min_separation >= diameter:
        raise InvalidConfigError(
            f"separation {min_separation} is not below the parameter-box diameter {diameter:.3f}"
        )
    rng = np.random.default_rng(seed)
    profiles, points = [], []
    tries = 0
    while len(profiles) < n_subjects:
        tries += 1
        if tries > max_tries:
            raise InvalidConfigError(
                f"could not place {n_subjects} subjects {min_separation} apart; lower the separation"
            )
        u = rng.random(len(IDENTITY_BOX))
        if points and np.min(np.linalg.norm(np.asarray(points) - u, axis=1)) < min_separation:
            continue
        params = {k: lo + ui * (hi - lo) for ui, (k, (lo, hi)) in zip(u, IDENTITY_BOX.items())}
        params.update({k: rng.uniform(lo, hi) for k, (lo, hi) in NUISANCE_BOX.items()})
        points.append(u)
        profiles.append(SubjectProfile(**params, subject_id=f"S{len(profiles) + 1:02d}"))
    return profiles


def _state_profile(profile: SubjectProfile, state: str, rng) -> tuple[SubjectProfile, float]:
    """Morphology and mean heart rate for a recording state."""
    p = profile
    if state == "relax":
        return p, p.base_hr
    if state == "exercise":
        gap = (p.dia_pos - p.sys_pos) * EXERCISE_DIASTOLIC_COMPRESSION
        return dataclasses.replace(p, dia_pos=p.sys_pos + gap), p.base_hr + p.exercise_gain
    if state == "timelapse" or state.startswith("emotion-"):
        gain = p.drift_gain if state == "timelapse" else 0.25 * p.drift_gain
        jit = 1.0 + gain * rng.standard_normal(5)
        sys_w, dia_a, dia_w, notch = (p.sys_width * jit[0], p.dia_amp * jit[1],
                                      p.dia_width * jit[2], p.notch_amp * abs(jit[4]))
        dia_pos = min(0.9, max(p.sys_pos + 0.1, p.dia_pos * jit[3]))
        q = dataclasses.replace(p, sys_width=sys_w, dia_amp=max(dia_a, 0.05), dia_width=dia_w,
                                dia_pos=dia_pos, notch_amp=notch)
        return q, p.base_hr
    raise InvalidConfigError(f"unknown synthetic state {state!r}")


def render(profile: SubjectProfile, duration_s: float, fs: float, state: str = "relax",
           noise_level: float = 0.0, seed: int = 0, session_id: str = "s1",
           artifact_bursts: int = 0, constant_hr: bool = False) -> SyntheticRecording:
    """Render one recording.

    ``state`` is ``relax``, ``exercise``, ``emotion-<k>`` or ``timelapse``;
    the latter is a relax recording whose morphology drifted, and is labelled
    ``relax`` in the output. Noise is white Gaussian plus a 0.2 Hz baseline
    wander, both scaled by ``noise_level``. ``artifact_bursts`` adds that many
    short spikes, for exercising false peak removal.
    """
    if duration_s < 10:
        raise InvalidConfigError("synthetic recordings must last at least 10 s")
    rng = np.random.default_rng(seed)
    shape, hr = _state_profile(profile, state, rng)
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    x = np.zeros(n)

    onsets, periods = [], []
    t0 = -rng.random() * 60.0 / hr
    while t0 < duration_s:
        beat_hr = hr if constant_hr else float(np.clip(hr + profile.hrv * rng.standard_normal(), 40, 200))
        T = 60.0 / beat_hr
        onsets.append(t0)
        periods.append(T)
        t0 += T

    waves = [(shape.sys_amp, shape.sys_pos, shape.sys_width),
             (shape.sys_amp * shape.dia_amp, shape.dia_pos, shape.dia_width)]
    if shape.notch_amp > 0:
        notch_pos = 0.5 * (shape.sys_pos + shape.sys_width + shape.dia_pos - shape.dia_width)
        waves.append((-shape.sys_amp * shape.notch_amp, notch_pos, 0.3 * shape.dia_width))
    systolic = []
    for t_on, T in zip(onsets, periods):
        for amp, pos, width in waves:
            c, s = t_on + pos * T, width * T
            lo, hi = max(0, int((c - 6 * s) * fs)), min(n, int((c + 6 * s) * fs) + 2)
            if hi > lo:
                x[lo:hi] += amp * np.exp(-0.5 * ((t[lo:hi] - c) / s) ** 2)
        c = t_on + shape.sys_pos * T
        if 0 <= c * fs < n:
            systolic.append(int(round(c * fs)))

    if noise_level > 0:
        x += noise_level * shape.sys_amp * rng.standard_normal(n)
        x += 2 * noise_level * shape.sys_amp * np.sin(2 * np.pi * 0.2 * t + 2 * np.pi * rng.random())
    for _ in range(artifact_bursts):
        c = rng.uniform(0.1, 0.9) * duration_s
        x += 1.5 * shape.sys_amp * np.exp(-0.5 * ((t - c) / 0.015) ** 2)

    rec_state = "relax" if state == "timelapse" else state
    rec = RawRecording(x, fs, profile.subject_id, session_id, rec_state)
    return SyntheticRecording(rec, np.asarray(systolic, dtype=np.int64), profile)


def recording_seed(seed: int, subject_index: int, tag: str) -> list[int]:
    """Entropy for one recording's RNG stream, independent of generation order."""
    return [int(seed), int(subject_index), sum(ord(ch) * 31**i for i, ch in enumerate(tag)) % (2**31)]


LAYOUTS = {
    # name: list of (session, render state, duration key)
    "capnobase": [("s1", "relax", "long")],
    "biosec": [("s1", "relax", "medium"), ("s1", "exercise", "medium"), ("s2", "timelapse", "medium")],
}


def make_cohort(layout: str = "capnobase", n_subjects: int = 42, fs: float = 300.0,
                noise_level: float = 0.05, seed: int = 0, n_emotions: int = 40,
                durations: dict | None = None, min_separation: float = 0.35) -> list[SyntheticRecording]:
    """A whole synthetic dataset shaped like one of the evaluation layouts.

    ``capnobase`` is one 8-minute relax recording per subject; ``biosec`` has
    3-minute relax, exercise and second-session recordings; ``deap`` has
    ``n_emotions`` one-minute emotion recordings per subject.
    """
    dur = {"long": 480.0, "medium": 180.0, "short": 60.0}
    dur.update(durations or {})
    profiles = sample_cohort(n_subjects, seed, min_separation)
    if layout == "deap":
        plan = [("s1", f"emotion-{k + 1}", "short") for k in range(n_emotions)]
    elif layout in LAYOUTS:
        plan = LAYOUTS[layout]
    else:
        raise InvalidConfigError(f"unknown layout {layout!r}")
    out = []
    for i, prof in enumerate(profiles):
        for session, state, dkey in plan:
            rs = recording_seed(seed, i, f"{session}/{state}")
            out.append(render(prof, dur[dkey], fs, state, noise_level, rs, session))
    return out
