import numpy as np
import pytest

from ppgauth.config import RunConfig
from ppgauth.errors import InvalidConfigError
from ppgauth.evaluation import (RESULTS_HEADER, ScoreSet, eer, far_frr, protocol_cross_partition,
                                protocol_single_session, roc_export, trial_counts)
from ppgauth.pipeline import build_gallery, recording_features
from ppgauth.synthgen import make_cohort

from oracles import eer_sweep


class TestFarFrr:
    def test_extremes(self):
        s = ScoreSet([0.1, 0.2], [0.3, 0.4])
        assert far_frr(s, 0.0) == (0.0, 1.0)
        assert far_frr(s, 1.0) == (1.0, 0.0)
        assert far_frr(s, 0.25) == (0.0, 0.0)

    def test_empty(self):
        with pytest.raises(InvalidConfigError):
            far_frr(ScoreSet([], [0.3]), 0.1)

    def test_non_finite(self):
        with pytest.raises(InvalidConfigError):
            eer(ScoreSet([0.1, np.nan], [0.3]))


class TestEer:
    def test_separable(self):
        assert eer(ScoreSet([0.1, 0.2], [0.3, 0.4])) == 0.0

    def test_identical_lists(self):
        assert eer(ScoreSet([0.1, 0.5, 0.9], [0.1, 0.5, 0.9])) == pytest.approx(0.5)

    def test_two_point_sets(self):
        # the sweep meets FAR = FRR = 0.5 exactly at threshold 0.3
        s = ScoreSet([0.1, 0.4], [0.3, 0.9])
        assert eer(s) == 0.5
        assert eer_sweep(s.genuine, s.imposter) == 0.5

    def test_interpolated_crossing(self):
        # the tie at 0.3 moves both rates: (FAR 0, FRR 1/2) -> (1/3, 0), so
        # FAR - FRR goes -1/2 -> 1/3 and meets zero 3/5 of the way along
        s = ScoreSet([0.1, 0.3], [0.3, 0.9, 0.95])
        assert eer(s) == pytest.approx(0.2, abs=1e-15)
        assert eer_sweep(s.genuine, s.imposter) == pytest.approx(0.2, abs=1e-15)

    def test_matches_sweep_oracle(self, rng):
        for _ in range(200):
            g = rng.integers(0, 20, int(rng.integers(1, 40))) / 10
            i = rng.integers(0, 20, int(rng.integers(1, 40))) / 10
            assert eer(ScoreSet(g, i)) == pytest.approx(eer_sweep(g, i), abs=1e-9)


class TestRoc:
    def test_staircase(self):
        roc = roc_export(ScoreSet([0.1, 0.4], [0.3, 0.9]))
        assert list(roc.thresholds) == [-np.inf, 0.1, 0.3, 0.4, 0.9]
        assert list(roc.far) == [0, 0, 0.5, 0.5, 1]
        assert list(roc.frr) == [1, 0.5, 0.5, 0, 0]

    def test_separable_touches_origin(self):
        roc = roc_export(ScoreSet([0.1, 0.2], [0.3, 0.4]))
        assert np.any((roc.far == 0) & (roc.frr == 0))

    def test_identical_distributions_cross_half(self):
        roc = roc_export(ScoreSet([0.2, 0.4], [0.2, 0.4]))
        assert np.any((roc.far == 0.5) & (roc.frr == 0.5))

    def test_monotone_and_endpoints(self, rng):
        roc = roc_export(ScoreSet(rng.random(50), rng.random(70) + 0.3))
        assert np.all(np.diff(roc.far) >= 0) and np.all(np.diff(roc.frr) <= 0)
        assert roc.far[0] == 0 and roc.frr[-1] == 0

    def test_csv(self):
        text = roc_export(ScoreSet([0.1], [0.3])).to_csv()
        assert text.splitlines() == ["threshold,far,frr", "-inf,0.0,1.0", "0.1,0.0,0.0", "0.3,1.0,0.0"]


class TestTrialCounts:
    def test_three_subjects_two_emotions(self):
        parts = {"s1/emotion-1": {"A", "B", "C"}, "s1/emotion-2": {"A", "B", "C"}}
        # genuine: each subject's other-emotion recording; imposter: all six
        # recordings against the two other enrolled identities
        assert trial_counts(parts, "s1/emotion-1", rotate=True) == (3, 12)
        assert trial_counts(parts, "s1/emotion-1", rotate=False) == (3, 6)

    def test_rotation_scale(self):
        subjects = {f"S{i}" for i in range(32)}
        parts = {f"s1/emotion-{k}": subjects for k in range(40)}
        gen, imp = trial_counts(parts, "s1/emotion-0", rotate=True)
        assert (gen / 32, imp / 32) == (39, 1240)

    def test_absent_subject(self):
        parts = {"s1/relax": {"A", "B", "C"}, "s2/relax": {"A", "B"}}
        # A and B each claim the other two enrolled identities
        assert trial_counts(parts, "s1/relax", rotate=False) == (2, 4)


@pytest.fixture(scope="module")
def biosec_small():
    return [c.recording for c in make_cohort("biosec", 3, noise_level=0.02, seed=1,
                                              durations={"medium": 40.0})]


class TestProtocols:
    def test_single_session_reproducible(self, small_cohort):
        cfg = RunConfig(ntest=(2, "All"), iterations=1, seed=7)
        a = protocol_single_session(small_cohort, cfg, "toy").to_csv()
        b = protocol_single_session(small_cohort, cfg, "toy").to_csv()
        assert a == b
        assert a.splitlines()[0] == ",".join(RESULTS_HEADER)

    def test_all_has_zero_std(self, small_cohort):
        rep = protocol_single_session(small_cohort, RunConfig(ntest=(2, "All"), iterations=5))
        assert rep.cell("All").std_eer == 0 and rep.cell("All").iterations == 1
        assert rep.cell(2).iterations == 5

    def test_genuine_scores_below_imposter(self, small_cohort):
        cfg = RunConfig()
        train = {r.subject_id: recording_features(r.slice_seconds(0, 45), cfg) for r in small_cohort}
        gallery = build_gallery(train, cfg)
        gen, imp = [], []
        for r in small_cohort:
            D = gallery.class_distances(recording_features(r.slice_seconds(45), cfg))
            j = gallery.labels.index(r.subject_id)
            gen.extend(D[:, j])
            imp.extend(np.delete(D, j, axis=1).ravel())
        assert np.mean(gen) < np.mean(imp)

    def test_train_equals_test_rejected(self, biosec_small):
        with pytest.raises(InvalidConfigError):
            protocol_cross_partition(biosec_small, RunConfig(), "s1/relax", ["s1/relax"])

    def test_unknown_partition(self, biosec_small):
        with pytest.raises(InvalidConfigError):
            protocol_cross_partition(biosec_small, RunConfig(), "s9/relax")

    def test_cross_partition_cells(self, biosec_small):
        cfg = RunConfig(ntest=(2, "All"))
        rep = protocol_cross_partition(biosec_small, cfg, "s1/relax", ["s1/exercise"])
        assert [c.protocol for c in rep.cells] == ["s1/relax->s1/exercise"] * 2
        assert all(c.iterations == 1 and 0 <= c.mean_eer <= 1 for c in rep.cells)

    def test_rotation_runs_every_partition(self, biosec_small):
        rep = protocol_cross_partition(biosec_small, RunConfig(ntest=("All",)))
        assert rep.cells[0].iterations == 3
