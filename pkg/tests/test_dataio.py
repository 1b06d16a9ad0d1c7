import numpy as np
import pytest

from ppgauth.config import RunConfig
from ppgauth.dataio import (check_fingerprint, enroll, load_dataset, load_gallery, read_manifest,
                            read_recording_csv, save_gallery, verify, write_dataset,
                            write_recording_csv)
from ppgauth.errors import (FingerprintMismatchError, InsufficientSignalError, ManifestError,
                            UnknownIdentityError)
from ppgauth.preprocess import RawRecording
from ppgauth.synthgen import make_cohort


@pytest.fixture(scope="module")
def cohort():
    return [c.recording for c in make_cohort("capnobase", 4, noise_level=0.03, seed=2,
                                              durations={"long": 60.0})]


def write_manifest(path, rows):
    path.write_text("file,subject,session,state,fs\n" + "".join(",".join(r) + "\n" for r in rows))
    return path


class TestRecordings:
    def test_round_trip(self, tmp_path, rng):
        x = rng.standard_normal(500)
        write_recording_csv(tmp_path / "r.csv", x, 125.0)
        assert read_recording_csv(tmp_path / "r.csv").tobytes() == x.tobytes()

    def test_headerless(self, tmp_path):
        (tmp_path / "r.csv").write_text("1.5\n2.5\n-3\n")
        assert list(read_recording_csv(tmp_path / "r.csv")) == [1.5, 2.5, -3.0]

    def test_non_finite(self, tmp_path):
        (tmp_path / "r.csv").write_text("t,ppg\n0,1\n0.1,nan\n")
        with pytest.raises(ManifestError, match="line 3"):
            read_recording_csv(tmp_path / "r.csv")

    def test_wrong_header(self, tmp_path):
        (tmp_path / "r.csv").write_text("time,signal\n0,1\n")
        with pytest.raises(ManifestError):
            read_recording_csv(tmp_path / "r.csv")


class TestManifest:
    def test_two_rows(self, tmp_path):
        for name in ("a.csv", "b.csv"):
            (tmp_path / name).write_text("\n".join(["0.5"] * 20) + "\n")
        m = write_manifest(tmp_path / "m.csv", [["a.csv", "S1", "s1", "relax", "10"],
                                                 ["b.csv", "S2", "s1", "relax", "10"]])
        recs = load_dataset(m)
        assert [r.subject_id for r in recs] == ["S1", "S2"] and recs[0].fs == 10.0

    def test_zero_fs_names_row(self, tmp_path):
        (tmp_path / "a.csv").write_text("1\n2\n")
        m = write_manifest(tmp_path / "m.csv", [["a.csv", "S1", "s1", "relax", "300"],
                                                 ["a.csv", "S2", "s1", "relax", "0"]])
        with pytest.raises(ManifestError, match="line 3"):
            read_manifest(m)

    def test_missing_files_listed(self, tmp_path):
        m = write_manifest(tmp_path / "m.csv", [["gone1.csv", "S1", "s1", "relax", "300"],
                                                 ["gone2.csv", "S2", "s1", "relax", "300"]])
        with pytest.raises(ManifestError) as info:
            read_manifest(m)
        assert "gone1.csv" in str(info.value) and "gone2.csv" in str(info.value)

    def test_missing_column(self, tmp_path):
        (tmp_path / "m.csv").write_text("file,subject,fs\n")
        with pytest.raises(ManifestError, match="session"):
            read_manifest(tmp_path / "m.csv")

    def test_duplicate_row(self, tmp_path):
        (tmp_path / "a.csv").write_text("1\n2\n")
        row = ["a.csv", "S1", "s1", "relax", "300"]
        with pytest.raises(ManifestError, match="duplicate"):
            read_manifest(write_manifest(tmp_path / "m.csv", [row, row]))

    def test_dataset_round_trip(self, tmp_path, cohort):
        back = load_dataset(write_dataset(cohort, tmp_path))
        assert len(back) == len(cohort)
        for a, b in zip(cohort, back):
            assert a.samples.tobytes() == b.samples.tobytes()
            assert (a.subject_id, a.session_id, a.state, a.fs) == (b.subject_id, b.session_id, b.state, b.fs)


class TestBundles:
    def test_enroll_shape(self, cohort):
        g = enroll(RunConfig(), cohort)
        assert (len(g.model.classes), g.model.m) == (4, 3)

    def test_byte_identical_reenrollment(self, tmp_path, cohort):
        enroll(RunConfig(), cohort, tmp_path / "a.zip")
        enroll(RunConfig(), cohort, tmp_path / "b.zip")
        assert (tmp_path / "a.zip").read_bytes() == (tmp_path / "b.zip").read_bytes()

    @pytest.mark.parametrize("method", ["cwt-dlda", "cwt-kpca", "cwt-kdda", "openset", "ac-lda"])
    def test_round_trip_projections(self, tmp_path, cohort, method, rng):
        g = enroll(RunConfig(method=method), cohort)
        save_gallery(g, tmp_path / "g.zip")
        h = load_gallery(tmp_path / "g.zip")
        V = rng.standard_normal((5, g.model.L))
        assert np.allclose(g.model.project_many(V), h.model.project_many(V), rtol=0, atol=1e-15)
        assert h.cfg == g.cfg and list(h.model.templates) == list(g.model.templates)

    def test_fingerprint_mismatch(self, cohort):
        g = enroll(RunConfig(), cohort)
        check_fingerprint(g, RunConfig(method="cwt-pca"))
        with pytest.raises(FingerprintMismatchError, match="morse_beta"):
            check_fingerprint(g, RunConfig(morse_beta=25.0))

    def test_short_subject_named(self, cohort):
        short = RawRecording(cohort[0].samples[:300 * 20], 300.0, "SHORT")
        with pytest.raises(InsufficientSignalError, match="SHORT"):
            enroll(RunConfig(), cohort + [short])

    def test_verify(self, cohort):
        g = enroll(RunConfig(), cohort)
        probe = cohort[1].slice_seconds(45)
        rec = verify(g, probe, cohort[1].subject_id, 0.3)
        assert rec["n_vectors"] == 2 and rec["decision"] in ("accept", "reject")
        other = verify(g, probe, cohort[2].subject_id, 0.3)
        assert rec["score"] < other["score"]
        with pytest.raises(UnknownIdentityError):
            verify(g, probe, "nobody", 0.3)
