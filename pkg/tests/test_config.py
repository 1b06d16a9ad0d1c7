import pytest

from ppgauth.config import RunConfig
from ppgauth.errors import InvalidConfigError


def test_round_trip(tmp_path):
    cfg = RunConfig(method="cwt-kpca", kernel_sigma=2.5, ntest=(2, "All"), seed=11)
    path = tmp_path / "cfg.json"
    cfg.save(path)
    assert RunConfig.load(path) == cfg
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


def test_unknown_key():
    with pytest.raises(InvalidConfigError, match="morse_alpha"):
        RunConfig.from_dict({"morse_alpha": 3})


@pytest.mark.parametrize("bad", [
    {"method": "svm"}, {"coefficient": "phase"}, {"filter_order": 37},
    {"scale_policy": "band:2"}, {"ntest": (0,)}, {"iterations": 0},
])
def test_validation(bad):
    with pytest.raises(InvalidConfigError):
        RunConfig(**bad)


def test_malformed_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(InvalidConfigError):
        RunConfig.load(path)


def test_fingerprint_tracks_feature_fields_only():
    base = RunConfig()
    assert base.fingerprint() == RunConfig(method="cwt-pca", iterations=3, seed=9).fingerprint()
    assert base.fingerprint() != RunConfig(morse_beta=30.0).fingerprint()
    assert base.fingerprint() != RunConfig(scale_policy="index:20").fingerprint()


def test_hr_band():
    cfg = RunConfig()
    assert cfg.hr_band("exercise") == (40.0, 200.0)
    assert cfg.hr_band("emotion-3") == cfg.hr_band("relax") == (40.0, 140.0)
