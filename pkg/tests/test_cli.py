import json
import subprocess
import sys
from pathlib import Path

import pytest

from ppgauth.cli import EXIT_ERROR, EXIT_OK, EXIT_REJECT, EXIT_USAGE, main

GOLDEN = Path(__file__).parent / "golden" / "results.csv"
SYNTH = ["synth", "--layout", "capnobase", "--subjects", "4", "--noise", "0.05", "--seed", "3",
         "--duration", "75"]
EVAL = ["evaluate", "--protocol", "single-session", "--ntest", "2,All", "--iterations", "3",
        "--methods", "cwt-dlda,openset,ac-lda", "--dataset", "toy"]


def run_pipeline(root: Path) -> Path:
    data, out = root / "data", root / "out"
    assert main(SYNTH + ["--out", str(data)]) == EXIT_OK
    assert main(["enroll", "--manifest", str(data / "manifest.csv"), "--out", str(root / "model.zip")]) == EXIT_OK
    assert main(EVAL + ["--manifest", str(data / "manifest.csv"), "--out", str(out),
                        "--model", str(root / "model.zip")]) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    run_pipeline(root)
    return root


def test_help_exits_zero(capsys):
    assert main(["evaluate", "--help"]) == EXIT_OK
    assert "--protocol" in capsys.readouterr().out


def test_unknown_subcommand():
    assert main(["transmogrify"]) == EXIT_USAGE
    assert main(["evaluate", "--bogus-flag"]) == EXIT_USAGE


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ppgauth", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("ppgauth ")


def test_golden_results(workspace):
    text = (workspace / "out" / "results.csv").read_text()
    assert text.splitlines()[0] == "dataset,method,protocol,nTest,mean_eer,std_eer,iterations"
    assert text == GOLDEN.read_text()


def test_roc_files(workspace):
    roc = workspace / "out" / "roc" / "cwt_dlda__single_session__nAll.csv"
    assert roc.read_text().splitlines()[0] == "threshold,far,frr"
    assert len(list((workspace / "out" / "roc").glob("*.csv"))) == 6


def test_synth_truth(workspace):
    truth = json.loads((workspace / "data" / "truth.json").read_text())
    assert truth["seed"] == 3 and len(truth["systolic_indices"]) == 4


def verify_args(ws, claim, *extra):
    return ["verify", "--model", str(ws / "model.zip"), "--claim", claim,
            "--recording", str(ws / "data" / "recordings" / "S02_s1_relax.csv"), "--fs", "300", *extra]


def test_verify_accept_and_reject(workspace, capsys):
    code = main(verify_args(workspace, "S02", "--threshold", "2"))
    rec = json.loads(capsys.readouterr().out)
    assert code == EXIT_OK and rec["decision"] == "accept" and rec["claimed_id"] == "S02"
    assert main(verify_args(workspace, "S02", "--threshold", "-1")) == EXIT_REJECT


def test_verify_errors(workspace, capsys):
    assert main(verify_args(workspace, "S99")) == EXIT_ERROR
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "UnknownIdentityError"
    assert main(verify_args(workspace, "S02", "--set", "morse_beta=25")) == EXIT_ERROR
    assert json.loads(capsys.readouterr().err)["error"] == "FingerprintMismatchError"


def test_bad_manifest(tmp_path, capsys):
    (tmp_path / "m.csv").write_text("file,subject,session,state,fs\nx.csv,S1,s1,relax,300\n")
    assert main(["enroll", "--manifest", str(tmp_path / "m.csv"), "--out", str(tmp_path / "m.zip")]) == EXIT_ERROR
    assert "x.csv" in json.loads(capsys.readouterr().err)["message"]


def test_dump_scalogram(workspace, tmp_path):
    out = tmp_path / "scalo.csv"
    rec = workspace / "data" / "recordings" / "S01_s1_relax.csv"
    assert main(["dump-scalogram", "--recording", str(rec), "--fs", "300", "--segment", "1",
                 "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0].startswith("scale_s,center_hz,c0,")
    assert len(lines) == 1 + 41


def test_config_file_layering(tmp_path, workspace):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"iterations": 2, "ntest": [2]}))
    out = tmp_path / "o"
    assert main(["evaluate", "--manifest", str(workspace / "data" / "manifest.csv"), "--out", str(out),
                 "--config", str(cfg), "--iterations", "4"]) == EXIT_OK
    rows = (out / "results.csv").read_text().splitlines()
    assert len(rows) == 2 and rows[1].endswith(",4")
