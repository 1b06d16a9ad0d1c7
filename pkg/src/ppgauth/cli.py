"""Command-line entry point: synth, enroll, verify, evaluate, dump-scalogram."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import METHODS, RunConfig
from .errors import InvalidConfigError, PPGAuthError

log = logging.getLogger("ppgauth")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_REJECT = 0, 1, 2, 3

# flag -> (config field, parser)
_OVERRIDES = {
    "method": ("method", str),
    "m": ("m", int),
    "kernel_sigma": ("kernel_sigma", float),
    "aggregation": ("aggregation", str),
    "scale_policy": ("scale_policy", str),
    "coefficient": ("coefficient", str),
    "train_seconds": ("train_seconds", float),
    "iterations": ("iterations", int),
    "seed": ("seed", int),
    "prominence": ("prominence", float),
    "filter_order": ("filter_order", int),
}


def _ntest_list(text: str) -> tuple:
    out = []
    for part in text.split(","):
        part = part.strip()
        if part.lower() == "all":
            out.append("All")
        else:
            try:
                out.append(int(part))
            except ValueError:
                raise argparse.ArgumentTypeError(f"bad nTest value {part!r}") from None
    return tuple(out)


def _config_options(p: argparse.ArgumentParser):
    g = p.add_argument_group("configuration")
    g.add_argument("--config", type=Path, help="JSON run configuration")
    g.add_argument("--method", choices=METHODS)
    g.add_argument("--m", type=int, help="subspace dimension (default K-1)")
    g.add_argument("--kernel-sigma", type=float)
    g.add_argument("--aggregation", choices=["min-mean", "mean-mean", "min-min"])
    g.add_argument("--scale-policy", help="'band:LO:HI' in Hz or 'index:K' (1-based)")
    g.add_argument("--coefficient", choices=["magnitude", "real"])
    g.add_argument("--train-seconds", type=float)
    g.add_argument("--ntest", type=_ntest_list, help="comma list, e.g. 2,5,10,20,All")
    g.add_argument("--iterations", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--prominence", type=float)
    g.add_argument("--filter-order", type=int)
    g.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                   help="override any config field, e.g. --set morse_beta=30")


def _has_overrides(args) -> bool:
    return (args.config is not None or args.ntest is not None or bool(args.set)
            or any(getattr(args, k) is not None for k in _OVERRIDES))


def build_config(args, base: RunConfig | None = None) -> RunConfig:
    data = (base or RunConfig()).to_dict()
    if args.config is not None:
        try:
            data.update(json.loads(args.config.read_text()))
        except OSError as exc:
            raise InvalidConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"{args.config}: {exc}") from exc
    for flag, (key, _) in _OVERRIDES.items():
        value = getattr(args, flag)
        if value is not None:
            data[key] = value
    if args.ntest is not None:
        data["ntest"] = list(args.ntest)
    for item in args.set:
        key, sep, raw = item.partition("=")
        if not sep:
            raise InvalidConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            data[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            data[key.strip()] = raw
    return RunConfig.from_dict(data)


def _emit(obj, path: Path | None = None):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is not None:
        path.write_text(text + "\n")
    print(text)


def _single_recording(args):
    from .dataio import read_recording_csv
    from .preprocess import RawRecording

    x = read_recording_csv(args.recording)
    return RawRecording(x, args.fs, args.subject or "unknown", args.session, args.state)


# subcommands ----------------------------------------------------------------

def cmd_synth(args) -> int:
    from .dataio import write_dataset
    from .synthgen import make_cohort

    durations = {"long": args.duration, "medium": args.duration, "short": args.duration} if args.duration else None
    cohort = make_cohort(args.layout, args.subjects, args.fs, args.noise, args.seed,
                         n_emotions=args.emotions, durations=durations)
    manifest = write_dataset([c.recording for c in cohort], args.out)
    truth = {
        "layout": args.layout, "seed": args.seed, "noise_level": args.noise, "fs": args.fs,
        "systolic_indices": {
            f"{c.recording.subject_id}/{c.recording.session_id}/{c.recording.state}": c.systolic_indices.tolist()
            for c in cohort
        },
    }
    (Path(args.out) / "truth.json").write_text(json.dumps(truth, sort_keys=True) + "\n")
    print(f"wrote {len(cohort)} recordings for {args.subjects} subjects to {manifest}")
    return EXIT_OK


def cmd_enroll(args) -> int:
    from .dataio import enroll, load_dataset

    cfg = build_config(args)
    recs = load_dataset(args.manifest)
    gallery = enroll(cfg, recs, args.out, args.partition)
    m = gallery.model
    _emit({"model": str(args.out), "method": cfg.method, "K": len(m.classes), "m": m.m, "L": m.L,
           "fingerprint": cfg.fingerprint()})
    return EXIT_OK


def cmd_verify(args) -> int:
    from .dataio import check_fingerprint, load_gallery, verify

    gallery = load_gallery(args.model)
    if _has_overrides(args):
        check_fingerprint(gallery, build_config(args, gallery.cfg))
    rec = _single_recording(args)
    ntest = "All" if str(args.n).lower() == "all" else int(args.n)
    record = verify(gallery, rec, args.claim, args.threshold, ntest)
    _emit(record, args.out)
    return EXIT_OK if record["decision"] == "accept" else EXIT_REJECT


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_")


def _plot_rocs(cells, path: Path):
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "ppgauth"
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 5))
    for c in cells:
        ax.plot(c.roc.far * 100, c.roc.frr * 100, drawstyle="steps-post",
                label=f"{c.method} {c.protocol} nTest={c.ntest}")
    ax.plot([0, 100], [0, 100], color="0.7", lw=0.8, ls=":")
    ax.set_xlabel("FAR (%)")
    ax.set_ylabel("FRR (%)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_evaluate(args) -> int:
    from .dataio import check_fingerprint, load_dataset, load_gallery
    from .evaluation import EvalReport, protocol_cross_partition, protocol_single_session

    base = None
    if args.model is not None:
        gallery = load_gallery(args.model)
        base = gallery.cfg
        check_fingerprint(gallery, build_config(args, base))
    cfg = build_config(args, base)
    recs = load_dataset(args.manifest)
    dataset = args.dataset or Path(args.manifest).resolve().parent.name
    methods = args.methods.split(",") if args.methods else [cfg.method]
    out = Path(args.out)
    (out / "roc").mkdir(parents=True, exist_ok=True)

    report, failures = EvalReport(), []
    for method in methods:
        mcfg = cfg.replace(method=method.strip())
        try:
            if args.protocol == "single-session":
                part = [r for r in recs if args.train_partition is None
                        or f"{r.session_id}/{r.state}" == args.train_partition]
                rep = protocol_single_session(part, mcfg, dataset)
            else:
                tests = args.test_partitions.split(",") if args.test_partitions else None
                rep = protocol_cross_partition(recs, mcfg, args.train_partition, tests, dataset,
                                               train_seconds=args.train_window)
        except PPGAuthError as exc:
            failures.append({"method": mcfg.method, "error": type(exc).__name__, "message": str(exc)})
            log.error("%s: %s", mcfg.method, exc)
            continue
        report.extend(rep)

    (out / "results.csv").write_text(report.to_csv())
    for c in report.cells:
        name = f"{_slug(c.method)}__{_slug(c.protocol)}__n{c.ntest}.csv"
        (out / "roc" / name).write_text(c.roc.to_csv())
    if args.plot and report.cells:
        _plot_rocs(report.cells, out / "roc.svg")

    print(f"{'method':<10} {'protocol':<28} {'nTest':>5} {'mean EER %':>10} {'std %':>7} {'iter':>4}")
    for c in report.cells:
        print(f"{c.method:<10} {c.protocol:<28} {str(c.ntest):>5} {100 * c.mean_eer:>10.2f} "
              f"{100 * c.std_eer:>7.2f} {c.iterations:>4}")
    if failures:
        print(json.dumps({"failed_cells": failures}, indent=2), file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_dump_scalogram(args) -> int:
    from .features import cwt
    from .pipeline import pulse_segments, scale_grid

    cfg = build_config(args)
    rec = _single_recording(args)
    segs = pulse_segments(rec, cfg)
    if not 0 <= args.segment < len(segs):
        raise InvalidConfigError(f"segment {args.segment} out of range; recording has {len(segs)}")
    grid = scale_grid(cfg)
    sc = cwt(segs[args.segment].values, rec.fs, grid)
    mag = np.abs(sc.coefficients)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scale_s", "center_hz"] + [f"c{k}" for k in range(mag.shape[1])])
        for a, f, row in zip(grid.scales, grid.center_frequencies, mag):
            w.writerow([repr(float(a)), repr(float(f))] + [repr(float(v)) for v in row])
    print(f"wrote {mag.shape[0]} scales x {mag.shape[1]} samples (segment {args.segment} of {len(segs)}) to {args.out}")
    return EXIT_OK


# parser ---------------------------------------------------------------------

def _recording_options(p):
    p.add_argument("--recording", type=Path, required=True, help="CSV with 't,ppg' header or one column")
    p.add_argument("--fs", type=float, required=True, help="sampling rate in Hz")
    p.add_argument("--state", default="relax")
    p.add_argument("--session", default="s1")
    p.add_argument("--subject", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppgauth", description="PPG biometric verification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--layout", choices=["capnobase", "biosec", "deap"], default="capnobase")
    p.add_argument("--subjects", type=int, default=10)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fs", type=float, default=300.0)
    p.add_argument("--emotions", type=int, default=40, help="partitions for the deap layout")
    p.add_argument("--duration", type=float, default=None, help="seconds per recording (layout default otherwise)")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("enroll", help="fit a gallery and write a model bundle")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--partition", help="enroll from this session/state only")
    _config_options(p)
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("verify", help="score one identity claim (exit 0 accept, 3 reject)")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--claim", required=True, help="claimed subject id")
    p.add_argument("--threshold", type=float, default=0.3)
    p.add_argument("--n", default="2", help="number of test vectors, or 'All'")
    p.add_argument("--out", type=Path, help="also write the JSON record here")
    _recording_options(p)
    _config_options(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("evaluate", help="run an evaluation protocol")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--protocol", choices=["single-session", "cross-partition"], default="single-session")
    p.add_argument("--train-partition", help="session/state to enroll from (cross-partition: omit to rotate)")
    p.add_argument("--test-partitions", help="comma list of session/state partitions")
    p.add_argument("--train-window", type=float, default=None,
                   help="cross-partition: seconds of the training recording to enroll on (default all)")
    p.add_argument("--methods", help="comma list of methods to compare (default: the config method)")
    p.add_argument("--dataset", help="name written to the results CSV")
    p.add_argument("--model", type=Path, help="check the run config against this bundle's fingerprint")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--plot", action="store_true", help="also write roc.svg")
    _config_options(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("dump-scalogram", help="write the scalogram of one pulse segment")
    _recording_options(p)
    p.add_argument("--segment", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    _config_options(p)
    p.set_defaults(func=cmd_dump_scalogram)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PPGAuthError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
