"""Command-line interface: ``lidargait <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from . import __version__
from .data import (
    AXES, JointId, ParseError, ValidationError, load_sequence, load_world, save_sequence, save_world,
)
from .pipeline import (
    PipelineConfig, StageError, baseline_suite, cycle_estimates, frame_table, load_config,
    read_cycles, read_features_csv, run_pipeline, train_eval, write_cycles, write_features_csv,
)
from .projection import project_sequence
from .repair import repair_sequence, repair_track


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    if getattr(args, "jobs", None):
        cfg = replace(cfg, jobs=args.jobs)
    return cfg


def _load_any(path: Path, cfg: PipelineConfig):
    """A world JSON document as-is, or a raw JSONL/CSV sequence projected to world."""
    if path.suffix.lower() == ".json":
        return load_world(path)
    return project_sequence(load_sequence(path), cfg.camera, cfg.centered)


def _write_json(doc, path: Optional[str]):
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    from . import synth

    cfg = _config(args)
    profiles = None
    if args.profiles:
        from .pipeline import tomllib

        with open(args.profiles, "rb") as fh:
            doc = tomllib.load(fh)
        profiles = [synth.SubjectProfile.from_dict(p) for p in doc.get("subject", [])]
        if len(profiles) < args.subjects:
            raise ValidationError(f"{args.profiles} defines {len(profiles)} subjects, {args.subjects} requested")
    corruption = synth.CorruptionConfig(args.dropout, args.burst_length, args.jump_rate,
                                        args.jump_scale, args.noise, args.seed)
    samples = synth.make_dataset(args.subjects, args.seqs_per_subject, args.frames, args.seed,
                                 corruption, profiles, body_sd=args.body_sd)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth = Path(args.truth) if args.truth else None
    if truth:
        truth.mkdir(parents=True, exist_ok=True)
    ext = "csv" if args.format == "csv" else "jsonl"
    for s in samples:
        raw = synth.to_raw_sequence(s.corrupted, cfg.camera, cfg.centered)
        save_sequence(raw, out / f"{s.corrupted.sequence_id}.{ext}", args.format)
        if truth:
            save_world(s.clean, truth / f"{s.clean.sequence_id}.json")
    print(f"wrote {len(samples)} sequences to {out}")
    return 0


def cmd_repair(args) -> int:
    cfg = _config(args)
    seq = _load_any(Path(args.inp), cfg)
    fixed, report = repair_sequence(seq, cfg.repair)
    save_world(fixed, args.out)
    if args.report:
        _write_json(report.to_dict(), args.report)
    if args.plot:
        from .plotting import plot_track_repair

        joint, axis = JointId[args.joint], args.axis
        raw = seq.track(joint, axis)
        corrected, _ = repair_track(raw, cfg.repair)
        plot_track_repair(raw.values, corrected.values, fixed.track(joint, axis).values, args.plot,
                          f"{seq.sequence_id} {joint.name}.{axis}")
    t = report.to_dict()["totals"]
    print(f"{seq.sequence_id}: {t['missing_corrected']} missing and {t['jumps_corrected']} jump "
          f"corrections, {t['uncorrectable']} uncorrectable")
    return 0


def cmd_features(args) -> int:
    cfg = _config(args)
    seqs = [_load_any(Path(p), cfg) for p in args.inp]
    write_features_csv(frame_table(seqs, args.feature_set or cfg.classifier.feature_set), args.out)
    return 0


def cmd_cycle(args) -> int:
    cfg = _config(args)
    opts = replace(cfg.cycle, **{k: v for k, v in (("min_prominence", args.min_prominence),
                                                    ("fallback_cycle", args.fallback_cycle),
                                                    ("trim", args.trim)) if v is not None})
    seqs = [_load_any(Path(p), cfg) for p in args.inp]
    cycles = cycle_estimates(seqs, opts)
    if args.out:
        write_cycles(cycles, args.out)
    if len(cycles) == 1:
        _write_json(next(iter(cycles.values())).to_dict(), None)
    else:
        _write_json({k: cycles[k].to_dict() for k in sorted(cycles)}, None)
    return 0


def _classifier_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    clf = cfg.classifier
    for key in ("k", "metric", "split", "seed", "average", "classes", "feature_set"):
        v = getattr(args, key, None)
        if v is not None:
            clf = replace(clf, **{key: v})
    cyc = cfg.cycle
    if getattr(args, "cycle_mode", None):
        cyc = replace(cyc, mode=args.cycle_mode)
    if getattr(args, "window", None):
        cyc = replace(cyc, mode="fixed", window=args.window)
    return replace(cfg, classifier=clf, cycle=cyc)


def _emit_report(report, args):
    if args.report:
        Path(args.report).write_text(report.to_json(), encoding="utf-8")
    print(report.table())
    if getattr(args, "emit_plot", None):
        from .plotting import plot_confusion

        plot_confusion(report.labels, report.sequence_confusion, args.emit_plot, "sequence confusion")


def cmd_train_eval(args) -> int:
    cfg = _classifier_overrides(_config(args), args)
    tab = read_features_csv(args.features)
    cycles = read_cycles(args.cycles) if args.cycles else None
    report = train_eval(tab, cycles, cfg.cycle, cfg.classifier)
    _emit_report(report, args)
    return 0


def cmd_pipeline(args) -> int:
    cfg = _classifier_overrides(_config(args), args)
    inp = args.inp or cfg.input_dir
    out = args.out or cfg.output_dir
    if not inp or not Path(inp).is_dir():
        print(f"error: input directory {inp!r} does not exist", file=sys.stderr)
        return 2
    if not out:
        print("error: no output directory given", file=sys.stderr)
        return 2
    cfg = replace(cfg, input_dir=str(inp), output_dir=str(out),
                  skip_repair=args.skip_repair or cfg.skip_repair)
    report = run_pipeline(cfg)
    _emit_report(report, argparse.Namespace(report=None, emit_plot=args.emit_plot))
    return 0


def cmd_baselines(args) -> int:
    cfg = _classifier_overrides(_config(args), args)
    if not Path(args.inp).is_dir():
        print(f"error: input directory {args.inp!r} does not exist", file=sys.stderr)
        return 2
    from .pipeline import ingest, input_files

    seqs = ingest(input_files(args.inp), cfg)
    table = baseline_suite(seqs, cfg)
    _write_json(table, args.report)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lidargait", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--jobs", type=int, help="parallel workers per stage")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    s.add_argument("--subjects", type=int, default=4)
    s.add_argument("--seqs-per-subject", type=int, default=5)
    s.add_argument("--frames", type=int, default=150)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--truth", help="directory for clean ground-truth world sequences")
    s.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    s.add_argument("--profiles", help="TOML file with [[subject]] tables")
    s.add_argument("--dropout", type=float, default=0.2)
    s.add_argument("--burst-length", type=float, default=1.0)
    s.add_argument("--jump-rate", type=float, default=0.05)
    s.add_argument("--jump-scale", type=float, default=0.5)
    s.add_argument("--noise", type=float, default=0.01)
    s.add_argument("--body-sd", type=float, default=0.04)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("repair", parents=[common], help="repair one sequence")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--report")
    s.add_argument("--plot", help="SVG of one track before/after correction and smoothing")
    s.add_argument("--joint", default="RAnkle", choices=[j.name for j in JointId])
    s.add_argument("--axis", default="x", choices=AXES)
    s.set_defaults(func=cmd_repair)

    s = sub.add_parser("features", parents=[common], help="per-frame feature CSV")
    s.add_argument("--in", dest="inp", nargs="+", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--feature-set", choices=("vectors", "distances", "reference"))
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("cycle", parents=[common], help="gait-cycle estimates as JSON")
    s.add_argument("--in", dest="inp", nargs="+", required=True)
    s.add_argument("--out")
    s.add_argument("--min-prominence", type=float)
    s.add_argument("--fallback-cycle", type=int)
    s.add_argument("--trim", choices=("iqr", "percentile", "none"))
    s.set_defaults(func=cmd_cycle)

    def clf_args(s):
        s.add_argument("--k", type=int)
        s.add_argument("--metric", choices=("manhattan",))
        s.add_argument("--split", choices=("cross-walk", "random"))
        s.add_argument("--seed", type=int)
        s.add_argument("--average", choices=("macro", "micro"))
        s.add_argument("--classes", choices=("present", "all"))
        s.add_argument("--cycle-mode", choices=("global", "per-seq", "fixed"))
        s.add_argument("--window", type=int, help="fixed concatenation window (frames)")
        s.add_argument("--emit-plot", help="SVG confusion matrix")

    s = sub.add_parser("train-eval", parents=[common], help="KNN evaluation from feature/cycle artifacts")
    s.add_argument("--features", required=True)
    s.add_argument("--cycles")
    s.add_argument("--report")
    clf_args(s)
    s.set_defaults(func=cmd_train_eval)

    s = sub.add_parser("pipeline", parents=[common], help="run every stage end to end")
    s.add_argument("--in", dest="inp")
    s.add_argument("--out")
    s.add_argument("--skip-repair", action="store_true")
    s.add_argument("--feature-set", choices=("vectors", "distances", "reference"))
    clf_args(s)
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("baselines", parents=[common], help="feature-set x repair comparison table")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--report")
    clf_args(s)
    s.set_defaults(func=cmd_baselines)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error in stage {exc.stage}: {exc}", file=sys.stderr)
        return 1
    except (ParseError, ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
