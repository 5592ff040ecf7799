"""Command line interface.

Usage::

    smokedet detect --input VIDEO --config cfg.json --texture-model tex.json \\
        --spacetime-model st.json [--dump-frames DIR] [--metrics out.csv] [--events out.jsonl]
    smokedet train --smoke smoke.txt --nonsmoke nonsmoke.txt --config cfg.json --out DIR
    smokedet bench-descriptors --dataset images.tsv --kernels BGC3,RTU,LBP --out report.csv
    smokedet eval --events events.jsonl --truth truth.json
    smokedet synth --kind plume --out DIR

Video manifests list one sequence (PPM/PGM directory or Y4M file) per line;
relative paths are resolved against the manifest's directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import synth
from .classify import load_model, save_model
from .config import load_config, save_config
from .errors import SmokeDetError
from .ingest import save_sequence, write_y4m
from .pipeline import (GroundTruth, false_alarm_count, first_alarm_frame, format_metrics,
                       read_events, run_detection, train_pipeline_models,
                       write_metrics_csv)
from .texture import benchmark_descriptors, load_manifest, select_descriptor, write_report_csv

log = logging.getLogger("smokedet")


def _read_video_manifest(path) -> list[Path]:
    path = Path(path)
    out = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        p = Path(line)
        out.append(p if p.is_absolute() else path.parent / p)
    return out


def cmd_detect(args):
    config = load_config(args.config)
    tex_path = args.texture_model or config.texture_model
    st_path = args.spacetime_model or config.spacetime_model
    tex = load_model(tex_path) if tex_path else None
    st = load_model(st_path) if st_path else None

    sink = open(args.events, "w") if args.events else sys.stdout
    try:
        def emit(event):
            sink.write(json.dumps(event.to_json()) + "\n")
            sink.flush()

        events, metrics = run_detection(args.input, config, tex, st, dump_frames=args.dump_frames,
                                        dump_shi=args.dump_shi, on_event=emit)
    finally:
        if sink is not sys.stdout:
            sink.close()
    if args.truth:
        metrics.false_alarm_count = false_alarm_count(events, GroundTruth.load(args.truth))
    print(format_metrics(metrics), file=sys.stderr)
    if args.metrics:
        write_metrics_csv(args.metrics, metrics)
    return 0


def cmd_train(args):
    config = load_config(args.config)
    smoke = _read_video_manifest(args.smoke)
    nonsmoke = _read_video_manifest(args.nonsmoke)
    tex, st, report = train_pipeline_models(smoke, nonsmoke, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(out / "texture_model.json", tex)
    save_model(out / "spacetime_model.json", st)
    save_config(out / "config.json", config.replace(texture_model=str(out / "texture_model.json"),
                                                    spacetime_model=str(out / "spacetime_model.json")))
    with open(out / "harvest.csv", "w") as fh:
        fh.write("class,videos,frames_used,bda_count,texture_samples\n")
        for name, c in (("smoke", report.smoke), ("non-smoke", report.nonsmoke)):
            fh.write(f"{name},{c.videos},{c.frames_used},{c.bda_count},{c.texture_count}\n")
    summary = {"texture": {"pair": report.texture_pair, "cv_accuracy": report.texture_accuracy},
               "spacetime": {k: {"pair": report.spacetime_pairs[k], "cv_accuracy": v}
                             for k, v in report.spacetime_accuracy.items()},
               "harvest": {"smoke": asdict(report.smoke), "non-smoke": asdict(report.nonsmoke)}}
    print(json.dumps(summary, indent=2))
    return 0


def cmd_bench(args):
    data = load_manifest(args.dataset)
    kernels = [k.strip() for k in args.kernels.split(",") if k.strip()]
    rows = benchmark_descriptors(data, kernels, repeats=args.repeats, split=args.split, seed=args.seed)
    write_report_csv(rows, args.out)
    for r in rows:
        print(f"{r.kernel:<12} acc={r.accuracy:.4f} extract={r.extract_s:.3f}s dims={r.dims} "
              f"recognize={r.recognize_s:.4f}s")
    choice = select_descriptor(rows, args.acc_min, args.time_max, args.dims_max)
    print(f"selected: {choice if choice else 'none'}")
    return 0


def cmd_eval(args):
    events = read_events(args.events)
    truth = GroundTruth.load(args.truth)
    first = first_alarm_frame(events)
    print(f"first_alarm_frame,{'' if first is None else first}")
    print(f"false_alarm_count,{false_alarm_count(events, truth)}")
    return 0


SCENES = {
    "plume": lambda n, s: synth.plume_scene(n, onset=min(20, n // 4), seed=s),
    "static": lambda n, s: synth.static_scene(n, seed=s),
    "red": lambda n, s: synth.rigid_object_scene(n, seed=s, color="red", direction="down"),
    "gray": lambda n, s: synth.rigid_object_scene(n, seed=s, color="gray", direction="right"),
    "flicker": lambda n, s: synth.flicker_scene(n, seed=s),
}


def cmd_synth(args):
    frames = SCENES[args.kind](args.frames, args.seed)
    if args.y4m:
        write_y4m(args.out, frames)
    else:
        save_sequence(args.out, frames)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smokedet", description="Block-based video smoke detection.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="run the detector over a video")
    d.add_argument("--input", required=True, help="PPM/PGM directory or Y4M file")
    d.add_argument("--config", help="JSON config file")
    d.add_argument("--texture-model")
    d.add_argument("--spacetime-model")
    d.add_argument("--dump-frames", help="directory for annotated PPM frames")
    d.add_argument("--dump-shi", help="directory for per-frame history maps (PGM)")
    d.add_argument("--metrics", help="CSV file for alarm metrics")
    d.add_argument("--events", help="JSON-lines event file (default: stdout)")
    d.add_argument("--truth", help="ground-truth spans file for false-alarm counting")
    d.set_defaults(func=cmd_detect)

    t = sub.add_parser("train", help="train texture and space-time models")
    t.add_argument("--smoke", required=True, help="manifest of smoke videos")
    t.add_argument("--nonsmoke", required=True, help="manifest of non-smoke videos")
    t.add_argument("--config")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    b = sub.add_parser("bench-descriptors", help="compare texture descriptors on an image set")
    b.add_argument("--dataset", required=True, help="manifest of 'path<TAB>label' lines")
    b.add_argument("--kernels", default="GLD,RT,RTU,LBP,MTS,CS-LBP,CBP,BGC1,BGC2,BGC3")
    b.add_argument("--out", required=True)
    b.add_argument("--repeats", type=int, default=10)
    b.add_argument("--split", type=float, default=0.5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--acc-min", type=float, default=0.975)
    b.add_argument("--time-max", type=float, default=20.0)
    b.add_argument("--dims-max", type=int, default=256)
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("eval", help="alarm metrics from an event file")
    e.add_argument("--events", required=True)
    e.add_argument("--truth", required=True)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="write a synthetic test scene")
    s.add_argument("--kind", choices=sorted(SCENES), default="plume")
    s.add_argument("--frames", type=int, default=90)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--y4m", action="store_true", help="write a single Y4M file instead of PPM frames")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SmokeDetError, OSError) as exc:
        print(f"smokedet: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
