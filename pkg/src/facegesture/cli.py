"""Command-line interface.

Exit codes: 0 success, 1 runtime/data error, 2 argument error,
3 benchmark ordering regression (MD below ED).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench as benchmod
from .classifier import (
    TrainConfig,
    classify,
    intensity,
    load_model,
    save_model,
    train,
)
from .correlation import find_peaks, ncc
from .imgio import (
    CapacityError,
    GrayImage,
    load_dataset,
    load_pgm,
    synth_dataset,
    synth_metadata,
    write_dataset,
)
from .metrics import METRICS
from .tracking import TrackState, track_step

log = logging.getLogger("facegesture")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_REGRESSION = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}") from None
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _unit_float(text: str) -> float:
    v = _nonneg_float(text)
    if v > 1:
        raise argparse.ArgumentTypeError(f"must be in [0, 1], got {text}")
    return v


def _fraction(text: str) -> float:
    v = _unit_float(text)
    if v == 0:
        raise argparse.ArgumentTypeError("fraction must be in (0, 1]")
    return v


def _alpha(text: str) -> float:
    v = _unit_float(text)
    if v == 0:
        raise argparse.ArgumentTypeError("alpha must be in (0, 1]")
    return v


def _seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("seed list is empty")
    return seeds


def _out(line: str) -> None:
    sys.stdout.write(line + "\n")


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    try:
        data = synth_dataset(args.classes, args.per_class, args.width, args.height, args.sigma, args.seed)
    except (CapacityError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    meta = synth_metadata(args.classes, args.per_class, args.width, args.height, args.sigma, args.seed)
    write_dataset(data, args.out, meta)
    log.info("wrote %d images to %s", len(data), args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    data = load_dataset(args.data)
    cfg = TrainConfig(k=args.k, fraction=None if args.k is not None else args.fraction,
                      lam=args.lam, metric=args.metric, neutral_label=args.neutral,
                      nearest_neighbor=args.nn)
    model = train(data, cfg)
    Path(args.out).write_bytes(save_model(model))
    _out(f"k={model.k} classes={len(model.classes)} n={len(data)}")
    return EXIT_OK


def _load_model(path):
    return load_model(Path(path).read_bytes())


def _header(args, *cols):
    if getattr(args, "header", False):
        _out("\t".join(cols))


def cmd_classify(args) -> int:
    model = _load_model(args.model)
    _header(args, "path", "label", "distance")
    for path in args.images:
        res = _per_file(path, classify, model, _load_image(path), nearest_neighbor=args.nn)
        fields = [path, res.label, _fmt(res.distance)]
        if args.all:
            fields += [f"{lbl}={_fmt(d)}" for lbl, d in res.per_class]
        _out("\t".join(fields))
    return EXIT_OK


def _per_file(path, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def _load_image(path):
    try:
        return load_pgm(path)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def cmd_locate(args) -> int:
    template = load_pgm(args.template)
    model = _load_model(args.classify_model) if args.classify_model else None
    _header(args, "path", "row", "col", "score", *(["label"] if model else []))
    for path in args.frames:
        frame = _load_image(path)
        try:
            peaks = find_peaks(ncc(frame, template), args.threshold, args.min_sep, args.max_peaks)
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from exc
        label = None
        if model is not None and peaks:
            best = peaks[0]
            window = GrayImage(frame.pixels[best.row:best.row + template.height,
                                            best.col:best.col + template.width])
            label = classify(model, window).label
        for i, p in enumerate(peaks):
            fields = [path, str(p.row), str(p.col), _fmt(p.score)]
            if model is not None:
                fields.append(label if i == 0 else "-")
            _out("\t".join(fields))
    return EXIT_OK


def cmd_intensity(args) -> int:
    model = _load_model(args.model)
    _header(args, "path", "raw", "score")
    for path in args.images:
        raw, score = _per_file(path, intensity, model, _load_image(path))
        _out(f"{path}\t{_fmt(raw)}\t{_fmt(score)}")
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        rows = benchmod.run_benchmark(args.classes, args.per_class, args.test_per_class,
                                      args.width, args.height, args.sigma, args.seeds, args.lam)
    except (CapacityError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    _header(args, "metric", "mean_accuracy", "stddev")
    for r in rows:
        _out(f"{r.metric}\t{_fmt(r.mean_accuracy)}\t{_fmt(r.stddev)}")
    if not benchmod.ordering_holds(rows):
        print("fgr bench: ordering regression, mean accuracy of md below ed", file=sys.stderr)
        return EXIT_REGRESSION
    return EXIT_OK


def cmd_track(args) -> int:
    frames = sorted(args.frames)
    state = TrackState(ema_alpha=args.alpha)
    _header(args, "path", "top", "left", "bottom", "right")
    for path in frames:
        frame = _load_image(path)
        if state.previous is not None and state.previous.shape != frame.shape:
            raise ValueError(f"{path}: frame size {frame.width}x{frame.height} differs from previous frames")
        state, box = track_step(state, frame, args.threshold)
        _out(f"{path}\t-" if box is None else "\t".join([path, *map(str, box)]))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fgr", description="Facial gesture recognition by correlation and distance classification.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic labeled dataset")
    s.add_argument("--classes", type=_positive_int, default=5)
    s.add_argument("--per-class", type=_positive_int, default=10)
    s.add_argument("--width", type=_positive_int, default=64)
    s.add_argument("--height", type=_positive_int, default=64)
    s.add_argument("--sigma", type=_nonneg_float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train a model from <data>/<label>/*.pgm")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    g = t.add_mutually_exclusive_group()
    g.add_argument("--k", type=_positive_int)
    g.add_argument("--fraction", type=_fraction, default=0.95)
    t.add_argument("--lambda", dest="lam", type=_unit_float, default=0.1)
    t.add_argument("--metric", choices=METRICS, default="md")
    t.add_argument("--neutral", default="neutral")
    t.add_argument("--nn", action="store_true", help="store training points for nearest-neighbor mode")
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("classify", help="classify images")
    c.add_argument("--model", required=True)
    c.add_argument("--all", action="store_true", help="append per-class distances")
    c.add_argument("--nn", action="store_true", help="nearest training image instead of class mean")
    c.add_argument("--header", action="store_true")
    c.add_argument("images", nargs="+")
    c.set_defaults(func=cmd_classify)

    lo = sub.add_parser("locate", help="find template placements by NCC")
    lo.add_argument("--template", required=True)
    lo.add_argument("--threshold", type=float, default=0.5)
    lo.add_argument("--min-sep", type=_positive_int, default=1)
    lo.add_argument("--max-peaks", type=_positive_int, default=1)
    lo.add_argument("--classify-model")
    lo.add_argument("--header", action="store_true")
    lo.add_argument("frames", nargs="+")
    lo.set_defaults(func=cmd_locate)

    i = sub.add_parser("intensity", help="distance from the neutral class mean")
    i.add_argument("--model", required=True)
    i.add_argument("--header", action="store_true")
    i.add_argument("images", nargs="+")
    i.set_defaults(func=cmd_intensity)

    b = sub.add_parser("bench", help="compare distance measures on synthetic data")
    b.add_argument("--classes", type=_positive_int, default=5)
    b.add_argument("--per-class", type=_positive_int, default=20)
    b.add_argument("--test-per-class", type=_positive_int, default=None)
    b.add_argument("--width", type=_positive_int, default=32)
    b.add_argument("--height", type=_positive_int, default=32)
    b.add_argument("--sigma", type=_nonneg_float, default=0.15)
    b.add_argument("--seeds", type=_seeds, default=[1, 2, 3, 4, 5])
    b.add_argument("--lambda", dest="lam", type=_unit_float, default=0.1)
    b.add_argument("--header", action="store_true")
    b.set_defaults(func=cmd_bench)

    tr = sub.add_parser("track", help="frame-differencing motion tracker")
    tr.add_argument("--threshold", type=_nonneg_float, default=0.1)
    tr.add_argument("--alpha", type=_alpha, default=1.0)
    tr.add_argument("--header", action="store_true")
    tr.add_argument("frames", nargs="+")
    tr.set_defaults(func=cmd_track)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fgr {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"fgr {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
