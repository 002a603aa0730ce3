"""Command-line entry point.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, replace

from . import io as gio
from . import model as mdl
from .augment import augment_view, make_rng
from .benchmark import run_benchmark
from .errors import GaitPipeError
from .quality import filter_tracklets
from .skeleton import normalize_tracklet
from .synth import generate_synthetic_walkers
from .tracking import track_stream
from .train import SequenceStore, dataset_stats, embed_store, evaluate, train

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

log = logging.getLogger("gaitpipe")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _runs(text: str) -> set[int]:
    try:
        return {int(p) for p in text.split(",") if p.strip()}
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated run numbers, got {text!r}") from None


def _select_runs(tracklets, runs):
    if runs is None:
        return tracklets
    return [t for t in tracklets if t.run in runs]


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


# ----------------------------------------------------------------------------
# commands


def cmd_ingest(args) -> None:
    cfg = gio.load_config(args.config)
    tracker = replace(cfg.tracker, fps=args.fps, camera=args.camera or cfg.tracker.camera)
    res = gio.ingest(args.poses)
    for reason in res.skipped_reasons:
        log.warning("skipped %s", reason)
    tracks = track_stream(res.frames, tracker)
    gio.write_tracklets(args.out, tracks)
    _emit({"frames": len(res.frames), "records": res.accepted, "skipped": res.skipped,
           "tracklets": len(tracks)})


def cmd_filter(args) -> None:
    cfg = gio.load_config(args.config)
    tracks = gio.read_tracklets(args.inp)
    admitted, report = filter_tracklets(tracks, cfg.filter)
    gio.write_tracklets(args.out, admitted)
    if args.report:
        gio.write_jsonl(args.report, (gio.verdict_to_record(v) for v in report.verdicts))
    _emit({"total": len(tracks), "admitted": len(admitted), "counts": report.counts})


def cmd_stats(args) -> None:
    tracks = gio.read_tracklets(args.inp)
    st = dataset_stats(tracks, fps=args.fps, bin_width=args.bin_width)
    if args.hist_out:
        _write_csv(args.hist_out, ["bin_start_frames", "bin_end_frames", "count"], st.histogram)
    out = asdict(st)
    out.pop("histogram")
    _emit(out)


def cmd_train(args) -> None:
    cfg = gio.load_config(args.config)
    tcfg = cfg.train
    if args.seed is not None:
        tcfg = replace(tcfg, seed=args.seed)
    if args.steps is not None:
        tcfg = replace(tcfg, steps=args.steps)
    tracks = _select_runs(gio.read_tracklets(args.inp), args.runs)
    store = SequenceStore(tracks)
    result = train(store, cfg.model, tcfg, cfg.augment)
    extra = {"train": asdict(tcfg), "sequences": len(store), "identities": len(store.identities)}
    mdl.save_checkpoint(args.out, result.params, cfg.model, extra)
    if args.loss_curve:
        _write_csv(args.loss_curve, ["step", "loss"], ((i, repr(float(v))) for i, v in enumerate(result.losses)))
    _emit({"steps": len(result.losses), "final_loss": result.losses[-1] if result.losses else None})


def cmd_embed(args) -> None:
    params, model_cfg, _ = mdl.load_checkpoint(args.model)
    tracks = _select_runs(gio.read_tracklets(args.inp), args.runs)
    table = embed_store(params, tracks, model_cfg)
    gio.write_jsonl(args.out, gio.embedding_records(table))
    _emit({"embedded": len(table.track_ids)})


def cmd_eval(args) -> None:
    _, g_labels, g_vecs = gio.read_embeddings(args.gallery)
    _, p_labels, p_vecs = gio.read_embeddings(args.probe)
    res = evaluate(g_vecs, g_labels, p_vecs, p_labels)
    rows = [("rank1", repr(res.rank1)), ("rank5", repr(res.rank5)),
            ("gallery", len(g_labels)), ("probes", len(p_labels))]
    if args.out:
        _write_csv(args.out, ["metric", "value"], rows)
    _emit({"rank1": res.rank1, "rank5": res.rank5})


def cmd_synth(args) -> None:
    tracks = generate_synthetic_walkers(args.ids, args.runs, args.frames, args.seed)
    gio.write_tracklets(args.out, tracks)
    _emit({"tracklets": len(tracks)})


def cmd_augment_preview(args) -> None:
    cfg = gio.load_config(args.config)
    tracks = [t for t in gio.read_tracklets(args.inp) if t.track_id == args.track]
    if not tracks:
        raise GaitPipeError(f"track {args.track} not found in {args.inp}")
    ns = normalize_tracklet(tracks[0])
    rng = make_rng(args.seed, args.track)
    records = [{"view": "normalized", "frames": ns.frames.tolist()}]
    for i in range(args.views):
        view = augment_view(ns, cfg.augment, rng)
        records.append({"view": f"augmented-{i}", "frames": view.frames.tolist()})
    gio.write_jsonl(args.out, records)
    _emit({"track_id": args.track, "views": args.views})


def cmd_benchmark(args) -> None:
    cfg = gio.load_config(args.config)
    tcfg = replace(cfg.train, steps=args.steps, seed=args.seed)
    res = run_benchmark(args.ids, args.runs, args.frames, args.seed, cfg.model, tcfg, cfg.augment)
    out = asdict(res)
    out.pop("losses")
    _emit(out)


def cmd_config(args) -> None:
    text = gio.config_to_toml(gio.load_config(args.config))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for every random choice")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="gaitpipe", description="Skeleton gait dataset curation and contrastive encoder toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", parents=[common], help="pose records -> tracklets")
    s.add_argument("--poses", required=True)
    s.add_argument("--fps", type=float, default=24.0)
    s.add_argument("--camera", default=None)
    s.add_argument("--config", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("filter", parents=[common], help="apply quality filters")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--config", default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--report", default=None)
    s.set_defaults(func=cmd_filter)

    s = sub.add_parser("stats", parents=[common], help="dataset statistics and duration histogram")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--fps", type=float, default=24.0)
    s.add_argument("--bin-width", type=int, default=24)
    s.add_argument("--hist-out", default=None)
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("train", parents=[common], help="contrastive training")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--config", default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--loss-curve", default=None)
    s.add_argument("--steps", type=int, default=None)
    s.add_argument("--runs", type=_runs, default=None, help="only use tracklets from these runs, e.g. 1")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("embed", parents=[common], help="center-window embeddings")
    s.add_argument("--model", required=True)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--runs", type=_runs, default=None)
    s.set_defaults(func=cmd_embed)

    s = sub.add_parser("eval", parents=[common], help="rank-1 / rank-5 retrieval")
    s.add_argument("--gallery", required=True)
    s.add_argument("--probe", required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", parents=[common], help="synthetic labelled walkers")
    s.add_argument("--ids", type=int, default=32)
    s.add_argument("--runs", type=int, default=4)
    s.add_argument("--frames", type=int, default=108)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("augment-preview", parents=[common], help="write augmented views of one track")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--track", type=int, required=True)
    s.add_argument("--views", type=int, default=2)
    s.add_argument("--config", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_augment_preview)

    s = sub.add_parser("benchmark", parents=[common], help="held-out synthetic retrieval, trained vs untrained")
    s.add_argument("--ids", type=int, default=32)
    s.add_argument("--runs", type=int, default=4)
    s.add_argument("--frames", type=int, default=108)
    s.add_argument("--steps", type=int, default=2000)
    s.add_argument("--config", default=None)
    s.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("config", parents=[common], help="print the effective pipeline config as TOML")
    s.add_argument("--config", default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_config)
    return p


_SEED_DEFAULTS = {"synth": 7, "augment-preview": 7, "benchmark": 7}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.seed is None and args.command in _SEED_DEFAULTS:
            args.seed = _SEED_DEFAULTS[args.command]
        for name in ("ids", "runs", "frames", "views", "steps", "bin_width"):
            v = getattr(args, name, None)
            if isinstance(v, int) and v < (0 if name == "steps" else 1):
                parser.error(f"--{name.replace('_', '-')} must be positive")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (GaitPipeError, ValueError, KeyError, OSError) as exc:
        print(f"gaitpipe {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
