"""Command-line entry point: one binary, one subcommand per pipeline stage.

All artifacts are deterministic functions of the flags and input files, so a
repeated invocation is byte-identical. Nothing here writes timestamps.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import aggregate, cluster, distances, evalgrid, interchange, neuralnet, pca, syllabifier, synth


def _add_io(p, needs_in=True, needs_out=True):
    if needs_in:
        p.add_argument("--in", dest="in_path", required=True, help="input file")
    if needs_out:
        p.add_argument("--out", dest="out_path", required=True, help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="promdet", description="prosody-embedding prominence analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an interchange JSONL file")
    p.add_argument("path", help="interchange JSONL file")

    p = sub.add_parser("syllabify", help="fill missing syllable spans in records")
    _add_io(p)

    p = sub.add_parser("aggregate", help="records to per-unit feature CSV")
    _add_io(p)
    p.add_argument("--level", choices=aggregate.LEVELS, required=True)
    p.add_argument("--set", dest="set_tag", choices=("E", "D", "P", "EDP"), required=True)
    p.add_argument("--mode", choices=interchange.MODES)
    p.add_argument("--l1", choices=evalgrid.L1_FILTERS)

    p = sub.add_parser("distances", help="group-separation report from a feature CSV")
    _add_io(p)
    p.add_argument("--level", choices=aggregate.LEVELS, required=True)
    p.add_argument("--set", dest="set_tag", choices=aggregate.SET_TAGS, default=None)

    p = sub.add_parser("pca", help="project a feature CSV to principal components")
    _add_io(p)
    p.add_argument("--level", choices=aggregate.LEVELS, required=True)
    p.add_argument("--set", dest="set_tag", choices=aggregate.SET_TAGS, default=None)
    p.add_argument("--components", type=int, default=2)
    p.add_argument("--standardize", action="store_true")

    p = sub.add_parser("cluster", help="k-means over a feature CSV")
    _add_io(p)
    p.add_argument("--level", choices=aggregate.LEVELS, required=True)
    p.add_argument("--set", dest="set_tag", choices=aggregate.SET_TAGS, default=None)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train the feed-forward classifier on a feature CSV")
    _add_io(p)
    p.add_argument("--level", choices=aggregate.LEVELS, required=True)
    p.add_argument("--set", dest="set_tag", choices=aggregate.SET_TAGS, default=None)
    p.add_argument("--preset", choices=("word", "syllable"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("evaluate", help="run classifier grid cells over interchange records")
    _add_io(p)
    p.add_argument("--grid", choices=("full",), help="run every feasible cell")
    p.add_argument("--level", choices=aggregate.LEVELS)
    p.add_argument("--set", dest="set_tag", choices=aggregate.SET_TAGS)
    p.add_argument("--mode", choices=interchange.MODES)
    p.add_argument("--l1", choices=evalgrid.L1_FILTERS)
    p.add_argument("--classifier", choices=evalgrid.CLASSIFIERS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("report", help="accuracy table from an evaluate manifest")
    _add_io(p)
    p.add_argument("--format", choices=("md", "csv", "json"), default="md")

    p = sub.add_parser("synth", help="generate synthetic interchange records")
    _add_io(p, needs_in=False)
    p.add_argument("--preset", choices=("paperlike",), default="paperlike")
    p.add_argument("--n", type=int, default=120, help="number of utterances")
    p.add_argument("--seed", type=int, default=0)

    return parser


# ---------------------------------------------------------------------------
# subcommand bodies

def _cmd_validate(args) -> int:
    try:
        records = interchange.load(args.path)
    except interchange.InterchangeError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    print(f"ok: {len(records)} records")
    return 0


def _cmd_syllabify(args) -> int:
    records = interchange.load(args.in_path)
    out = []
    for rec in records:
        if rec.syllables is None:
            spans = syllabifier.syllabify_record(rec)
            rec = interchange.UtteranceRecord(
                utt_id=rec.utt_id, corpus=rec.corpus, l1=rec.l1, mode=rec.mode, epoch=rec.epoch,
                text=rec.text, phonemes=rec.phonemes, words=rec.words, syllables=spans,
                embeddings=rec.embeddings,
            )
        out.append(rec)
    interchange.save(out, args.out_path)
    return 0


def _filtered_records(args):
    records = interchange.load(args.in_path)
    if getattr(args, "mode", None):
        records = [r for r in records if r.mode == args.mode]
    if getattr(args, "l1", None):
        records = [r for r in records if evalgrid._matches_l1(r.l1, args.l1)]
    return records


def _cmd_aggregate(args) -> int:
    records = _filtered_records(args)
    fm = aggregate.build_feature_matrix(records, args.level, args.set_tag)
    aggregate.export_features(fm, args.out_path)
    print(f"wrote {fm.n} {args.level} rows of width {fm.d}")
    return 0


def _load_features(args):
    # set tag is matrix metadata only; the CSV itself does not record it
    return aggregate.load_features(args.in_path, args.level, args.set_tag or "EDP")


def _cmd_distances(args) -> int:
    fm = _load_features(args)
    report = distances.separation_report(fm)
    Path(args.out_path).write_text(report.to_json() + "\n", encoding="utf-8")
    return 0


def _cmd_pca(args) -> int:
    fm = _load_features(args)
    model = pca.fit(fm, k=args.components, standardize=args.standardize)
    coords = pca.project(model, fm)
    svg_path = Path(args.out_path).with_suffix(".svg")
    pca.export_scatter(coords, fm.labels, args.out_path, svg_path=svg_path, labeled=fm.labeled)
    print(f"explained variance: {[float(v) for v in model.explained_variance]}")
    return 0


def _cmd_cluster(args) -> int:
    fm = _load_features(args).labeled_only()
    model = cluster.kmeans_fit(fm, k=args.k, seed=args.seed)
    model.save(args.out_path)
    ids = cluster.assign(model, fm)
    if args.k == 2 and fm.n:
        acc = cluster.clustering_accuracy(ids, fm.labels)
        print(f"accuracy: {100.0 * acc:.1f}")
    return 0


def _cmd_train(args) -> int:
    fm = _load_features(args).labeled_only()
    preset_name = args.preset or ("word" if args.level == "word" else "syllable")
    preset = neuralnet.word_preset if preset_name == "word" else neuralnet.syllable_preset
    kwargs = {"input_dim": fm.d, "seed": args.seed}
    if args.epochs is not None:
        kwargs["epochs"] = args.epochs
    config = preset(**kwargs)
    net = neuralnet.build(config)
    report = neuralnet.train(net, fm)
    neuralnet.save_checkpoint(net, args.out_path)
    report.to_csv(Path(args.out_path).with_suffix(".train.csv"))
    print(f"final train accuracy: {100.0 * report.accuracies[-1]:.1f}")
    return 0


def _full_grid(records, seed):
    """Every feasible cell: a cell is kept when its selection has labeled
    units and, for the DNN, both classes are big enough to split."""
    specs, skipped = [], []
    for l1 in evalgrid.L1_FILTERS:
        for level in evalgrid.LEVEL_ORDER:
            for set_tag in ("E", "D", "P", "EDP"):
                for mode in evalgrid.MODE_ORDER:
                    for clf in evalgrid.CLF_ORDER:
                        spec = evalgrid.RunSpec(
                            level=level, set_tag=set_tag, mode=mode, l1=l1, classifier=clf, seed=seed
                        )
                        reason = _infeasible_reason(spec, records)
                        if reason is None:
                            specs.append(spec)
                        else:
                            skipped.append({"cell": spec.name(), "reason": reason})
    return specs, skipped


def _infeasible_reason(spec, records):
    selected = evalgrid.select_records(records, spec)
    if not selected:
        return "no matching records"
    try:
        fm = aggregate.build_feature_matrix(selected, spec.level, spec.set_tag).labeled_only()
    except ValueError as exc:
        # e.g. syllable level over records that carry no syllable spans
        return str(exc)
    if fm.n == 0:
        return "no labeled units"
    counts = [(fm.labels == c).sum() for c in (0, 1)]
    if min(counts) == 0:
        return "single-class data"
    if spec.classifier == "dnn" and min(counts) < 2:
        return "class too small to split"
    return None


def _run_cell(payload):
    spec, records = payload
    res = evalgrid.run(spec, records)
    return res.to_json()


def _cmd_evaluate(args) -> int:
    records = interchange.load(args.in_path)
    out_dir = Path(args.out_path)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.grid == "full":
        specs, skipped = _full_grid(records, args.seed)
    else:
        required = ("level", "set_tag", "mode", "l1", "classifier")
        missing = [name for name in required if getattr(args, name) is None]
        if missing:
            print(f"missing flags for single-cell evaluate: {missing} (or use --grid full)", file=sys.stderr)
            return 1
        specs = [
            evalgrid.RunSpec(
                level=args.level, set_tag=args.set_tag, mode=args.mode, l1=args.l1,
                classifier=args.classifier, seed=args.seed,
            )
        ]
        skipped = []

    if args.jobs > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            raw = list(pool.map(_run_cell, [(s, records) for s in specs]))
    else:
        raw = [_run_cell((s, records)) for s in specs]

    # deterministic assembly regardless of job count
    order = sorted(range(len(specs)), key=lambda i: specs[i].name())
    results = []
    manifest = {"runs": [], "skipped": skipped}
    for i in order:
        manifest["runs"].append(raw[i])
        results.append(evalgrid.RunResult(spec=specs[i], accuracy=raw[i]["accuracy"], n_units=raw[i]["n_units"]))
    (out_dir / "runs.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")

    table = evalgrid.build_table(results)
    (out_dir / "table.md").write_text(table.to_markdown(), encoding="utf-8")
    table.to_csv(out_dir / "table.csv")
    print(f"ran {len(results)} cells, skipped {len(skipped)}; table in {out_dir}")
    return 0


def _cmd_report(args) -> int:
    manifest = json.loads(Path(args.in_path).read_text(encoding="utf-8"))
    results = []
    for obj in manifest["runs"]:
        spec = evalgrid.RunSpec(
            level=obj["level"], set_tag=obj["set"], mode=obj["mode"], l1=obj["l1"],
            classifier=obj["classifier"], epoch=obj.get("epoch"), seed=obj.get("seed", 0),
        )
        results.append(evalgrid.RunResult(spec=spec, accuracy=obj["accuracy"], n_units=obj["n_units"]))
    table = evalgrid.build_table(results)
    if args.format == "md":
        Path(args.out_path).write_text(table.to_markdown(), encoding="utf-8")
    elif args.format == "csv":
        table.to_csv(args.out_path)
    else:
        Path(args.out_path).write_text(json.dumps(table.to_json(), indent=2) + "\n", encoding="utf-8")
    return 0


def _cmd_synth(args) -> int:
    config = synth.paperlike(num_utterances=args.n, seed=args.seed)
    records = synth.generate(config)
    interchange.save(records, args.out_path)
    print(f"wrote {len(records)} records")
    return 0


_HANDLERS = {
    "validate": _cmd_validate,
    "syllabify": _cmd_syllabify,
    "aggregate": _cmd_aggregate,
    "distances": _cmd_distances,
    "pca": _cmd_pca,
    "cluster": _cmd_cluster,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (interchange.InterchangeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
