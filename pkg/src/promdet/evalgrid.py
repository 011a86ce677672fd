"""Experiment grid: run classifier cells and assemble report tables.

A RunSpec names one cell of the accuracy grid (level x feature set x mode x
L1 group x classifier). run() selects the matching utterances, builds the
feature matrix, fits the classifier and returns an accuracy percentage.
build_table() lays the results out in the fixed block/row/column order used
by the accuracy comparison table, and epoch_curves() emits per-epoch series
with constant baselines.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cluster, neuralnet
from .aggregate import FeatureMatrix, SET_TAGS, LEVELS, build_feature_matrix
from .interchange import MODES, UtteranceRecord

L1_FILTERS = ("native", "GER", "ITA", "nonnative")
CLASSIFIERS = ("kmeans", "dnn")
EXTERNAL_SETS = ("HB", "W2V")

# fixed presentation order for the accuracy table
BLOCK_ORDER = ("Native", "Non-Native", "GER", "ITA")
BLOCK_LABELS = {"native": "Native", "nonnative": "Non-Native", "GER": "GER", "ITA": "ITA"}
SET_ORDER = ("E", "D", "P", "EDP", "HB", "W2V")
LEVEL_ORDER = ("word", "syllable")
MODE_ORDER = ("speech_text", "text_only")
CLF_ORDER = ("kmeans", "dnn")
CLF_LABELS = {"kmeans": "K-M", "dnn": "DNN"}

TABLE_CSV_HEADER = ["l1", "set"] + [
    f"{level}_{mode}_{'km' if clf == 'kmeans' else 'dnn'}"
    for level in LEVEL_ORDER
    for mode in MODE_ORDER
    for clf in CLF_ORDER
]

SPLIT_SEED = 17
SPLIT_FRACTION = 0.2

SVG_WIDTH = 640
SVG_HEIGHT = 480
SVG_MARGIN = 48
# one colour per series, cycled in sorted-label order
SVG_PALETTE = ("#5b2a86", "#f2c14e", "#2a9d8f", "#e76f51", "#264653", "#8ab17d", "#b5179e", "#577590")


@dataclass(frozen=True)
class RunSpec:
    level: str
    set_tag: str
    mode: str
    l1: str
    classifier: str
    epoch: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"unknown level {self.level!r}")
        if self.set_tag not in SET_TAGS:
            raise ValueError(f"unknown set {self.set_tag!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.l1 not in L1_FILTERS:
            raise ValueError(f"unknown l1 filter {self.l1!r}")
        if self.classifier not in CLASSIFIERS:
            raise ValueError(f"unknown classifier {self.classifier!r}")
        if self.set_tag in EXTERNAL_SETS and self.mode == "text_only":
            # audio-derived feature sets have no text-only variant
            raise ValueError(f"{self.set_tag} features are undefined for text_only mode")

    def name(self) -> str:
        parts = [self.l1, self.set_tag, self.mode, self.level, self.classifier]
        if self.epoch is not None:
            parts.append(f"ep{self.epoch}")
        return "-".join(parts)


@dataclass
class RunResult:
    spec: RunSpec
    accuracy: float  # percentage
    n_units: int
    train_report: neuralnet.TrainReport | None = None

    def to_json(self) -> dict:
        return {
            "level": self.spec.level,
            "set": self.spec.set_tag,
            "mode": self.spec.mode,
            "l1": self.spec.l1,
            "classifier": self.spec.classifier,
            "epoch": self.spec.epoch,
            "seed": self.spec.seed,
            "accuracy": self.accuracy,
            "n_units": self.n_units,
        }


def _matches_l1(record_l1: str, wanted: str) -> bool:
    if wanted == "nonnative":
        return record_l1 in ("GER", "ITA")
    return record_l1 == wanted


def select_records(records, spec: RunSpec) -> list[UtteranceRecord]:
    out = [
        r
        for r in records
        if r.mode == spec.mode
        and _matches_l1(r.l1, spec.l1)
        and (spec.epoch is None or r.epoch == spec.epoch)
    ]
    return out


def stratified_split(fm: FeatureMatrix, test_fraction: float = SPLIT_FRACTION, seed: int = SPLIT_SEED):
    """Deterministic stratified split; both classes keep their proportion
    within one sample and appear on both sides."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    if (~fm.labeled).any():
        raise ValueError("cannot split a matrix with unlabeled rows")
    rng = np.random.default_rng(seed)
    test_idx: list[int] = []
    for label in (0, 1):
        idx = np.flatnonzero(fm.labels == label)
        if len(idx) < 2:
            raise ValueError(f"class {label} has {len(idx)} samples, need at least 2")
        n_test = int(round(len(idx) * test_fraction))
        n_test = min(max(n_test, 1), len(idx) - 1)
        perm = rng.permutation(idx)
        test_idx.extend(perm[:n_test].tolist())
    test_mask = np.zeros(fm.n, dtype=bool)
    test_mask[test_idx] = True
    return fm.take(np.flatnonzero(~test_mask)), fm.take(np.flatnonzero(test_mask))


def run(
    spec: RunSpec,
    records,
    external: dict[str, FeatureMatrix] | None = None,
    out_dir: str | Path | None = None,
) -> RunResult:
    """Evaluate one grid cell.

    K-Means is fit on every labeled unit and scored under the best label
    permutation; the DNN trains on a stratified 80/20 split and is scored on
    the held-out 20%. HB/W2V rows come from `external` matrices and are
    filtered to the selected utterances by utt_id.
    """
    selected = select_records(records, spec)
    if not selected:
        raise ValueError(f"no records match {spec.name()}")

    if spec.set_tag in EXTERNAL_SETS:
        if external is None or spec.set_tag not in external:
            raise ValueError(f"no external features supplied for {spec.set_tag}")
        fm = external[spec.set_tag]
        if fm.level != spec.level:
            raise ValueError(f"external {spec.set_tag} matrix is {fm.level}-level, spec wants {spec.level}")
        wanted = {r.utt_id for r in selected}
        fm = fm.take([i for i, u in enumerate(fm.utt_ids) if u in wanted])
    else:
        fm = build_feature_matrix(selected, spec.level, spec.set_tag)

    labeled = fm.labeled_only()
    if labeled.n == 0:
        raise ValueError(f"no labeled units for {spec.name()}")

    train_report = None
    if spec.classifier == "kmeans":
        model = cluster.kmeans_fit(labeled, k=2, seed=spec.seed)
        ids = cluster.assign(model, labeled)
        accuracy = 100.0 * cluster.clustering_accuracy(ids, labeled.labels)
        if out_dir is not None:
            model.save(Path(out_dir) / f"{spec.name()}.model.json")
    else:
        train_fm, test_fm = stratified_split(labeled)
        preset = neuralnet.word_preset if spec.level == "word" else neuralnet.syllable_preset
        config = preset(input_dim=labeled.d, seed=spec.seed)
        net = neuralnet.build(config)
        train_report = neuralnet.train(net, train_fm, eval_fm=test_fm)
        accuracy = 100.0 * train_report.final_accuracy
        if out_dir is not None:
            neuralnet.save_checkpoint(net, Path(out_dir) / f"{spec.name()}.model.json")
            train_report.to_csv(Path(out_dir) / f"{spec.name()}.train.csv")

    result = RunResult(spec=spec, accuracy=accuracy, n_units=labeled.n, train_report=train_report)
    if out_dir is not None:
        path = Path(out_dir) / f"{spec.name()}.run.json"
        path.write_text(json.dumps(result.to_json()) + "\n", encoding="utf-8")
    return result


def relative_improvement(new_pct: float, base_pct: float) -> float:
    """Percentage gain of new over base: 100 * (new - base) / base."""
    if base_pct <= 0:
        raise ValueError("base percentage must be positive")
    return 100.0 * (new_pct - base_pct) / base_pct


# ---------------------------------------------------------------------------
# Accuracy table

@dataclass
class ResultsTable:
    # (block, set, level, mode, classifier) -> accuracy percentage
    cells: dict[tuple[str, str, str, str, str], float]

    def blocks(self) -> list[str]:
        present = {key[0] for key in self.cells}
        return [b for b in BLOCK_ORDER if b in present]

    def set_rows(self) -> list[str]:
        present = {key[1] for key in self.cells}
        return [s for s in SET_ORDER if s in present]

    def _cell_text(self, block, set_tag, level, mode, clf) -> str:
        value = self.cells.get((block, set_tag, level, mode, clf))
        return "--" if value is None else f"{value:.1f}"

    def _row_cells(self, block: str, set_tag: str) -> list[str]:
        return [
            self._cell_text(block, set_tag, level, mode, clf)
            for level in LEVEL_ORDER
            for mode in MODE_ORDER
            for clf in CLF_ORDER
        ]

    def to_markdown(self) -> str:
        header = ["L1", "Set"] + [
            f"{level.capitalize()} / {'Speech+text' if mode == 'speech_text' else 'Only text'} / {CLF_LABELS[clf]}"
            for level in LEVEL_ORDER
            for mode in MODE_ORDER
            for clf in CLF_ORDER
        ]
        lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] * len(header)) + "|"]
        for block in self.blocks():
            for set_tag in self.set_rows():
                lines.append("| " + " | ".join([block, set_tag] + self._row_cells(block, set_tag)) + " |")
        return "\n".join(lines) + "\n"

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TABLE_CSV_HEADER)
            for block in self.blocks():
                for set_tag in self.set_rows():
                    writer.writerow([block, set_tag] + self._row_cells(block, set_tag))

    def to_json(self) -> dict:
        out: dict = {}
        for block in self.blocks():
            rows = {}
            for set_tag in self.set_rows():
                entry = {}
                for level in LEVEL_ORDER:
                    for mode in MODE_ORDER:
                        for clf in CLF_ORDER:
                            value = self.cells.get((block, set_tag, level, mode, clf))
                            entry[f"{level}_{mode}_{clf}"] = value
                rows[set_tag] = entry
            out[block] = rows
        return out

    @classmethod
    def from_csv(cls, path: str | Path) -> "ResultsTable":
        cells: dict[tuple[str, str, str, str, str], float] = {}
        with open(path, encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            if header != TABLE_CSV_HEADER:
                raise ValueError(f"unexpected table header: {header}")
            combos = [
                (level, mode, clf) for level in LEVEL_ORDER for mode in MODE_ORDER for clf in CLF_ORDER
            ]
            for row in reader:
                block, set_tag = row[0], row[1]
                for (level, mode, clf), text in zip(combos, row[2:]):
                    if text != "--":
                        cells[(block, set_tag, level, mode, clf)] = float(text)
        return cls(cells)


def build_table(results) -> ResultsTable:
    """Collect run results into the fixed-order table; order-insensitive."""
    cells: dict[tuple[str, str, str, str, str], float] = {}
    count = 0
    for res in results:
        count += 1
        spec = res.spec
        key = (BLOCK_LABELS[spec.l1], spec.set_tag, spec.level, spec.mode, spec.classifier)
        if key in cells and cells[key] != res.accuracy:
            raise ValueError(f"conflicting values for table cell {key}: {cells[key]} vs {res.accuracy}")
        if not 0.0 <= res.accuracy <= 100.0:
            raise ValueError(f"accuracy {res.accuracy} outside [0, 100]")
        cells[key] = res.accuracy
    if count == 0:
        raise ValueError("no runs to tabulate")
    return ResultsTable(cells)


# ---------------------------------------------------------------------------
# Epoch curves

def epoch_curves(results, csv_path: str | Path, svg_path: str | Path | None = None) -> None:
    """Emit per-epoch accuracy series as CSV (epoch,series,accuracy).

    Epoch-tagged runs form one series per (l1, level, classifier); untagged
    HB/W2V runs become constant baseline series spanning the same epochs.
    """
    curves: dict[str, dict[int, float]] = {}
    baselines: dict[str, float] = {}
    for res in results:
        spec = res.spec
        if spec.epoch is not None:
            label = f"{spec.l1}-{spec.level}-{CLF_LABELS[spec.classifier]}"
            series = curves.setdefault(label, {})
            if spec.epoch in series and series[spec.epoch] != res.accuracy:
                raise ValueError(f"conflicting accuracy for {label} epoch {spec.epoch}")
            series[spec.epoch] = res.accuracy
        elif spec.set_tag in EXTERNAL_SETS:
            label = f"{spec.set_tag}-{spec.l1}-{spec.level}-{CLF_LABELS[spec.classifier]}"
            baselines[label] = res.accuracy

    epochs = sorted({e for series in curves.values() for e in series})
    if len(epochs) < 2:
        raise ValueError("epoch curves need at least two distinct epoch tags")
    if not baselines:
        warnings.warn("no HB/W2V baseline runs supplied; curves emitted without baselines")

    rows: list[tuple[int, str, float]] = []
    for label in sorted(curves):
        for epoch in sorted(curves[label]):
            rows.append((epoch, label, curves[label][epoch]))
    for label in sorted(baselines):
        for epoch in epochs:
            rows.append((epoch, label, baselines[label]))

    with open(csv_path, "w", encoding="utf-8", newline="\n") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["epoch", "series", "accuracy"])
        for epoch, label, acc in rows:
            writer.writerow([epoch, label, repr(acc)])

    if svg_path is not None:
        _write_curves_svg(curves, baselines, epochs, svg_path)


def _write_curves_svg(curves, baselines, epochs, path) -> None:
    lo, hi = min(epochs), max(epochs)
    span = max(hi - lo, 1)
    inner_w = SVG_WIDTH - 2 * SVG_MARGIN
    inner_h = SVG_HEIGHT - 2 * SVG_MARGIN

    def x_of(epoch):
        return SVG_MARGIN + inner_w * (epoch - lo) / span

    def y_of(acc):
        return SVG_HEIGHT - SVG_MARGIN - inner_h * acc / 100.0

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}">',
        f'<rect width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<line x1="{SVG_MARGIN}" y1="{SVG_HEIGHT - SVG_MARGIN}" x2="{SVG_WIDTH - SVG_MARGIN}" '
        f'y2="{SVG_HEIGHT - SVG_MARGIN}" stroke="black"/>',
        f'<line x1="{SVG_MARGIN}" y1="{SVG_MARGIN}" x2="{SVG_MARGIN}" '
        f'y2="{SVG_HEIGHT - SVG_MARGIN}" stroke="black"/>',
    ]
    labels = sorted(curves) + sorted(baselines)
    for i, label in enumerate(labels):
        colour = SVG_PALETTE[i % len(SVG_PALETTE)]
        if label in curves:
            pts = " ".join(
                f"{x_of(e):.2f},{y_of(curves[label][e]):.2f}" for e in sorted(curves[label])
            )
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="2"/>')
        else:
            y = y_of(baselines[label])
            parts.append(
                f'<line x1="{SVG_MARGIN}" y1="{y:.2f}" x2="{SVG_WIDTH - SVG_MARGIN}" y2="{y:.2f}" '
                f'stroke="{colour}" stroke-width="2" stroke-dasharray="6 3"/>'
            )
        parts.append(
            f'<text x="{SVG_WIDTH - SVG_MARGIN + 4}" y="{SVG_MARGIN + 14 * i + 10}" '
            f'font-size="10" fill="{colour}">{label}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
