"""Phoneme-to-unit pooling: word/syllable feature rows from embedding streams.

Each unit row is the arithmetic mean (double precision) of the stream's rows
over the unit's phone span. Unlabeled units are kept with a mask flag so PCA
can still plot them; classifiers drop masked rows.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .interchange import UtteranceRecord

STREAMS = ("duration", "energy", "pitch")
STREAM_TO_TAG = {"energy": "E", "duration": "D", "pitch": "P"}
SET_TAGS = ("E", "D", "P", "EDP", "HB", "W2V")
LEVELS = ("word", "syllable")

CSV_KEY_COLUMNS = ("utt_id", "unit_index", "level", "label")


@dataclass
class FeatureMatrix:
    """Unit-level feature rows with binary labels and per-row provenance."""

    rows: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int, 0/1 (value at masked rows is 0 and meaningless)
    labeled: np.ndarray  # (n,) bool mask; False = unit had a null label
    utt_ids: list[str]
    unit_indices: np.ndarray  # (n,) int, unit position within its utterance
    level: str
    set_tag: str
    mode: str | None = None
    l1: str | None = None
    epoch: int | None = None

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2:
            raise ValueError("rows must be 2-D")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.labeled = np.asarray(self.labeled, dtype=bool)
        self.unit_indices = np.asarray(self.unit_indices, dtype=np.int64)
        n = self.rows.shape[0]
        if not (len(self.labels) == len(self.labeled) == len(self.utt_ids) == len(self.unit_indices) == n):
            raise ValueError("row/label/meta lengths disagree")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("rows contain non-finite entries")
        if np.any((self.labels != 0) & (self.labels != 1)):
            raise ValueError("labels must be binary")
        if self.level not in LEVELS:
            raise ValueError(f"unknown level {self.level!r}")
        if self.set_tag not in SET_TAGS:
            raise ValueError(f"unknown set tag {self.set_tag!r}")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def take(self, indices) -> "FeatureMatrix":
        """New matrix holding the given rows (meta sliced alongside)."""
        indices = np.asarray(indices)
        return replace(
            self,
            rows=self.rows[indices],
            labels=self.labels[indices],
            labeled=self.labeled[indices],
            utt_ids=[self.utt_ids[i] for i in np.atleast_1d(indices)],
            unit_indices=self.unit_indices[indices],
        )

    def labeled_only(self) -> "FeatureMatrix":
        return self.take(np.flatnonzero(self.labeled))


def _empty(level: str, set_tag: str, d: int = 0, **meta) -> FeatureMatrix:
    return FeatureMatrix(
        rows=np.zeros((0, d)),
        labels=np.zeros(0, dtype=np.int64),
        labeled=np.zeros(0, dtype=bool),
        utt_ids=[],
        unit_indices=np.zeros(0, dtype=np.int64),
        level=level,
        set_tag=set_tag,
        **meta,
    )


def unit_embeddings(record: UtteranceRecord, level: str, stream: str) -> FeatureMatrix:
    """Per-unit mean rows of one stream for one record.

    Word level uses the record's word spans; syllable level requires syllable
    spans (run the syllabifier first if the extractor did not supply them).
    """
    if stream not in STREAMS:
        raise ValueError(f"unknown stream {stream!r}")
    if level == "word":
        units = [(w.phone_start, w.phone_end, w.prominent) for w in record.words]
    elif level == "syllable":
        if record.syllables is None:
            raise ValueError(f"record {record.utt_id!r} has no syllable spans")
        units = [(s.phone_start, s.phone_end, s.stressed) for s in record.syllables]
    else:
        raise ValueError(f"unknown level {level!r}")

    mat = record.embeddings.streams()[stream]
    rows = np.empty((len(units), mat.shape[1]), dtype=np.float64)
    labels = np.zeros(len(units), dtype=np.int64)
    labeled = np.zeros(len(units), dtype=bool)
    for i, (start, end, label) in enumerate(units):
        rows[i] = mat[start:end].mean(axis=0)
        if label is not None:
            labels[i] = label
            labeled[i] = True
    return FeatureMatrix(
        rows=rows,
        labels=labels,
        labeled=labeled,
        utt_ids=[record.utt_id] * len(units),
        unit_indices=np.arange(len(units)),
        level=level,
        set_tag=STREAM_TO_TAG[stream],
        mode=record.mode,
        l1=record.l1,
        epoch=record.epoch,
    )


def _common(values: Iterable) -> object:
    vals = set(values)
    return vals.pop() if len(vals) == 1 else None


def stack_fragments(fragments: Sequence[FeatureMatrix]) -> FeatureMatrix:
    """Concatenate per-record fragments, ordered by (utt_id, unit index)."""
    if not fragments:
        raise ValueError("no fragments to stack")
    level = _common(f.level for f in fragments)
    set_tag = _common(f.set_tag for f in fragments)
    if level is None or set_tag is None:
        raise ValueError("fragments mix levels or set tags")
    widths = {f.d for f in fragments}
    if len(widths) > 1:
        raise ValueError(f"fragments disagree on feature width: {sorted(widths)}")
    ordered = sorted(range(len(fragments)), key=lambda i: (fragments[i].utt_ids[0] if fragments[i].n else "", i))
    frags = [fragments[i] for i in ordered]
    l1s = {f.l1 for f in frags}
    l1 = l1s.pop() if len(l1s) == 1 else ("nonnative" if l1s <= {"GER", "ITA"} else None)
    return FeatureMatrix(
        rows=np.vstack([f.rows for f in frags]),
        labels=np.concatenate([f.labels for f in frags]),
        labeled=np.concatenate([f.labeled for f in frags]),
        utt_ids=[u for f in frags for u in f.utt_ids],
        unit_indices=np.concatenate([f.unit_indices for f in frags]),
        level=level,
        set_tag=set_tag,
        mode=_common(f.mode for f in frags),
        l1=l1,
        epoch=_common(f.epoch for f in frags),
    )


def build_feature_matrix(records: Sequence[UtteranceRecord], level: str, set_tag: str) -> FeatureMatrix:
    """Assemble the full unit matrix for a feature set (E, D, P or EDP)."""
    if set_tag == "EDP":
        e = build_feature_matrix(records, level, "E")
        d = build_feature_matrix(records, level, "D")
        p = build_feature_matrix(records, level, "P")
        return concat_feature_sets(e, d, p)
    stream = {v: k for k, v in STREAM_TO_TAG.items()}.get(set_tag)
    if stream is None:
        raise ValueError(f"set {set_tag!r} is not derivable from embedding streams")
    if not records:
        return _empty(level, set_tag)
    return stack_fragments([unit_embeddings(r, level, stream) for r in records])


def concat_feature_sets(e: FeatureMatrix, d: FeatureMatrix, p: FeatureMatrix) -> FeatureMatrix:
    """Row-wise E|D|P concatenation into the EDP set."""
    for other, tag in ((e, "E"), (d, "D"), (p, "P")):
        if other.set_tag != tag:
            raise ValueError(f"expected set {tag}, got {other.set_tag}")
    for other in (d, p):
        if (
            other.utt_ids != e.utt_ids
            or not np.array_equal(other.unit_indices, e.unit_indices)
            or not np.array_equal(other.labels, e.labels)
            or not np.array_equal(other.labeled, e.labeled)
            or other.level != e.level
        ):
            raise ValueError("feature sets disagree on units or labels")
    return replace(
        e,
        rows=np.hstack([e.rows, d.rows, p.rows]),
        set_tag="EDP",
        mode=e.mode if e.mode == d.mode == p.mode else None,
        epoch=e.epoch if e.epoch == d.epoch == p.epoch else None,
    )


def import_external_features(path: str | Path, set_tag: str, level: str) -> FeatureMatrix:
    """Load an externally produced per-unit feature CSV (heuristics-based or
    Wav2Vec span features)."""
    if set_tag not in ("HB", "W2V"):
        raise ValueError(f"external sets are HB or W2V, got {set_tag!r}")
    return load_features(path, level, set_tag)


def load_features(path: str | Path, level: str, set_tag: str = "EDP") -> FeatureMatrix:
    """Load any per-unit feature CSV.

    Expected header: utt_id,unit_index,level,label,f0,...,f{d-1}. An empty
    label cell marks an unlabeled unit. Rows for the other level are skipped.
    The file does not record which feature set it holds, so set_tag is taken
    on trust as matrix metadata.
    """
    if set_tag not in SET_TAGS:
        raise ValueError(f"unknown set tag {set_tag!r}")
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        if tuple(header[:4]) != CSV_KEY_COLUMNS:
            raise ValueError(f"{path}: header must start with {','.join(CSV_KEY_COLUMNS)}")
        width = len(header) - 4
        rows, labels, labeled, utt_ids, unit_indices = [], [], [], [], []
        for lineno, cells in enumerate(reader, 2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} cells, got {len(cells)}")
            if cells[2] != level:
                continue
            label_cell = cells[3].strip()
            if label_cell == "":
                labels.append(0)
                labeled.append(False)
            elif label_cell in ("0", "1"):
                labels.append(int(label_cell))
                labeled.append(True)
            else:
                raise ValueError(f"{path}:{lineno}: label must be 0, 1 or empty, got {label_cell!r}")
            try:
                rows.append([float(c) for c in cells[4:]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric feature cell ({exc})") from None
            utt_ids.append(cells[0])
            unit_indices.append(int(cells[1]))
    if not rows:
        warnings.warn(f"{path}: no {level}-level feature rows found")
        return _empty(level, set_tag, d=width)
    return FeatureMatrix(
        rows=np.array(rows, dtype=np.float64),
        labels=np.array(labels, dtype=np.int64),
        labeled=np.array(labeled, dtype=bool),
        utt_ids=utt_ids,
        unit_indices=np.array(unit_indices, dtype=np.int64),
        level=level,
        set_tag=set_tag,
    )


def export_features(fm: FeatureMatrix, path: str | Path) -> None:
    """Write a FeatureMatrix in the external-feature CSV schema."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(list(CSV_KEY_COLUMNS) + [f"f{j}" for j in range(fm.d)])
        for i in range(fm.n):
            label = str(int(fm.labels[i])) if fm.labeled[i] else ""
            writer.writerow(
                [fm.utt_ids[i], int(fm.unit_indices[i]), fm.level, label]
                + [repr(float(x)) for x in fm.rows[i]]
            )
