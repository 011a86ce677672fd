"""On-disk data model for prosody-embedding corpora.

One utterance per JSONL line: phoneme sequence, labeled word/syllable spans
and three per-phoneme embedding streams (duration, energy, pitch). This file
format decouples embedding extraction from all downstream analysis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

CORPORA = ("tatoeba", "isle", "synthetic")
L1S = ("native", "GER", "ITA", "synthetic")
MODES = ("speech_text", "text_only")

DEFAULT_DIM = 256


class InterchangeError(Exception):
    """Malformed or invalid interchange data."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class WordSpan:
    """Half-open phone-index span for one word, with optional prominence label."""

    surface: str
    phone_start: int
    phone_end: int
    prominent: int | None = None  # 1 = prominent, 0 = not, None = unlabeled


@dataclass(frozen=True)
class SyllableSpan:
    """Half-open phone-index span for one syllable, with optional stress label."""

    phone_start: int
    phone_end: int
    stressed: int | None = None


@dataclass
class EmbeddingBlock:
    """Per-phoneme embedding streams, each (num_phonemes x dim)."""

    duration: np.ndarray
    energy: np.ndarray
    pitch: np.ndarray

    def streams(self) -> dict[str, np.ndarray]:
        return {"duration": self.duration, "energy": self.energy, "pitch": self.pitch}

    @property
    def dim(self) -> int:
        return int(self.duration.shape[1]) if self.duration.ndim == 2 else 0


@dataclass
class UtteranceRecord:
    """One utterance with phonemes, labeled spans and embedding streams."""

    utt_id: str
    corpus: str
    l1: str
    mode: str
    text: str
    phonemes: list[str]
    words: list[WordSpan]
    embeddings: EmbeddingBlock
    syllables: list[SyllableSpan] | None = None
    epoch: int | None = None


def validate(record: UtteranceRecord, vowels: set[str] | None = None) -> list[str]:
    """Return every invariant violation in *record* (empty list = ok).

    *vowels* is the phone set used for the one-vowel-per-syllable check;
    defaults to the shipped ARPAbet inventory.
    """
    if vowels is None:
        from .syllabifier import DEFAULT_INVENTORY  # deferred: syllabifier imports this module

        vowels = DEFAULT_INVENTORY.vowels

    v: list[str] = []
    n = len(record.phonemes)

    if record.corpus not in CORPORA:
        v.append(f"unknown corpus {record.corpus!r}")
    if record.l1 not in L1S:
        v.append(f"unknown l1 {record.l1!r}")
    if record.mode not in MODES:
        v.append(f"unknown mode {record.mode!r}")
    if record.epoch is not None and (not isinstance(record.epoch, int) or record.epoch < 0):
        v.append(f"epoch must be a non-negative integer or null, got {record.epoch!r}")
    if not all(isinstance(p, str) and p for p in record.phonemes):
        v.append("phonemes must be non-empty strings")

    prev_end = 0
    for i, w in enumerate(record.words):
        if not (0 <= w.phone_start < w.phone_end <= n):
            v.append(f"word {i} ({w.surface!r}): span [{w.phone_start},{w.phone_end}) outside [0,{n})")
            continue
        if w.phone_start < prev_end:
            v.append(f"word {i} ({w.surface!r}): overlapping spans")
        prev_end = max(prev_end, w.phone_end)
        if w.prominent not in (0, 1, None):
            v.append(f"word {i} ({w.surface!r}): prominent label must be 0/1/null")

    if record.syllables is not None:
        word_bounds = [(w.phone_start, w.phone_end) for w in record.words]
        covered: dict[int, list[tuple[int, int]]] = {i: [] for i in range(len(word_bounds))}
        for j, s in enumerate(record.syllables):
            if not (0 <= s.phone_start < s.phone_end <= n):
                v.append(f"syllable {j}: span [{s.phone_start},{s.phone_end}) outside [0,{n})")
                continue
            if s.stressed not in (0, 1, None):
                v.append(f"syllable {j}: stressed label must be 0/1/null")
            host = [i for i, (ws, we) in enumerate(word_bounds) if ws <= s.phone_start and s.phone_end <= we]
            if not host:
                v.append(f"syllable {j}: span [{s.phone_start},{s.phone_end}) not inside any word span")
            else:
                covered[host[0]].append((s.phone_start, s.phone_end))
            nuclei = sum(1 for p in record.phonemes[s.phone_start : s.phone_end] if strip_stress(p) in vowels)
            if nuclei != 1:
                v.append(f"syllable {j}: expected exactly one vowel, found {nuclei}")
        for i, spans in covered.items():
            ws, we = word_bounds[i]
            spans = sorted(spans)
            edges = [ws] + [e for _, e in spans]
            starts = [s for s, _ in spans] + [we]
            if edges != starts:
                v.append(f"word {i}: syllable spans do not partition [{ws},{we}) exactly")

    shapes = set()
    for name, mat in record.embeddings.streams().items():
        if not isinstance(mat, np.ndarray) or mat.ndim != 2:
            v.append(f"{name} stream must be a 2-D matrix")
            continue
        shapes.add(mat.shape)
        if mat.shape[0] != n:
            v.append(f"{name} stream: row-count mismatch ({mat.shape[0]} rows, {n} phonemes)")
        if not np.all(np.isfinite(mat)):
            v.append(f"{name} stream contains non-finite entries")
    if len(shapes) > 1:
        v.append(f"embedding streams disagree on shape: {sorted(shapes)}")

    return v


def strip_stress(phone: str) -> str:
    """Drop a trailing lexical-stress digit (AH0 -> AH)."""
    return phone[:-1] if phone and phone[-1].isdigit() else phone


# ---------------------------------------------------------------------------
# JSONL serialization

def _record_to_obj(r: UtteranceRecord) -> dict:
    return {
        "utt_id": r.utt_id,
        "corpus": r.corpus,
        "l1": r.l1,
        "mode": r.mode,
        "epoch": r.epoch,
        "text": r.text,
        "phonemes": list(r.phonemes),
        "words": [
            {"surface": w.surface, "phone_start": w.phone_start, "phone_end": w.phone_end, "prominent": w.prominent}
            for w in r.words
        ],
        "syllables": None
        if r.syllables is None
        else [{"phone_start": s.phone_start, "phone_end": s.phone_end, "stressed": s.stressed} for s in r.syllables],
        "embeddings": {name: mat.tolist() for name, mat in r.embeddings.streams().items()},
    }


def _obj_to_record(obj: dict) -> UtteranceRecord:
    emb = obj["embeddings"]
    syl = obj.get("syllables")
    return UtteranceRecord(
        utt_id=obj["utt_id"],
        corpus=obj["corpus"],
        l1=obj["l1"],
        mode=obj["mode"],
        epoch=obj.get("epoch"),
        text=obj["text"],
        phonemes=list(obj["phonemes"]),
        words=[
            WordSpan(w["surface"], w["phone_start"], w["phone_end"], w.get("prominent"))
            for w in obj["words"]
        ],
        syllables=None if syl is None else [SyllableSpan(s["phone_start"], s["phone_end"], s.get("stressed")) for s in syl],
        embeddings=EmbeddingBlock(
            duration=np.asarray(emb["duration"], dtype=np.float64),
            energy=np.asarray(emb["energy"], dtype=np.float64),
            pitch=np.asarray(emb["pitch"], dtype=np.float64),
        ),
    )


def load(path: str | Path, vowels: set[str] | None = None) -> list[UtteranceRecord]:
    """Read and validate a JSONL interchange file, preserving line order."""
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                record = _obj_to_record(obj)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InterchangeError(f"malformed record: {exc}", line=lineno) from exc
            violations = validate(record, vowels=vowels)
            if violations:
                raise InterchangeError("invalid record: " + "; ".join(violations), line=lineno)
            records.append(record)
    return records


def save(records: Iterable[UtteranceRecord], path: str | Path, vowels: set[str] | None = None) -> None:
    """Write records as canonical JSONL; refuses to write any invalid record."""
    records = list(records)
    for i, r in enumerate(records):
        violations = validate(r, vowels=vowels)
        if violations:
            raise ValueError(f"record {i} ({r.utt_id!r}) is invalid: " + "; ".join(violations))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(json.dumps(_record_to_obj(r), ensure_ascii=False, separators=(",", ":")))
            f.write("\n")


def records_equal(a: UtteranceRecord, b: UtteranceRecord) -> bool:
    """Field-by-field equality, with exact comparison of embedding entries."""
    if (a.utt_id, a.corpus, a.l1, a.mode, a.epoch, a.text, a.phonemes, a.words, a.syllables) != (
        b.utt_id, b.corpus, b.l1, b.mode, b.epoch, b.text, b.phonemes, b.words, b.syllables,
    ):
        return False
    return all(
        np.array_equal(a.embeddings.streams()[n], b.embeddings.streams()[n])
        for n in ("duration", "energy", "pitch")
    )
