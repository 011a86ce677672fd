"""Extraction jobs: text or (audio, text) in, interchange JSONL out.

The emitted lines follow the interchange schema of the analysis toolkit
verbatim (same field order, compact separators), so its validate command
accepts them as-is. Writes are atomic: the whole file is serialized first,
then moved into place, so a failing job never clobbers an existing output.
"""

import json
import os
import re
import tempfile
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

from . import audio as audio_mod
from .lexicon import Lexicon, apply_lexicon_override
from .model import load_checkpoint, phone_ids, TAPS

MODES = ("speech_text", "text_only")

_TOKEN = re.compile(r"[a-z']+")


@dataclass(frozen=True)
class Utterance:
    utt_id: str
    text: str
    audio: str | None = None
    transcript: Mapping[str, tuple[str, ...]] | None = None  # manual pronunciations
    l1: str = "native"
    corpus: str = "tatoeba"
    word_labels: tuple | None = None  # per-word prominence, 0/1/None each


@dataclass(frozen=True)
class ExtractionJob:
    checkpoint: str | Path
    utterances: tuple[Utterance, ...] = field(default_factory=tuple)
    mode: str = "text_only"
    out_path: str | Path = "out.jsonl"
    epoch: int | None = None
    tap: str = "hidden"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.tap not in TAPS:
            raise ValueError(f"unknown tap {self.tap!r}, expected one of {TAPS}")
        if not self.utterances:
            raise ValueError("job has no utterances")
        if self.mode == "speech_text":
            missing = [u.utt_id for u in self.utterances if u.audio is None]
            if missing:
                raise ValueError(f"speech_text mode requires audio; missing for {missing}")
        if self.epoch is not None and (not isinstance(self.epoch, int) or self.epoch < 0):
            raise ValueError(f"epoch tag must be a non-negative integer, got {self.epoch!r}")


def tokenize(text: str) -> list[str]:
    words = _TOKEN.findall(text.lower())
    if not words:
        raise ValueError(f"no words in text {text!r}")
    return words


def utterance_phones(utt: Utterance, lexicon: Lexicon) -> tuple[list[str], list[dict]]:
    """Phoneme sequence and word spans, with the utterance's manual
    transcriptions (if any) dynamically shadowing the lexicon."""
    lex = apply_lexicon_override(lexicon, utt.transcript)
    phones: list[str] = []
    words: list[dict] = []
    surfaces = tokenize(utt.text)
    labels = utt.word_labels if utt.word_labels is not None else [None] * len(surfaces)
    if len(labels) != len(surfaces):
        raise ValueError(
            f"utterance {utt.utt_id!r}: {len(labels)} word labels for {len(surfaces)} words"
        )
    for surface, label in zip(surfaces, labels):
        pron = lex.phones(surface)
        words.append(
            {
                "surface": surface,
                "phone_start": len(phones),
                "phone_end": len(phones) + len(pron),
                "prominent": label,
            }
        )
        phones.extend(pron)
    return phones, words


def _record_line(job: ExtractionJob, utt: Utterance, phones, words, streams) -> str:
    obj = {
        "utt_id": utt.utt_id,
        "corpus": utt.corpus,
        "l1": utt.l1,
        "mode": job.mode,
        "epoch": job.epoch,
        "text": utt.text,
        "phonemes": list(phones),
        "words": words,
        "syllables": None,
        "embeddings": {
            name: [[float(v) for v in row] for row in streams[name]]
            for name in ("duration", "energy", "pitch")
        },
    }
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def atomic_write(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def extract(job: ExtractionJob, lexicon: Lexicon) -> Path:
    """Run *job*, returning the output path. Serializes everything before
    touching the output file."""
    model, _ = load_checkpoint(job.checkpoint)
    lines = []
    for utt in job.utterances:
        phones, words = utterance_phones(utt, lexicon)
        targets = None
        if job.mode == "speech_text":
            samples, sr = audio_mod.read_wav(utt.audio)
            targets = audio_mod.ground_truth_prosody(samples, sr, len(phones))
        streams = model.capture(phone_ids(phones), targets=targets, tap=job.tap)
        lines.append(_record_line(job, utt, phones, words, streams))
    return atomic_write(job.out_path, "\n".join(lines) + "\n")


def extract_text_only(job: ExtractionJob, lexicon: Lexicon) -> Path:
    if job.mode != "text_only":
        raise ValueError(f"job mode is {job.mode!r}, not text_only")
    return extract(job, lexicon)


def extract_speech_text(job: ExtractionJob, lexicon: Lexicon) -> Path:
    if job.mode != "speech_text":
        raise ValueError(f"job mode is {job.mode!r}, not speech_text")
    return extract(job, lexicon)
