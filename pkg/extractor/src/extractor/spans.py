"""Frame features averaged over time spans, written as external-feature CSV.

The CSV shape (utt_id,unit_index,level,label,f0..f{d-1}) is exactly what the
analysis toolkit's external-feature importer reads. Frame features default
to the bundled filter-bank stand-in; pass frame_extractor to substitute a
real self-supervised encoder.
"""

import csv
import io
from pathlib import Path

import numpy as np

from .audio import FRAME_LENGTH, HOP, filterbank_frames, read_wav
from .jobs import atomic_write

LEVELS = ("word", "syllable")


def extract_wav2vec_spans(
    audio_path: str | Path,
    utt_id: str,
    spans,
    level: str,
    out_path: str | Path,
    frame_extractor=None,
    dim: int = 16,
) -> Path:
    """Average frame features per (start_s, end_s, label) span into CSV rows.

    Labels may be None (empty CSV cell = unlabeled). A span must have
    positive length and lie inside the audio.
    """
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    spans = list(spans)
    if not spans:
        raise ValueError("no spans given")
    samples, sr = read_wav(audio_path)
    duration_s = len(samples) / sr
    extractor = frame_extractor or filterbank_frames
    frames = np.asarray(extractor(samples, sr, dim), dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != dim:
        raise ValueError(f"frame extractor returned shape {frames.shape}, expected (*, {dim})")
    centers = (np.arange(frames.shape[0]) * HOP + FRAME_LENGTH / 2) / sr

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["utt_id", "unit_index", "level", "label"] + [f"f{i}" for i in range(dim)])
    for index, (start, end, label) in enumerate(spans):
        if not end > start:
            raise ValueError(f"span {index}: zero or negative length [{start}, {end})")
        if start < 0.0 or end > duration_s + FRAME_LENGTH / sr:
            raise ValueError(f"span {index}: [{start}, {end}) outside audio of {duration_s:.3f} s")
        picked = frames[(centers >= start) & (centers < end)]
        if picked.shape[0] == 0:
            # short spans between frame centers: fall back to the nearest frame
            picked = frames[[int(np.argmin(np.abs(centers - (start + end) / 2)))]]
        row = picked.mean(axis=0)
        if label is not None and label not in (0, 1):
            raise ValueError(f"span {index}: label must be 0/1/None, got {label!r}")
        writer.writerow(
            [utt_id, index, level, "" if label is None else label] + [repr(float(v)) for v in row]
        )
    return atomic_write(out_path, buf.getvalue())
