"""WAV reading and ground-truth prosody targets.

Only stdlib wave + numpy: the corpus side of this toolkit runs on plain
16-bit PCM files. Phone alignment is uniform (equal sample spans per phone);
replace ground_truth_prosody with a forced aligner's output for serious use.
"""

import wave
from pathlib import Path
from dataclasses import dataclass

import numpy as np

FRAME_LENGTH = 1024
HOP = 256

F0_MIN = 50.0
F0_MAX = 600.0


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Mono float64 samples in [-1, 1] plus the sample rate."""
    with wave.open(str(path), "rb") as w:
        if w.getsampwidth() != 2:
            raise ValueError(f"{path}: only 16-bit PCM is supported, got width {w.getsampwidth()}")
        sr = w.getframerate()
        raw = w.readframes(w.getnframes())
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
        channels = w.getnchannels()
    if channels > 1:
        data = data.reshape(-1, channels).mean(axis=1)
    if data.size == 0:
        raise ValueError(f"{path}: empty audio")
    return data, sr


def num_frames(n_samples: int) -> int:
    if n_samples < FRAME_LENGTH:
        return 1
    return 1 + (n_samples - FRAME_LENGTH) // HOP


def autocorr_f0(chunk: np.ndarray, sr: int) -> float:
    """Fundamental frequency by autocorrelation peak; 0.0 when unvoiced."""
    chunk = chunk - chunk.mean()
    if len(chunk) < 2 or not np.any(chunk):
        return 0.0
    lag_min = max(2, int(sr / F0_MAX))
    lag_max = min(len(chunk) - 1, int(sr / F0_MIN))
    if lag_max <= lag_min:
        return 0.0
    ac = np.correlate(chunk, chunk, mode="full")[len(chunk) - 1 :]
    if ac[0] <= 0.0:
        return 0.0
    window = ac[lag_min : lag_max + 1] / ac[0]
    best = int(np.argmax(window))
    if window[best] < 0.3:  # weak periodicity: call it unvoiced
        return 0.0
    return sr / float(lag_min + best)


@dataclass(frozen=True)
class ProsodyTargets:
    """Per-phone ground truth: frame counts, f0 in Hz, RMS energy."""

    duration: np.ndarray  # (n_phones,) int
    pitch: np.ndarray  # (n_phones,) float
    energy: np.ndarray  # (n_phones,) float


def ground_truth_prosody(samples: np.ndarray, sr: int, n_phones: int) -> ProsodyTargets:
    """Uniform-alignment prosody targets for *n_phones* phones."""
    if n_phones < 1:
        raise ValueError("need at least one phone")
    total = num_frames(len(samples))
    base, extra = divmod(total, n_phones)
    durations = np.array([base + (1 if i < extra else 0) for i in range(n_phones)], dtype=np.int64)

    edges = np.linspace(0, len(samples), n_phones + 1).astype(int)
    pitch = np.zeros(n_phones)
    energy = np.zeros(n_phones)
    for i in range(n_phones):
        chunk = samples[edges[i] : max(edges[i] + 1, edges[i + 1])]
        energy[i] = float(np.sqrt(np.mean(chunk**2)))
        pitch[i] = autocorr_f0(chunk, sr)
    return ProsodyTargets(duration=durations, pitch=pitch, energy=energy)


def filterbank_frames(samples: np.ndarray, sr: int, dim: int = 16) -> np.ndarray:
    """Deterministic log filter-bank features, one row per analysis frame.

    Stands in for a self-supervised frame encoder: rfft magnitudes pooled
    into *dim* equal bands, log-compressed. Plug a real model in through the
    frame_extractor hooks where offered.
    """
    t = num_frames(len(samples))
    out = np.zeros((t, dim))
    for i in range(t):
        chunk = samples[i * HOP : i * HOP + FRAME_LENGTH]
        if len(chunk) < FRAME_LENGTH:
            chunk = np.pad(chunk, (0, FRAME_LENGTH - len(chunk)))
        mag = np.abs(np.fft.rfft(chunk * np.hanning(FRAME_LENGTH)))
        bands = np.array_split(mag[1:], dim)
        out[i] = [np.log1p(float(b.mean())) for b in bands]
    return out
