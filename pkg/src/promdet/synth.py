"""Seeded generator for labeled synthetic interchange records.

The class-conditional model is Gaussian: every phoneme row of a prominent
word is drawn around +gap*scale/2 along the unit diagonal, every other row
around -gap*scale/2, with isotropic noise sigma. The centroid distance
between classes therefore equals gap*scale per stream, which makes Bayes
error (and hence sensible accuracy thresholds) computable in tests.

Structure is shared between modes: utterance i has the same words, phones
and labels in speech_text and text_only, but embeddings are redrawn and the
gap is multiplied by the per-mode scale, so speech_text separates at least
as well as text_only whenever its scale is larger.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interchange import EmbeddingBlock, SyllableSpan, UtteranceRecord, WordSpan

_CONSONANTS = ("K", "T", "P", "S", "M", "N", "B", "D", "L", "R")
_VOWELS = ("AA", "AE", "IH", "UW", "EH")


@dataclass(frozen=True)
class SynthConfig:
    num_utterances: int
    dim: int = 16
    words_per_utterance: tuple[int, int] = (3, 8)
    phones_per_word: tuple[int, int] = (2, 6)
    gap_energy: float = 30.0
    gap_duration: float = 4.0
    gap_pitch: float = 3.0
    scale_speech_text: float = 1.5
    scale_text_only: float = 1.0
    sigma: float = 1.0
    seed: int = 0
    l1_cycle: tuple[str, ...] = ("native", "GER", "ITA")
    corpus: str = "synthetic"
    epoch: int | None = None

    def __post_init__(self):
        if self.num_utterances < 1:
            raise ValueError("num_utterances must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        for gap in (self.gap_energy, self.gap_duration, self.gap_pitch):
            if gap < 0:
                raise ValueError("gaps must be >= 0")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if self.scale_speech_text <= 0 or self.scale_text_only <= 0:
            raise ValueError("mode scales must be > 0")
        lo, hi = self.words_per_utterance
        if not 1 <= lo <= hi:
            raise ValueError("bad words_per_utterance range")
        lo, hi = self.phones_per_word
        if not 1 <= lo <= hi:
            raise ValueError("bad phones_per_word range")

    def gap_for(self, stream: str) -> float:
        return {"energy": self.gap_energy, "duration": self.gap_duration, "pitch": self.gap_pitch}[stream]

    def scale_for(self, mode: str) -> float:
        return self.scale_speech_text if mode == "speech_text" else self.scale_text_only


def paperlike(num_utterances: int = 120, seed: int = 0) -> SynthConfig:
    """Preset whose stream geometry orders the streams the way real prosody
    embeddings do: energy separates far better than duration, duration
    slightly better than pitch, and speech_text better than text_only."""
    return SynthConfig(num_utterances=num_utterances, seed=seed)


def _build_word(rng: np.random.Generator, config: SynthConfig):
    """Phones for one word plus within-word syllable edges; every syllable
    is V or CV so it carries exactly one vowel."""
    lo, hi = config.phones_per_word
    length = int(rng.integers(lo, hi + 1))
    phones: list[str] = []
    edges: list[int] = [0]
    while len(phones) < length:
        remaining = length - len(phones)
        if remaining >= 2 and rng.random() < 0.6:
            phones.append(_CONSONANTS[rng.integers(len(_CONSONANTS))])
        phones.append(_VOWELS[rng.integers(len(_VOWELS))])
        edges.append(len(phones))
    return phones, edges


def _utterance(index: int, config: SynthConfig) -> list[UtteranceRecord]:
    rng = np.random.default_rng(config.seed ^ index)
    l1 = config.l1_cycle[index % len(config.l1_cycle)]
    lo, hi = config.words_per_utterance
    n_words = int(rng.integers(lo, hi + 1))

    phonemes: list[str] = []
    words: list[WordSpan] = []
    syllables: list[SyllableSpan] = []
    prominent_flags: list[int] = []
    for _ in range(n_words):
        phones, edges = _build_word(rng, config)
        start = len(phonemes)
        prominent = int(rng.integers(2))
        prominent_flags.append(prominent)
        words.append(
            WordSpan(
                surface="".join(p.lower() for p in phones),
                phone_start=start,
                phone_end=start + len(phones),
                prominent=prominent,
            )
        )
        # native syllable stress has no ground truth; leave it unlabeled
        stressed = None if l1 == "native" else prominent
        for a, b in zip(edges[:-1], edges[1:]):
            syllables.append(SyllableSpan(phone_start=start + a, phone_end=start + b, stressed=stressed))
        phonemes.extend(phones)

    direction = np.ones(config.dim) / np.sqrt(config.dim)
    signs = np.concatenate(
        [np.full(w.phone_end - w.phone_start, 1.0 if p else -1.0) for w, p in zip(words, prominent_flags)]
    )
    text = " ".join(w.surface for w in words)

    records = []
    for mode in ("speech_text", "text_only"):
        scale = config.scale_for(mode)
        streams = {}
        for stream in ("duration", "energy", "pitch"):
            offset = 0.5 * config.gap_for(stream) * scale
            noise = rng.normal(0.0, config.sigma, size=(len(phonemes), config.dim))
            streams[stream] = signs[:, None] * offset * direction[None, :] + noise
        records.append(
            UtteranceRecord(
                utt_id=f"synth-{index:05d}",
                corpus=config.corpus,
                l1=l1,
                mode=mode,
                epoch=config.epoch,
                text=text,
                phonemes=list(phonemes),
                words=list(words),
                syllables=list(syllables),
                embeddings=EmbeddingBlock(
                    duration=streams["duration"], energy=streams["energy"], pitch=streams["pitch"]
                ),
            )
        )
    return records


def generate(config: SynthConfig) -> list[UtteranceRecord]:
    """Both-mode records for num_utterances utterances, deterministic by seed."""
    out: list[UtteranceRecord] = []
    for index in range(config.num_utterances):
        out.extend(_utterance(index, config))
    return out
