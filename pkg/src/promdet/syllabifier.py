"""Maximal-onset syllabification of ARPAbet phone sequences.

Each syllable gets exactly one vowel nucleus; the consonant cluster before a
nucleus is the longest legal English onset. Lexical-stress digits on vowels
(AH0, EY1, ...) are stripped before lookup, so plain G2P output works as-is.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .interchange import WordSpan, strip_stress

ARPABET_VOWELS = frozenset(
    "AA AE AH AO AW AY EH ER EY IH IY OW OY UH UW".split()
)

# English onset clusters (two and three consonants). Empty and single-consonant
# onsets are always legal and are handled structurally in is_legal_onset.
_ONSET_CLUSTERS = """
P R|T R|K R|B R|D R|G R|F R|TH R|SH R
P L|K L|B L|G L|F L|S L
T W|K W|D W|S W|G W|SH W|TH W|HH W
S P|S T|S K|S F|S M|S N
P Y|K Y|B Y|G Y|F Y|V Y|TH Y|M Y|HH Y
S P R|S P L|S T R|S K R|S K W|S K L|S P Y|S K Y
"""


class NoVowelWarning(UserWarning):
    """A word with zero vowels was syllabified as one degenerate span."""


@dataclass(frozen=True)
class PhoneInventory:
    """Vowel set plus the legal multi-consonant onset clusters."""

    vowels: frozenset[str]
    legal_onsets: frozenset[tuple[str, ...]] = field(default_factory=frozenset)

    def __post_init__(self):
        bad = [c for cluster in self.legal_onsets for c in cluster if strip_stress(c) in self.vowels]
        if bad:
            raise ValueError(f"onset clusters contain vowels: {sorted(set(bad))}")


def _default_inventory() -> PhoneInventory:
    clusters = frozenset(
        tuple(entry.split())
        for line in _ONSET_CLUSTERS.strip().splitlines()
        for entry in line.split("|")
    )
    return PhoneInventory(vowels=ARPABET_VOWELS, legal_onsets=clusters | {()})


DEFAULT_INVENTORY = _default_inventory()


def load_inventory(path: str | Path) -> PhoneInventory:
    """Read a {"vowels": [...], "legal_onsets": [[...], ...]} JSON file."""
    with open(path, "r", encoding="utf-8") as f:
        obj = json.load(f)
    return PhoneInventory(
        vowels=frozenset(obj["vowels"]),
        legal_onsets=frozenset(tuple(c) for c in obj["legal_onsets"]) | {()},
    )


def is_legal_onset(cluster: Sequence[str], inv: PhoneInventory = DEFAULT_INVENTORY) -> bool:
    """True iff *cluster* may start a syllable.

    The empty cluster and any single consonant are legal by construction;
    longer clusters are checked against the inventory table.
    """
    stripped = tuple(strip_stress(p) for p in cluster)
    if any(p in inv.vowels for p in stripped):
        raise ValueError(f"onset cluster contains a vowel: {list(cluster)}")
    if len(stripped) <= 1:
        return True
    return stripped in inv.legal_onsets


def syllabify_word(
    phones: Sequence[str], inv: PhoneInventory = DEFAULT_INVENTORY
) -> list[tuple[int, int]]:
    """Split a word's phone sequence into syllable spans (half-open indices).

    Spans partition [0, len(phones)); each holds exactly one vowel, with the
    maximal legal onset attached to it. A zero-vowel word yields a single
    degenerate whole-word span and a NoVowelWarning (non-native transcripts
    contain such reduced forms).
    """
    if not phones:
        raise ValueError("cannot syllabify an empty phone sequence")
    n = len(phones)
    nuclei = [i for i, p in enumerate(phones) if strip_stress(p) in inv.vowels]
    if not nuclei:
        warnings.warn(
            f"word {list(phones)} has no vowel; emitting one degenerate span", NoVowelWarning
        )
        return [(0, n)]

    boundaries = [0]
    for prev, cur in zip(nuclei, nuclei[1:]):
        cluster = [phones[i] for i in range(prev + 1, cur)]
        onset_len = len(cluster)
        while onset_len > 0 and not is_legal_onset(cluster[len(cluster) - onset_len :], inv):
            onset_len -= 1
        boundaries.append(cur - onset_len)
    boundaries.append(n)
    return list(zip(boundaries, boundaries[1:]))


def syllabify_record(record, inv: PhoneInventory = DEFAULT_INVENTORY) -> list:
    """Syllable spans for every word span of an interchange record.

    Produced spans carry no stress labels; externally supplied spans (when the
    record already has them) should be preferred.
    """
    from .interchange import SyllableSpan

    spans = []
    for w in record.words:
        word_phones = record.phonemes[w.phone_start : w.phone_end]
        for start, end in syllabify_word(word_phones, inv):
            spans.append(SyllableSpan(w.phone_start + start, w.phone_start + end, stressed=None))
    return spans


def word_spans(
    words: Sequence[str],
    per_word_phone_counts: Sequence[int],
    num_phonemes: int | None = None,
) -> list[WordSpan]:
    """Lay out contiguous word spans from per-word phone counts."""
    if len(words) != len(per_word_phone_counts):
        raise ValueError(
            f"{len(words)} words but {len(per_word_phone_counts)} phone counts"
        )
    if any(c < 1 for c in per_word_phone_counts):
        raise ValueError("every word needs at least one phone")
    total = sum(per_word_phone_counts)
    if num_phonemes is not None and total != num_phonemes:
        raise ValueError(f"phone counts sum to {total}, expected {num_phonemes}")
    spans = []
    start = 0
    for surface, count in zip(words, per_word_phone_counts):
        spans.append(WordSpan(surface=surface, phone_start=start, phone_end=start + count))
        start += count
    return spans
