"""Pronunciation lexicon with per-utterance manual overrides.

A lexicon maps lowercase words to phone tuples. Overrides come from manual
transcriptions (word<TAB>space-separated phones) and are merged into a new
Lexicon object; the base lexicon, in memory and on disk, is never modified.
"""

from collections.abc import Callable, Mapping
from pathlib import Path

from .phones import PHONES


class OOVError(ValueError):
    """A word has no lexicon entry and no G2P fallback was supplied."""


class Lexicon:
    def __init__(
        self,
        entries: Mapping[str, tuple[str, ...]],
        g2p: Callable[[str], tuple[str, ...]] | None = None,
    ):
        self.entries = {w.lower(): tuple(p) for w, p in entries.items()}
        self.g2p = g2p

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.entries

    def phones(self, word: str) -> tuple[str, ...]:
        key = word.lower()
        if key in self.entries:
            return self.entries[key]
        if self.g2p is not None:
            return tuple(self.g2p(key))
        raise OOVError(f"word {word!r} has no lexicon entry and no G2P fallback")


def load_lexicon(path: str | Path, g2p=None) -> Lexicon:
    """Read a word<TAB>phones TSV; later duplicates win."""
    entries: dict[str, tuple[str, ...]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[1].strip():
                raise ValueError(f"{path} line {lineno}: expected word<TAB>phones, got {line!r}")
            entries[parts[0].lower()] = tuple(parts[1].split())
    return Lexicon(entries, g2p=g2p)


def parse_transcriptions(path: str | Path) -> dict[str, tuple[str, ...]]:
    """Manual transcriptions use the same word<TAB>phones TSV shape."""
    return dict(load_lexicon(path).entries)


def apply_lexicon_override(
    lexicon: Lexicon,
    transcriptions: Mapping[str, tuple[str, ...]] | None,
    inventory=PHONES,
) -> Lexicon:
    """New lexicon with *transcriptions* shadowing the base entries.

    Applied dynamically per utterance; the base object is left untouched.
    Every override phone must be in the model's inventory, otherwise the
    offending symbol is named and the whole override is rejected.
    """
    if not transcriptions:
        return lexicon
    allowed = set(inventory)
    merged = dict(lexicon.entries)
    for word, phones in transcriptions.items():
        phones = tuple(phones)
        if not phones:
            raise ValueError(f"manual transcription for {word!r} is empty")
        for sym in phones:
            if sym not in allowed:
                raise ValueError(f"phone {sym!r} (word {word!r}) is not in the model inventory")
        merged[word.lower()] = phones
    return Lexicon(merged, g2p=lexicon.g2p)
