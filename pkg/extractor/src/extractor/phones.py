"""The model's phone inventory (stressless ARPAbet) and a tiny rule G2P."""

PHONES = (
    # vowels
    "AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY",
    "OW", "OY", "UH", "UW",
    # consonants
    "B", "CH", "D", "DH", "F", "G", "HH", "JH", "K", "L", "M", "N", "NG",
    "P", "R", "S", "SH", "T", "TH", "V", "W", "Y", "Z", "ZH",
)

PHONE_INDEX = {p: i for i, p in enumerate(PHONES)}

VOWELS = frozenset(PHONES[:15])

# crude letter-to-phone fallback; digraphs first, then single letters
_DIGRAPHS = {
    "ch": ("CH",), "sh": ("SH",), "th": ("TH",), "ng": ("NG",),
    "ph": ("F",), "qu": ("K", "W"), "ck": ("K",), "ee": ("IY",),
    "oo": ("UW",), "ou": ("AW",), "ai": ("EY",), "ea": ("IY",),
}
_SINGLES = {
    "a": ("AE",), "b": ("B",), "c": ("K",), "d": ("D",), "e": ("EH",),
    "f": ("F",), "g": ("G",), "h": ("HH",), "i": ("IH",), "j": ("JH",),
    "k": ("K",), "l": ("L",), "m": ("M",), "n": ("N",), "o": ("AA",),
    "p": ("P",), "q": ("K",), "r": ("R",), "s": ("S",), "t": ("T",),
    "u": ("AH",), "v": ("V",), "w": ("W",), "x": ("K", "S"), "y": ("Y",),
    "z": ("Z",),
}


def rule_g2p(word: str) -> tuple[str, ...]:
    """Letter-rule fallback pronunciation for out-of-lexicon words.

    Greedy left-to-right over a small digraph table, then single letters;
    non-alphabetic characters are skipped. Good enough to keep a pipeline
    running, nothing more.
    """
    word = word.lower()
    out: list[str] = []
    i = 0
    while i < len(word):
        pair = word[i : i + 2]
        if pair in _DIGRAPHS:
            out.extend(_DIGRAPHS[pair])
            i += 2
            continue
        if word[i] in _SINGLES:
            out.extend(_SINGLES[word[i]])
        i += 1
    if not out:
        raise ValueError(f"no pronounceable letters in {word!r}")
    return tuple(out)
