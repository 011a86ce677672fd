import wave

import numpy as np
import pytest

import extractor
from extractor.jobs import Utterance

LEX_ENTRIES = {
    "the": ("DH", "AH"),
    "a": ("AH",),
    "cat": ("K", "AE", "T"),
    "sat": ("S", "AE", "T"),
    "on": ("AA", "N"),
    "mat": ("M", "AE", "T"),
    "dog": ("D", "AO", "G"),
    "ran": ("R", "AE", "N"),
    "down": ("D", "AW", "N"),
    "today": ("T", "AH", "D", "EY"),
    "about": ("AH", "B", "AW", "T"),
    "computer": ("K", "AH", "M", "P", "Y", "UW", "T", "ER"),
    "spoke": ("S", "P", "OW", "K"),
    "slowly": ("S", "L", "OW", "L", "IY"),
}

SENTENCES = (
    "the cat sat on the mat",
    "a dog ran down",
    "the computer spoke slowly",
    "sat about today",
    "the dog sat on a mat",
    "a cat ran about",
    "today the computer ran",
    "the mat sat down",
    "a dog spoke today",
    "the cat ran slowly down",
)


def write_wav(path, seconds=0.4, sr=16000, freq=220.0, seed=0):
    t = np.arange(int(seconds * sr)) / sr
    rng = np.random.default_rng(seed)
    sig = 0.6 * np.sin(2 * np.pi * freq * t) + 0.05 * rng.normal(size=t.size)
    pcm = np.clip(sig * 32767, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sr)
        w.writeframes(pcm.tobytes())
    return path


@pytest.fixture(scope="session")
def lexicon():
    return extractor.Lexicon(LEX_ENTRIES)


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory):
    return extractor.build_checkpoint(tmp_path_factory.mktemp("ck") / "base.pt", seed=3)


@pytest.fixture(scope="session")
def wav_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("wavs")
    for i in range(10):
        write_wav(d / f"u{i}.wav", seconds=0.3 + 0.05 * (i % 4), freq=180.0 + 25.0 * i, seed=i)
    return d


@pytest.fixture(scope="session")
def utterances(wav_dir):
    l1s = ("native", "GER", "ITA")
    return tuple(
        Utterance(
            utt_id=f"u{i}",
            text=text,
            audio=str(wav_dir / f"u{i}.wav"),
            l1=l1s[i % 3],
            corpus="isle",
        )
        for i, text in enumerate(SENTENCES)
    )
