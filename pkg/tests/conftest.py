import numpy as np
import pytest

from promdet.interchange import EmbeddingBlock, SyllableSpan, UtteranceRecord, WordSpan


def make_record(
    utt_id="u1",
    phonemes=("K", "AE", "T", "S", "IH", "T"),
    words=((0, 3, 1), (3, 6, 0)),
    syllables=((0, 3, 1), (3, 6, 0)),
    dim=4,
    mode="speech_text",
    l1="GER",
    corpus="synthetic",
    epoch=None,
    seed=0,
):
    """Small valid record; word/syllable tuples are (start, end, label)."""
    rng = np.random.default_rng(seed)
    n = len(phonemes)
    emb = EmbeddingBlock(
        duration=rng.normal(size=(n, dim)),
        energy=rng.normal(size=(n, dim)),
        pitch=rng.normal(size=(n, dim)),
    )
    word_spans = [
        WordSpan(surface=f"w{i}", phone_start=a, phone_end=b, prominent=lab)
        for i, (a, b, lab) in enumerate(words)
    ]
    syl_spans = None
    if syllables is not None:
        syl_spans = [SyllableSpan(phone_start=a, phone_end=b, stressed=lab) for a, b, lab in syllables]
    return UtteranceRecord(
        utt_id=utt_id,
        corpus=corpus,
        l1=l1,
        mode=mode,
        epoch=epoch,
        text=" ".join(w.surface for w in word_spans),
        phonemes=list(phonemes),
        words=word_spans,
        syllables=syl_spans,
        embeddings=emb,
    )


@pytest.fixture
def record():
    return make_record()
