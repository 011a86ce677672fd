"""Prosody-embedding extraction into the analysis toolkit's file formats.

Pulls per-phoneme duration/energy/pitch embeddings from a variance-adaptor
predictor stack (text-only inference or teacher-forced speech+text), applies
per-utterance pronunciation overrides, and averages frame features over time
spans for the external-baseline CSV route.
"""

from .jobs import ExtractionJob, Utterance, extract, extract_speech_text, extract_text_only
from .lexicon import Lexicon, OOVError, apply_lexicon_override, load_lexicon, parse_transcriptions
from .model import build_checkpoint, finetune, load_checkpoint
from .spans import extract_wav2vec_spans

__version__ = "0.1.0"

__all__ = [
    "ExtractionJob",
    "Utterance",
    "extract",
    "extract_speech_text",
    "extract_text_only",
    "Lexicon",
    "OOVError",
    "apply_lexicon_override",
    "load_lexicon",
    "parse_transcriptions",
    "build_checkpoint",
    "finetune",
    "load_checkpoint",
    "extract_wav2vec_spans",
]
