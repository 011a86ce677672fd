"""Prominence detection from TTS prosody embeddings.

Submodules: interchange (JSONL data model), syllabifier, aggregate (per-unit
feature matrices), distances (group-separation measures), pca, cluster
(k-means), neuralnet (feed-forward classifier), evalgrid (experiment grid and
report tables), synth (seeded synthetic data), cli.
"""

__version__ = "0.1.0"

__all__ = [
    "aggregate",
    "cli",
    "cluster",
    "distances",
    "evalgrid",
    "interchange",
    "neuralnet",
    "pca",
    "syllabifier",
    "synth",
]
