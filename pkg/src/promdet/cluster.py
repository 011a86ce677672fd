"""Unsupervised prominence detection: seeded k-means++ with Lloyd iterations.

Written from scratch so the per-iteration inertia trace is observable (it must
be non-increasing) and so runs are bit-reproducible from a seed. k defaults to
2 for the binary stressed/unstressed task but is not hard-coded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aggregate import FeatureMatrix


@dataclass
class KMeansModel:
    centroids: np.ndarray  # (k, d)
    inertia: float
    iterations: int
    seed: int
    inertia_history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "centroids": self.centroids.tolist(),
                "inertia": self.inertia,
                "iterations": self.iterations,
                "seed": self.seed,
                "inertia_history": self.inertia_history,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "KMeansModel":
        obj = json.loads(text)
        return cls(
            centroids=np.asarray(obj["centroids"], dtype=np.float64),
            inertia=obj["inertia"],
            iterations=obj["iterations"],
            seed=obj["seed"],
            inertia_history=list(obj.get("inertia_history", [])),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


def _as_matrix(fm) -> np.ndarray:
    x = fm.rows if isinstance(fm, FeatureMatrix) else np.asarray(fm, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected a 2-D row matrix")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite entries")
    return x


def _sq_distances(x: np.ndarray, centroids: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Exact squared euclidean distances (n, k), chunked over rows."""
    n = x.shape[0]
    out = np.empty((n, centroids.shape[0]))
    for start in range(0, n, chunk):
        block = x[start : start + chunk]
        out[start : start + chunk] = ((block[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return out


def _plus_plus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centroids[j] = x[idx]
        d2 = np.minimum(d2, ((x - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _repair_empty(ids: np.ndarray, d2: np.ndarray, k: int) -> np.ndarray:
    """Move the farthest point of the largest cluster into each empty cluster."""
    counts = np.bincount(ids, minlength=k)
    for empty in np.flatnonzero(counts == 0):
        donor = int(np.argmax(counts))
        members = np.flatnonzero(ids == donor)
        far = members[int(np.argmax(d2[members, donor]))]
        ids[far] = empty
        counts[donor] -= 1
        counts[empty] += 1
    return ids


def _lloyd(x, centroids, max_iter, tol_abs):
    history = []
    iterations = 0
    k = centroids.shape[0]
    for _ in range(max_iter):
        d2 = _sq_distances(x, centroids)
        ids = np.argmin(d2, axis=1)  # ties go to the lowest id
        history.append(float(d2.min(axis=1).sum()))
        ids = _repair_empty(ids, d2, k)
        new_centroids = np.empty_like(centroids)
        for c in range(k):
            new_centroids[c] = x[ids == c].mean(axis=0)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        iterations += 1
        if shift <= tol_abs:
            break
    d2 = _sq_distances(x, centroids)
    inertia = float(d2.min(axis=1).sum())
    history.append(inertia)
    return centroids, inertia, iterations, history


def kmeans_fit(
    fm,
    k: int = 2,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
    n_init: int = 1,
    init_centroids: np.ndarray | None = None,
) -> KMeansModel:
    """Seeded k-means++ followed by Lloyd iterations until the max centroid
    shift drops below tol (relative to the data's RMS per-feature spread).

    n_init > 1 reruns with fresh seeded inits and keeps the lowest-inertia
    model; init_centroids bypasses k-means++ (warm start).
    """
    x = _as_matrix(fm)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise ValueError(f"need at least k={k} rows, got {n}")
    tol_abs = tol * float(np.sqrt(x.var(axis=0).mean()))
    rng = np.random.default_rng(seed)

    best = None
    runs = 1 if init_centroids is not None else max(1, n_init)
    for _ in range(runs):
        if init_centroids is not None:
            start = np.array(init_centroids, dtype=np.float64)
            if start.shape != (k, x.shape[1]):
                raise ValueError(f"init_centroids must have shape ({k}, {x.shape[1]})")
        else:
            start = _plus_plus_init(x, k, rng)
        centroids, inertia, iterations, history = _lloyd(x, start, max_iter, tol_abs)
        if best is None or inertia < best.inertia:
            best = KMeansModel(
                centroids=centroids,
                inertia=inertia,
                iterations=iterations,
                seed=seed,
                inertia_history=history,
            )
    return best


def assign(model: KMeansModel, fm) -> np.ndarray:
    """Nearest-centroid id per row (squared euclidean, ties to lowest id)."""
    x = _as_matrix(fm)
    if x.shape[1] != model.centroids.shape[1]:
        raise ValueError(
            f"feature width {x.shape[1]} does not match centroids ({model.centroids.shape[1]})"
        )
    return np.argmin(_sq_distances(x, model.centroids), axis=1)


def clustering_accuracy(ids, labels) -> float:
    """Best-permutation agreement between 2-cluster ids and binary labels."""
    ids = np.asarray(ids)
    labels = np.asarray(labels)
    if ids.shape != labels.shape:
        raise ValueError(f"length mismatch: {ids.shape} vs {labels.shape}")
    if len(ids) == 0:
        raise ValueError("empty assignment")
    if not np.isin(ids, (0, 1)).all():
        raise ValueError("cluster ids must be 0/1 (k=2)")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be binary")
    direct = float(np.mean(ids == labels))
    return max(direct, 1.0 - direct)
