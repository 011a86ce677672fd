"""Similarity and dissimilarity measures between stressed and unstressed groups.

Two similarities (cosine, generalized Jaccard) and five dissimilarities
(Manhattan, Euclidean, Chebyshev, Canberra, Mahalanobis) computed between
group representatives. The Jaccard set formula is undefined for real vectors,
so the generalized (Ruzicka) min/max form is used after shifting both vectors
to non-negative range.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .aggregate import FeatureMatrix

SIMILARITIES = ("cosine", "jaccard")
DISSIMILARITIES = ("manhattan", "euclidean", "chebyshev", "canberra", "mahalanobis")
METRICS = SIMILARITIES + DISSIMILARITIES

DEFAULT_RIDGE = 1e-6


class DegenerateInput(ValueError):
    """Zero vector where a direction or magnitude ratio is required."""


def _measure_rows(metric: str, x: np.ndarray, ys: np.ndarray, s_inv: np.ndarray | None) -> np.ndarray:
    """Evaluate one metric between row vector x and every row of ys."""
    if metric == "manhattan":
        return np.abs(ys - x).sum(axis=1)
    if metric == "euclidean":
        return np.sqrt(((ys - x) ** 2).sum(axis=1))
    if metric == "chebyshev":
        return np.abs(ys - x).max(axis=1)
    if metric == "canberra":
        num = np.abs(ys - x)
        den = np.abs(ys) + np.abs(x)
        terms = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
        return terms.sum(axis=1)
    if metric == "cosine":
        xn = np.linalg.norm(x)
        yn = np.linalg.norm(ys, axis=1)
        if xn == 0 or np.any(yn == 0):
            raise DegenerateInput("cosine similarity is undefined for a zero vector")
        return (ys @ x) / (xn * yn)
    if metric == "jaccard":
        shift = np.minimum(0.0, np.minimum(ys.min(axis=1), x.min()))
        xs = x[None, :] - shift[:, None]
        yss = ys - shift[:, None]
        union = np.maximum(xs, yss).sum(axis=1)
        if np.any(xs.sum(axis=1) == 0) or np.any(yss.sum(axis=1) == 0):
            raise DegenerateInput("generalized Jaccard is undefined for a zero vector after shift")
        return np.minimum(xs, yss).sum(axis=1) / union
    if metric == "mahalanobis":
        if s_inv is None:
            raise ValueError("mahalanobis requires an inverse-covariance matrix")
        diff = ys - x
        q = np.einsum("ij,jk,ik->i", diff, s_inv, diff)
        if np.any(q < -1e-8 * max(1.0, float(np.abs(q).max(initial=0.0)))):
            raise ValueError("inverse covariance is not positive definite")
        return np.sqrt(np.maximum(q, 0.0))
    raise ValueError(f"unknown metric {metric!r}")


def pairwise_measure(
    metric: str,
    x: Sequence[float] | np.ndarray,
    y: Sequence[float] | np.ndarray,
    s_inv: np.ndarray | None = None,
) -> float:
    """One of the seven measures between two equal-length vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or len(x) != len(y) or len(x) < 1:
        raise ValueError(f"expected equal-length 1-D vectors, got shapes {x.shape} and {y.shape}")
    if metric == "mahalanobis" and s_inv is not None:
        s_inv = np.asarray(s_inv, dtype=np.float64)
        if s_inv.shape != (len(x), len(x)) or not np.allclose(s_inv, s_inv.T, atol=1e-8):
            raise ValueError("inverse covariance must be a symmetric (d x d) matrix")
    return float(_measure_rows(metric, x, y[None, :], s_inv)[0])


def group_centroid(fm: FeatureMatrix, label: int) -> np.ndarray:
    """Componentwise mean of the labeled rows carrying *label*."""
    idx = np.flatnonzero(fm.labeled & (fm.labels == label))
    if len(idx) == 0:
        raise ValueError(f"no rows with label {label}")
    return fm.rows[idx].mean(axis=0)


def pooled_covariance(fm: FeatureMatrix, ridge: float = DEFAULT_RIDGE) -> tuple[np.ndarray, np.ndarray]:
    """Within-group pooled covariance with a relative ridge, plus its inverse.

    The ridge adds ridge * (trace(S)/d) * I, which keeps the inverse finite
    when d exceeds the sample count (256 dims vs a few hundred units).
    """
    sub = fm.labeled_only()
    if sub.n < 2:
        raise ValueError("pooled covariance needs at least 2 labeled rows")
    d = sub.d
    scatter = np.zeros((d, d))
    groups = np.unique(sub.labels)
    for g in groups:
        block = sub.rows[sub.labels == g]
        centered = block - block.mean(axis=0)
        scatter += centered.T @ centered
    s = scatter / max(sub.n - len(groups), 1)
    s = (s + s.T) / 2.0
    trace = float(np.trace(s))
    scale = trace / d if trace > 0 else 1.0
    s_reg = s + ridge * scale * np.eye(d)
    s_inv = np.linalg.solve(s_reg, np.eye(d))
    s_inv = (s_inv + s_inv.T) / 2.0
    return s_reg, s_inv


@dataclass
class GroupSeparationReport:
    """The seven measures between the stressed and unstressed groups."""

    cosine: float
    jaccard: float
    manhattan: float
    euclidean: float
    chebyshev: float
    canberra: float
    mahalanobis: float
    n_stressed: int
    n_unstressed: int
    d: int
    set_tag: str | None = None
    mode: str | None = None
    level: str | None = None
    l1: str | None = None

    def values(self) -> dict[str, float]:
        return {m: getattr(self, m) for m in METRICS}

    def to_dict(self) -> dict:
        obj = dict(self.values())
        obj.update(
            n_stressed=self.n_stressed,
            n_unstressed=self.n_unstressed,
            d=self.d,
            set=self.set_tag,
            mode=self.mode,
            level=self.level,
            l1=self.l1,
        )
        return obj

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


def separation_report(
    fm: FeatureMatrix,
    ridge: float = DEFAULT_RIDGE,
    representative: str = "centroid",
) -> GroupSeparationReport:
    """All seven measures between the two label groups of a feature matrix.

    representative="centroid" (default) measures between group means;
    "pairwise" averages the measure over all cross-group row pairs, as a
    sensitivity check on the centroid reading.
    """
    sub = fm.labeled_only()
    stressed = sub.rows[sub.labels == 1]
    unstressed = sub.rows[sub.labels == 0]
    if len(stressed) == 0 or len(unstressed) == 0:
        raise ValueError(
            f"both groups must be non-empty (stressed={len(stressed)}, unstressed={len(unstressed)})"
        )
    _, s_inv = pooled_covariance(fm, ridge=ridge)

    if representative == "centroid":
        c1 = stressed.mean(axis=0)
        c0 = unstressed.mean(axis=0)
        values = {m: pairwise_measure(m, c1, c0, s_inv) for m in METRICS}
    elif representative == "pairwise":
        values = {
            m: float(np.mean([_measure_rows(m, x, unstressed, s_inv).mean() for x in stressed]))
            for m in METRICS
        }
    else:
        raise ValueError(f"unknown representative {representative!r}")

    return GroupSeparationReport(
        **values,
        n_stressed=len(stressed),
        n_unstressed=len(unstressed),
        d=sub.d,
        set_tag=fm.set_tag,
        mode=fm.mode,
        level=fm.level,
        l1=fm.l1,
    )
