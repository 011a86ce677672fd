"""Principal component projection for the separability scatter analysis.

The eigendecomposition is an in-house cyclic Jacobi solver on the sample
covariance (or on the Gram matrix when rows < dims, which is the common case
for small annotated subsets of 256-dim embeddings). Component signs follow a
deterministic convention so scatter exports are reproducible across runs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aggregate import FeatureMatrix

SVG_WIDTH = 640
SVG_HEIGHT = 480
SVG_MARGIN = 40
STRESSED_COLOR = "#5b2a86"
UNSTRESSED_COLOR = "#f2c14e"
UNLABELED_COLOR = "#9e9e9e"


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors of a symmetric matrix by cyclic Jacobi.

    Returns (values, vectors) in descending eigenvalue order; vectors are the
    columns. Rotation products keep the vector matrix orthogonal to machine
    precision independent of how clustered the spectrum is.
    """
    a = np.array(a, dtype=np.float64)
    d = a.shape[0]
    if a.shape != (d, d) or not np.allclose(a, a.T, atol=1e-10 * max(1.0, float(np.abs(a).max(initial=0.0)))):
        raise ValueError("jacobi_eigh expects a symmetric square matrix")
    a = (a + a.T) / 2.0
    v = np.eye(d)
    norm = float(np.linalg.norm(a))
    if d == 1 or norm == 0.0:
        return a.diagonal().copy(), v

    def off_norm(m):
        # norm of the off-diagonal part; subtracting diagonal energy from the
        # total cancels catastrophically near convergence, so zero it instead
        m2 = m.copy()
        np.fill_diagonal(m2, 0.0)
        return float(np.linalg.norm(m2))

    threshold = tol * norm
    for _ in range(max_sweeps):
        if off_norm(a) <= threshold:
            break
        _jacobi_sweep(a, v, d, threshold)
    if off_norm(a) > threshold:
        raise RuntimeError(f"Jacobi sweep limit ({max_sweeps}) hit before convergence")

    values = a.diagonal().copy()
    order = np.argsort(-values, kind="stable")
    return values[order], v[:, order]


def _jacobi_sweep(a, v, d, threshold):
    for p in range(d - 1):
        for q in range(p + 1, d):
            apq = a[p, q]
            if abs(apq) <= threshold / (d * d):
                continue
            tau = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c * ap - s * aq
            a[q, :] = s * ap + c * aq
            a[p, q] = a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    out = components.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        if out[i, j] < 0:
            out[:, j] = -out[:, j]
    return out


def _complete_orthonormal(partial: np.ndarray, count: int) -> np.ndarray:
    """Append *count* deterministic orthonormal columns to *partial*."""
    d = partial.shape[0]
    cols = [partial[:, j] for j in range(partial.shape[1])]
    added = []
    for j in range(d):
        if len(added) == count:
            break
        cand = np.zeros(d)
        cand[j] = 1.0
        for c in cols:
            cand -= (cand @ c) * c
        norm = np.linalg.norm(cand)
        if norm > 1e-6:
            cand /= norm
            cols.append(cand)
            added.append(cand)
    return np.column_stack(added) if added else np.zeros((d, 0))


@dataclass
class PcaModel:
    """Centering vector, orthonormal components and their variances."""

    mean: np.ndarray  # (d,)
    components: np.ndarray  # (d, k), columns orthonormal
    explained_variance: np.ndarray  # (k,), descending
    scale: np.ndarray | None = None  # set when fit standardized features

    @property
    def k(self) -> int:
        return self.components.shape[1]

    @property
    def d(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "scale": None if self.scale is None else self.scale.tolist(),
        }


def _as_matrix(fm) -> np.ndarray:
    return fm.rows if isinstance(fm, FeatureMatrix) else np.asarray(fm, dtype=np.float64)


def fit(fm, k: int, standardize: bool = False) -> PcaModel:
    """Top-k principal components of the (optionally standardized) rows.

    Uses the d x d covariance when d <= rows, otherwise the Gram-matrix route.
    Default is centering only; unit-variance scaling is opt-in.
    """
    x = _as_matrix(fm)
    n, d = x.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 rows")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite entries")
    kmax = min(n - 1, d)
    if not 1 <= k <= kmax:
        raise ValueError(f"k must be in [1, {kmax}], got {k}")

    mean = x.mean(axis=0)
    centered = x - mean
    scale = None
    if standardize:
        scale = centered.std(axis=0, ddof=1)
        scale = np.where(scale > 0, scale, 1.0)
        centered = centered / scale

    if d <= n:
        cov = centered.T @ centered / (n - 1)
        values, vectors = jacobi_eigh(cov)
        components = vectors[:, :k]
        variances = values[:k]
    else:
        gram = centered @ centered.T / (n - 1)
        values, u = jacobi_eigh(gram)
        cols = []
        variances = values[:k].copy()
        for j in range(k):
            if values[j] > 1e-12 * max(values[0], 1.0):
                w = centered.T @ u[:, j]
                cols.append(w / np.linalg.norm(w))
            else:
                variances[j] = 0.0
        components = np.column_stack(cols) if cols else np.zeros((d, 0))
        if components.shape[1] < k:
            components = np.hstack([components, _complete_orthonormal(components, k - components.shape[1])])

    return PcaModel(
        mean=mean,
        components=_fix_signs(components),
        explained_variance=np.maximum(variances, 0.0),
        scale=scale,
    )


def project(model: PcaModel, fm) -> np.ndarray:
    """Coordinates of rows in the model's component basis."""
    x = _as_matrix(fm)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.d:
        raise ValueError(f"feature width {x.shape[1]} does not match model width {model.d}")
    centered = x - model.mean
    if model.scale is not None:
        centered = centered / model.scale
    return centered @ model.components


def export_scatter(
    coords: np.ndarray,
    labels: np.ndarray,
    path: str | Path,
    svg_path: str | Path | None = None,
    labeled: np.ndarray | None = None,
) -> None:
    """Write pc1,pc2,label CSV and (optionally) a self-contained SVG scatter.

    Unlabeled points (labeled[i] == False) get an empty label cell and a gray
    dot; labeled points use the stressed/unstressed two-color palette.
    """
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ValueError("scatter export expects (n, 2) coordinates")
    labels = np.asarray(labels)
    if labeled is None:
        labeled = np.ones(len(labels), dtype=bool)
    if len(labels) != len(coords) or len(labeled) != len(coords):
        raise ValueError("coords and labels must align")

    with open(path, "w", encoding="utf-8", newline="\n") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["pc1", "pc2", "label"])
        for i in range(len(coords)):
            label = str(int(labels[i])) if labeled[i] else ""
            writer.writerow([repr(float(coords[i, 0])), repr(float(coords[i, 1])), label])

    if svg_path is not None:
        _write_svg(coords, labels, labeled, svg_path)


def _write_svg(coords, labels, labeled, svg_path):
    lo = coords.min(axis=0) if len(coords) else np.zeros(2)
    hi = coords.max(axis=0) if len(coords) else np.ones(2)
    span = np.maximum(hi - lo, 1e-9)
    pad = 0.05 * span
    lo, span = lo - pad, span + 2 * pad

    def sx(x):
        return SVG_MARGIN + (x - lo[0]) / span[0] * (SVG_WIDTH - 2 * SVG_MARGIN)

    def sy(y):
        return SVG_HEIGHT - SVG_MARGIN - (y - lo[1]) / span[1] * (SVG_HEIGHT - 2 * SVG_MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<rect width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<rect x="{SVG_MARGIN}" y="{SVG_MARGIN}" width="{SVG_WIDTH - 2 * SVG_MARGIN}" '
        f'height="{SVG_HEIGHT - 2 * SVG_MARGIN}" fill="none" stroke="#333"/>',
    ]
    for i in range(len(coords)):
        if not labeled[i]:
            color = UNLABELED_COLOR
        else:
            color = STRESSED_COLOR if int(labels[i]) == 1 else UNSTRESSED_COLOR
        parts.append(
            f'<circle cx="{sx(coords[i, 0]):.2f}" cy="{sy(coords[i, 1]):.2f}" r="3" '
            f'fill="{color}" fill-opacity="0.8"/>'
        )
    parts.append("</svg>")
    with open(svg_path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(parts))
        f.write("\n")
