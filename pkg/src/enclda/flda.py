"""Plain-domain Fisherfaces pipeline.

Training: mean-center the vectorized images, reduce with PCA (snapshot
method: eigensolve the small Gram matrix instead of the pixel-space
scatter), then maximize the between/within class scatter ratio to get
the Fisher directions.  Classification: nearest gallery feature under
squared Euclidean distance, ties broken by lowest gallery index.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .datasets import Dataset
from .eigen import fix_sign, jacobi_eigh
from .errors import DataError

# Gram eigenvalues at or below this fraction of the largest count as rank loss.
_RANK_TOL = 1e-10
# Within-scatter eigenvalues below this fraction of the trace are singular.
_SINGULAR_TOL = 1e-12


@dataclass
class TrainedModel:
    mean_sums: list[int]          # per-component pixel sums; exact mean = sums / sample_count
    sample_count: int
    projection: np.ndarray        # (m_out, n) unit-norm rows
    gallery_features: np.ndarray  # (M, m_out)
    gallery_labels: list[int]
    label_names: list[str]
    pca_dims: int
    training_vectors: list[list[int]]  # retained for exact integer quantization

    @property
    def dimension(self) -> int:
        return len(self.mean_sums)

    @property
    def out_dims(self) -> int:
        return int(self.projection.shape[0])

    def mean_vector(self) -> np.ndarray:
        return np.asarray(self.mean_sums, dtype=float) / self.sample_count


def vectorize(image: list[list[int]]) -> list[int]:
    """Row-major flattening of a 2-D grayscale matrix."""
    if not image:
        raise DataError("empty image")
    width = len(image[0])
    flat: list[int] = []
    for row in image:
        if len(row) != width:
            raise DataError("ragged image matrix")
        for v in row:
            if not 0 <= v <= 255:
                raise DataError(f"pixel value {v} outside [0, 255]")
            flat.append(int(v))
    return flat


def compute_mean(dataset: Dataset) -> list[Fraction]:
    """Exact per-component mean of the training vectors."""
    if dataset.size == 0:
        raise DataError("cannot average an empty dataset")
    sums = [0] * dataset.dimension
    for vec in dataset.vectors:
        for j, v in enumerate(vec):
            sums[j] += v
    return [Fraction(s, dataset.size) for s in sums]


def pca_fit(centered: np.ndarray, m_pca: int) -> tuple[np.ndarray, np.ndarray]:
    """Top principal directions of the total scatter of ``centered`` rows.

    Uses the snapshot method: eigensolve the MxM Gram matrix and map the
    eigenvectors back through the data, which is exact because scatter
    eigenvectors with nonzero eigenvalue lie in the sample span.
    Returns (directions as columns (n, m_pca), eigenvalues desc).
    """
    samples = np.asarray(centered, dtype=float)
    m = samples.shape[0]
    if m_pca < 1:
        raise DataError("at least one principal component required")
    gram = samples @ samples.T
    values, vectors = jacobi_eigh(gram)
    if values[0] <= 0.0:
        raise DataError("total scatter is zero; dataset has no variation")
    rank = int(np.sum(values > _RANK_TOL * values[0]))
    if m_pca > rank:
        raise DataError(f"requested {m_pca} components but scatter rank is {rank}")
    basis = np.empty((samples.shape[1], m_pca))
    for j in range(m_pca):
        direction = samples.T @ vectors[:, j]
        basis[:, j] = fix_sign(direction / np.sqrt(values[j]))
    return basis, values[:m_pca]


def scatter_matrices(features: np.ndarray, labels: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """Between-class and within-class scatter of projected features."""
    feats = np.asarray(features, dtype=float)
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DataError("scatter split needs at least two classes")
    labels_arr = np.asarray(labels)
    overall = feats.mean(axis=0)
    dim = feats.shape[1]
    between = np.zeros((dim, dim))
    within = np.zeros((dim, dim))
    for cls in classes:
        members = feats[labels_arr == cls]
        mu = members.mean(axis=0)
        gap = (mu - overall)[:, None]
        between += len(members) * (gap @ gap.T)
        centered = members - mu
        within += centered.T @ centered
    return between, within


def flda_fit(between: np.ndarray, within: np.ndarray, d: int) -> np.ndarray:
    """Top-d directions maximizing the between/within Rayleigh quotient.

    Whitens the within-class scatter through its eigendecomposition and
    then solves an ordinary symmetric eigenproblem.  Columns come back
    unit-norm with deterministic sign.
    """
    w_vals, w_vecs = jacobi_eigh(within)
    trace = float(np.sum(w_vals))
    if trace <= 0.0 or w_vals[-1] <= _SINGULAR_TOL * trace:
        cond = float("inf") if w_vals[-1] <= 0 else w_vals[0] / w_vals[-1]
        raise DataError(
            f"within-class scatter is singular (condition estimate {cond:.3e}); "
            "reduce the PCA dimension"
        )
    whitener = w_vecs @ np.diag(1.0 / np.sqrt(w_vals))
    reduced = whitener.T @ np.asarray(between, dtype=float) @ whitener
    reduced = (reduced + reduced.T) / 2.0
    b_vals, b_vecs = jacobi_eigh(reduced)
    if d < 1 or d > reduced.shape[0]:
        raise DataError(f"cannot extract {d} discriminant directions")
    directions = whitener @ b_vecs[:, :d]
    for j in range(d):
        directions[:, j] = fix_sign(
            directions[:, j] / np.linalg.norm(directions[:, j])
        )
    return directions


def train(dataset: Dataset, m_pca: int | None = None, d: int | None = None) -> TrainedModel:
    """Full pipeline: center, PCA, Fisher directions, gallery projection.

    Defaults follow the Fisherfaces construction: m_pca = M - c and
    d = c - 1.
    """
    m_total = dataset.size
    c = dataset.class_count
    if c < 2:
        raise DataError("training needs at least two classes")
    for cls, count in enumerate(dataset.class_counts()):
        if count < 2:
            raise DataError(
                f"class {dataset.label_names[cls]!r} has {count} sample(s); need >= 2"
            )
    if m_pca is None:
        m_pca = m_total - c
    if not 1 <= m_pca <= m_total - c:
        raise DataError(f"pca dims must be in [1, {m_total - c}], got {m_pca}")
    if d is None:
        d = c - 1
    if not 1 <= d <= c - 1:
        raise DataError(f"discriminant dims must be in [1, {c - 1}], got {d}")

    mean_sums = [sum(vec[j] for vec in dataset.vectors) for j in range(dataset.dimension)]
    mean = np.asarray(mean_sums, dtype=float) / m_total
    samples = np.asarray(dataset.vectors, dtype=float)
    centered = samples - mean

    pca_basis, _ = pca_fit(centered, m_pca)
    reduced = centered @ pca_basis
    between, within = scatter_matrices(reduced, dataset.labels)
    fisher = flda_fit(between, within, d)

    projection = (pca_basis @ fisher).T  # (d, n)
    for i in range(d):
        projection[i] = fix_sign(projection[i] / np.linalg.norm(projection[i]))
    gallery = centered @ projection.T

    return TrainedModel(
        mean_sums=mean_sums,
        sample_count=m_total,
        projection=projection,
        gallery_features=gallery,
        gallery_labels=list(dataset.labels),
        label_names=list(dataset.label_names),
        pca_dims=m_pca,
        training_vectors=[list(v) for v in dataset.vectors],
    )


def project(model: TrainedModel, vector: list[int]) -> np.ndarray:
    """Mean-center a vectorized image and map it into feature space."""
    if len(vector) != model.dimension:
        raise DataError(
            f"image has {len(vector)} pixels, model expects {model.dimension}"
        )
    centered = np.asarray(vector, dtype=float) - model.mean_vector()
    return model.projection @ centered


def classify_plain(model: TrainedModel, vector: list[int]) -> tuple[int, list[float]]:
    """1-NN label under squared Euclidean distance, plus all distances."""
    if len(model.gallery_labels) == 0:
        raise DataError("model has an empty gallery")
    feats = project(model, vector)
    diffs = model.gallery_features - feats
    distances = np.sum(diffs * diffs, axis=1)
    best = int(np.argmin(distances))  # argmin returns the first minimum
    return model.gallery_labels[best], [float(x) for x in distances]
