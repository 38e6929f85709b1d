"""Integer quantization of a trained model for the encrypted protocol.

Everything downstream of ``quantize_model`` is exact big-int arithmetic:
the scaled projection, the integer mean, the integer gallery recomputed
from the raw training vectors (so gallery and probe features live in the
identical scaled domain), and the distance bit-bound that sizes the
secure comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import DataError
from .flda import TrainedModel

PIXEL_MAX = 255


@dataclass
class QuantizedModel:
    scale: int
    q_projection: list[list[int]]       # (m_out, n)
    q_mean: list[int]                   # (n,)
    q_gallery: list[list[int]]          # (M, m_out)
    gallery_labels: list[int]
    label_names: list[str]
    bit_bound: int                      # distances are provably < 2**bit_bound
    training_vectors: list[list[int]]   # retained so the gallery stays recomputable

    @property
    def dimension(self) -> int:
        return len(self.q_mean)

    @property
    def out_dims(self) -> int:
        return len(self.q_projection)

    @property
    def gallery_size(self) -> int:
        return len(self.q_gallery)

    @property
    def class_count(self) -> int:
        return len(self.label_names)

    def label_codes(self) -> dict[str, int]:
        return {name: code for code, name in enumerate(self.label_names)}


def round_half_away(x: float | Fraction) -> int:
    """Round to nearest integer, halves away from zero."""
    if x >= 0:
        return int((2 * Fraction(x) + 1) // 2)
    return -int((2 * Fraction(-x) + 1) // 2)


def integer_projection(q_projection: list[list[int]], q_mean: list[int],
                       vector: list[int]) -> list[int]:
    """Exact integer feature vector of a pixel vector."""
    if len(vector) != len(q_mean):
        raise DataError(
            f"image has {len(vector)} pixels, model expects {len(q_mean)}"
        )
    centered = [int(v) - m for v, m in zip(vector, q_mean)]
    return [sum(w * x for w, x in zip(row, centered)) for row in q_projection]


def quantize_model(model: TrainedModel, scale: int) -> QuantizedModel:
    """Scale the projection by ``scale`` and round everything to integers.

    The gallery is recomputed from the quantized projection and mean so
    that encrypted-domain distances match the integer oracle exactly;
    rounding the real-valued gallery instead would leave it unscaled
    relative to the probe features.
    """
    if scale < 1:
        raise DataError(f"scale must be >= 1, got {scale}")
    q_projection = [
        [round_half_away(scale * w) for w in row] for row in model.projection
    ]
    q_mean = [
        round_half_away(Fraction(s, model.sample_count)) for s in model.mean_sums
    ]
    q_gallery = [
        integer_projection(q_projection, q_mean, vec)
        for vec in model.training_vectors
    ]
    q = QuantizedModel(
        scale=scale,
        q_projection=q_projection,
        q_mean=q_mean,
        q_gallery=q_gallery,
        gallery_labels=list(model.gallery_labels),
        label_names=list(model.label_names),
        bit_bound=0,
        training_vectors=[list(v) for v in model.training_vectors],
    )
    q.bit_bound = distance_bitbound(q)
    return q


def distance_bitbound(q: QuantizedModel) -> int:
    """Smallest l with every reachable squared distance < 2**l.

    A probe feature is bounded by sum_j |w_ij| * 255 per row (pixel minus
    mean never exceeds 255 in magnitude), the gallery by its largest
    entry, so each squared distance is at most
    m_out * (feature_bound + gallery_bound)**2.
    """
    feature_bound = max(
        (sum(abs(w) for w in row) * PIXEL_MAX for row in q.q_projection),
        default=0,
    )
    gallery_bound = max(
        (abs(y) for feats in q.q_gallery for y in feats), default=0
    )
    worst = q.out_dims * (feature_bound + gallery_bound) ** 2 + 1
    # ceil(log2(worst)); comparisons need at least one bit
    return max(1, (worst - 1).bit_length())


def quantized_distances(q: QuantizedModel, vector: list[int]) -> list[int]:
    """Exact squared distances from a probe to every gallery entry."""
    feats = integer_projection(q.q_projection, q.q_mean, vector)
    return [
        sum((f - y) ** 2 for f, y in zip(feats, entry)) for entry in q.q_gallery
    ]


def classify_plain_quantized(q: QuantizedModel, vector: list[int]) -> int:
    """Integer 1-NN label; the oracle the encrypted protocol must match.

    Ties break toward the lowest gallery index, identical to the
    encrypted argmin tournament.
    """
    if not q.q_gallery:
        raise DataError("quantized model has an empty gallery")
    distances = quantized_distances(q, vector)
    best = min(range(len(distances)), key=lambda i: (distances[i], i))
    return q.gallery_labels[best]
