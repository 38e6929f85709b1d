import random
from fractions import Fraction

import numpy as np
import pytest

from enclda import flda
from enclda.datasets import Dataset, synth_dataset
from enclda.errors import DataError


def make_dataset(points, labels, names=None):
    names = names or sorted({f"c{l}" for l in labels})
    return Dataset(vectors=[list(p) for p in points], labels=list(labels),
                   label_names=names)


TOY = make_dataset([(0, 0), (0, 2), (4, 0), (4, 2)], [0, 0, 1, 1], ["a", "b"])

# The axis-aligned TOY has exactly singular within-class scatter, which the
# trainer rejects by contract; this jittered variant trains fine.
TOY_TRAIN = make_dataset([(0, 0), (1, 2), (5, 0), (4, 2)], [0, 0, 1, 1], ["a", "b"])


def exact_distance_argmin(model, vector):
    """Independent oracle: exact rational distances from the float model."""
    mean = [Fraction(s, model.sample_count) for s in model.mean_sums]
    centered = [Fraction(v) - m for v, m in zip(vector, mean)]
    proj = [
        sum(Fraction(w) * x for w, x in zip(row, centered))
        for row in model.projection
    ]
    best_idx, best_dist = 0, None
    for i, feat in enumerate(model.gallery_features):
        dist = sum((p - Fraction(y)) ** 2 for p, y in zip(proj, feat))
        if best_dist is None or dist < best_dist:
            best_idx, best_dist = i, dist
    return model.gallery_labels[best_idx]


# --- vectorize ---------------------------------------------------------

def test_vectorize_row_major():
    assert flda.vectorize([[1, 2], [3, 4]]) == [1, 2, 3, 4]


def test_vectorize_90x90():
    image = [[0] * 90 for _ in range(90)]
    assert len(flda.vectorize(image)) == 8100


def test_vectorize_single_pixel():
    assert flda.vectorize([[7]]) == [7]


def test_vectorize_rejects_ragged():
    with pytest.raises(DataError):
        flda.vectorize([[1, 2], [3]])


def test_vectorize_rejects_out_of_range():
    with pytest.raises(DataError):
        flda.vectorize([[300]])


# --- compute_mean ------------------------------------------------------

def test_mean_pair():
    ds = make_dataset([(0, 0), (4, 2)], [0, 1])
    assert flda.compute_mean(ds) == [Fraction(2), Fraction(1)]


def test_mean_single_image():
    ds = make_dataset([(3, 9)], [0], ["only"])
    assert flda.compute_mean(ds) == [Fraction(3), Fraction(9)]


def test_mean_exact_rational():
    ds = make_dataset([(0,), (1,), (1,)], [0, 0, 0], ["only"])
    assert flda.compute_mean(ds) == [Fraction(2, 3)]


def test_mean_empty_errors():
    with pytest.raises(DataError):
        flda.compute_mean(make_dataset([], [], ["x"]))


# --- pca_fit -----------------------------------------------------------

def test_pca_toy_scatter():
    samples = np.asarray(TOY.vectors, dtype=float)
    centered = samples - samples.mean(axis=0)
    scatter = centered.T @ centered
    assert np.allclose(scatter, [[16.0, 0.0], [0.0, 4.0]])
    basis, values = flda.pca_fit(centered, 1)
    assert values[0] == pytest.approx(16.0, abs=1e-9)
    assert np.allclose(np.abs(basis[:, 0]), [1.0, 0.0], atol=1e-9)


def test_pca_matches_lapack_on_random_data():
    rng = np.random.default_rng(5)
    for _ in range(10):
        samples = rng.integers(0, 256, size=(8, 12)).astype(float)
        centered = samples - samples.mean(axis=0)
        basis, values = flda.pca_fit(centered, 4)
        ref = np.linalg.eigvalsh(centered.T @ centered)[::-1]
        assert np.allclose(values, ref[:4], rtol=1e-8, atol=1e-6)
        # directions diagonalize the scatter
        scatter = centered.T @ centered
        off = basis.T @ scatter @ basis - np.diag(values)
        assert np.max(np.abs(off)) < 1e-6 * max(values[0], 1.0)


def test_pca_full_rank_preserves_distances():
    rng = np.random.default_rng(17)
    samples = rng.integers(0, 256, size=(6, 10)).astype(float)
    centered = samples - samples.mean(axis=0)
    rank = np.linalg.matrix_rank(centered)
    basis, _ = flda.pca_fit(centered, rank)
    reduced = centered @ basis
    for i in range(len(samples)):
        for j in range(i + 1, len(samples)):
            orig = np.sum((centered[i] - centered[j]) ** 2)
            proj = np.sum((reduced[i] - reduced[j]) ** 2)
            assert proj == pytest.approx(orig, rel=1e-6, abs=1e-6)


def test_pca_orthonormality():
    rng = np.random.default_rng(23)
    samples = rng.integers(0, 256, size=(10, 20)).astype(float)
    centered = samples - samples.mean(axis=0)
    basis, _ = flda.pca_fit(centered, 6)
    assert np.max(np.abs(basis.T @ basis - np.eye(6))) < 1e-8


def test_pca_zero_scatter_errors():
    centered = np.zeros((5, 4))
    with pytest.raises(DataError):
        flda.pca_fit(centered, 1)


def test_pca_rank_overflow_errors():
    samples = np.asarray([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    centered = samples - samples.mean(axis=0)  # rank 1
    with pytest.raises(DataError):
        flda.pca_fit(centered, 2)


# --- scatter_matrices --------------------------------------------------

def test_scatter_one_dimensional_example():
    feats = np.asarray([[0.0], [2.0], [4.0], [6.0]])
    between, within = flda.scatter_matrices(feats, [0, 0, 1, 1])
    assert between[0, 0] == pytest.approx(16.0)
    assert within[0, 0] == pytest.approx(4.0)


def test_scatter_identical_class_means():
    feats = np.asarray([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    between, _ = flda.scatter_matrices(feats, [0, 0, 1, 1])
    assert np.allclose(between, 0.0)


def test_scatter_repeated_points_give_zero_within():
    feats = np.asarray([[1.0], [1.0], [5.0], [5.0]])
    _, within = flda.scatter_matrices(feats, [0, 0, 1, 1])
    assert np.allclose(within, 0.0)


def test_scatter_single_class_errors():
    with pytest.raises(DataError):
        flda.scatter_matrices(np.zeros((3, 2)), [0, 0, 0])


# --- flda_fit ----------------------------------------------------------

def grid_rayleigh_max(between, within, steps=360):
    best = -np.inf
    for k in range(steps):
        angle = np.pi * k / steps
        w = np.array([np.cos(angle), np.sin(angle)])
        best = max(best, (w @ between @ w) / (w @ within @ w))
    return best


def test_flda_diagonal_example():
    between = np.diag([9.0, 1.0])
    within = np.eye(2)
    direction = flda.flda_fit(between, within, 1)[:, 0]
    assert np.allclose(np.abs(direction), [1.0, 0.0], atol=1e-9)
    rq = (direction @ between @ direction) / (direction @ within @ direction)
    assert rq >= grid_rayleigh_max(between, within) - 1e-6


def test_flda_beats_angular_grid_random():
    rng = np.random.default_rng(31)
    for _ in range(10):
        a = rng.normal(size=(4, 2))
        b = rng.normal(size=(4, 2))
        between = a.T @ a
        within = b.T @ b + 0.5 * np.eye(2)
        direction = flda.flda_fit(between, within, 1)[:, 0]
        rq = (direction @ between @ direction) / (direction @ within @ direction)
        assert rq >= grid_rayleigh_max(between, within) - 1e-6 * max(1.0, rq)


def test_flda_singular_within_errors():
    with pytest.raises(DataError):
        flda.flda_fit(np.eye(2), np.zeros((2, 2)), 1)


def test_flda_too_many_directions_errors():
    with pytest.raises(DataError):
        flda.flda_fit(np.eye(2), np.eye(2), 3)


# --- train / project / classify ---------------------------------------

def test_train_shapes_and_gallery():
    model = flda.train(TOY_TRAIN)
    assert model.projection.shape == (1, 2)  # d = c - 1 = 1
    assert model.gallery_features.shape == (4, 1)
    assert model.gallery_labels == [0, 0, 1, 1]
    # projecting a training image reproduces its gallery entry
    for vec, feat in zip(TOY_TRAIN.vectors, model.gallery_features):
        assert np.allclose(flda.project(model, vec), feat, atol=1e-9)


def test_train_rejects_degenerate_within_scatter():
    # TOY's within-class variation lies entirely on one axis
    with pytest.raises(DataError):
        flda.train(TOY)


def test_train_is_deterministic():
    m1 = flda.train(TOY_TRAIN)
    m2 = flda.train(TOY_TRAIN)
    assert np.array_equal(m1.projection, m2.projection)
    assert np.array_equal(m1.gallery_features, m2.gallery_features)


def test_train_unit_norm_rows():
    ds = synth_dataset(class_count=3, per_class=4, side=4, separation=300.0,
                       noise=10.0, seed=3)
    model = flda.train(ds)
    norms = np.linalg.norm(model.projection, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-9)


def test_train_rejects_single_member_class():
    ds = make_dataset([(0, 0), (0, 2), (4, 0)], [0, 0, 1])
    with pytest.raises(DataError):
        flda.train(ds)


def test_label_swap_flips_sign_only():
    swapped = make_dataset(TOY_TRAIN.vectors, [1, 1, 0, 0], ["b", "a"])
    m1 = flda.train(TOY_TRAIN)
    m2 = flda.train(swapped)
    row1, row2 = m1.projection[0], m2.projection[0]
    assert np.allclose(row1, row2, atol=1e-9) or np.allclose(row1, -row2, atol=1e-9)


def test_project_mean_gives_zero():
    ds = make_dataset([(0, 0), (2, 2), (6, 0), (4, 2)], [0, 0, 1, 1])
    model = flda.train(ds)
    assert np.allclose(flda.project(model, [3, 1]), 0.0, atol=1e-9)


def test_project_dimension_mismatch():
    model = flda.train(TOY_TRAIN)
    with pytest.raises(DataError):
        flda.project(model, [1, 2, 3])


def test_classify_training_image_has_zero_distance():
    model = flda.train(TOY_TRAIN)
    for i, vec in enumerate(TOY_TRAIN.vectors):
        label, distances = flda.classify_plain(model, vec)
        assert distances[i] == pytest.approx(0.0, abs=1e-12)
        assert label == TOY_TRAIN.labels[i]


def test_classify_toy_between_clusters():
    model = flda.train(TOY_TRAIN)
    label, _ = flda.classify_plain(model, [0, 1])
    assert label == 0  # the (0, .) cluster


def test_classify_gallery_permutation_invariant():
    rng = random.Random(8)
    ds = synth_dataset(class_count=3, per_class=3, side=3, separation=200.0,
                       noise=5.0, seed=12)
    model = flda.train(ds)
    probe = ds.vectors[4]
    label, distances = flda.classify_plain(model, probe)
    assert len(set(distances)) == len(distances)  # all distinct
    order = list(range(len(distances)))
    for _ in range(5):
        rng.shuffle(order)
        permuted = flda.TrainedModel(
            mean_sums=model.mean_sums,
            sample_count=model.sample_count,
            projection=model.projection,
            gallery_features=model.gallery_features[order],
            gallery_labels=[model.gallery_labels[i] for i in order],
            label_names=model.label_names,
            pca_dims=model.pca_dims,
            training_vectors=[model.training_vectors[i] for i in order],
        )
        assert flda.classify_plain(permuted, probe)[0] == label


def test_classify_matches_exact_oracle_random_instances():
    rng = random.Random(77)
    for trial in range(25):
        c = rng.choice([2, 3])
        per_class = rng.choice([2, 3, 4])
        side = rng.choice([2, 3, 4])
        ds = synth_dataset(class_count=c, per_class=per_class, side=side,
                           separation=rng.uniform(50, 300),
                           noise=rng.uniform(1, 40), seed=1000 + trial)
        try:
            model = flda.train(ds)
        except DataError:
            continue  # degenerate draw (rank collapse) is out of contract
        probe = [rng.randrange(256) for _ in range(side * side)]
        assert flda.classify_plain(model, probe)[0] == exact_distance_argmin(model, probe)


def test_label_permutation_equivariance():
    ds = synth_dataset(class_count=3, per_class=3, side=3, separation=250.0,
                       noise=8.0, seed=21)
    perm = [2, 0, 1]
    permuted = Dataset(
        vectors=ds.vectors,
        labels=[perm[l] for l in ds.labels],
        label_names=["x", "y", "z"],
        subject_ids=ds.subject_ids,
    )
    m1 = flda.train(ds)
    m2 = flda.train(permuted)
    rng = random.Random(5)
    for _ in range(10):
        probe = [rng.randrange(256) for _ in range(9)]
        l1, _ = flda.classify_plain(m1, probe)
        l2, _ = flda.classify_plain(m2, probe)
        assert l2 == perm[l1]
