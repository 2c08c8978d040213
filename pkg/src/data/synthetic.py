"""Gaussian-blob classification data for desk-scale runs."""

import numpy as np
import numpy.typing as npt

from src.data.dataset import Dataset
from src.utils.errors import InvalidArgumentError


# Means are never closer than this, so a zero-noise set is still learnable.
MIN_MEAN_SEPARATION = 1.0
_DIRECTION_CANDIDATES = 16


def _min_pairwise_distance(points: npt.NDArray[np.float64]) -> float:
    diffs = points[:, None, :] - points[None, :, :]
    dists = np.sqrt((diffs ** 2).sum(axis=-1))
    np.fill_diagonal(dists, np.inf)
    return float(dists.min())


def _unit_arrangement(num_classes: int, dim: int, rng: np.random.Generator) -> npt.NDArray[np.float64]:
    """Class mean directions with unit minimum pairwise distance.

    Uses the simplex vertices ``e_c`` when ``dim >= num_classes``, an even
    spacing on a line for ``dim == 1``, and otherwise the best-spread of several
    random sphere arrangements.
    """
    if num_classes == 1:
        return np.zeros((1, dim))
    if dim >= num_classes:
        points = np.zeros((num_classes, dim))
        points[np.arange(num_classes), np.arange(num_classes)] = 1.0
    elif dim == 1:
        points = (np.arange(num_classes, dtype=np.float64) - (num_classes - 1) / 2.0).reshape(-1, 1)
    else:
        best, best_gap = None, -1.0
        for _ in range(_DIRECTION_CANDIDATES):
            cand = rng.standard_normal((num_classes, dim))
            cand /= np.linalg.norm(cand, axis=1, keepdims=True)
            gap = _min_pairwise_distance(cand)
            if gap > best_gap:
                best, best_gap = cand, gap
        points = best
    return points / _min_pairwise_distance(points)


def blob_means(num_classes: int, dim: int, spread: float, seed: int) -> npt.NDArray[np.float64]:
    """True class means used by ``synth_blobs`` for the same arguments."""
    separation = max(4.0 * spread, MIN_MEAN_SEPARATION)
    return _unit_arrangement(num_classes, dim, np.random.default_rng([seed, 0])) * separation


def synth_blobs(num_classes: int, per_class: int, dim: int, spread: float, seed: int) -> Dataset:
    """Isotropic Gaussian blobs, one per class.

    Class means sit on a scaled simplex/sphere arrangement with every pair at
    least ``max(4 * spread, MIN_MEAN_SEPARATION)`` apart. Samples are ordered by
    class.

    Args:
        num_classes: Number of classes
        per_class: Samples per class
        dim: Feature dimension
        spread: Per-coordinate standard deviation around each mean
        seed: Seed for the arrangement and the noise

    Returns:
        Dataset with ``num_classes * per_class`` rows
    """
    if min(num_classes, per_class, dim) < 1:
        raise InvalidArgumentError("num_classes, per_class and dim must all be >= 1")
    if spread < 0:
        raise InvalidArgumentError(f"spread must be non-negative, got {spread}")

    means = blob_means(num_classes, dim, spread, seed)
    rng = np.random.default_rng([seed, 1])

    labels = np.repeat(np.arange(num_classes, dtype=np.int64), per_class)
    noise = rng.standard_normal((num_classes * per_class, dim)) * spread
    features = means[labels] + noise
    return Dataset(features=features, labels=labels, num_classes=num_classes)


def class_means(ds: Dataset) -> npt.NDArray[np.float64]:
    """Empirical per-class feature means."""
    return np.stack([ds.features[ds.labels == c].mean(axis=0) for c in range(ds.num_classes)])
