"""Quantitative evaluation of reconstructions.

attack_accuracy judges reconstructions with a held-out evaluation oracle;
knn_dist / feat_dist measure feature-space closeness to the private samples
of the target class; density_coverage are the k-NN-ball fidelity/diversity
estimates for sample sets.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InputError, UnavailableError


@dataclass
class FeatureSet:
    """Private ("real") feature vectors for one class, via the trusted channel."""

    label: int
    features: np.ndarray  # (n, d)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise InputError("FeatureSet needs a nonempty (n, d) feature array")


@dataclass
class MetricsReport:
    attack_accuracy: float
    knn_dist: float
    feat_dist: float
    density: float
    coverage: float
    queries_used: int

    def to_dict(self):
        return {
            "attack_accuracy": self.attack_accuracy,
            "knn_dist": self.knn_dist,
            "feat_dist": self.feat_dist,
            "density": self.density,
            "coverage": self.coverage,
            "queries_used": self.queries_used,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def attack_accuracy(reconstructions, eval_oracle, purpose="evaluation"):
    """Fraction of (latent, target_class) pairs the evaluation oracle assigns
    to their target class by argmax."""
    if len(reconstructions) == 0:
        raise UnavailableError("no reconstructions to evaluate")
    hits = 0
    for latent, target in reconstructions:
        conf = eval_oracle.query(np.asarray(latent, dtype=np.float64), purpose)
        if int(np.argmax(conf)) == int(target):
            hits += 1
    return hits / len(reconstructions)


def _as_2d(name, arr):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise UnavailableError(f"{name} must be a nonempty (n, d) array")
    return arr


def knn_dist(recon_features, target_set):
    """Mean distance from each reconstruction to its nearest private sample."""
    recon = _as_2d("recon_features", recon_features)
    real = target_set.features
    if recon.shape[1] != real.shape[1]:
        raise InputError(
            f"feature dims disagree: {recon.shape[1]} vs {real.shape[1]}"
        )
    d = cdist(recon, real)
    return float(d.min(axis=1).mean())


def feat_dist(recon_features, target_set):
    """Mean distance from each reconstruction to the private-sample centroid."""
    recon = _as_2d("recon_features", recon_features)
    real = target_set.features
    if recon.shape[1] != real.shape[1]:
        raise InputError(
            f"feature dims disagree: {recon.shape[1]} vs {real.shape[1]}"
        )
    centroid = real.mean(axis=0)
    return float(np.linalg.norm(recon - centroid, axis=1).mean())


def density_coverage(real_features, fake_features, neighbor_k=5):
    """k-NN-ball density and coverage of fake samples w.r.t. real samples.

    Each real point carries a ball whose radius is the distance to its
    neighbor_k-th nearest other real point. density counts, per fake, how
    many balls contain it (normalized by neighbor_k); coverage is the
    fraction of real points whose ball contains at least one fake.
    """
    real = _as_2d("real_features", real_features)
    fake = _as_2d("fake_features", fake_features)
    if real.shape[1] != fake.shape[1]:
        raise InputError(
            f"feature dims disagree: {real.shape[1]} vs {fake.shape[1]}"
        )
    if neighbor_k < 1:
        raise InputError(f"neighbor_k must be >= 1, got {neighbor_k}")
    if real.shape[0] < neighbor_k + 1 or fake.shape[0] < neighbor_k + 1:
        raise UnavailableError(
            f"need at least neighbor_k + 1 = {neighbor_k + 1} points per set, "
            f"got {real.shape[0]} real and {fake.shape[0]} fake"
        )
    real_self = cdist(real, real)
    # k-th nearest excluding self: self-distance 0 occupies rank 0
    radii = np.partition(real_self, neighbor_k, axis=1)[:, neighbor_k]
    real_fake = cdist(real, fake)
    inside = real_fake < radii[:, None]  # (n_real, n_fake)
    density = float(inside.sum(axis=0).mean() / neighbor_k)
    coverage = float(inside.any(axis=1).mean())
    return density, coverage
