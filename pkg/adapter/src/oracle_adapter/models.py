"""Bundled models the adapter can serve.

A model is a callable mapping a k-vector latent to (confidence, feature);
feature may be None. Two implementations ship with the adapter:

* WorldModel: an independent implementation of the synthetic
  generator/classifier world, loaded from a world JSON file
  (format "latentrl-world"): x = tanh(W_g z), confidences are the softmax
  of -||x - centroid_i||^2 / temperature.
* StubModel: a seeded random-projection classifier for protocol fuzzing.
"""

import json

import numpy as np


class WorldModel:
    def __init__(self, path):
        with open(path) as fh:
            data = json.load(fh)
        if data.get("format") != "latentrl-world":
            raise ValueError(f"{path} is not a world file")
        if data.get("version") != 1:
            raise ValueError(f"unsupported world file version {data.get('version')}")
        self.generator_weights = np.asarray(data["generator_weights"], dtype=np.float64)
        self.centroids = np.asarray(data["centroids"], dtype=np.float64)
        self.temperature = float(data["temperature"])
        self.k = self.generator_weights.shape[1]
        self.num_classes = self.centroids.shape[0]
        self.feature_dim = self.generator_weights.shape[0]

    def __call__(self, latent):
        feature = np.tanh(self.generator_weights @ latent)
        sq = ((feature[None, :] - self.centroids) ** 2).sum(axis=1)
        logits = -sq / self.temperature
        logits -= logits.max()
        conf = np.exp(logits)
        conf /= conf.sum()
        return conf, feature


class StubModel:
    """Deterministic pseudo-classifier: softmax of a fixed random projection."""

    def __init__(self, seed, k, num_classes, feature_dim):
        rng = np.random.default_rng(int(seed))
        self.k = int(k)
        self.num_classes = int(num_classes)
        self.feature_dim = int(feature_dim)
        self._proj = rng.normal(size=(self.num_classes, self.k))
        self._feat = rng.normal(size=(self.feature_dim, self.k)) if feature_dim else None

    def __call__(self, latent):
        logits = self._proj @ latent
        logits -= logits.max()
        conf = np.exp(logits)
        conf /= conf.sum()
        feature = np.tanh(self._feat @ latent) if self._feat is not None else None
        return conf, feature


def load_model(locator, k, num_classes, feature_dim):
    """Resolve a model locator: world:<path> or stub:<seed>."""
    if locator.startswith("world:"):
        model = WorldModel(locator[len("world:") :])
        for name, got, want in (
            ("k", model.k, k),
            ("K", model.num_classes, num_classes),
        ):
            if got != want:
                raise ValueError(
                    f"world file announces {name}={got}, adapter config says {want}"
                )
        return model
    if locator.startswith("stub:"):
        return StubModel(locator[len("stub:") :], k, num_classes, feature_dim)
    raise ValueError(f"unknown model locator {locator!r}")
