"""Black-box query targets and the external oracle wire protocol.

The synthetic world pairs a tanh-squashed linear generator with a
centroid-softmax classifier, in two variants: the attack-time target
classifier and a held-out evaluation classifier with perturbed centroids.
Real per-class samples (for metrics) are materialized at construction and
exposed only through trusted accessors, never through the query path.

External oracles speak line-delimited JSON over a subprocess's stdio:

    greeting   {"proto": 1, "k": <int>, "K": <int>, "d": <int>}
    request    {"id": <int>, "latent": [k floats]}
    response   {"id": <int>, "confidence": [K floats], "feature": [d floats]?}
    shutdown   {"id": -1} -> server exits 0

One request in flight at a time; ids strictly increasing; a greeting d of 0
means the peer will never attach features. Unknown fields are ignored.
"""

import json
import subprocess
import threading
from dataclasses import dataclass, field

import numpy as np

from .backend import DTYPE, ops
from .errors import (
    ConfigError,
    ConstructionError,
    InputError,
    OracleHandshakeError,
    OracleProtocolError,
    OracleTransportError,
)
from .metrics import FeatureSet
from .nets import TANH_BOUND

PROTO_VERSION = 1

WORLD_FORMAT = "latentrl-world"
WORLD_VERSION = 1


@dataclass(frozen=True)
class OracleDescriptor:
    latent_dim: int
    num_classes: int
    feature_dim: int
    kind: str  # "synthetic" | "external"

    def __post_init__(self):
        if self.latent_dim < 1 or self.num_classes < 1:
            raise ConfigError(
                f"descriptor needs k, K >= 1, got k={self.latent_dim} "
                f"K={self.num_classes}"
            )


class QueryLedger:
    """Monotone, purpose-partitioned query counter."""

    PURPOSES = ("training", "evaluation", "warmup")

    def __init__(self):
        self._lock = threading.Lock()
        self._counts = {p: 0 for p in self.PURPOSES}

    def add(self, purpose, n=1):
        if purpose not in self._counts:
            raise InputError(f"unknown query purpose {purpose!r}")
        if n < 0:
            raise InputError("ledger counts never decrease")
        with self._lock:
            self._counts[purpose] += int(n)

    @property
    def total_queries(self):
        with self._lock:
            return sum(self._counts.values())

    def count(self, purpose):
        with self._lock:
            return self._counts[purpose]

    def snapshot(self):
        with self._lock:
            return dict(self._counts)


# ---------------------------------------------------------------------------
# Synthetic world


@dataclass
class SyntheticWorld:
    generator_weights: np.ndarray  # (d, k)
    target_centroids: np.ndarray  # (K, d)
    eval_centroids: np.ndarray  # (K, d)
    temperature: float
    perturbation: float
    separation: float
    anchor_latents: np.ndarray  # (K, k) latent centers of the private data
    centroid_latents: np.ndarray  # (K, k) preimages of the target centroids
    sample_latents: np.ndarray  # (K, n, k) private-sample latents
    sample_features: np.ndarray = field(repr=False, default=None)  # (K, n, d)

    @property
    def latent_dim(self):
        return self.generator_weights.shape[1]

    @property
    def feature_dim(self):
        return self.generator_weights.shape[0]

    @property
    def num_classes(self):
        return self.target_centroids.shape[0]

    def class_feature_set(self, label):
        """Trusted channel: private feature vectors of one class."""
        if not 0 <= label < self.num_classes:
            raise InputError(f"label {label} outside [0, {self.num_classes})")
        return FeatureSet(label=int(label), features=self.sample_features[label])

    def features_of(self, latents):
        """Trusted channel: generator features for arbitrary latents (no query)."""
        z = np.atleast_2d(np.asarray(latents, dtype=np.float64))
        if z.shape[1] != self.latent_dim:
            raise InputError(
                f"latents have dim {z.shape[1]}, world expects {self.latent_dim}"
            )
        return synth_generate_batch(self, z)


def synth_generate(world, z):
    """Generator map: x = tanh(W_g z) for a single latent."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (world.latent_dim,):
        raise InputError(
            f"latent shape {z.shape} does not match k={world.latent_dim}"
        )
    return synth_generate_batch(world, z[None, :])[0]


def synth_generate_batch(world, z):
    return ops.generate_features(
        np.ascontiguousarray(z, dtype=DTYPE),
        np.ascontiguousarray(world.generator_weights.T),
        DTYPE(TANH_BOUND),
    )


def synth_classify(world, x, which="target"):
    """Softmax over -||x - centroid_i||^2 / temperature for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (world.feature_dim,):
        raise InputError(
            f"feature shape {x.shape} does not match d={world.feature_dim}"
        )
    return synth_classify_batch(world, x[None, :], which)[0]


def synth_classify_batch(world, x, which="target"):
    if which == "target":
        centroids = world.target_centroids
    elif which == "evaluation":
        centroids = world.eval_centroids
    else:
        raise InputError(f"classifier variant must be target|evaluation, got {which!r}")
    return ops.classify_features(
        np.ascontiguousarray(x, dtype=DTYPE),
        np.ascontiguousarray(centroids),
        world.temperature,
    )


def make_world(
    seed,
    k=16,
    d=32,
    num_classes=10,
    separation=4.0,
    temperature=1.5,
    perturbation=None,
    generator_gain=2.0,
    anchor_range=0.75,
    classifier_offset=3.5,
    sample_spread=1.0,
    samples_per_class=64,
    max_retries=200,
):
    """Deterministically construct a synthetic generator/classifier world.

    Private data for class i clusters around a latent anchor; the target
    classifier's centroid is the generator image of a point displaced from
    that anchor by classifier_offset in a class-specific latent direction,
    so the confidence peak does not coincide with the data mode (as with a
    classifier overfit to limited data). Evaluation centroids are
    feature-space Gaussian perturbations of the target centroids, redrawn
    until each stays nearest to its own target centroid. perturbation
    defaults to 10% of the separation floor.
    """
    if num_classes < 1 or k < 1 or d < 1:
        raise ConfigError("k, d, num_classes must all be >= 1")
    if separation <= 0 or temperature <= 0:
        raise ConfigError("separation and temperature must be positive")
    if perturbation is None:
        perturbation = 0.1 * separation
    rng = np.random.default_rng(seed)
    wg = rng.normal(0.0, generator_gain / np.sqrt(k), size=(d, k)).astype(DTYPE)

    def feature_of(z):
        return np.tanh(wg @ z)

    def draw_offset():
        off = rng.normal(size=k)
        return off * (classifier_offset / np.linalg.norm(off))

    anchors = rng.uniform(-anchor_range, anchor_range, size=(num_classes, k))
    offsets = np.stack([draw_offset() for _ in range(num_classes)])
    centroid_latents = anchors + offsets
    centroids = np.stack([feature_of(c) for c in centroid_latents])

    # greedy redraw of offending classes until the separation floor holds
    for attempt in range(max_retries * num_classes):
        dists = np.linalg.norm(centroids[:, None] - centroids[None, :], axis=2)
        np.fill_diagonal(dists, np.inf)
        i, j = np.unravel_index(np.argmin(dists), dists.shape)
        if dists[i, j] >= separation:
            break
        anchors[j] = rng.uniform(-anchor_range, anchor_range, size=k)
        offsets[j] = draw_offset()
        centroid_latents[j] = anchors[j] + offsets[j]
        centroids[j] = feature_of(centroid_latents[j])
    else:
        raise ConstructionError(
            f"could not place {num_classes} centroids at separation "
            f"{separation} in {d} dimensions after {max_retries * num_classes} redraws"
        )

    # evaluation classifier: perturbed centroids, nearest-match preserved
    for attempt in range(max_retries):
        noise = rng.normal(0.0, perturbation / np.sqrt(d), size=(num_classes, d))
        eval_centroids = centroids + noise
        cross = np.linalg.norm(
            centroids[:, None] - eval_centroids[None, :], axis=2
        )
        if (np.argmin(cross, axis=1) == np.arange(num_classes)).all():
            break
    else:
        raise ConstructionError(
            f"evaluation centroids at perturbation {perturbation} kept "
            f"breaking the nearest-match invariant after {max_retries} redraws"
        )

    sample_latents = anchors[:, None, :] + sample_spread * rng.normal(
        size=(num_classes, samples_per_class, k)
    )
    sample_features = np.tanh(sample_latents @ wg.T)

    return SyntheticWorld(
        generator_weights=wg,
        target_centroids=centroids.astype(DTYPE),
        eval_centroids=eval_centroids.astype(DTYPE),
        temperature=float(temperature),
        perturbation=float(perturbation),
        separation=float(separation),
        anchor_latents=anchors,
        centroid_latents=centroid_latents,
        sample_latents=sample_latents.astype(DTYPE),
        sample_features=sample_features.astype(DTYPE),
    )


def world_to_dict(world, which="target"):
    """Serializable view of the world for external adapters.

    Only what an adapter needs to serve queries: generator weights, the
    selected classifier's centroids, and the temperature.
    """
    if which not in ("target", "evaluation"):
        raise InputError(f"classifier variant must be target|evaluation, got {which!r}")
    centroids = world.target_centroids if which == "target" else world.eval_centroids
    return {
        "format": WORLD_FORMAT,
        "version": WORLD_VERSION,
        "k": world.latent_dim,
        "d": world.feature_dim,
        "K": world.num_classes,
        "temperature": world.temperature,
        "generator_weights": world.generator_weights.tolist(),
        "centroids": centroids.tolist(),
    }


def save_world(path, world, which="target"):
    with open(path, "w") as fh:
        json.dump(world_to_dict(world, which), fh)


# ---------------------------------------------------------------------------
# Confidence validation shared by all oracle paths


def _validated_confidences(conf, num_classes, ordinal, counter):
    conf = np.asarray(conf, dtype=np.float64)
    if conf.shape != (num_classes,):
        raise OracleProtocolError(
            f"confidence vector has shape {conf.shape}, expected ({num_classes},)",
            query_ordinal=ordinal,
        )
    if not np.isfinite(conf).all() or (conf < 0).any():
        raise OracleProtocolError(
            "confidence vector has negative or non-finite entries",
            query_ordinal=ordinal,
        )
    total = conf.sum()
    if abs(total - 1.0) > 1e-6:
        if total <= 0:
            raise OracleProtocolError(
                f"confidence vector sums to {total}", query_ordinal=ordinal
            )
        counter[0] += 1
        conf = conf / total
    return conf


class SyntheticOracle:
    """Query interface over a SyntheticWorld (target or evaluation classifier)."""

    def __init__(self, world, which="target", ledger=None):
        if which not in ("target", "evaluation"):
            raise ConfigError(f"which must be target|evaluation, got {which!r}")
        self.world = world
        self.which = which
        self.ledger = ledger if ledger is not None else QueryLedger()
        self._renormalized = [0]

    @property
    def descriptor(self):
        return OracleDescriptor(
            latent_dim=self.world.latent_dim,
            num_classes=self.world.num_classes,
            feature_dim=self.world.feature_dim,
            kind="synthetic",
        )

    @property
    def renormalized_count(self):
        return self._renormalized[0]

    def query(self, z, purpose="training"):
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.world.latent_dim,):
            raise InputError(
                f"latent shape {z.shape} does not match k={self.world.latent_dim}"
            )
        self.ledger.add(purpose)
        x = synth_generate(self.world, z)
        conf = synth_classify(self.world, x, self.which)
        return _validated_confidences(
            conf, self.world.num_classes, self.ledger.total_queries, self._renormalized
        )

    def query_batch(self, latents, purpose="training"):
        z = np.atleast_2d(np.asarray(latents, dtype=np.float64))
        if z.shape[1] != self.world.latent_dim:
            raise InputError(
                f"latents have dim {z.shape[1]}, world expects {self.world.latent_dim}"
            )
        self.ledger.add(purpose, z.shape[0])
        x = synth_generate_batch(self.world, z)
        return synth_classify_batch(self.world, x, self.which)


def oracle_query(oracle, z, purpose="training"):
    return oracle.query(z, purpose)


# ---------------------------------------------------------------------------
# Wire protocol helpers


def encode_greeting(k, num_classes, feature_dim):
    return json.dumps(
        {"proto": PROTO_VERSION, "k": int(k), "K": int(num_classes), "d": int(feature_dim)}
    )


def decode_greeting(line):
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise OracleProtocolError(
            f"greeting is not valid JSON: {line[:120]!r} ({exc})"
        ) from exc
    if not isinstance(msg, dict):
        raise OracleProtocolError(f"greeting is not an object: {line[:120]!r}")
    for key in ("proto", "k", "K"):
        if key not in msg:
            raise OracleProtocolError(f"greeting missing {key!r}: {line[:120]!r}")
    return {
        "proto": int(msg["proto"]),
        "k": int(msg["k"]),
        "K": int(msg["K"]),
        "d": int(msg.get("d", 0)),
    }


def encode_request(req_id, latent):
    return json.dumps(
        {"id": int(req_id), "latent": [float(v) for v in np.asarray(latent).ravel()]}
    )


def encode_shutdown():
    return json.dumps({"id": -1})


def decode_response(line, ordinal=None):
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise OracleProtocolError(
            f"response is not valid JSON: {line[:120]!r} ({exc})", query_ordinal=ordinal
        ) from exc
    if not isinstance(msg, dict) or "id" not in msg:
        raise OracleProtocolError(
            f"response missing id: {line[:120]!r}", query_ordinal=ordinal
        )
    if "error" in msg:
        raise OracleProtocolError(
            f"peer reported error: {msg['error']}", query_ordinal=ordinal
        )
    if "confidence" not in msg:
        raise OracleProtocolError(
            f"response missing confidence: {line[:120]!r}", query_ordinal=ordinal
        )
    conf = np.asarray(msg["confidence"], dtype=np.float64)
    feature = msg.get("feature")
    if feature is not None:
        feature = np.asarray(feature, dtype=np.float64)
    return int(msg["id"]), conf, feature


def external_handshake(greeting_line, expected_k, expected_classes):
    """Validate a peer's greeting against the experiment's dimensions."""
    info = decode_greeting(greeting_line)
    if info["proto"] != PROTO_VERSION:
        raise OracleHandshakeError(
            f"protocol version mismatch: peer speaks {info['proto']}, "
            f"client speaks {PROTO_VERSION}"
        )
    if info["k"] != expected_k:
        raise OracleHandshakeError(
            f"latent dimension mismatch: peer announces k={info['k']}, "
            f"config expects k={expected_k}"
        )
    if info["K"] != expected_classes:
        raise OracleHandshakeError(
            f"class count mismatch: peer announces K={info['K']}, "
            f"config expects K={expected_classes}"
        )
    return OracleDescriptor(
        latent_dim=info["k"],
        num_classes=info["K"],
        feature_dim=info["d"],
        kind="external",
    )


class ExternalOracle:
    """Lock-step client for a subprocess oracle speaking the wire protocol."""

    def __init__(self, command, expected_k, expected_classes, ledger=None, env=None):
        self.ledger = ledger if ledger is not None else QueryLedger()
        self._renormalized = [0]
        self._next_id = 0
        self.last_feature = None
        try:
            self._proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
                env=env,
            )
        except OSError as exc:
            raise OracleTransportError(f"could not start oracle process: {exc}") from exc
        greeting = self._read_line(ordinal=None)
        try:
            self.descriptor = external_handshake(greeting, expected_k, expected_classes)
        except Exception:
            self._proc.kill()
            raise

    def _read_line(self, ordinal):
        try:
            line = self._proc.stdout.readline()
        except OSError as exc:
            raise OracleTransportError(str(exc), query_ordinal=ordinal) from exc
        if line == "":
            code = self._proc.poll()
            raise OracleTransportError(
                f"oracle process closed its output (exit code {code})",
                query_ordinal=ordinal,
            )
        return line

    def _write_line(self, line, ordinal):
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (OSError, BrokenPipeError) as exc:
            raise OracleTransportError(str(exc), query_ordinal=ordinal) from exc

    @property
    def renormalized_count(self):
        return self._renormalized[0]

    def query(self, z, purpose="training"):
        conf, _ = self.query_with_feature(z, purpose)
        return conf

    def query_with_feature(self, z, purpose="training"):
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.descriptor.latent_dim,):
            raise InputError(
                f"latent shape {z.shape} does not match k={self.descriptor.latent_dim}"
            )
        req_id = self._next_id
        self._next_id += 1
        self.ledger.add(purpose)
        ordinal = self.ledger.total_queries
        self._write_line(encode_request(req_id, z), ordinal)
        resp_id, conf, feature = decode_response(self._read_line(ordinal), ordinal)
        if resp_id != req_id:
            raise OracleProtocolError(
                f"response id {resp_id} does not match request id {req_id}",
                query_ordinal=ordinal,
            )
        if feature is not None and self.descriptor.feature_dim == 0:
            raise OracleProtocolError(
                "peer attached a feature despite announcing d=0",
                query_ordinal=ordinal,
            )
        conf = _validated_confidences(
            conf, self.descriptor.num_classes, ordinal, self._renormalized
        )
        self.last_feature = feature
        return conf, feature

    def query_batch(self, latents, purpose="training"):
        z = np.atleast_2d(np.asarray(latents, dtype=np.float64))
        return np.stack([self.query(row, purpose) for row in z])

    def close(self):
        if self._proc.poll() is None:
            try:
                self._write_line(encode_shutdown(), None)
            except OracleTransportError:
                pass
            try:
                self._proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._proc.stdin:
            self._proc.stdin.close()
        if self._proc.stdout:
            self._proc.stdout.close()
        return self._proc.returncode

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
