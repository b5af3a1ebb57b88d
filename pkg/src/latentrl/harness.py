"""Experiment orchestration: per-class agent training against an oracle,
a random-search control, diversity and episode-budget sweeps, and report
files.

Every run is fully determined by (config, seeds): episode initial states are
derived from (episode_seed, stream, class, index) so classes are independent
and can be replayed in any order; the agent's own RNG drives action noise
and batch sampling.
"""

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .agents import (
    AgentHyperparams,
    ddpg_update,
    load_agent,
    make_agent,
    sac_update,
    save_agent,
    select_action,
    td3_update,
)
from .env import EnvConfig, env_step, init_state, transition
from .errors import ConfigError, NumericError, OracleError
from .metrics import MetricsReport, attack_accuracy, density_coverage, feat_dist, knn_dist
from .oracles import ExternalOracle, QueryLedger, SyntheticOracle, make_world
from .replay import ReplayBuffer, TransitionRecord

# streams for derived RNGs
_STREAM_EPISODE = 0
_STREAM_WARMUP = 1
_STREAM_EXPLOIT = 2
_STREAM_BASELINE = 3

EPISODE_COLUMNS = (
    "class",
    "episode",
    "init_seed",
    "reward",
    "r1",
    "r2",
    "r3",
    "episode_return",
    "best_confidence",
    "cumulative_queries",
)

METRIC_COLUMNS = (
    "class",
    "attack_acc",
    "knn",
    "feat",
    "density",
    "coverage",
    "queries",
)


def derived_rng(base_seed, *key):
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([int(base_seed), *map(int, key)]))
    )


def derived_seed_word(base_seed, *key):
    ss = np.random.SeedSequence([int(base_seed), *map(int, key)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class Seeds:
    world: int = 7
    agent: int = 11
    episodes: int = 13

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class OracleSpec:
    kind: str = "synthetic"  # synthetic | external
    latent_dim: int = 16
    feature_dim: int = 32
    num_classes: int = 10
    separation: float = 4.0
    temperature: float = 1.5
    perturbation: float = None  # None -> 10% of separation
    generator_gain: float = 2.0
    anchor_range: float = 0.75
    classifier_offset: float = 3.5
    sample_spread: float = 1.0
    samples_per_class: int = 64
    command: tuple = None  # external only

    def __post_init__(self):
        if self.kind not in ("synthetic", "external"):
            raise ConfigError(f"oracle kind must be synthetic|external, got {self.kind!r}")
        if self.kind == "external" and not self.command:
            raise ConfigError("external oracle spec needs a command")

    def to_dict(self):
        d = dict(self.__dict__)
        d["command"] = list(self.command) if self.command else None
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("command"):
            d["command"] = tuple(d["command"])
        return cls(**d)


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = None
    agent: AgentHyperparams = None
    algorithm: str = "sac"
    oracle: OracleSpec = None
    max_episodes: int = 4000
    seeds: Seeds = None
    output_dir: str = None
    checkpoint_every: int = 1000
    target_classes: tuple = None  # None -> every class
    exploit_samples: int = 1000
    neighbor_k: int = 5
    config_text: str = None  # raw config file text, echoed into reports

    def __post_init__(self):
        object.__setattr__(self, "oracle", self.oracle or OracleSpec())
        object.__setattr__(self, "agent", self.agent or AgentHyperparams())
        object.__setattr__(self, "seeds", self.seeds or Seeds())
        if self.env is None:
            object.__setattr__(
                self,
                "env",
                EnvConfig(
                    latent_dim=self.oracle.latent_dim,
                    num_classes=self.oracle.num_classes,
                    target_class=0,
                ),
            )
        if self.max_episodes < 0:
            raise ConfigError(f"max_episodes must be >= 0, got {self.max_episodes}")
        if self.checkpoint_every < 1:
            raise ConfigError(
                f"checkpoint_every must be >= 1, got {self.checkpoint_every}"
            )
        if self.env.latent_dim != self.oracle.latent_dim:
            raise ConfigError(
                f"env latent_dim {self.env.latent_dim} != oracle latent_dim "
                f"{self.oracle.latent_dim}"
            )
        if self.env.num_classes != self.oracle.num_classes:
            raise ConfigError(
                f"env num_classes {self.env.num_classes} != oracle num_classes "
                f"{self.oracle.num_classes}"
            )
        if self.target_classes is not None:
            object.__setattr__(
                self, "target_classes", tuple(int(c) for c in self.target_classes)
            )
            for c in self.target_classes:
                if not 0 <= c < self.env.num_classes:
                    raise ConfigError(f"target class {c} outside the oracle's range")
        if self.config_text is None:
            object.__setattr__(self, "config_text", json.dumps(self.to_dict(), indent=2))

    def to_dict(self):
        return {
            "version": 1,
            "env": dict(
                latent_dim=self.env.latent_dim,
                num_classes=self.env.num_classes,
                target_class=self.env.target_class,
                diversity_factor=self.env.diversity_factor,
                reward_weights=list(self.env.reward_weights),
                clamp_eps=self.env.clamp_eps,
                max_step=self.env.max_step,
                action_scale=self.env.action_scale,
                dedup_queries=self.env.dedup_queries,
            ),
            "agent": self.agent.to_dict(),
            "algorithm": self.algorithm,
            "oracle": self.oracle.to_dict(),
            "max_episodes": self.max_episodes,
            "seeds": self.seeds.to_dict(),
            "output_dir": self.output_dir,
            "checkpoint_every": self.checkpoint_every,
            "target_classes": list(self.target_classes)
            if self.target_classes is not None
            else None,
            "exploit_samples": self.exploit_samples,
            "neighbor_k": self.neighbor_k,
        }

    @classmethod
    def from_dict(cls, d, config_text=None):
        d = dict(d)
        d.pop("version", None)
        env = d.get("env")
        if env is not None:
            env = dict(env)
            env["reward_weights"] = tuple(env.get("reward_weights", (2.0, 2.0, 8.0)))
            d["env"] = EnvConfig(**env)
        if d.get("agent") is not None:
            d["agent"] = AgentHyperparams.from_dict(d["agent"])
        if d.get("oracle") is not None:
            d["oracle"] = OracleSpec.from_dict(d["oracle"])
        if d.get("seeds") is not None:
            d["seeds"] = Seeds.from_dict(d["seeds"])
        if d.get("target_classes") is not None:
            d["target_classes"] = tuple(d["target_classes"])
        return cls(**d, config_text=config_text)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text), config_text=text)

    def config_hash(self):
        return hashlib.sha256(self.config_text.encode()).hexdigest()


@dataclass
class ClassResult:
    target_class: int
    best_latent: list
    best_confidence: float
    best_episode: int
    episodes_run: int
    queries: dict

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class RunSummary:
    kind: str  # attack | baseline
    algorithm: str
    class_results: list
    metrics: MetricsReport
    per_class_metrics: list
    episode_rows: list = field(default_factory=list)  # tuples per EPISODE_COLUMNS
    ledger: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    config_echo: str = ""
    version: str = __version__
    partial: bool = False
    failure: str = None

    def to_dict(self, include_rows=True):
        d = {
            "kind": self.kind,
            "algorithm": self.algorithm,
            "class_results": [c.to_dict() for c in self.class_results],
            "metrics": self.metrics.to_dict(),
            "per_class_metrics": self.per_class_metrics,
            "ledger": self.ledger,
            "wall_clock": self.wall_clock,
            "config_echo": self.config_echo,
            "version": self.version,
            "partial": self.partial,
            "failure": self.failure,
        }
        if include_rows:
            d["episode_rows"] = [list(r) for r in self.episode_rows]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["class_results"] = [ClassResult.from_dict(c) for c in d["class_results"]]
        d["metrics"] = MetricsReport.from_dict(d["metrics"])
        d["episode_rows"] = [tuple(r) for r in d.get("episode_rows", [])]
        return cls(**d)


# ---------------------------------------------------------------------------
# Oracles


def build_world(config):
    spec = config.oracle
    if spec.kind != "synthetic":
        return None
    return make_world(
        seed=config.seeds.world,
        k=spec.latent_dim,
        d=spec.feature_dim,
        num_classes=spec.num_classes,
        separation=spec.separation,
        temperature=spec.temperature,
        perturbation=spec.perturbation,
        generator_gain=spec.generator_gain,
        anchor_range=spec.anchor_range,
        classifier_offset=spec.classifier_offset,
        sample_spread=spec.sample_spread,
        samples_per_class=spec.samples_per_class,
    )


def build_oracles(config, ledger=None):
    """Returns (world, target_oracle, eval_oracle); world/eval are None for
    external oracles."""
    ledger = ledger if ledger is not None else QueryLedger()
    if config.oracle.kind == "synthetic":
        world = build_world(config)
        target = SyntheticOracle(world, "target", ledger)
        evaluation = SyntheticOracle(world, "evaluation", ledger)
        return world, target, evaluation
    target = ExternalOracle(
        list(config.oracle.command),
        expected_k=config.env.latent_dim,
        expected_classes=config.env.num_classes,
        ledger=ledger,
    )
    return None, target, None


# ---------------------------------------------------------------------------
# Per-class training


class ClassTrainer:
    """Sequential trainer for one target class; resumable and pausable.

    Oracle failures roll the replay buffer and action RNG back to the episode
    boundary, so a failure-time checkpoint resumes bit-identically when
    max_step is 1 (gradient updates inside longer aborted episodes are not
    undone).
    """

    def __init__(self, config, target_class, oracle):
        self.config = config
        self.y = int(target_class)
        self.oracle = oracle
        self.env = dataclasses.replace(config.env, target_class=self.y)
        self.agent = make_agent(
            config.algorithm,
            self.env.latent_dim,
            config.agent,
            derived_rng(config.seeds.agent, self.y),
            self.env.action_scale,
        )
        self.buffer = ReplayBuffer(config.agent.replay_capacity, self.env.latent_dim)
        self.best_latent = None
        self.best_confidence = -np.inf
        self.best_episode = -1
        self.episodes_done = 0
        self.warmup_done = False
        self.update_index = 0
        self.rows = []
        self.query_start = self.oracle.ledger.snapshot()
        self.query_end = None  # set when this class's training completes
        # ledger state at the last episode boundary; what a failure checkpoint
        # records so a resumed run replays queries consistently
        self._consistent_ledger = None

    def _update(self, batch):
        if self.agent.algorithm == "sac":
            sac_update(self.agent, batch)
        elif self.agent.algorithm == "td3":
            td3_update(self.agent, batch, self.update_index)
        else:
            ddpg_update(self.agent, batch)
        self.update_index += 1

    def _warmup(self):
        hp = self.config.agent
        pushes_before = self.buffer.total_pushed
        ledger_before = self.oracle.ledger.snapshot()
        try:
            steps = 0
            index = 0
            while steps < hp.warmup_steps:
                rng = derived_rng(
                    self.config.seeds.episodes, _STREAM_WARMUP, self.y, index
                )
                index += 1
                s = init_state(self.env.latent_dim, rng)
                for step in range(1, self.env.max_step + 1):
                    a = rng.uniform(
                        -self.env.action_scale,
                        self.env.action_scale,
                        self.env.latent_dim,
                    )
                    out = env_step(s, a, self.oracle, self.env, step, purpose="warmup")
                    self.buffer.push(
                        TransitionRecord(s, a, out.reward, out.next_state, out.done)
                    )
                    s = out.next_state
                    steps += 1
        except OracleError:
            # roll back to the pre-warm-up state so a checkpoint stays consistent
            self.buffer = self.buffer.truncated_to(pushes_before)
            self._consistent_ledger = ledger_before
            raise
        self.warmup_done = True

    def run_until(self, episode_target):
        episode_target = min(episode_target, self.config.max_episodes)
        if episode_target <= self.episodes_done:
            return
        if not self.warmup_done:
            self._warmup()
        hp = self.config.agent
        for ep in range(self.episodes_done, episode_target):
            seed_word = derived_seed_word(
                self.config.seeds.episodes, _STREAM_EPISODE, self.y, ep
            )
            rng = derived_rng(self.config.seeds.episodes, _STREAM_EPISODE, self.y, ep)
            s = init_state(self.env.latent_dim, rng)
            episode_return = 0.0
            last = None
            rng_state = self.agent.rng.bit_generator.state
            pushes_before = self.buffer.total_pushed
            ledger_before = self.oracle.ledger.snapshot()
            try:
                for step in range(1, self.env.max_step + 1):
                    a = select_action(self.agent, s, "explore")
                    out = env_step(s, a, self.oracle, self.env, step, purpose="training")
                    self.buffer.push(
                        TransitionRecord(s, a, out.reward, out.next_state, out.done)
                    )
                    episode_return += out.reward
                    conf = float(out.state_confidences[self.y])
                    if conf > self.best_confidence:
                        self.best_confidence = conf
                        self.best_latent = out.next_state.copy()
                        self.best_episode = ep
                    if self.buffer.size >= hp.batch_size:
                        self._update(self.buffer.sample(hp.batch_size, self.agent.rng))
                    s = out.next_state
                    last = out
            except OracleError:
                # roll back to the episode boundary: a failure checkpoint must
                # bit-reproduce the straight-through run on resume
                self.agent.rng.bit_generator.state = rng_state
                self.buffer = self.buffer.truncated_to(pushes_before)
                self._consistent_ledger = ledger_before
                raise
            except NumericError as exc:
                raise NumericError(
                    f"{exc} (class {self.y}, episode {ep})"
                ) from exc
            self.episodes_done = ep + 1
            self.rows.append(
                (
                    self.y,
                    ep,
                    seed_word,
                    last.reward,
                    last.r1,
                    last.r2,
                    last.r3,
                    episode_return,
                    self.best_confidence,
                    self.oracle.ledger.total_queries,
                )
            )
            if (
                self.config.output_dir
                and (ep + 1) % self.config.checkpoint_every == 0
                and ep + 1 < self.config.max_episodes
            ):
                self.save_checkpoint()

    def mark_training_finished(self):
        self.query_end = self.oracle.ledger.snapshot()

    def query_delta(self):
        """Queries this class's training spent (training + warm-up purposes)."""
        end = self.query_end if self.query_end is not None else self.oracle.ledger.snapshot()
        return {key: end[key] - self.query_start.get(key, 0) for key in end}

    def exploit_latents(self, n, rng=None):
        """Deterministic-policy reconstructions from fresh initial states."""
        if rng is None:
            rng = derived_rng(self.config.seeds.episodes, _STREAM_EXPLOIT, self.y)
        states = rng.standard_normal((n, self.env.latent_dim))
        for _ in range(self.env.max_step):
            actions = _exploit_actions(self.agent, states)
            states = transition(states, actions, self.env.diversity_factor)
        return states

    def reconstruction(self):
        """Best-confidence latent, or an exploit sample before any episode ran."""
        if self.best_latent is not None:
            return self.best_latent
        return self.exploit_latents(1)[0]

    # -- checkpointing ------------------------------------------------------

    def checkpoint_path(self):
        return Path(self.config.output_dir) / "checkpoints" / f"class_{self.y}.npz"

    def save_checkpoint(self):
        path = self.checkpoint_path()
        path.parent.mkdir(parents=True, exist_ok=True)
        # seed words are uint64; keep integer columns exact
        rows_int = np.array(
            [(r[0], r[1], r[2], r[9]) for r in self.rows], dtype=np.uint64
        ).reshape(len(self.rows), 4)
        rows_float = np.array(
            [r[3:9] for r in self.rows], dtype=np.float64
        ).reshape(len(self.rows), 6)
        extra_meta = {
            "config_hash": self.config.config_hash(),
            "target_class": self.y,
            "episodes_done": self.episodes_done,
            "warmup_done": self.warmup_done,
            "update_index": self.update_index,
            "best_confidence": float(self.best_confidence),
            "best_episode": self.best_episode,
            "ledger": self._consistent_ledger
            if self._consistent_ledger is not None
            else self.oracle.ledger.snapshot(),
            "query_start": self.query_start,
        }
        extra_arrays = dict(self.buffer.state_arrays())
        extra_arrays["rows_int"] = rows_int
        extra_arrays["rows_float"] = rows_float
        extra_arrays["best_latent"] = (
            self.best_latent if self.best_latent is not None else np.zeros(0)
        )
        save_agent(path, self.agent, extra_meta, extra_arrays)

    def load_checkpoint(self):
        path = self.checkpoint_path()
        agent, meta, arrays = load_agent(path)
        if meta["config_hash"] != self.config.config_hash():
            raise ConfigError(
                f"checkpoint {path} was written by a different config; refusing to resume"
            )
        self.agent = agent
        self.buffer = ReplayBuffer.from_state_arrays(
            self.config.agent.replay_capacity,
            self.env.latent_dim,
            {
                key: arrays[key]
                for key in ("states", "actions", "rewards", "next_states", "dones")
            },
        )
        self.episodes_done = int(meta["episodes_done"])
        self.warmup_done = bool(meta["warmup_done"])
        self.update_index = int(meta["update_index"])
        self.best_confidence = float(meta["best_confidence"])
        self.best_episode = int(meta["best_episode"])
        self.best_latent = (
            arrays["best_latent"] if arrays["best_latent"].size else None
        )
        self.rows = [
            (
                int(ri[0]), int(ri[1]), int(ri[2]),
                float(rf[0]), float(rf[1]), float(rf[2]), float(rf[3]), float(rf[4]),
                float(rf[5]), int(ri[3]),
            )
            for ri, rf in zip(arrays["rows_int"], arrays["rows_float"])
        ]
        self.query_start = {k: int(v) for k, v in meta["query_start"].items()}
        return meta["ledger"]


def _exploit_actions(agent, states):
    from .nets import mlp_forward

    if agent.algorithm == "sac":
        out = mlp_forward(agent.policy, states)[-1]
        a = np.tanh(out[:, : agent.latent_dim]) * agent.action_scale
        return np.clip(a, -agent._bound, agent._bound)
    return agent.policy_action(states)


# ---------------------------------------------------------------------------
# Metrics assembly


def _class_metrics(config, world, eval_oracle, trainer, recon_latent):
    """One metrics row for a class: eval accuracy of the reconstruction plus
    feature distances and D&C from exploit-mode samples."""
    y = trainer.y if trainer is not None else None
    row = {
        "class": y,
        "attack_acc": None,
        "knn": None,
        "feat": None,
        "density": None,
        "coverage": None,
    }
    if eval_oracle is not None and recon_latent is not None:
        conf = eval_oracle.query(np.asarray(recon_latent), "evaluation")
        row["attack_acc"] = 1.0 if int(np.argmax(conf)) == y else 0.0
    if world is not None and recon_latent is not None:
        fset = world.class_feature_set(y)
        recon_features = world.features_of(recon_latent)
        row["knn"] = knn_dist(recon_features, fset)
        row["feat"] = feat_dist(recon_features, fset)
        if trainer is not None and config.exploit_samples > 0:
            fakes = trainer.exploit_latents(config.exploit_samples)
            density, coverage = density_coverage(
                fset.features, world.features_of(fakes), config.neighbor_k
            )
            row["density"] = density
            row["coverage"] = coverage
    return row


def _aggregate_metrics(per_class, ledger_total):
    def mean_of(key):
        vals = [r[key] for r in per_class if r[key] is not None]
        return float(np.mean(vals)) if vals else None

    return MetricsReport(
        attack_accuracy=mean_of("attack_acc"),
        knn_dist=mean_of("knn"),
        feat_dist=mean_of("feat"),
        density=mean_of("density"),
        coverage=mean_of("coverage"),
        queries_used=ledger_total,
    )


# ---------------------------------------------------------------------------
# Top-level runs


def _target_classes(config):
    if config.target_classes is not None:
        return list(config.target_classes)
    return list(range(config.env.num_classes))


def run_attack(config, resume=False):
    """Train one agent per target class and evaluate the best reconstructions.

    On an oracle failure mid-run, writes checkpoints and returns a summary
    flagged partial instead of raising.
    """
    start = time.perf_counter()
    ledger = QueryLedger()
    world, oracle, eval_oracle = build_oracles(config, ledger)
    classes = _target_classes(config)
    trainers = []
    failure = None
    try:
        for y in classes:
            trainer = ClassTrainer(config, y, oracle)
            if resume and config.output_dir and trainer.checkpoint_path().exists():
                saved_ledger = trainer.load_checkpoint()
                # the newest checkpoint carries the authoritative ledger state
                for purpose, count in saved_ledger.items():
                    behind = count - ledger.count(purpose)
                    if behind > 0:
                        ledger.add(purpose, behind)
            trainers.append(trainer)
            trainer.run_until(config.max_episodes)
            trainer.mark_training_finished()
            if config.output_dir and config.max_episodes > 0:
                trainer.save_checkpoint()
    except OracleError as exc:
        failure = str(exc)
        if config.output_dir and trainers:
            trainers[-1].save_checkpoint()

    per_class = []
    class_results = []
    for trainer in trainers:
        recon = trainer.best_latent
        row = _class_metrics(config, world, eval_oracle, trainer, recon)
        row["queries"] = sum(trainer.query_delta().values())
        per_class.append(row)
        class_results.append(
            ClassResult(
                target_class=trainer.y,
                best_latent=list(map(float, recon)) if recon is not None else None,
                best_confidence=float(trainer.best_confidence)
                if recon is not None
                else None,
                best_episode=trainer.best_episode,
                episodes_run=trainer.episodes_done,
                queries=trainer.query_delta(),
            )
        )

    rows = [row for trainer in trainers for row in trainer.rows]
    summary = RunSummary(
        kind="attack",
        algorithm=config.algorithm,
        class_results=class_results,
        metrics=_aggregate_metrics(per_class, ledger.total_queries),
        per_class_metrics=per_class,
        episode_rows=rows,
        ledger=ledger.snapshot(),
        wall_clock=time.perf_counter() - start,
        config_echo=config.config_text,
        partial=failure is not None,
        failure=failure,
    )
    if config.output_dir:
        emit_reports(summary, config.output_dir)
    if hasattr(oracle, "close"):
        oracle.close()
    return summary


def random_search_baseline(config, query_budget, chunk=4096):
    """Prior sampling control: draw latents, query once each, keep per-class
    argmax-confidence latents, then run the same metrics pipeline."""
    if query_budget < 1:
        raise ConfigError(f"query_budget must be >= 1, got {query_budget}")
    start = time.perf_counter()
    ledger = QueryLedger()
    world, oracle, eval_oracle = build_oracles(config, ledger)
    classes = _target_classes(config)
    k = config.env.latent_dim
    rng = derived_rng(config.seeds.episodes, _STREAM_BASELINE)

    best_conf = {y: -np.inf for y in classes}
    best_latent = {y: None for y in classes}
    top_pool = {y: [] for y in classes}  # (conf, latent) candidates for D&C
    drawn = 0
    while drawn < query_budget:
        n = min(chunk, query_budget - drawn)
        latents = rng.standard_normal((n, k))
        confs = oracle.query_batch(latents, "training")
        drawn += n
        for y in classes:
            col = confs[:, y]
            i = int(np.argmax(col))
            if col[i] > best_conf[y]:
                best_conf[y] = float(col[i])
                best_latent[y] = latents[i].copy()
            if config.exploit_samples > 0 and world is not None:
                m = min(config.exploit_samples, n)
                part = np.argpartition(-col, m - 1)[:m]
                top_pool[y].append((col[part], latents[part]))

    per_class = []
    class_results = []
    for y in classes:
        trainer = None
        row = {
            "class": y,
            "attack_acc": None,
            "knn": None,
            "feat": None,
            "density": None,
            "coverage": None,
        }
        recon = best_latent[y]
        if eval_oracle is not None and recon is not None:
            conf = eval_oracle.query(recon, "evaluation")
            row["attack_acc"] = 1.0 if int(np.argmax(conf)) == y else 0.0
        if world is not None and recon is not None:
            fset = world.class_feature_set(y)
            feats = world.features_of(recon)
            row["knn"] = knn_dist(feats, fset)
            row["feat"] = feat_dist(feats, fset)
            if top_pool[y]:
                confs_all = np.concatenate([c for c, _ in top_pool[y]])
                lat_all = np.concatenate([l for _, l in top_pool[y]])
                m = min(config.exploit_samples, lat_all.shape[0])
                order = np.argsort(-confs_all)[:m]
                if m > config.neighbor_k:
                    density, coverage = density_coverage(
                        fset.features,
                        world.features_of(lat_all[order]),
                        config.neighbor_k,
                    )
                    row["density"] = density
                    row["coverage"] = coverage
        row["queries"] = query_budget
        per_class.append(row)
        class_results.append(
            ClassResult(
                target_class=y,
                best_latent=list(map(float, recon)) if recon is not None else None,
                best_confidence=float(best_conf[y]) if recon is not None else None,
                best_episode=-1,
                episodes_run=0,
                queries={"training": query_budget},
            )
        )

    summary = RunSummary(
        kind="baseline",
        algorithm="random-search",
        class_results=class_results,
        metrics=_aggregate_metrics(per_class, ledger.total_queries),
        per_class_metrics=per_class,
        episode_rows=[],
        ledger=ledger.snapshot(),
        wall_clock=time.perf_counter() - start,
        config_echo=config.config_text,
    )
    if config.output_dir:
        emit_reports(summary, config.output_dir)
    if hasattr(oracle, "close"):
        oracle.close()
    return summary


def attack_query_budget(config):
    """Queries an attack run spends on training + warm-up, per class."""
    return 2 * config.max_episodes * config.env.max_step + 2 * config.agent.warmup_steps


def sweep_alpha(config, alpha_list, samples_per_class=None):
    """Accuracy/diversity trade-off: one agent per diversity factor on a
    single target class, scored over exploit-mode sample clouds."""
    if samples_per_class is None:
        samples_per_class = config.exploit_samples
    for a in alpha_list:
        if not 0.0 <= a <= 1.0:
            raise ConfigError(f"diversity factor {a} outside [0, 1]")
    y = (
        config.target_classes[0]
        if config.target_classes
        else config.env.target_class
    )
    rows = []
    for alpha in alpha_list:
        cfg = dataclasses.replace(
            config,
            env=dataclasses.replace(config.env, diversity_factor=alpha, target_class=y),
            target_classes=(y,),
            output_dir=None,
            config_text=config.config_text,
        )
        ledger = QueryLedger()
        world, oracle, eval_oracle = build_oracles(cfg, ledger)
        trainer = ClassTrainer(cfg, y, oracle)
        trainer.run_until(cfg.max_episodes)
        latents = trainer.exploit_latents(samples_per_class)
        confs = eval_oracle.query_batch(latents, "evaluation")
        acc = float((np.argmax(confs, axis=1) == y).mean())
        fset = world.class_feature_set(y)
        density, coverage = density_coverage(
            fset.features, world.features_of(latents), cfg.neighbor_k
        )
        rows.append(
            {
                "alpha": float(alpha),
                "attack_acc": acc,
                "density": density,
                "coverage": coverage,
                "queries": ledger.total_queries,
            }
        )
        if hasattr(oracle, "close"):
            oracle.close()
    if config.output_dir:
        _write_csv(
            Path(config.output_dir) / "sweep_alpha.csv",
            ("alpha", "attack_acc", "density", "coverage", "queries"),
            [(r["alpha"], r["attack_acc"], r["density"], r["coverage"], r["queries"]) for r in rows],
        )
    return rows


def sweep_episodes(config, checkpoints):
    """Attack accuracy at increasing episode budgets, without restarting
    training between checkpoints."""
    if list(checkpoints) != sorted(checkpoints) or any(c < 0 for c in checkpoints):
        raise ConfigError(f"checkpoints must be ascending and nonnegative: {checkpoints}")
    ledger = QueryLedger()
    world, oracle, eval_oracle = build_oracles(config, ledger)
    classes = _target_classes(config)
    trainers = [ClassTrainer(config, y, oracle) for y in classes]
    rows = []
    for c in checkpoints:
        for trainer in trainers:
            trainer.run_until(c)
        recons = [(trainer.reconstruction(), trainer.y) for trainer in trainers]
        acc = attack_accuracy(recons, eval_oracle) if eval_oracle else None
        rows.append(
            {
                "episodes": int(c),
                "attack_acc": acc,
                "queries": ledger.total_queries,
            }
        )
    if config.output_dir:
        _write_csv(
            Path(config.output_dir) / "sweep_episodes.csv",
            ("episodes", "attack_acc", "queries"),
            [(r["episodes"], r["attack_acc"], r["queries"]) for r in rows],
        )
    if hasattr(oracle, "close"):
        oracle.close()
    return rows


# ---------------------------------------------------------------------------
# Report files


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def emit_reports(summary, directory):
    """Write the stable file set: config echo, episode log, metrics table,
    machine-readable summary."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config_echo.json").write_text(summary.config_echo)
    _write_csv(directory / "episodes.csv", EPISODE_COLUMNS, summary.episode_rows)
    _write_csv(
        directory / "metrics.csv",
        METRIC_COLUMNS,
        [
            (
                r["class"],
                r["attack_acc"],
                r["knn"],
                r["feat"],
                r["density"],
                r["coverage"],
                r["queries"],
            )
            for r in summary.per_class_metrics
        ],
    )
    payload = summary.to_dict(include_rows=False)
    (directory / "summary.json").write_text(json.dumps(payload, indent=2))
    return [
        directory / "config_echo.json",
        directory / "episodes.csv",
        directory / "metrics.csv",
        directory / "summary.json",
    ]


def load_summary(directory):
    directory = Path(directory)
    payload = json.loads((directory / "summary.json").read_text())
    summary = RunSummary.from_dict(payload)
    rows = []
    lines = (directory / "episodes.csv").read_text().splitlines()
    for line in lines[1:]:
        parts = line.split(",")
        rows.append(
            (
                int(parts[0]),
                int(parts[1]),
                int(parts[2]),
                float(parts[3]),
                float(parts[4]),
                float(parts[5]),
                float(parts[6]),
                float(parts[7]),
                float(parts[8]),
                int(parts[9]),
            )
        )
    summary.episode_rows = rows
    return summary
