"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with the measured values.

The synthetic-experiment criteria run the default desk-scale world
(k=16, d=32, K=10, separation 4.0) with the published agent settings
(discount 0.99, soft update 0.01, learning rate 5e-4, batch 256,
max_step 1, diversity factor 0, reward weights (2, 2, 8), clamp 1e-7).
Network width and action scale are configurable knobs, set here to
(64, 64) and 1.75 for single-core runtime and reachability.
"""

import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from latentrl.agents import (
    AgentHyperparams,
    ddpg_update,
    make_agent,
    sac_update,
    select_action,
    td3_update,
)
from latentrl.env import EnvConfig, env_step, reward_terms, total_reward, transition
from latentrl.errors import OracleHandshakeError
from latentrl.harness import (
    ExperimentConfig,
    OracleSpec,
    Seeds,
    attack_query_budget,
    random_search_baseline,
    run_attack,
    sweep_alpha,
)
from latentrl.metrics import density_coverage, feat_dist, knn_dist, FeatureSet
from latentrl.nets import make_mlp, mlp_backward, mlp_forward
from latentrl.oracles import (
    ExternalOracle,
    QueryLedger,
    SyntheticOracle,
    make_world,
    save_world,
)
from latentrl.replay import ReplayBuffer, TransitionRecord

SEEDS = (101, 202, 303)
ADAPTER_SRC = Path(__file__).resolve().parents[1] / "adapter" / "src"


def report(name, passed, detail):
    print(f"\n[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    assert passed, f"{name}: {detail}"


def attack_config(seed, algorithm="sac", episodes=4000, target_classes=None,
                  exploit_samples=0, alpha=0.0):
    return ExperimentConfig(
        env=EnvConfig(
            latent_dim=16,
            num_classes=10,
            target_class=0,
            diversity_factor=alpha,
            reward_weights=(2.0, 2.0, 8.0),
            clamp_eps=1e-7,
            max_step=1,
            action_scale=1.75,
        ),
        agent=AgentHyperparams(
            discount=0.99,
            soft_update=0.01,
            learning_rate=5e-4,
            batch_size=256,
            replay_capacity=1_000_000,
            hidden_sizes=(64, 64),
            warmup_steps=256,
        ),
        algorithm=algorithm,
        oracle=OracleSpec(),
        max_episodes=episodes,
        seeds=Seeds(7, seed, seed + 1000),
        target_classes=target_classes,
        exploit_samples=exploit_samples,
    )


def test_gradient_correctness():
    """Analytic MLP gradients vs central finite differences, 4-8-4 net,
    100 random coordinates, 1e-4 relative tolerance, < 5 s."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    net = make_mlp((4, 8, 4), "relu", rng)
    x = rng.normal(size=(6, 4))
    dout = rng.normal(size=(6, 4))
    acts = mlp_forward(net, x)
    grads, _ = mlp_backward(net, acts, dout)
    worst = 0.0
    h = 1e-5
    for idx in rng.choice(net.param_count, size=100, replace=True):
        saved = net.theta[idx]
        net.theta[idx] = saved + h
        hi = float((mlp_forward(net, x)[-1] * dout).sum())
        net.theta[idx] = saved - h
        lo = float((mlp_forward(net, x)[-1] * dout).sum())
        net.theta[idx] = saved
        fd = (hi - lo) / (2 * h)
        rel = abs(grads[idx] - fd) / max(abs(fd), abs(grads[idx]), 1e-8)
        worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    report(
        "gradient-correctness",
        worst < 1e-4 and elapsed < 5.0,
        f"max relative error {worst:.2e} (tol 1e-4), {elapsed:.2f}s (< 5s)",
    )


def test_mdp_law_suite():
    """Transition endpoint identities, clamp behavior at 1e-7, reward
    linearity in the weights, and the two-queries-per-step count, all exact."""
    rng = np.random.default_rng(11)
    s, a = rng.normal(size=16), rng.normal(size=16)
    ok_endpoints = np.array_equal(transition(s, a, 0.0), a) and np.array_equal(
        transition(s, a, 1.0), s
    )

    conf = np.array([0.1, 0.5, 0.4])
    uniform = np.full(3, 1.0 / 3.0)
    _, _, r3 = reward_terms(conf, uniform, 0, 1e-7)
    ok_clamp = r3 == pytest.approx(np.log(1e-7), abs=1e-12)

    r = (-0.694, -0.917, -1.61)
    ok_linear = True
    for w in (np.zeros(3), np.eye(3)[0], np.eye(3)[2], np.array([2.0, 2.0, 8.0])):
        expected = w[0] * r[0] + w[1] * r[1] + w[2] * r[2]
        ok_linear &= total_reward(*r, tuple(w)) == expected
    w1, w2 = np.array([1.0, 2.0, 3.0]), np.array([0.5, 0.5, 0.5])
    ok_linear &= total_reward(*r, tuple(w1 + w2)) == pytest.approx(
        total_reward(*r, tuple(w1)) + total_reward(*r, tuple(w2)), abs=1e-12
    )

    world = make_world(7)
    ledger = QueryLedger()
    oracle = SyntheticOracle(world, ledger=ledger)
    env = EnvConfig(latent_dim=16, num_classes=10, target_class=3)
    for i in range(1, 6):
        out = env_step(rng.normal(size=16), rng.normal(size=16), oracle, env, 1)
        ok_endpoints &= out.queries_spent == 2 and ledger.total_queries == 2 * i
        ok_endpoints &= out.done is True  # max_step = 1

    report(
        "mdp-law-suite",
        ok_endpoints and ok_clamp and ok_linear,
        f"endpoints+queries={ok_endpoints} clamp={ok_clamp} linearity={ok_linear}",
    )


def test_bandit_fixed_points():
    """Each algorithm's critic reaches the analytic bandit value within
    1e-2 in <= 2e3 updates; < 60 s total."""
    t0 = time.perf_counter()
    c = 1.0
    errors = {}
    for algo in ("sac", "td3", "ddpg"):
        hp = AgentHyperparams(
            learning_rate=3e-3, hidden_sizes=(32, 32), batch_size=64,
            replay_capacity=4096,
        )
        agent = make_agent(algo, 1, hp, np.random.default_rng(5))
        buf = ReplayBuffer(4096, 1)
        rng = np.random.default_rng(6)
        s = np.zeros(1)
        for _ in range(512):
            buf.push(TransitionRecord(s, rng.uniform(-1, 1, 1), c, s, True))
        for i in range(2000):
            batch = buf.sample(64, agent.rng)
            if algo == "sac":
                sac_update(agent, batch)
            elif algo == "td3":
                td3_update(agent, batch, i)
            else:
                ddpg_update(agent, batch)
        q = agent.critic_value(s, select_action(agent, s, "exploit"))
        errors[algo] = abs(q - c)
    elapsed = time.perf_counter() - t0
    report(
        "bandit-fixed-points",
        max(errors.values()) < 1e-2 and elapsed < 60.0,
        f"|Q - c|: " + ", ".join(f"{k}={v:.2e}" for k, v in errors.items())
        + f" (tol 1e-2), {elapsed:.1f}s (< 60s)",
    )


def test_end_to_end_synthetic_attack():
    """Default world, published SAC settings, 4000 episodes per class:
    (a) attack accuracy >= 0.8 vs the perturbed evaluation oracle and
    (b) strictly higher mean best-confidence than random search at the
    same total query budget, over 3 seeds; < 15 min."""
    t0 = time.perf_counter()
    accs, sac_confs, rnd_confs = [], [], []
    for seed in SEEDS:
        cfg = attack_config(seed)
        summary = run_attack(cfg)
        accs.append(summary.metrics.attack_accuracy)
        sac_confs.extend(r.best_confidence for r in summary.class_results)
        budget = attack_query_budget(cfg) * 10
        spent = summary.ledger["training"] + summary.ledger["warmup"]
        assert spent == budget, f"budget accounting broke: {spent} != {budget}"
        baseline = random_search_baseline(cfg, budget)
        rnd_confs.extend(r.best_confidence for r in baseline.class_results)
    accuracy = float(np.mean(accs))
    sac_mean = float(np.mean(sac_confs))
    rnd_mean = float(np.mean(rnd_confs))
    elapsed = time.perf_counter() - t0
    report(
        "end-to-end-synthetic-attack",
        accuracy >= 0.8 and sac_mean > rnd_mean and elapsed < 900.0,
        f"accuracy={accuracy:.3f} (>= 0.8), best-confidence mean "
        f"{sac_mean:.9f} vs random {rnd_mean:.9f} (diff {sac_mean - rnd_mean:+.2e}), "
        f"{elapsed:.0f}s (< 900s)",
    )


def test_agent_ranking_trend():
    """3-seed median attack accuracy ordered SAC >= TD3 >= DDPG with 0.1
    slack on each comparison."""
    medians = {}
    for algo in ("sac", "td3", "ddpg"):
        accs = [
            run_attack(attack_config(seed, algorithm=algo, episodes=600)).metrics.attack_accuracy
            for seed in SEEDS
        ]
        medians[algo] = float(np.median(accs))
    ok = (
        medians["sac"] >= medians["td3"] - 0.1
        and medians["td3"] >= medians["ddpg"] - 0.1
    )
    report(
        "agent-ranking-trend",
        ok,
        f"medians sac={medians['sac']:.2f} td3={medians['td3']:.2f} "
        f"ddpg={medians['ddpg']:.2f} (slack 0.1)",
    )


def test_diversity_tradeoff():
    """3-seed medians: coverage rises and accuracy falls from diversity
    factor 0.0 to 0.9; density varies by < 50% across the two settings."""
    cov0, cov9, acc0, acc9, dens = [], [], [], [], []
    for seed in SEEDS:
        cfg = attack_config(seed, episodes=2000, target_classes=(0,), exploit_samples=1000)
        rows = sweep_alpha(cfg, [0.0, 0.9], samples_per_class=1000)
        a0, a9 = rows
        cov0.append(a0["coverage"])
        cov9.append(a9["coverage"])
        acc0.append(a0["attack_acc"])
        acc9.append(a9["attack_acc"])
        dens.append((a0["density"], a9["density"]))
    cov0m, cov9m = float(np.median(cov0)), float(np.median(cov9))
    acc0m, acc9m = float(np.median(acc0)), float(np.median(acc9))
    d0m = float(np.median([d[0] for d in dens]))
    d9m = float(np.median([d[1] for d in dens]))
    dens_var = abs(d9m - d0m) / max(d0m, d9m)
    ok = cov9m > cov0m and acc0m > acc9m and dens_var < 0.5
    report(
        "diversity-tradeoff",
        ok,
        f"coverage {cov0m:.2f}->{cov9m:.2f} (up), accuracy {acc0m:.2f}->{acc9m:.2f} "
        f"(down), density {d0m:.2f} vs {d9m:.2f} (variation {dens_var:.0%} < 50%)",
    )


def test_metric_oracles():
    """knn/feat/density/coverage match exhaustive brute-force loops on
    20-50-point instances to 1e-9."""
    from test_metrics import brute_density_coverage, brute_feat, brute_knn

    rng = np.random.default_rng(77)
    worst = 0.0
    for n_recon, n_real, k in ((20, 20, 5), (50, 35, 5), (30, 50, 4)):
        recons = rng.normal(size=(n_recon, 6))
        reals = rng.normal(size=(n_real, 6)) * 1.2 + 0.1
        fset = FeatureSet(0, reals)
        worst = max(worst, abs(knn_dist(recons, fset) - brute_knn(recons.tolist(), reals.tolist())))
        worst = max(worst, abs(feat_dist(recons, fset) - brute_feat(recons.tolist(), reals.tolist())))
        got = density_coverage(reals, recons, neighbor_k=k)
        want = brute_density_coverage(reals.tolist(), recons.tolist(), k)
        worst = max(worst, abs(got[0] - want[0]), abs(got[1] - want[1]))
    report("metric-oracles", worst < 1e-9, f"max |fast - brute-force| = {worst:.2e} (tol 1e-9)")


def test_run_determinism():
    """Identical config and seeds give identical episode logs and
    summaries, timestamps aside."""
    cfg_a = attack_config(SEEDS[0], episodes=50, target_classes=(0, 4))
    cfg_b = attack_config(SEEDS[0], episodes=50, target_classes=(0, 4))
    s1, s2 = run_attack(cfg_a), run_attack(cfg_b)
    d1, d2 = s1.to_dict(), s2.to_dict()
    d1.pop("wall_clock")
    d2.pop("wall_clock")
    ok = d1 == d2 and s1.episode_rows == s2.episode_rows
    report(
        "run-determinism",
        ok,
        f"summaries identical={d1 == d2}, episode logs identical="
        f"{s1.episode_rows == s2.episode_rows}",
    )


# --- secondary component ------------------------------------------------------


def adapter_env():
    env = dict(os.environ)
    env["PYTHONPATH"] = str(ADAPTER_SRC) + os.pathsep + env.get("PYTHONPATH", "")
    return env


def adapter_command(config_path):
    return [sys.executable, "-m", "oracle_adapter", str(config_path)]


def test_adapter_protocol_conformance(tmp_path):
    """[SECONDARY] The adapter wrapping the re-implemented synthetic world
    matches the in-process oracle within 1e-9 on 1e3 random latents;
    handshake-mismatch, malformed-line, and shutdown behaviors hold."""
    world = make_world(7)
    world_path = tmp_path / "world.json"
    save_world(world_path, world)
    adapter_cfg = tmp_path / "adapter.json"
    adapter_cfg.write_text(
        json.dumps(
            {"k": 16, "K": 10, "d": 32, "trusted_evaluation": False,
             "model": f"world:{world_path}"}
        )
    )
    command = adapter_command(adapter_cfg)

    inproc = SyntheticOracle(world)
    rng = np.random.default_rng(99)
    worst = 0.0
    with ExternalOracle(command, 16, 10, env=adapter_env()) as oracle:
        for _ in range(1000):
            z = rng.normal(size=16)
            a = oracle.query(z)
            b = inproc.query(z)
            worst = max(worst, float(np.abs(a - b).max()))
    match_ok = worst < 1e-9

    # handshake mismatch: client expecting different dimensions must refuse
    try:
        ExternalOracle(command, 8, 10, env=adapter_env()).close()
        handshake_ok = False
    except OracleHandshakeError:
        handshake_ok = True

    # malformed request line keeps the connection alive and reports an error
    proc = subprocess.Popen(
        command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True,
        bufsize=1, env=adapter_env(),
    )
    proc.stdout.readline()  # greeting
    proc.stdin.write("this is not json\n")
    proc.stdin.flush()
    err_line = json.loads(proc.stdout.readline())
    malformed_ok = "error" in err_line
    proc.stdin.write(json.dumps({"id": 0, "latent": [0.0] * 16}) + "\n")
    proc.stdin.flush()
    still_alive = json.loads(proc.stdout.readline())
    malformed_ok &= still_alive.get("id") == 0 and "confidence" in still_alive
    proc.stdin.write(json.dumps({"id": -1}) + "\n")
    proc.stdin.flush()
    shutdown_ok = proc.wait(timeout=10) == 0

    report(
        "adapter-protocol-conformance",
        match_ok and handshake_ok and malformed_ok and shutdown_ok,
        f"max deviation {worst:.2e} over 1000 latents (tol 1e-9), "
        f"handshake-mismatch={handshake_ok}, malformed-line={malformed_ok}, "
        f"shutdown-exit-0={shutdown_ok}",
    )
