"""Benchmark the numba kernels against the pure-numpy fallback.

Times each hot kernel on training-shaped inputs, plus a composite
actor-critic update via both backends end to end.

Run:

    python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from latentrl import kernels_numpy


def time_fn(fn, *args, repeats=2000):
    fn(*args)  # warm-up (JIT compile on the numba side)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats * 1e6  # us


def bench_backend(mod, repeats):
    rng = np.random.default_rng(0)
    batch, k, hidden = 256, 16, 64
    x = rng.normal(size=(batch, 2 * k))
    w1 = rng.normal(size=(2 * k, hidden))
    b1 = rng.normal(size=hidden)
    h = np.maximum(rng.normal(size=(batch, hidden)), 0)
    dz = rng.normal(size=(batch, hidden))
    theta = rng.normal(size=20_000)
    grad = rng.normal(size=20_000)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    tgt = rng.normal(size=20_000)
    mean = rng.normal(size=(batch, k))
    log_std = rng.uniform(-3, 0, size=(batch, k))
    noise = rng.normal(size=(batch, k))
    z = rng.normal(size=(batch, k))
    wg_t = rng.normal(size=(k, 32))
    feats = np.tanh(z @ wg_t)
    centroids = rng.normal(size=(10, 32))
    bound = float(np.nextafter(1.0, 0.0))

    return {
        "affine+relu": time_fn(mod.affine, x, w1, b1, 1, repeats=repeats),
        "act_backward": time_fn(mod.act_backward, dz.copy(), h, 1, repeats=repeats),
        "affine_backward": time_fn(mod.affine_backward, dz, x, w1, repeats=repeats),
        "adam (20k params)": time_fn(
            mod.adam_flat, theta, grad, m, v, 3, 1e-3, 0.9, 0.999, 1e-8, repeats=repeats
        ),
        "soft_update (20k)": time_fn(mod.soft_update_flat, tgt, theta, 0.01, repeats=repeats),
        "tanh_gauss_sample": time_fn(
            mod.tanh_gauss_sample, mean, log_std, noise, bound, repeats=repeats
        ),
        "generate_features": time_fn(mod.generate_features, z, wg_t, bound, repeats=repeats),
        "classify_features": time_fn(mod.classify_features, feats, centroids, 1.5, repeats=repeats),
    }


def bench_update(backend, updates=300):
    """Composite: actor-critic updates in a subprocess pinned to one backend."""
    code = f"""
import time, numpy as np
from latentrl.agents import make_agent, AgentHyperparams, sac_update
from latentrl.replay import TransitionBatch
rng = np.random.default_rng(0)
agent = make_agent("sac", 16, AgentHyperparams(hidden_sizes=(64, 64)), np.random.default_rng(1))
batch = TransitionBatch(
    states=rng.standard_normal((256, 16)),
    actions=rng.uniform(-1, 1, (256, 16)),
    rewards=rng.standard_normal(256),
    next_states=rng.standard_normal((256, 16)),
    dones=np.ones(256, dtype=bool),
)
sac_update(agent, batch)
t0 = time.perf_counter()
for _ in range({updates}):
    sac_update(agent, batch)
print((time.perf_counter() - t0) / {updates} * 1e3)
"""
    env = dict(os.environ, LATENTRL_BACKEND=backend)
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, env=env
    )
    if out.returncode != 0:
        raise RuntimeError(out.stderr)
    return float(out.stdout.strip())


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args()

    rows = {"numpy": bench_backend(kernels_numpy, args.repeats)}
    try:
        from latentrl import kernels_numba

        rows["numba"] = bench_backend(kernels_numba, args.repeats)
    except ImportError:
        print("numba unavailable; benchmarking the numpy backend only")

    names = list(rows["numpy"])
    width = max(len(n) for n in names)
    header = f"{'kernel':<{width}}  " + "  ".join(f"{b:>12}" for b in rows)
    print(header)
    print("-" * len(header))
    for name in names:
        cells = "  ".join(f"{rows[b][name]:>10.1f}us" for b in rows)
        line = f"{name:<{width}}  {cells}"
        if len(rows) == 2:
            line += f"  ({rows['numpy'][name] / rows['numba'][name]:4.1f}x)"
        print(line)

    print()
    for backend in rows:
        ms = bench_update(backend)
        print(f"full actor-critic update ({backend:>5}): {ms:6.2f} ms")


if __name__ == "__main__":
    main()
