"""Self-describing agent checkpoints.

A checkpoint is an .npz holding every parameter/optimizer array plus a JSON
metadata blob (shapes, hyperparams, RNG state, counters). Loading rebuilds
an agent whose subsequent behavior is bit-identical to the saved one; the
caller can attach extra arrays and metadata (e.g. replay contents).
"""

import json

import numpy as np

from ..errors import InputError
from .common import AgentHyperparams, make_agent

CHECKPOINT_VERSION = 1


def save_agent(path, agent, extra_meta=None, extra_arrays=None):
    arrays = {}
    for name, net in agent.networks():
        arrays[f"net__{name}"] = net.theta
    opt_steps = {}
    for name, opt in agent.optimizers():
        arrays[f"opt__{name}__m"] = opt.first_moment
        arrays[f"opt__{name}__v"] = opt.second_moment
        opt_steps[name] = opt.step_count
    arrays["log_alpha"] = getattr(agent, "log_alpha", np.zeros(0))
    meta = {
        "version": CHECKPOINT_VERSION,
        "algorithm": agent.algorithm,
        "latent_dim": agent.latent_dim,
        "action_scale": agent.action_scale,
        "hyperparams": agent.hyperparams.to_dict(),
        "update_count": agent.update_count,
        "opt_steps": opt_steps,
        "rng_state": agent.rng.bit_generator.state,
        "extra": extra_meta if extra_meta is not None else {},
    }
    if extra_arrays:
        for key, value in extra_arrays.items():
            arrays[f"extra__{key}"] = value
    np.savez(path, meta=np.array(json.dumps(meta)), **arrays)


def load_agent(path):
    """Returns (agent, extra_meta, extra_arrays)."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise InputError(
                f"checkpoint version {meta.get('version')} not supported"
            )
        hp = AgentHyperparams.from_dict(meta["hyperparams"])
        agent = make_agent(
            meta["algorithm"],
            meta["latent_dim"],
            hp,
            np.random.default_rng(0),
            meta["action_scale"],
        )
        for name, net in agent.networks():
            net.theta[...] = data[f"net__{name}"]
        for name, opt in agent.optimizers():
            opt.first_moment[...] = data[f"opt__{name}__m"]
            opt.second_moment[...] = data[f"opt__{name}__v"]
            opt.step_count = int(meta["opt_steps"][name])
        if hasattr(agent, "log_alpha") and data["log_alpha"].size:
            agent.log_alpha[...] = data["log_alpha"]
        agent.update_count = int(meta["update_count"])
        state = meta["rng_state"]
        agent.rng = np.random.Generator(getattr(np.random, state["bit_generator"])())
        agent.rng.bit_generator.state = state
        extra_arrays = {
            key[len("extra__") :]: data[key]
            for key in data.files
            if key.startswith("extra__")
        }
    return agent, meta["extra"], extra_arrays
