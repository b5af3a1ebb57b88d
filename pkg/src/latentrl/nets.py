"""Dense feed-forward networks with hand-rolled reverse-mode gradients.

Parameters live in one flat float64 buffer per network; per-layer weight and
bias arrays are views into it, so the optimizer and soft updates can run as
single fused passes. Hidden layers use relu or tanh, the output layer is
always linear.
"""

from dataclasses import dataclass, field

import numpy as np

from .backend import DTYPE, ops
from .errors import InputError

ACT_CODES = {"relu": 1, "tanh": 2}

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0

# largest representable value strictly below 1 in the working precision;
# tanh saturates to exactly 1.0 beyond |u| ~ 19 (f64) / ~9 (f32)
TANH_BOUND = float(np.nextafter(DTYPE(1.0), DTYPE(0.0)))


@dataclass
class MlpNetwork:
    layer_sizes: tuple
    hidden_activation: str
    theta: np.ndarray
    # (in, out) weight views and (out,) bias views into theta, one per layer
    ws: list = field(repr=False, default_factory=list)
    bs: list = field(repr=False, default_factory=list)

    @property
    def param_count(self):
        return self.theta.size

    def weight(self, i):
        """Weight matrix of layer i in (out, in) orientation."""
        return self.ws[i].T

    def bias(self, i):
        return self.bs[i]

    def copy(self):
        net = MlpNetwork(self.layer_sizes, self.hidden_activation, self.theta.copy())
        _attach_views(net)
        return net


def _attach_views(net):
    sizes = net.layer_sizes
    net.ws = []
    net.bs = []
    off = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        net.ws.append(net.theta[off : off + fan_in * fan_out].reshape(fan_in, fan_out))
        off += fan_in * fan_out
        net.bs.append(net.theta[off : off + fan_out])
        off += fan_out


def param_count(layer_sizes):
    return sum(
        i * o + o for i, o in zip(layer_sizes[:-1], layer_sizes[1:])
    )


def make_mlp(layer_sizes, hidden_activation, rng):
    """Build a network with fan-in-scaled uniform weights and zero biases."""
    if len(layer_sizes) < 2:
        raise InputError(f"need at least input and output sizes, got {layer_sizes}")
    if any(s < 1 for s in layer_sizes):
        raise InputError(f"layer sizes must be positive, got {layer_sizes}")
    if hidden_activation not in ACT_CODES:
        raise InputError(f"unknown hidden activation {hidden_activation!r}")
    sizes = tuple(int(s) for s in layer_sizes)
    net = MlpNetwork(sizes, hidden_activation, np.zeros(param_count(sizes), dtype=DTYPE))
    _attach_views(net)
    for w in net.ws:
        bound = 1.0 / np.sqrt(w.shape[0])
        w[...] = rng.uniform(-bound, bound, size=w.shape)
    return net


def mlp_forward(net, batch):
    """Run the network on a (n, in) batch; returns all activations.

    The returned list holds [input, hidden_1, ..., output]; every entry is
    retained for mlp_backward.
    """
    batch = np.ascontiguousarray(batch, dtype=DTYPE)
    if batch.ndim != 2 or batch.shape[1] != net.layer_sizes[0]:
        raise InputError(
            f"batch shape {batch.shape} does not feed an input layer of "
            f"size {net.layer_sizes[0]}"
        )
    if not np.isfinite(batch).all():
        raise InputError("batch contains non-finite entries")
    act = ACT_CODES[net.hidden_activation]
    acts = [batch]
    last = len(net.ws) - 1
    h = batch
    for i, (w, b) in enumerate(zip(net.ws, net.bs)):
        h = ops.affine(h, w, b, act if i < last else 0)
        acts.append(h)
    return acts


def _check_activations(net, acts):
    if len(acts) != len(net.ws) + 1:
        raise InputError(
            f"activation record of length {len(acts)} does not match a "
            f"{len(net.ws)}-layer network"
        )
    for i, a in enumerate(acts):
        if a.shape[1] != net.layer_sizes[i]:
            raise InputError(
                f"activation {i} has width {a.shape[1]}, expected "
                f"{net.layer_sizes[i]}"
            )


def mlp_backward(net, acts, output_grad):
    """Backpropagate output_grad through recorded activations.

    Returns (flat_grads, input_grad) where flat_grads matches net.theta's
    layout and input_grad matches the batch shape.
    """
    _check_activations(net, acts)
    if output_grad.shape != acts[-1].shape:
        raise InputError(
            f"output_grad shape {output_grad.shape} != output shape {acts[-1].shape}"
        )
    act = ACT_CODES[net.hidden_activation]
    grads = np.empty_like(net.theta)
    gnet = MlpNetwork(net.layer_sizes, net.hidden_activation, grads)
    _attach_views(gnet)
    dz = np.ascontiguousarray(output_grad, dtype=DTYPE)
    for i in range(len(net.ws) - 1, -1, -1):
        dw, db, dx = ops.affine_backward(dz, acts[i], net.ws[i])
        gnet.ws[i][...] = dw
        gnet.bs[i][...] = db
        if i > 0:
            dz = ops.act_backward(dx, acts[i], act)
        else:
            dz = dx
    return grads, dz


def mlp_input_grad(net, acts, output_grad):
    """Gradient of the output w.r.t. the input batch only (no param grads)."""
    _check_activations(net, acts)
    act = ACT_CODES[net.hidden_activation]
    dz = np.ascontiguousarray(output_grad, dtype=DTYPE)
    for i in range(len(net.ws) - 1, -1, -1):
        dx = ops.affine_input_grad(dz, net.ws[i])
        if i > 0:
            dz = ops.act_backward(dx, acts[i], act)
        else:
            dz = dx
    return dz


def squashed_gaussian_sample(mean, log_std, noise):
    """Sample a tanh-squashed Gaussian action with its log-density.

    log_std is clamped to [LOG_STD_MIN, LOG_STD_MAX] before use; actions are
    strictly inside (-1, 1) componentwise. Accepts (n, k) batches or single
    (k,) vectors.
    """
    single = np.asarray(mean).ndim == 1
    mean = np.atleast_2d(np.asarray(mean, dtype=DTYPE))
    log_std = np.atleast_2d(np.asarray(log_std, dtype=DTYPE))
    noise = np.atleast_2d(np.asarray(noise, dtype=DTYPE))
    log_std = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    action, log_prob = ops.tanh_gauss_sample(
        np.ascontiguousarray(mean),
        np.ascontiguousarray(log_std),
        np.ascontiguousarray(noise),
        DTYPE(TANH_BOUND),
    )
    if single:
        return action[0], float(log_prob[0])
    return action, log_prob
