"""Pure-numpy implementations of the hot numeric kernels.

This is the fallback backend (select with LATENTRL_BACKEND=numpy) and the
reference the numba twin is tested against. Every function here has an
identically-named, identically-shaped counterpart in kernels_numba.

Activation codes: 0 = linear, 1 = relu, 2 = tanh.
"""

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))
LOG_2 = float(np.log(2.0))


def affine(x, w, b, act):
    """act(x @ w + b) for a batch x of shape (n, in); w is (in, out)."""
    z = x @ w
    z += b
    if act == 1:
        np.maximum(z, 0.0, out=z)
    elif act == 2:
        np.tanh(z, out=z)
    return z


def act_backward(dh, h, act):
    """In place: dh *= act'(z) expressed through the post-activation h."""
    if act == 1:
        dh *= h > 0.0
    elif act == 2:
        dh *= 1.0 - h * h
    return dh


def affine_backward(dz, x, w):
    """Gradients of z = x @ w + b: returns (dw, db, dx)."""
    dw = x.T @ dz
    db = dz.sum(axis=0)
    dx = dz @ w.T
    return dw, db, dx


def affine_input_grad(dz, w):
    return dz @ w.T


def adam_flat(theta, grad, m, v, step, lr, beta1, beta2, eps):
    """One bias-corrected Adam update, in place on theta/m/v. step is 1-based."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    theta -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def soft_update_flat(target, online, tau):
    """In place: target <- (1 - tau) * target + tau * online."""
    target *= 1.0 - tau
    target += tau * online


def tanh_gauss_sample(mean, log_std, noise, bound):
    """Reparameterized tanh-squashed Gaussian draw.

    Returns (action, log_prob) where action = tanh(mean + exp(log_std) * noise)
    and log_prob is the per-row density including the tanh change-of-variables
    term, computed with the softplus-stable form of log(1 - tanh(u)^2).
    bound is the largest value of the working dtype strictly below 1 (tanh
    saturates to exactly 1 at finite precision).
    """
    u = mean + np.exp(log_std) * noise
    action = np.clip(np.tanh(u), -bound, bound)
    # log N(u; mean, std) summed over components, in epsilon form
    gauss = -0.5 * noise * noise - log_std - 0.5 * LOG_2PI
    # log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u))
    correction = 2.0 * (LOG_2 - u - np.logaddexp(0.0, -2.0 * u))
    log_prob = (gauss - correction).sum(axis=-1)
    return action, log_prob


def generate_features(z, wg_t, bound):
    """Generator map tanh(W_g z) for a batch of latents; wg_t is W_g^T (k, d)."""
    return np.clip(np.tanh(z @ wg_t), -bound, bound)


def classify_features(x, centroids, temperature):
    """Softmax over -||x - centroid_i||^2 / temperature, row-wise.

    x is (n, d), centroids (K, d); returns (n, K) rows summing to 1.
    """
    sq = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    logits = -sq / temperature
    logits -= logits.max(axis=1, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=1, keepdims=True)
    return logits
