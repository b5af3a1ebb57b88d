"""Numba-compiled twins of the kernels in kernels_numpy.

Matrix products go through np.dot (BLAS); everything elementwise is fused
into single passes. Loaded only when the numba backend is active.
"""

import numpy as np
from numba import njit

LOG_2PI = float(np.log(2.0 * np.pi))
LOG_2 = float(np.log(2.0))


@njit(cache=True)
def affine(x, w, b, act):
    z = np.dot(x, w)
    n, m = z.shape
    if act == 1:
        for i in range(n):
            for j in range(m):
                v = z[i, j] + b[j]
                z[i, j] = v if v > 0.0 else 0.0
    elif act == 2:
        for i in range(n):
            for j in range(m):
                z[i, j] = np.tanh(z[i, j] + b[j])
    else:
        for i in range(n):
            for j in range(m):
                z[i, j] = z[i, j] + b[j]
    return z


@njit(cache=True)
def act_backward(dh, h, act):
    n, m = dh.shape
    if act == 1:
        for i in range(n):
            for j in range(m):
                if h[i, j] <= 0.0:
                    dh[i, j] = 0.0
    elif act == 2:
        for i in range(n):
            for j in range(m):
                dh[i, j] *= 1.0 - h[i, j] * h[i, j]
    return dh


@njit(cache=True)
def affine_backward(dz, x, w):
    dw = np.dot(x.T, dz)
    db = np.empty(dz.shape[1], dtype=dz.dtype)
    for j in range(dz.shape[1]):
        acc = 0.0
        for i in range(dz.shape[0]):
            acc += dz[i, j]
        db[j] = acc
    dx = np.dot(dz, w.T)
    return dw, db, dx


@njit(cache=True)
def affine_input_grad(dz, w):
    return np.dot(dz, w.T)


@njit(cache=True)
def adam_flat(theta, grad, m, v, step, lr, beta1, beta2, eps):
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    for i in range(theta.shape[0]):
        g = grad[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * g
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
        theta[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)


@njit(cache=True)
def soft_update_flat(target, online, tau):
    for i in range(target.shape[0]):
        target[i] = (1.0 - tau) * target[i] + tau * online[i]


@njit(cache=True)
def tanh_gauss_sample(mean, log_std, noise, bound):
    # one exp + one log1p per component: tanh and the change-of-variables
    # correction share exp(-2|u|)
    n, k = mean.shape
    action = np.empty((n, k), dtype=mean.dtype)
    log_prob = np.empty(n, dtype=mean.dtype)
    for i in range(n):
        acc = 0.0
        for j in range(k):
            ls = log_std[i, j]
            eps = noise[i, j]
            u = mean[i, j] + np.exp(ls) * eps
            a = abs(u)
            e = np.exp(-2.0 * a)
            t = (1.0 - e) / (1.0 + e)
            if u < 0.0:
                t = -t
            if t > bound:
                t = bound
            elif t < -bound:
                t = -bound
            action[i, j] = t
            # log(1 - tanh(u)^2) = 2 * (log 2 - |u| - log1p(exp(-2|u|)))
            corr = 2.0 * (LOG_2 - a - np.log1p(e))
            acc += (-0.5 * eps * eps - ls - 0.5 * LOG_2PI) - corr
        log_prob[i] = acc
    return action, log_prob


# numpy's SIMD tanh beats a compiled scalar loop for the generator map
# (measured in benchmarks/bench_kernels.py), so the numba backend reuses it
from .kernels_numpy import generate_features  # noqa: E402


@njit(cache=True)
def classify_features(x, centroids, temperature):
    n, d = x.shape
    kk = centroids.shape[0]
    out = np.empty((n, kk), dtype=x.dtype)
    for i in range(n):
        hi = -np.inf
        for c in range(kk):
            sq = 0.0
            for j in range(d):
                diff = x[i, j] - centroids[c, j]
                sq += diff * diff
            logit = -sq / temperature
            out[i, c] = logit
            if logit > hi:
                hi = logit
        total = 0.0
        for c in range(kk):
            e = np.exp(out[i, c] - hi)
            out[i, c] = e
            total += e
        for c in range(kk):
            out[i, c] /= total
    return out
