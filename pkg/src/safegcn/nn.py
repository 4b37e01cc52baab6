"""Dense numerical kernels: init, activations, dropout, loss, Adam.

Matrices are float64 numpy arrays throughout; every function here is pure
(inputs are never mutated) so kernels can run concurrently on disjoint data.
Random draws go through a numpy Generator; identical seeds give identical
streams, which the training loops rely on for reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator for a 64-bit seed."""
    return np.random.default_rng(seed)


def mix_seed(seed: int, salt: int) -> int:
    """Derive an independent 64-bit seed from (seed, salt), splitmix-style."""
    mask = (1 << 64) - 1
    z = (seed + (salt + 1) * 0x9E3779B97F4A7C15) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return z ^ (z >> 31)


def glorot_init(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform init on [-a, a] with a = sqrt(6 / (rows + cols))."""
    if rows < 1 or cols < 1:
        raise ValueError(f"invalid weight shape ({rows}, {cols})")
    a = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-a, a, size=(rows, cols))


def relu(m: np.ndarray) -> np.ndarray:
    return np.maximum(m, 0.0)


def relu_backward(m: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Pass the upstream gradient where the input was positive, else zero."""
    return np.where(m > 0.0, upstream, 0.0)


def softmax_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by subtracting each row's maximum."""
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy_masked(probs: np.ndarray, labels: np.ndarray, mask) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood over the masked rows.

    Returns (loss, grad) where grad is taken with respect to the pre-softmax
    logits (the usual fused softmax + cross-entropy form): masked rows hold
    (probs - onehot) / |mask|, all other rows are zero.

    The mask is canonicalized to sorted order so the summation order, and
    with it the result, does not depend on how callers list the nodes.
    """
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("cross entropy needs a non-empty node mask")
    mask = np.sort(mask)
    if np.any(np.diff(mask) == 0):
        raise ValueError("node mask contains duplicate indices")
    labels = np.asarray(labels)
    n, c = probs.shape
    picked = labels[mask]
    if picked.min() < 0 or picked.max() >= c:
        raise ValueError(f"masked label outside [0, {c})")
    with np.errstate(divide="ignore"):  # prob 0 -> loss inf, callers detect it
        loss = -np.log(probs[mask, picked]).sum() / mask.size
    grad = np.zeros_like(probs)
    grad[mask] = probs[mask]
    grad[mask, picked] -= 1.0
    grad[mask] /= mask.size
    return float(loss), grad


def dropout(m: np.ndarray, p: float, rng: np.random.Generator, training: bool) -> tuple[np.ndarray, np.ndarray]:
    """Inverted dropout: zero entries with probability p, scale the rest.

    Returns (output, mask) where mask already carries the 1/(1-p) scale so
    the backward pass is just upstream * mask. Evaluation mode (or p = 0)
    is the identity with an all-ones mask.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability {p} outside [0, 1)")
    if not training or p == 0.0:
        return m, np.ones_like(m)
    mask = (rng.random(m.shape) >= p) / (1.0 - p)
    return m * mask, mask


@dataclass(frozen=True)
class AdamState:
    """Adam moment accumulators for a list of parameter arrays."""

    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def init(params) -> "AdamState":
        return AdamState(
            m=tuple(np.zeros_like(p) for p in params),
            v=tuple(np.zeros_like(p) for p in params),
        )


def adam_step(params, grads, state: AdamState, lr: float):
    """One Adam update with bias correction; returns (new_params, new_state).

    Inputs are left untouched; the same (params, grads, state, lr) always
    produce the same output.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter, gradient, and state counts differ")
    t = state.t + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient: training diverged")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, replace(state, m=tuple(new_m), v=tuple(new_v), t=t)
