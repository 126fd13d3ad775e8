"""One-hidden-layer tanh network with two softmax cross-entropy heads.

Parameters are one flat vector ``x`` laid out as
``[W1 (h x d), b1 (h), V1 (k1 x h), c1 (k1), V2 (k2 x h), c2 (k2)]``; the
hidden layer is shared and each task has its own head.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import kernels
from ..problem_api import OracleError


@dataclass(frozen=True)
class MlpLayout:
    n_features: int
    hidden: int
    classes1: int
    classes2: int

    def __post_init__(self):
        if min(self.n_features, self.hidden, self.classes1, self.classes2) < 1:
            raise ValueError("layout sizes must be positive")

    @property
    def _sizes(self):
        d, h, k1, k2 = self.n_features, self.hidden, self.classes1, self.classes2
        return (h * d, h, k1 * h, k1, k2 * h, k2)

    @property
    def size(self) -> int:
        return sum(self._sizes)

    def unpack(self, x):
        """Views ``(W1, b1, V1, c1, V2, c2)`` into ``x``."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.size,):
            raise ValueError(f"weight vector has shape {x.shape}, expected ({self.size},)")
        d, h, k1, k2 = self.n_features, self.hidden, self.classes1, self.classes2
        offs = np.cumsum((0,) + self._sizes)
        W1 = x[offs[0]:offs[1]].reshape(h, d)
        b1 = x[offs[1]:offs[2]]
        V1 = x[offs[2]:offs[3]].reshape(k1, h)
        c1 = x[offs[3]:offs[4]]
        V2 = x[offs[4]:offs[5]].reshape(k2, h)
        c2 = x[offs[5]:offs[6]]
        return W1, b1, V1, c1, V2, c2

    def head_slices(self, task: int) -> tuple[slice, slice]:
        d, h, k1, k2 = self.n_features, self.hidden, self.classes1, self.classes2
        base = h * d + h
        if task == 1:
            return slice(base, base + k1 * h), slice(base + k1 * h, base + k1 * h + k1)
        if task == 2:
            start = base + k1 * h + k1
            return slice(start, start + k2 * h), slice(start + k2 * h, start + k2 * h + k2)
        raise ValueError("task must be 1 or 2")

    def init(self, seed: int) -> np.ndarray:
        """Uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` per layer."""
        rng = np.random.default_rng(seed)
        s_in = 1.0 / np.sqrt(self.n_features)
        s_hid = 1.0 / np.sqrt(self.hidden)
        scales = (s_in, s_in, s_hid, s_hid, s_hid, s_hid)
        return np.concatenate([rng.uniform(-s, s, size=n) for s, n in zip(scales, self._sizes)])


def mlp_loss_and_grads(weights, layout: MlpLayout, features, targets,
                       task: int) -> tuple[np.ndarray, Callable[[np.ndarray], np.ndarray]]:
    """Per-sample losses of one task and a weighted-gradient callback.

    ``targets`` holds one probability row per sample (one-hot for single-label
    data). The callback maps sample weights ``s`` to the gradient of
    ``sum_j s_j * loss_j`` with respect to the full weight vector.
    """
    W1, b1, V1, c1, V2, c2 = layout.unpack(weights)
    V, c = (V1, c1) if task == 1 else (V2, c2)
    X = np.ascontiguousarray(features, dtype=np.float64)
    T = np.ascontiguousarray(targets, dtype=np.float64)
    if X.shape[1] != layout.n_features or T.shape[1] != V.shape[0] or X.shape[0] != T.shape[0]:
        raise ValueError("batch does not match the network layout")
    kern = kernels.ACTIVE
    W1c = np.ascontiguousarray(W1)
    Vc = np.ascontiguousarray(V)
    losses, H, P = kern.mlp_forward(X, W1c, np.ascontiguousarray(b1), Vc, np.ascontiguousarray(c), T)
    if not (np.all(np.isfinite(losses)) and np.all(np.isfinite(H))):
        raise OracleError("network activations")
    vslice, cslice = layout.head_slices(task)
    h_end = layout.hidden * layout.n_features

    def grad(sample_weights) -> np.ndarray:
        s = np.ascontiguousarray(sample_weights, dtype=np.float64)
        if s.shape != (X.shape[0],):
            raise ValueError("one weight per sample required")
        dW1, db1, dV, dc = kern.mlp_backward(X, H, P, T, Vc, s)
        out = np.zeros(layout.size)
        out[:h_end] = dW1.reshape(-1)
        out[h_end:h_end + layout.hidden] = db1
        out[vslice] = dV.reshape(-1)
        out[cslice] = dc
        return out

    return losses, grad
