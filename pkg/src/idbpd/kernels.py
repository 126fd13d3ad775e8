"""Hot numeric kernels with a numba path and a pure-numpy path.

Each kernel has two implementations with the same signature. The active one is
chosen by :mod:`idbpd._accel`; both stay importable so the benchmark and the
equivalence tests can run them side by side.

Kernels never raise from compiled code. Failures come back as a status code
that the public wrappers turn into exceptions.
"""

from __future__ import annotations

import math
from types import SimpleNamespace

import numpy as np

from ._accel import USE_NUMBA, compile_kernel

DIRECTION_OK = 0
DIRECTION_UNDERFLOW = 1


# --------------------------------------------------------------------------
# simplex projection

def _project_simplex_numpy(v):
    n = v.shape[0]
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, n + 1, dtype=np.float64)
    keep = u - css / idx > 0.0
    rho = int(np.nonzero(keep)[0][-1])
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def _project_simplex_loop(v):
    # Michelot's pivot: drop entries below the running threshold until stable.
    # Same projection as the sort-based version without the O(n log n) sort.
    n = v.shape[0]
    active = np.ones(n, dtype=np.bool_)
    count = n
    total = 0.0
    for i in range(n):
        total += v[i]
    tau = (total - 1.0) / count
    changed = True
    while changed:
        changed = False
        for i in range(n):
            if active[i] and v[i] <= tau:
                active[i] = False
                count -= 1
                total -= v[i]
                changed = True
        if changed:
            tau = (total - 1.0) / count
    # fresh sum over the final support; the running total drifts by rounding
    total = 0.0
    for i in range(n):
        if active[i]:
            total += v[i]
    tau = (total - 1.0) / count
    out = np.empty(n)
    for i in range(n):
        out[i] = max(v[i] - tau, 0.0)
    return out


# --------------------------------------------------------------------------
# closed-form QP direction

def _scaled_norm_numpy(g):
    scale = np.max(np.abs(g)) if g.shape[0] else 0.0
    if scale == 0.0:
        return 0.0
    r = g / scale
    return float(scale * math.sqrt(float(r @ r)))


def _direction_numpy(gphi, gpsi, psi_val, alpha):
    rho = _scaled_norm_numpy(gpsi)
    zeta = max(psi_val, 0.0) * rho
    lam = 0.0
    status = DIRECTION_OK
    if zeta > 0.0:
        nrm2 = rho * rho
        if nrm2 == 0.0:
            status = DIRECTION_UNDERFLOW
        else:
            lam = max(-float(gpsi @ gphi) + alpha * rho, 0.0) / nrm2
    d = -gphi - lam * gpsi
    return d, lam, zeta, rho, status


def _direction_loop(gphi, gpsi, psi_val, alpha):
    n = gphi.shape[0]
    scale = 0.0
    for i in range(n):
        a = abs(gpsi[i])
        if a > scale:
            scale = a
    rho = 0.0
    if scale > 0.0:
        acc = 0.0
        for i in range(n):
            r = gpsi[i] / scale
            acc += r * r
        rho = scale * math.sqrt(acc)
    zeta = max(psi_val, 0.0) * rho
    lam = 0.0
    status = 0
    if zeta > 0.0:
        nrm2 = rho * rho
        if nrm2 == 0.0:
            status = 1
        else:
            dot = 0.0
            for i in range(n):
                dot += gpsi[i] * gphi[i]
            lam = max(-dot + alpha * rho, 0.0) / nrm2
    d = np.empty(n)
    for i in range(n):
        d[i] = -gphi[i] - lam * gpsi[i]
    return d, lam, zeta, rho, status


# --------------------------------------------------------------------------
# one-hidden-layer tanh MLP with a softmax cross-entropy head

def _mlp_forward_numpy(X, W1, b1, V, c, T):
    H = np.tanh(X @ W1.T + b1)
    Z = H @ V.T + c
    zmax = Z.max(axis=1, keepdims=True)
    E = np.exp(Z - zmax)
    S = E.sum(axis=1, keepdims=True)
    P = E / S
    lse = zmax[:, 0] + np.log(S[:, 0])
    losses = lse - np.sum(T * Z, axis=1)
    return losses, H, P


def _mlp_backward_numpy(X, H, P, T, V, s):
    GZ = (P - T) * s[:, None]
    dV = GZ.T @ H
    dc = GZ.sum(axis=0)
    GH = (GZ @ V) * (1.0 - H * H)
    dW1 = GH.T @ X
    db1 = GH.sum(axis=0)
    return dW1, db1, dV, dc


def _mlp_forward_loop(X, W1, b1, V, c, T):
    ns = X.shape[0]
    h = W1.shape[0]
    k = V.shape[0]
    H = np.dot(X, W1.T)
    for j in range(ns):
        for a in range(h):
            H[j, a] = math.tanh(H[j, a] + b1[a])
    Z = np.dot(H, V.T)
    P = np.empty((ns, k))
    losses = np.empty(ns)
    for j in range(ns):
        zmax = -np.inf
        for q in range(k):
            Z[j, q] += c[q]
            if Z[j, q] > zmax:
                zmax = Z[j, q]
        s = 0.0
        for q in range(k):
            e = math.exp(Z[j, q] - zmax)
            P[j, q] = e
            s += e
        tz = 0.0
        for q in range(k):
            P[j, q] /= s
            tz += T[j, q] * Z[j, q]
        losses[j] = zmax + math.log(s) - tz
    return losses, H, P


def _mlp_backward_loop(X, H, P, T, V, s):
    ns = X.shape[0]
    h = H.shape[1]
    k = P.shape[1]
    GZ = np.empty((ns, k))
    dc = np.zeros(k)
    for j in range(ns):
        for q in range(k):
            g = (P[j, q] - T[j, q]) * s[j]
            GZ[j, q] = g
            dc[q] += g
    dV = np.dot(GZ.T, H)
    GH = np.dot(GZ, V)
    db1 = np.zeros(h)
    for j in range(ns):
        for a in range(h):
            g = GH[j, a] * (1.0 - H[j, a] * H[j, a])
            GH[j, a] = g
            db1[a] += g
    dW1 = np.dot(GH.T, X)
    return dW1, db1, dV, dc


NUMPY_KERNELS = SimpleNamespace(
    name="numpy",
    project_simplex=_project_simplex_numpy,
    direction=_direction_numpy,
    mlp_forward=_mlp_forward_numpy,
    mlp_backward=_mlp_backward_numpy,
)

_nb_simplex = compile_kernel(_project_simplex_loop)
NUMBA_KERNELS = None
if _nb_simplex is not None:
    NUMBA_KERNELS = SimpleNamespace(
        name="numba",
        project_simplex=_nb_simplex,
        direction=compile_kernel(_direction_loop),
        mlp_forward=compile_kernel(_mlp_forward_loop),
        mlp_backward=compile_kernel(_mlp_backward_loop),
    )

ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS
