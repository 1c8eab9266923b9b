"""Pure-numpy versions of the hot kernels.

Signatures match the compiled ``_ext`` module one to one so that
:mod:`vrutwin._backend` can swap them freely.  Gate blocks are laid out
as ``[input | forget | cell | output]`` along the last axis.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def lstm_gates_forward(z: np.ndarray, c_prev: np.ndarray):
    """Activate the pre-activation block ``z`` (N, 4H) and advance the cell.

    Returns ``(act, c, tanh_c, h)`` where ``act`` holds the activated gates.
    """
    n, four_h = z.shape
    hid = four_h // 4
    act = np.empty_like(z)
    act[:, :2 * hid] = _sigmoid(z[:, :2 * hid])
    act[:, 2 * hid:3 * hid] = np.tanh(z[:, 2 * hid:3 * hid])
    act[:, 3 * hid:] = _sigmoid(z[:, 3 * hid:])
    i = act[:, :hid]
    f = act[:, hid:2 * hid]
    g = act[:, 2 * hid:3 * hid]
    o = act[:, 3 * hid:]
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return act, c, tanh_c, h


def lstm_gates_backward(dh, dc_next, act, c_prev, tanh_c):
    """Backpropagate through one gate update.

    Returns ``(dz, dc_prev)``: the gradient w.r.t. the pre-activation block
    and w.r.t. the previous cell state.
    """
    hid = c_prev.shape[1]
    i = act[:, :hid]
    f = act[:, hid:2 * hid]
    g = act[:, 2 * hid:3 * hid]
    o = act[:, 3 * hid:]
    dc = dc_next + dh * o * (1.0 - tanh_c * tanh_c)
    dz = np.empty_like(act)
    dz[:, :hid] = dc * g * i * (1.0 - i)
    dz[:, hid:2 * hid] = dc * c_prev * f * (1.0 - f)
    dz[:, 2 * hid:3 * hid] = dc * i * (1.0 - g * g)
    dz[:, 3 * hid:] = dh * tanh_c * o * (1.0 - o)
    return dz, dc * f


def haversine_many(lat1, lon1, lat2, lon2, radius: float) -> np.ndarray:
    """Vectorised great-circle distance; coordinates in degrees."""
    p1 = np.radians(np.asarray(lat1, dtype=float))
    p2 = np.radians(np.asarray(lat2, dtype=float))
    dphi = p2 - p1
    dlam = np.radians(np.asarray(lon2, dtype=float) - np.asarray(lon1, dtype=float))
    a = np.sin(dphi / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlam / 2.0) ** 2
    a = np.clip(a, 0.0, 1.0)
    return 2.0 * radius * np.arctan2(np.sqrt(a), np.sqrt(1.0 - a))
