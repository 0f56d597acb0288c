"""Compiled inner loops.

The recurrence semantics here are the package's reference semantics: fixed
accumulation order (input index order for the sensory layer, hidden index
order for the motor layer), strict ``>`` spike comparison, IEEE double
arithmetic without fused multiply-adds.  The pure-Python environment in
:mod:`spikewire.environments` and the test oracles reproduce these loops
bit for bit.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# Cart-pole physics constants (standard benchmark values, frozen).
CP_GRAVITY = 9.8
CP_CART_MASS = 1.0
CP_POLE_MASS = 0.1
CP_HALF_LENGTH = 0.5
CP_FORCE = 10.0
CP_DT = 0.02
CP_X_LIMIT = 2.4
CP_THETA_LIMIT = 12 * 2 * math.pi / 360
CP_TOTAL_MASS = CP_CART_MASS + CP_POLE_MASS
CP_POLE_MASS_LENGTH = CP_POLE_MASS * CP_HALF_LENGTH


@njit(cache=True)
def lif_li_forward(obs, w1m, w2m, g, v_th, v_rest, v_reset, time_window):
    """One inference of the masked two-stage spiking network.

    ``w1m``/``w2m`` are the already-masked weight matrices.  Returns the
    elementwise maximum of the motor-layer membrane trace and the total
    number of hidden-layer spikes.
    """
    n, h = w1m.shape
    m = w2m.shape[1]

    i1 = np.zeros(h)
    for j in range(h):
        acc = 0.0
        for i in range(n):
            acc += w1m[i, j] * obs[i]
        i1[j] = acc

    v1 = np.zeros(h)
    s1 = np.zeros(h)
    v2 = np.zeros(m)
    v2_max = np.full(m, -np.inf)
    spikes = 0
    for _ in range(time_window):
        for j in range(h):
            carried = v_reset if s1[j] == 1.0 else v1[j]
            v1[j] = v_rest + g * (carried - v_rest) + i1[j]
            if v1[j] > v_th:
                s1[j] = 1.0
                spikes += 1
            else:
                s1[j] = 0.0
        for k in range(m):
            acc = 0.0
            for j in range(h):
                acc += w2m[j, k] * s1[j]
            v2[k] = v_rest + g * (v2[k] - v_rest) + acc
            if v2[k] > v2_max[k]:
                v2_max[k] = v2[k]
    return v2_max, spikes


@njit(cache=True)
def cartpole_spiking_episode(
    w1m, w2m, x, x_dot, theta, theta_dot,
    g, v_th, v_rest, v_reset, time_window, max_steps,
):
    """Full cart-pole episode driven by the spiking policy.

    Fused variant of ``rollout(SpikingPolicy, CartPole)``; kept bit-identical
    to that path (see test suite).  Returns (length, hidden spikes).
    """
    length = 0
    spikes = 0
    obs = np.empty(4)
    for _ in range(max_steps):
        obs[0] = x
        obs[1] = x_dot
        obs[2] = theta
        obs[3] = theta_dot
        values, sp = lif_li_forward(
            obs, w1m, w2m, g, v_th, v_rest, v_reset, time_window
        )
        spikes += sp
        action = 1 if values[1] > values[0] else 0

        force = CP_FORCE if action == 1 else -CP_FORCE
        cos_t = math.cos(theta)
        sin_t = math.sin(theta)
        tmp = (force + CP_POLE_MASS_LENGTH * theta_dot * theta_dot * sin_t) / CP_TOTAL_MASS
        theta_acc = (CP_GRAVITY * sin_t - cos_t * tmp) / (
            CP_HALF_LENGTH * (4.0 / 3.0 - CP_POLE_MASS * cos_t * cos_t / CP_TOTAL_MASS)
        )
        x_acc = tmp - CP_POLE_MASS_LENGTH * theta_acc * cos_t / CP_TOTAL_MASS
        x = x + CP_DT * x_dot
        x_dot = x_dot + CP_DT * x_acc
        theta = theta + CP_DT * theta_dot
        theta_dot = theta_dot + CP_DT * theta_acc

        length += 1
        if x < -CP_X_LIMIT or x > CP_X_LIMIT or theta < -CP_THETA_LIMIT or theta > CP_THETA_LIMIT:
            break
    return length, spikes


def warm_kernels() -> None:
    """Force JIT compilation (done before forking worker processes)."""
    w1 = np.zeros((2, 3))
    w2 = np.zeros((3, 2))
    lif_li_forward(np.zeros(2), w1, w2, 0.75, 0.5, 0.0, 0.0, 1)
    cartpole_spiking_episode(
        np.zeros((4, 3)), w2, 0.0, 0.0, 0.0, 0.0, 0.75, 0.5, 0.0, 0.0, 1, 1
    )
