"""Three-layer spiking policy network.

A continuous observation feeds a hidden layer of leaky integrate-and-fire
neurons through one masked dense stage; the binary spike train feeds a
non-spiking leaky-integrator motor layer through a second masked stage.  The
same observation is presented for ``time_window`` simulation steps and the
action is decoded from the elementwise maximum of the motor membrane trace:
the vector itself for continuous action spaces, its argmax for discrete
ones.

Only the binary connection masks evolve; the underlying weights are drawn
once from a seeded generator and stay fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import lif_li_forward
from .validation import as_float_matrix, check_observation

DEFAULT_HIDDEN = 64


@dataclass(frozen=True)
class NetworkShape:
    """Layer sizes: observation dim, hidden LIF units, motor units."""

    n: int
    h: int
    m: int

    def __post_init__(self):
        if min(self.n, self.h, self.m) < 1:
            raise ValueError(f"all layer sizes must be >= 1, got {self}")

    @property
    def n_connections(self) -> int:
        return self.n * self.h + self.h * self.m


@dataclass(frozen=True)
class NeuronConfig:
    """Neuron constants shared by both layers.

    ``decay`` is the per-step membrane retention factor; a hidden neuron
    fires when its membrane strictly exceeds ``v_th`` and carries ``v_reset``
    into the next step.  The motor layer never fires (infinite threshold).
    """

    time_window: int = 4
    decay: float = 0.75
    v_th: float = 0.5
    v_rest: float = 0.0
    v_reset: float = 0.0

    def __post_init__(self):
        if self.time_window < 1:
            raise ValueError("time_window must be >= 1")
        if not (0.0 < self.decay <= 1.0):
            raise ValueError("decay must lie in (0, 1]")


@dataclass(frozen=True)
class FixedWeights:
    """Random, immutable synaptic weights (sensory->hidden, hidden->motor)."""

    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        # owned copies: freezing must not reach back into the caller's arrays
        w1 = as_float_matrix(self.w1, "w1", copy=True)
        w2 = as_float_matrix(self.w2, "w2", copy=True)
        if w1.shape[1] != w2.shape[0]:
            raise ValueError(
                f"hidden dimension mismatch: w1 is {w1.shape}, w2 is {w2.shape}"
            )
        w1.setflags(write=False)
        w2.setflags(write=False)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)

    @property
    def shape(self) -> NetworkShape:
        return NetworkShape(self.w1.shape[0], self.w1.shape[1], self.w2.shape[1])


@dataclass(frozen=True)
class ConnectionMask:
    """Binary gates deciding which synapses exist."""

    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self):
        for name, x in (("x1", self.x1), ("x2", self.x2)):
            arr = np.array(x, dtype=np.float64)
            if not np.all((arr == 0.0) | (arr == 1.0)):
                raise ValueError(f"{name} entries must all be 0 or 1")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.x1.shape[1] != self.x2.shape[0]:
            raise ValueError(
                f"hidden dimension mismatch: x1 is {self.x1.shape}, x2 is {self.x2.shape}"
            )

    @classmethod
    def full(cls, shape: NetworkShape) -> "ConnectionMask":
        return cls(np.ones((shape.n, shape.h)), np.ones((shape.h, shape.m)))

    @property
    def density(self) -> float:
        total = self.x1.size + self.x2.size
        return float(self.x1.sum() + self.x2.sum()) / total


@dataclass(frozen=True)
class SpikeTally:
    """Hidden-layer spike count accumulated over ``inferences`` forward passes."""

    middle_spikes: int = 0
    inferences: int = 0

    def combine(self, other: "SpikeTally") -> "SpikeTally":
        return SpikeTally(
            self.middle_spikes + other.middle_spikes,
            self.inferences + other.inferences,
        )


def init_weights(shape: NetworkShape, seed: int, scale: float = 1.0) -> FixedWeights:
    """Draw fixed weights ~ Uniform(-scale, scale) from a seeded generator."""
    from .rng import WEIGHTS, stream

    if scale <= 0:
        raise ValueError("weight scale must be positive")
    rng = stream(seed, WEIGHTS)
    w1 = rng.uniform(-scale, scale, (shape.n, shape.h))
    w2 = rng.uniform(-scale, scale, (shape.h, shape.m))
    return FixedWeights(w1, w2)


def derive_mask(scores1, scores2, s_th: float = 0.5) -> ConnectionMask:
    """Threshold sigmoid-normalised connection scores into a binary mask.

    A connection is kept when sigmoid(score) >= s_th.  The sigmoid is
    monotone, so the comparison is applied in score space against
    logit(s_th); for s_th = 0.5 this is exactly ``score >= 0``.
    """
    if not (0.0 < s_th < 1.0):
        raise ValueError(f"s_th must lie in (0, 1), got {s_th}")
    c1 = as_float_matrix(scores1, "scores1")
    c2 = as_float_matrix(scores2, "scores2")
    if c1.shape[1] != c2.shape[0]:
        raise ValueError(
            f"hidden dimension mismatch: scores1 is {c1.shape}, scores2 is {c2.shape}"
        )
    cut = math.log(s_th / (1.0 - s_th))
    return ConnectionMask((c1 >= cut).astype(np.float64), (c2 >= cut).astype(np.float64))


def forward(
    obs,
    weights: FixedWeights,
    mask: ConnectionMask,
    cfg: NeuronConfig = NeuronConfig(),
) -> tuple[np.ndarray, SpikeTally]:
    """One inference: observation -> motor-potential vector plus spike tally.

    Membrane state starts at zero on every call; nothing is carried between
    observations.  The returned vector is the continuous action; take its
    argmax (ties toward the lowest index) for discrete action spaces.
    """
    shape = weights.shape
    o = check_observation(obs, shape.n)
    if mask.x1.shape != weights.w1.shape or mask.x2.shape != weights.w2.shape:
        raise ValueError(
            f"mask shapes {mask.x1.shape}/{mask.x2.shape} do not match "
            f"weight shapes {weights.w1.shape}/{weights.w2.shape}"
        )
    values, spikes = lif_li_forward(
        o,
        weights.w1 * mask.x1,
        weights.w2 * mask.x2,
        cfg.decay,
        cfg.v_th,
        cfg.v_rest,
        cfg.v_reset,
        cfg.time_window,
    )
    return values, SpikeTally(int(spikes), 1)


def discrete_action(values: np.ndarray) -> int:
    """Argmax decoding with ties broken toward the lowest index."""
    return int(np.argmax(values))


def forward_trace(
    obs,
    weights: FixedWeights,
    mask: ConnectionMask,
    cfg: NeuronConfig = NeuronConfig(),
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inference that exposes per-step traces (v1, s1, v2), for inspection.

    Returns arrays of shape (time_window, h), (time_window, h) and
    (time_window, m).  Same recurrence as :func:`forward` in plain numpy.
    """
    shape = weights.shape
    o = check_observation(obs, shape.n)
    w1m = weights.w1 * mask.x1
    w2m = weights.w2 * mask.x2
    i1 = o @ w1m

    v1 = np.zeros(shape.h)
    s1 = np.zeros(shape.h)
    v2 = np.zeros(shape.m)
    v1_trace = np.empty((cfg.time_window, shape.h))
    s1_trace = np.empty((cfg.time_window, shape.h))
    v2_trace = np.empty((cfg.time_window, shape.m))
    for t in range(cfg.time_window):
        carried = np.where(s1 == 1.0, cfg.v_reset, v1)
        v1 = cfg.v_rest + cfg.decay * (carried - cfg.v_rest) + i1
        s1 = (v1 > cfg.v_th).astype(np.float64)
        v2 = cfg.v_rest + cfg.decay * (v2 - cfg.v_rest) + s1 @ w2m
        v1_trace[t] = v1
        s1_trace[t] = s1
        v2_trace[t] = v2
    return v1_trace, s1_trace, v2_trace


def dense_forward(obs, weights: FixedWeights) -> np.ndarray:
    """Conventional dense forward pass: tanh(w2.T @ relu(w1.T @ obs)).

    Mirrors the dense policy architecture used as the operation-count
    reference in :mod:`spikewire.energy`; never used for control.
    """
    o = check_observation(obs, weights.shape.n)
    hidden = np.maximum(o @ weights.w1, 0.0)
    return np.tanh(hidden @ weights.w2)


class SpikingPolicy:
    """Callable policy binding weights, a mask and neuron constants.

    Accumulates a spike tally across calls so rollouts can report the
    hidden-layer firing rate.
    """

    def __init__(
        self,
        weights: FixedWeights,
        mask: ConnectionMask,
        cfg: NeuronConfig,
        action_kind: str = "discrete",
    ):
        if action_kind not in ("discrete", "continuous"):
            raise ValueError(f"unknown action kind {action_kind!r}")
        shape = weights.shape
        if mask.x1.shape != weights.w1.shape or mask.x2.shape != weights.w2.shape:
            raise ValueError("mask shape does not match weight shape")
        self.shape = shape
        self.cfg = cfg
        self.action_kind = action_kind
        self._w1m = np.ascontiguousarray(weights.w1 * mask.x1)
        self._w2m = np.ascontiguousarray(weights.w2 * mask.x2)
        self.middle_spikes = 0
        self.inferences = 0

    @classmethod
    def from_masked(
        cls, w1m: np.ndarray, w2m: np.ndarray, cfg: NeuronConfig, action_kind: str
    ) -> "SpikingPolicy":
        """Build directly from pre-masked matrices (internal fast path)."""
        policy = cls.__new__(cls)
        policy.shape = NetworkShape(w1m.shape[0], w1m.shape[1], w2m.shape[1])
        policy.cfg = cfg
        policy.action_kind = action_kind
        policy._w1m = np.ascontiguousarray(w1m)
        policy._w2m = np.ascontiguousarray(w2m)
        policy.middle_spikes = 0
        policy.inferences = 0
        return policy

    def __call__(self, obs: np.ndarray):
        values, spikes = lif_li_forward(
            obs,
            self._w1m,
            self._w2m,
            self.cfg.decay,
            self.cfg.v_th,
            self.cfg.v_rest,
            self.cfg.v_reset,
            self.cfg.time_window,
        )
        self.middle_spikes += int(spikes)
        self.inferences += 1
        if self.action_kind == "discrete":
            return discrete_action(values)
        return values

    @property
    def tally(self) -> SpikeTally:
        return SpikeTally(self.middle_spikes, self.inferences)

    def masked_weights(self) -> tuple[np.ndarray, np.ndarray]:
        return self._w1m, self._w2m
