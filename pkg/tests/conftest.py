from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spikewire import (
    ConnectionMask,
    EnvConfig,
    EnvSpec,
    Environment,
    FixedWeights,
    NetworkShape,
    StepResult,
)


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        sys.stderr.write(f"\n[acceptance] {name}: {outcome}\n")


@pytest.fixture
def unit_weights():
    """1x1x1 network with unit weights, used by the hand-traced cases."""
    return FixedWeights(np.array([[1.0]]), np.array([[1.0]]))


@pytest.fixture
def full_mask_1():
    return ConnectionMask.full(NetworkShape(1, 1, 1))


def random_network(seed: int, shape: NetworkShape = NetworkShape(5, 12, 3)):
    rng = np.random.default_rng(seed)
    weights = FixedWeights(
        rng.uniform(-1, 1, (shape.n, shape.h)), rng.uniform(-1, 1, (shape.h, shape.m))
    )
    mask = ConnectionMask(
        (rng.random((shape.n, shape.h)) < 0.5).astype(float),
        (rng.random((shape.h, shape.m)) < 0.5).astype(float),
    )
    obs = rng.normal(0, 1, shape.n)
    return weights, mask, obs


def balancer_policy(obs):
    """Hand-tuned linear controller that keeps the pole up for 500 steps."""
    return 1 if 0.3 * obs[0] + 0.7 * obs[1] + 10.0 * obs[2] + 2.0 * obs[3] > 0 else 0


class FixedLengthEnv(Environment):
    """Seed-independent environment: reward 1 per step, done at max_steps."""

    def __init__(self, obs_dim=3, act_dim=2, max_steps=7, name="fixed", obs_value=0.0):
        self._spec = EnvSpec(
            name=name, obs_dim=obs_dim, action_kind="discrete",
            act_dim=act_dim, max_steps=max_steps,
        )
        self._obs = np.full(obs_dim, obs_value)
        self._t = 0
        self._done = True

    @property
    def spec(self):
        return self._spec

    def reset(self, seed):
        self._t = 0
        self._done = False
        return self._obs.copy()

    def step(self, action):
        if self._done:
            raise RuntimeError("step after done")
        self._t += 1
        self._done = self._t >= self._spec.max_steps
        return StepResult(self._obs.copy(), 1.0, self._done)


class ActionRewardEnv(FixedLengthEnv):
    """Deterministic, seed-independent: +1 reward only for action 0.

    Observations are all-ones so policies actually spike.
    """

    def __init__(self, **kw):
        kw.setdefault("obs_value", 1.0)
        super().__init__(**kw)

    def step(self, action):
        result = super().step(action)
        return StepResult(result.obs, 1.0 if int(action) == 0 else 0.0, result.done)


class LiveEnvConfig(EnvConfig):
    """EnvConfig wrapper around a live test environment instance."""

    def __init__(self, env):
        object.__setattr__(self, "builtin", None)
        object.__setattr__(self, "command", None)
        object.__setattr__(self, "address", None)
        object.__setattr__(self, "_env", env)

    def make(self):
        return self._env

    def label(self):
        return self._env.spec.name
