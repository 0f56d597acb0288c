"""Episodic environments: a built-in cart-pole and a remote-protocol client.

The remote protocol is newline-delimited JSON over a byte stream (stdio pipe
or TCP), one message per line:

    -> {"cmd": "spec"}
    <- {"obs_dim": N, "action": "discrete"|"continuous", "act_dim": M,
        "low": [...], "high": [...], "max_steps": T, "name": S}
    -> {"cmd": "reset", "seed": K}      <- {"obs": [...]}
    -> {"cmd": "step", "action": A}     <- {"obs": [...], "reward": R, "done": B}
    -> {"cmd": "close"}                 <- {"ok": true}

Unknown fields in replies are ignored; any malformed line is fatal for the
session.
"""

from __future__ import annotations

import json
import math
import shlex
import socket
import subprocess
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .validation import check_observation

CARTPOLE_MAX_STEPS = 500


class ProtocolError(RuntimeError):
    """Remote environment violated the wire protocol."""


class EpisodeError(RuntimeError):
    """Environment failure, annotated with episode context."""


@dataclass(frozen=True)
class EnvSpec:
    """Static description of an episodic environment."""

    name: str
    obs_dim: int
    action_kind: str            # "discrete" | "continuous"
    act_dim: int
    max_steps: int
    low: np.ndarray | None = None
    high: np.ndarray | None = None

    def __post_init__(self):
        if self.obs_dim < 1 or self.act_dim < 1 or self.max_steps < 1:
            raise ValueError("obs_dim, act_dim and max_steps must be >= 1")
        if self.action_kind not in ("discrete", "continuous"):
            raise ValueError(f"unknown action kind {self.action_kind!r}")
        if self.action_kind == "continuous":
            if self.low is None or self.high is None:
                raise ValueError("continuous action space needs low/high bounds")
            if not np.all(np.asarray(self.low) < np.asarray(self.high)):
                raise ValueError("action bounds must satisfy low < high elementwise")


class StepResult(NamedTuple):
    obs: np.ndarray
    reward: float
    done: bool


@dataclass
class Episode:
    """Outcome of one rollout: undiscounted return and length."""

    return_: float
    length: int
    trajectory: list[tuple[np.ndarray, object, float]] | None = None


class Environment:
    """Minimal episodic-environment contract."""

    @property
    def spec(self) -> EnvSpec:
        raise NotImplementedError

    def reset(self, seed: int) -> np.ndarray:
        raise NotImplementedError

    def step(self, action) -> StepResult:
        raise NotImplementedError

    def close(self) -> None:
        pass


class CartPole(Environment):
    """Standard cart-pole balancing task (Euler integration, dt = 0.02).

    Physics constants are frozen in :mod:`spikewire._kernels`; this class is
    kept bit-identical to the fused episode kernel used by the evolution
    fast path.  Reward is +1 per step; the episode ends when the cart leaves
    +-2.4, the pole tips past 12 degrees, or 500 steps elapse.
    """

    def __init__(self):
        self._state: tuple[float, float, float, float] | None = None
        self._steps = 0
        self._done = True

    @property
    def spec(self) -> EnvSpec:
        return EnvSpec(
            name="cartpole",
            obs_dim=4,
            action_kind="discrete",
            act_dim=2,
            max_steps=CARTPOLE_MAX_STEPS,
        )

    def reset(self, seed: int) -> np.ndarray:
        init = np.random.default_rng(seed).uniform(-0.05, 0.05, 4)
        self._state = (float(init[0]), float(init[1]), float(init[2]), float(init[3]))
        self._steps = 0
        self._done = False
        return np.array(self._state)

    def step(self, action) -> StepResult:
        if self._state is None:
            raise RuntimeError("step before reset")
        if self._done:
            raise RuntimeError("step after episode end; call reset first")
        a = int(action)
        if a not in (0, 1):
            raise ValueError(f"cart-pole action must be 0 or 1, got {action!r}")

        x, x_dot, theta, theta_dot = self._state
        force = _kernels.CP_FORCE if a == 1 else -_kernels.CP_FORCE
        cos_t = math.cos(theta)
        sin_t = math.sin(theta)
        tmp = (
            force + _kernels.CP_POLE_MASS_LENGTH * theta_dot * theta_dot * sin_t
        ) / _kernels.CP_TOTAL_MASS
        theta_acc = (_kernels.CP_GRAVITY * sin_t - cos_t * tmp) / (
            _kernels.CP_HALF_LENGTH
            * (4.0 / 3.0 - _kernels.CP_POLE_MASS * cos_t * cos_t / _kernels.CP_TOTAL_MASS)
        )
        x_acc = tmp - _kernels.CP_POLE_MASS_LENGTH * theta_acc * cos_t / _kernels.CP_TOTAL_MASS
        x = x + _kernels.CP_DT * x_dot
        x_dot = x_dot + _kernels.CP_DT * x_acc
        theta = theta + _kernels.CP_DT * theta_dot
        theta_dot = theta_dot + _kernels.CP_DT * theta_acc

        self._state = (x, x_dot, theta, theta_dot)
        self._steps += 1
        failed = (
            x < -_kernels.CP_X_LIMIT
            or x > _kernels.CP_X_LIMIT
            or theta < -_kernels.CP_THETA_LIMIT
            or theta > _kernels.CP_THETA_LIMIT
        )
        self._done = failed or self._steps >= CARTPOLE_MAX_STEPS
        return StepResult(np.array(self._state), 1.0, self._done)


class RemoteEnvironment(Environment):
    """Client for an environment served over the line protocol.

    One connection per instance; the spec is fetched on construction and
    every reply is checked against it.
    """

    def __init__(self, reader, writer, *, child: subprocess.Popen | None = None):
        self._reader = reader
        self._writer = writer
        self._child = child
        self._dead = False
        self._episode_done = True
        self._spec = self._fetch_spec()

    @classmethod
    def connect(cls, host: str, port: int) -> "RemoteEnvironment":
        sock = socket.create_connection((host, port))
        f = sock.makefile("rwb")
        return cls(f, f)

    @classmethod
    def launch(cls, argv: list[str]) -> "RemoteEnvironment":
        child = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE
        )
        return cls(child.stdout, child.stdin, child=child)

    @property
    def spec(self) -> EnvSpec:
        return self._spec

    def _roundtrip(self, request: dict) -> dict:
        if self._dead:
            raise ProtocolError("session aborted by an earlier protocol error")
        try:
            self._writer.write(json.dumps(request).encode() + b"\n")
            self._writer.flush()
            line = self._reader.readline()
        except (BrokenPipeError, OSError) as exc:
            self._dead = True
            raise ProtocolError(f"remote environment unreachable: {exc}") from exc
        if not line:
            self._dead = True
            raise ProtocolError("remote environment closed the stream")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            self._dead = True
            raise ProtocolError(f"malformed reply line: {line[:200]!r}") from exc
        if not isinstance(reply, dict):
            self._dead = True
            raise ProtocolError(f"reply is not an object: {reply!r}")
        if "error" in reply:
            self._dead = True
            raise ProtocolError(f"remote error: {reply['error']}")
        return reply

    def _fetch_spec(self) -> EnvSpec:
        reply = self._roundtrip({"cmd": "spec"})
        try:
            kind = reply["action"]
            low = np.asarray(reply["low"], dtype=float) if kind == "continuous" else None
            high = np.asarray(reply["high"], dtype=float) if kind == "continuous" else None
            return EnvSpec(
                name=str(reply.get("name", "remote")),
                obs_dim=int(reply["obs_dim"]),
                action_kind=str(kind),
                act_dim=int(reply["act_dim"]),
                max_steps=int(reply["max_steps"]),
                low=low,
                high=high,
            )
        except (KeyError, TypeError, ValueError) as exc:
            self._dead = True
            raise ProtocolError(f"invalid spec reply: {reply!r}") from exc

    def _check_obs(self, reply: dict) -> np.ndarray:
        obs = reply.get("obs")
        if not isinstance(obs, list) or len(obs) != self._spec.obs_dim:
            self._dead = True
            raise ProtocolError(
                f"obs length {None if not isinstance(obs, list) else len(obs)} "
                f"!= advertised obs_dim {self._spec.obs_dim}"
            )
        arr = np.asarray(obs, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            self._dead = True
            raise ProtocolError(f"non-finite observation entries: {obs!r}")
        return arr

    def reset(self, seed: int) -> np.ndarray:
        reply = self._roundtrip({"cmd": "reset", "seed": int(seed)})
        self._episode_done = False
        return self._check_obs(reply)

    def step(self, action) -> StepResult:
        if self._episode_done:
            raise RuntimeError("step after episode end; call reset first")
        if isinstance(action, (int, np.integer)):
            payload = int(action)
        else:
            arr = np.asarray(action, dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite action")
            payload = arr.tolist()
        reply = self._roundtrip({"cmd": "step", "action": payload})
        try:
            reward = float(reply["reward"])
            done = bool(reply["done"])
        except (KeyError, TypeError, ValueError) as exc:
            self._dead = True
            raise ProtocolError(f"invalid step reply: {reply!r}") from exc
        if not math.isfinite(reward):
            self._dead = True
            raise ProtocolError(f"non-finite reward: {reply['reward']!r}")
        obs = self._check_obs(reply)
        self._episode_done = done
        return StepResult(obs, reward, done)

    def close(self) -> None:
        if not self._dead:
            try:
                self._roundtrip({"cmd": "close"})
            except ProtocolError:
                pass
        for f in (self._writer, self._reader):
            try:
                f.close()
            except OSError:
                pass
        if self._child is not None:
            try:
                self._child.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._child.kill()
                self._child.wait()


def clip_action(action, spec: EnvSpec):
    """Clamp a continuous action into the declared bounds; pass discrete through."""
    if spec.action_kind == "discrete":
        return int(action)
    arr = np.asarray(action, dtype=np.float64)
    return np.minimum(spec.high, np.maximum(spec.low, arr))


def rollout(
    policy: Callable[[np.ndarray], object],
    env: Environment,
    seed: int,
    record_trajectory: bool = False,
) -> Episode:
    """Run one episode of ``policy`` on ``env``, summing rewards.

    Continuous actions are clipped to the environment's declared bounds
    before being applied.
    """
    spec = env.spec
    obs = env.reset(seed)
    obs = check_observation(obs, spec.obs_dim)
    total = 0.0
    length = 0
    trajectory: list | None = [] if record_trajectory else None
    try:
        while True:
            action = clip_action(policy(obs), spec)
            result = env.step(action)
            total += result.reward
            length += 1
            if trajectory is not None:
                trajectory.append((obs, action, result.reward))
            obs = result.obs
            if result.done:
                break
            if length > spec.max_steps:
                raise EpisodeError(
                    f"{spec.name}: episode exceeded max_steps={spec.max_steps} without done"
                )
    except ProtocolError as exc:
        raise EpisodeError(f"{spec.name}: episode failed at step {length}: {exc}") from exc
    return Episode(return_=total, length=length, trajectory=trajectory)


@dataclass(frozen=True)
class EnvConfig:
    """Resolvable environment reference: builtin name, command, or address."""

    builtin: str | None = None
    command: list[str] | None = None
    address: str | None = None

    @classmethod
    def parse(cls, text_or_mapping) -> "EnvConfig":
        if isinstance(text_or_mapping, dict):
            return cls(
                builtin=text_or_mapping.get("builtin"),
                command=text_or_mapping.get("command"),
                address=text_or_mapping.get("address"),
            )
        text = str(text_or_mapping)
        if text.startswith("tcp:"):
            return cls(address=text[len("tcp:"):])
        if text.startswith("cmd:"):
            return cls(command=shlex.split(text[len("cmd:"):]))
        return cls(builtin=text)

    def make(self) -> Environment:
        if self.builtin is not None:
            if self.builtin != "cartpole":
                raise ValueError(f"unknown builtin environment {self.builtin!r}")
            return CartPole()
        if self.command is not None:
            return RemoteEnvironment.launch(list(self.command))
        if self.address is not None:
            host, _, port = self.address.rpartition(":")
            return RemoteEnvironment.connect(host, int(port))
        raise ValueError("environment config is empty")

    def label(self) -> str:
        if self.builtin is not None:
            return self.builtin
        if self.command is not None:
            return "cmd:" + " ".join(self.command)
        return f"tcp:{self.address}"
