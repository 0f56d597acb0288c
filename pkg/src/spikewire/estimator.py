"""Scikit-learn style front end for the evolutionary policy search.

``GeneticPolicySearch`` follows the estimator protocol (``get_params`` /
``set_params`` / ``fit`` / ``predict``) so it can be cloned, grid-searched
and composed like any other estimator.  The one departure from the sklearn
convention is the training input: ``fit`` consumes an episodic environment
(or the name of a built-in one) instead of an (X, y) pair, because the
search signal is episode return rather than labelled data.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .environments import EnvConfig, Environment, rollout
from .evolution import (
    CONNECTION_MODE,
    GaConfig,
    SpnModel,
    policy_from_genome,
    run_evolution,
)
from .network import NetworkShape, NeuronConfig
from .validation import check_observation


class GeneticPolicySearch(BaseEstimator):
    """Evolve the wiring of a spiking policy network against an environment.

    Parameters mirror the reference configuration: a 64-unit hidden layer
    simulated for 4 steps per observation, 100 generations of 200 mirrored
    individuals, truncation ratio 0.25 and perturbation scale 0.01.

    After ``fit`` the fitted policy is available as ``policy_`` and the
    per-generation history as ``reports_``.
    """

    def __init__(
        self,
        hidden: int = 64,
        time_window: int = 4,
        decay: float = 0.75,
        v_th: float = 0.5,
        mode: str = CONNECTION_MODE,
        generations: int = 100,
        population: int = 200,
        sigma: float = 0.01,
        truncation_ratio: float = 0.25,
        score_threshold: float = 0.5,
        elite_candidates: int = 10,
        elite_episodes: int = 10,
        weight_scale: float = 1.0,
        target_return: float | None = None,
        workers: int = 1,
        random_state: int = 0,
    ):
        self.hidden = hidden
        self.time_window = time_window
        self.decay = decay
        self.v_th = v_th
        self.mode = mode
        self.generations = generations
        self.population = population
        self.sigma = sigma
        self.truncation_ratio = truncation_ratio
        self.score_threshold = score_threshold
        self.elite_candidates = elite_candidates
        self.elite_episodes = elite_episodes
        self.weight_scale = weight_scale
        self.target_return = target_return
        self.workers = workers
        self.random_state = random_state

    def _ga_config(self) -> GaConfig:
        return GaConfig(
            generations=self.generations,
            population=self.population,
            sigma=self.sigma,
            truncation_ratio=self.truncation_ratio,
            score_threshold=self.score_threshold,
            elite_candidates=self.elite_candidates,
            elite_episodes=self.elite_episodes,
            target_return=self.target_return,
        )

    def fit(self, env: Environment | str, y=None) -> "GeneticPolicySearch":
        """Run the search against ``env`` and keep the best elite found."""
        env_cfg = EnvConfig.parse(env) if isinstance(env, str) else None
        probe = env_cfg.make() if env_cfg is not None else env
        spec = probe.spec
        if env_cfg is not None:
            probe.close()
        if env_cfg is None:
            # Wrap a live environment object so workers=1 can reuse it.
            if self.workers != 1:
                raise ValueError(
                    "pass the environment by name/config to use multiple workers"
                )
            env_cfg = _LiveEnvConfig(probe)

        shape = NetworkShape(spec.obs_dim, self.hidden, spec.act_dim)
        neuron = NeuronConfig(
            time_window=self.time_window, decay=self.decay, v_th=self.v_th
        )
        model = SpnModel.create(
            shape, int(self.random_state), neuron, self.weight_scale
        )
        result = run_evolution(
            self._ga_config(),
            model,
            env_cfg,
            int(self.random_state),
            mode=self.mode,
            workers=self.workers,
        )
        best = max(result.elites, key=lambda e: (e.mean_return, -e.generation))
        self.model_ = model
        self.env_spec_ = spec
        self.reports_ = result.reports
        self.elite_genome_ = best.genome
        self.elite_mean_return_ = best.mean_return
        self.policy_ = policy_from_genome(
            model, best.genome, self.score_threshold, spec.action_kind
        )
        self.n_features_in_ = spec.obs_dim
        self.n_steps_ = result.reports[-1].cum_steps if result.reports else 0
        return self

    def predict(self, X):
        """Action(s) for one observation vector or a 2-D batch of them."""
        self._check_fitted()
        arr = np.asarray(X, dtype=np.float64)
        if arr.ndim == 1:
            return self.policy_(check_observation(arr, self.n_features_in_))
        if arr.ndim != 2 or arr.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X must have shape (n_obs, {self.n_features_in_}), got {arr.shape}"
            )
        actions = [self.policy_(check_observation(row, self.n_features_in_)) for row in arr]
        if self.env_spec_.action_kind == "discrete":
            return np.array(actions, dtype=int)
        return np.vstack(actions)

    def score(self, env: Environment | str | None = None, episodes: int = 10, seed: int = 0):
        """Mean return of the fitted policy over fresh evaluation episodes."""
        self._check_fitted()
        if env is None:
            env = self.env_spec_.name
        live = EnvConfig.parse(env).make() if isinstance(env, str) else env
        returns = [
            rollout(self.policy_, live, seed + ep).return_ for ep in range(episodes)
        ]
        return float(np.mean(returns))

    def _check_fitted(self) -> None:
        if not hasattr(self, "policy_"):
            raise RuntimeError("estimator is not fitted; call fit(env) first")


class _LiveEnvConfig(EnvConfig):
    """EnvConfig wrapper around an already-constructed environment."""

    def __init__(self, env: Environment):
        object.__setattr__(self, "builtin", None)
        object.__setattr__(self, "command", None)
        object.__setattr__(self, "address", None)
        object.__setattr__(self, "_env", env)

    def make(self) -> Environment:
        return self._env

    def label(self) -> str:
        return self._env.spec.name
