"""Genetic search over connection masks (or, for the ablation, weights).

One iteration: evaluate every individual with a single fitness episode,
rank by return, keep the top eta fraction as parents, re-evaluate the ten
best on ten extra episodes to pick the generation's elite, then refill the
population with mirrored mutations of uniformly drawn parents.  The elite is
recorded, not copied into the next generation.

Every random draw comes from a stream keyed by (master seed, purpose,
generation, index ...), so results are bit-identical no matter how many
worker processes evaluate the population.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from . import rng
from ._kernels import cartpole_spiking_episode, warm_kernels
from .environments import CartPole, EnvConfig, Environment, EpisodeError, rollout
from .network import (
    ConnectionMask,
    FixedWeights,
    NetworkShape,
    NeuronConfig,
    SpikeTally,
    SpikingPolicy,
    derive_mask,
    init_weights,
)

CONNECTION_MODE = "connections"
WEIGHT_MODE = "weights"


@dataclass(frozen=True)
class Genome:
    """Evolvable parameter vector: connection scores or raw weights."""

    mode: str
    values: np.ndarray

    def __post_init__(self):
        if self.mode not in (CONNECTION_MODE, WEIGHT_MODE):
            raise ValueError(f"unknown genome mode {self.mode!r}")
        v = np.array(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValueError("genome contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def matrices(self, shape: NetworkShape) -> tuple[np.ndarray, np.ndarray]:
        if self.values.size != shape.n_connections:
            raise ValueError(
                f"genome has {self.values.size} entries, shape {shape} needs "
                f"{shape.n_connections}"
            )
        split = shape.n * shape.h
        return (
            self.values[:split].reshape(shape.n, shape.h),
            self.values[split:].reshape(shape.h, shape.m),
        )


@dataclass(frozen=True)
class SpnModel:
    """Fixed random weights plus shape and neuron constants.

    Combined with a connection mask this is a runnable policy; the weight
    seed and scale are retained so checkpoints can rebuild the matrices.
    """

    shape: NetworkShape
    weights: FixedWeights
    neuron: NeuronConfig
    weight_seed: int
    weight_scale: float

    @classmethod
    def create(
        cls,
        shape: NetworkShape,
        seed: int,
        neuron: NeuronConfig = NeuronConfig(),
        weight_scale: float = 1.0,
    ) -> "SpnModel":
        return cls(shape, init_weights(shape, seed, weight_scale), neuron, seed, weight_scale)


@dataclass(frozen=True)
class GaConfig:
    """Search hyper-parameters; defaults reproduce the reference setup."""

    generations: int = 100
    population: int = 200
    sigma: float = 0.01
    truncation_ratio: float = 0.25
    score_threshold: float = 0.5
    elite_candidates: int = 10
    elite_episodes: int = 10
    target_return: float | None = None

    def __post_init__(self):
        if self.population < 2 or self.population % 2:
            raise ValueError(f"population must be even and >= 2, got {self.population}")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not (0.0 < self.truncation_ratio <= 1.0):
            raise ValueError("truncation_ratio must lie in (0, 1]")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.elite_candidates < 1 or self.elite_episodes < 1:
            raise ValueError("elite_candidates and elite_episodes must be >= 1")
        if self.elite_candidates > self.population:
            raise ValueError("elite_candidates cannot exceed the population size")

    @property
    def n_parents(self) -> int:
        return math.ceil(self.truncation_ratio * self.population)


@dataclass(frozen=True)
class FitnessRecord:
    """Outcome of evaluating one genome."""

    genome_id: int
    return_: float
    steps: int
    stream_path: tuple[int, ...]
    tally: SpikeTally = field(default_factory=SpikeTally)


@dataclass(frozen=True)
class GenerationReport:
    generation: int
    best: float
    mean: float
    std: float
    elite_id: int
    elite_mean: float
    cum_steps: int
    mean_rate: float


@dataclass(frozen=True)
class EliteRecord:
    generation: int
    genome: Genome
    mean_return: float


@dataclass
class EvolutionResult:
    reports: list[GenerationReport]
    elites: list[EliteRecord]


class EvolutionAborted(RuntimeError):
    """Environment failure mid-run; carries the reports produced so far."""

    def __init__(self, message: str, partial: EvolutionResult):
        super().__init__(message)
        self.partial = partial


def init_population(
    cfg: GaConfig, shape: NetworkShape, seed: int, mode: str = CONNECTION_MODE
) -> list[Genome]:
    """Mirrored-pair population around zero: pair k is (+sigma*eps, -sigma*eps)."""
    zero = Genome(mode, np.zeros(shape.n_connections))
    population: list[Genome] = []
    for k in range(cfg.population // 2):
        population.extend(mutate(zero, cfg.sigma, rng.stream(seed, rng.NOISE, 0, k)))
    return population


def mutate(parent: Genome, sigma: float, stream: np.random.Generator) -> tuple[Genome, Genome]:
    """Mirrored offspring pair: one perturbation draw, applied with both signs."""
    noise = sigma * stream.standard_normal(parent.values.size)
    return (
        Genome(parent.mode, parent.values + noise),
        Genome(parent.mode, parent.values - noise),
    )


def masked_matrices(
    model: SpnModel, genome: Genome, s_th: float
) -> tuple[np.ndarray, np.ndarray]:
    """Effective synapse matrices for a genome.

    Connection mode gates the model's fixed weights with the thresholded
    score mask; weight mode uses the genome directly with every synapse
    present.
    """
    c1, c2 = genome.matrices(model.shape)
    if genome.mode == CONNECTION_MODE:
        mask = derive_mask(c1, c2, s_th)
        return (
            np.ascontiguousarray(model.weights.w1 * mask.x1),
            np.ascontiguousarray(model.weights.w2 * mask.x2),
        )
    return np.ascontiguousarray(c1), np.ascontiguousarray(c2)


def policy_from_genome(
    model: SpnModel, genome: Genome, s_th: float, action_kind: str
) -> SpikingPolicy:
    """Runnable policy for a genome (see :func:`masked_matrices`)."""
    c1, c2 = genome.matrices(model.shape)
    if genome.mode == CONNECTION_MODE:
        mask = derive_mask(c1, c2, s_th)
        return SpikingPolicy(model.weights, mask, model.neuron, action_kind)
    return SpikingPolicy(
        FixedWeights(c1, c2), ConnectionMask.full(model.shape), model.neuron, action_kind
    )


def _run_episode(
    env: Environment,
    model: SpnModel,
    w1m: np.ndarray,
    w2m: np.ndarray,
    ep_seed: int,
) -> tuple[float, int, int, int]:
    """One episode; returns (return, length, spikes, inferences).

    The built-in cart-pole runs through the fused kernel; anything else goes
    through the generic rollout.  Both paths are bit-identical.
    """
    nc = model.neuron
    if isinstance(env, CartPole):
        init = np.random.default_rng(ep_seed).uniform(-0.05, 0.05, 4)
        length, spikes = cartpole_spiking_episode(
            w1m, w2m,
            float(init[0]), float(init[1]), float(init[2]), float(init[3]),
            nc.decay, nc.v_th, nc.v_rest, nc.v_reset, nc.time_window,
            env.spec.max_steps,
        )
        return float(length), int(length), int(spikes), int(length)
    policy = SpikingPolicy.from_masked(w1m, w2m, nc, env.spec.action_kind)
    episode = rollout(policy, env, ep_seed)
    return episode.return_, episode.length, policy.middle_spikes, policy.inferences


def evaluate(
    genome: Genome,
    model: SpnModel,
    env: Environment,
    episodes: int,
    stream: np.random.Generator,
    s_th: float = 0.5,
    genome_id: int = 0,
    stream_path: tuple[int, ...] = (),
) -> FitnessRecord:
    """Mean return of a genome over ``episodes`` fresh episodes.

    Episode seeds are drawn sequentially from ``stream``; spike and step
    tallies accumulate across the episodes.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    w1m, w2m = masked_matrices(model, genome, s_th)
    returns = []
    steps = spikes = inferences = 0
    for _ in range(episodes):
        ep_seed = int(stream.integers(0, 2**63))
        ret, length, sp, inf = _run_episode(env, model, w1m, w2m, ep_seed)
        returns.append(ret)
        steps += length
        spikes += sp
        inferences += inf
    return FitnessRecord(
        genome_id=genome_id,
        return_=float(np.mean(returns)),
        steps=steps,
        stream_path=stream_path,
        tally=SpikeTally(spikes, inferences),
    )


def rank_and_select(records: list[FitnessRecord], eta: float) -> list[int]:
    """Ids of the top ceil(eta*N) genomes by return, descending, ties to lower id."""
    if not records:
        raise ValueError("cannot rank an empty record list")
    if not (0.0 < eta <= 1.0):
        raise ValueError("eta must lie in (0, 1]")
    ranked = _ranked_ids(records)
    return ranked[: math.ceil(eta * len(records))]


def _ranked_ids(records: list[FitnessRecord]) -> list[int]:
    ids = np.array([r.genome_id for r in records])
    returns = np.array([r.return_ for r in records])
    order = np.lexsort((ids, -returns))
    return [int(ids[i]) for i in order]


# ---------------------------------------------------------------------------
# Parallel evaluation plumbing.  Workers are forked after kernels are warm;
# each worker holds its own environment instance and recomputes its streams
# from the task coordinates, so the result is independent of scheduling.

_WORKER: dict = {}


def _init_worker(model: SpnModel, env_cfg: EnvConfig, s_th: float, seed: int) -> None:
    _WORKER["model"] = model
    _WORKER["env"] = env_cfg.make()
    _WORKER["s_th"] = s_th
    _WORKER["seed"] = seed


def _eval_task(task) -> tuple[float, int, int, int]:
    purpose_path, values, mode = task
    model: SpnModel = _WORKER["model"]
    genome = Genome(mode, values)
    w1m, w2m = masked_matrices(model, genome, _WORKER["s_th"])
    ep_seed = rng.derive_seed(_WORKER["seed"], *purpose_path)
    return _run_episode(_WORKER["env"], model, w1m, w2m, ep_seed)


class _Evaluator:
    """Maps evaluation tasks onto an optional fork pool, preserving order."""

    def __init__(self, model: SpnModel, env_cfg: EnvConfig, s_th: float, seed: int, workers: int):
        self._pool = None
        if workers > 1:
            ctx = multiprocessing.get_context("fork")
            self._pool = ctx.Pool(
                workers, initializer=_init_worker, initargs=(model, env_cfg, s_th, seed)
            )
        else:
            _init_worker(model, env_cfg, s_th, seed)

    def map(self, tasks: list) -> list[tuple[float, int, int, int]]:
        if self._pool is None:
            return [_eval_task(t) for t in tasks]
        return self._pool.map(_eval_task, tasks)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.terminate()
            self._pool.join()
        elif _WORKER.get("env") is not None:
            _WORKER["env"].close()
        _WORKER.clear()


def select_elite(
    candidates: list[tuple[int, Genome]],
    model: SpnModel,
    evaluator: _Evaluator,
    cfg: GaConfig,
    generation: int,
) -> tuple[int, float, int, SpikeTally]:
    """Re-evaluate the ranked candidates on fresh episodes and pick the best.

    Each candidate gets ``cfg.elite_episodes`` additional episodes with its
    own seed streams; all of these interaction steps count toward the
    optimisation budget.  Ties go to the better-ranked candidate.
    """
    if len(candidates) < cfg.elite_candidates:
        raise ValueError(
            f"need {cfg.elite_candidates} candidates, got {len(candidates)}"
        )
    tasks = [
        ((rng.ELITE, generation, ci, ep), genome.values, genome.mode)
        for ci, (_, genome) in enumerate(candidates)
        for ep in range(cfg.elite_episodes)
    ]
    results = evaluator.map(tasks)
    means = np.empty(len(candidates))
    steps = 0
    spikes = inferences = 0
    for ci in range(len(candidates)):
        chunk = results[ci * cfg.elite_episodes : (ci + 1) * cfg.elite_episodes]
        means[ci] = float(np.mean([r[0] for r in chunk]))
        steps += sum(r[1] for r in chunk)
        spikes += sum(r[2] for r in chunk)
        inferences += sum(r[3] for r in chunk)
    winner = int(np.argmax(means))
    return candidates[winner][0], float(means[winner]), steps, SpikeTally(spikes, inferences)


def run_evolution(
    cfg: GaConfig,
    model: SpnModel,
    env_cfg: EnvConfig,
    seed: int,
    mode: str = CONNECTION_MODE,
    workers: int = 1,
    on_generation=None,
) -> EvolutionResult:
    """Full search loop; returns per-generation reports and elite genomes.

    ``on_generation`` (if given) is called with each GenerationReport as it
    is produced.  On an environment failure the partial result is attached
    to the raised :class:`EvolutionAborted`.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    warm_kernels()
    evaluator = _Evaluator(model, env_cfg, cfg.score_threshold, seed, workers)
    reports: list[GenerationReport] = []
    elites: list[EliteRecord] = []
    try:
        population = init_population(cfg, model.shape, seed, mode)
        parent_ids: list[int] = []
        cum_steps = 0
        for gen in range(cfg.generations):
            if gen > 0:
                population = _next_generation(population, parent_ids, cfg, seed, gen)

            tasks = [
                ((rng.FITNESS, gen, j), population[j].values, mode)
                for j in range(cfg.population)
            ]
            results = evaluator.map(tasks)
            records = [
                FitnessRecord(j, results[j][0], results[j][1], (rng.FITNESS, gen, j),
                              SpikeTally(results[j][2], results[j][3]))
                for j in range(cfg.population)
            ]
            cum_steps += sum(r.steps for r in records)

            ranked = _ranked_ids(records)
            parent_ids = ranked[: cfg.n_parents]
            candidates = [(i, population[i]) for i in ranked[: cfg.elite_candidates]]
            elite_id, elite_mean, elite_steps, elite_tally = select_elite(
                candidates, model, evaluator, cfg, gen
            )
            cum_steps += elite_steps

            returns = np.array([r.return_ for r in records])
            tally = elite_tally
            for r in records:
                tally = tally.combine(r.tally)
            rate = tally.middle_spikes / (model.shape.h * tally.inferences)
            report = GenerationReport(
                generation=gen,
                best=float(returns.max()),
                mean=float(returns.mean()),
                std=float(returns.std()),
                elite_id=elite_id,
                elite_mean=elite_mean,
                cum_steps=cum_steps,
                mean_rate=rate,
            )
            reports.append(report)
            elites.append(EliteRecord(gen, population[elite_id], elite_mean))
            if on_generation is not None:
                on_generation(report)
            if cfg.target_return is not None and elite_mean >= cfg.target_return:
                break
        return EvolutionResult(reports, elites)
    except EpisodeError as exc:
        raise EvolutionAborted(str(exc), EvolutionResult(reports, elites)) from exc
    finally:
        evaluator.close()


def _next_generation(
    population: list[Genome], parent_ids: list[int], cfg: GaConfig, seed: int, gen: int
) -> list[Genome]:
    """Refill the population with mirrored mutations of sampled parents."""
    picks = rng.stream(seed, rng.PARENTS, gen).integers(0, len(parent_ids), cfg.population // 2)
    children: list[Genome] = []
    for k in range(cfg.population // 2):
        parent = population[parent_ids[int(picks[k])]]
        children.extend(mutate(parent, cfg.sigma, rng.stream(seed, rng.NOISE, gen, k)))
    return children
