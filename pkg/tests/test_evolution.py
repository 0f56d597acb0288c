"""Genetic-search mechanics: mirroring, ranking, elites, determinism."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import ActionRewardEnv, FixedLengthEnv, LiveEnvConfig
from spikewire import (
    CONNECTION_MODE,
    WEIGHT_MODE,
    CartPole,
    EnvConfig,
    FitnessRecord,
    GaConfig,
    Genome,
    NetworkShape,
    SpnModel,
    evaluate,
    init_population,
    masked_matrices,
    mutate,
    rank_and_select,
    run_evolution,
    select_elite,
)
from spikewire import rng
from spikewire.environments import ProtocolError, StepResult
from spikewire.evolution import EvolutionAborted, _Evaluator

TINY_SHAPE = NetworkShape(4, 8, 2)


def tiny_cfg(**kw):
    base = dict(generations=2, population=8, elite_candidates=4, elite_episodes=2)
    base.update(kw)
    return GaConfig(**base)


class TestInitPopulation:
    def test_size_and_pairing(self):
        pop = init_population(GaConfig(population=20), TINY_SHAPE, seed=0)
        assert len(pop) == 20
        for k in range(10):
            pair_sum = pop[2 * k].values + pop[2 * k + 1].values
            assert np.array_equal(pair_sum, np.zeros(TINY_SHAPE.n_connections))

    def test_perturbation_scale(self):
        cfg = GaConfig(population=200, sigma=0.01)
        pop = init_population(cfg, NetworkShape(4, 64, 2), seed=1)
        entries = np.concatenate([g.values for g in pop])
        assert abs(entries.std() - 0.01) < 0.001  # within 10%

    def test_same_seed_identical(self):
        a = init_population(GaConfig(population=10), TINY_SHAPE, seed=3)
        b = init_population(GaConfig(population=10), TINY_SHAPE, seed=3)
        assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))

    def test_odd_population_rejected(self):
        with pytest.raises(ValueError, match="even"):
            GaConfig(population=11)


class TestMutate:
    def test_mean_of_pair_recovers_parent(self):
        parent = Genome(CONNECTION_MODE, rng.stream(0, 9).normal(0, 0.05, 500))
        plus, minus = mutate(parent, 0.01, rng.stream(0, 10))
        mean = (plus.values + minus.values) / 2.0
        # IEEE rounding allows a 1-ulp wobble relative to the child magnitude
        ulp = np.maximum(np.abs(plus.values), np.abs(minus.values)) * 2**-52
        assert np.all(np.abs(mean - parent.values) <= ulp)

    def test_zero_sigma_copies_parent(self):
        parent = Genome(CONNECTION_MODE, np.arange(10.0))
        plus, minus = mutate(parent, 0.0, rng.stream(0, 1))
        assert np.array_equal(plus.values, parent.values)
        assert np.array_equal(minus.values, parent.values)

    def test_zero_parent_gives_exact_mirror(self):
        parent = Genome(CONNECTION_MODE, np.zeros(64))
        plus, minus = mutate(parent, 0.01, rng.stream(0, 2))
        assert np.array_equal(plus.values, -minus.values)
        assert plus.values.std() > 0

    def test_init_is_mutation_of_zero(self):
        cfg = GaConfig(population=6, elite_candidates=2)
        pop = init_population(cfg, TINY_SHAPE, seed=5)
        zero = Genome(CONNECTION_MODE, np.zeros(TINY_SHAPE.n_connections))
        for k in range(3):
            plus, minus = mutate(zero, cfg.sigma, rng.stream(5, rng.NOISE, 0, k))
            assert np.array_equal(pop[2 * k].values, plus.values)
            assert np.array_equal(pop[2 * k + 1].values, minus.values)


class TestEvaluate:
    def test_zero_reward_environment(self):
        class ZeroEnv(FixedLengthEnv):
            def step(self, action):
                r = super().step(action)
                return StepResult(r.obs, 0.0, r.done)

        model = SpnModel.create(NetworkShape(3, 8, 2), seed=0)
        genome = init_population(GaConfig(population=2, elite_candidates=2),
                                 NetworkShape(3, 8, 2), seed=0)[0]
        record = evaluate(genome, model, ZeroEnv(), 1, rng.stream(0, 0))
        assert record.return_ == 0.0

    def test_constant_action_policy_on_cartpole(self):
        # all-negative scores disconnect everything: motor values stay 0 and
        # the tie-break gives constant action 0, so the pole falls early
        model = SpnModel.create(TINY_SHAPE, seed=2)
        genome = Genome(CONNECTION_MODE, -np.ones(TINY_SHAPE.n_connections))
        record = evaluate(genome, model, CartPole(), 1, rng.stream(0, 0))
        assert 1 <= record.return_ < 500
        assert record.return_ == record.steps
        assert record.tally.middle_spikes == 0

    def test_same_seed_identical_record(self):
        model = SpnModel.create(TINY_SHAPE, seed=2)
        genome = init_population(GaConfig(population=2, elite_candidates=2), TINY_SHAPE, seed=1)[0]
        a = evaluate(genome, model, CartPole(), 2, rng.stream(7, 1))
        b = evaluate(genome, model, CartPole(), 2, rng.stream(7, 1))
        assert a == b

    def test_weights_mode_uses_genome_as_weights(self):
        model = SpnModel.create(TINY_SHAPE, seed=0)
        values = rng.stream(1, 1).normal(0, 0.5, TINY_SHAPE.n_connections)
        genome = Genome(WEIGHT_MODE, values)
        w1m, w2m = masked_matrices(model, genome, 0.5)
        c1, c2 = genome.matrices(TINY_SHAPE)
        assert np.array_equal(w1m, c1) and np.array_equal(w2m, c2)

    def test_connection_mode_gates_model_weights(self):
        model = SpnModel.create(TINY_SHAPE, seed=0)
        genome = Genome(CONNECTION_MODE, -np.ones(TINY_SHAPE.n_connections))
        w1m, w2m = masked_matrices(model, genome, 0.5)
        assert not w1m.any() and not w2m.any()

    def test_rejects_zero_episodes(self):
        model = SpnModel.create(TINY_SHAPE, seed=0)
        genome = Genome(CONNECTION_MODE, np.zeros(TINY_SHAPE.n_connections))
        with pytest.raises(ValueError, match="episodes"):
            evaluate(genome, model, CartPole(), 0, rng.stream(0, 0))


class TestRankAndSelect:
    def _records(self, returns):
        return [FitnessRecord(i, r, 1, ()) for i, r in enumerate(returns)]

    def test_top_one_of_four(self):
        assert rank_and_select(self._records([5, 1, 9, 3]), 0.25) == [2]

    def test_ties_break_by_lower_id(self):
        ids = rank_and_select(self._records([7, 7, 7, 7]), 0.5)
        assert ids == [0, 1]

    def test_eta_one_returns_all_sorted(self):
        ids = rank_and_select(self._records([5, 1, 9, 3]), 1.0)
        assert ids == [2, 0, 3, 1]

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            rank_and_select([], 0.5)

    def test_count_is_ceiling(self):
        ids = rank_and_select(self._records(range(10)), 0.25)
        assert len(ids) == 3  # ceil(0.25 * 10)


class TestSelectElite:
    def _evaluator(self, env, model, seed=0):
        return _Evaluator(model, LiveEnvConfig(env), 0.5, seed, workers=1)

    def test_picks_highest_mean(self):
        # Weight-mode genomes with hand-built motor weights: one always plays
        # the rewarded action 0, the other always plays 1.
        model = SpnModel.create(TINY_SHAPE, seed=3)

        def constant_action_genome(action):
            c1 = np.ones((TINY_SHAPE.n, TINY_SHAPE.h))
            c2 = np.zeros((TINY_SHAPE.h, TINY_SHAPE.m))
            c2[:, action] = 1.0
            return Genome(WEIGHT_MODE, np.concatenate([c1.ravel(), c2.ravel()]))

        plays_zero = constant_action_genome(0)
        plays_one = constant_action_genome(1)
        env = ActionRewardEnv(obs_dim=4, max_steps=6)
        cfg = tiny_cfg(elite_candidates=2, elite_episodes=3)
        evaluator = self._evaluator(env, model)
        try:
            elite_id, mean, steps, tally = select_elite(
                [(10, plays_one), (11, plays_zero)], model, evaluator, cfg, generation=0
            )
        finally:
            evaluator.close()
        assert elite_id == 11
        assert mean == 6.0
        assert steps == 2 * 3 * 6  # candidates x episodes x length
        assert tally.inferences == steps

    def test_identical_policies_tie_to_first_ranked(self):
        model = SpnModel.create(TINY_SHAPE, seed=3)
        genome = Genome(CONNECTION_MODE, -np.ones(TINY_SHAPE.n_connections))
        env = ActionRewardEnv(obs_dim=4, max_steps=5)
        cfg = tiny_cfg(elite_candidates=3, elite_episodes=2)
        evaluator = self._evaluator(env, model)
        try:
            elite_id, _, _, _ = select_elite(
                [(4, genome), (2, genome), (9, genome)], model, evaluator, cfg, 0
            )
        finally:
            evaluator.close()
        assert elite_id == 4  # first in ranked candidate order

    def test_rejects_too_few_candidates(self):
        model = SpnModel.create(TINY_SHAPE, seed=3)
        genome = Genome(CONNECTION_MODE, np.zeros(TINY_SHAPE.n_connections))
        evaluator = self._evaluator(FixedLengthEnv(obs_dim=4), model)
        try:
            with pytest.raises(ValueError, match="candidates"):
                select_elite([(0, genome)], model, evaluator, tiny_cfg(), 0)
        finally:
            evaluator.close()


class TestRunEvolution:
    def test_single_generation_report(self):
        cfg = tiny_cfg(generations=1)
        model = SpnModel.create(TINY_SHAPE, seed=0)
        result = run_evolution(cfg, model, EnvConfig.parse("cartpole"), seed=0)
        assert len(result.reports) == 1
        assert len(result.elites) == 1
        report = result.reports[0]
        assert report.cum_steps <= (cfg.population + 100) * 500
        assert report.best >= report.mean

    def test_step_accounting_on_fixed_length_env(self):
        # every episode runs the full T steps, so each generation consumes
        # exactly population*T + candidates*episodes*T environment steps
        T = 7
        cfg = GaConfig(generations=3, population=10, elite_candidates=10,
                       elite_episodes=10)
        model = SpnModel.create(NetworkShape(3, 8, 2), seed=1)
        env_cfg = LiveEnvConfig(FixedLengthEnv(obs_dim=3, max_steps=T))
        result = run_evolution(cfg, model, env_cfg, seed=1)
        per_gen = cfg.population * T + 100 * T
        for i, report in enumerate(result.reports):
            assert report.cum_steps == (i + 1) * per_gen

    def test_cumulative_steps_strictly_increase(self):
        cfg = tiny_cfg(generations=3)
        model = SpnModel.create(TINY_SHAPE, seed=5)
        result = run_evolution(cfg, model, EnvConfig.parse("cartpole"), seed=5)
        steps = [r.cum_steps for r in result.reports]
        assert all(b > a for a, b in zip(steps, steps[1:]))

    def test_zero_sigma_keeps_best_from_drifting_down(self):
        # children are exact copies of parents, and the env is deterministic
        # and seed-independent, so the best return can never decrease
        cfg = GaConfig(generations=4, population=6, sigma=0.0,
                       elite_candidates=2, elite_episodes=1)
        model = SpnModel.create(NetworkShape(3, 8, 2), seed=2)
        env_cfg = LiveEnvConfig(ActionRewardEnv(obs_dim=3, max_steps=5))
        result = run_evolution(cfg, model, env_cfg, seed=2)
        best = [r.best for r in result.reports]
        assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))

    def test_same_seed_bitwise_identical(self):
        cfg = tiny_cfg()
        model = SpnModel.create(TINY_SHAPE, seed=4)
        a = run_evolution(cfg, model, EnvConfig.parse("cartpole"), seed=4)
        b = run_evolution(cfg, model, EnvConfig.parse("cartpole"), seed=4)
        assert a.reports == b.reports

    @pytest.mark.parametrize("workers", [4, 16])
    def test_worker_count_does_not_change_results(self, workers):
        cfg = tiny_cfg()
        model = SpnModel.create(TINY_SHAPE, seed=6)
        sequential = run_evolution(cfg, model, EnvConfig.parse("cartpole"), seed=6)
        parallel = run_evolution(
            cfg, model, EnvConfig.parse("cartpole"), seed=6, workers=workers
        )
        assert sequential.reports == parallel.reports
        for a, b in zip(sequential.elites, parallel.elites):
            assert np.array_equal(a.genome.values, b.genome.values)

    def test_weights_mode_runs_same_loop(self):
        cfg = tiny_cfg()
        model = SpnModel.create(TINY_SHAPE, seed=7)
        result = run_evolution(
            cfg, model, EnvConfig.parse("cartpole"), seed=7, mode=WEIGHT_MODE
        )
        assert len(result.reports) == cfg.generations
        assert all(e.genome.mode == WEIGHT_MODE for e in result.elites)

    def test_target_return_stops_early(self):
        T = 5
        cfg = GaConfig(generations=50, population=4, elite_candidates=2,
                       elite_episodes=1, target_return=float(T))
        model = SpnModel.create(NetworkShape(3, 8, 2), seed=3)
        env_cfg = LiveEnvConfig(FixedLengthEnv(obs_dim=3, max_steps=T))
        result = run_evolution(cfg, model, env_cfg, seed=3)
        assert len(result.reports) == 1  # every policy reaches T immediately

    def test_environment_failure_preserves_partial_reports(self):
        class FlakyEnv(FixedLengthEnv):
            calls = 0

            def step(self, action):
                FlakyEnv.calls += 1
                if FlakyEnv.calls > 40:
                    raise ProtocolError("connection lost")
                return super().step(action)

        cfg = GaConfig(generations=10, population=4, elite_candidates=2,
                       elite_episodes=1)
        model = SpnModel.create(NetworkShape(3, 8, 2), seed=1)
        env_cfg = LiveEnvConfig(FlakyEnv(obs_dim=3, max_steps=4))
        with pytest.raises(EvolutionAborted) as err:
            run_evolution(cfg, model, env_cfg, seed=1)
        assert len(err.value.partial.reports) >= 1

    def test_population_invariants_every_generation(self):
        from spikewire.evolution import _next_generation

        cfg = GaConfig(population=12, truncation_ratio=0.25)
        pop = init_population(cfg, TINY_SHAPE, seed=0)
        assert len(pop) == 12
        assert cfg.n_parents == 3
        nxt = _next_generation(pop, [0, 1, 2], cfg, seed=0, gen=1)
        assert len(nxt) == 12
        # each consecutive pair is mirrored around its parent
        for k in range(6):
            mean = (nxt[2 * k].values + nxt[2 * k + 1].values) / 2.0
            assert any(
                np.abs(mean - pop[p].values).max() < 1e-15 for p in (0, 1, 2)
            )


class TestGenomeTypes:
    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError, match="mode"):
            Genome("sparse", np.zeros(4))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            Genome(CONNECTION_MODE, np.array([1.0, np.inf]))

    def test_matrices_shape_check(self):
        genome = Genome(CONNECTION_MODE, np.zeros(10))
        with pytest.raises(ValueError, match="entries"):
            genome.matrices(TINY_SHAPE)

    def test_ga_config_validation(self):
        with pytest.raises(ValueError):
            GaConfig(truncation_ratio=0.0)
        with pytest.raises(ValueError):
            GaConfig(elite_candidates=300, population=200)
        with pytest.raises(ValueError):
            GaConfig(generations=0)
