"""Gradient-free rewiring of spiking policy networks.

A three-layer spiking network with fixed random weights is specialised to a
control task by evolving which synapses exist.  The package bundles the
network dynamics, the genetic search, a built-in cart-pole plus a remote
environment client, and the energy/data-efficiency accounting used to
compare against a conventional dense policy trained by policy gradients.
"""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .energy import (
    BenchmarkTask,
    EfficiencyInputs,
    EnergyConstants,
    OptimizationCounts,
    benchmark_report,
    data_efficiency,
    dpn_inference_energy,
    format_report,
    measure_rate,
    optimization_energy,
    spn_inference_energy,
)
from .environments import (
    CartPole,
    EnvConfig,
    Environment,
    EnvSpec,
    Episode,
    EpisodeError,
    ProtocolError,
    RemoteEnvironment,
    StepResult,
    rollout,
)
from .estimator import GeneticPolicySearch
from .evolution import (
    CONNECTION_MODE,
    WEIGHT_MODE,
    EliteRecord,
    EvolutionAborted,
    EvolutionResult,
    FitnessRecord,
    GaConfig,
    GenerationReport,
    Genome,
    SpnModel,
    evaluate,
    init_population,
    masked_matrices,
    mutate,
    policy_from_genome,
    rank_and_select,
    run_evolution,
    select_elite,
)
from .network import (
    ConnectionMask,
    FixedWeights,
    NetworkShape,
    NeuronConfig,
    SpikeTally,
    SpikingPolicy,
    dense_forward,
    derive_mask,
    discrete_action,
    forward,
    forward_trace,
    init_weights,
)

__version__ = "0.1.0"
