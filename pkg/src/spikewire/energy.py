"""Operation counting and energy/data-efficiency accounting.

Dense layers cost one multiply-accumulate (MAC) per synapse per inference.
Spiking layers cost accumulate-only (AC) operations, and only when a spike
arrives, so their operation count scales with the measured firing rate.
The sensory stage of the spiking network receives analog inputs and is
counted as dense MACs, once per inference (not once per simulation step:
that is the only accounting consistent with the reference tables the
constants come from).

Optimisation energy charges the dense baseline for forward and backward
passes of both its policy and value networks (backward priced equal to
forward); the evolutionary side only ever runs forward passes.

All energies are in picojoules, using 45nm CMOS constants.
"""

from __future__ import annotations

from dataclasses import dataclass

from .network import NetworkShape
from .validation import check_positive_int


@dataclass(frozen=True)
class EnergyConstants:
    """Per-operation energies (pJ): 32-bit MAC vs accumulate-only."""

    e_mac: float = 4.6
    e_ac: float = 0.9

    def __post_init__(self):
        if self.e_mac <= 0 or self.e_ac <= 0:
            raise ValueError("energy constants must be positive")


@dataclass(frozen=True)
class OptimizationCounts:
    """Forward/backward pass counts consumed during one optimisation."""

    policy_forward: float
    policy_backward: float
    value_forward: float
    value_backward: float
    search_forward: float

    def __post_init__(self):
        for name, v in vars(self).items():
            if v < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class EfficiencyInputs:
    """Inputs for the interaction-step accounting of one evolution run."""

    generations: int
    population: int = 200
    episode_len: int = 1000
    reference_steps: float = 1e6


def dpn_inference_energy(
    shape: NetworkShape, value_net: bool = False, k: EnergyConstants = EnergyConstants()
) -> float:
    """Dense-network inference energy: every synapse is one MAC.

    ``value_net`` swaps the motor layer for a single output unit.
    """
    m = 1 if value_net else shape.m
    return (shape.n * shape.h + shape.h * m) * k.e_mac


def spn_inference_energy(
    shape: NetworkShape, rate_middle: float, k: EnergyConstants = EnergyConstants()
) -> float:
    """Spiking-network inference energy at a given hidden firing rate.

    The analog sensory stage costs dense MACs once per inference; the
    hidden->motor stage costs ACs scaled by spikes per hidden neuron per
    inference.
    """
    if rate_middle < 0:
        raise ValueError("rate_middle must be non-negative")
    return shape.n * shape.h * k.e_mac + rate_middle * shape.h * shape.m * k.e_ac


def measure_rate(tally, h: int) -> float:
    """Spikes per hidden neuron per inference from an accumulated tally."""
    check_positive_int(h, "h")
    if tally.inferences < 1:
        raise ValueError("tally covers zero inferences")
    return tally.middle_spikes / (h * tally.inferences)


def optimization_energy(
    counts: OptimizationCounts, e_dpn: float, e_dvn: float, e_spn: float
) -> tuple[float, float]:
    """Total optimisation energy for the dense baseline and the search.

    Returns ``(E_baseline, E_search)`` where the baseline pays
    ``e_dpn * (forward + backward) + e_dvn * (forward + backward)`` and the
    search pays ``e_spn * search_forward``.
    """
    e_baseline = e_dpn * (counts.policy_forward + counts.policy_backward) + e_dvn * (
        counts.value_forward + counts.value_backward
    )
    e_search = e_spn * counts.search_forward
    return e_baseline, e_search


def data_efficiency(inputs: EfficiencyInputs) -> tuple[float, float, float]:
    """Interaction-step accounting: (steps/generation, total steps, ratio).

    Each generation consumes one fitness episode per individual plus
    10 x 10 elite-confirmation episodes; the ratio compares total steps to
    the reference budget (1e6 by default).
    """
    if min(inputs.generations, inputs.population, inputs.episode_len) < 1:
        raise ValueError("efficiency inputs must be positive")
    per_generation = inputs.population * inputs.episode_len + 100 * inputs.episode_len
    total = inputs.generations * per_generation
    return float(per_generation), float(total), total / inputs.reference_steps


@dataclass(frozen=True)
class BenchmarkTask:
    """Published reference point: task shape plus measured counts.

    ``spn_energy`` is the reported spiking inference energy (pJ) and
    ``generations`` the generation count at which the search matched the
    dense baseline trained for 1e6 steps.
    """

    name: str
    shape: NetworkShape
    spn_energy: float
    generations: int


# PPO-style baseline pass counts for a 1e6-step training run:
# 1e6 data-collection forwards plus 25 epochs per 1000 steps.
BASELINE_POLICY_FORWARD = 2.6e7
BASELINE_POLICY_BACKWARD = 2.5e7
BASELINE_VALUE_FORWARD = 2.6e7
BASELINE_VALUE_BACKWARD = 2.5e7

BENCHMARK_TASKS = (
    BenchmarkTask("HalfCheetah-v2", NetworkShape(17, 64, 6), 5.2e3, 61),
    BenchmarkTask("Swimmer-v2", NetworkShape(8, 64, 2), 2.41e3, 18),
    BenchmarkTask("HumanoidStandup-v2", NetworkShape(376, 64, 17), 1.1e5, 4),
)

REPORT_COLUMNS = (
    "task",
    "E_infer_dpn",
    "E_infer_spn",
    "infer_ratio",
    "E_optim_ppo",
    "E_optim_ga",
    "optim_ratio",
    "gamma",
)


@dataclass(frozen=True)
class ReportRow:
    task: str
    e_infer_dpn: float
    e_infer_spn: float
    e_optim_ppo: float
    e_optim_ga: float
    gamma: float
    rate_measured: bool = False

    @property
    def infer_ratio(self) -> float:
        return self.e_infer_dpn / self.e_infer_spn

    @property
    def optim_ratio(self) -> float:
        return self.e_optim_ppo / self.e_optim_ga


def report_row(
    name: str,
    shape: NetworkShape,
    *,
    spn_energy: float | None = None,
    rate_middle: float | None = None,
    search_forward: float,
    gamma: float,
    k: EnergyConstants = EnergyConstants(),
    rate_measured: bool = False,
) -> ReportRow:
    """Assemble one report row from either a known energy or a firing rate."""
    if (spn_energy is None) == (rate_middle is None):
        raise ValueError("provide exactly one of spn_energy / rate_middle")
    if spn_energy is None:
        spn_energy = spn_inference_energy(shape, rate_middle, k)
    e_dpn = dpn_inference_energy(shape, k=k)
    e_dvn = dpn_inference_energy(shape, value_net=True, k=k)
    counts = OptimizationCounts(
        BASELINE_POLICY_FORWARD,
        BASELINE_POLICY_BACKWARD,
        BASELINE_VALUE_FORWARD,
        BASELINE_VALUE_BACKWARD,
        search_forward,
    )
    e_ppo, e_ga = optimization_energy(counts, e_dpn, e_dvn, spn_energy)
    return ReportRow(name, e_dpn, spn_energy, e_ppo, e_ga, gamma, rate_measured)


def benchmark_report(k: EnergyConstants = EnergyConstants()) -> list[ReportRow]:
    """Report rows for the built-in reference tasks, from published counts."""
    rows = []
    for task in BENCHMARK_TASKS:
        _, total, gamma = data_efficiency(EfficiencyInputs(task.generations))
        rows.append(
            report_row(
                task.name,
                task.shape,
                spn_energy=task.spn_energy,
                search_forward=total,
                gamma=gamma,
                k=k,
            )
        )
    return rows


def format_report(rows: list[ReportRow]) -> str:
    """Fixed-width text table over REPORT_COLUMNS."""
    header = (
        f"{'task':<22} {'E_infer_dpn':>12} {'E_infer_spn':>12} {'ratio':>6} "
        f"{'E_optim_ppo':>12} {'E_optim_ga':>12} {'ratio':>6} {'gamma':>6}"
    )
    lines = [header, "-" * len(header)]
    for r in rows:
        note = " (measured rate)" if r.rate_measured else ""
        lines.append(
            f"{r.task:<22} {r.e_infer_dpn:>12.6g} {r.e_infer_spn:>12.6g} "
            f"{r.infer_ratio:>6.1f} {r.e_optim_ppo:>12.6g} {r.e_optim_ga:>12.6g} "
            f"{r.optim_ratio:>6.1f} {r.gamma:>6.3g}{note}"
        )
    return "\n".join(lines)
