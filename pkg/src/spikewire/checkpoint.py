"""Self-describing JSON checkpoints for elite genomes.

A checkpoint carries everything needed to rebuild the runnable policy:
network shape, neuron constants, the fixed-weight seed and scale (plus the
matrices inline when they are small), the genome itself, and enough context
(environment, mode, generation, seed) to reproduce the run.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .evolution import GaConfig, Genome, SpnModel
from .network import FixedWeights, NetworkShape, NeuronConfig

FORMAT = "spikewire-checkpoint-v1"

# Weight matrices above this entry count are stored as seed + scale only.
INLINE_WEIGHT_LIMIT = 16384


@dataclass(frozen=True)
class Checkpoint:
    model: SpnModel
    genome: Genome
    score_threshold: float
    env: str
    generation: int
    elite_mean_return: float
    master_seed: int
    ga: GaConfig | None = None


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    shape = ckpt.model.shape
    weights: dict = {
        "seed": ckpt.model.weight_seed,
        "scale": ckpt.model.weight_scale,
    }
    if shape.n_connections <= INLINE_WEIGHT_LIMIT:
        weights["w1"] = ckpt.model.weights.w1.tolist()
        weights["w2"] = ckpt.model.weights.w2.tolist()
    doc = {
        "format": FORMAT,
        "env": ckpt.env,
        "mode": ckpt.genome.mode,
        "generation": ckpt.generation,
        "elite_mean_return": ckpt.elite_mean_return,
        "master_seed": ckpt.master_seed,
        "score_threshold": ckpt.score_threshold,
        "shape": asdict(shape),
        "neuron": asdict(ckpt.model.neuron),
        "search": asdict(ckpt.ga) if ckpt.ga is not None else None,
        "weights": weights,
        "genome": ckpt.genome.values.tolist(),
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_checkpoint(path) -> Checkpoint:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"corrupt checkpoint {path}: {exc}") from exc
    if doc.get("format") != FORMAT:
        raise ValueError(f"{path} is not a {FORMAT} document")
    try:
        shape = NetworkShape(**doc["shape"])
        neuron = NeuronConfig(**doc["neuron"])
        wdoc = doc["weights"]
        if "w1" in wdoc and "w2" in wdoc:
            weights = FixedWeights(np.asarray(wdoc["w1"]), np.asarray(wdoc["w2"]))
            model = SpnModel(shape, weights, neuron, int(wdoc["seed"]), float(wdoc["scale"]))
        else:
            model = SpnModel.create(
                shape, int(wdoc["seed"]), neuron, float(wdoc["scale"])
            )
        genome = Genome(doc["mode"], np.asarray(doc["genome"], dtype=np.float64))
        genome.matrices(shape)  # shape consistency check
        search = doc.get("search")
        return Checkpoint(
            model=model,
            genome=genome,
            score_threshold=float(doc["score_threshold"]),
            env=str(doc["env"]),
            generation=int(doc["generation"]),
            elite_mean_return=float(doc["elite_mean_return"]),
            master_seed=int(doc["master_seed"]),
            ga=GaConfig(**search) if search is not None else None,
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"corrupt checkpoint {path}: missing field {exc}") from exc
