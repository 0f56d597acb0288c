"""Command-line front end: evolve, eval, energy-report, plot.

Configuration is a single JSON document; every default encodes the
reference setup, so an empty config runs the standard cart-pole experiment.
All commands exit 0 on success and nonzero with a one-line ``error: ...``
message otherwise.
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from pathlib import Path

import numpy as np

from . import rng
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .energy import (
    EfficiencyInputs,
    benchmark_report,
    data_efficiency,
    format_report,
    measure_rate,
    report_row,
)
from .environments import EnvConfig, rollout
from .evolution import (
    EvolutionAborted,
    GaConfig,
    SpnModel,
    policy_from_genome,
    run_evolution,
)
from .network import NetworkShape, NeuronConfig, SpikeTally

CSV_COLUMNS = ("run", "generation", "best", "mean", "std", "elite_mean", "cum_steps", "mean_rate")

CONFIG_DEFAULTS = {
    "env": "cartpole",
    "mode": "connections",
    "runs": 10,
    "seed": 0,
    "workers": 1,
    "out_dir": "runs/experiment",
    "generations": 100,
    "population": 200,
    "sigma": 0.01,
    "truncation_ratio": 0.25,
    "score_threshold": 0.5,
    "elite_candidates": 10,
    "elite_episodes": 10,
    "hidden": 64,
    "time_window": 4,
    "decay": 0.75,
    "v_th": 0.5,
    "v_rest": 0.0,
    "v_reset": 0.0,
    "weight_scale": 1.0,
    "target_return": None,
}


class CliError(RuntimeError):
    pass


def load_config(path: str | None) -> dict:
    config = dict(CONFIG_DEFAULTS)
    if path is not None:
        text = Path(path).read_text().strip()
        user = json.loads(text) if text else {}
        if not isinstance(user, dict):
            raise CliError(f"config {path} must be a JSON object")
        unknown = set(user) - set(CONFIG_DEFAULTS)
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        config.update(user)
    return config


def _ga_config(config: dict) -> GaConfig:
    return GaConfig(
        generations=config["generations"],
        population=config["population"],
        sigma=config["sigma"],
        truncation_ratio=config["truncation_ratio"],
        score_threshold=config["score_threshold"],
        elite_candidates=config["elite_candidates"],
        elite_episodes=config["elite_episodes"],
        target_return=config["target_return"],
    )


def _neuron_config(config: dict) -> NeuronConfig:
    return NeuronConfig(
        time_window=config["time_window"],
        decay=config["decay"],
        v_th=config["v_th"],
        v_rest=config["v_rest"],
        v_reset=config["v_reset"],
    )


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cmd_evolve(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.workers is not None:
        config["workers"] = args.workers
    if args.out is not None:
        config["out_dir"] = args.out
    if args.runs is not None:
        config["runs"] = args.runs
    if args.env is not None:
        config["env"] = args.env
    if config["runs"] < 1:
        raise CliError("runs must be >= 1")

    env_cfg = EnvConfig.parse(config["env"])
    probe = env_cfg.make()
    spec = probe.spec
    probe.close()
    shape = NetworkShape(spec.obs_dim, config["hidden"], spec.act_dim)
    ga = _ga_config(config)
    neuron = _neuron_config(config)

    out_dir = Path(config["out_dir"])
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    resolved = dict(config)
    resolved["obs_dim"] = spec.obs_dim
    resolved["act_dim"] = spec.act_dim
    (out_dir / "config.json").write_text(json.dumps(resolved, indent=2) + "\n")

    rows: list[tuple] = []
    run_summaries: list[dict] = []
    aborted: EvolutionAborted | None = None
    try:
        for run in range(config["runs"]):
            run_seed = rng.derive_seed(config["seed"], rng.RUN, run)
            model = SpnModel.create(shape, run_seed, neuron, config["weight_scale"])
            try:
                result = run_evolution(
                    ga,
                    model,
                    env_cfg,
                    run_seed,
                    mode=config["mode"],
                    workers=config["workers"],
                )
            except EvolutionAborted as exc:
                result = exc.partial
                aborted = exc
            for report in result.reports:
                rows.append(
                    (
                        run,
                        report.generation,
                        report.best,
                        report.mean,
                        report.std,
                        report.elite_mean,
                        report.cum_steps,
                        report.mean_rate,
                    )
                )
            for elite in result.elites:
                save_checkpoint(
                    ckpt_dir / f"run{run:02d}_gen{elite.generation:03d}.json",
                    Checkpoint(
                        model=model,
                        genome=elite.genome,
                        score_threshold=config["score_threshold"],
                        env=env_cfg.label(),
                        generation=elite.generation,
                        elite_mean_return=elite.mean_return,
                        master_seed=run_seed,
                        ga=ga,
                    ),
                )
            if result.reports:
                last = result.reports[-1]
                run_summaries.append({
                    "run": run,
                    "seed": run_seed,
                    "generations": len(result.reports),
                    "final_elite_mean": last.elite_mean,
                    "best_return": max(r.best for r in result.reports),
                    "cum_steps": last.cum_steps,
                })
                print(
                    f"run {run}: {len(result.reports)} generations, "
                    f"final elite mean {last.elite_mean:.1f}, {last.cum_steps} env steps"
                )
            if aborted is not None:
                break
    finally:
        _write_csv(out_dir / "curves.csv", rows)
        _write_summary(out_dir / "summary.json", run_summaries, aborted)

    if aborted is not None:
        raise CliError(f"environment failure, partial results saved: {aborted}")

    _print_cross_run_summary(rows)
    print(f"artifacts: {out_dir / 'curves.csv'} ({len(rows)} rows), {ckpt_dir}/")
    return 0


def _write_csv(path: Path, rows: list[tuple]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])


def _write_summary(path: Path, run_summaries: list[dict], aborted) -> None:
    finals = [s["final_elite_mean"] for s in run_summaries]
    doc = {
        "completed_runs": len(run_summaries),
        "aborted": None if aborted is None else str(aborted),
        "final_elite_mean": {
            "mean": statistics.fmean(finals) if finals else None,
            "std": statistics.pstdev(finals) if len(finals) > 1 else 0.0,
        },
        "total_env_steps": sum(s["cum_steps"] for s in run_summaries),
        "runs": run_summaries,
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")


def _print_cross_run_summary(rows: list[tuple]) -> None:
    by_gen: dict[int, list[float]] = {}
    for row in rows:
        by_gen.setdefault(int(row[1]), []).append(float(row[5]))
    print("generation  elite_mean  half_std  runs")
    for gen in sorted(by_gen):
        values = by_gen[gen]
        half_std = 0.5 * (statistics.pstdev(values) if len(values) > 1 else 0.0)
        print(f"{gen:>10}  {statistics.fmean(values):>10.2f}  {half_std:>8.2f}  {len(values):>4}")


def cmd_eval(args) -> int:
    if args.episodes < 1:
        raise CliError("episodes must be >= 1")
    ckpt = load_checkpoint(args.ckpt)
    env_name = args.env if args.env is not None else ckpt.env
    env = EnvConfig.parse(env_name).make()
    spec = env.spec
    shape = ckpt.model.shape
    if spec.obs_dim != shape.n or spec.act_dim != shape.m:
        raise CliError(
            f"shape mismatch: checkpoint expects obs_dim={shape.n}, act_dim={shape.m} "
            f"(env {ckpt.env!r}); environment {spec.name!r} provides "
            f"obs_dim={spec.obs_dim}, act_dim={spec.act_dim}"
        )
    policy = policy_from_genome(ckpt.model, ckpt.genome, ckpt.score_threshold, spec.action_kind)
    returns = [rollout(policy, env, args.seed + ep).return_ for ep in range(args.episodes)]
    env.close()
    rate = measure_rate(policy.tally, shape.h)
    mean = statistics.fmean(returns)
    std = statistics.pstdev(returns) if len(returns) > 1 else 0.0
    print(
        f"episodes {args.episodes}  mean {mean:.2f}  std {std:.2f}  "
        f"spike_rate {rate:.4f} (measured)"
    )
    return 0


def cmd_energy_report(args) -> int:
    if args.run_dir is not None:
        rows = [_run_dir_row(Path(args.run_dir))]
    elif args.shape is not None:
        if args.rate is None and args.spn_energy is None:
            raise CliError("manual mode needs --rate or --spn-energy")
        n, h, m = args.shape
        shape = NetworkShape(n, h, m)
        _, total, gamma = data_efficiency(
            EfficiencyInputs(args.generations, args.population, args.episode_len)
        )
        rows = [
            report_row(
                args.task,
                shape,
                spn_energy=args.spn_energy,
                rate_middle=args.rate,
                search_forward=total,
                gamma=gamma,
                rate_measured=args.rate is not None,
            )
        ]
    else:
        rows = benchmark_report()
    print(format_report(rows))
    return 0


def _run_dir_row(run_dir: Path):
    config_path = run_dir / "config.json"
    csv_path = run_dir / "curves.csv"
    if not config_path.exists() or not csv_path.exists():
        raise CliError(f"{run_dir} does not contain config.json and curves.csv")
    config = json.loads(config_path.read_text())
    for key in ("obs_dim", "act_dim", "hidden"):
        if key not in config:
            raise CliError(f"run config is missing {key!r}")
    shape = NetworkShape(config["obs_dim"], config["hidden"], config["act_dim"])

    tally = SpikeTally()
    total_steps = 0
    n_runs = 0
    with open(csv_path) as f:
        last_cum = {}
        for row in csv.DictReader(f):
            run = int(row["run"])
            cum = int(row["cum_steps"])
            gen_steps = cum - last_cum.get(run, 0)
            last_cum[run] = cum
            # one network inference per environment step, so the per-generation
            # rate can be folded back into an exact overall spike count
            spikes = round(float(row["mean_rate"]) * shape.h * gen_steps)
            tally = tally.combine(SpikeTally(spikes, gen_steps))
        total_steps = sum(last_cum.values())
        n_runs = len(last_cum)
    if n_runs == 0:
        raise CliError(f"{csv_path} has no data rows")
    rate = measure_rate(tally, shape.h)
    steps_per_run = total_steps / n_runs
    return report_row(
        config.get("env", "run"),
        shape,
        rate_middle=rate,
        search_forward=steps_per_run,
        gamma=steps_per_run / 1e6,
        rate_measured=True,
    )


def curve_stats(rows: list[dict], metric: str) -> tuple[list[int], np.ndarray, np.ndarray]:
    """Per-generation cross-run aggregation: mean and half standard deviation."""
    by_gen: dict[int, list[float]] = {}
    for row in rows:
        by_gen.setdefault(int(row["generation"]), []).append(float(row[metric]))
    gens = sorted(by_gen)
    mean = np.array([statistics.fmean(by_gen[g]) for g in gens])
    half = np.array(
        [0.5 * (statistics.pstdev(by_gen[g]) if len(by_gen[g]) > 1 else 0.0) for g in gens]
    )
    return gens, mean, half


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "spikewire"

    with open(args.csv) as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise CliError(f"{args.csv} has no data rows")

    metrics = ("best", "elite_mean") if args.metric == "all" else (args.metric,)
    out = Path(args.out)
    written = []
    for metric in metrics:
        gens, mean, half = curve_stats(rows, metric)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(gens, mean, color="#6a3d9a", label=f"mean {metric}")
        ax.fill_between(gens, mean - half, mean + half, color="#6a3d9a", alpha=0.3,
                        label="half std over runs")
        ax.set_xlabel("generation")
        ax.set_ylabel(metric)
        ax.legend()
        fig.tight_layout()
        target = out if len(metrics) == 1 else out.with_name(f"{out.stem}_{metric}{out.suffix}")
        fig.savefig(target, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(str(target))
    print("wrote " + " ".join(written))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikewire",
        description="Evolve spiking-network wiring with a genetic algorithm",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    evolve = sub.add_parser("evolve", help="run a multi-run evolution experiment")
    evolve.add_argument("--config", help="JSON config file (defaults reproduce cart-pole)")
    evolve.add_argument("--seed", type=int, help="master seed (overrides config)")
    evolve.add_argument("--workers", type=int, help="evaluation worker processes")
    evolve.add_argument("--runs", type=int, help="number of independent runs")
    evolve.add_argument("--env", help="environment (name, cmd:..., tcp:host:port)")
    evolve.add_argument("--out", help="output directory")
    evolve.set_defaults(func=cmd_evolve)

    ev = sub.add_parser("eval", help="evaluate a saved elite checkpoint")
    ev.add_argument("--ckpt", required=True)
    ev.add_argument("--env", help="environment override (defaults to checkpoint's)")
    ev.add_argument("--episodes", type=int, default=10)
    ev.add_argument("--seed", type=int, default=0)
    ev.set_defaults(func=cmd_eval)

    er = sub.add_parser("energy-report", help="inference/optimisation energy table")
    er.add_argument("--run-dir", help="completed evolve output directory")
    er.add_argument("--manual", dest="shape", nargs=3, type=int,
                    metavar=("N", "H", "M"), help="network shape for a manual row")
    er.add_argument("--task", default="manual", help="row label for manual mode")
    er.add_argument("--rate", type=float, help="measured hidden firing rate")
    er.add_argument("--spn-energy", type=float, help="known spiking inference energy (pJ)")
    er.add_argument("--generations", type=int, default=100)
    er.add_argument("--population", type=int, default=200)
    er.add_argument("--episode-len", type=int, default=1000)
    er.set_defaults(func=cmd_energy_report)

    plot = sub.add_parser("plot", help="learning-curve chart (SVG) from a curves.csv")
    plot.add_argument("--csv", required=True)
    plot.add_argument("--out", required=True)
    plot.add_argument("--metric", choices=("best", "elite_mean", "all"), default="all")
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
