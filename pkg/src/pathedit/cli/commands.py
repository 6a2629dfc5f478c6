"""Subcommand implementations for the PathEdit harness.

Each ``run_*`` function takes a parsed config and a store for its outputs and
returns a process exit code.
"""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from ..config.experiment import ExperimentConfig
from ..config.settings import EXIT_CODES
from ..core.baseline import ddim_edit, ddim_reconstruct
from ..core.benchmark import BenchmarkInstance, make_benchmark, make_instance
from ..core.denoiser import Denoiser, GuidedDenoiser, PosteriorMeanDenoiser
from ..core.editor import EditConfig, Trajectory, direct_path_edit
from ..core.errors import ConfigError, VerificationError
from ..core.metrics import evaluate_edit, mse, path_length, polyline_length
from ..core.registry import DistributionRegistry
from ..core.store import InstanceResult, RunResult, RunStore
from ..core.verify import adapter_suite, gradient_suite, mc_coverage_suite, shared_noise_suite
from ..ui import display
from ..utils.figures import encode_pgm, render_trajectory_svg

logger = logging.getLogger(__name__)

InstanceFn = Callable[[BenchmarkInstance], InstanceResult]


@dataclass(frozen=True)
class RunOptions:
    trace: bool = True
    quiet: bool = False


@dataclass
class Harness:
    """Objects shared by every instance of a run."""

    config: ExperimentConfig
    registry: DistributionRegistry
    denoiser: Denoiser

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "Harness":
        registry = config.load_registry()
        return cls(config, registry, PosteriorMeanDenoiser(registry, config.schedule))

    @property
    def target(self):
        return self.registry.get(self.config.benchmark.tar_distribution)

    def instances(self) -> List[BenchmarkInstance]:
        bench = self.config.benchmark
        return make_benchmark(
            bench.n_instances, bench.src_distribution, bench.tar_distribution, self.config.seed, self.registry
        )

    def edit(self, instance: BenchmarkInstance, edit_config: EditConfig) -> Tuple[np.ndarray, Trajectory]:
        return direct_path_edit(
            self.denoiser, instance.z0_src, instance.p_src, instance.p_tar,
            edit_config.with_seed(instance.seed), self.config.schedule,
        )

    def path_method(self, edit_config: EditConfig) -> InstanceFn:
        """Per-instance scorer for the direct-path editor under ``edit_config``."""
        def score(instance: BenchmarkInstance) -> InstanceResult:
            output, trajectory = self.edit(instance, edit_config)
            report = evaluate_edit(
                instance.z0_src, output, self.target, path_length(trajectory), self.config.dynamic_range
            )
            reconstruction, _ = direct_path_edit(
                self.denoiser, instance.z0_src, instance.p_src, instance.p_src,
                edit_config.with_seed(instance.seed), self.config.schedule,
            )
            return InstanceResult(instance.instance_id, instance.seed, report, mse(reconstruction, instance.z0_src))
        return score

    def ddim_method(self) -> InstanceFn:
        """Per-instance scorer for the DDIM inversion baseline."""
        src_denoiser = tar_denoiser = self.denoiser
        guidance = self.config.edit_config().guidance
        if guidance.uncond is not None:
            src_denoiser = GuidedDenoiser(self.denoiser, guidance.uncond, guidance.src_scale)
            tar_denoiser = GuidedDenoiser(self.denoiser, guidance.uncond, guidance.tar_scale)
        grid = self.config.make_grid()
        schedule = self.config.schedule

        def score(instance: BenchmarkInstance) -> InstanceResult:
            output, states = ddim_edit(
                src_denoiser, instance.p_src, instance.p_tar, instance.z0_src, grid, schedule,
                return_path=True, tar_denoiser=tar_denoiser,
            )
            report = evaluate_edit(
                instance.z0_src, output, self.target, polyline_length(states), self.config.dynamic_range
            )
            reconstruction = ddim_reconstruct(src_denoiser, instance.p_src, instance.z0_src, grid, schedule)
            return InstanceResult(instance.instance_id, instance.seed, report, mse(reconstruction, instance.z0_src))
        return score


def run_instances(
    name: str,
    score: InstanceFn,
    instances: Sequence[BenchmarkInstance],
    config_echo: Dict,
    workers: int = 1,
) -> RunResult:
    """Score every instance, in parallel when ``workers`` > 1."""
    def timed(instance: BenchmarkInstance) -> Tuple[InstanceResult, float]:
        start = time.perf_counter()
        result = score(instance)
        return result, time.perf_counter() - start

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(timed, instances))
    else:
        outcomes = [timed(instance) for instance in instances]
    logger.info("Run %s: scored %d instances", name, len(outcomes))
    return RunResult(
        name=name,
        config=config_echo,
        instances=[result for result, _ in outcomes],
        timings={result.instance_id: seconds for result, seconds in outcomes},
    )


def run_edit(config: ExperimentConfig, store: RunStore, options: RunOptions) -> int:
    """Edit one benchmark instance and write its trace and metrics."""
    harness = Harness.from_config(config)
    bench = config.benchmark
    instance = make_instance(
        config.edit_instance, bench.src_distribution, bench.tar_distribution, config.seed, harness.registry
    )
    output, trajectory = harness.edit(instance, config.edit_config())
    report = evaluate_edit(instance.z0_src, output, harness.target, path_length(trajectory), config.dynamic_range)

    written = {}
    if options.trace:
        written["trace"] = store.write_trace("edit_trace.jsonl", trajectory)
    written["metrics"] = store.write_json("edit_metrics.json", {
        "instance_id": instance.instance_id,
        "seed": instance.seed,
        "metrics": report.to_dict(),
        "config": config.to_dict(),
    })
    if not options.quiet:
        display.display_metric_report(report, f"Edit of instance {instance.instance_id}")
        display.display_written(written)
    return EXIT_CODES["ok"]


def run_sweep(config: ExperimentConfig, store: RunStore, options: RunOptions) -> int:
    """Run the benchmark for every (active_steps, strength) cell."""
    harness = Harness.from_config(config)
    instances = harness.instances()
    base = config.edit_config()
    rows = []
    summary = []
    for active_steps in config.sweep.active_steps:
        for strength in config.sweep.strength:
            cell = base.with_reg(active_steps=active_steps, strength=strength)
            name = f"sweep_m{active_steps}_s{strength:g}"
            echo = {**config.to_dict(), "reg": cell.reg.to_dict()}
            result = run_instances(name, harness.path_method(cell), instances, echo, config.workers)
            store.write_result(name, result)
            if options.trace and instances:
                _, trajectory = harness.edit(instances[0], cell)
                store.write_trace(f"{name}_trace.jsonl", trajectory)
            rows.append((f"m={active_steps} s={strength:g}", result))
            summary.append({
                "active_steps": active_steps,
                "strength": strength,
                "result": f"{name}.json",
                "aggregates": result.aggregates,
            })
    store.write_json("sweep_summary.json", {"cells": summary})
    if not options.quiet:
        display.display_run_table(rows, "Sweep")
    return EXIT_CODES["ok"]


def run_bench(config: ExperimentConfig, store: RunStore, options: RunOptions) -> int:
    """Compare the regularized editor, the unregularized editor and DDIM inversion."""
    harness = Harness.from_config(config)
    instances = harness.instances()
    base = config.edit_config()
    methods = [
        ("regularized", harness.path_method(base)),
        ("direct_path", harness.path_method(base.with_reg(strength=0.0))),
        ("ddim_inversion", harness.ddim_method()),
    ]
    rows = []
    summary = []
    for name, score in methods:
        result = run_instances(f"bench_{name}", score, instances, config.to_dict(), config.workers)
        store.write_result(f"bench_{name}", result)
        rows.append((name, result))
        summary.append({
            "method": name,
            "result": f"bench_{name}.json",
            "seeds": [r.seed for r in result.instances],
            "aggregates": result.aggregates,
        })
    store.write_json("bench_summary.json", {"methods": summary})
    if not options.quiet:
        display.display_run_table(rows, "Benchmark")
    return EXIT_CODES["ok"]


def run_verify(config: ExperimentConfig, store: RunStore, options: RunOptions) -> int:
    """Run the verification suites.

    Raises:
        VerificationError: If any suite fails, after its report is written
    """
    verify = config.verify
    schedule = config.schedule
    reports = [
        gradient_suite(schedule, verify.n_states, verify.tolerance, verify.fd_step, config.seed),
        mc_coverage_suite(schedule, verify.mc_triples, verify.mc_samples, config.seed),
        adapter_suite(schedule, seed=config.seed),
        shared_noise_suite(schedule, seed=config.seed),
    ]
    store.write_json("verify_report.json", {
        "suites": [report.to_dict() for report in reports],
    })
    if not options.quiet:
        display.display_suite_reports(reports)
    failed = [r.name for r in reports if not r.passed]
    if failed:
        raise VerificationError(f"Verification failed: {', '.join(failed)}")
    return EXIT_CODES["ok"]


def run_plot(config: ExperimentConfig, store: RunStore, options: RunOptions) -> int:
    """Edit one instance and draw it.

    Raises:
        ConfigError: If the latent is neither a 2-D vector nor a grid
    """
    harness = Harness.from_config(config)
    bench = config.benchmark
    instance = make_instance(
        config.edit_instance, bench.src_distribution, bench.tar_distribution, config.seed, harness.registry
    )
    output, trajectory = harness.edit(instance, config.edit_config())
    shape = np.shape(instance.z0_src)

    written = {}
    if shape == (2,):
        svg = render_trajectory_svg(trajectory, title=f"{instance.p_src.label} -> {instance.p_tar.label}")
        written["trajectory"] = store.write_text("trajectory.svg", svg)
    elif len(shape) == 2:
        lo = float(min(instance.z0_src.min(), output.min()))
        hi = float(max(instance.z0_src.max(), output.max()))
        written["source"] = store.write_bytes("source.pgm", encode_pgm(instance.z0_src, (lo, hi)))
        written["output"] = store.write_bytes("output.pgm", encode_pgm(output, (lo, hi)))
    else:
        raise ConfigError(f"Nothing to plot for latents of shape {shape}")
    if not options.quiet:
        display.display_written(written)
    return EXIT_CODES["ok"]


COMMANDS: Dict[str, Callable[[ExperimentConfig, RunStore, RunOptions], int]] = {
    "edit": run_edit,
    "sweep": run_sweep,
    "bench": run_bench,
    "verify": run_verify,
    "plot": run_plot,
}
