"""Top-level optimization loop: initialize, select, emit, evaluate, insert.

Reproducibility contract: a run is a deterministic function of (problem,
config).  The root seed spawns four independent RNG streams in a fixed
order -- init (tessellation + initial genotypes), weights (direction
weights), emitter (parent selection and mutation sampling), crossover
(partner selection and cut points) -- and all draws happen on the
coordinator in candidate order, so results do not depend on the worker
thread count used for evaluation.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from itertools import product
from typing import Callable

import numpy as np

from .baselines import (
    CmaEmitterState,
    CmaSampleResult,
    OmgMegaConfig,
    cma_me_emit,
    cma_me_update,
    one_point_crossover,
    omg_mega_emit,
    random_point_mutation,
)
from .errors import ConfigError, EmptyArchiveError
from .gide import EntropyTarget, gide_emit_with_diagnostics
from .problems import Genotype, Problem, genotype_from_text, onehot_encode
from .repertoire import Repertoire, Tessellation, build_cvt, build_kmeans_from_data

METHODS = ("me-gide", "map-elites", "omg-mega-proj", "cma-me-proj")
THREADS_ENV_VAR = "QD_DISCRETE_THREADS"

METRICS_COLUMNS = (
    "iteration",
    "evaluations",
    "gradient_evaluations",
    "qd_score",
    "qd_score_offset",
    "coverage",
    "max_fitness",
    "mean_entropy",
    "temperature",
    "solver_iterations",
)


@dataclass
class RunConfig:
    """All loop hyperparameters; defaults are the documented desk-scale values."""

    method: str = "me-gide"
    batch_size: int = 64
    iterations: int = 100
    # me-gide
    alpha: float = 0.4
    shared_temperature: bool = True
    # omg-mega-proj
    sigma_g: float = 10.0
    # cma-me-proj
    sigma_0: float = 0.5
    n_emitters: int = 5
    cma_covariance: str = "full"  # "full" | "diagonal"
    cma_max_full_dim: int = 1024
    # map-elites
    n_flips: int = 1
    # shared
    crossover_fraction: float = 0.0
    init_count: int = 128
    init_file: str | None = None
    seed: int = 0
    cells: int = 128
    tessellation_samples: int | None = None  # default 50 * cells
    tessellation_data_file: str | None = None

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.sigma_g <= 0:
            raise ConfigError(f"sigma_g must be positive, got {self.sigma_g}")
        if self.sigma_0 <= 0:
            raise ConfigError(f"sigma_0 must be positive, got {self.sigma_0}")
        if self.n_emitters < 1:
            raise ConfigError(f"n_emitters must be >= 1, got {self.n_emitters}")
        if self.cma_covariance not in ("full", "diagonal"):
            raise ConfigError(
                f"cma_covariance must be 'full' or 'diagonal', got {self.cma_covariance!r}"
            )
        if self.n_flips < 1:
            raise ConfigError(f"n_flips must be >= 1, got {self.n_flips}")
        if not 0.0 <= self.crossover_fraction <= 1.0:
            raise ConfigError(
                f"crossover_fraction must lie in [0, 1], got {self.crossover_fraction}"
            )
        if self.init_file is None and self.init_count < 1:
            raise ConfigError(f"init_count must be >= 1, got {self.init_count}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.cells < 1:
            raise ConfigError(f"cells must be >= 1, got {self.cells}")
        if self.tessellation_samples is not None and self.tessellation_samples < self.cells:
            raise ConfigError(
                f"tessellation_samples must be >= cells, got {self.tessellation_samples}"
            )


@dataclass
class RunMetrics:
    """Per-iteration traces; column order is frozen and mirrored in metrics.csv."""

    columns: tuple[str, ...] = METRICS_COLUMNS
    rows: list[tuple] = field(default_factory=list)

    def append(self, **values) -> None:
        self.rows.append(tuple(values.get(c) for c in self.columns))

    def column(self, name: str) -> list:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def final(self, name: str):
        return self.column(name)[-1] if self.rows else None

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class RngStreams:
    init: np.random.Generator
    weights: np.random.Generator
    emitter: np.random.Generator
    crossover: np.random.Generator


def spawn_streams(seed: int) -> RngStreams:
    """Four per-purpose generators spawned from the root seed, in fixed order."""
    children = np.random.SeedSequence(seed).spawn(4)
    return RngStreams(*(np.random.default_rng(c) for c in children))


def derive_run_seed(base_seed: int, combo_index: int, seed_index: int) -> int:
    """Documented sweep seed mixing: hash (base_seed, combo_index, seed_index)."""
    ss = np.random.SeedSequence([base_seed, combo_index, seed_index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def worker_count() -> int:
    """Worker cap from the QD_DISCRETE_THREADS environment variable (default 1)."""
    raw = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from exc
    return max(1, n)


def _evaluate_batch(problem: Problem, candidates: list[Genotype], n_workers: int):
    if n_workers <= 1 or len(candidates) < 2:
        return [problem.evaluate(x) for x in candidates]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(problem.evaluate, candidates))


def build_tessellation(problem: Problem, config: RunConfig, rng: np.random.Generator) -> Tessellation:
    """Tessellation for a run: k-means on a data file if given, else CVT.

    Consumes exactly one draw from ``rng`` for the construction seed, so a
    run and the brute-force oracle built from the same config agree.
    """
    tess_seed = int(rng.integers(2**63))
    if config.tessellation_data_file:
        points = np.loadtxt(config.tessellation_data_file, delimiter=",", ndmin=2)
        return build_kmeans_from_data(points, config.cells, seed=tess_seed)
    return build_cvt(
        problem.spec.descriptor_bounds,
        config.cells,
        n_samples=config.tessellation_samples,
        seed=tess_seed,
    )


def _initial_genotypes(problem: Problem, config: RunConfig, rng: np.random.Generator) -> list[Genotype]:
    spec = problem.spec
    if config.init_file:
        genotypes = []
        with open(config.init_file, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    genotypes.append(genotype_from_text(line, spec))
        if not genotypes:
            raise ConfigError(f"init file {config.init_file!r} contains no genotypes")
        return genotypes
    draws = rng.integers(0, spec.K, size=(config.init_count, spec.m))
    return [draws[i] for i in range(config.init_count)]


def initialize(problem: Problem, config: RunConfig, rng: np.random.Generator) -> Repertoire:
    """Build the tessellation, evaluate the initial population, fill the archive."""
    tessellation = build_tessellation(problem, config, rng)
    repertoire = Repertoire(tessellation, problem.spec.m)
    for x in _initial_genotypes(problem, config, rng):
        repertoire.try_insert(x, problem.evaluate(x))
    if not np.any(repertoire.occupied):
        raise EmptyArchiveError("initialization produced no occupied cells")
    return repertoire


def _emit_candidates(
    problem: Problem,
    config: RunConfig,
    repertoire: Repertoire,
    emitters: list[CmaEmitterState],
    streams: RngStreams,
    n_emit: int,
    warm_temperature: float | None,
):
    """Emitter-half candidates plus (gide diagnostics, cma bookkeeping, gradient evals)."""
    spec = problem.spec
    diagnostics = None
    bookkeeping = None
    gradient_evals = 0

    if n_emit == 0:
        return [], diagnostics, bookkeeping, gradient_evals

    if config.method == "me-gide":
        parents = repertoire.sample_uniform(n_emit, streams.emitter)
        weights = [streams.weights.normal(size=1 + spec.d) for _ in parents]
        bundles = [problem.gradients(p) for p in parents]
        gradient_evals = n_emit
        target = EntropyTarget.for_space(config.alpha, spec.m, spec.K)
        candidates, diagnostics = gide_emit_with_diagnostics(
            list(zip(parents, bundles)),
            weights,
            target,
            streams.emitter,
            shared_temperature=config.shared_temperature,
            warm_start=warm_temperature,
        )
    elif config.method == "map-elites":
        parents = repertoire.sample_uniform(n_emit, streams.emitter)
        candidates = [
            random_point_mutation(p, config.n_flips, spec.K, streams.emitter)
            for p in parents
        ]
    elif config.method == "omg-mega-proj":
        parents = repertoire.sample_uniform(n_emit, streams.emitter)
        bundles = [problem.gradients(p) for p in parents]
        gradient_evals = n_emit
        candidates = omg_mega_emit(
            list(zip(parents, bundles)),
            OmgMegaConfig(sigma_g=config.sigma_g),
            streams.weights,
            spec,
        )
    elif config.method == "cma-me-proj":
        candidates, bookkeeping = cma_me_emit(emitters, n_emit, streams.emitter)
    else:  # pragma: no cover - validate() rejects unknown methods
        raise ConfigError(f"unknown method {config.method!r}")
    return candidates, diagnostics, bookkeeping, gradient_evals


def run(
    problem: Problem,
    config: RunConfig,
    progress: Callable[[int, RunMetrics], None] | None = None,
) -> tuple[Repertoire, RunMetrics]:
    """Execute the configured method for ``config.iterations`` iterations.

    Each iteration emits ``batch_size`` candidates (the first
    ceil((1 - crossover_fraction) * B) from the method emitter, the rest
    from one-point crossover of uniformly sampled elites), evaluates them,
    offers each to the archive in order, and appends one metrics row.
    """
    config.validate()
    spec = problem.spec
    if config.crossover_fraction > 0 and spec.m < 2:
        raise ConfigError("crossover requires genotypes with at least two positions")
    if (
        config.method == "cma-me-proj"
        and config.cma_covariance == "full"
        and spec.m * spec.K > config.cma_max_full_dim
    ):
        raise ConfigError(
            f"m*K = {spec.m * spec.K} exceeds cma_max_full_dim = {config.cma_max_full_dim}; "
            f"use cma_covariance = diagonal or raise the cap"
        )

    streams = spawn_streams(config.seed)
    n_workers = worker_count()
    repertoire = initialize(problem, config, streams.init)

    emitters: list[CmaEmitterState] = []
    if config.method == "cma-me-proj":
        seeds = repertoire.sample_uniform(config.n_emitters, streams.emitter)
        emitters = [
            CmaEmitterState.fresh(
                onehot_encode(g, spec).ravel(),
                config.sigma_0,
                spec.m,
                spec.K,
                diagonal=config.cma_covariance == "diagonal",
            )
            for g in seeds
        ]

    metrics = RunMetrics()
    gradient_evals_total = 0
    warm_temperature: float | None = None
    b = config.batch_size
    n_emit_default = math.ceil((1.0 - config.crossover_fraction) * b)

    for iteration in range(1, config.iterations + 1):
        n_emit = n_emit_default
        n_cross = b - n_emit
        candidates, diagnostics, bookkeeping, grad_evals = _emit_candidates(
            problem, config, repertoire, emitters, streams, n_emit, warm_temperature
        )
        gradient_evals_total += grad_evals
        if diagnostics is not None:
            warm_temperature = diagnostics.temperature
        if n_cross > 0:
            parents_a = repertoire.sample_uniform(n_cross, streams.crossover)
            parents_b = repertoire.sample_uniform(n_cross, streams.crossover)
            candidates = candidates + [
                one_point_crossover(pa, pb, streams.crossover)
                for pa, pb in zip(parents_a, parents_b)
            ]

        evaluations = _evaluate_batch(problem, candidates, n_workers)

        cma_results: dict[int, list[CmaSampleResult]] = {}
        for slot, (g, e) in enumerate(zip(candidates, evaluations)):
            incumbent = None
            if bookkeeping is not None and slot < len(bookkeeping):
                cell = repertoire.tessellation.cell_index(e.descriptor)
                incumbent = (
                    repertoire.fitness[cell] if repertoire.occupied[cell] else None
                )
            outcome = repertoire.try_insert(g, e)
            if bookkeeping is not None and slot < len(bookkeeping):
                emitter_idx, sample = bookkeeping[slot]
                improvement = (
                    e.fitness - incumbent if incumbent is not None else e.fitness
                )
                cma_results.setdefault(emitter_idx, []).append(
                    CmaSampleResult(
                        sample=sample,
                        fitness=float(e.fitness),
                        improvement=float(improvement),
                        outcome=outcome,
                    )
                )
        for emitter_idx in sorted(cma_results):
            emitters[emitter_idx] = cma_me_update(
                emitters[emitter_idx],
                cma_results[emitter_idx],
                repertoire,
                streams.emitter,
            )

        metrics.append(
            iteration=iteration,
            evaluations=repertoire.candidates_seen,
            gradient_evaluations=gradient_evals_total,
            qd_score=repertoire.qd_score(),
            qd_score_offset=repertoire.qd_score_offset(),
            coverage=repertoire.coverage(),
            max_fitness=repertoire.max_fitness(),
            mean_entropy=diagnostics.mean_entropy if diagnostics else None,
            temperature=diagnostics.temperature if diagnostics else None,
            solver_iterations=diagnostics.solver_iterations if diagnostics else None,
        )
        if progress is not None:
            progress(iteration, metrics)

    return repertoire, metrics


@dataclass(frozen=True)
class SweepResult:
    run_index: int
    overrides: dict
    seed_index: int
    run_seed: int
    qd_score: float | None
    coverage: float | None
    error: str | None


def sweep(
    problem: Problem,
    base_config: RunConfig,
    grid: dict[str, list],
    n_seeds: int,
    on_run: Callable[[SweepResult, Repertoire, RunMetrics, RunConfig], None] | None = None,
) -> list[SweepResult]:
    """Run the cartesian product of grid values x seed indices.

    Each run's seed is derived from (base seed, grid combination index,
    seed index) by the documented mixing function, so repeating a sweep
    reproduces every run.  Failures are recorded per run and do not abort
    the sweep.
    """
    if not grid:
        raise ConfigError("sweep grid must not be empty")
    unknown = set(grid) - {f.name for f in fields(RunConfig)}
    if unknown:
        raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
    if n_seeds < 1:
        raise ConfigError(f"need at least one seed, got {n_seeds}")

    keys = list(grid)
    results: list[SweepResult] = []
    run_index = 0
    for combo_index, combo in enumerate(product(*(grid[k] for k in keys))):
        overrides = dict(zip(keys, combo))
        for seed_index in range(n_seeds):
            run_seed = derive_run_seed(base_config.seed, combo_index, seed_index)
            cfg = replace(base_config, seed=run_seed, **overrides)
            try:
                repertoire, metrics = run(problem, cfg)
            except Exception as exc:  # keep sweeping; the row records the failure
                results.append(
                    SweepResult(run_index, overrides, seed_index, run_seed, None, None, repr(exc))
                )
            else:
                result = SweepResult(
                    run_index,
                    overrides,
                    seed_index,
                    run_seed,
                    repertoire.qd_score(),
                    repertoire.coverage(),
                    None,
                )
                results.append(result)
                if on_run is not None:
                    on_run(result, repertoire, metrics, cfg)
            run_index += 1
    return results
