"""Descriptor-space tessellation and the elite archive.

The descriptor space is partitioned into M cells by nearest-centroid
assignment (Euclidean distance, ties to the lowest index).  Each cell holds
at most one elite; a candidate replaces the incumbent only when its fitness
is strictly greater.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyArchiveError
from .problems import Evaluation, Genotype

KMEANS_MAX_ITER = 200
KMEANS_TOL = 1e-8
CVT_SAMPLES_PER_CELL = 50


class InsertionOutcome(enum.Enum):
    ADDED_EMPTY = "added-empty"
    REPLACED = "replaced"
    REJECTED = "rejected"


@dataclass(eq=False)
class Tessellation:
    """M centroids in d-dimensional descriptor space."""

    centroids: np.ndarray  # shape (M, d)

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=float)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ConfigError(f"centroids must be a non-empty 2-d array, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ConfigError("centroids must be finite")
        order = np.lexsort(c.T[::-1])
        if c.shape[0] > 1 and np.any(np.all(np.diff(c[order], axis=0) == 0, axis=1)):
            raise ConfigError("centroids must be pairwise distinct")
        self.centroids = c

    @property
    def n_cells(self) -> int:
        return self.centroids.shape[0]

    @property
    def d(self) -> int:
        return self.centroids.shape[1]

    def cell_index(self, descriptor: np.ndarray) -> int:
        """Index of the nearest centroid (ties resolved to the lowest index)."""
        diff = self.centroids - np.asarray(descriptor, dtype=float)
        return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))


def _assign_labels(points: np.ndarray, centroids: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Nearest-centroid label per point, chunked to bound memory."""
    labels = np.empty(points.shape[0], dtype=np.int64)
    sq = np.einsum("ij,ij->i", centroids, centroids)
    for start in range(0, points.shape[0], chunk):
        block = points[start : start + chunk]
        d2 = sq[None, :] - 2.0 * block @ centroids.T
        labels[start : start + chunk] = np.argmin(d2, axis=1)
    return labels


def _lloyd(points: np.ndarray, centroids: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Lloyd iterations until centroid movement < tolerance or the iteration cap.

    Clusters that end up empty are reseeded from a random data point (in
    ascending cluster order, so the procedure is deterministic given rng).
    """
    centroids = centroids.copy()
    m = centroids.shape[0]
    for _ in range(KMEANS_MAX_ITER):
        labels = _assign_labels(points, centroids)
        new_centroids = np.empty_like(centroids)
        counts = np.bincount(labels, minlength=m)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, points)
        for j in range(m):
            if counts[j] > 0:
                new_centroids[j] = sums[j] / counts[j]
            else:
                new_centroids[j] = points[rng.integers(points.shape[0])]
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if shift < KMEANS_TOL:
            break
    return centroids


def build_cvt(bounds, n_cells: int, n_samples: int | None = None, seed: int = 0) -> Tessellation:
    """Centroidal tessellation of a bounding box via k-means on uniform samples."""
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2:
        raise ConfigError(f"bounds must be (d, 2) pairs, got shape {bounds.shape}")
    if n_cells < 1:
        raise ConfigError("need at least one cell")
    if n_samples is None:
        n_samples = CVT_SAMPLES_PER_CELL * n_cells
    if n_cells > n_samples:
        raise ConfigError(f"n_cells={n_cells} exceeds n_samples={n_samples}")
    rng = np.random.default_rng(seed)
    samples = rng.uniform(bounds[:, 0], bounds[:, 1], size=(n_samples, bounds.shape[0]))
    init = samples[rng.permutation(n_samples)[:n_cells]]
    return Tessellation(_lloyd(samples, init, rng))


def _kmeans_pp_init(points: np.ndarray, n_cells: int, rng: np.random.Generator) -> np.ndarray:
    centroids = np.empty((n_cells, points.shape[1]))
    centroids[0] = points[rng.integers(points.shape[0])]
    d2 = np.einsum("ij,ij->i", points - centroids[0], points - centroids[0])
    for j in range(1, n_cells):
        total = d2.sum()
        if total <= 0:
            centroids[j] = points[rng.integers(points.shape[0])]
        else:
            centroids[j] = points[rng.choice(points.shape[0], p=d2 / total)]
        diff = points - centroids[j]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", diff, diff))
    return centroids


def build_kmeans_from_data(points: np.ndarray, n_cells: int, seed: int = 0) -> Tessellation:
    """Tessellation from data points: k-means++ seeding then Lloyd iterations."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ConfigError(f"points must be a 2-d array, got shape {points.shape}")
    if not np.all(np.isfinite(points)):
        raise ConfigError("points must be finite")
    if points.shape[0] < n_cells:
        raise ConfigError(f"need at least n_cells={n_cells} points, got {points.shape[0]}")
    rng = np.random.default_rng(seed)
    init = _kmeans_pp_init(points, n_cells, rng)
    return Tessellation(_lloyd(points, init, rng))


@dataclass(eq=False)
class Repertoire:
    """Elite archive over a tessellation: at most one (genotype, fitness) per cell."""

    tessellation: Tessellation
    genotype_length: int
    occupied: np.ndarray = field(init=False)
    fitness: np.ndarray = field(init=False)
    descriptors: np.ndarray = field(init=False)
    genotypes: np.ndarray = field(init=False)
    # Bookkeeping over every candidate ever offered to try_insert.
    candidates_seen: int = field(init=False, default=0)
    numeric_rejections: int = field(init=False, default=0)
    min_fitness_seen: float = field(init=False, default=np.nan)

    def __post_init__(self):
        m_cells = self.tessellation.n_cells
        self.occupied = np.zeros(m_cells, dtype=bool)
        self.fitness = np.full(m_cells, np.nan)
        self.descriptors = np.full((m_cells, self.tessellation.d), np.nan)
        self.genotypes = np.zeros((m_cells, self.genotype_length), dtype=np.int64)

    @property
    def n_cells(self) -> int:
        return self.tessellation.n_cells

    def try_insert(self, g: Genotype, e: Evaluation) -> InsertionOutcome:
        """Insert ``g`` if its cell is empty or its fitness strictly improves it.

        Equal fitness keeps the incumbent.  Non-finite evaluations are
        rejected with a warning and counted in ``numeric_rejections``.
        """
        self.candidates_seen += 1
        descriptor = np.asarray(e.descriptor, dtype=float)
        if not np.isfinite(e.fitness) or not np.all(np.isfinite(descriptor)):
            warnings.warn("rejected candidate with non-finite evaluation", RuntimeWarning)
            self.numeric_rejections += 1
            return InsertionOutcome.REJECTED
        if np.isnan(self.min_fitness_seen) or e.fitness < self.min_fitness_seen:
            self.min_fitness_seen = float(e.fitness)
        cell = self.tessellation.cell_index(descriptor)
        if not self.occupied[cell]:
            outcome = InsertionOutcome.ADDED_EMPTY
        elif e.fitness > self.fitness[cell]:
            outcome = InsertionOutcome.REPLACED
        else:
            return InsertionOutcome.REJECTED
        self.occupied[cell] = True
        self.fitness[cell] = float(e.fitness)
        self.descriptors[cell] = descriptor
        self.genotypes[cell] = np.asarray(g)
        return outcome

    def occupied_cells(self) -> np.ndarray:
        return np.flatnonzero(self.occupied)

    def qd_score(self) -> float:
        """Sum of elite fitnesses over occupied cells (0.0 when empty)."""
        return float(np.sum(self.fitness[self.occupied]))

    def qd_score_offset(self) -> float:
        """QD-score shifted by the minimum fitness ever observed.

        Equals sum over occupied cells of (fitness - min seen), which is
        non-negative and comparable across runs whose raw fitness can be
        negative.  Zero when the archive is empty.
        """
        n_occ = int(np.sum(self.occupied))
        if n_occ == 0:
            return 0.0
        return self.qd_score() - n_occ * self.min_fitness_seen

    def coverage(self) -> float:
        return float(np.mean(self.occupied))

    def max_fitness(self) -> float:
        if not np.any(self.occupied):
            return np.nan
        return float(np.max(self.fitness[self.occupied]))

    def sample_uniform(self, batch: int, rng: np.random.Generator) -> list[Genotype]:
        """``batch`` independent uniform draws over occupied cells, with replacement."""
        ids = self.occupied_cells()
        if ids.size == 0:
            raise EmptyArchiveError("cannot sample from an empty repertoire")
        picks = ids[rng.integers(0, ids.size, size=batch)]
        return [self.genotypes[c].copy() for c in picks]
