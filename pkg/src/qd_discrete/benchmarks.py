"""Self-contained differentiable benchmark problems and the brute-force oracle.

Two desk-scale problems ship with the package:

* ``SeparableTableProblem`` sums per-position table entries, so its one-hot
  extension is affine and the first-order flip estimates are exact.  It is
  the analytic oracle for emitter and scheduler tests.
* ``RbmProblem`` scores binary images by the negative free energy of a small
  restricted Boltzmann machine trained with one-step contrastive divergence
  on a synthetic bars-and-stripes set; descriptors are PCA projections of
  the hidden activation probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .problems import (
    Evaluation,
    Genotype,
    GradientBundle,
    ProblemSpec,
    validate_genotype,
)
from .repertoire import Repertoire, Tessellation

ENUMERATION_CAP = 2**20


class SeparableTableProblem:
    """f(x) = sum_i F[i, x_i], descriptors c_j(x) = sum_i C[j, i, x_i].

    The one-hot extension is linear in the one-hot coordinates, so the
    gradient matrices are the tables themselves and descriptor bounds are
    exact: per dimension, the sum of column minima and maxima.
    """

    def __init__(self, fitness_table: np.ndarray, descriptor_tables: np.ndarray):
        fitness_table = np.asarray(fitness_table, dtype=float)
        descriptor_tables = np.asarray(descriptor_tables, dtype=float)
        if fitness_table.ndim != 2:
            raise ConfigError(f"fitness table must be (m, K), got {fitness_table.shape}")
        if descriptor_tables.ndim != 3 or descriptor_tables.shape[1:] != fitness_table.shape:
            raise ConfigError(
                f"descriptor tables must be (d, m, K) matching the fitness table, "
                f"got {descriptor_tables.shape}"
            )
        self.fitness_table = fitness_table
        self.descriptor_tables = descriptor_tables
        m, k = fitness_table.shape
        lo = descriptor_tables.min(axis=2).sum(axis=1)
        hi = descriptor_tables.max(axis=2).sum(axis=1)
        self._spec = ProblemSpec(
            m=m, K=k, d=descriptor_tables.shape[0],
            descriptor_bounds=np.column_stack([lo, hi]),
        )

    @property
    def spec(self) -> ProblemSpec:
        return self._spec

    def evaluate(self, x: Genotype) -> Evaluation:
        arr = validate_genotype(x, self._spec)
        rows = np.arange(self._spec.m)
        fitness = float(self.fitness_table[rows, arr].sum())
        descriptor = self.descriptor_tables[:, rows, arr].sum(axis=1)
        return Evaluation(fitness=fitness, descriptor=descriptor)

    def gradients(self, x: Genotype) -> GradientBundle:
        validate_genotype(x, self._spec)
        return GradientBundle(
            fitness_grad=self.fitness_table,
            descriptor_grads=self.descriptor_tables,
        )

    def extension(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        z = np.asarray(z, dtype=float)
        fitness = float((self.fitness_table * z).sum())
        descriptor = (self.descriptor_tables * z).sum(axis=(1, 2))
        return fitness, descriptor


def make_separable_problem(m: int, K: int, d: int, seed: int = 0) -> SeparableTableProblem:
    """Random separable problem with standard normal table entries."""
    if m < 1 or K < 2 or d < 1:
        raise ConfigError(f"need m >= 1, K >= 2, d >= 1, got m={m}, K={K}, d={d}")
    rng = np.random.default_rng(seed)
    return SeparableTableProblem(
        fitness_table=rng.standard_normal((m, K)),
        descriptor_tables=rng.standard_normal((d, m, K)),
    )


def bars_and_stripes(side: int) -> np.ndarray:
    """All distinct bars-and-stripes patterns on a side x side grid, flattened.

    Every pattern turns entire rows on/off or entire columns on/off; the
    all-on and all-off images appear in both families and are deduplicated.
    Rows are returned in lexicographic order.
    """
    if side < 2:
        raise ConfigError("bars-and-stripes needs side >= 2")
    patterns = []
    for bits in range(2**side):
        mask = np.array([(bits >> i) & 1 for i in range(side)], dtype=float)
        patterns.append(np.repeat(mask[:, None], side, axis=1).ravel())  # stripes
        patterns.append(np.repeat(mask[None, :], side, axis=0).ravel())  # bars
    return np.unique(np.array(patterns), axis=0)


@dataclass
class RbmParams:
    """Weights (hidden x visible) and biases of a binary-binary RBM."""

    weights: np.ndarray
    visible_bias: np.ndarray
    hidden_bias: np.ndarray


def _sigmoid(a: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


def _softplus(a: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, a)


def rbm_free_energy(params: RbmParams, v: np.ndarray) -> np.ndarray:
    """Free energy of visible configurations; lower means more likely."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    return -(v @ params.visible_bias + _softplus(params.hidden_bias + v @ params.weights.T).sum(axis=1))


def rbm_train_cd1(
    visible_size: int,
    hidden_size: int,
    dataset: np.ndarray,
    epochs: int,
    learning_rate: float,
    seed: int = 0,
    batch_size: int = 16,
) -> RbmParams:
    """Train a binary RBM with one-step contrastive divergence mini-batches.

    Hidden states are sampled on the positive phase; the reconstruction and
    its hidden activations use probabilities.  Deterministic given the seed.
    """
    dataset = np.asarray(dataset, dtype=float)
    if dataset.ndim != 2 or dataset.shape[0] == 0:
        raise ConfigError("dataset must be a non-empty 2-d array of binary rows")
    if dataset.shape[1] != visible_size:
        raise ConfigError(
            f"dataset rows have length {dataset.shape[1]}, expected {visible_size}"
        )
    rng = np.random.default_rng(seed)
    weights = rng.normal(0.0, 0.01, size=(hidden_size, visible_size))
    visible_bias = np.zeros(visible_size)
    hidden_bias = np.zeros(hidden_size)

    n = dataset.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            v0 = dataset[order[start : start + batch_size]]
            h0_prob = _sigmoid(hidden_bias + v0 @ weights.T)
            h0_sample = (rng.random(h0_prob.shape) < h0_prob).astype(float)
            v1 = _sigmoid(visible_bias + h0_sample @ weights)
            h1_prob = _sigmoid(hidden_bias + v1 @ weights.T)
            scale = learning_rate / v0.shape[0]
            weights += scale * (h0_prob.T @ v0 - h1_prob.T @ v1)
            visible_bias += scale * (v0 - v1).sum(axis=0)
            hidden_bias += scale * (h0_prob - h1_prob).sum(axis=0)
    return RbmParams(weights=weights, visible_bias=visible_bias, hidden_bias=hidden_bias)


class RbmProblem:
    """Binary-image problem scored by negative RBM free energy.

    Genotypes are the visible units (K = 2, category equals the bit value).
    Descriptors project the hidden activation probabilities onto the top-d
    principal components fitted on a reference embedding set.
    """

    def __init__(
        self,
        params: RbmParams,
        components: np.ndarray,
        component_mean: np.ndarray,
        descriptor_bounds: np.ndarray,
    ):
        self.params = params
        self.components = np.asarray(components, dtype=float)  # (d, n_hidden)
        self.component_mean = np.asarray(component_mean, dtype=float)
        self._spec = ProblemSpec(
            m=params.visible_bias.size,
            K=2,
            d=self.components.shape[0],
            descriptor_bounds=descriptor_bounds,
        )

    @property
    def spec(self) -> ProblemSpec:
        return self._spec

    def hidden_probs(self, v: np.ndarray) -> np.ndarray:
        return _sigmoid(self.params.hidden_bias + self.params.weights @ v)

    def _evaluate_continuous(self, v: np.ndarray) -> tuple[float, np.ndarray]:
        fitness = -float(rbm_free_energy(self.params, v)[0])
        descriptor = self.components @ (self.hidden_probs(v) - self.component_mean)
        return fitness, descriptor

    def evaluate(self, x: Genotype) -> Evaluation:
        arr = validate_genotype(x, self._spec)
        fitness, descriptor = self._evaluate_continuous(arr.astype(float))
        return Evaluation(fitness=fitness, descriptor=descriptor)

    def gradients(self, x: Genotype) -> GradientBundle:
        arr = validate_genotype(x, self._spec)
        v = arr.astype(float)
        activation = self.params.hidden_bias + self.params.weights @ v
        s = _sigmoid(activation)
        # d fitness / d v  =  b + W^T sigma(c + W v)
        fit_v = self.params.visible_bias + self.params.weights.T @ s
        # d descriptor_j / d v  =  W^T (u_j * sigma')
        desc_v = (self.components * (s * (1 - s))) @ self.params.weights
        # One-hot chain rule: v_i = 0 * z_{i,0} + 1 * z_{i,1}.
        fitness_grad = np.column_stack([np.zeros_like(fit_v), fit_v])
        descriptor_grads = np.stack(
            [np.column_stack([np.zeros_like(row), row]) for row in desc_v]
        )
        return GradientBundle(fitness_grad=fitness_grad, descriptor_grads=descriptor_grads)

    def extension(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        z = np.asarray(z, dtype=float)
        return self._evaluate_continuous(z[:, 1])


def make_rbm_problem(params: RbmParams, d: int, descriptor_fit_data: np.ndarray) -> RbmProblem:
    """Fit the PCA descriptor map on reference data and assemble the problem.

    Components come from an eigendecomposition of the embedding covariance
    (orthonormal by construction, signs fixed so the largest-magnitude entry
    of each component is positive).  Bounds are the min/max projections of
    the fit data widened by 10% of their span.
    """
    n_hidden = params.hidden_bias.size
    if not 1 <= d <= n_hidden:
        raise ConfigError(f"descriptor dimension d={d} must lie in [1, {n_hidden}]")
    data = np.asarray(descriptor_fit_data, dtype=float)
    if data.ndim != 2 or data.shape[1] != params.visible_bias.size:
        raise ConfigError("descriptor fit data must match the visible size")

    embeddings = _sigmoid(params.hidden_bias + data @ params.weights.T)
    mean = embeddings.mean(axis=0)
    centered = embeddings - mean
    cov = centered.T @ centered / max(1, centered.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    components = eigvecs[:, ::-1][:, :d].T  # descending eigenvalue order
    signs = np.sign(components[np.arange(d), np.argmax(np.abs(components), axis=1)])
    signs[signs == 0] = 1.0
    components = components * signs[:, None]

    projected = centered @ components.T
    lo = projected.min(axis=0)
    hi = projected.max(axis=0)
    span = np.maximum(hi - lo, 1e-6)
    bounds = np.column_stack([lo - 0.1 * span, hi + 0.1 * span])
    return RbmProblem(params, components, mean, bounds)


def brute_force_archive(problem, tessellation: Tessellation, cap: int = ENUMERATION_CAP) -> Repertoire:
    """Insert every genotype in the search space; the resulting QD-score is optimal.

    Refuses when K^m exceeds ``cap`` (default 2^20) and reports the size.
    """
    spec = problem.spec
    total = spec.K**spec.m
    if total > cap:
        raise ConfigError(
            f"enumeration of K^m = {total} genotypes exceeds the cap of {cap}"
        )
    repertoire = Repertoire(tessellation, spec.m)
    for values in np.ndindex(*([spec.K] * spec.m)):
        x = np.array(values, dtype=np.int64)
        repertoire.try_insert(x, problem.evaluate(x))
    return repertoire
