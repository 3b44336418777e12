"""Gradient-informed discrete mutation.

A first-order Taylor expansion of the one-hot extension estimates, in a
single gradient evaluation, how much a weighted objective would change
under every single-position category flip.  A tempered softmax over those
mK estimates gives a proposal distribution over flips; the temperature is
solved numerically so the batch-average Shannon entropy matches a target
expressed as a fraction alpha of the maximum log(mK).  alpha -> 0 follows
the steepest estimated ascent greedily, alpha = 1 recovers uniform random
flips.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .problems import Genotype, GradientBundle, neighbor

SOLVER_MAX_ITER = 100
LOG_T_BRACKET = 30.0  # solve over T in [e^-30, e^30]


@dataclass(frozen=True)
class EntropyTarget:
    """Target Shannon entropy, parameterized as ``alpha * h_max``."""

    alpha: float
    h_max: float
    tolerance: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.h_max <= 0 or not np.isfinite(self.h_max):
            raise ValueError(f"h_max must be positive and finite, got {self.h_max}")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")

    @property
    def h_target(self) -> float:
        return self.alpha * self.h_max

    @classmethod
    def for_space(cls, alpha: float, m: int, K: int, rel_tolerance: float = 1e-6) -> "EntropyTarget":
        """Target for a size-(m, K) flip table: h_max = log(mK)."""
        h_max = float(np.log(m * K))
        return cls(alpha=alpha, h_max=h_max, tolerance=rel_tolerance * h_max)


@dataclass(frozen=True)
class FlipDistribution:
    """Tempered softmax over all mK flips, including the no-op flips."""

    probs: np.ndarray  # shape (m, K), entries >= 0, sums to 1
    temperature: float


@dataclass(frozen=True)
class GideDiagnostics:
    temperature: float
    mean_entropy: float
    solver_iterations: int


def combine_gradients(bundle: GradientBundle, w: np.ndarray, normalize: bool = True) -> np.ndarray:
    """Weighted combination |w0| * grad_f + sum_i w_i * grad_c_i.

    With ``normalize`` each gradient matrix is first scaled to unit
    Frobenius norm (zero matrices are left unchanged), which makes the
    weights comparable across the objective and the descriptors.
    """
    w = np.asarray(w, dtype=float)
    grads = [np.asarray(bundle.fitness_grad, dtype=float)]
    grads.extend(np.asarray(g, dtype=float) for g in bundle.descriptor_grads)
    if w.shape != (len(grads),):
        raise ValueError(f"expected {len(grads)} weights, got shape {w.shape}")
    if normalize:
        scaled = []
        for g in grads:
            norm = np.linalg.norm(g)
            scaled.append(g / norm if norm > 0 else g)
        grads = scaled
    out = abs(w[0]) * grads[0]
    for wi, g in zip(w[1:], grads[1:]):
        out = out + wi * g
    return out


def flip_logits(x: Genotype, grad_g: np.ndarray) -> np.ndarray:
    """First-order estimate of g(flip) - g(x) for every flip.

    ``delta[i, k] = grad_g[i, k] - grad_g[i, x_i]``, so the current
    category of each position gets exactly zero.  Exact whenever the
    one-hot extension of g is affine.
    """
    grad_g = np.asarray(grad_g, dtype=float)
    x = np.asarray(x)
    if grad_g.ndim != 2 or grad_g.shape[0] != x.shape[0]:
        raise ValueError(f"gradient shape {grad_g.shape} does not match genotype length {x.shape}")
    return grad_g - grad_g[np.arange(x.shape[0]), x][:, None]


def _softmax_stats(flat: np.ndarray, temperature: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-row entropy and variance of the logits under softmax(logits / T).

    ``flat`` has one flattened logit table per row; rows are centered first
    so the softmax and entropy are computed shift-free.
    """
    centered = flat - flat.mean(axis=1, keepdims=True)
    z = centered / temperature
    z -= z.max(axis=1, keepdims=True)
    expz = np.exp(z)
    total = expz.sum(axis=1, keepdims=True)
    p = expz / total
    log_z = np.log(total[:, 0])
    entropy = log_z - np.einsum("ij,ij->i", p, z)
    mean = np.einsum("ij,ij->i", p, centered)
    var = np.einsum("ij,ij->i", p, centered**2) - mean**2
    return entropy, np.maximum(var, 0.0)


def entropy_of(delta: np.ndarray, temperature: float) -> float:
    """Shannon entropy (natural log) of softmax(delta / T) over all mK entries."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    flat = np.asarray(delta, dtype=float).reshape(1, -1)
    entropy, _ = _softmax_stats(flat, temperature)
    return float(entropy[0])


def flip_distribution(delta: np.ndarray, temperature: float) -> FlipDistribution:
    """Max-shifted softmax of delta / T over all mK flips."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    delta = np.asarray(delta, dtype=float)
    z = delta / temperature
    z = z - z.max()
    expz = np.exp(z)
    return FlipDistribution(probs=expz / expz.sum(), temperature=float(temperature))


def _solve_temperature(
    batch_deltas, target: EntropyTarget, warm_start: float | None = None
) -> tuple[float, GideDiagnostics]:
    """Safeguarded Newton/bisection on log T for mean entropy == h_target.

    The batch-mean entropy is non-decreasing in T (d entropy / d T equals
    Var_p(delta) / T^3 >= 0), so the root is bracketed on [e^-30, e^30].
    Newton steps use that analytic derivative and fall back to bisection
    whenever they would leave the bracket.
    """
    flat = np.stack([np.asarray(d, dtype=float).ravel() for d in batch_deltas])
    if flat.shape[0] == 0:
        raise ValueError("need at least one logit table")
    if np.all(np.ptp(flat, axis=1) == 0):
        # Every table is constant: the distribution is uniform at any T and
        # the mean entropy sits at h_max regardless.  Documented fallback.
        t = warm_start if warm_start is not None else 1.0
        return float(t), GideDiagnostics(float(t), target.h_max, 0)

    h_target = target.h_target
    tol = target.tolerance
    lo, hi = -LOG_T_BRACKET, LOG_T_BRACKET
    if warm_start is not None and warm_start > 0:
        u = float(np.clip(np.log(warm_start), lo, hi))
    else:
        u = 0.0

    residual = np.inf
    for iteration in range(1, SOLVER_MAX_ITER + 1):
        temperature = float(np.exp(u))
        entropy, var = _softmax_stats(flat, temperature)
        mean_entropy = float(entropy.mean())
        residual = mean_entropy - h_target
        if abs(residual) <= tol:
            return temperature, GideDiagnostics(temperature, mean_entropy, iteration)
        if residual < 0:
            lo = u
        else:
            hi = u
        # d(mean entropy)/d(log T) = mean(Var_p(delta)) / T^2
        slope = float(var.mean()) / temperature**2
        if slope > 0 and np.isfinite(slope):
            u_newton = u - residual / slope
        else:
            u_newton = np.inf
        u = u_newton if lo < u_newton < hi else 0.5 * (lo + hi)

    raise SolverError(
        f"temperature solver did not reach target entropy {h_target:.6g} "
        f"within {SOLVER_MAX_ITER} iterations (residual {residual:.3e})"
    )


def solve_temperature(batch_deltas, target: EntropyTarget, warm_start: float | None = None) -> float:
    """Temperature T* at which the batch-mean flip entropy matches the target."""
    t, _ = _solve_temperature(batch_deltas, target, warm_start)
    return t


def sample_flip(x: Genotype, dist: FlipDistribution, rng: np.random.Generator) -> Genotype:
    """Draw one flip by inverse CDF over the flattened (row-major) table."""
    flat = dist.probs.ravel()
    cdf = np.cumsum(flat)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    idx = min(idx, flat.size - 1)
    i, k = divmod(idx, dist.probs.shape[1])
    return neighbor(x, i, k)


def gide_emit_with_diagnostics(
    batch,
    weights,
    target: EntropyTarget,
    rng: np.random.Generator,
    shared_temperature: bool = True,
    warm_start: float | None = None,
) -> tuple[list[Genotype], GideDiagnostics]:
    """Mutate a batch of parents via gradient-informed flip sampling.

    ``batch`` is a sequence of (genotype, GradientBundle) pairs and
    ``weights`` the matching per-parent direction weights.  Gradients are
    normalized, combined, and turned into flip logits; one shared
    temperature is solved for the whole batch (or one per parent when
    ``shared_temperature`` is off) and one mutant is sampled per parent,
    in order.
    """
    if len(batch) != len(weights) or len(batch) == 0:
        raise ValueError("batch and weights must be non-empty and the same length")
    deltas = []
    parents = []
    for (x, bundle), w in zip(batch, weights):
        grad_g = combine_gradients(bundle, w, normalize=True)
        deltas.append(flip_logits(x, grad_g))
        parents.append(np.asarray(x))

    if shared_temperature:
        temperature, diag = _solve_temperature(deltas, target, warm_start)
        temperatures = [temperature] * len(deltas)
    else:
        temperatures = []
        entropies = []
        iterations = 0
        for delta in deltas:
            t, d = _solve_temperature([delta], target, warm_start)
            temperatures.append(t)
            entropies.append(d.mean_entropy)
            iterations += d.solver_iterations
        diag = GideDiagnostics(
            float(np.mean(temperatures)), float(np.mean(entropies)), iterations
        )

    mutants = [
        sample_flip(x, flip_distribution(delta, t), rng)
        for x, delta, t in zip(parents, deltas, temperatures)
    ]
    return mutants, diag


def gide_emit(
    batch,
    weights,
    target: EntropyTarget,
    rng: np.random.Generator,
    shared_temperature: bool = True,
    warm_start: float | None = None,
) -> list[Genotype]:
    """Like :func:`gide_emit_with_diagnostics` but returning only the mutants."""
    mutants, _ = gide_emit_with_diagnostics(
        batch, weights, target, rng, shared_temperature, warm_start
    )
    return mutants
