"""Baseline emitters: random point mutation, one-point crossover, and two
continuous-relaxation emitters (gradient-arborescence steps and CMA sampling)
projected back onto the discrete space by per-position argmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GenotypeError
from .gide import combine_gradients
from .problems import Genotype, ProblemSpec, onehot_encode
from .repertoire import InsertionOutcome, Repertoire


@dataclass(frozen=True)
class OmgMegaConfig:
    """Standard deviation of the random direction weights."""

    sigma_g: float = 10.0

    def __post_init__(self):
        if self.sigma_g <= 0:
            raise ConfigError(f"sigma_g must be positive, got {self.sigma_g}")


def random_point_mutation(
    x: Genotype, n_flips: int, n_categories: int, rng: np.random.Generator
) -> Genotype:
    """Flip ``n_flips`` distinct positions to uniformly drawn *different* categories.

    Each flipped position receives a uniform draw over the other K-1
    categories, so the result never equals ``x``.
    """
    x = np.asarray(x)
    m = x.shape[0]
    if not 1 <= n_flips <= m:
        raise ConfigError(f"n_flips must lie in [1, {m}], got {n_flips}")
    if n_categories < 2:
        raise ConfigError("point mutation needs at least two categories")
    out = x.copy()
    positions = rng.choice(m, size=n_flips, replace=False)
    for pos in positions:
        offset = rng.integers(1, n_categories)
        out[pos] = (out[pos] + offset) % n_categories
    return out


def one_point_crossover(a: Genotype, b: Genotype, rng: np.random.Generator) -> Genotype:
    """Child taking ``a`` up to a uniform cut point in [1, m-1], then ``b``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise GenotypeError(f"parent shapes differ: {a.shape} vs {b.shape}")
    m = a.shape[0]
    if m < 2:
        raise ConfigError("one-point crossover needs at least two positions")
    cut = int(rng.integers(1, m))
    return np.concatenate([a[:cut], b[cut:]])


def project_to_discrete(v: np.ndarray, spec: ProblemSpec) -> Genotype:
    """Per-position argmax of the (m, K) reshaped vector; ties to the lowest index."""
    v = np.asarray(v, dtype=float)
    if v.size != spec.m * spec.K:
        raise GenotypeError(f"vector length {v.size} does not match m*K = {spec.m * spec.K}")
    return np.argmax(v.reshape(spec.m, spec.K), axis=1).astype(np.int64)


def omg_mega_emit(batch, cfg: OmgMegaConfig, rng: np.random.Generator, spec: ProblemSpec) -> list[Genotype]:
    """One normalized gradient step from each parent's one-hot vertex, projected back.

    Per parent: draw weights ~ N(0, sigma_g^2) for the objective and each
    descriptor, combine the Frobenius-normalized gradients, add the result
    to the one-hot encoding, and take the per-position argmax.
    """
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    mutants = []
    for x, bundle in batch:
        w = rng.normal(0.0, cfg.sigma_g, size=1 + spec.d)
        step = combine_gradients(bundle, w, normalize=True)
        z = onehot_encode(x, spec) + step
        mutants.append(project_to_discrete(z.ravel(), spec))
    return mutants


@dataclass
class CmaEmitterState:
    """One CMA emitter over the m*K one-hot relaxation.

    The search distribution is N(mean, sigma^2 * cov).  ``cov`` is either a
    full SPD matrix or, in diagonal mode, the vector of its diagonal.
    """

    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    path_sigma: np.ndarray
    path_cov: np.ndarray
    generation: int
    solutions_generated: int
    sigma0: float
    m: int
    K: int
    diagonal: bool

    @classmethod
    def fresh(
        cls,
        mean: np.ndarray,
        sigma0: float,
        m: int,
        K: int,
        diagonal: bool = False,
        solutions_generated: int = 0,
    ) -> "CmaEmitterState":
        if sigma0 <= 0:
            raise ConfigError(f"sigma0 must be positive, got {sigma0}")
        n = m * K
        mean = np.asarray(mean, dtype=float).ravel()
        if mean.shape != (n,):
            raise GenotypeError(f"mean length {mean.shape} does not match m*K = {n}")
        cov = np.ones(n) if diagonal else np.eye(n)
        return cls(
            mean=mean.copy(),
            sigma=float(sigma0),
            cov=cov,
            path_sigma=np.zeros(n),
            path_cov=np.zeros(n),
            generation=0,
            solutions_generated=solutions_generated,
            sigma0=float(sigma0),
            m=m,
            K=K,
            diagonal=diagonal,
        )

    def sample_transform(self) -> np.ndarray:
        """Factor A with A @ z ~ N(0, cov) for standard normal z."""
        if self.diagonal:
            return np.sqrt(self.cov)
        return np.linalg.cholesky(self.cov)


@dataclass(frozen=True)
class CmaSampleResult:
    """Archive feedback for one CMA sample of the current generation."""

    sample: np.ndarray  # pre-projection continuous point
    fitness: float
    improvement: float  # fitness gain over the replaced incumbent
    outcome: InsertionOutcome

    @property
    def was_added(self) -> bool:
        return self.outcome is not InsertionOutcome.REJECTED


def cma_me_emit(
    emitters: list[CmaEmitterState], batch: int, rng: np.random.Generator
) -> tuple[list[Genotype], list[tuple[int, np.ndarray]]]:
    """Draw ``batch`` candidates, always from the emitter that has generated least.

    Ties go to the lowest emitter index.  Returns the projected genotypes
    plus (emitter index, continuous sample) bookkeeping for the update step.
    """
    if not emitters:
        raise ConfigError("need at least one CMA emitter")
    spec_mk = [(e.m, e.K) for e in emitters]
    if len(set(spec_mk)) != 1:
        raise ConfigError("all CMA emitters must share the same (m, K)")
    transforms = {}
    genotypes: list[Genotype] = []
    bookkeeping: list[tuple[int, np.ndarray]] = []
    for _ in range(batch):
        idx = min(range(len(emitters)), key=lambda j: emitters[j].solutions_generated)
        state = emitters[idx]
        if idx not in transforms:
            transforms[idx] = state.sample_transform()
        factor = transforms[idx]
        z = rng.standard_normal(state.mean.size)
        step = factor * z if state.diagonal else factor @ z
        sample = state.mean + state.sigma * step
        genotypes.append(
            np.argmax(sample.reshape(state.m, state.K), axis=1).astype(np.int64)
        )
        bookkeeping.append((idx, sample))
        state.solutions_generated += 1
    return genotypes, bookkeeping


def _ranked_top_half(results: list[CmaSampleResult]) -> list[np.ndarray]:
    """Samples ranked by archive improvement, truncated to the better half.

    New-cell additions rank above every replacement and are ordered by raw
    fitness; everything else is ordered by improvement.  The sort is stable,
    so equal keys keep their generation order.
    """
    def key(res: CmaSampleResult):
        is_new = res.outcome is InsertionOutcome.ADDED_EMPTY
        return (1 if is_new else 0, res.fitness if is_new else res.improvement)

    ranked = sorted(results, key=key, reverse=True)
    mu = max(1, len(ranked) // 2)
    return [np.asarray(r.sample, dtype=float) for r in ranked[:mu]]


def cma_me_update(
    emitter: CmaEmitterState,
    results: list[CmaSampleResult],
    repertoire: Repertoire,
    rng: np.random.Generator,
) -> CmaEmitterState:
    """Rank-mu CMA update over the better half, or a restart when nothing landed.

    The update uses equal recombination weights 1/mu over the top half.  If
    no sample entered the archive this generation, or the covariance loses
    positive definiteness, the emitter restarts at the one-hot encoding of a
    uniformly sampled elite with covariance sigma0^2 * I.
    """
    if not results:
        return emitter
    if not any(r.was_added for r in results):
        return _restart(emitter, repertoire, rng)

    n = emitter.mean.size
    top = _ranked_top_half(results)
    mu = len(top)
    mu_eff = float(mu)

    c_sigma = (mu_eff + 2) / (n + mu_eff + 5)
    d_sigma = 1 + 2 * max(0.0, np.sqrt((mu_eff - 1) / (n + 1)) - 1) + c_sigma
    c_c = (4 + mu_eff / n) / (n + 4 + 2 * mu_eff / n)
    c_1 = 2 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1 - c_1, 2 * (mu_eff - 2 + 1 / mu_eff) / ((n + 2) ** 2 + mu_eff))
    chi_n = np.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n**2))

    ys = [(x - emitter.mean) / emitter.sigma for x in top]
    y_w = np.mean(ys, axis=0)
    new_mean = emitter.mean + emitter.sigma * y_w

    if emitter.diagonal:
        inv_sqrt_y = y_w / np.sqrt(emitter.cov)
    else:
        eigvals, eigvecs = np.linalg.eigh(emitter.cov)
        if np.any(eigvals <= 0) or not np.all(np.isfinite(eigvals)):
            return _restart(emitter, repertoire, rng)
        inv_sqrt_y = eigvecs @ ((eigvecs.T @ y_w) / np.sqrt(eigvals))

    path_sigma = (1 - c_sigma) * emitter.path_sigma + np.sqrt(
        c_sigma * (2 - c_sigma) * mu_eff
    ) * inv_sqrt_y
    # Cap step-size growth per update for numerical safety.
    arg = min(1.0, (c_sigma / d_sigma) * (np.linalg.norm(path_sigma) / chi_n - 1))
    new_sigma = emitter.sigma * float(np.exp(arg))

    gen = emitter.generation + 1
    h_norm = np.linalg.norm(path_sigma) / np.sqrt(1 - (1 - c_sigma) ** (2 * gen))
    h_sigma = 1.0 if h_norm < (1.4 + 2 / (n + 1)) * chi_n else 0.0
    path_cov = (1 - c_c) * emitter.path_cov + h_sigma * np.sqrt(
        c_c * (2 - c_c) * mu_eff
    ) * y_w

    if emitter.diagonal:
        rank_mu = np.mean([y**2 for y in ys], axis=0)
        rank_one = path_cov**2 + (1 - h_sigma) * c_c * (2 - c_c) * emitter.cov
        new_cov = (1 - c_1 - c_mu) * emitter.cov + c_1 * rank_one + c_mu * rank_mu
        if np.any(new_cov <= 0) or not np.all(np.isfinite(new_cov)):
            return _restart(emitter, repertoire, rng)
    else:
        rank_mu = np.mean([np.outer(y, y) for y in ys], axis=0)
        rank_one = np.outer(path_cov, path_cov) + (1 - h_sigma) * c_c * (2 - c_c) * emitter.cov
        new_cov = (1 - c_1 - c_mu) * emitter.cov + c_1 * rank_one + c_mu * rank_mu
        new_cov = 0.5 * (new_cov + new_cov.T)
        eigvals = np.linalg.eigvalsh(new_cov)
        if np.any(eigvals <= 0) or not np.all(np.isfinite(eigvals)):
            return _restart(emitter, repertoire, rng)

    if not (np.isfinite(new_sigma) and new_sigma > 0 and np.all(np.isfinite(new_mean))):
        return _restart(emitter, repertoire, rng)

    return CmaEmitterState(
        mean=new_mean,
        sigma=new_sigma,
        cov=new_cov,
        path_sigma=path_sigma,
        path_cov=path_cov,
        generation=gen,
        solutions_generated=emitter.solutions_generated,
        sigma0=emitter.sigma0,
        m=emitter.m,
        K=emitter.K,
        diagonal=emitter.diagonal,
    )


def _restart(
    emitter: CmaEmitterState, repertoire: Repertoire, rng: np.random.Generator
) -> CmaEmitterState:
    elite = repertoire.sample_uniform(1, rng)[0]
    mean = np.zeros((emitter.m, emitter.K))
    mean[np.arange(emitter.m), elite] = 1.0
    return CmaEmitterState.fresh(
        mean.ravel(),
        emitter.sigma0,
        emitter.m,
        emitter.K,
        diagonal=emitter.diagonal,
        solutions_generated=emitter.solutions_generated,
    )
