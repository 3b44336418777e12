"""Discrete search space primitives.

A search point ("genotype") is a length-m integer vector with entries in
[0, K).  Objective and descriptor functions are defined on a continuous
one-hot extension of that space, so problems can report exact gradients
with respect to the m*K one-hot coordinates, evaluated at the vertex that
encodes the genotype.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import GenotypeError, NumericError

Genotype = np.ndarray  # shape (m,), integer dtype, entries in [0, K)


@dataclass(eq=False)
class ProblemSpec:
    """Dimensions of a discrete problem: m positions, K categories, d descriptors."""

    m: int
    K: int
    d: int
    descriptor_bounds: np.ndarray  # shape (d, 2), rows are (lo, hi)

    def __post_init__(self):
        if self.m < 1 or self.K < 2 or self.d < 1:
            raise GenotypeError(
                f"need m >= 1, K >= 2, d >= 1, got m={self.m}, K={self.K}, d={self.d}"
            )
        bounds = np.asarray(self.descriptor_bounds, dtype=float)
        if bounds.shape != (self.d, 2):
            raise GenotypeError(
                f"descriptor_bounds must have shape ({self.d}, 2), got {bounds.shape}"
            )
        if not np.all(np.isfinite(bounds)):
            raise GenotypeError("descriptor_bounds must be finite")
        if not np.all(bounds[:, 0] < bounds[:, 1]):
            raise GenotypeError("each descriptor bound pair must satisfy lo < hi")
        self.descriptor_bounds = bounds


@dataclass
class Evaluation:
    """Objective value and descriptor vector of one genotype."""

    fitness: float
    descriptor: np.ndarray  # shape (d,)


@dataclass
class GradientBundle:
    """Gradients of the one-hot extensions at a genotype's one-hot vertex.

    ``fitness_grad[i, k]`` is the partial derivative of the extended
    objective with respect to the one-hot coordinate of category k at
    position i; ``descriptor_grads[j]`` is the analogous matrix for the
    j-th descriptor.
    """

    fitness_grad: np.ndarray  # shape (m, K)
    descriptor_grads: np.ndarray  # shape (d, m, K)


@runtime_checkable
class Problem(Protocol):
    """Evaluable and differentiable discrete problem.

    ``evaluate`` and ``gradients`` must be pure and deterministic, and the
    gradients must describe the same functions whose values ``evaluate``
    returns.  Bundled benchmark problems also expose ``extension``, the
    continuous one-hot extension itself, which the finite-difference
    validator perturbs around one-hot vertices.
    """

    @property
    def spec(self) -> ProblemSpec: ...

    def evaluate(self, x: Genotype) -> Evaluation: ...

    def gradients(self, x: Genotype) -> GradientBundle: ...

    def extension(self, z: np.ndarray) -> tuple[float, np.ndarray]: ...


def validate_genotype(x: Genotype, spec: ProblemSpec) -> np.ndarray:
    """Return ``x`` as an int array, raising GenotypeError if it does not fit ``spec``."""
    arr = np.asarray(x)
    if arr.shape != (spec.m,):
        raise GenotypeError(f"genotype shape {arr.shape} does not match m={spec.m}")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise GenotypeError("genotype entries must be integers")
        arr = arr.astype(np.int64)
    if np.any(arr < 0) or np.any(arr >= spec.K):
        raise GenotypeError(f"genotype entries must lie in [0, {spec.K})")
    return arr.astype(np.int64, copy=False)


def onehot_encode(x: Genotype, spec: ProblemSpec) -> np.ndarray:
    """One-hot encode ``x`` as an (m, K) matrix with a single 1 per row."""
    arr = validate_genotype(x, spec)
    z = np.zeros((spec.m, spec.K))
    z[np.arange(spec.m), arr] = 1.0
    return z


def neighbor(x: Genotype, i: int, k: int) -> Genotype:
    """Copy of ``x`` with position ``i`` set to category ``k`` (no-op if k == x[i])."""
    arr = np.asarray(x)
    if not 0 <= i < arr.shape[0]:
        raise GenotypeError(f"position {i} out of range for m={arr.shape[0]}")
    if k < 0:
        raise GenotypeError(f"category {k} is negative")
    out = arr.copy()
    out[i] = k
    return out


def genotype_to_text(x: Genotype) -> str:
    """Space-separated decimal category indices, e.g. ``"0 3 1 1"``."""
    return " ".join(str(int(v)) for v in np.asarray(x))


def genotype_from_text(text: str, spec: ProblemSpec) -> Genotype:
    """Parse the space-separated text form and validate against ``spec``."""
    try:
        values = np.array([int(tok) for tok in text.split()], dtype=np.int64)
    except ValueError as exc:
        raise GenotypeError(f"cannot parse genotype text {text!r}") from exc
    return validate_genotype(values, spec)


def finite_difference_check(problem: Problem, x: Genotype, h: float = 1e-5) -> float:
    """Max error between analytic partials and central differences at ``x``.

    Perturbs every one-hot coordinate of the encoding of ``x`` by +/- h and
    compares the central difference of the continuous extension against the
    analytic gradient, for the objective and every descriptor.  The error is
    |analytic - numeric| / max(|analytic|, |numeric|, 1), so it reads as a
    relative error for large gradients without blowing up near zero.
    """
    if h <= 0:
        raise GenotypeError("finite-difference step h must be positive")
    spec = problem.spec
    arr = validate_genotype(x, spec)
    bundle = problem.gradients(arr)
    analytic = np.concatenate(
        [bundle.fitness_grad[None, :, :], np.asarray(bundle.descriptor_grads)], axis=0
    )  # (1+d, m, K)

    z0 = onehot_encode(arr, spec)
    worst = 0.0
    for i in range(spec.m):
        for k in range(spec.K):
            z0[i, k] += h
            f_hi, c_hi = problem.extension(z0)
            z0[i, k] -= 2 * h
            f_lo, c_lo = problem.extension(z0)
            z0[i, k] += h
            numeric = np.concatenate(([f_hi], np.asarray(c_hi))) - np.concatenate(
                ([f_lo], np.asarray(c_lo))
            )
            numeric /= 2 * h
            if not np.all(np.isfinite(numeric)):
                raise NumericError(
                    f"non-finite extension value near one-hot coordinate ({i}, {k})"
                )
            a = analytic[:, i, k]
            scale = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), 1.0)
            worst = max(worst, float(np.max(np.abs(a - numeric) / scale)))
    return worst
