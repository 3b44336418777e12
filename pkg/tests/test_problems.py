import numpy as np
import pytest

from qd_discrete import (
    GenotypeError,
    NumericError,
    ProblemSpec,
    finite_difference_check,
    genotype_from_text,
    genotype_to_text,
    make_separable_problem,
    neighbor,
    onehot_encode,
    validate_genotype,
)


def _spec(m=2, K=2, d=1):
    return ProblemSpec(m=m, K=K, d=d, descriptor_bounds=np.tile([0.0, 1.0], (d, 1)))


class TestProblemSpec:
    def test_rejects_bad_dimensions(self):
        with pytest.raises(GenotypeError):
            ProblemSpec(m=0, K=2, d=1, descriptor_bounds=[[0, 1]])
        with pytest.raises(GenotypeError):
            ProblemSpec(m=1, K=1, d=1, descriptor_bounds=[[0, 1]])

    def test_rejects_inverted_bounds(self):
        with pytest.raises(GenotypeError):
            ProblemSpec(m=1, K=2, d=1, descriptor_bounds=[[1.0, 0.0]])


class TestOnehot:
    def test_two_position_example(self):
        z = onehot_encode(np.array([0, 1]), _spec(m=2, K=2))
        assert np.array_equal(z, [[1.0, 0.0], [0.0, 1.0]])

    def test_single_position_example(self):
        z = onehot_encode(np.array([2]), _spec(m=1, K=3))
        assert np.array_equal(z, [[0.0, 0.0, 1.0]])

    def test_row_sums_are_one(self):
        rng = np.random.default_rng(7)
        spec = _spec(m=9, K=5)
        for _ in range(20):
            x = rng.integers(0, spec.K, size=spec.m)
            assert np.array_equal(onehot_encode(x, spec).sum(axis=1), np.ones(spec.m))

    def test_rejects_wrong_length(self):
        with pytest.raises(GenotypeError):
            onehot_encode(np.array([0, 1, 0]), _spec(m=2, K=2))

    def test_rejects_out_of_range_category(self):
        with pytest.raises(GenotypeError):
            validate_genotype(np.array([0, 2]), _spec(m=2, K=2))


class TestNeighbor:
    def test_single_substitution(self):
        assert np.array_equal(neighbor(np.array([0, 0]), 1, 1), [0, 1])
        assert np.array_equal(neighbor(np.array([2, 1, 0]), 2, 2), [2, 1, 2])

    def test_noop_flip_returns_equal_genotype(self):
        x = np.array([0, 0])
        assert np.array_equal(neighbor(x, 0, 0), x)

    def test_does_not_mutate_input(self):
        x = np.array([0, 0])
        neighbor(x, 0, 1)
        assert np.array_equal(x, [0, 0])

    def test_out_of_range_position(self):
        with pytest.raises(GenotypeError):
            neighbor(np.array([0, 0]), 2, 0)

    def test_hamming_distance_at_most_one(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            m, K = rng.integers(1, 8), rng.integers(2, 6)
            x = rng.integers(0, K, size=m)
            i, k = rng.integers(0, m), rng.integers(0, K)
            dist = int(np.sum(neighbor(x, i, k) != x))
            assert dist == (0 if k == x[i] else 1)


class TestGenotypeText:
    def test_round_trip(self):
        spec = _spec(m=4, K=4)
        x = np.array([0, 3, 1, 1])
        assert genotype_to_text(x) == "0 3 1 1"
        assert np.array_equal(genotype_from_text("0 3 1 1", spec), x)

    def test_rejects_garbage(self):
        with pytest.raises(GenotypeError):
            genotype_from_text("0 a", _spec(m=2, K=2))


class _ZeroProblem:
    """f and c identically zero, with zero gradients."""

    def __init__(self, m=3, K=3, d=2):
        self._spec = ProblemSpec(m=m, K=K, d=d, descriptor_bounds=np.tile([-1.0, 1.0], (d, 1)))

    @property
    def spec(self):
        return self._spec

    def evaluate(self, x):
        from qd_discrete import Evaluation

        return Evaluation(fitness=0.0, descriptor=np.zeros(self._spec.d))

    def gradients(self, x):
        from qd_discrete import GradientBundle

        s = self._spec
        return GradientBundle(
            fitness_grad=np.zeros((s.m, s.K)),
            descriptor_grads=np.zeros((s.d, s.m, s.K)),
        )

    def extension(self, z):
        return 0.0, np.zeros(self._spec.d)


class TestFiniteDifference:
    def test_linear_problem_is_exact(self):
        problem = make_separable_problem(5, 3, 2, seed=11)
        rng = np.random.default_rng(0)
        x = rng.integers(0, 3, size=5)
        assert finite_difference_check(problem, x, h=1e-4) <= 1e-9

    def test_zero_function_gives_zero_error(self):
        problem = _ZeroProblem()
        assert finite_difference_check(problem, np.array([0, 1, 2])) == 0.0

    def test_separable_gradients_at_random_genotypes(self):
        problem = make_separable_problem(6, 4, 3, seed=5)
        rng = np.random.default_rng(42)
        worst = max(
            finite_difference_check(problem, rng.integers(0, 4, size=6))
            for _ in range(100)
        )
        assert worst <= 1e-5

    def test_non_finite_extension_raises(self):
        problem = _ZeroProblem()
        problem.extension = lambda z: (float("nan"), np.zeros(2))
        with pytest.raises(NumericError):
            finite_difference_check(problem, np.array([0, 0, 0]))

    def test_evaluate_is_referentially_transparent(self):
        problem = make_separable_problem(7, 3, 2, seed=9)
        x = np.array([0, 2, 1, 0, 1, 2, 2])
        e1, e2 = problem.evaluate(x), problem.evaluate(x.copy())
        assert e1.fitness == e2.fitness
        assert np.array_equal(e1.descriptor, e2.descriptor)
