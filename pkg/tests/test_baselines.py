import math

import numpy as np
import pytest

from qd_discrete import (
    CmaEmitterState,
    CmaSampleResult,
    ConfigError,
    Evaluation,
    GenotypeError,
    GradientBundle,
    InsertionOutcome,
    OmgMegaConfig,
    ProblemSpec,
    Repertoire,
    Tessellation,
    cma_me_emit,
    cma_me_update,
    omg_mega_emit,
    one_point_crossover,
    onehot_encode,
    project_to_discrete,
    random_point_mutation,
)


def _spec(m, K, d=1):
    return ProblemSpec(m=m, K=K, d=d, descriptor_bounds=np.tile([0.0, 1.0], (d, 1)))


class TestRandomPointMutation:
    def test_binary_single_position_is_forced(self):
        out = random_point_mutation(np.array([0]), 1, 2, np.random.default_rng(0))
        assert np.array_equal(out, [1])

    def test_single_flip_hamming_distance_one(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            x = rng.integers(0, 5, size=6)
            y = random_point_mutation(x, 1, 5, rng)
            assert int(np.sum(x != y)) == 1

    def test_never_returns_input(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            x = rng.integers(0, 3, size=4)
            n = int(rng.integers(1, 5))
            assert not np.array_equal(random_point_mutation(x, n, 3, rng), x)

    def test_pair_frequencies_uniform(self):
        m, K = 4, 4
        rng = np.random.default_rng(3)
        x = rng.integers(0, K, size=m)
        counts = np.zeros((m, K))
        n = 100_000
        for _ in range(n):
            y = random_point_mutation(x, 1, K, rng)
            pos = int(np.flatnonzero(y != x)[0])
            counts[pos, y[pos]] += 1
        p = 1 / (m * (K - 1))
        sd = math.sqrt(n * p * (1 - p))
        for i in range(m):
            for k in range(K):
                if k != x[i]:
                    assert abs(counts[i, k] - n * p) < 3 * sd

    def test_rejects_bad_flip_count(self):
        with pytest.raises(ConfigError):
            random_point_mutation(np.array([0, 1]), 3, 2, np.random.default_rng(0))
        with pytest.raises(ConfigError):
            random_point_mutation(np.array([0, 1]), 0, 2, np.random.default_rng(0))


class TestOnePointCrossover:
    def test_identical_parents_reproduce(self):
        a = np.array([1, 2, 0, 1])
        child = one_point_crossover(a, a.copy(), np.random.default_rng(0))
        assert np.array_equal(child, a)

    def test_fixed_cut_example(self):
        # Cut at 2 splices (0,0,1,1); scan seeds for the cut we want.
        a, b = np.zeros(4, dtype=int), np.ones(4, dtype=int)
        for seed in range(50):
            rng = np.random.default_rng(seed)
            if np.random.default_rng(seed).integers(1, 4) == 2:
                child = one_point_crossover(a, b, rng)
                assert np.array_equal(child, [0, 0, 1, 1])
                return
        pytest.fail("no seed produced cut=2")

    def test_child_structure(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            m = int(rng.integers(2, 9))
            a = rng.integers(0, 4, size=m)
            b = rng.integers(0, 4, size=m)
            child = one_point_crossover(a, b, rng)
            cuts = [c for c in range(1, m) if np.array_equal(child, np.concatenate([a[:c], b[c:]]))]
            assert cuts, "child is not a one-point splice of its parents"

    def test_rejects_short_genotypes(self):
        with pytest.raises(ConfigError):
            one_point_crossover(np.array([0]), np.array([1]), np.random.default_rng(0))


class TestProjectToDiscrete:
    def test_identity_on_one_hot_vertices(self):
        spec = _spec(5, 3)
        rng = np.random.default_rng(7)
        for _ in range(50):
            x = rng.integers(0, 3, size=5)
            z = onehot_encode(x, spec)
            assert np.array_equal(project_to_discrete(z.ravel(), spec), x)

    def test_row_argmax(self):
        spec = _spec(1, 3)
        assert project_to_discrete(np.array([0.2, 0.9, 0.1]), spec)[0] == 1

    def test_tie_breaks_to_lowest_category(self):
        spec = _spec(1, 2)
        assert project_to_discrete(np.array([0.5, 0.5]), spec)[0] == 0

    def test_rejects_wrong_length(self):
        with pytest.raises(GenotypeError):
            project_to_discrete(np.zeros(5), _spec(2, 3))


class TestOmgMegaEmit:
    def test_zero_gradients_return_parent(self):
        spec = _spec(4, 3, d=2)
        bundle = GradientBundle(np.zeros((4, 3)), np.zeros((2, 4, 3)))
        x = np.array([0, 2, 1, 0])
        out = omg_mega_emit([(x, bundle)], OmgMegaConfig(1.0), np.random.default_rng(0), spec)
        assert np.array_equal(out[0], x)

    def test_strong_push_flips_target_entry(self):
        # A +2 gradient on entry (0, 1) beats the one-hot 1.0 at (0, 0) after
        # normalization and any positive |w0|.
        spec = _spec(3, 2, d=1)
        fg = np.zeros((3, 2))
        fg[0, 1] = 2.0
        bundle = GradientBundle(fg, np.zeros((1, 3, 2)))
        x = np.array([0, 0, 0])
        rng = np.random.default_rng(1)
        for _ in range(20):
            out = omg_mega_emit([(x, bundle)], OmgMegaConfig(10.0), rng, spec)[0]
            assert out[0] in (0, 1)
            assert np.array_equal(out[1:], [0, 0])
        # with sigma_g large the step is +-10 on average: flip happens whenever
        # |w0| * 1.0 > 1.0, i.e. most draws
        flips = sum(
            omg_mega_emit([(x, bundle)], OmgMegaConfig(10.0), np.random.default_rng(s), spec)[0][0]
            for s in range(100)
        )
        assert flips > 50

    def test_deterministic_given_rng(self):
        spec = _spec(4, 4, d=2)
        rng = np.random.default_rng(9)
        batch = []
        for _ in range(5):
            x = rng.integers(0, 4, size=4)
            batch.append((x, GradientBundle(rng.normal(size=(4, 4)), rng.normal(size=(2, 4, 4)))))
        a = omg_mega_emit(batch, OmgMegaConfig(2.0), np.random.default_rng(3), spec)
        b = omg_mega_emit(batch, OmgMegaConfig(2.0), np.random.default_rng(3), spec)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))


def _fresh_emitter(m=2, K=2, sigma0=0.5, diagonal=False, generated=0):
    mean = np.full(m * K, 1.0 / K)
    return CmaEmitterState.fresh(mean, sigma0, m, K, diagonal, solutions_generated=generated)


def _repertoire_with_elites():
    tess = Tessellation(np.array([[0.0], [1.0]]))
    rep = Repertoire(tess, 2)
    rep.try_insert(np.array([0, 1]), Evaluation(1.0, np.array([0.0])))
    rep.try_insert(np.array([1, 0]), Evaluation(2.0, np.array([1.0])))
    return rep


class TestCmaEmit:
    def test_single_emitter_takes_whole_batch(self):
        emitters = [_fresh_emitter()]
        genotypes, bookkeeping = cma_me_emit(emitters, 4, np.random.default_rng(0))
        assert len(genotypes) == 4
        assert emitters[0].solutions_generated == 4
        assert all(idx == 0 for idx, _ in bookkeeping)

    def test_least_generated_emitter_wins(self):
        emitters = [_fresh_emitter(generated=0), _fresh_emitter(generated=5)]
        _, bookkeeping = cma_me_emit(emitters, 3, np.random.default_rng(0))
        assert [idx for idx, _ in bookkeeping] == [0, 0, 0]

    def test_counters_stay_balanced(self):
        emitters = [_fresh_emitter(generated=g) for g in (3, 0, 1)]
        cma_me_emit(emitters, 17, np.random.default_rng(1))
        counts = [e.solutions_generated for e in emitters]
        assert max(counts) - min(counts) <= 17

    def test_tiny_sigma_projects_the_mean(self):
        mean = onehot_encode(np.array([1, 0]), _spec(2, 2)).ravel()
        emitter = CmaEmitterState.fresh(mean, 1e-12, 2, 2)
        genotypes, _ = cma_me_emit([emitter], 5, np.random.default_rng(2))
        assert all(np.array_equal(g, [1, 0]) for g in genotypes)

    def test_no_emitters_is_an_error(self):
        with pytest.raises(ConfigError):
            cma_me_emit([], 1, np.random.default_rng(0))


def _result(sample, fitness, improvement, outcome):
    return CmaSampleResult(
        sample=np.asarray(sample, dtype=float),
        fitness=fitness,
        improvement=improvement,
        outcome=outcome,
    )


class TestCmaUpdate:
    def test_all_rejected_triggers_restart(self):
        emitter = _fresh_emitter(sigma0=0.7)
        emitter.sigma = 0.1  # drift the state so the restart is visible
        results = [
            _result(np.zeros(4), 0.0, -1.0, InsertionOutcome.REJECTED) for _ in range(4)
        ]
        updated = cma_me_update(emitter, results, _repertoire_with_elites(), np.random.default_rng(0))
        assert updated.sigma == 0.7
        assert np.array_equal(updated.cov, np.eye(4))
        assert updated.generation == 0
        # restart mean is the one-hot encoding of an archived elite
        assert set(np.unique(updated.mean)) == {0.0, 1.0}
        assert updated.solutions_generated == emitter.solutions_generated

    def test_equal_improvements_mean_is_plain_average_of_top_half(self):
        emitter = _fresh_emitter()
        rng = np.random.default_rng(4)
        samples = [rng.normal(size=4) for _ in range(6)]
        results = [
            _result(s, 1.0, 0.5, InsertionOutcome.REPLACED) for s in samples
        ]
        updated = cma_me_update(emitter, results, _repertoire_with_elites(), np.random.default_rng(0))
        # stable ranking keeps generation order, mu = 3
        np.testing.assert_allclose(updated.mean, np.mean(samples[:3], axis=0), atol=1e-12)

    def test_new_cells_rank_above_replacements(self):
        emitter = _fresh_emitter()
        low_new = _result(np.zeros(4), 0.1, 0.1, InsertionOutcome.ADDED_EMPTY)
        big_replacement = _result(np.ones(4), 9.0, 5.0, InsertionOutcome.REPLACED)
        updated = cma_me_update(
            emitter, [big_replacement, low_new], _repertoire_with_elites(), np.random.default_rng(0)
        )
        # mu = 1: the new-cell sample alone drives the mean
        np.testing.assert_allclose(updated.mean, np.zeros(4), atol=1e-12)

    def test_single_added_sample_moves_mean_to_it(self):
        emitter = _fresh_emitter()
        target = np.array([2.0, 0.0, 0.0, 2.0])
        updated = cma_me_update(
            emitter,
            [_result(target, 1.0, 1.0, InsertionOutcome.ADDED_EMPTY)],
            _repertoire_with_elites(),
            np.random.default_rng(0),
        )
        np.testing.assert_allclose(updated.mean, target, atol=1e-12)

    def test_covariance_stays_positive_definite_over_generations(self):
        rng = np.random.default_rng(11)
        emitter = _fresh_emitter(m=2, K=3)
        rep = _repertoire_with_elites()
        for _ in range(30):
            results = [
                _result(
                    emitter.mean + emitter.sigma * rng.normal(size=6),
                    float(rng.normal()),
                    float(rng.normal()),
                    InsertionOutcome.REPLACED if rng.random() < 0.7 else InsertionOutcome.REJECTED,
                )
                for _ in range(6)
            ]
            emitter = cma_me_update(emitter, results, rep, rng)
            if not emitter.diagonal:
                assert np.all(np.linalg.eigvalsh(emitter.cov) > 0)

    def test_diagonal_mode_updates(self):
        rng = np.random.default_rng(13)
        emitter = _fresh_emitter(m=3, K=2, diagonal=True)
        results = [
            _result(emitter.mean + rng.normal(size=6), 1.0, 1.0, InsertionOutcome.ADDED_EMPTY)
            for _ in range(4)
        ]
        updated = cma_me_update(emitter, results, _repertoire_with_elites(), rng)
        assert updated.cov.shape == (6,)
        assert np.all(updated.cov > 0)
