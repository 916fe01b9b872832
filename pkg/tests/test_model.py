import json

import numpy as np
import pytest

from permsense.errors import ConfigInvalid, DimensionMismatch, InvalidSparsity
from permsense.model import (
    ProblemConfig,
    ProblemInstance,
    SparsePermutation,
    assemble_instance,
    generate_instance,
    noise_sigma_from_percent,
    permutation_error_vector,
    sample_sparse_permutation,
)

# chi-square critical value, df = 19, significance 1e-3
CHI2_CRIT_19_999 = 43.8202


def rng(seed=0):
    return np.random.default_rng(seed)


class TestSparsePermutation:
    def test_identity(self):
        perm = SparsePermutation.identity(6)
        assert perm.n_displaced == 0
        assert np.array_equal(perm.apply(np.arange(6.0)), np.arange(6.0))

    def test_not_bijection_rejected(self):
        with pytest.raises(ValueError):
            SparsePermutation(3, np.array([0, 0, 2]))

    def test_inverse_round_trip(self):
        perm = sample_sparse_permutation(9, 4, rng(2))
        v = rng(3).standard_normal(9)
        assert np.allclose(perm.inverse().apply(perm.apply(v)), v)


class TestSampleSparsePermutation:
    def test_k_zero_identity(self):
        perm = sample_sparse_permutation(10, 0, rng(1))
        assert perm.support.size == 0

    def test_k_two_transposition(self):
        perm = sample_sparse_permutation(10, 2, rng(5))
        i, j = perm.support
        assert perm.mapping[i] == j and perm.mapping[j] == i

    def test_exact_support_and_no_fixed_points(self):
        for trial in range(10_000):
            perm = sample_sparse_permutation(8, 5, rng((9, trial)))
            assert perm.support.size == 5
            sub = perm.mapping[perm.support]
            assert not np.any(sub == perm.support)

    def test_k_one_rejected(self):
        with pytest.raises(InvalidSparsity):
            sample_sparse_permutation(10, 1, rng())

    def test_k_too_large_rejected(self):
        with pytest.raises(InvalidSparsity):
            sample_sparse_permutation(4, 5, rng())

    def test_at_most_mode(self):
        sizes = {
            sample_sparse_permutation(10, 4, rng((3, t)), exact=False).n_displaced
            for t in range(300)
        }
        assert sizes == {0, 2, 3, 4}

    def test_uniformity_smoke(self):
        # (5, 3): C(5,3) = 10 displaced subsets x 2 derangements of three
        # elements = 20 equally likely outcomes
        counts = {}
        n_draws = 10_000
        for trial in range(n_draws):
            perm = sample_sparse_permutation(5, 3, rng((17, trial)))
            key = (tuple(perm.support), tuple(perm.mapping[perm.support]))
            counts[key] = counts.get(key, 0) + 1
        assert len(counts) == 20
        expected = n_draws / 20
        chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
        assert chi2 < CHI2_CRIT_19_999


class TestPermutationErrorVector:
    def test_identity_gives_zero(self):
        g = rng(4)
        a2 = g.standard_normal((8, 3))
        x0 = g.standard_normal(3)
        z0 = permutation_error_vector(SparsePermutation.identity(8), a2, x0)
        assert np.allclose(z0, 0)

    def test_swap_algebra(self):
        g = rng(8)
        a2 = g.standard_normal((6, 2))
        x0 = g.standard_normal(2)
        mapping = np.arange(6)
        mapping[1], mapping[4] = 4, 1
        perm = SparsePermutation(6, mapping)
        ax = a2 @ x0
        z0 = permutation_error_vector(perm, a2, x0)
        assert np.isclose(z0[1], ax[4] - ax[1])
        assert np.isclose(z0[4], ax[1] - ax[4])
        assert np.allclose(np.delete(z0, [1, 4]), 0)

    def test_sparsity_and_magnitude_bounds(self):
        g = rng(13)
        a2 = g.standard_normal((12, 4))
        x0 = g.standard_normal(4)
        perm = sample_sparse_permutation(12, 4, g)
        z0 = permutation_error_vector(perm, a2, x0)
        assert np.count_nonzero(z0) <= 4
        assert np.max(np.abs(z0)) <= 2 * np.max(np.abs(a2 @ x0))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            permutation_error_vector(
                SparsePermutation.identity(3), np.ones((4, 2)), np.ones(2)
            )


class TestNoiseSigma:
    def test_zero_percent(self):
        assert noise_sigma_from_percent(0.0, np.eye(3), np.ones(3)) == 0.0

    def test_unit_mean_absolute(self):
        # A x0 = (1, -1, 1, -1): mean absolute value 1, so 2% -> 0.02
        a = np.array([[1.0], [-1.0], [1.0], [-1.0]])
        assert np.isclose(noise_sigma_from_percent(2.0, a, [1.0]), 0.02)

    def test_linear_in_percentage(self):
        g = rng(21)
        a = g.standard_normal((9, 3))
        x0 = g.standard_normal(3)
        assert np.isclose(
            noise_sigma_from_percent(4.0, a, x0),
            2.0 * noise_sigma_from_percent(2.0, a, x0),
        )

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            noise_sigma_from_percent(-1.0, np.eye(2), np.ones(2))


class TestProblemConfig:
    def test_m_not_less_than_d(self):
        with pytest.raises(ConfigInvalid):
            ProblemConfig(d=5, m=6, p=8, k=0, sigma=0.0)

    def test_p_not_greater_than_d(self):
        with pytest.raises(ConfigInvalid):
            ProblemConfig(d=5, m=2, p=5, k=0, sigma=0.0)

    def test_k_one_rejected(self):
        with pytest.raises(InvalidSparsity):
            ProblemConfig(d=5, m=2, p=8, k=1, sigma=0.0)

    def test_noise_spec_exclusive(self):
        with pytest.raises(ConfigInvalid):
            ProblemConfig(d=5, m=2, p=8, k=0)
        with pytest.raises(ConfigInvalid):
            ProblemConfig(d=5, m=2, p=8, k=0, sigma=0.1, noise_percent=2.0)


class TestGenerateInstance:
    def test_noiseless_unpermuted_exact(self):
        inst = generate_instance(ProblemConfig(d=5, m=2, p=8, k=0, sigma=0.0, seed=1))
        assert np.allclose(inst.y1, inst.a1 @ inst.x0)
        assert np.allclose(inst.y2, inst.a2 @ inst.x0)

    def test_noiseless_permuted_matches_error_vector(self):
        inst = generate_instance(ProblemConfig(d=5, m=2, p=8, k=3, sigma=0.0, seed=2))
        diff = inst.y2 - inst.a2 @ inst.x0
        assert np.allclose(diff, inst.z0)
        assert np.count_nonzero(diff) <= 3

    def test_deterministic(self):
        cfg = ProblemConfig(d=4, m=1, p=7, k=2, noise_percent=3.0, seed=11)
        a = generate_instance(cfg)
        b = generate_instance(cfg)
        for name in ("a1", "a2", "x0", "y1", "y2", "z0", "eps1", "eps2"):
            assert np.array_equal(getattr(a, name), getattr(b, name))
        assert np.array_equal(a.perm.mapping, b.perm.mapping)
        assert a.sigma == b.sigma

    def test_split_model_consistency(self):
        inst = generate_instance(ProblemConfig(d=6, m=3, p=10, k=4, noise_percent=2.0, seed=5))
        assert np.allclose(inst.y1, inst.a1 @ inst.x0 + inst.eps1)
        assert np.allclose(inst.y2, inst.perm.apply(inst.a2 @ inst.x0) + inst.eps2)
        # the additive-outlier rewrite holds to machine precision
        assert np.allclose(inst.y2, inst.a2 @ inst.x0 + inst.z0 + inst.eps2)

    def test_inverse_permutation_recovers(self):
        inst = generate_instance(ProblemConfig(d=4, m=2, p=9, k=3, sigma=0.0, seed=8))
        ax = inst.a2 @ inst.x0
        assert np.allclose(inst.perm.inverse().apply(inst.perm.apply(ax)), ax)

    def test_z0_bounds_across_draws(self):
        for seed in range(20):
            inst = generate_instance(
                ProblemConfig(d=5, m=2, p=12, k=4, noise_percent=2.0, seed=seed)
            )
            assert np.count_nonzero(inst.z0) <= 4
            a_full = np.vstack([inst.a1, inst.a2])
            assert np.max(np.abs(inst.z0)) <= 2 * np.max(np.abs(a_full @ inst.x0))

    def test_supplied_x0(self):
        x0 = np.arange(1.0, 6.0)
        inst = generate_instance(ProblemConfig(d=5, m=2, p=8, k=0, sigma=0.0, seed=3), x0=x0)
        assert np.array_equal(inst.x0, x0)

    def test_fields_immutable(self):
        inst = generate_instance(ProblemConfig(d=4, m=1, p=6, k=0, sigma=0.0, seed=4))
        with pytest.raises(ValueError):
            inst.x0[0] = 99.0


class TestSerialization:
    def test_round_trip(self):
        inst = generate_instance(ProblemConfig(d=4, m=2, p=7, k=3, noise_percent=2.0, seed=21))
        back = ProblemInstance.from_json(inst.to_json())
        for name in ("a1", "a2", "x0", "y1", "y2"):
            assert np.allclose(getattr(back, name), getattr(inst, name))
        assert np.array_equal(back.perm.mapping, inst.perm.mapping)
        assert back.sigma == inst.sigma
        assert back.seed == 21
        assert np.allclose(back.z0, inst.z0)
        assert np.allclose(back.eps2, inst.eps2)

    def test_schema_fields(self):
        inst = generate_instance(ProblemConfig(d=3, m=1, p=5, k=0, sigma=0.0, seed=1))
        doc = json.loads(inst.to_json())
        assert set(doc) == {"d", "m", "p", "k", "sigma", "seed",
                            "a1", "a2", "x0", "mapping", "y1", "y2"}


def test_assemble_instance_respects_inputs():
    g = rng(30)
    a1 = g.standard_normal((2, 4))
    a2 = g.standard_normal((9, 4))
    x0 = g.standard_normal(4)
    perm = sample_sparse_permutation(9, 2, g)
    inst = assemble_instance(a1, a2, x0, perm, 0.0, g)
    assert np.allclose(inst.y2, perm.apply(a2 @ x0))
    assert inst.m == 2 and inst.p == 9 and inst.k == 2
