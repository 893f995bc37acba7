"""Model-level oracles: enumeration, invariances, and sampler frequencies."""

import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plmixture import (
    PLMixtureParams,
    RankingDataset,
    apply_censoring,
    deviance,
    membership_matrix,
    mixture_log_lik,
    modal_ordering,
    pl_log_prob,
    posterior_membership,
    sample_mixture_dataset,
    sample_pl,
)
from plmixture.plcore import component_log_probs


def brute_top_m_prob(prefix, p):
    """Probability of observing `prefix` as the first entries, by summing
    the stagewise product over nothing (the chain rule needs no summation)."""
    p = np.asarray(p, dtype=float)
    remaining = p.sum()
    prob = 1.0
    for i in prefix:
        prob *= p[i - 1] / remaining
        remaining -= p[i - 1]
    return prob


def positive_vectors(k):
    return st.lists(
        st.floats(0.05, 10.0, allow_nan=False), min_size=k, max_size=k
    )


class TestPLLogProb:
    def test_partial_oracle(self):
        p = (0.5, 0.3, 0.2)
        # first two stages: 0.5 * (0.3 / 0.5) = 0.3
        assert pl_log_prob((1, 2), p) == pytest.approx(math.log(0.3))

    def test_top1_oracle(self):
        assert pl_log_prob((3,), (0.5, 0.3, 0.2)) == pytest.approx(
            math.log(0.2)
        )

    def test_uniform_full_ordering(self):
        for k in (2, 3, 4):
            lp = pl_log_prob(tuple(range(1, k)), np.ones(k))
            assert lp == pytest.approx(-math.log(math.factorial(k)))

    def test_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            pl_log_prob((4,), (0.5, 0.3, 0.2))

    def test_enumeration_sums_to_one(self):
        rng = np.random.default_rng(0)
        for k in (2, 3, 4, 5):
            for _ in range(5):
                p = rng.uniform(0.1, 5.0, size=k)
                total = sum(
                    math.exp(pl_log_prob(perm[: k - 1], p))
                    for perm in itertools.permutations(range(1, k + 1))
                )
                assert total == pytest.approx(1.0, abs=1e-12)

    def test_top_m_marginal_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for k in (3, 4, 5):
            p = rng.uniform(0.2, 3.0, size=k)
            items = range(1, k + 1)
            for m in range(1, k - 1):
                for prefix in itertools.permutations(items, m):
                    rest = [i for i in items if i not in prefix]
                    # truncation maps the (k-m)! completions one-to-one
                    # onto the full orderings extending the prefix
                    brute = sum(
                        math.exp(pl_log_prob((prefix + tail)[: k - 1], p))
                        for tail in itertools.permutations(rest)
                    )
                    got = math.exp(pl_log_prob(prefix, p))
                    assert got == pytest.approx(brute, abs=1e-12)

    @given(st.integers(2, 5), st.floats(0.01, 100.0))
    def test_scale_invariance(self, k, scale):
        p = np.linspace(0.3, 1.7, k)
        lp = pl_log_prob(tuple(range(1, k)), p)
        assert pl_log_prob(tuple(range(1, k)), scale * p) == pytest.approx(
            lp, abs=1e-12
        )


class TestComponentLogProbs:
    def test_matches_scalar_path(self, mixed4):
        rng = np.random.default_rng(2)
        p = rng.uniform(0.1, 2.0, size=(3, 4))
        comp = component_log_probs(mixed4, p)
        assert comp.shape == (6, 3)
        for s, o in enumerate(mixed4.orderings):
            for g in range(3):
                assert comp[s, g] == pytest.approx(
                    pl_log_prob(o, p[g]), abs=1e-12
                )

    def test_one_dimensional_input(self, toy3):
        comp = component_log_probs(toy3, (0.5, 0.3, 0.2))
        assert comp.shape == (3, 1)

    def test_rejects_nonpositive(self, toy3):
        with pytest.raises(ValueError, match="positive"):
            component_log_probs(toy3, (0.5, 0.0, 0.2))


class TestParams:
    def test_canonical_rescales_rows(self):
        params = PLMixtureParams([[2.0, 1.0, 1.0]], [1.0])
        canon = params.canonical()
        assert canon.supports[0].sum() == pytest.approx(1.0)
        assert canon.supports[0, 0] == pytest.approx(0.5)
        # likelihood is untouched by the rescaling
        ds = RankingDataset(3, [(1, 2), (3,)])
        assert mixture_log_lik(ds, canon) == pytest.approx(
            mixture_log_lik(ds, params)
        )

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            PLMixtureParams([[1, 1], [1, 1]], [0.8, 0.8])

    def test_rejects_negative_support(self):
        with pytest.raises(ValueError):
            PLMixtureParams([[1.0, -1.0]], [1.0])

    def test_json_round_trip(self, sep_params):
        doc = json.loads(sep_params.to_json())
        assert doc["G"] == 2
        back = PLMixtureParams.from_json(sep_params.to_json())
        assert np.allclose(back.supports, sep_params.supports)
        assert np.allclose(back.weights, sep_params.weights)

    def test_permuted(self, sep_params):
        flipped = sep_params.permuted([1, 0])
        assert np.allclose(flipped.supports[0], sep_params.supports[1])
        assert np.allclose(flipped.weights, sep_params.weights[::-1])


class TestMixture:
    def test_single_component_matches_sum(self, mixed4):
        p = np.array([0.4, 0.3, 0.2, 0.1])
        params = PLMixtureParams(p[None, :], [1.0])
        direct = sum(pl_log_prob(o, p) for o in mixed4.orderings)
        assert mixture_log_lik(mixed4, params) == pytest.approx(direct)

    def test_identical_components_collapse(self, mixed4):
        p = np.array([0.4, 0.3, 0.2, 0.1])
        one = PLMixtureParams(p[None, :], [1.0])
        two = PLMixtureParams(np.vstack([p, p]), [0.3, 0.7])
        assert mixture_log_lik(mixed4, two) == pytest.approx(
            mixture_log_lik(mixed4, one)
        )

    def test_deviance_sign(self, mixed4):
        params = PLMixtureParams(
            np.vstack(
                [[0.4, 0.3, 0.2, 0.1], [0.1, 0.2, 0.3, 0.4]]
            ),
            [0.5, 0.5],
        )
        assert deviance(mixed4, params) == pytest.approx(
            -2.0 * mixture_log_lik(mixed4, params)
        )

    def test_full_orderings_normalize(self):
        # all 6 full orderings of 3 items have unit total mass per unit
        params = PLMixtureParams(
            [[0.5, 0.3, 0.2], [0.2, 0.5, 0.3]], [0.4, 0.6]
        )
        total = 0.0
        for perm in itertools.permutations((1, 2, 3)):
            ds = RankingDataset(3, [perm[:2]])
            total += math.exp(mixture_log_lik(ds, params))
        assert total == pytest.approx(1.0, abs=1e-12)


class TestPosteriorMembership:
    def test_two_component_oracle(self):
        params = PLMixtureParams(
            [[0.5, 0.3, 0.2], [1 / 3, 1 / 3, 1 / 3]], [0.5, 0.5]
        )
        post = posterior_membership((1, 2), params)
        # likelihoods 0.3 and 1/6 at equal weights
        assert post[0] == pytest.approx(0.3 / (0.3 + 1 / 6))
        assert post == pytest.approx([0.642857, 0.357143], abs=5e-7)

    def test_certain_weight(self):
        params = PLMixtureParams(
            [[0.5, 0.3, 0.2], [1 / 3, 1 / 3, 1 / 3]], [1.0, 0.0]
        )
        assert posterior_membership((1, 2), params).tolist() == [1.0, 0.0]

    def test_matrix_agrees_rowwise(self, mixed4):
        params = PLMixtureParams(
            [[0.4, 0.3, 0.2, 0.1], [0.1, 0.2, 0.3, 0.4]], [0.25, 0.75]
        )
        mat = membership_matrix(mixed4, params)
        assert np.allclose(mat.sum(axis=1), 1.0)
        for s, o in enumerate(mixed4.orderings):
            assert mat[s] == pytest.approx(
                posterior_membership(o, params), abs=1e-12
            )


class TestModalOrdering:
    def test_oracle(self):
        assert modal_ordering((0.1, 0.7, 0.2)) == (2, 3, 1)

    def test_uniform_breaks_ties_by_index(self):
        assert modal_ordering(np.ones(4) / 4) == (1, 2, 3, 4)

    def test_six_items(self):
        p = (0.079, 0.263, 0.185, 0.191, 0.071, 0.211)
        assert modal_ordering(p) == (2, 6, 4, 3, 1, 5)

    def test_scale_invariant(self):
        p = np.array([0.3, 0.5, 0.2])
        assert modal_ordering(p) == modal_ordering(40.0 * p)


class TestSamplePL:
    def test_shape_and_distinctness(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            o = sample_pl((0.5, 0.3, 0.2), 2, rng)
            assert len(o) == 2
            assert 1 <= min(o.items) and max(o.items) <= 3

    def test_bad_length(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ValueError):
            sample_pl((0.5, 0.5), 2, rng)

    def test_top_item_frequency(self):
        rng = np.random.default_rng(4)
        n = 4000
        hits = sum(sample_pl((0.5, 0.3, 0.2), 1, rng)[0] == 1 for _ in range(n))
        assert abs(hits / n - 0.5) < 3 * math.sqrt(0.25 / n)

    def test_race_frequencies_large_sample(self):
        # the vectorized race behind both public samplers
        from plmixture.plcore import _race_orderings

        rng = np.random.default_rng(4)
        n = 1_000_000
        p = np.tile([0.5, 0.3, 0.2], (n, 1))
        orders = _race_orderings(p, rng)
        both = ((orders[:, 0] == 0) & (orders[:, 1] == 1)).mean()
        assert abs(both - 0.3) < 3 * math.sqrt(0.3 * 0.7 / n)


class TestSampleMixture:
    def test_labels_one_based_and_balanced(self, sep_params):
        rng = np.random.default_rng(5)
        n = 20_000
        ds, labels = sample_mixture_dataset(sep_params, n, 4, rng)
        assert ds.n_units == n
        assert set(np.unique(labels)) == {1, 2}
        frac = (labels == 1).mean()
        assert abs(frac - 0.6) < 3 * math.sqrt(0.24 / n)

    def test_single_component(self):
        rng = np.random.default_rng(6)
        params = PLMixtureParams([[0.5, 0.3, 0.2]], [1.0])
        ds, labels = sample_mixture_dataset(params, 25, 2, rng)
        assert np.all(labels == 1)
        assert np.all(ds.lengths == 2)

    def test_per_unit_lengths(self, sep_params):
        rng = np.random.default_rng(7)
        lengths = np.array([1, 2, 3, 4, 4, 1])
        ds, _ = sample_mixture_dataset(sep_params, 6, lengths, rng)
        assert ds.lengths.tolist() == lengths.tolist()


class TestApplyCensoring:
    def full_dataset(self, n, seed=8):
        rng = np.random.default_rng(seed)
        params = PLMixtureParams([[0.4, 0.3, 0.2, 0.1]], [1.0])
        ds, _ = sample_mixture_dataset(params, n, 3, rng)
        return ds

    def test_identity_setting(self):
        ds = self.full_dataset(40)
        out = apply_censoring(ds, {3: 1.0}, np.random.default_rng(9))
        assert out == ds

    def test_length_distribution(self):
        ds = self.full_dataset(100_000)
        probs = {1: 0.3, 2: 0.0, 3: 0.7}
        out = apply_censoring(ds, probs, np.random.default_rng(10))
        frac = (out.lengths == 1).mean()
        assert abs(frac - 0.3) < 3 * math.sqrt(0.21 / ds.n_units)
        assert not np.any(out.lengths == 2)

    def test_prefixes_preserved(self):
        ds = self.full_dataset(200)
        out = apply_censoring(ds, {1: 0.5, 3: 0.5}, np.random.default_rng(11))
        for a, b in zip(ds.orderings, out.orderings):
            assert b.items == a.items[: len(b)]

    def test_rejects_bad_proportions(self):
        ds = self.full_dataset(10)
        with pytest.raises(ValueError):
            apply_censoring(ds, {1: 0.5, 3: 0.6}, np.random.default_rng(1))

    def test_requires_full_orderings(self):
        ds = RankingDataset(4, [(1,), (2, 3, 4)])
        with pytest.raises(ValueError):
            apply_censoring(ds, {1: 1.0}, np.random.default_rng(1))
