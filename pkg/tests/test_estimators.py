"""Estimator facade: scikit-learn conventions over both fitting pipelines."""

import numpy as np
import pytest
from sklearn.base import clone

from plmixture import (
    PLMixtureGibbs,
    PLMixtureMAP,
    PriorHyper,
    RankingDataset,
    membership_matrix,
    mixture_log_lik,
)


@pytest.fixture(scope="module")
def fitted_map(request):
    ds = request.getfixturevalue("sep_dataset")[0]
    est = PLMixtureMAP(n_components=2, n_starts=3, random_state=5).fit(ds)
    return ds, est


@pytest.fixture(scope="module")
def fitted_gibbs(request):
    ds = request.getfixturevalue("sep_dataset")[0]
    est = PLMixtureGibbs(
        n_components=2,
        n_iter=400,
        burn_in=100,
        n_starts=2,
        random_state=11,
    ).fit(ds)
    return ds, est


class TestSkLearnProtocol:
    def test_get_params_round_trip(self):
        est = PLMixtureMAP(n_components=3, n_starts=4, random_state=1)
        params = est.get_params()
        assert params["n_components"] == 3
        assert params["n_starts"] == 4
        rebuilt = PLMixtureMAP(**params)
        assert rebuilt.get_params() == params

    def test_set_params(self):
        est = PLMixtureGibbs()
        est.set_params(n_components=2, thin=5)
        assert est.n_components == 2
        assert est.thin == 5

    def test_clone(self):
        est = PLMixtureGibbs(n_components=2, n_iter=50, random_state=3)
        twin = clone(est)
        assert twin.get_params() == est.get_params()
        assert twin is not est

    def test_unfitted_raises(self, toy3):
        for est in (PLMixtureMAP(), PLMixtureGibbs()):
            with pytest.raises(RuntimeError, match="not fitted"):
                est.predict(toy3)


class TestMAPEstimator:
    def test_fit_attributes(self, fitted_map):
        ds, est = fitted_map
        assert est.n_items_ == 5
        assert est.params_.supports.shape == (2, 5)
        assert np.allclose(est.params_.supports.sum(axis=1), 1.0)
        assert est.result_.params is est.params_
        assert est.n_iter_ >= 1
        assert np.isfinite(est.log_posterior_)

    def test_predict_proba_simplex(self, fitted_map):
        ds, est = fitted_map
        proba = est.predict_proba(ds)
        assert proba.shape == (ds.n_units, 2)
        assert np.all(proba >= 0.0)
        assert np.allclose(proba.sum(axis=1), 1.0)
        assert np.array_equal(proba, membership_matrix(ds, est.params_))

    def test_predict_is_argmax(self, fitted_map):
        ds, est = fitted_map
        labels = est.predict(ds)
        assert labels.shape == (ds.n_units,)
        assert set(labels.tolist()) <= {0, 1}
        assert np.array_equal(labels, est.predict_proba(ds).argmax(axis=1))

    def test_score_is_mean_log_lik(self, fitted_map):
        ds, est = fitted_map
        assert est.score(ds) == pytest.approx(
            mixture_log_lik(ds, est.params_) / ds.n_units
        )

    def test_fit_reproducible(self, fitted_map):
        ds, est = fitted_map
        again = PLMixtureMAP(n_components=2, n_starts=3, random_state=5).fit(ds)
        assert np.array_equal(again.params_.supports, est.params_.supports)
        assert np.array_equal(again.params_.weights, est.params_.weights)

    def test_accepts_sequences(self):
        rows = [(1, 2), (2, 1), (1, 3), (3,)]
        est = PLMixtureMAP(n_components=1, n_starts=1, random_state=0).fit(rows)
        assert est.n_items_ == 3

    def test_n_items_override(self):
        rows = [(1, 2), (2, 1)]
        est = PLMixtureMAP(
            n_components=1, n_starts=1, n_items=4, random_state=0
        ).fit(rows)
        assert est.n_items_ == 4
        assert est.params_.supports.shape == (1, 4)

    def test_flat_prior_accepted(self, toy3):
        est = PLMixtureMAP(
            n_components=1,
            prior=PriorHyper.flat(1, 3),
            n_starts=1,
            random_state=0,
        ).fit(toy3)
        assert est.converged_

    def test_sample_shapes(self, fitted_map):
        _, est = fitted_map
        ds, labels = est.sample(25, random_state=0)
        assert isinstance(ds, RankingDataset)
        assert ds.n_units == 25
        assert ds.n_items == 5
        assert labels.shape == (25,)
        assert set(labels.tolist()) <= {0, 1}

    def test_sample_reproducible(self, fitted_map):
        _, est = fitted_map
        a, la = est.sample(10, lengths=2, random_state=7)
        b, lb = est.sample(10, lengths=2, random_state=7)
        assert a == b
        assert np.array_equal(la, lb)
        assert set(a.lengths.tolist()) == {2}


class TestGibbsEstimator:
    def test_fit_attributes(self, fitted_gibbs):
        ds, est = fitted_gibbs
        assert est.chain_.n_draws == 300
        assert est.relabeled_.chain.n_draws == 300
        assert est.dataset_ is not None
        assert est.params_.supports.shape == (2, 5)
        assert np.allclose(est.params_.supports.sum(axis=1), 1.0)
        assert np.array_equal(
            est.summary_.params.supports, est.params_.supports
        )

    def test_point_estimate_is_relabeled_mean(self, fitted_gibbs):
        _, est = fitted_gibbs
        mean = est.relabeled_.chain.canonical_supports().mean(axis=0)
        assert np.allclose(est.params_.supports, mean)

    def test_recovers_separated_components(self, fitted_gibbs, sep_params):
        _, est = fitted_gibbs
        fitted = est.params_.supports
        truth = sep_params.supports
        direct = np.abs(fitted - truth).sum()
        swapped = np.abs(fitted[::-1] - truth).sum()
        assert min(direct, swapped) < 0.6

    def test_predict_uses_posterior_mean(self, fitted_gibbs):
        ds, est = fitted_gibbs
        labels = est.predict(ds)
        assert labels.shape == (ds.n_units,)
        assert set(labels.tolist()) == {0, 1}

    def test_fit_reproducible(self, fitted_gibbs):
        ds, est = fitted_gibbs
        again = PLMixtureGibbs(
            n_components=2,
            n_iter=400,
            burn_in=100,
            n_starts=2,
            random_state=11,
        ).fit(ds)
        assert np.array_equal(
            again.chain_.supports, est.chain_.supports
        )
        assert np.array_equal(
            again.params_.supports, est.params_.supports
        )

    def test_criteria_delegates(self, fitted_gibbs):
        ds, est = fitted_gibbs
        report = est.criteria()
        assert report.n_components == 2
        assert report.n_units == ds.n_units
        assert np.isfinite(report.dic1)

    def test_gof_delegates(self, fitted_gibbs):
        _, est = fitted_gibbs
        report = est.gof(kinds=("top1",), n_rep=20, random_state=0)
        assert set(report.p_values) == {"top1"}
        assert 0.0 <= report.p_values["top1"] <= 1.0

    def test_gof_reproducible(self, fitted_gibbs):
        _, est = fitted_gibbs
        a = est.gof(kinds=("pairs",), n_rep=15, random_state=4)
        b = est.gof(kinds=("pairs",), n_rep=15, random_state=4)
        assert a.p_values == b.p_values
