"""Scikit-learn style estimator facade over the fitting pipelines.

`PLMixtureMAP` wraps EM point estimation; `PLMixtureGibbs` wraps the full
Bayesian pipeline (EM initialization, Gibbs sampling, pivotal relabeling,
posterior summaries).  Both accept a `RankingDataset` or any iterable of
1-based item sequences (zero-padded rows allowed) wherever data is expected,
and follow the scikit-learn conventions: constructor arguments are stored
verbatim, fitted state lives in trailing-underscore attributes, `predict`
returns 0-based component indices.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin

from .criteria import CriteriaReport, compute_criteria
from .data import as_ranking_dataset
from .gibbs import GibbsConfig, run_chain
from .gof import KINDS, GofReport, posterior_predictive_check
from .map_em import PriorHyper, fit_map
from .plcore import membership_matrix, mixture_log_lik, sample_mixture_dataset
from .relabel import pivotal_relabel, summarize

__all__ = ["PLMixtureMAP", "PLMixtureGibbs"]


class _RankingMixtureBase(DensityMixin, BaseEstimator):
    def _dataset(self, X):
        return as_ranking_dataset(X, getattr(self, "n_items_", None))

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise RuntimeError(
                f"this {type(self).__name__} instance is not fitted yet; "
                "call fit first"
            )

    def predict_proba(self, X) -> np.ndarray:
        """Posterior component membership of each unit, shape
        ``(n_units, n_components)``."""
        self._check_fitted()
        return membership_matrix(self._dataset(X), self.params_)

    def predict(self, X) -> np.ndarray:
        """Most probable component of each unit (0-based indices)."""
        return np.argmax(self.predict_proba(X), axis=1)

    def score(self, X, y=None) -> float:
        """Mean per-unit log likelihood under the fitted parameters."""
        self._check_fitted()
        ds = self._dataset(X)
        return mixture_log_lik(ds, self.params_) / ds.n_units

    def sample(self, n_samples: int = 1, lengths=None, random_state=None):
        """Draw rankings from the fitted mixture.

        Parameters
        ----------
        n_samples : int
        lengths : int or array-like, optional
            Ranked positions per unit; defaults to complete orderings.
        random_state : int, Generator, or None

        Returns
        -------
        ds : RankingDataset
        labels : ndarray
            Generating component of each unit, 0-based.
        """
        self._check_fitted()
        if lengths is None:
            lengths = self.params_.n_items - 1
        rng = np.random.default_rng(random_state)
        ds, labels = sample_mixture_dataset(self.params_, n_samples, lengths, rng)
        return ds, labels - 1


class PLMixtureMAP(_RankingMixtureBase):
    """MAP (or maximum likelihood) mixture of Plackett-Luce rankers.

    Parameters
    ----------
    n_components : int
    prior : PriorHyper, optional
        Defaults to the weakly informative `PriorHyper.default`; use
        `PriorHyper.flat` for maximum likelihood.
    n_starts : int
        Random EM restarts.
    max_iter : int
        EM iteration cap per start.
    tol : float
        Relative log-posterior change declaring convergence.
    n_items : int, optional
        Item count when it cannot be inferred from the data.
    random_state : int or None

    Attributes
    ----------
    params_ : PLMixtureParams
        Canonical point estimate.
    result_ : MAPResult
        Full EM output (memberships, trace, convergence).
    n_items_ : int
    """

    def __init__(
        self,
        n_components: int = 1,
        prior: PriorHyper | None = None,
        n_starts: int = 10,
        max_iter: int = 1000,
        tol: float = 1e-8,
        n_items: int | None = None,
        random_state=None,
    ):
        self.n_components = n_components
        self.prior = prior
        self.n_starts = n_starts
        self.max_iter = max_iter
        self.tol = tol
        self.n_items = n_items
        self.random_state = random_state

    def fit(self, X, y=None):
        """Fit by EM on ranking data; returns self."""
        ds = as_ranking_dataset(X, self.n_items)
        result = fit_map(
            ds,
            self.n_components,
            self.prior,
            n_starts=self.n_starts,
            max_iter=self.max_iter,
            tol=self.tol,
            seed=self.random_state,
        )
        self.n_items_ = ds.n_items
        self.result_ = result
        self.params_ = result.params
        self.converged_ = result.converged
        self.n_iter_ = result.n_iter
        self.log_posterior_ = result.log_posterior
        return self


class PLMixtureGibbs(_RankingMixtureBase):
    """Bayesian mixture of Plackett-Luce rankers fitted by Gibbs sampling.

    Runs EM for the MAP estimate, starts a Gibbs chain there, corrects
    label switching by pivotal reordering against the MAP pivot, and keeps
    posterior-mean parameters as the point estimate.

    Parameters
    ----------
    n_components : int
    prior : PriorHyper, optional
        Defaults to `PriorHyper.default`.
    n_iter, burn_in, thin : int
        Chain schedule (defaults 22000 / 2000 / 1).
    n_starts, max_iter, tol :
        EM settings for the initialization fit.
    n_items : int, optional
    random_state : int or None
        Seeds both the EM restarts and the chain.

    Attributes
    ----------
    params_ : PLMixtureParams
        Posterior-mean canonical estimate.
    map_result_ : MAPResult
    chain_ : Chain
        Raw (unrelabeled) draws.
    relabeled_ : RelabeledChain
    summary_ : PosteriorSummary
    dataset_ : RankingDataset
        The fitting data, kept for criteria and predictive checks.
    """

    def __init__(
        self,
        n_components: int = 1,
        prior: PriorHyper | None = None,
        n_iter: int = 22000,
        burn_in: int = 2000,
        thin: int = 1,
        n_starts: int = 10,
        max_iter: int = 1000,
        tol: float = 1e-8,
        n_items: int | None = None,
        random_state=None,
    ):
        self.n_components = n_components
        self.prior = prior
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.thin = thin
        self.n_starts = n_starts
        self.max_iter = max_iter
        self.tol = tol
        self.n_items = n_items
        self.random_state = random_state

    def fit(self, X, y=None):
        """Run the full Bayesian pipeline on ranking data; returns self."""
        ds = as_ranking_dataset(X, self.n_items)
        root = np.random.SeedSequence(self.random_state)
        em_seed, chain_seed = (
            int(s.generate_state(1)[0]) for s in root.spawn(2)
        )
        map_result = fit_map(
            ds,
            self.n_components,
            self.prior,
            n_starts=self.n_starts,
            max_iter=self.max_iter,
            tol=self.tol,
            seed=em_seed,
        )
        chain = run_chain(
            ds,
            self.n_components,
            map_result.prior,
            GibbsConfig(
                n_iter=self.n_iter,
                burn_in=self.burn_in,
                thin=self.thin,
                seed=chain_seed,
            ),
            init=map_result,
        )
        relabeled = pivotal_relabel(chain, map_result.params)
        summary = summarize(relabeled)
        self.n_items_ = ds.n_items
        self.dataset_ = ds
        self.map_result_ = map_result
        self.chain_ = chain
        self.relabeled_ = relabeled
        self.summary_ = summary
        self.params_ = summary.params
        return self

    def criteria(self, mle_result=None) -> CriteriaReport:
        """Selection criteria of this fit (see `compute_criteria`)."""
        self._check_fitted()
        return compute_criteria(
            self.chain_, self.map_result_, self.dataset_, mle_result=mle_result
        )

    def gof(self, kinds=KINDS, n_rep=None, random_state=None) -> GofReport:
        """Posterior predictive check of this fit on its training data."""
        self._check_fitted()
        return posterior_predictive_check(
            self.relabeled_,
            self.dataset_,
            kinds=kinds,
            n_rep=n_rep,
            rng=random_state,
        )
