"""Maximum a posteriori estimation for Plackett-Luce mixtures via EM.

Supports carry independent Gamma priors (shape ``c_gi``, rate ``d_g``),
weights a Dirichlet prior.  The E-step computes posterior component
memberships; the M-step has closed-form updates obtained by maximizing a
minorizing surrogate of the log posterior, so every accepted iteration
increases the observed-data log posterior.  With the flat prior (shape 1,
rate 0, concentration 1) the procedure maximizes the likelihood.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import RankingDataset
from .plcore import (
    PLMixtureParams,
    _accumulate_available,
    _check_items,
    _logsumexp_rows,
    _stage_tables,
    component_log_probs,
)

__all__ = [
    "PriorHyper",
    "MAPResult",
    "e_step",
    "m_step",
    "log_posterior",
    "fit_map",
]

# raw supports are floored at this fraction of their component total when an
# update would drive them to zero
_SUPPORT_FLOOR = 1e-12


@dataclass(frozen=True)
class PriorHyper:
    """Hyperparameters of the conjugate prior.

    Parameters
    ----------
    shape : ndarray, shape (n_components, n_items)
        Gamma shape for each support, positive.
    rate : ndarray, shape (n_components,)
        Gamma rate shared within a component, non-negative (zero gives the
        scale-invariant flat support prior).
    concentration : ndarray, shape (n_components,)
        Dirichlet concentration of the weights, positive.
    """

    shape: np.ndarray
    rate: np.ndarray
    concentration: np.ndarray

    def __post_init__(self):
        shape = np.array(self.shape, dtype=float)
        if shape.ndim != 2:
            raise ValueError("shape must be (n_components, n_items)")
        rate = np.array(self.rate, dtype=float).reshape(-1)
        conc = np.array(self.concentration, dtype=float).reshape(-1)
        g = shape.shape[0]
        if rate.shape[0] != g or conc.shape[0] != g:
            raise ValueError(
                "shape, rate, and concentration disagree on component count"
            )
        if np.any(shape <= 0) or not np.all(np.isfinite(shape)):
            raise ValueError("Gamma shapes must be positive and finite")
        if np.any(rate < 0) or not np.all(np.isfinite(rate)):
            raise ValueError("Gamma rates must be non-negative and finite")
        if np.any(conc <= 0) or not np.all(np.isfinite(conc)):
            raise ValueError("Dirichlet concentrations must be positive")
        for a in (shape, rate, conc):
            a.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "rate", rate)
        object.__setattr__(self, "concentration", conc)

    @property
    def n_components(self) -> int:
        return self.shape.shape[0]

    @property
    def n_items(self) -> int:
        return self.shape.shape[1]

    @classmethod
    def default(cls, n_components: int, n_items: int) -> "PriorHyper":
        """Weakly informative default: shape 1, rate 0.001, concentration 1."""
        return cls(
            np.ones((n_components, n_items)),
            np.full(n_components, 0.001),
            np.ones(n_components),
        )

    @classmethod
    def flat(cls, n_components: int, n_items: int) -> "PriorHyper":
        """Flat prior: shape 1, rate 0, concentration 1 (MAP = MLE)."""
        return cls(
            np.ones((n_components, n_items)),
            np.zeros(n_components),
            np.ones(n_components),
        )


@dataclass(frozen=True)
class MAPResult:
    """Outcome of an EM run.

    Attributes
    ----------
    params : PLMixtureParams
        Canonical (row-normalized) estimate.
    raw_supports : ndarray, shape (n_components, n_items)
        Estimate on the internal scale actually iterated.
    membership : ndarray, shape (n_units, n_components)
        Posterior memberships at the estimate.
    trace : ndarray
        Observed-data log posterior after each iteration, starting at the
        initial point.  Non-decreasing up to floor adjustments.
    n_iter : int
    converged : bool
    floored : ndarray of bool, shape (n_components, n_items)
        Supports pinned at the numerical floor in the final update.
    prior : PriorHyper
    """

    params: PLMixtureParams
    raw_supports: np.ndarray
    membership: np.ndarray
    trace: np.ndarray
    n_iter: int
    converged: bool
    floored: np.ndarray
    prior: PriorHyper

    @property
    def log_posterior(self) -> float:
        return float(self.trace[-1])

    def to_json(self, indent: int | None = 2) -> str:
        """Serialize the fit: canonical estimate, trace, membership summary."""
        counts = np.bincount(
            np.argmax(self.membership, axis=1),
            minlength=self.params.n_components,
        )
        doc = {
            "estimate": json.loads(self.params.to_json(indent=None)),
            "log_posterior": self.log_posterior,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "trace": self.trace.tolist(),
            "membership_mean": self.membership.mean(axis=0).tolist(),
            "membership_argmax_counts": counts.tolist(),
            "floored_items": [
                [int(i + 1) for i in np.flatnonzero(row)] for row in self.floored
            ],
            "prior": {
                "shape": self.prior.shape.tolist(),
                "rate": self.prior.rate.tolist(),
                "concentration": self.prior.concentration.tolist(),
            },
        }
        return json.dumps(doc, indent=indent)


def _membership(ds, supports, weights):
    comp = component_log_probs(ds, supports)
    with np.errstate(divide="ignore"):
        scores = comp + np.log(weights)[None, :]
    scores -= _logsumexp_rows(scores)[:, None]
    return np.exp(scores)


def e_step(ds: RankingDataset, supports, weights):
    """Posterior memberships and stage normalizers at the current estimate.

    Returns
    -------
    membership : ndarray, shape (n_units, n_components)
    stage_rates : ndarray, shape (n_components, n_units, max_length)
        Total support of the items available at each choice stage, used by
        `m_step`.
    """
    supports = np.asarray(supports, dtype=float)
    _, rates = _stage_tables(ds, supports)
    return _membership(ds, supports, weights), rates


def m_step(
    ds: RankingDataset,
    membership: np.ndarray,
    stage_rates: np.ndarray,
    prior: PriorHyper,
):
    """Closed-form update of supports and weights.

    Parameters
    ----------
    ds : RankingDataset
    membership : ndarray, shape (n_units, n_components)
    stage_rates : ndarray, shape (n_components, n_units, max_length)
        From `e_step` at the same estimate that produced ``membership``.
    prior : PriorHyper

    Returns
    -------
    supports : ndarray, shape (n_components, n_items)
    weights : ndarray, shape (n_components,)
    floored : ndarray of bool, shape (n_components, n_items)
    """
    n = ds.n_units
    g = membership.shape[1]
    with np.errstate(divide="ignore"):
        inv = np.where(ds.rank_mask[None, :, :], 1.0 / stage_rates, 0.0)
    avail = _accumulate_available(ds, inv)  # (g, n, k)
    ranked_weight = membership.T @ ds.ranked_flags  # (g, k)
    denom = prior.rate[:, None] + np.einsum("sg,gsk->gk", membership, avail)
    numer = prior.shape - 1.0 + ranked_weight
    # a dead component under a flat prior gives 0/0; send it to the floor
    supports = np.divide(
        numer, denom, out=np.zeros_like(denom), where=denom > 0.0
    )
    floor = _SUPPORT_FLOOR * np.maximum(supports.sum(axis=1, keepdims=True), 1.0)
    floored = supports < floor
    supports = np.maximum(supports, floor)
    counts = membership.sum(axis=0)
    weights = (prior.concentration - 1.0 + counts) / (
        prior.concentration.sum() - g + n
    )
    weights = np.maximum(weights, 0.0)
    weights = weights / weights.sum()
    return supports, weights, floored


def log_posterior(
    ds: RankingDataset, supports, weights, prior: PriorHyper
) -> float:
    """Observed-data log posterior kernel (normalizing constants dropped)."""
    supports = np.asarray(supports, dtype=float)
    weights = np.asarray(weights, dtype=float)
    comp = component_log_probs(ds, supports)
    with np.errstate(divide="ignore", invalid="ignore"):
        logw = np.log(weights)
        loglik = float(_logsumexp_rows(comp + logw[None, :]).sum())
        lp = loglik
        lp += float(np.sum((prior.shape - 1.0) * np.log(supports)))
        lp -= float(np.sum(prior.rate[:, None] * supports))
        alpha = prior.concentration
        wterm = np.where(alpha != 1.0, (alpha - 1.0) * logw, 0.0)
    if np.any(np.isnan(wterm)):
        return -np.inf
    return lp + float(wterm.sum())


def _iter_state(ds, supports, weights, prior):
    """Memberships, stage rates, and log posterior of one estimate, sharing a
    single pass over the stage tables."""
    chosen, rates = _stage_tables(ds, supports)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(ds.rank_mask[None, :, :], chosen / rates, 1.0)
        comp = np.log(ratios).sum(axis=2).T
        logw = np.log(weights)
        scores = comp + logw[None, :]
        lse = _logsumexp_rows(scores)
        membership = np.exp(scores - lse[:, None])
        lp = float(lse.sum())
        lp += float(np.sum((prior.shape - 1.0) * np.log(supports)))
        lp -= float(np.sum(prior.rate[:, None] * supports))
        alpha = prior.concentration
        wterm = np.where(alpha != 1.0, (alpha - 1.0) * logw, 0.0)
    if np.any(np.isnan(wterm)):
        return membership, rates, -np.inf
    return membership, rates, lp + float(wterm.sum())


def _run_em(ds, supports, weights, prior, max_iter, tol):
    membership, rates, lp = _iter_state(ds, supports, weights, prior)
    trace = [lp]
    converged = False
    floored = np.zeros_like(supports, dtype=bool)
    it = 0
    for it in range(1, max_iter + 1):
        supports, weights, floored = m_step(ds, membership, rates, prior)
        membership, rates, lp = _iter_state(ds, supports, weights, prior)
        trace.append(lp)
        if abs(lp - trace[-2]) <= tol * (abs(trace[-2]) + 1e-12):
            converged = True
            break
    return supports, weights, membership, np.asarray(trace), it, converged, floored


def fit_map(
    ds: RankingDataset,
    n_components: int,
    prior: PriorHyper | None = None,
    *,
    n_starts: int = 10,
    max_iter: int = 1000,
    tol: float = 1e-8,
    seed=None,
    init: PLMixtureParams | None = None,
) -> MAPResult:
    """Fit a Plackett-Luce mixture by MAP (or maximum likelihood) EM.

    Parameters
    ----------
    ds : RankingDataset
    n_components : int
    prior : PriorHyper, optional
        Defaults to `PriorHyper.default`.  MAP updates require every Gamma
        shape and Dirichlet concentration to be at least 1.
    n_starts : int
        Independent random restarts; the best final log posterior wins.
        A single component needs no restarts and runs once.
    max_iter : int
        Iteration cap per start.
    tol : float
        Relative log posterior change declaring convergence.
    seed : int, sequence of int, numpy.random.Generator, or None
        Source of the random starts.
    init : PLMixtureParams, optional
        Extra deterministic starting point, tried besides the random starts.

    Returns
    -------
    MAPResult
    """
    g = int(n_components)
    if g < 1:
        raise ValueError(f"n_components must be at least 1, got {g}")
    if prior is None:
        prior = PriorHyper.default(g, ds.n_items)
    if prior.n_components != g or prior.n_items != ds.n_items:
        raise ValueError(
            f"prior sized for {prior.n_components} components and "
            f"{prior.n_items} items, need ({g}, {ds.n_items})"
        )
    if np.any(prior.shape < 1.0) or np.any(prior.concentration < 1.0):
        raise ValueError(
            "MAP updates need Gamma shapes and Dirichlet concentrations >= 1"
        )
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if n_starts < 1 and init is None:
        raise ValueError("need at least one start")
    rng = np.random.default_rng(seed)
    if g == 1:
        n_starts = min(n_starts, 1)

    starts: list[tuple[np.ndarray, np.ndarray]] = []
    if init is not None:
        _check_items(ds, init.n_items)
        if init.n_components != g:
            raise ValueError(
                f"init has {init.n_components} components, expected {g}"
            )
        starts.append((init.supports.copy(), init.weights.copy()))
    # starts: supports from the Gamma prior (uniform when the prior rate is
    # flat and the prior improper), weights uniform
    w0 = np.full(g, 1.0 / g)
    proper = prior.rate > 0
    for _ in range(n_starts):
        p0 = rng.uniform(0.1, 1.0, size=(g, ds.n_items))
        if np.any(proper):
            p0[proper] = rng.gamma(
                prior.shape[proper], 1.0 / prior.rate[proper, None]
            )
        starts.append((p0, w0.copy()))

    best = None
    for p0, w0 in starts:
        out = _run_em(ds, p0, w0, prior, max_iter, tol)
        if best is None or out[3][-1] > best[3][-1]:
            best = out
    supports, weights, membership, trace, n_iter, converged, floored = best
    params = PLMixtureParams(supports, weights).canonical()
    return MAPResult(
        params=params,
        raw_supports=supports,
        membership=membership,
        trace=trace,
        n_iter=n_iter,
        converged=converged,
        floored=floored,
        prior=prior,
    )
