"""Plackett-Luce mixture probability machinery.

A Plackett-Luce ordering is built by repeated choice: at each stage the next
item is picked from the remaining ones with probability proportional to its
positive support parameter.  The probability of observing a top-``n``
ordering ``pi = (pi_1, ..., pi_n)`` under supports ``p`` is the product over
stages of ``p[pi_t]`` divided by the total support of the items still
available at stage ``t``.  The model is scale invariant in ``p``; the
canonical representation normalizes each support vector to sum to one.

A finite mixture combines ``G`` such models with weights ``omega`` on the
simplex.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import DatasetError, PartialOrdering, RankingDataset, _coerce_ordering

__all__ = [
    "PLMixtureParams",
    "pl_log_prob",
    "component_log_probs",
    "mixture_log_lik",
    "deviance",
    "posterior_membership",
    "membership_matrix",
    "modal_ordering",
    "sample_pl",
    "sample_mixture_dataset",
    "apply_censoring",
]

_WEIGHT_TOL = 1e-8


@dataclass(frozen=True)
class PLMixtureParams:
    """Parameters of a finite Plackett-Luce mixture.

    Parameters
    ----------
    supports : ndarray, shape (n_components, n_items)
        Positive support parameters, one row per component.  Any positive
        scale is accepted; see `canonical`.
    weights : ndarray, shape (n_components,)
        Mixture weights on the simplex (tolerance 1e-8, then renormalized).
    """

    supports: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        supports = np.array(self.supports, dtype=float)
        if supports.ndim == 1:
            supports = supports[None, :]
        if supports.ndim != 2 or supports.shape[1] < 2:
            raise ValueError(
                f"supports must be (n_components, n_items>=2), got shape "
                f"{np.shape(self.supports)}"
            )
        if not np.all(np.isfinite(supports)) or np.any(supports <= 0):
            raise ValueError("supports must be finite and strictly positive")
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if weights.shape[0] != supports.shape[0]:
            raise ValueError(
                f"{weights.shape[0]} weights for {supports.shape[0]} components"
            )
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ValueError("weights must be finite and non-negative")
        total = weights.sum()
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights sum to {total!r}, expected 1")
        weights = weights / total
        supports.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "supports", supports)
        object.__setattr__(self, "weights", weights)

    @property
    def n_components(self) -> int:
        return self.supports.shape[0]

    @property
    def n_items(self) -> int:
        return self.supports.shape[1]

    def canonical(self) -> "PLMixtureParams":
        """Equivalent parameters with each support row summing to one."""
        return PLMixtureParams(
            self.supports / self.supports.sum(axis=1, keepdims=True),
            self.weights,
        )

    def is_canonical(self, atol: float = 1e-8) -> bool:
        return bool(np.allclose(self.supports.sum(axis=1), 1.0, atol=atol))

    def permuted(self, order: Sequence[int]) -> "PLMixtureParams":
        """Reorder components: component ``g`` of the result is component
        ``order[g]`` (0-based) of ``self``."""
        order = np.asarray(order, dtype=int)
        if sorted(order.tolist()) != list(range(self.n_components)):
            raise ValueError(f"{order.tolist()} is not a component permutation")
        return PLMixtureParams(self.supports[order], self.weights[order])

    def to_json(self, indent: int | None = 2) -> str:
        """Serialize in canonical form as ``{"G":..., "p":..., "omega":...}``."""
        c = self.canonical()
        doc = {
            "G": c.n_components,
            "p": c.supports.tolist(),
            "omega": c.weights.tolist(),
        }
        return json.dumps(doc, indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "PLMixtureParams":
        """Parse the JSON produced by `to_json`."""
        doc = json.loads(text)
        try:
            g = int(doc["G"])
            supports = np.asarray(doc["p"], dtype=float)
            weights = np.asarray(doc["omega"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"bad mixture parameter document: {exc}") from None
        params = cls(supports, weights)
        if params.n_components != g:
            raise ValueError(
                f"document says G={g} but has {params.n_components} support rows"
            )
        return params


def _as_support_matrix(supports) -> np.ndarray:
    p = np.asarray(supports, dtype=float)
    if p.ndim == 1:
        p = p[None, :]
    if p.ndim != 2:
        raise ValueError(f"supports must be 1- or 2-dimensional, got {p.ndim}")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise ValueError("supports must be finite and strictly positive")
    return p


def _check_items(ds: RankingDataset, n_items: int):
    if ds.n_items != n_items:
        raise ValueError(
            f"dataset has {ds.n_items} items but parameters have {n_items}"
        )


def _stage_tables(ds: RankingDataset, supports: np.ndarray):
    """Per-component stage tables for a dataset.

    Returns
    -------
    chosen : ndarray, shape (G, n_units, max_length)
        Support of the item picked at each stage (0 at padding).
    rates : ndarray, shape (G, n_units, max_length)
        Total support of the items still available at each stage (arbitrary
        at padding).
    """
    chosen = supports[:, ds.ranked_matrix]
    chosen = np.where(ds.rank_mask[None, :, :], chosen, 0.0)
    exclusive = np.cumsum(chosen, axis=2) - chosen
    rates = supports.sum(axis=1)[:, None, None] - exclusive
    return chosen, rates


def _logsumexp_rows(scores: np.ndarray) -> np.ndarray:
    """Row-wise log-sum-exp of a 2-d score matrix, tolerating -inf entries."""
    top = np.max(scores, axis=1)
    finite = np.isfinite(top)
    safe = np.where(finite, top, 0.0)
    with np.errstate(divide="ignore"):
        out = safe + np.log(np.exp(scores - safe[:, None]).sum(axis=1))
    return np.where(finite, out, top)


def _accumulate_available(ds: RankingDataset, per_stage: np.ndarray) -> np.ndarray:
    """Sum per-stage values over the stages at which each item was still
    available to be chosen.

    ``per_stage`` has shape ``(..., n_units, max_length)``; the result has
    shape ``(..., n_units, n_items)``.  Item ``i`` of unit ``s`` collects the
    values of stages ``1..min(position of i, n_s)``.
    """
    vals = np.where(ds.rank_mask, per_stage, 0.0)
    cum = np.cumsum(vals, axis=-1)
    rows = np.arange(ds.n_units)[:, None]
    idx = np.minimum(ds.rank_positions, ds.lengths[:, None]) - 1
    return cum[..., rows, idx]


def component_log_probs(ds: RankingDataset, supports) -> np.ndarray:
    """Log probability of each observed ordering under each component.

    Parameters
    ----------
    ds : RankingDataset
    supports : array-like, shape (n_components, n_items) or (n_items,)

    Returns
    -------
    ndarray, shape (n_units, n_components)
    """
    p = _as_support_matrix(supports)
    _check_items(ds, p.shape[1])
    chosen, rates = _stage_tables(ds, p)
    ratios = np.where(ds.rank_mask[None, :, :], chosen / rates, 1.0)
    return np.log(ratios).sum(axis=2).T


def pl_log_prob(ordering, supports) -> float:
    """Log probability of one partial ordering under a single component.

    Parameters
    ----------
    ordering : PartialOrdering or sequence of int
        1-based items, most preferred first.
    supports : array-like, shape (n_items,)
        Positive supports (any scale).

    Returns
    -------
    float
    """
    p = np.asarray(supports, dtype=float)
    if p.ndim != 1 or p.shape[0] < 2:
        raise ValueError("supports must be a vector of length >= 2")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise ValueError("supports must be finite and strictly positive")
    o = _coerce_ordering(ordering)
    if max(o.items) > p.shape[0]:
        raise ValueError(
            f"item {max(o.items)} out of range for {p.shape[0]} items"
        )
    remaining = p.sum()
    total = 0.0
    for i in o.items:
        total += np.log(p[i - 1]) - np.log(remaining)
        remaining -= p[i - 1]
    return float(total)


def mixture_log_lik(ds: RankingDataset, params: PLMixtureParams) -> float:
    """Observed-data log likelihood of the mixture."""
    _check_items(ds, params.n_items)
    comp = component_log_probs(ds, params.supports)
    with np.errstate(divide="ignore"):
        logw = np.log(params.weights)
    return float(_logsumexp_rows(comp + logw[None, :]).sum())


def deviance(ds: RankingDataset, params: PLMixtureParams) -> float:
    """Deviance ``-2 log L`` of the mixture on the dataset."""
    return -2.0 * mixture_log_lik(ds, params)


def membership_matrix(ds: RankingDataset, params: PLMixtureParams) -> np.ndarray:
    """Posterior component membership probabilities for every unit.

    Returns
    -------
    ndarray, shape (n_units, n_components)
        Rows on the simplex.
    """
    _check_items(ds, params.n_items)
    comp = component_log_probs(ds, params.supports)
    with np.errstate(divide="ignore"):
        scores = comp + np.log(params.weights)[None, :]
    scores -= _logsumexp_rows(scores)[:, None]
    return np.exp(scores)


def posterior_membership(ordering, params: PLMixtureParams) -> np.ndarray:
    """Posterior probability that one ordering came from each component.

    Returns
    -------
    ndarray, shape (n_components,)
    """
    with np.errstate(divide="ignore"):
        scores = np.array(
            [
                np.log(w) + pl_log_prob(ordering, p) if w > 0 else -np.inf
                for w, p in zip(params.weights, params.supports)
            ]
        )
    scores -= np.max(scores)
    probs = np.exp(scores)
    return probs / probs.sum()


def modal_ordering(supports) -> tuple[int, ...]:
    """Most probable full ordering of one component: items by decreasing
    support, ties broken toward the smaller item index.

    Returns
    -------
    tuple of int
        1-based item indices, best first, length ``n_items``.
    """
    p = np.asarray(supports, dtype=float).reshape(-1)
    order = np.lexsort((np.arange(p.shape[0]), -p))
    return tuple(int(i) + 1 for i in order)


def _race_orderings(supports_per_unit: np.ndarray, rng: np.random.Generator):
    """Full orderings via the exponential race construction, one row of
    supports per unit."""
    times = rng.exponential(1.0 / supports_per_unit)
    return np.argsort(times, axis=1, kind="stable")


def sample_pl(
    supports, n_ranked: int, rng: np.random.Generator
) -> PartialOrdering:
    """Draw one top-``n_ranked`` ordering from a single component.

    Parameters
    ----------
    supports : array-like, shape (n_items,)
    n_ranked : int
        Number of positions to report, between 1 and ``n_items - 1``.
    rng : numpy.random.Generator
    """
    p = np.asarray(supports, dtype=float).reshape(-1)
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise ValueError("supports must be finite and strictly positive")
    n_ranked = int(n_ranked)
    if not 1 <= n_ranked <= p.shape[0] - 1:
        raise ValueError(
            f"n_ranked must be in 1..{p.shape[0] - 1}, got {n_ranked}"
        )
    order = _race_orderings(p[None, :], rng)[0]
    return PartialOrdering(tuple(int(i) + 1 for i in order[:n_ranked]))


def sample_mixture_dataset(
    params: PLMixtureParams,
    n_units: int,
    lengths,
    rng: np.random.Generator,
) -> tuple[RankingDataset, np.ndarray]:
    """Draw a dataset from a Plackett-Luce mixture.

    Parameters
    ----------
    params : PLMixtureParams
    n_units : int
    lengths : int or array-like of int
        Ranked positions per unit (scalar is broadcast), each in
        ``1..n_items - 1``.
    rng : numpy.random.Generator

    Returns
    -------
    ds : RankingDataset
    labels : ndarray of int, shape (n_units,)
        True component of each unit, 1-based.
    """
    n_units = int(n_units)
    if n_units < 1:
        raise ValueError(f"n_units must be positive, got {n_units}")
    lengths = np.broadcast_to(np.asarray(lengths, dtype=int), (n_units,)).copy()
    if np.any(lengths < 1) or np.any(lengths > params.n_items - 1):
        raise ValueError(f"lengths must be in 1..{params.n_items - 1}")
    labels0 = rng.choice(params.n_components, size=n_units, p=params.weights)
    orders = _race_orderings(params.supports[labels0], rng)
    orderings = [
        PartialOrdering(tuple(int(i) + 1 for i in row[:m]))
        for row, m in zip(orders, lengths)
    ]
    return RankingDataset(params.n_items, orderings), labels0 + 1


def apply_censoring(
    ds: RankingDataset,
    proportions: Mapping[int, float],
    rng: np.random.Generator,
) -> RankingDataset:
    """Truncate full orderings to random top-``m`` lengths.

    Parameters
    ----------
    ds : RankingDataset
        Every unit must carry a full ordering (length ``n_items - 1``).
    proportions : mapping of int to float
        Probability of each censored length ``m`` in ``1..n_items - 1``;
        values must sum to one (tolerance 1e-9).  Lengths not listed get
        probability zero.
    rng : numpy.random.Generator

    Returns
    -------
    RankingDataset
        Same units, each truncated to its drawn length.
    """
    k = ds.n_items
    if np.any(ds.lengths != k - 1):
        raise ValueError("censoring requires full orderings for every unit")
    ms = sorted(int(m) for m in proportions)
    if ms and (ms[0] < 1 or ms[-1] > k - 1):
        raise ValueError(f"censored lengths must be in 1..{k - 1}, got {ms}")
    probs = np.array([float(proportions[m]) for m in ms])
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("censoring proportions must be non-negative and sum to 1")
    drawn = rng.choice(np.array(ms, dtype=int), size=ds.n_units, p=probs / probs.sum())
    orderings = [
        PartialOrdering(o.items[:m]) for o, m in zip(ds.orderings, drawn)
    ]
    return RankingDataset(k, orderings, item_labels=ds.item_labels)
