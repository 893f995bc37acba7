"""Label-switching correction for mixture chains by pivotal reordering.

The mixture likelihood is symmetric under component permutations, so raw
Gibbs draws can swap component identities mid-chain.  Pivotal reordering
fixes identities draw by draw: each draw's components are permuted to
minimize the squared distance of its canonical supports and weights to a
pivot estimate (by default the MAP solution the chain was started from).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .gibbs import Chain, labels_text, trace_text
from .map_em import MAPResult
from .plcore import PLMixtureParams, modal_ordering

__all__ = [
    "RelabeledChain",
    "PosteriorSummary",
    "pivotal_relabel",
    "summarize",
    "save_relabeled_chain",
]

# exhaustive permutation search up to this many components, assignment
# solver beyond
_EXHAUSTIVE_MAX = 8


@dataclass(frozen=True)
class RelabeledChain:
    """A chain with per-draw component permutations applied.

    Attributes
    ----------
    chain : Chain
        Permuted draws; deviance is untouched (it is label-symmetric).
    permutations : ndarray of int, shape (n_draws, n_components)
        0-based: slot ``g`` of relabeled draw ``m`` is component
        ``permutations[m, g]`` of the raw draw.
    pivot : PLMixtureParams
        Canonical pivot the draws were aligned to.
    """

    chain: Chain
    permutations: np.ndarray
    pivot: PLMixtureParams


def _pairwise_costs(chain: Chain, pivot: PLMixtureParams) -> np.ndarray:
    """Cost of placing raw component ``a`` in pivot slot ``b``, per draw."""
    can = chain.canonical_supports()
    diff = can[:, :, None, :] - pivot.supports[None, None, :, :]
    costs = np.einsum("magk,magk->mag", diff, diff)
    costs += (chain.weights[:, :, None] - pivot.weights[None, None, :]) ** 2
    return costs


def _best_permutations(costs: np.ndarray, n_components: int) -> np.ndarray:
    m = costs.shape[0]
    if n_components <= _EXHAUSTIVE_MAX:
        perms = np.array(
            list(itertools.permutations(range(n_components))), dtype=np.int64
        )
        slots = np.arange(n_components)
        out = np.empty((m, n_components), dtype=np.int64)
        # keep the (draws x permutations) total-cost block bounded
        block = max(1, 4_000_000 // perms.shape[0])
        for lo in range(0, m, block):
            totals = costs[lo : lo + block][:, perms, slots].sum(axis=2)
            out[lo : lo + block] = perms[np.argmin(totals, axis=1)]
        return out
    out = np.empty((m, n_components), dtype=np.int64)
    for i in range(m):
        _, col = linear_sum_assignment(costs[i])
        out[i] = np.argsort(col)
    return out


def pivotal_relabel(
    chain: Chain, pivot: PLMixtureParams | MAPResult
) -> RelabeledChain:
    """Align every draw's components to a pivot estimate.

    For each draw the permutation minimizing the summed squared distance
    between the draw's canonical supports/weights and the pivot's is found
    (exhaustively for up to 8 components, by the assignment-problem solver
    beyond) and applied to supports, weights, and labels.

    Parameters
    ----------
    chain : Chain
    pivot : PLMixtureParams or MAPResult
        Reference estimate with the chain's component and item counts.

    Returns
    -------
    RelabeledChain
    """
    if isinstance(pivot, MAPResult):
        pivot = pivot.params
    pivot = pivot.canonical()
    if pivot.n_components != chain.n_components or pivot.n_items != chain.n_items:
        raise ValueError(
            f"pivot sized ({pivot.n_components}, {pivot.n_items}), chain is "
            f"({chain.n_components}, {chain.n_items})"
        )
    costs = _pairwise_costs(chain, pivot)
    sigma = _best_permutations(costs, chain.n_components)
    rows = np.arange(chain.n_draws)[:, None]
    inverse = np.empty_like(sigma)
    np.put_along_axis(
        inverse, sigma, np.broadcast_to(np.arange(chain.n_components), sigma.shape), 1
    )
    new_labels = (
        np.take_along_axis(inverse, (chain.labels - 1).astype(np.int64), axis=1) + 1
    )
    relabeled = replace(
        chain,
        supports=chain.supports[rows, sigma],
        weights=chain.weights[rows, sigma],
        labels=new_labels.astype(np.int16),
        deviance=chain.deviance,
    )
    return RelabeledChain(chain=relabeled, permutations=sigma, pivot=pivot)


@dataclass(frozen=True)
class PosteriorSummary:
    """Posterior moments of canonical parameters.

    Attributes
    ----------
    mean_supports, sd_supports : ndarray, shape (n_components, n_items)
    mean_weights, sd_weights : ndarray, shape (n_components,)
    modal_orderings : tuple of tuple of int
        Most probable full ordering of each component's mean supports.
    n_draws : int
    """

    mean_supports: np.ndarray
    sd_supports: np.ndarray
    mean_weights: np.ndarray
    sd_weights: np.ndarray
    modal_orderings: tuple[tuple[int, ...], ...]
    n_draws: int

    @property
    def params(self) -> PLMixtureParams:
        """Posterior-mean point estimate (canonical)."""
        return PLMixtureParams(
            self.mean_supports, self.mean_weights / self.mean_weights.sum()
        ).canonical()


def summarize(chain: Chain | RelabeledChain) -> PosteriorSummary:
    """Posterior means and standard deviations of canonical parameters.

    Raw chains can be passed, but summaries are only meaningful after
    relabeling when components are exchangeable.
    """
    if isinstance(chain, RelabeledChain):
        chain = chain.chain
    if chain.n_draws < 1:
        raise ValueError("empty chain")
    can = chain.canonical_supports()
    ddof = 1 if chain.n_draws > 1 else 0
    sd_supports = (
        can.std(axis=0, ddof=ddof) if chain.n_draws > 1 else np.zeros(can.shape[1:])
    )
    sd_weights = (
        chain.weights.std(axis=0, ddof=ddof)
        if chain.n_draws > 1
        else np.zeros(chain.n_components)
    )
    mean_supports = can.mean(axis=0)
    return PosteriorSummary(
        mean_supports=mean_supports,
        sd_supports=sd_supports,
        mean_weights=chain.weights.mean(axis=0),
        sd_weights=sd_weights,
        modal_orderings=tuple(modal_ordering(p) for p in mean_supports),
        n_draws=chain.n_draws,
    )


def save_relabeled_chain(
    rc: RelabeledChain, trace_path, labels_path
) -> None:
    """Write a relabeled chain: the chain trace gains a permutation block."""
    with open(trace_path, "w", encoding="utf-8") as fh:
        fh.write(trace_text(rc.chain, permutations=rc.permutations))
    with open(labels_path, "w", encoding="utf-8") as fh:
        fh.write(labels_text(rc.chain))
