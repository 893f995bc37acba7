"""Posterior-predictive goodness-of-fit via chi-square discrepancies.

Two observed summaries are compared against their model expectations: the
first-place count of each item, and the pairwise win count of each ordered
item pair.  Both have closed-form expectations under a mixture given the
marginal (weight-averaged) canonical supports.  Conditional variants apply
the same comparison within each ordering-length stratum and sum the
stratum chi-squares.

The posterior predictive p value replays the comparison over retained
posterior draws: for each selected draw, a replicate dataset with the
observed per-unit lengths is simulated from that draw's parameters, and the
p value is the fraction of draws whose replicate discrepancy is at least the
observed one (computed at the same draw).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import LengthStratum, RankingDataset, SummaryStats
from .gibbs import Chain
from .plcore import PLMixtureParams, _race_orderings
from .relabel import RelabeledChain

__all__ = [
    "KINDS",
    "GofReport",
    "expected_top1",
    "expected_pairs",
    "discrepancy",
    "posterior_predictive_p",
    "posterior_predictive_check",
]

KINDS = ("top1", "pairs", "top1_cond", "pairs_cond")

# cells with a smaller expected count are excluded from the chi-square and
# counted in the report
_EXPECTED_FLOOR = 1e-9


def _marginal_supports(params: PLMixtureParams) -> np.ndarray:
    if not params.is_canonical():
        raise ValueError(
            "expected frequencies require canonical parameters; call "
            ".canonical() first"
        )
    return params.weights @ params.supports


def expected_top1(params: PLMixtureParams, n_units: int) -> np.ndarray:
    """Expected first-place counts in a sample of ``n_units`` rankings.

    Parameters
    ----------
    params : PLMixtureParams
        Canonical (each support row summing to one).
    n_units : int

    Returns
    -------
    ndarray, shape (n_items,), summing to ``n_units``.
    """
    return n_units * _marginal_supports(params)


def expected_pairs(params: PLMixtureParams, pair_totals) -> np.ndarray:
    """Expected pairwise win counts given the comparison totals.

    Splits each pair's total ``T[i, j]`` (comparisons resolved either way)
    in proportion to the marginal supports: item ``i`` is expected to win
    ``T[i, j] * p_i / (p_i + p_j)`` of them.

    Parameters
    ----------
    params : PLMixtureParams
        Canonical.
    pair_totals : ndarray, shape (n_items, n_items)
        Symmetric totals, e.g. `SummaryStats.pair_totals`.

    Returns
    -------
    ndarray, shape (n_items, n_items) with zero diagonal; opposite entries
    sum to the given totals.
    """
    marginal = _marginal_supports(params)
    totals = np.asarray(pair_totals, dtype=float)
    share = marginal[:, None] / (marginal[:, None] + marginal[None, :])
    out = totals * share
    np.fill_diagonal(out, 0.0)
    return out


def _chi_square(observed, expected, eligible) -> tuple[float, int]:
    used = eligible & (expected >= _EXPECTED_FLOOR)
    skipped = int(eligible.sum() - used.sum())
    diff = observed[used] - expected[used]
    return float(np.sum(diff * diff / expected[used])), skipped


def _off_diagonal(k: int) -> np.ndarray:
    return ~np.eye(k, dtype=bool)


def _stats_of(data) -> SummaryStats:
    if isinstance(data, RankingDataset):
        return data.summary
    if isinstance(data, SummaryStats):
        return data
    raise TypeError(f"expected RankingDataset or SummaryStats, got {type(data)!r}")


def _discrepancy_from_marginal(
    stats: SummaryStats, marginal: np.ndarray, kind: str
) -> tuple[float, int]:
    k = marginal.shape[0]
    if kind == "top1":
        n = stats.top1.sum()
        return _chi_square(stats.top1, n * marginal, np.ones(k, dtype=bool))
    if kind == "pairs":
        share = marginal[:, None] / (marginal[:, None] + marginal[None, :])
        return _chi_square(stats.pairs, stats.pair_totals * share, _off_diagonal(k))
    if kind == "top1_cond":
        total, skipped = 0.0, 0
        for st in stats.by_length.values():
            v, s = _chi_square(
                st.top1, st.n_units * marginal, np.ones(k, dtype=bool)
            )
            total += v
            skipped += s
        return total, skipped
    if kind == "pairs_cond":
        share = marginal[:, None] / (marginal[:, None] + marginal[None, :])
        total, skipped = 0.0, 0
        for st in stats.by_length.values():
            v, s = _chi_square(st.pairs, st.pair_totals * share, _off_diagonal(k))
            total += v
            skipped += s
        return total, skipped
    raise ValueError(f"unknown discrepancy kind {kind!r}; choose from {KINDS}")


def discrepancy(data, params: PLMixtureParams, kind: str) -> float:
    """Chi-square discrepancy between observed and expected summaries.

    Parameters
    ----------
    data : RankingDataset or SummaryStats
    params : PLMixtureParams
        Canonical.
    kind : str
        ``"top1"``: first-place counts over items; ``"pairs"``: pairwise
        wins over ordered pairs; ``"top1_cond"`` / ``"pairs_cond"``: the
        same summed over ordering-length strata.

    Returns
    -------
    float
        Sum of ``(observed - expected)^2 / expected`` over the measure's
        cells; cells with expected count below 1e-9 are skipped.
    """
    value, _ = _discrepancy_from_marginal(
        _stats_of(data), _marginal_supports(params), kind
    )
    return value


def _simulated_summary(
    orders: np.ndarray, lengths: np.ndarray, strata: dict[int, np.ndarray]
) -> SummaryStats:
    """Summary statistics of simulated full orderings truncated per unit.

    ``orders`` holds 0-based full orderings, one row per unit; ``strata``
    maps each ordering length to its boolean unit selector.
    """
    n, k = orders.shape
    t_max = int(lengths.max())
    pos = np.full((n, k), k + 1, dtype=np.int64)
    head = orders[:, :t_max]
    stage = np.arange(1, t_max + 1)
    mask = stage[None, :] <= lengths[:, None]
    rows = np.repeat(np.arange(n), lengths)
    pos[rows, head[mask]] = np.broadcast_to(stage, head.shape)[mask]
    top1_all = np.bincount(orders[:, 0], minlength=k).astype(float)
    by_length = {}
    pairs_all = np.zeros((k, k))
    for m, sel in strata.items():
        sub = pos[sel]
        wins = (sub[:, :, None] < sub[:, None, :]).sum(axis=0).astype(float)
        pairs_all += wins
        by_length[m] = LengthStratum(
            length=m,
            n_units=int(sel.sum()),
            top1=np.bincount(orders[sel, 0], minlength=k).astype(float),
            pairs=wins,
        )
    return SummaryStats(top1=top1_all, pairs=pairs_all, by_length=by_length)


@dataclass(frozen=True)
class GofReport:
    """Posterior predictive check results.

    Attributes
    ----------
    p_values : dict of str to float
        One entry per computed kind.
    discrepancies : dict of str to ndarray
        Per-kind array of shape (n_rep, 2): observed and replicated
        discrepancy at each selected draw.
    skipped_cells : dict of str to int
        Total cells excluded for near-zero expected counts, observed and
        replicated sides combined.
    n_rep : int
    draw_indices : ndarray
        Positions of the selected draws within the retained chain.
    """

    p_values: dict[str, float]
    discrepancies: dict[str, np.ndarray]
    skipped_cells: dict[str, int]
    n_rep: int
    draw_indices: np.ndarray

    @property
    def p_top1(self) -> float:
        return self.p_values["top1"]

    @property
    def p_pairs(self) -> float:
        return self.p_values["pairs"]

    @property
    def p_top1_cond(self) -> float:
        return self.p_values["top1_cond"]

    @property
    def p_pairs_cond(self) -> float:
        return self.p_values["pairs_cond"]

    def to_json(self, indent: int | None = 2) -> str:
        doc = {
            "n_rep": self.n_rep,
            "p_values": {k: self.p_values[k] for k in sorted(self.p_values)},
            "skipped_cells": {
                k: self.skipped_cells[k] for k in sorted(self.skipped_cells)
            },
        }
        return json.dumps(doc, indent=indent)


def _as_chain(chain) -> Chain:
    if isinstance(chain, RelabeledChain):
        return chain.chain
    if isinstance(chain, Chain):
        return chain
    raise TypeError(f"expected Chain or RelabeledChain, got {type(chain)!r}")


def posterior_predictive_check(
    chain,
    ds: RankingDataset,
    kinds=KINDS,
    n_rep: int | None = None,
    rng=None,
) -> GofReport:
    """Run the posterior predictive check for several discrepancy kinds.

    Parameters
    ----------
    chain : Chain or RelabeledChain
        Fitted on ``ds``.  The check is relabeling-invariant.
    ds : RankingDataset
    kinds : sequence of str
        Subset of `KINDS`.
    n_rep : int, optional
        Draws used (default ``min(2000, retained)``), selected at an even
        stride through the retained draws; one replicate dataset per draw.
    rng : numpy.random.Generator or int, optional
        Randomness for the replicate datasets.

    Returns
    -------
    GofReport
    """
    chain = _as_chain(chain)
    if chain.n_units != ds.n_units or chain.n_items != ds.n_items:
        raise ValueError("chain and dataset disagree on units or items")
    kinds = tuple(kinds)
    for kind in kinds:
        if kind not in KINDS:
            raise ValueError(f"unknown discrepancy kind {kind!r}; choose from {KINDS}")
    m = chain.n_draws
    if n_rep is None:
        n_rep = min(2000, m)
    if not 1 <= n_rep <= m:
        raise ValueError(f"n_rep must be in 1..{m}, got {n_rep}")
    rng = np.random.default_rng(rng)
    idx = np.floor(np.linspace(0, m, n_rep, endpoint=False)).astype(np.int64)
    can = chain.canonical_supports()[idx]
    weights = chain.weights[idx]
    observed = ds.summary
    lengths = ds.lengths
    strata = {
        m_len: lengths == m_len for m_len in sorted(set(lengths.tolist()))
    }
    values = {kind: np.empty((n_rep, 2)) for kind in kinds}
    skipped = dict.fromkeys(kinds, 0)
    for j in range(n_rep):
        marginal = weights[j] @ can[j]
        comp = rng.choice(chain.n_components, size=ds.n_units, p=weights[j])
        orders = _race_orderings(can[j][comp], rng)
        replicate = _simulated_summary(orders, lengths, strata)
        for kind in kinds:
            obs_val, obs_skip = _discrepancy_from_marginal(observed, marginal, kind)
            rep_val, rep_skip = _discrepancy_from_marginal(replicate, marginal, kind)
            values[kind][j] = (obs_val, rep_val)
            skipped[kind] += obs_skip + rep_skip
    p_values = {
        kind: float(np.mean(values[kind][:, 1] >= values[kind][:, 0]))
        for kind in kinds
    }
    for arr in values.values():
        arr.setflags(write=False)
    return GofReport(
        p_values=p_values,
        discrepancies=values,
        skipped_cells=skipped,
        n_rep=n_rep,
        draw_indices=idx,
    )


def posterior_predictive_p(
    chain, ds: RankingDataset, kind: str, rng=None, n_rep: int | None = None
) -> float:
    """Posterior predictive p value for one discrepancy kind.

    See `posterior_predictive_check` for the procedure; this runs it for a
    single kind and returns the p value.
    """
    report = posterior_predictive_check(
        chain, ds, kinds=(kind,), n_rep=n_rep, rng=rng
    )
    return report.p_values[kind]
