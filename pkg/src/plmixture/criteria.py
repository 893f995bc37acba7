"""Model-selection criteria for mixture fits from posterior deviance draws.

All criteria combine the posterior mean deviance with a complexity penalty;
smaller is better.  Two penalty families are used: a plug-in family based on
the deviance at the MAP point estimate, and a variance family based on the
posterior deviance spread.  A frequentist BIC computed from the flat-prior
(maximum likelihood) fit is included for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import RankingDataset
from .gibbs import Chain
from .map_em import MAPResult, PriorHyper
from .plcore import deviance

__all__ = ["CRITERIA", "CriteriaReport", "compute_criteria", "select_best", "criteria_table"]

CRITERIA = ("DIC1", "DIC2", "BPIC1", "BPIC2", "BICM1", "BICM2", "BIC")


@dataclass(frozen=True)
class CriteriaReport:
    """Criterion values for one component count.

    Attributes
    ----------
    n_components : int
    n_units : int
    mean_deviance : float
        Posterior mean deviance over retained draws.
    var_deviance : float
        Unbiased posterior deviance variance.
    map_deviance : float
        Deviance at the MAP point estimate.
    min_deviance : float
        Best deviance among retained draws; the chain's own approximation of
        the optimum, reported for reference only.
    mle_deviance : float
        Deviance of the point estimate behind BIC; equals ``map_deviance``
        when no flat-prior fit was supplied (see ``bic_point_estimate``).
    dic1, dic2, bpic1, bpic2, bicm1, bicm2, bic : float
    n_free_parameters : int
        BIC parameter count: per-component supports lose one degree of
        freedom to scale, weights lose one to the simplex.
    bic_point_estimate : str
        ``"mle"`` when BIC used a flat-prior (maximum likelihood) fit,
        ``"map"`` when the MAP deviance was substituted.
    """

    n_components: int
    n_units: int
    mean_deviance: float
    var_deviance: float
    map_deviance: float
    min_deviance: float
    mle_deviance: float
    dic1: float
    dic2: float
    bpic1: float
    bpic2: float
    bicm1: float
    bicm2: float
    bic: float
    n_free_parameters: int
    bic_point_estimate: str

    def value(self, criterion: str) -> float:
        """Criterion value by table name (e.g. ``"DIC1"``)."""
        if criterion not in CRITERIA:
            raise KeyError(f"unknown criterion {criterion!r}")
        return float(getattr(self, criterion.lower()))

    def to_dict(self) -> dict:
        return {
            "G": self.n_components,
            "n_units": self.n_units,
            "mean_deviance": self.mean_deviance,
            "var_deviance": self.var_deviance,
            "map_deviance": self.map_deviance,
            "min_deviance": self.min_deviance,
            "mle_deviance": self.mle_deviance,
            "n_free_parameters": self.n_free_parameters,
            "bic_point_estimate": self.bic_point_estimate,
            **{name: self.value(name) for name in CRITERIA},
        }


def _is_flat(prior: PriorHyper) -> bool:
    return (
        bool(np.all(prior.shape == 1.0))
        and bool(np.all(prior.rate == 0.0))
        and bool(np.all(prior.concentration == 1.0))
    )


def compute_criteria(
    chain: Chain,
    map_result: MAPResult,
    ds: RankingDataset,
    mle_result: MAPResult | float | None = None,
) -> CriteriaReport:
    """Compute all selection criteria for one fitted component count.

    Parameters
    ----------
    chain : Chain
        Needs at least two retained draws (the variance penalty is
        undefined otherwise).
    map_result : MAPResult
        Fit of the same model on the same data.
    ds : RankingDataset
    mle_result : MAPResult or float, optional
        Flat-prior fit (or its deviance) for BIC.  When omitted, the MAP
        deviance is reused: exactly when ``map_result`` itself used the flat
        prior, as a flagged substitute otherwise.

    Returns
    -------
    CriteriaReport
    """
    if chain.n_draws < 2:
        raise ValueError("need at least 2 retained draws to compute criteria")
    if chain.n_units != ds.n_units or chain.n_items != ds.n_items:
        raise ValueError("chain and dataset disagree on units or items")
    if map_result.params.n_components != chain.n_components:
        raise ValueError("chain and MAP result disagree on component count")
    g, k, n = chain.n_components, chain.n_items, ds.n_units
    d_bar = float(chain.deviance.mean())
    d_var = float(chain.deviance.var(ddof=1))
    d_map = deviance(ds, map_result.params)
    if mle_result is None:
        d_mle = d_map
        bic_point = "mle" if _is_flat(map_result.prior) else "map"
    elif isinstance(mle_result, MAPResult):
        d_mle = deviance(ds, mle_result.params)
        bic_point = "mle"
    else:
        d_mle = float(mle_result)
        bic_point = "mle"
    nu = g * (k - 1) + (g - 1)
    log_n = np.log(n)
    return CriteriaReport(
        n_components=g,
        n_units=n,
        mean_deviance=d_bar,
        var_deviance=d_var,
        map_deviance=d_map,
        min_deviance=float(chain.deviance.min()),
        mle_deviance=d_mle,
        dic1=d_bar + (d_bar - d_map),
        dic2=d_bar + d_var / 2.0,
        bpic1=d_bar + 2.0 * (d_bar - d_map),
        bpic2=d_bar + d_var,
        bicm1=d_bar + (d_var / 2.0) * (log_n - 1.0),
        bicm2=d_map + (d_var / 2.0) * log_n,
        bic=d_mle + nu * log_n,
        n_free_parameters=nu,
        bic_point_estimate=bic_point,
    )


def select_best(reports) -> dict[str, int]:
    """Per-criterion winning component count (ties go to the smaller count).

    Parameters
    ----------
    reports : sequence of CriteriaReport
        One per distinct component count.

    Returns
    -------
    dict mapping criterion name to its chosen component count.
    """
    reports = sorted(reports, key=lambda r: r.n_components)
    if not reports:
        raise ValueError("no criteria reports given")
    seen = [r.n_components for r in reports]
    if len(set(seen)) != len(seen):
        raise ValueError(f"duplicate component counts in reports: {seen}")
    out = {}
    for name in CRITERIA:
        best = reports[0]
        for r in reports[1:]:
            if r.value(name) < best.value(name):
                best = r
        out[name] = best.n_components
    return out


def criteria_table(reports) -> str:
    """Render reports as CSV with columns ``G,DIC1,...,BIC`` (6 significant
    digits), rows ordered by component count."""
    reports = sorted(reports, key=lambda r: r.n_components)
    lines = ["G," + ",".join(CRITERIA)]
    for r in reports:
        lines.append(
            f"{r.n_components},"
            + ",".join(f"{r.value(name):.6g}" for name in CRITERIA)
        )
    return "\n".join(lines) + "\n"
