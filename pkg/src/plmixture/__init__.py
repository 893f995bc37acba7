"""Bayesian mixtures of Plackett-Luce models for partially ranked data.

The package fits finite mixtures of Plackett-Luce rankers to top-m ordering
data: MAP point estimation by EM, full posterior sampling by a Gibbs sampler
built on latent stage times, label-switching correction by pivotal
reordering, deviance-based model selection across mixture sizes, and
posterior predictive goodness-of-fit checks.

Entry points: the scikit-learn style estimators `PLMixtureMAP` and
`PLMixtureGibbs`, the underlying functions re-exported here, and the
``plmixture`` command line tool.
"""

from .criteria import (
    CRITERIA,
    CriteriaReport,
    compute_criteria,
    criteria_table,
    select_best,
)
from .data import (
    DatasetError,
    LengthStratum,
    PartialOrdering,
    RankingDataset,
    SummaryStats,
    as_ranking_dataset,
    average_ranks,
    conditional_summaries,
    paired_comparison_matrix,
    parse_dataset,
    serialize_dataset,
    summaries_to_json,
    top1_frequencies,
)
from .estimators import PLMixtureGibbs, PLMixtureMAP
from .gibbs import Chain, GibbsConfig, load_chain, run_chain, save_chain
from .gof import (
    KINDS,
    GofReport,
    discrepancy,
    expected_pairs,
    expected_top1,
    posterior_predictive_check,
    posterior_predictive_p,
)
from .map_em import MAPResult, PriorHyper, fit_map
from .plcore import (
    PLMixtureParams,
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
from .relabel import (
    PosteriorSummary,
    RelabeledChain,
    pivotal_relabel,
    save_relabeled_chain,
    summarize,
)
from .simulate import (
    CENSORING_SETTINGS,
    AgreementTable,
    Scenario,
    ScenarioResult,
    draw_scenario_dataset,
    draw_scenario_params,
    run_study,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "DatasetError",
    "PartialOrdering",
    "RankingDataset",
    "LengthStratum",
    "SummaryStats",
    "parse_dataset",
    "as_ranking_dataset",
    "serialize_dataset",
    "top1_frequencies",
    "paired_comparison_matrix",
    "conditional_summaries",
    "average_ranks",
    "summaries_to_json",
    "PLMixtureParams",
    "pl_log_prob",
    "mixture_log_lik",
    "deviance",
    "posterior_membership",
    "membership_matrix",
    "modal_ordering",
    "sample_pl",
    "sample_mixture_dataset",
    "apply_censoring",
    "PriorHyper",
    "MAPResult",
    "fit_map",
    "GibbsConfig",
    "Chain",
    "run_chain",
    "save_chain",
    "load_chain",
    "RelabeledChain",
    "PosteriorSummary",
    "pivotal_relabel",
    "summarize",
    "save_relabeled_chain",
    "CRITERIA",
    "CriteriaReport",
    "compute_criteria",
    "select_best",
    "criteria_table",
    "KINDS",
    "GofReport",
    "expected_top1",
    "expected_pairs",
    "discrepancy",
    "posterior_predictive_p",
    "posterior_predictive_check",
    "CENSORING_SETTINGS",
    "Scenario",
    "ScenarioResult",
    "AgreementTable",
    "draw_scenario_params",
    "draw_scenario_dataset",
    "run_study",
    "PLMixtureMAP",
    "PLMixtureGibbs",
]
