"""Simulation study: scenario generation, grid fitting, agreement rates.

A scenario draws a mixture with a known component count, simulates complete
rankings from it, censors them to top-``m`` lengths with fixed proportions,
then fits the model for every component count on a grid and records which
count each selection criterion picks.  Aggregated over replicates this gives
per-criterion agreement rates with the true count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .criteria import CRITERIA, compute_criteria, select_best
from .gibbs import GibbsConfig, run_chain
from .map_em import PriorHyper, fit_map
from .plcore import PLMixtureParams, apply_censoring, sample_mixture_dataset

__all__ = [
    "CENSORING_SETTINGS",
    "Scenario",
    "ScenarioResult",
    "AgreementTable",
    "draw_scenario_params",
    "draw_scenario_dataset",
    "run_study",
]

# named censoring settings for 6 items: probability of each top-m length,
# m = 5 being the complete ordering
CENSORING_SETTINGS: dict[str, dict[int, float]] = {
    "A": {1: 0.0, 2: 0.02, 3: 0.04, 4: 0.10, 5: 0.84},
    "B": {1: 0.05, 2: 0.15, 3: 0.15, 4: 0.20, 5: 0.45},
    "C": {1: 0.05, 2: 0.20, 3: 0.20, 4: 0.25, 5: 0.30},
}


@dataclass(frozen=True)
class Scenario:
    """One simulation setting.

    Parameters
    ----------
    n_components : int
        True component count.
    censoring : str or mapping
        Named setting (``"A"``, ``"B"``, ``"C"``; defined for 6 items) or an
        explicit length distribution ``{m: probability}``.
    n_items : int
    n_units : int
    """

    n_components: int
    censoring: str | Mapping[int, float] = "A"
    n_items: int = 6
    n_units: int = 1000

    def __post_init__(self):
        if self.n_components < 1:
            raise ValueError("n_components must be at least 1")
        if self.n_items < 2 or self.n_units < 1:
            raise ValueError("need n_items >= 2 and n_units >= 1")
        self.proportions()  # validate eagerly

    def proportions(self) -> dict[int, float]:
        """The censored-length distribution as an explicit mapping."""
        if isinstance(self.censoring, str):
            if self.censoring not in CENSORING_SETTINGS:
                raise ValueError(
                    f"unknown censoring setting {self.censoring!r}; named "
                    f"settings are {sorted(CENSORING_SETTINGS)}"
                )
            if self.n_items != 6:
                raise ValueError(
                    "named censoring settings are defined for 6 items; pass "
                    "an explicit length distribution"
                )
            return dict(CENSORING_SETTINGS[self.censoring])
        return {int(m): float(v) for m, v in self.censoring.items()}

    @property
    def label(self) -> str:
        cens = (
            self.censoring if isinstance(self.censoring, str) else "custom"
        )
        return f"G{self.n_components}-{cens}"


def draw_scenario_params(scenario: Scenario, rng) -> PLMixtureParams:
    """Draw scenario parameters: independent Beta(0.3, 0.3) supports (the
    U-shape pushes items toward strong or weak) and equal weights."""
    g, k = scenario.n_components, scenario.n_items
    supports = rng.beta(0.3, 0.3, size=(g, k))
    bad = (supports <= 0.0) | (supports >= 1.0)
    while np.any(bad):
        supports[bad] = rng.beta(0.3, 0.3, size=int(bad.sum()))
        bad = (supports <= 0.0) | (supports >= 1.0)
    return PLMixtureParams(supports, np.full(g, 1.0 / g))


def draw_scenario_dataset(scenario: Scenario, rng):
    """Simulate one scenario replicate.

    Returns
    -------
    ds : RankingDataset
        Censored dataset.
    params : PLMixtureParams
        Generating parameters.
    labels : ndarray
        True component labels, 1-based.
    """
    params = draw_scenario_params(scenario, rng)
    full, labels = sample_mixture_dataset(
        params, scenario.n_units, scenario.n_items - 1, rng
    )
    return apply_censoring(full, scenario.proportions(), rng), params, labels


@dataclass(frozen=True)
class ScenarioResult:
    """Selection outcomes of one scenario across replicates."""

    scenario: Scenario
    selections: dict[str, tuple[int, ...]]
    n_failed: int

    @property
    def n_completed(self) -> int:
        return len(next(iter(self.selections.values())))

    def distribution(self, criterion: str) -> dict[int, int]:
        """How often each component count was chosen."""
        chosen = self.selections[criterion]
        return {g: chosen.count(g) for g in sorted(set(chosen))}

    def agreement(self, criterion: str) -> float:
        """Percent of completed replicates choosing the true count."""
        chosen = self.selections[criterion]
        if not chosen:
            return float("nan")
        hits = sum(1 for g in chosen if g == self.scenario.n_components)
        return 100.0 * hits / len(chosen)


@dataclass(frozen=True)
class AgreementTable:
    """Study outcome: per-scenario, per-criterion agreement rates."""

    results: tuple[ScenarioResult, ...]
    g_grid: tuple[int, ...]
    n_replicates: int

    def agreement_csv(self) -> str:
        """Agreement rates (%), one row per scenario."""
        lines = ["scenario,true_G,censoring,completed," + ",".join(CRITERIA)]
        for res in self.results:
            sc = res.scenario
            cens = sc.censoring if isinstance(sc.censoring, str) else "custom"
            lines.append(
                f"{sc.label},{sc.n_components},{cens},{res.n_completed},"
                + ",".join(f"{res.agreement(c):.6g}" for c in CRITERIA)
            )
        return "\n".join(lines) + "\n"

    def selections_csv(self) -> str:
        """Per-replicate selections in long form."""
        lines = ["scenario,replicate,criterion,chosen_G"]
        for res in self.results:
            for crit in CRITERIA:
                for r, g in enumerate(res.selections[crit], start=1):
                    lines.append(f"{res.scenario.label},{r},{crit},{g}")
        return "\n".join(lines) + "\n"


def _fit_cell(ds, g, gibbs_config, n_starts, em_max_iter, seeds):
    """Fit one component count on one dataset; returns its criteria report."""
    prior = PriorHyper.default(g, ds.n_items)
    map_fit = fit_map(
        ds, g, prior, n_starts=n_starts, max_iter=em_max_iter, seed=seeds[0]
    )
    mle_fit = fit_map(
        ds,
        g,
        PriorHyper.flat(g, ds.n_items),
        n_starts=n_starts,
        max_iter=em_max_iter,
        seed=seeds[1],
        init=map_fit.params,
    )
    chain = run_chain(
        ds,
        g,
        prior,
        GibbsConfig(
            n_iter=gibbs_config.n_iter,
            burn_in=gibbs_config.burn_in,
            thin=gibbs_config.thin,
            seed=seeds[2],
        ),
        init=map_fit,
    )
    return compute_criteria(chain, map_fit, ds, mle_result=mle_fit)


def _one_replicate(scenario, g_grid, gibbs_config, n_starts, em_max_iter, seed_seq):
    streams = seed_seq.spawn(1 + len(g_grid))
    rng = np.random.default_rng(streams[0])
    ds, _, _ = draw_scenario_dataset(scenario, rng)
    reports = []
    for pos, g in enumerate(g_grid):
        cell_seeds = [int(s.generate_state(1)[0]) for s in streams[1 + pos].spawn(3)]
        reports.append(
            _fit_cell(ds, g, gibbs_config, n_starts, em_max_iter, cell_seeds)
        )
    winners = select_best(reports)
    return {crit: winners[crit] for crit in CRITERIA}


def run_study(
    scenarios: Sequence[Scenario],
    n_replicates: int = 20,
    g_grid: Sequence[int] = (1, 2, 3, 4),
    gibbs_config: GibbsConfig | None = None,
    *,
    n_starts: int = 5,
    em_max_iter: int = 500,
    seed=None,
    n_jobs: int = 1,
) -> AgreementTable:
    """Run the selection study over scenarios and replicates.

    Parameters
    ----------
    scenarios : sequence of Scenario
    n_replicates : int
        Replicates per scenario (desk-scale default 20; the full-scale
        design uses 100).
    g_grid : sequence of int
        Component counts fitted to every replicate.
    gibbs_config : GibbsConfig, optional
        Chain length template; its seed field is ignored (per-cell seeds
        are derived from ``seed``).  Desk-scale default: 5000 sweeps with
        1000 burn-in.
    n_starts, em_max_iter : int
        EM restart count and iteration cap per fit.
    seed : int or None
        Root seed; the study is reproducible from it.
    n_jobs : int
        Replicate-level parallelism (joblib); 1 runs inline.

    Returns
    -------
    AgreementTable
        A replicate whose fit fails is recorded, warned about, and excluded
        from the rates.
    """
    scenarios = tuple(scenarios)
    if not scenarios or not tuple(g_grid):
        raise ValueError("need at least one scenario and a nonempty grid")
    g_grid = tuple(int(g) for g in g_grid)
    if gibbs_config is None:
        gibbs_config = GibbsConfig(n_iter=5000, burn_in=1000, thin=1)
    root = np.random.SeedSequence(seed)
    children = root.spawn(len(scenarios) * n_replicates)
    tasks = [
        (si, scenarios[si], children[si * n_replicates + r])
        for si in range(len(scenarios))
        for r in range(n_replicates)
    ]

    def run_task(task):
        si, scenario, child = task
        try:
            return si, _one_replicate(
                scenario, g_grid, gibbs_config, n_starts, em_max_iter, child
            )
        except Exception as exc:  # noqa: BLE001 - failures are data here
            return si, exc

    if n_jobs == 1:
        raw = [run_task(t) for t in tasks]
    else:
        from joblib import Parallel, delayed

        raw = Parallel(n_jobs=n_jobs)(delayed(run_task)(t) for t in tasks)

    per_scenario: list[dict[str, list[int]]] = [
        {crit: [] for crit in CRITERIA} for _ in scenarios
    ]
    failed = [0] * len(scenarios)
    for si, outcome in raw:
        if isinstance(outcome, Exception):
            failed[si] += 1
            warnings.warn(
                f"replicate failed in scenario {scenarios[si].label}: {outcome}",
                stacklevel=2,
            )
            continue
        for crit in CRITERIA:
            per_scenario[si][crit].append(outcome[crit])
    results = tuple(
        ScenarioResult(
            scenario=scenarios[si],
            selections={c: tuple(v) for c, v in per_scenario[si].items()},
            n_failed=failed[si],
        )
        for si in range(len(scenarios))
    )
    return AgreementTable(
        results=results, g_grid=g_grid, n_replicates=n_replicates
    )
