"""Command line interface.

Subcommands cover the full workflow: ``fit`` one mixture size, ``select``
across a grid of sizes, ``gof`` for posterior predictive checking of a saved
fit, ``simulate`` for censored-data selection studies, and ``report`` to turn
run artifacts into tidy plot-ready CSVs.  Every command writes a
``manifest.json`` (command, resolved configuration, seed, input hashes,
package version) from which the run can be reproduced bit for bit.

Exit codes: 0 on success, 2 on usage or input errors, 1 on other failures.
"""

from __future__ import annotations

import functools
import hashlib
import json
import os
import shutil
from pathlib import Path

import click
import numpy as np

from . import __version__
from .criteria import CRITERIA, compute_criteria, criteria_table, select_best
from .data import (
    DatasetError,
    RankingDataset,
    parse_dataset,
    summaries_to_json,
)
from .gibbs import GibbsConfig, load_chain, run_chain
from .gof import KINDS, posterior_predictive_check
from .map_em import PriorHyper, fit_map
from .plcore import PLMixtureParams, modal_ordering
from .relabel import pivotal_relabel, save_relabeled_chain, summarize
from .simulate import Scenario, run_study

SEED_ENV_VAR = "PLMIXTURE_SEED"

_FULL_SCALE = {
    "replicates": 100,
    "iters": 22000,
    "burnin": 2000,
    "grid": (1, 2, 3, 4, 5, 6, 7),
}


def _friendly_errors(fn):
    """Map expected failures onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except FileNotFoundError as exc:
            name = exc.filename if exc.filename else str(exc)
            raise click.UsageError(f"missing file: {name}") from exc
        except (DatasetError, ValueError) as exc:
            raise click.UsageError(str(exc)) from exc
        except Exception as exc:
            raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc

    return wrapper


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return int(seed)
    raw = os.environ.get(SEED_ENV_VAR, "0")
    try:
        return int(raw)
    except ValueError:
        raise click.UsageError(
            f"{SEED_ENV_VAR} must be an integer, got {raw!r}"
        ) from None


def _spawn_seeds(seed, n: int) -> list[int]:
    root = (
        seed
        if isinstance(seed, np.random.SeedSequence)
        else np.random.SeedSequence(seed)
    )
    return [int(s.generate_state(1)[0]) for s in root.spawn(n)]


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_json(path: Path, doc) -> None:
    path.write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _write_manifest(out_dir: Path, command: str, seed, config: dict, inputs) -> None:
    doc = {
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "seed": seed,
        "version": __version__,
    }
    _write_json(out_dir / "manifest.json", doc)


def _round6(obj):
    if isinstance(obj, float):
        return float(f"{obj:.6g}")
    if isinstance(obj, dict):
        return {key: _round6(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round6(value) for value in obj]
    return obj


def _load_dataset(path, n_items: int | None) -> RankingDataset:
    text = Path(path).read_text(encoding="utf-8")
    return parse_dataset(text, n_items=n_items)


def _resolve_prior(choice: str | None, g: int, k: int):
    """Build the prior named by a ``--prior`` value.

    Returns the `PriorHyper` (None means the library default) and a scalar
    record of it for the manifest.
    """
    if choice is None or choice == "default":
        return None, {"shape": 1.0, "rate": 0.001, "concentration": 1.0}
    if choice == "flat":
        return (
            PriorHyper.flat(g, k),
            {"shape": 1.0, "rate": 0.0, "concentration": 1.0},
        )
    parts = choice.split(",")
    if len(parts) != 3:
        raise click.UsageError(
            "--prior must be 'shape,rate,concentration', 'flat', or 'default'"
        )
    try:
        c, d, a = (float(v) for v in parts)
    except ValueError:
        raise click.UsageError(f"bad --prior value {choice!r}") from None
    prior = PriorHyper(
        shape=np.full((g, k), c),
        rate=np.full(g, d),
        concentration=np.full(g, a),
    )
    return prior, {"shape": c, "rate": d, "concentration": a}


def _params_block(params: PLMixtureParams) -> str:
    k = params.n_items
    lines = ["component,weight," + ",".join(f"p_{i + 1}" for i in range(k))]
    for g in range(params.n_components):
        lines.append(
            f"{g + 1},{params.weights[g]:.6g},"
            + ",".join(f"{v:.6g}" for v in params.supports[g])
        )
    return "\n".join(lines)


def _map_doc(map_result) -> dict:
    return {
        "estimate": json.loads(map_result.params.to_json()),
        "log_posterior": map_result.log_posterior,
        "converged": map_result.converged,
        "n_iter": map_result.n_iter,
        "floored_items": [
            [int(i + 1) for i in np.flatnonzero(row)]
            for row in map_result.floored
        ],
        "modal_orderings": [
            list(modal_ordering(p)) for p in map_result.params.supports
        ],
    }


def _posterior_doc(chain, summary) -> dict:
    return {
        "n_draws": summary.n_draws,
        "mean_p": summary.mean_supports.tolist(),
        "sd_p": summary.sd_supports.tolist(),
        "mean_omega": summary.mean_weights.tolist(),
        "sd_omega": summary.sd_weights.tolist(),
        "modal_orderings": [list(o) for o in summary.modal_orderings],
        "mean_deviance": float(chain.deviance.mean()),
        "min_deviance": float(chain.deviance.min()),
    }


@click.group()
@click.version_option(__version__, prog_name="plmixture")
def main():
    """Bayesian mixtures of Plackett-Luce models for partial rankings."""


@main.command()
@click.argument(
    "dataset", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.option(
    "-G",
    "--components",
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    help="Number of mixture components.",
)
@click.option(
    "--items",
    type=click.IntRange(min=2),
    default=None,
    help="Item count when the file has no '# K=<int>' header.",
)
@click.option(
    "--prior",
    "prior_choice",
    default=None,
    help="Prior as 'shape,rate,concentration' (shape and concentration at "
    "least 1), or 'flat' / 'default'.  [default: default]",
)
@click.option(
    "--iters",
    type=click.IntRange(min=1),
    default=22000,
    show_default=True,
    help="Gibbs sweeps.",
)
@click.option(
    "--burnin",
    type=click.IntRange(min=0),
    default=2000,
    show_default=True,
    help="Discarded sweeps.",
)
@click.option(
    "--thin",
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    help="Keep every thin-th sweep.",
)
@click.option(
    "--starts",
    type=click.IntRange(min=1),
    default=10,
    show_default=True,
    help="EM restarts.",
)
@click.option(
    "--seed",
    type=int,
    default=None,
    help=f"Root seed.  [default: ${SEED_ENV_VAR} or 0]",
)
@click.option("--map-only", is_flag=True, help="Skip the Gibbs stage.")
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    required=True,
    help="Output directory.",
)
@_friendly_errors
def fit(
    dataset, components, items, prior_choice, iters, burnin, thin, starts, seed, map_only, out
):
    """Fit a mixture of a fixed size to DATASET.

    Writes map.json (the point estimate), chain_trace.csv and
    chain_labels.csv (relabeled draws), summary.json, and manifest.json
    under --out.
    """
    seed = _resolve_seed(seed)
    ds = _load_dataset(dataset, items)
    prior, prior_doc = _resolve_prior(prior_choice, components, ds.n_items)
    em_seed, chain_seed = _spawn_seeds(seed, 2)
    map_result = fit_map(ds, components, prior, n_starts=starts, seed=em_seed)

    out.mkdir(parents=True, exist_ok=True)
    (out / "map.json").write_text(
        map_result.params.to_json() + "\n", encoding="utf-8"
    )
    doc = {
        "n_components": components,
        "n_items": ds.n_items,
        "n_units": ds.n_units,
        "map": _map_doc(map_result),
    }
    click.echo(f"dataset: {ds.n_units} units, {ds.n_items} items")
    click.echo(
        f"MAP (G={components}): log posterior {map_result.log_posterior:.6g}, "
        f"{'converged' if map_result.converged else 'NOT converged'} "
        f"after {map_result.n_iter} iterations"
    )
    click.echo(_params_block(map_result.params))

    if not map_only:
        config = GibbsConfig(
            n_iter=iters, burn_in=burnin, thin=thin, seed=chain_seed
        )
        chain = run_chain(ds, components, map_result.prior, config, init=map_result)
        relabeled = pivotal_relabel(chain, map_result.params)
        summary = summarize(relabeled)
        save_relabeled_chain(
            relabeled, out / "chain_trace.csv", out / "chain_labels.csv"
        )
        doc["posterior"] = _posterior_doc(chain, summary)
        click.echo(
            f"posterior means over {summary.n_draws} retained draws "
            f"(mean deviance {chain.deviance.mean():.6g})"
        )
        click.echo(_params_block(summary.params))

    _write_json(out / "summary.json", _round6(doc))
    _write_manifest(
        out,
        "fit",
        seed,
        {
            "components": components,
            "prior": prior_doc,
            "iters": iters,
            "burnin": burnin,
            "thin": thin,
            "starts": starts,
            "map_only": map_only,
            "items": ds.n_items,
        },
        [dataset],
    )


def _select_cell(ds, g, iters, burnin, thin, starts, seeds):
    """Fit one grid cell: default-prior MAP, flat MLE refit, Gibbs chain."""
    map_result = fit_map(ds, g, n_starts=starts, seed=seeds[0])
    mle_result = fit_map(
        ds,
        g,
        PriorHyper.flat(g, ds.n_items),
        n_starts=starts,
        seed=seeds[1],
        init=map_result.params,
    )
    config = GibbsConfig(n_iter=iters, burn_in=burnin, thin=thin, seed=seeds[2])
    chain = run_chain(ds, g, map_result.prior, config, init=map_result)
    relabeled = pivotal_relabel(chain, map_result.params)
    report = compute_criteria(chain, map_result, ds, mle_result=mle_result)
    return map_result, mle_result, relabeled, summarize(relabeled), report


@main.command()
@click.argument(
    "dataset", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.option(
    "--gmin",
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    help="Smallest component count.",
)
@click.option(
    "--gmax",
    type=click.IntRange(min=1),
    required=True,
    help="Largest component count.",
)
@click.option("--items", type=click.IntRange(min=2), default=None)
@click.option("--iters", type=click.IntRange(min=1), default=22000, show_default=True)
@click.option("--burnin", type=click.IntRange(min=0), default=2000, show_default=True)
@click.option("--thin", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--starts", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option(
    "--jobs",
    type=click.IntRange(min=1),
    default=None,
    help="Parallel workers across component counts.  [default: all cores]",
)
@click.option(
    "--out", type=click.Path(file_okay=False, path_type=Path), required=True
)
@_friendly_errors
def select(dataset, gmin, gmax, items, iters, burnin, thin, starts, seed, jobs, out):
    """Fit every component count gmin..gmax and rank them by criteria.

    Writes criteria.csv, criteria.json (values plus per-criterion winners),
    per-size artifacts under G<g>/ subdirectories, and manifest.json.
    """
    if gmax < gmin:
        raise click.UsageError(f"--gmax {gmax} is smaller than --gmin {gmin}")
    seed = _resolve_seed(seed)
    ds = _load_dataset(dataset, items)
    grid = list(range(gmin, gmax + 1))
    cell_seeds = [
        _spawn_seeds(child, 3)
        for child in np.random.SeedSequence(seed).spawn(len(grid))
    ]
    jobs = jobs or (os.cpu_count() or 1)

    def run_one(pos):
        return _select_cell(
            ds, grid[pos], iters, burnin, thin, starts, cell_seeds[pos]
        )

    if jobs == 1 or len(grid) == 1:
        cells = [run_one(pos) for pos in range(len(grid))]
    else:
        from joblib import Parallel, delayed

        cells = Parallel(n_jobs=min(jobs, len(grid)))(
            delayed(run_one)(pos) for pos in range(len(grid))
        )

    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for g, (map_result, mle_result, relabeled, summary, report) in zip(grid, cells):
        sub = out / f"G{g}"
        sub.mkdir(exist_ok=True)
        (sub / "map.json").write_text(
            map_result.params.to_json() + "\n", encoding="utf-8"
        )
        (sub / "mle.json").write_text(
            mle_result.params.to_json() + "\n", encoding="utf-8"
        )
        save_relabeled_chain(
            relabeled, sub / "chain_trace.csv", sub / "chain_labels.csv"
        )
        _write_json(
            sub / "summary.json",
            _round6(
                {
                    "n_components": g,
                    "n_items": ds.n_items,
                    "n_units": ds.n_units,
                    "map": _map_doc(map_result),
                    "posterior": _posterior_doc(relabeled.chain, summary),
                }
            ),
        )
        reports.append(report)

    winners = select_best(reports)
    table = criteria_table(reports)
    (out / "criteria.csv").write_text(table, encoding="utf-8")
    _write_json(
        out / "criteria.json",
        _round6(
            {
                "criteria": [r.to_dict() for r in reports],
                "winners": winners,
            }
        ),
    )
    _write_manifest(
        out,
        "select",
        seed,
        {
            "gmin": gmin,
            "gmax": gmax,
            "iters": iters,
            "burnin": burnin,
            "thin": thin,
            "starts": starts,
            "items": ds.n_items,
        },
        [dataset],
    )
    click.echo(table.rstrip("\n"))
    click.echo(
        "winners: "
        + " ".join(f"{name}=G{winners[name]}" for name in CRITERIA)
    )


@main.command()
@click.argument(
    "dataset", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.option(
    "--fit-dir",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    required=True,
    help="Directory with chain_trace.csv and chain_labels.csv from fit.",
)
@click.option(
    "--nrep",
    type=click.IntRange(min=1),
    default=None,
    help="Posterior draws checked.  [default: min(2000, retained)]",
)
@click.option(
    "--kinds",
    default=None,
    help="Comma-separated discrepancy kinds.  [default: top1,pairs plus the "
    "conditional variants when the data has 2 or more length strata]",
)
@click.option("--items", type=click.IntRange(min=2), default=None)
@click.option("--seed", type=int, default=None)
@click.option(
    "--out", type=click.Path(file_okay=False, path_type=Path), required=True
)
@_friendly_errors
def gof(dataset, fit_dir, nrep, kinds, items, seed, out):
    """Posterior predictive goodness-of-fit of a saved fit on DATASET.

    Writes gof.json (p values), discrepancies.csv (per-draw observed and
    replicated discrepancies), and manifest.json under --out.
    """
    seed = _resolve_seed(seed)
    ds = _load_dataset(dataset, items)
    trace_path = fit_dir / "chain_trace.csv"
    labels_path = fit_dir / "chain_labels.csv"
    chain = load_chain(trace_path, labels_path)
    if kinds is None:
        selected = list(KINDS) if len(ds.summary.by_length) >= 2 else ["top1", "pairs"]
    else:
        selected = [k.strip() for k in kinds.split(",") if k.strip()]
        unknown = [k for k in selected if k not in KINDS]
        if unknown:
            raise click.UsageError(
                f"unknown discrepancy kinds {unknown}; choose from {list(KINDS)}"
            )
    report = posterior_predictive_check(
        chain, ds, kinds=selected, n_rep=nrep, rng=np.random.default_rng(seed)
    )

    out.mkdir(parents=True, exist_ok=True)
    (out / "gof.json").write_text(report.to_json() + "\n", encoding="utf-8")
    lines = ["kind,draw,observed,replicated"]
    for kind in selected:
        pairs = report.discrepancies[kind]
        for j in range(report.n_rep):
            lines.append(
                f"{kind},{report.draw_indices[j] + 1},"
                f"{pairs[j, 0]:.6g},{pairs[j, 1]:.6g}"
            )
    (out / "discrepancies.csv").write_text(
        "\n".join(lines) + "\n", encoding="utf-8"
    )
    _write_manifest(
        out,
        "gof",
        seed,
        {"nrep": report.n_rep, "kinds": selected, "items": ds.n_items},
        [dataset, trace_path, labels_path],
    )
    for kind in selected:
        click.echo(
            f"{kind}: p = {report.p_values[kind]:.6g} "
            f"(skipped cells: {report.skipped_cells[kind]})"
        )


def _parse_int_list(text: str, flag: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in str(text).split(","))
    except ValueError:
        raise click.UsageError(f"{flag} must be comma-separated integers") from None
    if not values:
        raise click.UsageError(f"{flag} must not be empty")
    return values


def _censoring_value(raw):
    if isinstance(raw, str):
        return raw.upper()
    if isinstance(raw, dict):
        return {int(k): float(v) for k, v in raw.items()}
    raise click.UsageError(f"bad censoring value {raw!r}")


@main.command()
@click.option(
    "--g-star",
    "g_star",
    multiple=True,
    type=click.IntRange(min=1),
    help="True component count; repeatable.  [default: 2]",
)
@click.option(
    "--censoring",
    multiple=True,
    help="Censoring setting A, B, or C; repeatable.  [default: A]",
)
@click.option(
    "--replicates", type=click.IntRange(min=1), default=20, show_default=True
)
@click.option(
    "--grid",
    default="1,2,3,4",
    show_default=True,
    help="Component counts fitted to every replicate, comma-separated.",
)
@click.option("--units", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--items", type=click.IntRange(min=2), default=6, show_default=True)
@click.option(
    "--iters",
    type=click.IntRange(min=1),
    default=5000,
    show_default=True,
    help="Gibbs sweeps per fit.",
)
@click.option("--burnin", type=click.IntRange(min=0), default=1000, show_default=True)
@click.option(
    "--starts",
    type=click.IntRange(min=1),
    default=5,
    show_default=True,
    help="EM restarts per fit.",
)
@click.option("--seed", type=int, default=None)
@click.option(
    "--jobs",
    type=click.IntRange(min=1),
    default=None,
    help="Parallel workers across replicates.  [default: all cores]",
)
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="JSON study config file; explicit flags override its values.",
)
@click.option(
    "--full-scale",
    is_flag=True,
    help="Run the full published design: 100 replicates, 22000 sweeps "
    "(2000 burn-in), grid 1..7.  Explicit flags and config values still win.",
)
@click.option(
    "--out", type=click.Path(file_okay=False, path_type=Path), required=True
)
@click.pass_context
@_friendly_errors
def simulate(
    ctx,
    g_star,
    censoring,
    replicates,
    grid,
    units,
    items,
    iters,
    burnin,
    starts,
    seed,
    jobs,
    config_path,
    full_scale,
    out,
):
    """Censored-data selection study: simulate, fit a grid, tally agreement.

    Writes agreement.csv (per-scenario agreement rates), selections.csv
    (per-replicate chosen counts), and manifest.json under --out.
    """
    values = {
        "g_star": list(g_star) or [2],
        "censoring": list(censoring) or ["A"],
        "replicates": replicates,
        "grid": _parse_int_list(grid, "--grid"),
        "units": units,
        "items": items,
        "iters": iters,
        "burnin": burnin,
        "starts": starts,
        "seed": seed,
        "jobs": jobs,
    }
    explicit = {
        name
        for name in values
        if ctx.get_parameter_source(name)
        == click.core.ParameterSource.COMMANDLINE
    }
    if config_path is not None:
        cfg = json.loads(config_path.read_text(encoding="utf-8"))
        unknown = sorted(set(cfg) - set(values))
        if unknown:
            raise click.UsageError(f"unknown config keys {unknown}")
        for key, value in cfg.items():
            if key in explicit:
                continue
            if key == "grid":
                value = tuple(int(v) for v in value)
            if key in ("g_star", "censoring") and not isinstance(value, list):
                value = [value]
            values[key] = value
            explicit.add(key)
    if full_scale:
        for key, value in _FULL_SCALE.items():
            if key not in explicit:
                values[key] = value

    seed = _resolve_seed(values["seed"])
    scenarios = tuple(
        Scenario(
            n_components=int(g),
            censoring=_censoring_value(c),
            n_items=int(values["items"]),
            n_units=int(values["units"]),
        )
        for g in values["g_star"]
        for c in values["censoring"]
    )
    jobs = values["jobs"] or (os.cpu_count() or 1)
    table = run_study(
        scenarios,
        n_replicates=int(values["replicates"]),
        g_grid=values["grid"],
        gibbs_config=GibbsConfig(
            n_iter=int(values["iters"]), burn_in=int(values["burnin"])
        ),
        n_starts=int(values["starts"]),
        seed=seed,
        n_jobs=jobs,
    )

    out.mkdir(parents=True, exist_ok=True)
    (out / "agreement.csv").write_text(table.agreement_csv(), encoding="utf-8")
    (out / "selections.csv").write_text(table.selections_csv(), encoding="utf-8")
    _write_manifest(
        out,
        "simulate",
        seed,
        {
            "g_star": [int(g) for g in values["g_star"]],
            "censoring": [
                c if isinstance(c, str) else {str(k): v for k, v in c.items()}
                for c in (_censoring_value(c) for c in values["censoring"])
            ],
            "replicates": int(values["replicates"]),
            "grid": [int(g) for g in values["grid"]],
            "units": int(values["units"]),
            "items": int(values["items"]),
            "iters": int(values["iters"]),
            "burnin": int(values["burnin"]),
            "starts": int(values["starts"]),
            "full_scale": full_scale,
        },
        [config_path] if config_path is not None else [],
    )
    click.echo(table.agreement_csv().rstrip("\n"))


@main.command()
@click.argument(
    "run_dir", type=click.Path(exists=True, file_okay=False, path_type=Path)
)
@click.option(
    "--input",
    "input_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Dataset to summarize alongside the run artifacts.",
)
@click.option("--items", type=click.IntRange(min=2), default=None)
@click.option(
    "--out", type=click.Path(file_okay=False, path_type=Path), required=True
)
@_friendly_errors
def report(run_dir, input_path, items, out):
    """Turn the artifacts in RUN_DIR into plot-ready CSVs.

    Emits criteria_curves.csv (tidy criterion-versus-size values),
    support_quantiles.csv (box-plot quantiles of the per-component support
    draws), a copy of discrepancies.csv when present, and, with --input,
    data_summary.json for the dataset itself.
    """
    read = []
    written = []
    out.mkdir(parents=True, exist_ok=True)

    criteria_path = run_dir / "criteria.csv"
    if criteria_path.exists():
        rows = criteria_path.read_text(encoding="utf-8").splitlines()
        header = rows[0].split(",")
        lines = ["G,criterion,value"]
        for row in rows[1:]:
            cells = row.split(",")
            lines.extend(
                f"{cells[0]},{header[j]},{cells[j]}"
                for j in range(1, len(header))
            )
        (out / "criteria_curves.csv").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
        read.append(criteria_path)
        written.append("criteria_curves.csv")

    traces = []
    if (run_dir / "chain_trace.csv").exists():
        traces.append(("fit", run_dir / "chain_trace.csv"))
    traces.extend(
        (path.parent.name, path)
        for path in sorted(
            run_dir.glob("G*/chain_trace.csv"),
            key=lambda p: (len(p.parent.name), str(p)),
        )
    )
    if traces:
        quantiles = (2.5, 25.0, 50.0, 75.0, 97.5)
        lines = [
            "source,component,item,"
            + ",".join(f"q{q:g}" for q in quantiles)
        ]
        for source, trace_path in traces:
            labels_path = trace_path.with_name("chain_labels.csv")
            chain = load_chain(trace_path, labels_path)
            values = np.percentile(chain.canonical_supports(), quantiles, axis=0)
            lines.extend(
                f"{source},{g + 1},{i + 1},"
                + ",".join(f"{values[j, g, i]:.6g}" for j in range(len(quantiles)))
                for g in range(chain.n_components)
                for i in range(chain.n_items)
            )
            read.extend([trace_path, labels_path])
        (out / "support_quantiles.csv").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
        written.append("support_quantiles.csv")

    pairs_path = run_dir / "discrepancies.csv"
    if pairs_path.exists():
        shutil.copyfile(pairs_path, out / "discrepancy_pairs.csv")
        read.append(pairs_path)
        written.append("discrepancy_pairs.csv")

    if input_path is not None:
        ds = _load_dataset(input_path, items)
        (out / "data_summary.json").write_text(
            summaries_to_json(ds) + "\n", encoding="utf-8"
        )
        read.append(input_path)
        written.append("data_summary.json")

    if not written:
        raise click.UsageError(
            f"nothing to report: {run_dir} has no criteria.csv, chain traces, "
            "or discrepancies.csv (and no --input was given)"
        )
    _write_manifest(
        out,
        "report",
        None,
        {"run_dir": str(run_dir), "input": str(input_path) if input_path else None},
        read,
    )
    for name in written:
        click.echo(f"wrote {name}")


if __name__ == "__main__":
    main()
