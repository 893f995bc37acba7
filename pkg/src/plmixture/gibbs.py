"""Gibbs sampling for Plackett-Luce mixtures via latent-variable augmentation.

Two blocks of latent variables make every full conditional a standard
distribution: per-unit component labels, and per-stage exponential arrival
times whose rate is the total support of the items still available at that
stage.  Conditional on them, supports are Gamma, weights are Dirichlet,
labels are categorical, and the stage times are exponential, so the sampler
sweeps the four blocks in a fixed order with no tuning.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np

from .data import RankingDataset
from .map_em import MAPResult, PriorHyper
from .plcore import (
    PLMixtureParams,
    _accumulate_available,
    _logsumexp_rows,
    component_log_probs,
    membership_matrix,
)

__all__ = [
    "GibbsConfig",
    "Chain",
    "sample_stage_times",
    "sample_labels",
    "sample_supports",
    "sample_weights",
    "run_chain",
    "save_chain",
    "load_chain",
]

_TRACE_MAGIC = "# plmixture chain trace v1"
_LABELS_MAGIC = "# plmixture chain labels v1"


@dataclass(frozen=True)
class GibbsConfig:
    """Chain length settings.

    Parameters
    ----------
    n_iter : int
        Total sweeps (default 22000).
    burn_in : int
        Discarded prefix (default 2000).
    thin : int
        Keep every ``thin``-th sweep after burn-in (default 1).
    seed : int or None
        Seed of the chain's random stream.
    """

    n_iter: int = 22000
    burn_in: int = 2000
    thin: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValueError(f"n_iter must be positive, got {self.n_iter}")
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError(
                f"burn_in must be in 0..n_iter-1, got {self.burn_in}"
            )
        if self.thin < 1:
            raise ValueError(f"thin must be at least 1, got {self.thin}")

    @property
    def n_retained(self) -> int:
        return len(range(self.burn_in, self.n_iter, self.thin))

    @property
    def retained_sweeps(self) -> np.ndarray:
        """1-based sweep numbers of the retained draws."""
        return np.arange(self.burn_in, self.n_iter, self.thin) + 1


@dataclass(frozen=True)
class Chain:
    """Retained Gibbs draws.

    Attributes
    ----------
    supports : ndarray, shape (n_draws, n_components, n_items)
        Raw-scale support draws (canonicalize per draw for reporting).
    weights : ndarray, shape (n_draws, n_components)
        Mixture weight draws, each on the simplex.
    labels : ndarray of int16, shape (n_draws, n_units)
        Component label draws, 1-based.
    deviance : ndarray, shape (n_draws,)
        Observed-data deviance (-2 log likelihood) at each draw.
    config : GibbsConfig
    prior : PriorHyper
    """

    supports: np.ndarray
    weights: np.ndarray
    labels: np.ndarray
    deviance: np.ndarray
    config: GibbsConfig
    prior: PriorHyper

    def __post_init__(self):
        supports = np.asarray(self.supports, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int16)
        dev = np.asarray(self.deviance, dtype=float)
        m, g, k = supports.shape
        if weights.shape != (m, g):
            raise ValueError("weights shape does not match supports")
        if labels.ndim != 2 or labels.shape[0] != m:
            raise ValueError("labels shape does not match supports")
        if dev.shape != (m,):
            raise ValueError("deviance shape does not match supports")
        if np.any(labels < 1) or np.any(labels > g):
            raise ValueError(f"labels must lie in 1..{g}")
        if self.config.n_retained != m:
            raise ValueError(
                f"config retains {self.config.n_retained} draws but chain "
                f"holds {m}"
            )
        for a in (supports, weights, labels, dev):
            a.setflags(write=False)
        object.__setattr__(self, "supports", supports)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "deviance", dev)

    @property
    def n_draws(self) -> int:
        return self.supports.shape[0]

    @property
    def n_components(self) -> int:
        return self.supports.shape[1]

    @property
    def n_items(self) -> int:
        return self.supports.shape[2]

    @property
    def n_units(self) -> int:
        return self.labels.shape[1]

    def canonical_supports(self) -> np.ndarray:
        """Support draws normalized to sum to one within each component."""
        return self.supports / self.supports.sum(axis=2, keepdims=True)

    def params_at(self, draw: int) -> PLMixtureParams:
        """One draw as a parameter object (raw scale)."""
        return PLMixtureParams(self.supports[draw], self.weights[draw])


def _check_labels(labels, n_units, n_components) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != n_units:
        raise ValueError(f"expected {n_units} labels, got {labels.shape[0]}")
    if np.any(labels < 1) or np.any(labels > n_components):
        raise ValueError(f"labels must lie in 1..{n_components}")
    return labels


def sample_stage_times(
    ds: RankingDataset, labels, supports, rng: np.random.Generator
) -> np.ndarray:
    """Draw the latent exponential arrival time of every choice stage.

    Stage ``t`` of unit ``s`` gets rate equal to the total support, under the
    unit's current component, of the items still available at that stage.

    Parameters
    ----------
    ds : RankingDataset
    labels : array-like of int, shape (n_units,)
        Current component labels, 1-based.
    supports : ndarray, shape (n_components, n_items)
    rng : numpy.random.Generator

    Returns
    -------
    ndarray, shape (n_units, max_length)
        Zero at padding positions.
    """
    supports = np.asarray(supports, dtype=float)
    labels0 = _check_labels(labels, ds.n_units, supports.shape[0]) - 1
    per_unit = supports[labels0]  # (n, k)
    chosen = np.take_along_axis(per_unit, ds.ranked_matrix, axis=1)
    chosen = np.where(ds.rank_mask, chosen, 0.0)
    rates = per_unit.sum(axis=1, keepdims=True) - (
        np.cumsum(chosen, axis=1) - chosen
    )
    scale = np.where(ds.rank_mask, 1.0 / rates, 0.0)
    return rng.exponential(scale)


def sample_labels(
    ds: RankingDataset, stage_times, supports, weights, rng: np.random.Generator
) -> np.ndarray:
    """Draw component labels from their categorical full conditional.

    The unnormalized log mass of component ``g`` for unit ``s`` is
    ``log w_g + sum_i u_si log p_gi - sum_i p_gi A_si`` where ``u_si`` flags
    ranked items and ``A_si`` accumulates the unit's stage times over the
    stages at which item ``i`` was still available.

    Returns
    -------
    ndarray of int, shape (n_units,)
        Labels, 1-based.
    """
    supports = np.asarray(supports, dtype=float)
    weights = np.asarray(weights, dtype=float)
    acc = _accumulate_available(ds, np.asarray(stage_times, dtype=float))
    return _labels_from_acc(ds, acc, supports, weights, rng)


def _labels_from_acc(ds, acc, supports, weights, rng) -> np.ndarray:
    with np.errstate(divide="ignore"):
        scores = (
            ds.ranked_flags @ np.log(supports).T
            - acc @ supports.T
            + np.log(weights)[None, :]
        )
    scores -= scores.max(axis=1, keepdims=True)
    probs = np.exp(scores)
    cut = rng.random((ds.n_units, 1)) * probs.sum(axis=1, keepdims=True)
    labels0 = (np.cumsum(probs, axis=1) < cut).sum(axis=1)
    return np.minimum(labels0, supports.shape[0] - 1) + 1


def sample_supports(
    ds: RankingDataset, stage_times, labels, prior: PriorHyper, rng
) -> np.ndarray:
    """Draw supports from their Gamma full conditional.

    Component ``g``, item ``i`` uses shape ``c_gi + (ranked count)`` and rate
    ``d_g + (accumulated stage times)``, both restricted to units currently
    labeled ``g``.

    Returns
    -------
    ndarray, shape (n_components, n_items)
    """
    labels0 = _check_labels(labels, ds.n_units, prior.n_components) - 1
    acc = _accumulate_available(ds, np.asarray(stage_times, dtype=float))
    return _supports_from_acc(ds, acc, labels0, prior, rng)


def _supports_from_acc(ds, acc, labels0, prior, rng) -> np.ndarray:
    onehot = np.zeros((ds.n_units, prior.n_components))
    onehot[np.arange(ds.n_units), labels0] = 1.0
    shape = prior.shape + onehot.T @ ds.ranked_flags
    rate = prior.rate[:, None] + onehot.T @ acc
    if np.any(rate <= 0):
        raise ValueError(
            "Gamma rate is not positive (empty component under a zero prior "
            "rate); use a positive prior rate"
        )
    return rng.gamma(shape, 1.0 / rate)


def sample_weights(labels, prior: PriorHyper, rng) -> np.ndarray:
    """Draw mixture weights from their Dirichlet full conditional."""
    labels0 = np.asarray(labels, dtype=np.int64).reshape(-1) - 1
    if np.any(labels0 < 0) or np.any(labels0 >= prior.n_components):
        raise ValueError(f"labels must lie in 1..{prior.n_components}")
    counts = np.bincount(labels0, minlength=prior.n_components)
    return rng.dirichlet(prior.concentration + counts)


def _mixture_deviance(ds, supports, weights) -> float:
    comp = component_log_probs(ds, supports)
    with np.errstate(divide="ignore"):
        ll = _logsumexp_rows(comp + np.log(weights)[None, :]).sum()
    return float(-2.0 * ll)


def _deviance_batch(ds, supports, weights) -> np.ndarray:
    """Observed-data deviance of a stack of draws, chunked to bound the
    temporary (draws, components, units, stages) arrays."""
    m = supports.shape[0]
    out = np.empty(m)
    if m == 0:
        return out
    cells = supports.shape[1] * ds.ranked_matrix.size
    chunk = max(1, 4_000_000 // max(cells, 1))
    mask = ds.rank_mask[None, None, :, :]
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    for lo in range(0, m, chunk):
        p = supports[lo : lo + chunk]
        chosen = np.where(mask, p[:, :, ds.ranked_matrix], 0.0)
        rates = p.sum(axis=2)[:, :, None, None] - (
            np.cumsum(chosen, axis=3) - chosen
        )
        with np.errstate(divide="ignore"):
            comp = np.log(np.where(mask, chosen / rates, 1.0)).sum(axis=3)
        scores = comp + logw[lo : lo + chunk, :, None]
        top = scores.max(axis=1)
        ll = top + np.log(np.exp(scores - top[:, None, :]).sum(axis=1))
        out[lo : lo + chunk] = -2.0 * ll.sum(axis=1)
    return out


def run_chain(
    ds: RankingDataset,
    n_components: int,
    prior: PriorHyper | None = None,
    config: GibbsConfig | None = None,
    init: MAPResult | PLMixtureParams | None = None,
) -> Chain:
    """Run one Gibbs chain.

    Each sweep updates stage times, labels, supports, and weights in that
    order; draws after burn-in are retained at the thinning interval along
    with the observed-data deviance of the post-sweep parameters.

    Parameters
    ----------
    ds : RankingDataset
    n_components : int
    prior : PriorHyper, optional
        Defaults to `PriorHyper.default` (its small positive rate keeps the
        support conditional proper when a component goes empty).
    config : GibbsConfig, optional
    init : MAPResult or PLMixtureParams, optional
        Starting point; labels start at the per-unit membership argmax.
        Without it, supports and weights start at prior draws and labels
        uniformly at random.

    Returns
    -------
    Chain
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
    if config is None:
        config = GibbsConfig()
    rng = np.random.default_rng(config.seed)

    if init is None:
        proper = prior.rate > 0
        supports = rng.uniform(0.1, 1.0, size=(g, ds.n_items))
        if np.any(proper):
            supports[proper] = rng.gamma(
                prior.shape[proper], 1.0 / prior.rate[proper, None]
            )
        weights = rng.dirichlet(prior.concentration)
        labels = rng.integers(1, g + 1, size=ds.n_units)
    else:
        if isinstance(init, MAPResult):
            supports = init.raw_supports.copy()
            weights = init.params.weights.copy()
            membership = init.membership
        else:
            supports = init.supports.copy()
            weights = init.weights.copy()
            membership = membership_matrix(ds, init)
        if supports.shape != (g, ds.n_items):
            raise ValueError(
                f"init sized {supports.shape}, need ({g}, {ds.n_items})"
            )
        labels = np.argmax(membership, axis=1) + 1

    m = config.n_retained
    out_supports = np.empty((m, g, ds.n_items))
    out_weights = np.empty((m, g))
    out_labels = np.empty((m, ds.n_units), dtype=np.int16)
    kept = 0
    for sweep in range(config.n_iter):
        times = sample_stage_times(ds, labels, supports, rng)
        acc = _accumulate_available(ds, times)
        labels = _labels_from_acc(ds, acc, supports, weights, rng)
        supports = _supports_from_acc(ds, acc, labels - 1, prior, rng)
        weights = sample_weights(labels, prior, rng)
        if sweep >= config.burn_in and (sweep - config.burn_in) % config.thin == 0:
            out_supports[kept] = supports
            out_weights[kept] = weights
            out_labels[kept] = labels
            kept += 1
    out_dev = _deviance_batch(ds, out_supports, out_weights)
    return Chain(
        supports=out_supports,
        weights=out_weights,
        labels=out_labels,
        deviance=out_dev,
        config=config,
        prior=prior,
    )


def _meta_dict(chain: Chain) -> dict:
    return {
        "n_iter": chain.config.n_iter,
        "burn_in": chain.config.burn_in,
        "thin": chain.config.thin,
        "seed": chain.config.seed,
        "n_components": chain.n_components,
        "n_items": chain.n_items,
        "n_units": chain.n_units,
        "n_draws": chain.n_draws,
    }


def _prior_dict(prior: PriorHyper) -> dict:
    return {
        "shape": prior.shape.tolist(),
        "rate": prior.rate.tolist(),
        "concentration": prior.concentration.tolist(),
    }


def _format_row(values) -> str:
    return ",".join(f"{v:.17g}" for v in values)


def trace_text(chain: Chain, permutations: np.ndarray | None = None) -> str:
    """Render the parameter/deviance trace as versioned CSV text.

    One row per retained draw: sweep number, deviance, weights, then the
    support block in component-major order.  ``permutations`` (0-based,
    shape ``(n_draws, n_components)``) appends a 1-based permutation block.
    """
    g, k = chain.n_components, chain.n_items
    cols = ["sweep", "deviance"]
    cols += [f"weight_{a + 1}" for a in range(g)]
    cols += [f"support_{a + 1}_{b + 1}" for a in range(g) for b in range(k)]
    if permutations is not None:
        cols += [f"perm_{a + 1}" for a in range(g)]
    lines = [
        _TRACE_MAGIC,
        "# meta " + json.dumps(_meta_dict(chain), sort_keys=True),
        "# prior " + json.dumps(_prior_dict(chain.prior), sort_keys=True),
        ",".join(cols),
    ]
    sweeps = chain.config.retained_sweeps
    flat = chain.supports.reshape(chain.n_draws, g * k)
    for i in range(chain.n_draws):
        row = (
            f"{sweeps[i]},{chain.deviance[i]:.17g},"
            + _format_row(chain.weights[i])
            + ","
            + _format_row(flat[i])
        )
        if permutations is not None:
            row += "," + ",".join(str(v + 1) for v in permutations[i])
        lines.append(row)
    return "\n".join(lines) + "\n"


def labels_text(chain: Chain) -> str:
    """Render the label draws as versioned CSV text (1-based labels)."""
    lines = [
        _LABELS_MAGIC,
        "# meta " + json.dumps(_meta_dict(chain), sort_keys=True),
        "sweep," + ",".join(f"unit_{s + 1}" for s in range(chain.n_units)),
    ]
    sweeps = chain.config.retained_sweeps
    for i in range(chain.n_draws):
        lines.append(
            f"{sweeps[i]}," + ",".join(str(v) for v in chain.labels[i])
        )
    return "\n".join(lines) + "\n"


def save_chain(chain: Chain, trace_path, labels_path) -> None:
    """Write a chain to a trace CSV and a label-draw sidecar CSV."""
    with open(trace_path, "w", encoding="utf-8") as fh:
        fh.write(trace_text(chain))
    with open(labels_path, "w", encoding="utf-8") as fh:
        fh.write(labels_text(chain))


def _parse_csv(text: str, magic: str):
    lines = text.splitlines()
    if not lines or lines[0].strip() != magic:
        raise ValueError(f"not a {magic[2:]} file")
    meta = prior = None
    body = []
    for ln in lines[1:]:
        if ln.startswith("# meta "):
            meta = json.loads(ln[len("# meta "):])
        elif ln.startswith("# prior "):
            prior = json.loads(ln[len("# prior "):])
        elif ln.startswith("#") or not ln.strip():
            continue
        else:
            body.append(ln)
    if meta is None:
        raise ValueError("missing meta header line")
    header = body[0].split(",")
    data = np.loadtxt(io.StringIO("\n".join(body[1:])), delimiter=",", ndmin=2)
    return meta, prior, header, data


def load_chain(trace_path, labels_path) -> Chain:
    """Load a chain saved by `save_chain` (draws reproduced exactly)."""
    with open(trace_path, encoding="utf-8") as fh:
        meta, prior_doc, header, data = _parse_csv(fh.read(), _TRACE_MAGIC)
    if prior_doc is None:
        raise ValueError("missing prior header line")
    g, k, m = meta["n_components"], meta["n_items"], meta["n_draws"]
    if data.shape != (m, len(header)):
        raise ValueError("trace rows do not match declared draw count")
    dev = data[:, 1]
    weights = data[:, 2 : 2 + g]
    supports = data[:, 2 + g : 2 + g + g * k].reshape(m, g, k)
    with open(labels_path, encoding="utf-8") as fh:
        lmeta, _, _, ldata = _parse_csv(fh.read(), _LABELS_MAGIC)
    if lmeta["n_draws"] != m or ldata.shape[0] != m:
        raise ValueError("labels file does not match trace draw count")
    labels = ldata[:, 1:].astype(np.int16)
    config = GibbsConfig(
        n_iter=meta["n_iter"],
        burn_in=meta["burn_in"],
        thin=meta["thin"],
        seed=meta["seed"],
    )
    prior = PriorHyper(
        shape=np.asarray(prior_doc["shape"], dtype=float),
        rate=np.asarray(prior_doc["rate"], dtype=float),
        concentration=np.asarray(prior_doc["concentration"], dtype=float),
    )
    return Chain(
        supports=supports,
        weights=weights,
        labels=labels,
        deviance=dev,
        config=config,
        prior=prior,
    )
