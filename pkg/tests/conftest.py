"""Shared fixtures: tiny datasets, separated mixtures, and a reusable chain."""

import numpy as np
import pytest
from hypothesis import settings

from plmixture import (
    GibbsConfig,
    PLMixtureParams,
    fit_map,
    parse_dataset,
    run_chain,
    sample_mixture_dataset,
)

settings.register_profile("suite", deadline=None, max_examples=25)
settings.load_profile("suite")


@pytest.fixture
def toy3():
    return parse_dataset("# K=3\n1,2\n1,3\n2,1\n")


@pytest.fixture
def mixed4():
    # lengths 1, 2, and 3 over 4 items -> three strata
    return parse_dataset("# K=4\n1,2,3\n2,4\n3\n4,1\n2\n1,3,4\n")


@pytest.fixture(scope="session")
def sep_params():
    supports = np.array(
        [
            [0.60, 0.20, 0.10, 0.05, 0.05],
            [0.05, 0.05, 0.10, 0.20, 0.60],
        ]
    )
    return PLMixtureParams(supports, np.array([0.6, 0.4]))


@pytest.fixture(scope="session")
def sep_dataset(sep_params):
    rng = np.random.default_rng(20240817)
    ds, labels = sample_mixture_dataset(sep_params, 400, 4, rng)
    return ds, labels


@pytest.fixture(scope="session")
def quick_fit(sep_dataset):
    """One small MAP fit plus chain on the separated dataset, shared by the
    relabeling, criteria, and goodness-of-fit tests."""
    ds, _ = sep_dataset
    map_result = fit_map(ds, 2, n_starts=3, seed=5)
    chain = run_chain(
        ds,
        2,
        config=GibbsConfig(n_iter=600, burn_in=200, thin=1, seed=9),
        init=map_result,
    )
    return ds, map_result, chain


def assert_monotone(trace, tol=1e-9):
    trace = np.asarray(trace, dtype=float)
    drops = np.diff(trace) + tol * np.maximum(1.0, np.abs(trace[:-1]))
    assert np.all(drops >= 0.0), f"log posterior fell by {-drops.min():.3g}"
