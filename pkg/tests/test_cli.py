"""Command line interface: outputs, manifests, exit codes, determinism."""

import json
import subprocess

import numpy as np
import pytest
from click.testing import CliRunner

from plmixture import (
    CRITERIA,
    PLMixtureParams,
    apply_censoring,
    sample_mixture_dataset,
    serialize_dataset,
)
from plmixture.cli import SEED_ENV_VAR, main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def data_file(tmp_path_factory):
    """Mixed-length dataset file over 4 items (two length strata)."""
    params = PLMixtureParams(
        supports=[[0.45, 0.30, 0.15, 0.10], [0.10, 0.15, 0.30, 0.45]],
        weights=[0.5, 0.5],
    )
    rng = np.random.default_rng(99)
    full, _ = sample_mixture_dataset(params, 36, 3, rng)
    ds = apply_censoring(full, {2: 0.4, 3: 0.6}, rng)
    path = tmp_path_factory.mktemp("data") / "rankings.csv"
    path.write_text(serialize_dataset(ds), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def flat_file(tmp_path_factory):
    """Single-stratum dataset file: every unit ranks exactly 2 of 4 items."""
    params = PLMixtureParams(
        supports=[[0.4, 0.3, 0.2, 0.1]], weights=[1.0]
    )
    rng = np.random.default_rng(17)
    ds, _ = sample_mixture_dataset(params, 30, 2, rng)
    path = tmp_path_factory.mktemp("data") / "flat.csv"
    path.write_text(serialize_dataset(ds), encoding="utf-8")
    return path


FIT_ARGS = ["--iters", "120", "--burnin", "40", "--starts", "2", "--seed", "1"]


def run_fit(runner, data_file, out, extra=()):
    return runner.invoke(
        main,
        ["fit", str(data_file), "-G", "2", *FIT_ARGS, *extra, "--out", str(out)],
    )


class TestFit:
    def test_writes_artifacts(self, runner, data_file, tmp_path):
        out = tmp_path / "run"
        result = run_fit(runner, data_file, out)
        assert result.exit_code == 0, result.output
        for name in (
            "map.json",
            "chain_trace.csv",
            "chain_labels.csv",
            "summary.json",
            "manifest.json",
        ):
            assert (out / name).exists(), name
        assert "dataset: 36 units, 4 items" in result.output
        assert "MAP (G=2)" in result.output
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_components"] == 2
        assert summary["posterior"]["n_draws"] == 80

    def test_map_only_skips_chain(self, runner, data_file, tmp_path):
        out = tmp_path / "maponly"
        result = run_fit(runner, data_file, out, extra=["--map-only"])
        assert result.exit_code == 0, result.output
        assert (out / "map.json").exists()
        assert not (out / "chain_trace.csv").exists()
        assert "posterior" not in json.loads((out / "summary.json").read_text())

    def test_byte_identical_reruns(self, runner, data_file, tmp_path):
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            assert run_fit(runner, data_file, out).exit_code == 0
        for name in (
            "map.json",
            "chain_trace.csv",
            "chain_labels.csv",
            "summary.json",
            "manifest.json",
        ):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_env_seed_matches_flag(self, runner, data_file, tmp_path):
        by_flag = tmp_path / "flag"
        by_env = tmp_path / "env"
        args = ["fit", str(data_file), "--iters", "60", "--burnin", "20",
                "--starts", "1", "--map-only"]
        assert (
            runner.invoke(
                main, args + ["--seed", "123", "--out", str(by_flag)]
            ).exit_code
            == 0
        )
        assert (
            runner.invoke(
                main,
                args + ["--out", str(by_env)],
                env={SEED_ENV_VAR: "123"},
            ).exit_code
            == 0
        )
        assert (by_flag / "map.json").read_bytes() == (
            by_env / "map.json"
        ).read_bytes()
        manifest = json.loads((by_env / "manifest.json").read_text())
        assert manifest["seed"] == 123

    def test_headerless_file_needs_items(self, runner, tmp_path):
        raw = tmp_path / "raw.csv"
        raw.write_text("1,2\n2,1\n1,3\n3,1\n", encoding="utf-8")
        out = tmp_path / "noheader"
        result = runner.invoke(
            main,
            ["fit", str(raw), "--items", "3", "--map-only", "--starts", "1",
             "--seed", "0", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert json.loads((out / "summary.json").read_text())["n_items"] == 3

    def test_flat_prior(self, runner, flat_file, tmp_path):
        out = tmp_path / "flatprior"
        result = runner.invoke(
            main,
            ["fit", str(flat_file), "--prior", "flat", "--map-only",
             "--starts", "1", "--seed", "0", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["prior"]["rate"] == 0.0


class TestManifest:
    def test_schema(self, runner, data_file, tmp_path):
        out = tmp_path / "m"
        assert run_fit(runner, data_file, out).exit_code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest) == {"command", "config", "inputs", "seed", "version"}
        assert manifest["command"] == "fit"
        assert manifest["seed"] == 1
        assert list(manifest["inputs"]) == [str(data_file)]
        digest = manifest["inputs"][str(data_file)]
        assert len(digest) == 64
        assert set(digest) <= set("0123456789abcdef")
        assert manifest["config"]["components"] == 2
        assert manifest["config"]["iters"] == 120


@pytest.fixture(scope="module")
def select_dir(runner, data_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("select") / "run"
    result = runner.invoke(
        main,
        ["select", str(data_file), "--gmin", "1", "--gmax", "2",
         "--iters", "120", "--burnin", "40", "--starts", "2",
         "--seed", "3", "--jobs", "1", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    return out, result


@pytest.fixture(scope="module")
def fit_dir(runner, data_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("gof") / "fit"
    assert run_fit(runner, data_file, out).exit_code == 0
    return out


class TestSelect:
    def test_criteria_csv_header(self, select_dir):
        out, _ = select_dir
        lines = (out / "criteria.csv").read_text().splitlines()
        assert lines[0] == "G,DIC1,DIC2,BPIC1,BPIC2,BICM1,BICM2,BIC"
        assert len(lines) == 3
        assert lines[1].startswith("1,")
        assert lines[2].startswith("2,")

    def test_winners_and_artifacts(self, select_dir):
        out, result = select_dir
        doc = json.loads((out / "criteria.json").read_text())
        assert set(doc["winners"]) == set(CRITERIA)
        assert all(g in (1, 2) for g in doc["winners"].values())
        assert len(doc["criteria"]) == 2
        for sub in ("G1", "G2"):
            for name in ("map.json", "mle.json", "chain_trace.csv",
                         "chain_labels.csv", "summary.json"):
                assert (out / sub / name).exists(), f"{sub}/{name}"
        assert "winners:" in result.output

    def test_grid_order_validated(self, runner, data_file, tmp_path):
        result = runner.invoke(
            main,
            ["select", str(data_file), "--gmin", "3", "--gmax", "2",
             "--out", str(tmp_path / "bad")],
        )
        assert result.exit_code == 2
        assert "--gmax 2 is smaller than --gmin 3" in result.output


class TestGof:
    def test_conditional_kinds_with_strata(self, runner, data_file, fit_dir, tmp_path):
        out = tmp_path / "g"
        result = runner.invoke(
            main,
            ["gof", str(data_file), "--fit-dir", str(fit_dir),
             "--nrep", "20", "--seed", "4", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        doc = json.loads((out / "gof.json").read_text())
        assert set(doc["p_values"]) == {
            "top1", "pairs", "top1_cond", "pairs_cond"
        }
        lines = (out / "discrepancies.csv").read_text().splitlines()
        assert lines[0] == "kind,draw,observed,replicated"
        assert len(lines) == 1 + 4 * 20

    def test_single_stratum_drops_conditional(self, runner, flat_file, tmp_path):
        fit_out = tmp_path / "fitflat"
        result = runner.invoke(
            main,
            ["fit", str(flat_file), "--iters", "80", "--burnin", "20",
             "--starts", "1", "--seed", "2", "--out", str(fit_out)],
        )
        assert result.exit_code == 0, result.output
        out = tmp_path / "gofflat"
        result = runner.invoke(
            main,
            ["gof", str(flat_file), "--fit-dir", str(fit_out),
             "--nrep", "10", "--seed", "4", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        doc = json.loads((out / "gof.json").read_text())
        assert set(doc["p_values"]) == {"top1", "pairs"}

    def test_explicit_kinds(self, runner, data_file, fit_dir, tmp_path):
        out = tmp_path / "k"
        result = runner.invoke(
            main,
            ["gof", str(data_file), "--fit-dir", str(fit_dir),
             "--kinds", "pairs", "--nrep", "5", "--seed", "0",
             "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert set(json.loads((out / "gof.json").read_text())["p_values"]) == {
            "pairs"
        }

    def test_unknown_kind(self, runner, data_file, fit_dir, tmp_path):
        result = runner.invoke(
            main,
            ["gof", str(data_file), "--fit-dir", str(fit_dir),
             "--kinds", "kendall", "--out", str(tmp_path / "x")],
        )
        assert result.exit_code == 2
        assert "kendall" in result.output

    def test_oversized_nrep(self, runner, data_file, fit_dir, tmp_path):
        result = runner.invoke(
            main,
            ["gof", str(data_file), "--fit-dir", str(fit_dir),
             "--nrep", "999999", "--out", str(tmp_path / "x")],
        )
        assert result.exit_code == 2
        assert "n_rep" in result.output

    def test_missing_chain_files(self, runner, data_file, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        result = runner.invoke(
            main,
            ["gof", str(data_file), "--fit-dir", str(empty),
             "--out", str(tmp_path / "x")],
        )
        assert result.exit_code == 2
        assert "chain_trace.csv" in result.output


class TestErrors:
    def test_missing_dataset(self, runner, tmp_path):
        result = runner.invoke(
            main, ["fit", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]
        )
        assert result.exit_code == 2
        assert "nope.csv" in result.output

    def test_malformed_dataset(self, runner, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,,2\n", encoding="utf-8")
        result = runner.invoke(
            main,
            ["fit", str(bad), "--items", "3", "--map-only",
             "--out", str(tmp_path / "o")],
        )
        assert result.exit_code == 2
        assert "line 1" in result.output

    def test_zero_nrep_rejected(self, runner, data_file, tmp_path):
        result = runner.invoke(
            main,
            ["gof", str(data_file), "--fit-dir", str(tmp_path),
             "--nrep", "0", "--out", str(tmp_path / "o")],
        )
        assert result.exit_code == 2

    @pytest.mark.parametrize("value", ["1,2", "a,b,c", "0.5,0.001,1"])
    def test_bad_prior(self, runner, data_file, tmp_path, value):
        result = runner.invoke(
            main,
            ["fit", str(data_file), "--prior", value, "--map-only",
             "--starts", "1", "--out", str(tmp_path / "o")],
        )
        assert result.exit_code == 2, result.output

    def test_out_required(self, runner, data_file):
        result = runner.invoke(main, ["fit", str(data_file)])
        assert result.exit_code == 2
        assert "--out" in result.output


class TestSimulate:
    def test_micro_study(self, runner, tmp_path):
        out = tmp_path / "study"
        result = runner.invoke(
            main,
            ["simulate", "--g-star", "1", "--censoring", "A",
             "--replicates", "1", "--grid", "1", "--units", "40",
             "--iters", "40", "--burnin", "10", "--starts", "1",
             "--seed", "6", "--jobs", "1", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        agreement = (out / "agreement.csv").read_text().splitlines()
        assert agreement[0] == (
            "scenario,true_G,censoring,completed," + ",".join(CRITERIA)
        )
        assert agreement[1].startswith("G1-A,1,A,1,")
        selections = (out / "selections.csv").read_text().splitlines()
        assert selections[0] == "scenario,replicate,criterion,chosen_G"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["full_scale"] is False
        assert manifest["config"]["grid"] == [1]

    def test_config_file_with_flag_override(self, runner, tmp_path):
        cfg = tmp_path / "study.json"
        cfg.write_text(
            json.dumps(
                {"g_star": 1, "censoring": "A", "replicates": 1,
                 "grid": [1], "units": 40, "iters": 500, "burnin": 10,
                 "starts": 1, "seed": 6}
            ),
            encoding="utf-8",
        )
        out = tmp_path / "study"
        result = runner.invoke(
            main,
            ["simulate", "--config", str(cfg), "--iters", "40",
             "--jobs", "1", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        manifest = json.loads((out / "manifest.json").read_text())
        # explicit flag beats the config value
        assert manifest["config"]["iters"] == 40
        assert manifest["config"]["units"] == 40
        assert manifest["seed"] == 6

    def test_unknown_config_key(self, runner, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"gstar": 2}), encoding="utf-8")
        result = runner.invoke(
            main,
            ["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")],
        )
        assert result.exit_code == 2
        assert "gstar" in result.output


class TestReport:
    def test_from_select_run(self, runner, data_file, tmp_path):
        sel = tmp_path / "sel"
        result = runner.invoke(
            main,
            ["select", str(data_file), "--gmin", "1", "--gmax", "2",
             "--iters", "80", "--burnin", "30", "--starts", "1",
             "--seed", "8", "--jobs", "1", "--out", str(sel)],
        )
        assert result.exit_code == 0, result.output
        out = tmp_path / "rep"
        result = runner.invoke(
            main,
            ["report", str(sel), "--input", str(data_file), "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        curves = (out / "criteria_curves.csv").read_text().splitlines()
        assert curves[0] == "G,criterion,value"
        assert len(curves) == 1 + 2 * len(CRITERIA)
        quantiles = (out / "support_quantiles.csv").read_text().splitlines()
        assert quantiles[0] == "source,component,item,q2.5,q25,q50,q75,q97.5"
        # G1 contributes 4 rows, G2 contributes 8
        assert len(quantiles) == 1 + 4 + 8
        assert (out / "data_summary.json").exists()
        assert (out / "manifest.json").exists()

    def test_from_fit_run(self, runner, data_file, tmp_path):
        fit_out = tmp_path / "fit"
        assert run_fit(runner, data_file, fit_out).exit_code == 0
        out = tmp_path / "rep"
        result = runner.invoke(main, ["report", str(fit_out), "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = (out / "support_quantiles.csv").read_text().splitlines()
        assert all(line.startswith("fit,") for line in lines[1:])

    def test_empty_run_dir(self, runner, tmp_path):
        empty = tmp_path / "nothing"
        empty.mkdir()
        result = runner.invoke(
            main, ["report", str(empty), "--out", str(tmp_path / "o")]
        )
        assert result.exit_code == 2
        assert "nothing to report" in result.output


class TestEntryPoint:
    def test_installed_script(self):
        proc = subprocess.run(
            ["plmixture", "--version"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert "plmixture" in proc.stdout
