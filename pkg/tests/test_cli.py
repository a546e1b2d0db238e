import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from fairshard.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def invoke(runner, args, **kwargs):
    result = runner.invoke(main, args, catch_exceptions=False, **kwargs)
    return result


def test_gen_train_unlearn_flow(runner, tmp_path):
    out = str(tmp_path)
    result = invoke(
        runner,
        ["--seed", "3", "--out", out, "gen-data", "--n", "240", "--dim", "3",
         "--positive-rate", "0.35,0.65", "--group-shift", "1.0", "--label-noise", "0.02,0.08"],
    )
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    assert body["n_samples"] == 240
    data_csv = body["path"]

    result = invoke(
        runner,
        ["--seed", "1", "--out", out, "train", "--data", data_csv, "--shards", "3",
         "--slices", "2", "--epochs-per-slice", "40"],
    )
    assert result.exit_code == 0, result.output
    train_body = json.loads(result.output)
    assert train_body["checkpoints"] == 6
    model_dir = train_body["model_dir"]

    result = invoke(
        runner,
        ["unlearn", "--model-dir", model_dir, "--data", data_csv, "--ids", "1,5",
         "--new-model-dir", str(tmp_path / "model_v2"), "--epochs-per-slice", "40"],
    )
    assert result.exit_code == 0, result.output
    unlearn_body = json.loads(result.output)
    assert unlearn_body["removed"] == 2
    assert unlearn_body["retrained_samples"] < unlearn_body["full_retrain_samples"]
    assert Path(tmp_path / "model_v2" / "assignment.json").exists()


def test_postprocess_and_evaluate(runner, tmp_path):
    out = str(tmp_path)
    data = json.loads(
        invoke(
            runner,
            ["--seed", "2", "--out", out, "gen-data", "--n", "200", "--dim", "2",
             "--positive-rate", "0.3,0.7", "--group-shift", "0.8"],
        ).output
    )
    # build a predictions file through the library (the CLI consumes it)
    from fairshard import harness, sisa
    from helpers import FAST_HP

    ds = harness.ingest_dataset_csv(data["path"])
    ensemble = sisa.train_ensemble(ds, sisa.partition_uniform(ds, 3, 1, 0), FAST_HP)
    preds_csv = harness.export_predictions_csv(
        tmp_path / "preds.csv", sisa.predict_matrix(ensemble, ds), ds.attributes(), ds.labels()
    )

    result = invoke(
        runner,
        ["--out", out, "postprocess", "--predictions", str(preds_csv), "--shards", "3",
         "--strategies", "ensemble_pp", "--tables-dir", str(tmp_path / "tables")],
    )
    assert result.exit_code == 0, result.output
    fit_body = json.loads(result.output)
    table_file = next(p for p in fit_body["results"][0]["files"] if "ensemble_table" in p)

    result = invoke(
        runner,
        ["evaluate", "--predictions", str(preds_csv), "--shards", "3", "--table", table_file],
    )
    assert result.exit_code == 0, result.output
    eval_body = json.loads(result.output)
    assert eval_body["derived"]["eo_gap"] <= 1e-9
    assert eval_body["raw"]["eo_gap"] >= 0.0


def test_sweep_with_config_file_and_emit(runner, tmp_path):
    out = str(tmp_path)
    data = json.loads(
        invoke(
            runner,
            ["--seed", "4", "--out", out, "gen-data", "--n", "260", "--dim", "2",
             "--positive-rate", "0.35,0.65", "--group-shift", "0.8"],
        ).output
    )
    config_path = tmp_path / "sweep.cfg"
    config_path.write_text(
        "shard_counts = 1,3\nseeds = 0\nstrategies = ensemble_pp\n"
    )
    result = invoke(
        runner,
        ["--config", str(config_path), "--out", out, "--format", "json",
         "sweep", "--data", data["path"], "--epochs-per-slice", "40"],
    )
    assert result.exit_code == 0, result.output
    sweep_body = json.loads(result.output)
    assert sweep_body["rows"] == 4
    report_json = next(f for f in sweep_body["files"] if f.endswith("results.json"))

    result = invoke(
        runner,
        ["--out", str(tmp_path / "converted"), "--format", "csv", "emit", "--report", report_json],
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "converted" / "results.csv").exists()


def test_hidden_oracle_check(runner, tmp_path):
    from fairshard import harness, sisa
    from helpers import FAST_HP, biased_dataset

    ds = biased_dataset(seed=5, n=160, dim=2)
    ensemble = sisa.train_ensemble(ds, sisa.partition_uniform(ds, 2, 1, 0), FAST_HP)
    preds_csv = harness.export_predictions_csv(
        tmp_path / "p.csv", sisa.predict_matrix(ensemble, ds), ds.attributes(), ds.labels()
    )
    result = invoke(runner, ["oracle-check", "--predictions", str(preds_csv), "--shards", "2"])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["difference"] <= 1e-9
    # hidden from help output
    help_result = invoke(runner, ["--help"])
    assert "oracle-check" not in help_result.output


def test_failure_is_machine_readable_and_nonzero(runner, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("f0,a,y\n1.0,0,2\n")
    result = runner.invoke(
        main, ["train", "--data", str(bad), "--model-dir", str(tmp_path / "m")]
    )
    assert result.exit_code == 1
    error_line = result.stderr.strip().splitlines()[-1]
    record = json.loads(error_line)
    assert record["error"]["status"] == 400
    assert record["error"]["type"] == "DataFormatError"


def test_missing_out_dir_is_usage_error(runner, tmp_path):
    result = runner.invoke(main, ["gen-data", "--preset", "biased-v1"])
    assert result.exit_code == 1
    record = json.loads(result.stderr.strip().splitlines()[-1])
    assert record["error"]["type"] == "usage"
