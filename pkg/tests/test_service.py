import json

import pytest
from fastapi.testclient import TestClient

from fairshard import harness, sisa
from fairshard.service.app import create_app

from helpers import FAST_HP, biased_dataset


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture()
def data_csv(tmp_path):
    ds = biased_dataset(seed=0, n=300)
    return str(harness.export_dataset_csv(ds, tmp_path / "data.csv"))


@pytest.fixture()
def predictions_csv(tmp_path):
    ds = biased_dataset(seed=1, n=240)
    assignment = sisa.partition_uniform(ds, 3, 1, seed=0)
    ensemble = sisa.train_ensemble(ds, assignment, FAST_HP)
    preds = sisa.predict_matrix(ensemble, ds)
    path = harness.export_predictions_csv(tmp_path / "preds.csv", preds, ds.attributes(), ds.labels())
    return str(path)


HP = {"learning_rate": 0.5, "epochs_per_slice": 40, "l2_penalty": 1e-3}


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"


class TestGenerate:
    def test_preset(self, client, tmp_path):
        out = tmp_path / "gen.csv"
        response = client.post(
            "/data/generate", json={"out_csv": str(out), "preset": "biased-v1", "seed": 1}
        )
        assert response.status_code == 200
        body = response.json()
        assert body["n_samples"] == 10_000 and out.exists()

    def test_custom_config(self, client, tmp_path):
        response = client.post(
            "/data/generate",
            json={
                "out_csv": str(tmp_path / "gen.csv"),
                "config": {"n_samples": 50, "feature_dim": 2, "seed": 3},
            },
        )
        assert response.status_code == 200
        assert response.json()["feature_dim"] == 2

    def test_unknown_preset(self, client, tmp_path):
        response = client.post(
            "/data/generate", json={"out_csv": str(tmp_path / "x.csv"), "preset": "nope"}
        )
        assert response.status_code == 400
        assert "error" in response.json()

    def test_preset_and_config_conflict(self, client, tmp_path):
        response = client.post(
            "/data/generate",
            json={"out_csv": str(tmp_path / "x.csv"), "preset": "biased-v1", "config": {}},
        )
        assert response.status_code == 400


class TestTrainUnlearn:
    def test_train_then_unlearn_round_trip(self, client, data_csv, tmp_path):
        model_dir = tmp_path / "model"
        response = client.post(
            "/train",
            json={
                "data_csv": data_csv,
                "out_dir": str(model_dir),
                "shards": 3,
                "slices": 2,
                "seed": 5,
                "hyperparams": HP,
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert body["checkpoints"] == 6
        assert sum(body["shard_sizes"]) == 300
        assert (model_dir / "assignment.json").exists()
        assert (model_dir / "shard2_slice1").exists()

        retain_csv = tmp_path / "retain.csv"
        response = client.post(
            "/unlearn",
            json={
                "model_dir": str(model_dir),
                "data_csv": data_csv,
                "sample_ids": [0, 7],
                "out_dir": str(tmp_path / "model_v2"),
                "retain_csv": str(retain_csv),
                "hyperparams": HP,
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert body["removed"] == 2
        assert body["retrained_samples"] < body["full_retrain_samples"] == 298
        assert retain_csv.exists()
        # the updated ensemble matches a scratch retrain on the retain set
        updated = sisa.load_ensemble(tmp_path / "model_v2")
        retained = harness.ingest_dataset_csv(data_csv).remove([0, 7])
        scratch = sisa.train_ensemble(retained, updated.assignment, FAST_HP)
        assert all(a == b for a, b in zip(updated.models, scratch.models))

    def test_unlearn_unknown_id(self, client, data_csv, tmp_path):
        model_dir = tmp_path / "model"
        client.post(
            "/train",
            json={"data_csv": data_csv, "out_dir": str(model_dir), "shards": 2, "hyperparams": HP},
        )
        response = client.post(
            "/unlearn",
            json={
                "model_dir": str(model_dir),
                "data_csv": data_csv,
                "sample_ids": [10_000],
                "hyperparams": HP,
            },
        )
        assert response.status_code == 400
        assert response.json()["error"]["type"] == "UnknownSampleError"

    def test_train_validation_error(self, client, tmp_path):
        response = client.post(
            "/train", json={"data_csv": str(tmp_path / "missing.csv"), "out_dir": str(tmp_path / "m")}
        )
        assert response.status_code == 400


class TestPostprocessEvaluate:
    def test_fit_and_files(self, client, predictions_csv, tmp_path):
        response = client.post(
            "/postprocess",
            json={
                "predictions_csv": predictions_csv,
                "shards": 3,
                "out_dir": str(tmp_path / "tables"),
            },
        )
        assert response.status_code == 200
        body = response.json()
        names = {r["strategy"] for r in body["results"]}
        assert names == {"agg_then_pp", "pp_then_agg", "ensemble_pp"}
        by_name = {r["strategy"]: r for r in body["results"]}
        assert len(by_name["pp_then_agg"]["tables"]) == 3
        assert len(by_name["ensemble_pp"]["tables"]) == 1
        assert by_name["ensemble_pp"]["in_sample"]["eo_gap"] <= 1e-9
        assert by_name["ensemble_pp"]["objective"] <= by_name["agg_then_pp"]["objective"] + 1e-9
        for report in body["results"]:
            for path in report["files"]:
                assert json.loads(open(path).read())["S"] in (1, 3)

    def test_evaluate_raw_and_table(self, client, predictions_csv, tmp_path):
        fit = client.post(
            "/postprocess",
            json={
                "predictions_csv": predictions_csv,
                "shards": 3,
                "strategies": ["ensemble_pp"],
                "out_dir": str(tmp_path / "tables"),
            },
        ).json()
        table_path = next(p for p in fit["results"][0]["files"] if p.endswith("ensemble_table.json"))
        response = client.post(
            "/evaluate",
            json={"predictions_csv": predictions_csv, "shards": 3, "table_json": table_path},
        )
        assert response.status_code == 200
        body = response.json()
        assert 0.0 <= body["raw"]["accuracy"] <= 1.0
        assert body["derived"]["eo_gap"] <= 1e-9  # evaluated on its own fitting data

    def test_wrong_shard_count(self, client, predictions_csv):
        response = client.post("/evaluate", json={"predictions_csv": predictions_csv, "shards": 4})
        assert response.status_code == 400
        assert response.json()["error"]["type"] == "DataFormatError"


class TestSweepAndEmit:
    def test_sweep_writes_report(self, client, data_csv, tmp_path):
        out_dir = tmp_path / "results"
        response = client.post(
            "/experiments/sweep",
            json={
                "data_csv": data_csv,
                "out_dir": str(out_dir),
                "config": {"shard_counts": [1, 3], "seeds": [0], "strategies": ["ensemble_pp"]},
                "hyperparams": HP,
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert body["rows"] == 4
        assert (out_dir / "results.csv").exists() and (out_dir / "results.json").exists()
        assert any(m["strategy"] == "ensemble_pp" for m in body["means"])

    def test_sweep_benchmark_and_emit(self, client, data_csv, tmp_path):
        out_dir = tmp_path / "results"
        response = client.post(
            "/experiments/sweep",
            json={
                "data_csv": data_csv,
                "out_dir": str(out_dir),
                "config": {"shard_counts": [3], "seeds": [0], "strategies": []},
                "formats": ["json"],
                "deletion_fraction": 0.01,
                "hyperparams": HP,
            },
        )
        assert response.status_code == 200
        emitted = client.post(
            "/reports/emit",
            json={
                "report_json": str(out_dir / "results.json"),
                "out_dir": str(tmp_path / "converted"),
                "formats": ["csv"],
            },
        )
        assert emitted.status_code == 200
        assert (tmp_path / "converted" / "results.csv").exists()


def test_oracle_debug_route(client, tmp_path):
    ds = biased_dataset(seed=2, n=200)
    assignment = sisa.partition_uniform(ds, 2, 1, seed=0)
    ensemble = sisa.train_ensemble(ds, assignment, FAST_HP)
    preds = sisa.predict_matrix(ensemble, ds)
    path = harness.export_predictions_csv(tmp_path / "p.csv", preds, ds.attributes(), ds.labels())
    response = TestClient(create_app()).post(
        "/debug/oracle", json={"predictions_csv": str(path), "shards": 2}
    )
    assert response.status_code == 200
    assert response.json()["difference"] <= 1e-9
