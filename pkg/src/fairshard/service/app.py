"""FastAPI application wrapping the core package.

The service is stateless between requests: models, datasets and reports live
on disk at the paths named in each request, so concurrent clients can work on
disjoint directories and identical requests produce identical artifacts.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__, fairness, harness, oracle, postprocess, sisa
from ..errors import DataFormatError, FairshardError
from ..postprocess import DerivedPredictorTable, LossMatrix
from . import schemas


def _loss_from(values: tuple[tuple[float, float], tuple[float, float]] | None) -> LossMatrix:
    return LossMatrix(values) if values is not None else LossMatrix.zero_one()


def _generator_config(request: schemas.GenerateDataRequest) -> harness.GeneratorConfig:
    if (request.preset is None) == (request.config is None):
        raise DataFormatError("provide exactly one of 'preset' or 'config'")
    if request.preset is not None:
        try:
            config = harness.PRESETS[request.preset]
        except KeyError:
            raise DataFormatError(
                f"unknown preset {request.preset!r}; available: {sorted(harness.PRESETS)}"
            ) from None
    else:
        config = request.config.to_domain()
    if request.seed is not None:
        config = harness.replace_seed(config, request.seed)
    return config


def create_app() -> FastAPI:
    app = FastAPI(title="fairshard", version=__version__)

    @app.exception_handler(FairshardError)
    async def _domain_error(_, exc: FairshardError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"error": {"type": type(exc).__name__, "message": str(exc)}},
        )

    @app.exception_handler(OSError)
    async def _io_error(_, exc: OSError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"error": {"type": "io-error", "message": str(exc)}},
        )

    @app.exception_handler(ValueError)
    async def _value_error(_, exc: ValueError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"error": {"type": "value-error", "message": str(exc)}},
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/data/generate", response_model=schemas.GenerateDataResponse)
    def generate_data(request: schemas.GenerateDataRequest) -> schemas.GenerateDataResponse:
        config = _generator_config(request)
        dataset = harness.gen_synthetic(config)
        out = Path(request.out_csv)
        out.parent.mkdir(parents=True, exist_ok=True)
        harness.export_dataset_csv(dataset, out)
        labels = dataset.labels()
        attrs = dataset.attributes()
        return schemas.GenerateDataResponse(
            path=str(out),
            n_samples=len(dataset),
            feature_dim=dataset.dim,
            positive_fraction=float(labels.mean()),
            group1_fraction=float(attrs.mean()),
        )

    @app.post("/train", response_model=schemas.TrainResponse)
    def train(request: schemas.TrainRequest) -> schemas.TrainResponse:
        dataset = harness.ingest_dataset_csv(request.data_csv)
        if request.partition == "uniform":
            assignment = sisa.partition_uniform(dataset, request.shards, request.slices, request.seed)
        elif request.partition == "one_fair_shard":
            assignment = sisa.partition_one_fair_shard(
                dataset, request.shards, request.slices, request.seed
            )
        else:
            raise DataFormatError(f"unknown partition mode {request.partition!r}")
        ensemble = sisa.train_ensemble(dataset, assignment, request.hyperparams.to_domain())
        sisa.save_ensemble(ensemble, request.out_dir)
        votes = sisa.majority_vote_matrix(sisa.predict_matrix(ensemble, dataset))
        accuracy = float((votes == dataset.labels()).mean())
        return schemas.TrainResponse(
            model_dir=request.out_dir,
            shards=assignment.num_shards,
            slices=assignment.num_slices,
            shard_sizes=assignment.shard_sizes(),
            checkpoints=len(ensemble.store),
            train_accuracy=accuracy,
        )

    @app.post("/unlearn", response_model=schemas.UnlearnResponse)
    def unlearn(request: schemas.UnlearnServiceRequest) -> schemas.UnlearnResponse:
        ensemble = sisa.load_ensemble(request.model_dir)
        full = harness.ingest_dataset_csv(request.data_csv)
        # The CSV carries ids by row order; keep only the rows the ensemble
        # still knows about so repeated unlearn calls stay id-consistent.
        dataset = full.subset(sorted(ensemble.assignment.ids))
        unlearn_request = sisa.UnlearnRequest(frozenset(request.sample_ids))
        cost = sisa.retraining_cost(ensemble.assignment, unlearn_request.sample_ids)
        retained, updated = sisa.unlearn(dataset, ensemble, unlearn_request, request.hyperparams.to_domain())
        out_dir = request.out_dir or request.model_dir
        sisa.save_ensemble(updated, out_dir)
        retain_csv = None
        if request.retain_csv:
            harness.export_dataset_csv(retained, request.retain_csv)
            retain_csv = request.retain_csv
        return schemas.UnlearnResponse(
            model_dir=out_dir,
            removed=len(unlearn_request.sample_ids),
            affected_shards=cost.affected_shards,
            retrained_samples=cost.retrained_samples,
            full_retrain_samples=cost.full_retrain_samples,
            retain_csv=retain_csv,
        )

    @app.post("/postprocess", response_model=schemas.PostprocessResponse)
    def fit_postprocessors(request: schemas.PostprocessRequest) -> schemas.PostprocessResponse:
        preds, attrs, labels = harness.ingest_predictions_csv(request.predictions_csv, request.shards)
        joint = fairness.estimate_joint(preds, attrs, labels)
        loss = _loss_from(request.loss)
        out_dir = Path(request.out_dir) if request.out_dir else None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
        results = []
        for name in request.strategies:
            fitted = postprocess.fit_strategy(name, joint, loss, request.eo_mode)
            files: list[str] = []
            if out_dir is not None:
                for index, table in enumerate(fitted.tables):
                    suffix = f"_k{index}" if len(fitted.tables) > 1 else ""
                    path = out_dir / f"{name}{suffix}_table.json"
                    table.save(path)
                    files.append(str(path))
                ensemble_path = out_dir / f"{name}_ensemble_table.json"
                fitted.ensemble_table.save(ensemble_path)
                files.append(str(ensemble_path))
            results.append(
                schemas.StrategyReportModel(
                    strategy=name,
                    objective=fitted.objective,
                    in_sample=schemas.MetricsModel.from_metrics(fitted.metrics),
                    tables=[schemas.TableModel(**t.to_json_dict()) for t in fitted.tables],
                    ensemble_table=schemas.TableModel(**fitted.ensemble_table.to_json_dict()),
                    files=files,
                )
            )
        return schemas.PostprocessResponse(shards=request.shards, results=results)

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate(request: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
        preds, attrs, labels = harness.ingest_predictions_csv(request.predictions_csv, request.shards)
        loss = _loss_from(request.loss)
        raw = harness.raw_vote_metrics(preds, attrs, labels, loss, request.eo_mode)
        derived = None
        if request.table_json:
            table = DerivedPredictorTable.load(request.table_json)
            joint = fairness.estimate_joint(preds, attrs, labels)
            derived = schemas.MetricsModel.from_metrics(
                fairness.expected_metrics(table, joint, loss, request.eo_mode)
            )
        return schemas.EvaluateResponse(raw=schemas.MetricsModel.from_metrics(raw), derived=derived)

    @app.post("/experiments/sweep", response_model=schemas.SweepResponse)
    def sweep(request: schemas.SweepRequest) -> schemas.SweepResponse:
        dataset = harness.ingest_dataset_csv(request.data_csv)
        config = request.config.to_domain()
        hp = request.hyperparams.to_domain()
        if request.deletion_fraction is None:
            report = harness.run_experiment(dataset, config, hp)
        else:
            report = harness.run_unlearning_benchmark(dataset, config, request.deletion_fraction, hp)
        files = harness.emit_results(report, request.out_dir, request.formats)
        return schemas.SweepResponse(
            files=[str(p) for p in files],
            rows=len(report.rows),
            means=report.to_json_dict()["means"],
        )

    @app.post("/reports/emit", response_model=schemas.EmitResponse)
    def emit(request: schemas.EmitRequest) -> schemas.EmitResponse:
        report = harness.load_report_json(request.report_json)
        files = harness.emit_results(report, request.out_dir, request.formats)
        return schemas.EmitResponse(files=[str(p) for p in files])

    @app.post(
        "/debug/oracle",
        response_model=schemas.OracleCheckResponse,
        include_in_schema=False,
    )
    def oracle_check(request: schemas.OracleCheckRequest) -> schemas.OracleCheckResponse:
        preds, attrs, labels = harness.ingest_predictions_csv(request.predictions_csv, request.shards)
        joint = fairness.estimate_joint(preds, attrs, labels)
        loss = _loss_from(request.loss)
        problem = postprocess.build_ensemble_lp(joint, loss)
        _, lp_objective = postprocess.solve_lp(problem)
        vertex_set = oracle.enumerate_vertices(joint, loss)
        oracle_objective = float(vertex_set.objectives.min())
        return schemas.OracleCheckResponse(
            lp_objective=lp_objective,
            oracle_objective=oracle_objective,
            difference=abs(lp_objective - oracle_objective),
            vertices=int(vertex_set.vertices.shape[0]),
        )

    return app


app = create_app()
