"""Thin HTTP client for the service; all computation happens behind the API.

Without ``--server`` the commands run the service in-process over an ASGI
transport, so file paths behave exactly as with a local server. Every command
prints the JSON response on success; on failure it prints one machine-readable
JSON line to stderr and exits non-zero.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import httpx

DEFAULT_TIMEOUT = 600.0


def _post(ctx_obj: dict, path: str, payload: dict) -> dict:
    server = ctx_obj.get("server")

    async def go() -> httpx.Response:
        if server:
            async with httpx.AsyncClient(base_url=server, timeout=DEFAULT_TIMEOUT) as client:
                return await client.post(path, json=payload)
        from .service.app import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://fairshard.local", timeout=DEFAULT_TIMEOUT
        ) as client:
            return await client.post(path, json=payload)

    try:
        response = asyncio.run(go())
    except httpx.HTTPError as exc:
        _fail({"error": {"type": "connection-error", "message": str(exc)}})
    if response.status_code >= 400:
        try:
            body = response.json()
        except ValueError:
            body = {"detail": response.text}
        _fail({"error": {"status": response.status_code, **_as_error(body)}})
    return response.json()


def _as_error(body: dict) -> dict:
    if isinstance(body, dict) and "error" in body:
        return body["error"] if isinstance(body["error"], dict) else {"message": body["error"]}
    return {"message": body.get("detail", body) if isinstance(body, dict) else body}


def _fail(record: dict) -> None:
    click.echo(json.dumps(record, default=str), err=True)
    sys.exit(1)


def _emit(record: dict) -> None:
    click.echo(json.dumps(record, indent=2, sort_keys=True))


def _out_dir(ctx_obj: dict, override: str | None) -> str:
    value = override or ctx_obj.get("out_dir")
    if not value:
        _fail({"error": {"type": "usage", "message": "an output directory is required (--out)"}})
    return value


def _load_config_model(ctx_obj: dict) -> dict | None:
    path = ctx_obj.get("config_path")
    if not path:
        return None
    from .harness import parse_experiment_config

    config = parse_experiment_config(Path(path).read_text())
    return {
        "shard_counts": list(config.shard_counts),
        "num_slices": config.num_slices,
        "partition": config.partition,
        "strategies": list(config.strategies),
        "split_fractions": list(config.split_fractions),
        "seeds": list(config.seeds),
        "eo_mode": config.eo_mode,
    }


@click.group()
@click.option("--server", envvar="FAIRSHARD_SERVER", default=None, help="Service base URL; omit to run in-process.")
@click.option("--seed", type=int, default=None, help="Base seed for seeded commands.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Flat key=value experiment config file.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory for commands that write files.")
@click.option("--format", "out_format", type=click.Choice(["csv", "json"]), default="csv", show_default=True, help="Report format for sweep/emit.")
@click.pass_context
def main(ctx: click.Context, server: str | None, seed: int | None, config_path: str | None, out_dir: str | None, out_format: str) -> None:
    """Sharded ensemble training with exact unlearning and fairness post-processing."""
    ctx.obj = {
        "server": server,
        "seed": seed,
        "config_path": config_path,
        "out_dir": out_dir,
        "format": out_format,
    }


@main.command("gen-data")
@click.option("--preset", default=None, help="Named generator preset (e.g. biased-v1).")
@click.option("--n", "n_samples", type=int, default=None)
@click.option("--dim", type=int, default=None)
@click.option("--prevalence", type=float, default=None, help="Pr(A=1).")
@click.option("--positive-rate", default=None, help="Pr(Y=1|A=a) as 'p0,p1'.")
@click.option("--label-noise", default=None, help="Per-group flip probabilities as 'q0,q1'.")
@click.option("--class-sep", type=float, default=None)
@click.option("--group-shift", type=float, default=None)
@click.option("--out-file", default=None, help="Dataset CSV path (default <out>/dataset.csv).")
@click.pass_obj
def gen_data(obj: dict, preset: str | None, n_samples: int | None, dim: int | None, prevalence: float | None, positive_rate: str | None, label_noise: str | None, class_sep: float | None, group_shift: float | None, out_file: str | None) -> None:
    """Generate a synthetic dataset CSV."""
    out_csv = out_file or str(Path(_out_dir(obj, None)) / "dataset.csv")
    payload: dict = {"out_csv": out_csv, "seed": obj.get("seed")}
    if preset:
        payload["preset"] = preset
    else:
        config: dict = {}
        if n_samples is not None:
            config["n_samples"] = n_samples
        if dim is not None:
            config["feature_dim"] = dim
        if prevalence is not None:
            config["attr_prevalence"] = prevalence
        if positive_rate is not None:
            config["positive_rate"] = [float(v) for v in positive_rate.split(",")]
        if label_noise is not None:
            config["label_noise"] = [float(v) for v in label_noise.split(",")]
        if class_sep is not None:
            config["class_sep"] = class_sep
        if group_shift is not None:
            config["group_shift"] = group_shift
        payload["config"] = config
    _emit(_post(obj, "/data/generate", payload))


@main.command()
@click.option("--data", "data_csv", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--shards", type=int, default=1, show_default=True)
@click.option("--slices", type=int, default=1, show_default=True)
@click.option("--partition", type=click.Choice(["uniform", "one_fair_shard"]), default="uniform", show_default=True)
@click.option("--learning-rate", type=float, default=0.5, show_default=True)
@click.option("--epochs-per-slice", type=int, default=300, show_default=True)
@click.option("--l2-penalty", type=float, default=1e-3, show_default=True)
@click.option("--model-dir", default=None, help="Where to store the ensemble (default <out>/model).")
@click.pass_obj
def train(obj: dict, data_csv: str, shards: int, slices: int, partition: str, learning_rate: float, epochs_per_slice: int, l2_penalty: float, model_dir: str | None) -> None:
    """Train a sharded ensemble with per-slice checkpoints."""
    out_dir = model_dir or str(Path(_out_dir(obj, None)) / "model")
    payload = {
        "data_csv": data_csv,
        "out_dir": out_dir,
        "shards": shards,
        "slices": slices,
        "partition": partition,
        "seed": obj.get("seed") or 0,
        "hyperparams": {
            "learning_rate": learning_rate,
            "epochs_per_slice": epochs_per_slice,
            "l2_penalty": l2_penalty,
        },
    }
    _emit(_post(obj, "/train", payload))


@main.command()
@click.option("--model-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--data", "data_csv", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ids", required=True, help="Comma-separated sample ids (CSV row order, 0-based).")
@click.option("--new-model-dir", default=None, help="Write the updated ensemble here instead of in place.")
@click.option("--retain-csv", default=None, help="Optionally export the retained dataset.")
@click.option("--learning-rate", type=float, default=0.5, show_default=True)
@click.option("--epochs-per-slice", type=int, default=300, show_default=True)
@click.option("--l2-penalty", type=float, default=1e-3, show_default=True)
@click.pass_obj
def unlearn(obj: dict, model_dir: str, data_csv: str, ids: str, new_model_dir: str | None, retain_csv: str | None, learning_rate: float, epochs_per_slice: int, l2_penalty: float) -> None:
    """Forget samples: retrain only the affected shard tails from checkpoints."""
    payload = {
        "model_dir": model_dir,
        "data_csv": data_csv,
        "sample_ids": [int(v) for v in ids.split(",") if v.strip()],
        "out_dir": new_model_dir,
        "retain_csv": retain_csv,
        "hyperparams": {
            "learning_rate": learning_rate,
            "epochs_per_slice": epochs_per_slice,
            "l2_penalty": l2_penalty,
        },
    }
    _emit(_post(obj, "/unlearn", payload))


@main.command()
@click.option("--predictions", "predictions_csv", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--shards", type=int, required=True)
@click.option("--strategies", default="agg_then_pp,pp_then_agg,ensemble_pp", show_default=True)
@click.option("--eo-mode", type=click.Choice(["mean", "max"]), default="mean", show_default=True)
@click.option("--tables-dir", default=None, help="Directory for fitted table JSON files (default <out>).")
@click.pass_obj
def postprocess(obj: dict, predictions_csv: str, shards: int, strategies: str, eo_mode: str, tables_dir: str | None) -> None:
    """Fit the equalized-odds post-processing strategies on a predictions CSV."""
    payload = {
        "predictions_csv": predictions_csv,
        "shards": shards,
        "strategies": [s.strip() for s in strategies.split(",") if s.strip()],
        "eo_mode": eo_mode,
        "out_dir": tables_dir or obj.get("out_dir"),
    }
    _emit(_post(obj, "/postprocess", payload))


@main.command()
@click.option("--predictions", "predictions_csv", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--shards", type=int, required=True)
@click.option("--table", "table_json", default=None, type=click.Path(exists=True, dir_okay=False), help="Derived-predictor table to evaluate alongside the raw vote.")
@click.option("--eo-mode", type=click.Choice(["mean", "max"]), default="mean", show_default=True)
@click.pass_obj
def evaluate(obj: dict, predictions_csv: str, shards: int, table_json: str | None, eo_mode: str) -> None:
    """Report accuracy / equalized-odds / loss for a predictions CSV."""
    payload = {
        "predictions_csv": predictions_csv,
        "shards": shards,
        "table_json": table_json,
        "eo_mode": eo_mode,
    }
    _emit(_post(obj, "/evaluate", payload))


@main.command()
@click.option("--data", "data_csv", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--deletion-fraction", type=float, default=None, help="Also run the unlearning benchmark at this deletion rate.")
@click.option("--learning-rate", type=float, default=0.5, show_default=True)
@click.option("--epochs-per-slice", type=int, default=300, show_default=True)
@click.option("--l2-penalty", type=float, default=1e-3, show_default=True)
@click.pass_obj
def sweep(obj: dict, data_csv: str, deletion_fraction: float | None, learning_rate: float, epochs_per_slice: int, l2_penalty: float) -> None:
    """Run the full experiment grid (seeds x shard counts) and emit a report."""
    payload = {
        "data_csv": data_csv,
        "out_dir": _out_dir(obj, None),
        "formats": [obj["format"]],
        "deletion_fraction": deletion_fraction,
        "hyperparams": {
            "learning_rate": learning_rate,
            "epochs_per_slice": epochs_per_slice,
            "l2_penalty": l2_penalty,
        },
    }
    config = _load_config_model(obj)
    if config is not None:
        payload["config"] = config
    _emit(_post(obj, "/experiments/sweep", payload))


@main.command()
@click.option("--report", "report_json", required=True, type=click.Path(exists=True, dir_okay=False), help="A previously emitted results.json.")
@click.pass_obj
def emit(obj: dict, report_json: str) -> None:
    """Re-emit a stored JSON report in another format."""
    payload = {
        "report_json": report_json,
        "out_dir": _out_dir(obj, None),
        "formats": [obj["format"]],
    }
    _emit(_post(obj, "/reports/emit", payload))


@main.command("oracle-check", hidden=True)
@click.option("--predictions", "predictions_csv", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--shards", type=int, required=True)
@click.pass_obj
def oracle_check(obj: dict, predictions_csv: str, shards: int) -> None:
    """Debug: compare the simplex optimum against brute-force vertex enumeration."""
    payload = {"predictions_csv": predictions_csv, "shards": shards}
    _emit(_post(obj, "/debug/oracle", payload))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("fairshard.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
