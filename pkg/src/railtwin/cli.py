"""The `dt` command line: batch dataset generation, one-shot inference,
feedback-loop runs, evaluation, and the HTTP service."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import click

from .config import EngineConfig, load_config
from .dataset import GenerationPolicy, write_dataset_jsonl, write_objectives_json, compile_dataset
from .errors import EngineError
from .feedback import LoopConfig, LoopDeps, parse_feedback, run_loop
from .metrics import (
    LatencyRecord,
    PredictionRecord,
    classification_metrics,
    latency_report_rows,
    relevance,
    rouge_l_text,
    write_latency_csv,
)
from .service import EngineService, load_captions_file
from .store import append_record, snapshot_state


def _echo_json(payload) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


def _load_jsonl(path: Path) -> list[dict]:
    rows = []
    with path.open("r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                rows.append(json.loads(line))
    return rows


@click.group()
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="JSON config file (backend, model roles, mock settings).")
@click.option("--data-dir", type=click.Path(path_type=Path), default=None,
              help="Data directory (default: DATA_DIR env or ./data).")
@click.pass_context
def main(ctx: click.Context, config_path: Optional[Path], data_dir: Optional[Path]) -> None:
    """Railway defect inspection engine."""
    try:
        cfg = load_config(config_path)
    except EngineError as exc:
        raise click.ClickException(str(exc))
    if data_dir is not None:
        cfg = cfg.with_data_dir(data_dir)
    ctx.obj = cfg


def _service(cfg: EngineConfig) -> EngineService:
    return EngineService(cfg)


@main.group()
def dataset() -> None:
    """Synthetic dataset workflows."""


@dataset.command("generate")
@click.option("--captions", "captions_file", type=click.Path(path_type=Path), required=True,
              help="JSONL file of caption rows ({id?, text, template_id?, tags?}).")
@click.option("--k", "k_max", type=int, default=5, show_default=True,
              help="Accepted samples per caption.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--similarity-threshold", type=float, default=0.8, show_default=True)
@click.option("--lambda", "lambda_", type=float, default=0.5, show_default=True)
@click.pass_obj
def dataset_generate(cfg: EngineConfig, captions_file: Path, k_max: int, out_dir: Path,
                     similarity_threshold: float, lambda_: float) -> None:
    """Rephrase captions into a deduplicated instruct dataset."""
    from .backends import build_backend

    try:
        captions = load_captions_file(captions_file)
        policy = GenerationPolicy(
            k_max=k_max, similarity_threshold=similarity_threshold, lambda_=lambda_
        )
        backend = build_backend(cfg)
        build = compile_dataset(captions, policy, backend)
        out_dir.mkdir(parents=True, exist_ok=True)
        dataset_path = write_dataset_jsonl(build.entries, out_dir / "dataset.jsonl")
        objectives_path = write_objectives_json(build.objectives, out_dir / "objectives.json")
    except EngineError as exc:
        raise click.ClickException(str(exc))
    _echo_json({
        "entries": len(build.entries),
        "dataset": str(dataset_path),
        "objectives": str(objectives_path),
        "warnings": build.warnings,
        "failures": [{"caption_id": c, "error": e} for c, e in build.failures],
    })


@main.command("infer")
@click.option("--text", default=None)
@click.option("--image", "images", multiple=True, type=str)
@click.option("--video", default=None)
@click.option("--intent", type=click.Choice(["analyze", "generate"]), default="analyze",
              show_default=True)
@click.option("--fps", type=float, default=1.0, show_default=True)
@click.pass_obj
def infer_command(cfg: EngineConfig, text: Optional[str], images: tuple[str, ...],
                  video: Optional[str], intent: str, fps: float) -> None:
    """Route one multimodal request and print the consumable response."""
    try:
        payload = _service(cfg).infer(
            text=text, image_refs=images, video_ref=video, intent=intent, fps=fps
        )
    except EngineError as exc:
        raise click.ClickException(str(exc))
    _echo_json(payload)


@main.group()
def loop() -> None:
    """Instant-user-feedback loop workflows."""


@loop.command("run")
@click.option("--feedback-file", type=click.Path(path_type=Path), required=True,
              help="JSONL feedback events ({text?, score?, timestamp?}).")
@click.option("--ft-interval", type=int, default=25, show_default=True)
@click.option("--threshold", type=float, default=70.0, show_default=True)
@click.option("--ema-alpha", type=float, default=0.3, show_default=True)
@click.option("--max-iterations", type=int, default=None)
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None,
              help="Write the loop report JSON here as well.")
@click.pass_obj
def loop_run(cfg: EngineConfig, feedback_file: Path, ft_interval: int, threshold: float,
             ema_alpha: float, max_iterations: Optional[int], out_file: Optional[Path]) -> None:
    """Replay a feedback stream through the loop and report the trace."""
    from .backends import build_backend

    try:
        rows = _load_jsonl(feedback_file)
        events = [
            parse_feedback(r.get("text"), r.get("score"), timestamp=r.get("timestamp"))
            for r in rows
        ]
        loop_cfg = LoopConfig(
            ft_interval=ft_interval,
            satisfaction_threshold=threshold,
            ema_alpha=ema_alpha,
            max_iterations=max_iterations,
        )
        backend = build_backend(cfg)
        deps = LoopDeps(backend=backend, datasets_dir=cfg.data_dir / "datasets")
        snapshots_dir = cfg.data_dir / "snapshots"
        events_log = cfg.data_dir / "feedback" / "events.jsonl"

        def persist(state, feedback, action):
            append_record(
                events_log,
                {
                    "kind": feedback.kind,
                    "text": feedback.text,
                    "score": feedback.score,
                    "timestamp": feedback.timestamp,
                    "satisfaction_after": state.satisfaction.value,
                    "action": action,
                    "ft_count_after": state.ft_count,
                    "iteration": state.iteration,
                },
            )
            snapshot_state(state, snapshots_dir)

        report = run_loop(
            loop_cfg, events, deps, base_model_id=cfg.models.chat, on_step=persist
        )
    except EngineError as exc:
        raise click.ClickException(str(exc))
    if out_file is not None:
        out_file.parent.mkdir(parents=True, exist_ok=True)
        out_file.write_text(report.to_json() + "\n", encoding="utf-8")
    _echo_json(report.to_dict())


@main.group("eval")
def eval_group() -> None:
    """Evaluation reports from JSONL inputs."""


@eval_group.command("classify")
@click.option("--in", "in_file", type=click.Path(path_type=Path), required=True,
              help="JSONL rows: {true_label, predicted_label, scores?}.")
@click.pass_obj
def eval_classify(cfg: EngineConfig, in_file: Path) -> None:
    try:
        records = [
            PredictionRecord(
                true_label=str(r["true_label"]),
                predicted_label=str(r["predicted_label"]),
                scores={str(k): float(v) for k, v in r["scores"].items()} if r.get("scores") else None,
            )
            for r in _load_jsonl(in_file)
        ]
        report = classification_metrics(records)
    except (EngineError, KeyError) as exc:
        raise click.ClickException(str(exc))
    _echo_json(report.to_dict())


@eval_group.command("rouge")
@click.option("--in", "in_file", type=click.Path(path_type=Path), required=True,
              help="JSONL rows: {candidate|answer, reference}.")
@click.pass_obj
def eval_rouge(cfg: EngineConfig, in_file: Path) -> None:
    try:
        rows = _load_jsonl(in_file)
        results = []
        for row in rows:
            candidate = str(row.get("candidate") or row.get("answer") or "")
            result = rouge_l_text(candidate, str(row.get("reference", "")))
            results.append({
                "precision": result.precision,
                "recall": result.recall,
                "f_measure": result.f_measure,
                "lcs_length": result.lcs_length,
            })
        mean_f = sum(r["f_measure"] for r in results) / len(results) if results else 0.0
    except EngineError as exc:
        raise click.ClickException(str(exc))
    _echo_json({"rows": results, "mean_f_measure": mean_f})


@eval_group.command("relevance")
@click.option("--in", "in_file", type=click.Path(path_type=Path), required=True,
              help="JSONL rows: {question, answer, contexts?}.")
@click.pass_obj
def eval_relevance(cfg: EngineConfig, in_file: Path) -> None:
    from .backends import build_backend

    try:
        backend = build_backend(cfg)
        results = [
            relevance(
                str(row.get("question", "")),
                str(row.get("answer", "")),
                [str(c) for c in row.get("contexts", [])],
                backend,
            )
            for row in _load_jsonl(in_file)
        ]
    except EngineError as exc:
        raise click.ClickException(str(exc))
    _echo_json({"rows": results})


@eval_group.command("latency")
@click.option("--in", "in_file", type=click.Path(path_type=Path), required=True,
              help="JSONL rows: {frames, tokens, latency_ms, task?}.")
@click.option("--csv", "csv_out", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def eval_latency(cfg: EngineConfig, in_file: Path, csv_out: Optional[Path]) -> None:
    try:
        records = [
            LatencyRecord(
                frames=int(r.get("frames", 0)),
                tokens=int(r.get("tokens", 0)),
                latency_ms=int(r.get("latency_ms", 0)),
                task=str(r.get("task", "")),
            )
            for r in _load_jsonl(in_file)
        ]
        rows = latency_report_rows(records)
        if csv_out is not None:
            write_latency_csv(records, csv_out)
    except EngineError as exc:
        raise click.ClickException(str(exc))
    _echo_json({"groups": rows})


@main.command("serve")
@click.option("--port", type=int, default=None, help="Defaults to PORT env or 8787.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--frontend", "frontend_dist", type=click.Path(path_type=Path), default=None,
              help="Static console bundle to serve at / (default: ./frontend/dist if present).")
@click.pass_obj
def serve(cfg: EngineConfig, port: Optional[int], host: str, frontend_dist: Optional[Path]) -> None:
    """Serve the HTTP API (and the console bundle when available)."""
    import uvicorn

    from .api import create_app

    if frontend_dist is None:
        default_dist = Path("frontend") / "dist"
        frontend_dist = default_dist if default_dist.exists() else None
    app = create_app(_service(cfg), frontend_dist=frontend_dist)
    uvicorn.run(app, host=host, port=port or cfg.port)


if __name__ == "__main__":
    main()
