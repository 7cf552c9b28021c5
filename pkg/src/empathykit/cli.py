"""Command-line entry point: file-based pipelines over the library modules.

Every subcommand logs its resolved configuration to stderr, writes data to
files or stdout, and keeps diagnostics on stderr.  Exit codes: 0 success,
1 validation/usage error, 2 I/O error.
"""

from __future__ import annotations

import dataclasses
import json
import sys

import click

from . import corpus as corpus_mod
from . import grpo as grpo_mod
from . import metrics as metrics_mod
from . import ranking as ranking_mod
from . import reward_model as rm_mod
from .coe import CoeOutput

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _log_config(command: str, params: dict) -> None:
    resolved = {k: v for k, v in params.items() if v is not None}
    click.echo(f"config {json.dumps({'command': command, **resolved}, ensure_ascii=False)}", err=True)


def _open_out(path: str):
    if path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8")


def _read_corpus(path: str, report_diagnostics: bool = True) -> list[corpus_mod.QARecord]:
    with open(path, encoding="utf-8") as fp:
        records, diagnostics = corpus_mod.parse_corpus(fp)
    if report_diagnostics:
        for diag in diagnostics:
            click.echo(str(diag), err=True)
    return records


def _read_jsonl(path: str) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fp:
        for line in fp:
            if line.strip():
                out.append(json.loads(line))
    return out


@click.group()
def main() -> None:
    """Chain-of-empathy training and evaluation pipeline."""


@main.command()
@click.option("--in", "in_path", required=True, help="corpus JSONL to ingest")
@click.option("--out", "out_path", default="-", help="normalized corpus JSONL (default stdout)")
@click.option("--anonymize", "do_anonymize", is_flag=True, help="scrub URLs/handles/long digit runs")
@click.option("--seed", default=42, show_default=True)
def ingest(in_path: str, out_path: str, do_anonymize: bool, seed: int) -> None:
    """Parse and validate a corpus file; report per-line diagnostics."""
    _log_config("ingest", {"in": in_path, "out": out_path, "anonymize": do_anonymize, "seed": seed})
    records = _read_corpus(in_path)
    if do_anonymize:
        records = [corpus_mod.anonymize_record(r) for r in records]
    out = _open_out(out_path)
    try:
        corpus_mod.write_corpus(records, out)
    finally:
        if out is not sys.stdout:
            out.close()
    click.echo(f"ingested {len(records)} records", err=True)


@main.command()
@click.option("--in", "in_path", required=True)
@click.option("--seed", default=42, show_default=True)
def stats(in_path: str, seed: int) -> None:
    """Corpus statistics as one JSON object on stdout."""
    _log_config("stats", {"in": in_path, "seed": seed})
    records = _read_corpus(in_path)
    result = corpus_mod.compute_stats(records)
    click.echo(json.dumps(dataclasses.asdict(result), ensure_ascii=False))


@main.command("filter")
@click.option("--in", "in_path", required=True)
@click.option("--out", "out_path", default="-")
@click.option("--min-chars", default=100, show_default=True, help="keep answers strictly longer")
@click.option("--seed", default=42, show_default=True)
def filter_cmd(in_path: str, out_path: str, min_chars: int, seed: int) -> None:
    """Length-filter answers and drop emptied records."""
    _log_config("filter", {"in": in_path, "out": out_path, "min_chars": min_chars, "seed": seed})
    records = corpus_mod.filter_corpus(_read_corpus(in_path), min_chars=min_chars)
    out = _open_out(out_path)
    try:
        corpus_mod.write_corpus(records, out)
    finally:
        if out is not sys.stdout:
            out.close()
    click.echo(f"kept {len(records)} records", err=True)


@main.command("sft-build")
@click.option("--in", "in_path", required=True, help="corpus JSONL")
@click.option("--chains", "chains_path", required=True, help="JSONL with id, answer_index, l1..l4")
@click.option("--out", "out_path", default="-")
@click.option("--seed", default=42, show_default=True)
def sft_build(in_path: str, chains_path: str, out_path: str, seed: int) -> None:
    """Join reviewed reasoning chains with corpus answers into SFT records."""
    _log_config("sft-build", {"in": in_path, "chains": chains_path, "out": out_path, "seed": seed})
    by_id = {r.id: r for r in _read_corpus(in_path)}
    out = _open_out(out_path)
    n = 0
    try:
        for obj in _read_jsonl(chains_path):
            record = by_id.get(obj.get("id"))
            if record is None:
                raise ValueError(f"chain references unknown record id {obj.get('id')!r}")
            answer_index = int(obj.get("answer_index", 0))
            chosen = record.answers[answer_index].text
            coe = CoeOutput(
                l1=obj["l1"], l2=obj["l2"], l3=obj["l3"], l4=obj["l4"], answer=chosen
            )
            sft = corpus_mod.build_sft_record(record, answer_index, coe)
            out.write(json.dumps(dataclasses.asdict(sft), ensure_ascii=False) + "\n")
            n += 1
    finally:
        if out is not sys.stdout:
            out.close()
    click.echo(f"built {n} SFT records", err=True)


@main.command("reward-train")
@click.option("--in", "in_path", required=True)
@click.option("--out", "out_path", required=True, help="encoder checkpoint path")
@click.option("--margin", default=0.2, show_default=True)
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--epochs", default=5, show_default=True)
@click.option("--lr", default=0.05, show_default=True)
@click.option("--batch-size", default=16, show_default=True)
@click.option("--hash-dim", default=2**15, show_default=True)
@click.option("--embed-dim", default=64, show_default=True)
@click.option("--seed", default=42, show_default=True)
def reward_train(
    in_path: str,
    out_path: str,
    margin: float,
    threshold: float,
    epochs: int,
    lr: float,
    batch_size: int,
    hash_dim: int,
    embed_dim: int,
    seed: int,
) -> None:
    """Train the contrastive answer reward model on a corpus."""
    _log_config(
        "reward-train",
        {
            "in": in_path,
            "out": out_path,
            "margin": margin,
            "threshold": threshold,
            "epochs": epochs,
            "lr": lr,
            "batch_size": batch_size,
            "hash_dim": hash_dim,
            "embed_dim": embed_dim,
            "seed": seed,
        },
    )
    records = _read_corpus(in_path)
    config = rm_mod.RewardConfig(
        margin=margin,
        threshold=threshold,
        learning_rate=lr,
        batch_size=batch_size,
        epochs=epochs,
        seed=seed,
    )
    params, history = rm_mod.train_reward_model(
        records, config, hash_dim=hash_dim, embed_dim=embed_dim
    )
    for epoch, loss in enumerate(history):
        click.echo(f"epoch {epoch} mean_loss {loss:.6f}", err=True)
    rm_mod.save_encoder(params, out_path)
    click.echo(
        json.dumps(
            {
                "checkpoint": out_path,
                "epochs": len(history),
                "final_loss": history[-1] if history else None,
            }
        )
    )


@main.command("reward-score")
@click.option("--model", "model_path", required=True, help="encoder checkpoint")
@click.option("--in", "in_path", required=True, help="JSONL with q, a per line")
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--out", "out_path", default="-")
@click.option("--seed", default=42, show_default=True)
def reward_score(model_path: str, in_path: str, threshold: float, out_path: str, seed: int) -> None:
    """Score (q, a) pairs: cosine and binary reward per line."""
    _log_config(
        "reward-score",
        {"model": model_path, "in": in_path, "threshold": threshold, "out": out_path, "seed": seed},
    )
    params = rm_mod.load_encoder(model_path)
    out = _open_out(out_path)
    try:
        for obj in _read_jsonl(in_path):
            q, a = obj["q"], obj["a"]
            try:
                score = rm_mod.cosine(rm_mod.encode(q, params), rm_mod.encode(a, params))
            except ValueError:
                score = None
            reward = rm_mod.answer_reward(q, a, params, threshold)
            out.write(json.dumps({"cosine": score, "reward": reward}, ensure_ascii=False) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()


@main.command("grpo-train")
@click.option("--task", default="tag-emission", show_default=True)
@click.option("--steps", default=1000, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--group-size", default=4, show_default=True)
@click.option("--clip-eps", default=0.2, show_default=True)
@click.option("--kl-beta", default=0.01, show_default=True)
@click.option("--temperature", default=1.0, show_default=True)
@click.option("--lr", default=0.3, show_default=True)
@click.option("--max-len", default=40, show_default=True)
@click.option("--out", "out_path", default="-", help="trace JSONL (default stdout)")
@click.option("--out-model", "model_path", default=None, help="optional policy checkpoint")
def grpo_train_cmd(
    task: str,
    steps: int,
    seed: int,
    group_size: int,
    clip_eps: float,
    kl_beta: float,
    temperature: float,
    lr: float,
    max_len: int,
    out_path: str,
    model_path: str | None,
) -> None:
    """Train the toy policy with GRPO; one trace JSON object per step."""
    _log_config(
        "grpo-train",
        {
            "task": task,
            "steps": steps,
            "seed": seed,
            "group_size": group_size,
            "clip_eps": clip_eps,
            "kl_beta": kl_beta,
            "temperature": temperature,
            "lr": lr,
            "max_len": max_len,
            "out": out_path,
            "out_model": model_path,
        },
    )
    if task != "tag-emission":
        raise ValueError(f"unknown task {task!r} (available: tag-emission)")
    init, prompts, reward_fn = grpo_mod.tag_emission_task(seed=seed)
    config = grpo_mod.GrpoConfig(
        group_size=group_size,
        clip_eps=clip_eps,
        kl_beta=kl_beta,
        learning_rate=lr,
        steps=steps,
        rollout_temperature=temperature,
        max_len=max_len,
        seed=seed,
    )
    params, trace = grpo_mod.grpo_train(init, prompts, reward_fn, config)
    out = _open_out(out_path)
    try:
        for entry in trace:
            out.write(json.dumps(entry) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    if model_path:
        grpo_mod.save_policy(params, model_path)


@main.command()
@click.option("--hyp", "hyp_path", required=True, help="predictions JSONL: id, text")
@click.option("--refs", "refs_path", required=True, help="corpus JSONL supplying references")
@click.option("--out", "out_path", default=None, help="per-question metric JSONL")
@click.option("--seed", default=42, show_default=True)
def evaluate(hyp_path: str, refs_path: str, out_path: str | None, seed: int) -> None:
    """Multi-reference evaluation; corpus summary JSON on stdout."""
    _log_config("evaluate", {"hyp": hyp_path, "refs": refs_path, "out": out_path, "seed": seed})
    references = {r.id: [a.text for a in r.answers] for r in _read_corpus(refs_path)}
    rows = []
    for obj in _read_jsonl(hyp_path):
        qid, text = obj["id"], obj["text"]
        if qid not in references:
            raise ValueError(f"prediction references unknown id {qid!r}")
        if not references[qid]:
            raise ValueError(f"record {qid!r} has no reference answers")
        rows.append((qid, metrics_mod.score_multi_reference(text, references[qid])))
    if not rows:
        raise ValueError("no predictions to evaluate")
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fp:
            for qid, vector in rows:
                fp.write(json.dumps({"id": qid, **vector.as_dict()}, ensure_ascii=False) + "\n")
    summary = metrics_mod.mean_metric_vector(v for _, v in rows)
    click.echo(
        json.dumps(
            {"n_questions": len(rows), **summary.as_dict(), "display": summary.rounded(3)},
            ensure_ascii=False,
        )
    )


@main.command("tasks-make")
@click.option("--in", "in_path", required=True, help="corpus JSONL supplying questions")
@click.option(
    "--pred",
    "preds",
    multiple=True,
    required=True,
    help="NAME=path.jsonl, one per model (repeatable)",
)
@click.option("--out-tasks", required=True)
@click.option("--out-assign", required=True)
@click.option("--seed", default=42, show_default=True)
def tasks_make(in_path: str, preds: tuple[str, ...], out_tasks: str, out_assign: str, seed: int) -> None:
    """Build anonymized, randomized ranking tasks plus the slot-map file."""
    _log_config(
        "tasks-make",
        {"in": in_path, "pred": list(preds), "out_tasks": out_tasks, "out_assign": out_assign, "seed": seed},
    )
    model_outputs: dict[str, dict[str, str]] = {}
    for spec in preds:
        if "=" not in spec:
            raise ValueError(f"--pred expects NAME=path, got {spec!r}")
        name, path = spec.split("=", 1)
        model_outputs[name] = {obj["id"]: obj["text"] for obj in _read_jsonl(path)}
    records = _read_corpus(in_path)
    samples = [(r.id, r.question_text) for r in records]
    tasks, slot_maps = ranking_mod.make_assignment(samples, model_outputs, len(model_outputs), seed)
    with open(out_tasks, "w", encoding="utf-8") as fp:
        ranking_mod.write_tasks(tasks, fp)
    with open(out_assign, "w", encoding="utf-8") as fp:
        ranking_mod.write_assignments(slot_maps, fp)
    click.echo(f"wrote {len(tasks)} tasks", err=True)


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--tasks", "tasks_path", required=True)
@click.option("--assignments", "assign_path", required=True)
@click.option("--log", "log_path", required=True, help="append-only rankings JSONL")
@click.option("--seed", default=42, show_default=True)
def serve(port: int, host: str, tasks_path: str, assign_path: str, log_path: str, seed: int) -> None:
    """Run the annotation HTTP service."""
    _log_config(
        "serve",
        {"port": port, "host": host, "tasks": tasks_path, "assignments": assign_path, "log": log_path, "seed": seed},
    )
    import uvicorn

    tasks = ranking_mod.read_tasks(tasks_path)
    slot_maps = ranking_mod.read_assignments(assign_path)
    store = ranking_mod.RankingStore(tasks, log_path=log_path)
    app = ranking_mod.create_app(store, slot_maps)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--log", "log_path", required=True)
@click.option("--assignments", "assign_path", required=True)
@click.option("--k", "k_spec", default="1,2", show_default=True)
@click.option("--seed", default=42, show_default=True)
def aggregate(log_path: str, assign_path: str, k_spec: str, seed: int) -> None:
    """Win@K / Mean-Rank report from a rankings log."""
    _log_config("aggregate", {"log": log_path, "assignments": assign_path, "k": k_spec, "seed": seed})
    records = ranking_mod.read_rankings(log_path)
    slot_maps = ranking_mod.read_assignments(assign_path)
    k_values = [int(part) for part in k_spec.split(",") if part.strip()]
    report = ranking_mod.aggregate(records, slot_maps, k_values)
    click.echo(json.dumps(report.as_dict(), ensure_ascii=False))


def run(argv: list[str]) -> int:
    """Dispatch one CLI invocation; returns the exit code."""
    try:
        main.main(args=list(argv), standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Exit as exc:
        return EXIT_OK if exc.exit_code == 0 else EXIT_VALIDATION
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return EXIT_VALIDATION
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_VALIDATION
    except (ValueError, KeyError, IndexError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_VALIDATION
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
