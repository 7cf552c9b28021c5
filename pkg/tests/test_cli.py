"""End-to-end subcommand runs over temp files, exit codes, determinism."""

from __future__ import annotations

import json

import pytest

from conftest import corpus_lines, make_record
from empathykit.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, run
from empathykit.coe import CoeOutput, parse_coe
from empathykit.grpo import load_policy
from empathykit.reward_model import load_encoder


@pytest.fixture
def corpus_file(tmp_path, two_question_corpus):
    path = tmp_path / "corpus.jsonl"
    path.write_text(corpus_lines(two_question_corpus), encoding="utf-8")
    return path


def run_ok(argv, capsys):
    code = run([str(a) for a in argv])
    captured = capsys.readouterr()
    assert code == EXIT_OK, captured.err
    return captured


class TestStats:
    def test_two_question_fixture(self, corpus_file, capsys):
        captured = run_ok(["stats", "--in", corpus_file], capsys)
        payload = json.loads(captured.out)
        assert payload["avg_responses_per_question"] == 1.5
        assert payload["n_questions"] == 2
        assert captured.err.startswith("config ")

    def test_byte_identical_across_runs(self, corpus_file, capsys):
        first = run_ok(["stats", "--in", corpus_file], capsys).out
        second = run_ok(["stats", "--in", corpus_file], capsys).out
        assert first == second


class TestIngest:
    def test_diagnostics_on_stderr_and_good_lines_written(self, tmp_path, capsys):
        src = tmp_path / "raw.jsonl"
        good = json.dumps(
            {"id": "a", "title": "t", "description": "d", "topic": "x", "answers": []}
        )
        src.write_text(good + "\n{bad json\n", encoding="utf-8")
        out = tmp_path / "clean.jsonl"
        captured = run_ok(["ingest", "--in", src, "--out", out], capsys)
        assert "line 2" in captured.err
        assert len(out.read_text().strip().splitlines()) == 1

    def test_anonymize_flag(self, tmp_path, capsys):
        src = tmp_path / "raw.jsonl"
        src.write_text(
            json.dumps(
                {
                    "id": "a",
                    "title": "电话13800138000",
                    "description": "d",
                    "topic": "x",
                    "answers": [{"text": "看 https://example.com/x 吧"}],
                },
                ensure_ascii=False,
            )
            + "\n",
            encoding="utf-8",
        )
        out = tmp_path / "clean.jsonl"
        run_ok(["ingest", "--in", src, "--out", out, "--anonymize"], capsys)
        body = out.read_text()
        assert "⟨NUM⟩" in body and "⟨URL⟩" in body
        assert "13800138000" not in body

    def test_input_files_not_mutated(self, corpus_file, tmp_path, capsys):
        before = corpus_file.read_bytes()
        run_ok(["ingest", "--in", corpus_file, "--out", tmp_path / "o.jsonl"], capsys)
        assert corpus_file.read_bytes() == before


class TestFilter:
    def test_min_chars(self, tmp_path, capsys):
        records = [
            make_record("keep", answers=("x" * 120,)),
            make_record("drop", answers=("y" * 80,)),
        ]
        src = tmp_path / "c.jsonl"
        src.write_text(corpus_lines(records), encoding="utf-8")
        out = tmp_path / "f.jsonl"
        run_ok(["filter", "--in", src, "--out", out, "--min-chars", 100], capsys)
        kept = [json.loads(line)["id"] for line in out.read_text().splitlines()]
        assert kept == ["keep"]


class TestSftBuild:
    def test_assistants_parse(self, tmp_path, capsys):
        records = [make_record(f"q{i}", answers=(f"回答{i}号内容。",)) for i in range(3)]
        src = tmp_path / "c.jsonl"
        src.write_text(corpus_lines(records), encoding="utf-8")
        chains = tmp_path / "chains.jsonl"
        with open(chains, "w", encoding="utf-8") as fp:
            for r in records:
                fp.write(
                    json.dumps(
                        {
                            "id": r.id,
                            "answer_index": 0,
                            "l1": "情绪低落",
                            "l2": "长期压力",
                            "l3": "想被理解",
                            "l4": "先共情",
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        out = tmp_path / "sft.jsonl"
        run_ok(["sft-build", "--in", src, "--chains", chains, "--out", out], capsys)
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(rows) == 3
        for row in rows:
            assert isinstance(parse_coe(row["assistant"]), CoeOutput)
            assert row["assistant"].startswith("<empathy_think>")


class TestRewardPipeline:
    def test_train_then_score(self, tmp_path, capsys):
        from conftest import synthetic_topical_corpus

        records = synthetic_topical_corpus(n_topics=2, records_per_topic=10)
        src = tmp_path / "c.jsonl"
        src.write_text(corpus_lines(records), encoding="utf-8")
        ckpt = tmp_path / "encoder.bin"
        captured = run_ok(
            [
                "reward-train", "--in", src, "--out", ckpt,
                "--epochs", 1, "--hash-dim", 1024, "--embed-dim", 16,
            ],
            capsys,
        )
        summary = json.loads(captured.out)
        assert summary["epochs"] == 1
        params = load_encoder(ckpt)
        assert params.hash_dim == 1024

        pairs = tmp_path / "pairs.jsonl"
        pairs.write_text(
            json.dumps({"q": records[0].question_text, "a": records[0].answers[0].text})
            + "\n"
            + json.dumps({"q": records[0].question_text, "a": ""})
            + "\n",
            encoding="utf-8",
        )
        captured = run_ok(
            ["reward-score", "--model", ckpt, "--in", pairs, "--threshold", 0.2], capsys
        )
        rows = [json.loads(line) for line in captured.out.splitlines()]
        assert rows[0]["reward"] in (0, 1) and rows[0]["cosine"] is not None
        assert rows[1] == {"cosine": None, "reward": 0}


class TestGrpoTrain:
    def test_trace_schema_and_checkpoint(self, tmp_path, capsys):
        trace_path = tmp_path / "trace.jsonl"
        model_path = tmp_path / "policy.bin"
        run_ok(
            [
                "grpo-train", "--task", "tag-emission", "--steps", 5, "--seed", 42,
                "--out", trace_path, "--out-model", model_path,
            ],
            capsys,
        )
        rows = [json.loads(line) for line in trace_path.read_text().splitlines()]
        assert [r["step"] for r in rows] == list(range(5))
        assert {
            "step", "mean_reward", "mean_format_reward", "mean_answer_reward",
            "kl", "clip_fraction", "objective",
        } <= set(rows[0])
        load_policy(model_path)

    def test_unknown_task_is_validation_error(self, capsys):
        assert run(["grpo-train", "--task", "nope"]) == EXIT_VALIDATION
        assert "unknown task" in capsys.readouterr().err

    def test_full_run_reaches_format_reward(self, tmp_path, capsys):
        trace_path = tmp_path / "trace.jsonl"
        run_ok(
            ["grpo-train", "--task", "tag-emission", "--steps", 2000, "--seed", 42,
             "--out", trace_path],
            capsys,
        )
        last = json.loads(trace_path.read_text().splitlines()[-1])
        assert last["mean_format_reward"] >= 0.9


class TestEvaluate:
    def test_identity_predictions_score_one(self, tmp_path, capsys):
        records = [make_record(f"q{i}", answers=(f"只有一个参考回答{i}。",)) for i in range(3)]
        refs = tmp_path / "refs.jsonl"
        refs.write_text(corpus_lines(records), encoding="utf-8")
        preds = tmp_path / "preds.jsonl"
        with open(preds, "w", encoding="utf-8") as fp:
            for r in records:
                fp.write(
                    json.dumps({"id": r.id, "text": r.answers[0].text}, ensure_ascii=False) + "\n"
                )
        per_question = tmp_path / "per_question.jsonl"
        captured = run_ok(
            ["evaluate", "--hyp", preds, "--refs", refs, "--out", per_question], capsys
        )
        summary = json.loads(captured.out)
        assert summary["b1"] == 1.0 and summary["rl"] == 1.0
        rows = [json.loads(line) for line in per_question.read_text().splitlines()]
        assert all(row["b1"] == 1.0 and row["rl"] == 1.0 for row in rows)
        assert summary["display"]["navg"] == round(summary["navg"], 3)

    def test_unknown_prediction_id_rejected(self, corpus_file, tmp_path, capsys):
        preds = tmp_path / "preds.jsonl"
        preds.write_text(json.dumps({"id": "nope", "text": "x"}) + "\n", encoding="utf-8")
        assert run(["evaluate", "--hyp", str(preds), "--refs", str(corpus_file)]) == EXIT_VALIDATION


class TestRankingPipeline:
    def test_tasks_make_then_aggregate(self, tmp_path, capsys):
        records = [make_record(f"s{i}") for i in range(2)]
        src = tmp_path / "c.jsonl"
        src.write_text(corpus_lines(records), encoding="utf-8")
        for j, name in enumerate(("alpha", "beta", "gamma")):
            (tmp_path / f"{name}.jsonl").write_text(
                "".join(
                    json.dumps({"id": r.id, "text": f"第{j}种回答给{r.id}"}, ensure_ascii=False)
                    + "\n"
                    for r in records
                ),
                encoding="utf-8",
            )
        tasks_path = tmp_path / "tasks.jsonl"
        assign_path = tmp_path / "assign.jsonl"
        run_ok(
            [
                "tasks-make", "--in", src,
                "--pred", f"alpha={tmp_path}/alpha.jsonl",
                "--pred", f"beta={tmp_path}/beta.jsonl",
                "--pred", f"gamma={tmp_path}/gamma.jsonl",
                "--out-tasks", tasks_path, "--out-assign", assign_path, "--seed", 7,
            ],
            capsys,
        )
        tasks = [json.loads(line) for line in tasks_path.read_text().splitlines()]
        assert len(tasks) == 2 and len(tasks[0]["candidates"]) == 3
        for task in tasks:
            assert "alpha" not in json.dumps(task["candidates"], ensure_ascii=False)

        log = tmp_path / "rankings.jsonl"
        log.write_text(
            json.dumps(
                {
                    "task_id": tasks[0]["task_id"],
                    "annotator_id": "a1",
                    "ordering": ["B", "A", "C"],
                    "submitted_at": "2026-01-01T00:00:00+00:00",
                }
            )
            + "\n",
            encoding="utf-8",
        )
        captured = run_ok(
            ["aggregate", "--log", log, "--assignments", assign_path, "--k", "1,2"], capsys
        )
        report = json.loads(captured.out)
        assert set(report["models"]) == {"alpha", "beta", "gamma"}
        assert sum(m["win_at"]["1"] for m in report["models"].values()) == 100.0


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        assert run(["frobnicate"]) == EXIT_VALIDATION
        assert capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert run(["stats", "--nope"]) == EXIT_VALIDATION

    def test_missing_input_file_is_io_error(self, tmp_path, capsys):
        assert run(["stats", "--in", str(tmp_path / "absent.jsonl")]) == EXIT_IO

    def test_empty_corpus_is_validation_error(self, tmp_path, capsys):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("", encoding="utf-8")
        assert run(["stats", "--in", str(empty)]) == EXIT_VALIDATION

    def test_help_exits_zero(self, capsys):
        assert run(["--help"]) == EXIT_OK
