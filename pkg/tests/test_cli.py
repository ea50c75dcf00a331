import json

import pytest
from click.testing import CliRunner

from railtwin.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def write_jsonl(path, rows):
    with path.open("w") as handle:
        for row in rows:
            handle.write(json.dumps(row) + "\n")
    return path


CAPTION_ROWS = [
    {"id": "c1", "text": "A crack on the rail"},
    {"id": "c2", "text": "Corrosion at the joint"},
    {"id": "c3", "text": "A missing bolt"},
]


class TestDatasetGenerate:
    def test_generates_artifacts(self, runner, tmp_path):
        captions = write_jsonl(tmp_path / "captions.jsonl", CAPTION_ROWS)
        out = tmp_path / "out"
        result = runner.invoke(
            main,
            ["--data-dir", str(tmp_path / "data"), "dataset", "generate",
             "--captions", str(captions), "--k", "5", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output)
        assert summary["entries"] == 15
        rows = [json.loads(l) for l in (out / "dataset.jsonl").read_text().splitlines()]
        assert len(rows) == 15
        objectives = json.loads((out / "objectives.json").read_text())
        assert len(objectives) == 3

    def test_missing_captions_file_fails_cleanly(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["dataset", "generate", "--captions", str(tmp_path / "nope.jsonl"),
             "--out", str(tmp_path / "out")],
        )
        assert result.exit_code != 0
        assert "not found" in result.output


class TestInfer:
    def test_text_analyze(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["--data-dir", str(tmp_path / "data"), "infer",
             "--text", "Steel wheel shows a radial crack"],
        )
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["report_markdown"].startswith("# Railway defect inspection report")

    def test_video_and_image_rejected(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["--data-dir", str(tmp_path / "data"), "infer",
             "--text", "x", "--video", "v.mp4", "--image", "a.png"],
        )
        assert result.exit_code != 0
        assert "mutually exclusive" in result.output


class TestLoopRun:
    def test_replays_feedback_stream(self, runner, tmp_path):
        feedback = write_jsonl(
            tmp_path / "feedback.jsonl",
            [{"score": 9}, {"text": "good and accurate work"}, {"score": 8},
             {"score": 2, "text": "missed the rust"}],
        )
        out = tmp_path / "report.json"
        result = runner.invoke(
            main,
            ["--data-dir", str(tmp_path / "data"), "loop", "run",
             "--feedback-file", str(feedback), "--ft-interval", "3",
             "--threshold", "70", "--ema-alpha", "1.0", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report["iterations"] == 4
        assert report["satisfaction_trace"] == [90.0, 90.0, 100.0, 100.0]
        assert report["ft_count"] == 2
        assert json.loads(out.read_text()) == report


class TestEval:
    def test_classify(self, runner, tmp_path):
        rows = [
            {"true_label": "crack", "predicted_label": "crack"},
            {"true_label": "rust", "predicted_label": "crack"},
            {"true_label": "rust", "predicted_label": "rust"},
        ]
        in_file = write_jsonl(tmp_path / "preds.jsonl", rows)
        result = runner.invoke(main, ["eval", "classify", "--in", str(in_file)])
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report["per_class"]["crack"]["recall"] == 1.0
        assert report["per_class"]["rust"]["recall"] == 0.5

    def test_rouge(self, runner, tmp_path):
        in_file = write_jsonl(
            tmp_path / "rouge.jsonl",
            [{"candidate": "the cat sat", "reference": "the cat ran"}],
        )
        result = runner.invoke(main, ["eval", "rouge", "--in", str(in_file)])
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["rows"][0]["f_measure"] == pytest.approx(2 / 3)

    def test_relevance(self, runner, tmp_path):
        in_file = write_jsonl(
            tmp_path / "rel.jsonl",
            [{"question": "rust on rail", "answer": "rust on rail", "contexts": []}],
        )
        result = runner.invoke(
            main, ["--data-dir", str(tmp_path / "data"), "eval", "relevance", "--in", str(in_file)]
        )
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["rows"][0]["answer_relevance"] == pytest.approx(1.0)

    def test_latency_with_csv(self, runner, tmp_path):
        in_file = write_jsonl(
            tmp_path / "lat.jsonl",
            [{"frames": 1, "tokens": 5, "latency_ms": 10},
             {"frames": 5, "tokens": 20, "latency_ms": 50}],
        )
        csv_out = tmp_path / "lat.csv"
        result = runner.invoke(
            main, ["eval", "latency", "--in", str(in_file), "--csv", str(csv_out)]
        )
        assert result.exit_code == 0, result.output
        assert csv_out.read_text().splitlines()[0] == "frames,mean_latency_ms,mean_tokens"
