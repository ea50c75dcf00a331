import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from railtwin.backends import MockBackend
from railtwin.dataset import (
    CaptionRecord,
    GenerationPolicy,
    caption_image,
    compile_dataset,
    complexity_score,
    diversity,
    is_unique,
    load_captions_jsonl,
    objective,
    reconstruction_loss,
    rephrase_caption,
    write_dataset_jsonl,
    write_objectives_json,
    DEFAULT_TEMPLATES,
)
from railtwin.errors import (
    DegenerateInputError,
    TemplateNotFoundError,
    TransportError,
    ValidationError,
)
from railtwin.text import normalize

WORD = st.sampled_from(
    "crack rust bolt joint rail wheel surface long deep visible minor severe".split()
)
PHRASE = st.lists(WORD, min_size=1, max_size=8).map(" ".join)


class TestComplexityScore:
    def test_empty(self):
        assert complexity_score("") == 0

    def test_counted_by_hand(self):
        assert complexity_score("a crack") == 4  # 2 words + 2 distinct
        assert complexity_score("a crack a crack") == 6  # 4 words + 2 distinct

    def test_punctuation_and_case_stripped(self):
        assert complexity_score("A crack.") == complexity_score("a crack")

    @given(PHRASE, PHRASE)
    @settings(max_examples=150, deadline=None)
    def test_monotone_under_extension(self, a, b):
        assert complexity_score(f"{a} {b}") >= complexity_score(a)


class TestIsUnique:
    POLICY = GenerationPolicy(k_max=1, similarity_threshold=0.5)

    def test_normalization_equal_rejected(self):
        assert is_unique("A crack", ["a crack"], self.POLICY) is False
        assert is_unique("a  crack ", ["A CRACK"], self.POLICY) is False

    def test_empty_existing_set(self):
        assert is_unique("anything", [], self.POLICY) is True

    def test_trigram_jaccard_by_hand(self):
        # 6 trigrams each, 5 shared, union of 7: similarity 5/7 > 0.5.
        candidate = "the rail has a long crack near joint"
        existing = ["the rail has a long crack near bolt"]
        assert is_unique(candidate, existing, self.POLICY) is False
        loose = GenerationPolicy(k_max=1, similarity_threshold=5 / 7)
        assert is_unique(candidate, existing, loose) is True

    def test_short_texts_fall_back_to_equality(self):
        # Fewer than three words make the trigram sets empty.
        assert is_unique("a crack", ["a break"], self.POLICY) is True


class TestDiversity:
    def test_single_sample_is_zero(self):
        assert diversity(["x"]) == 0.0
        assert diversity([]) == 0.0

    def test_identical_pair_is_zero(self):
        assert diversity(["a b", "a b"]) == 0.0

    def test_disjoint_vocabularies(self):
        assert diversity(["alpha beta", "gamma delta"]) == 1.0

    @given(st.lists(PHRASE, min_size=2, max_size=6))
    @settings(max_examples=150, deadline=None)
    def test_bounded_and_order_invariant(self, samples):
        value = diversity(samples)
        assert 0.0 <= value <= 1.0
        assert diversity(list(reversed(samples))) == pytest.approx(value, abs=1e-12)

    @given(PHRASE, st.integers(min_value=2, max_value=5))
    @settings(max_examples=50, deadline=None)
    def test_identical_multiset_is_zero(self, phrase, n):
        assert diversity([phrase] * n) == 0.0


class TestReconstructionLoss:
    def test_full_coverage(self):
        assert reconstruction_loss("crack on the rail surface", "crack on the rail") == 0.0

    def test_zero_coverage(self):
        assert reconstruction_loss("corrosion at joint", "missing bolt shear") == 1.0

    def test_half_coverage(self):
        # Caption content words {crack, rail}; sample covers only "crack".
        assert reconstruction_loss("a crack somewhere", "crack on the rail") == 0.5

    def test_stop_word_only_caption_degenerate(self):
        with pytest.raises(DegenerateInputError):
            reconstruction_loss("sample", "of the and")

    def test_empty_caption_rejected(self):
        with pytest.raises(ValidationError):
            reconstruction_loss("sample", "   ")


class TestObjective:
    def test_lambda_zero_collapses_to_diversity(self):
        report = objective(["alpha beta", "gamma delta"], "alpha gamma", 0.0)
        assert report.value == report.diversity == 1.0

    def test_identical_full_coverage_samples(self):
        report = objective(["crack rail", "crack rail"], "crack on the rail", 1.0)
        assert report.diversity == 0.0
        assert report.reconstruction_loss == 0.0
        assert report.value == 0.0

    def test_hand_computed_case(self):
        report = objective(["alpha beta", "gamma delta"], "alpha gamma", 1.0)
        assert report.diversity == 1.0
        assert report.reconstruction_loss == 0.5
        assert report.value == 0.5

    def test_value_identity_holds(self):
        report = objective(["crack deep", "rust wide"], "crack rust", 0.7)
        assert report.value == pytest.approx(
            report.diversity - 0.7 * report.reconstruction_loss, abs=1e-12
        )

    def test_raising_diversity_at_fixed_loss_raises_value(self):
        # Both variants fully cover the caption (L = 0); the second triple
        # has lower pairwise overlap, so D rises and the value must rise.
        caption = "crack rail"
        tight = ["crack rail one", "crack rail two", "crack rail one extra"]
        spread = ["crack rail one", "crack rail two", "crack rail three"]
        v_tight = objective(tight, caption, 0.5)
        v_spread = objective(spread, caption, 0.5)
        assert v_tight.reconstruction_loss == v_spread.reconstruction_loss == 0.0
        assert v_spread.diversity > v_tight.diversity
        assert v_spread.value > v_tight.value

    def test_empty_samples_rejected(self):
        with pytest.raises(ValidationError):
            objective([], "caption", 0.5)


class TestCaptionImage:
    def test_mock_caption_is_deterministic(self, mock_backend, tmp_path):
        first = caption_image("rail_crack.jpg", "defect-v1", mock_backend)
        second = caption_image("rail_crack.jpg", "defect-v1", mock_backend)
        assert first.text == second.text
        assert first.id == second.id

    def test_unknown_template_rejected(self, mock_backend):
        with pytest.raises(TemplateNotFoundError):
            caption_image("any.jpg", "nope-v9", mock_backend)

    def test_caption_contains_required_fields(self, mock_backend):
        record = caption_image("joint_corrosion.jpg", "defect-v1", mock_backend)
        for field in DEFAULT_TEMPLATES["defect-v1"].required_fields:
            assert field in record.text.lower()


class TestRephraseCaption:
    def test_worked_example_shape(self, mock_backend):
        caption = CaptionRecord(id="c1", text="A crack on the rail")
        outcome = rephrase_caption(caption, GenerationPolicy(k_max=3), mock_backend)
        assert len(outcome.samples) == 3
        assert not outcome.exhausted
        base = complexity_score(caption.text)
        for sample in outcome.samples:
            assert sample.text.startswith("A crack on the rail")
            assert sample.complexity >= base
            assert sample.complexity == complexity_score(sample.text)

    def test_zero_cap(self, mock_backend):
        caption = CaptionRecord(id="c1", text="A crack on the rail")
        outcome = rephrase_caption(caption, GenerationPolicy(k_max=0), mock_backend)
        assert outcome.samples == []
        assert not outcome.exhausted

    def test_repeating_mock_admits_one_and_warns(self, tmp_path):
        fixed = MockBackend(
            chat_responses=["A crack 3 inches long on the rail surface, perpendicular."],
            media_dir=tmp_path,
        )
        caption = CaptionRecord(id="c1", text="A crack")
        outcome = rephrase_caption(
            caption, GenerationPolicy(k_max=3, max_attempts=5), fixed
        )
        assert len(outcome.samples) == 1
        assert outcome.exhausted
        assert outcome.attempts == 5


class TestCompileDataset:
    def test_three_worked_captions_yield_k_times_three(self, worked_captions, mock_backend):
        build = compile_dataset(worked_captions, GenerationPolicy(k_max=5), mock_backend)
        assert len(build.entries) == 15
        sms = {e.system_message for e in build.entries}
        assert sms == {
            "Given the defect description provided, identify potential risks "
            "and recommend preventive measures."
        }
        assert len(build.objectives) == 3

    def test_single_caption_single_sample(self, mock_backend):
        build = compile_dataset(
            [CaptionRecord(id="c1", text="A crack on the rail")],
            GenerationPolicy(k_max=1),
            mock_backend,
        )
        assert len(build.entries) == 1

    def test_cross_caption_collision_globally_deduped(self, tmp_path):
        scripted = MockBackend(
            chat_responses=[
                "the rail shows a deep crack across the running surface area",
                "the rail shows a deep crack across the running surface area",
            ],
            media_dir=tmp_path,
        )
        captions = [
            CaptionRecord(id="c1", text="crack one"),
            CaptionRecord(id="c2", text="crack two"),
        ]
        build = compile_dataset(captions, GenerationPolicy(k_max=1, max_attempts=1), scripted)
        assert len(build.entries) == 2 * 1 - 1
        assert any("duplicate" in w for w in build.warnings)

    def test_no_normalization_equal_duplicates(self, worked_captions, mock_backend):
        build = compile_dataset(worked_captions, GenerationPolicy(k_max=5), mock_backend)
        norms = [normalize(e.sample.text) for e in build.entries]
        assert len(norms) == len(set(norms))

    def test_complexity_floor_holds_for_every_entry(self, worked_captions, mock_backend):
        build = compile_dataset(worked_captions, GenerationPolicy(k_max=4), mock_backend)
        floor = {c.id: complexity_score(c.text) for c in worked_captions}
        for entry in build.entries:
            assert entry.sample.complexity >= floor[entry.sample.caption_id]

    def test_failed_caption_skipped_and_recorded(self, tmp_path):
        flaky = MockBackend(
            media_dir=tmp_path,
            fail_when=lambda prompt: "explode" in prompt,
        )
        captions = [
            CaptionRecord(id="good", text="A crack on the rail"),
            CaptionRecord(id="bad", text="please explode now"),
        ]
        build = compile_dataset(captions, GenerationPolicy(k_max=2), flaky)
        assert [c for c, _ in build.failures] == ["bad"]
        assert {e.sample.caption_id for e in build.entries} == {"good"}

    def test_transport_error_propagates_from_rephrase(self, tmp_path):
        flaky = MockBackend(media_dir=tmp_path, fail_when=lambda prompt: True)
        with pytest.raises(TransportError):
            rephrase_caption(
                CaptionRecord(id="c", text="A crack"), GenerationPolicy(k_max=1), flaky
            )

    def test_concurrent_compile_matches_sequential(self, worked_captions, mock_backend):
        sequential = compile_dataset(worked_captions, GenerationPolicy(k_max=3), mock_backend)
        concurrent = compile_dataset(
            worked_captions, GenerationPolicy(k_max=3), mock_backend, max_workers=3
        )
        assert [e.to_row() for e in sequential.entries] == [e.to_row() for e in concurrent.entries]

    def test_duplicate_caption_ids_rejected(self, mock_backend):
        captions = [CaptionRecord(id="c", text="a"), CaptionRecord(id="c", text="b")]
        with pytest.raises(ValidationError):
            compile_dataset(captions, GenerationPolicy(k_max=1), mock_backend)


class TestSerialization:
    def test_jsonl_rows_carry_documented_fields(self, worked_captions, mock_backend, tmp_path):
        build = compile_dataset(worked_captions, GenerationPolicy(k_max=2), mock_backend)
        path = write_dataset_jsonl(build.entries, tmp_path / "ds.jsonl")
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(rows) == len(build.entries)
        for row in rows:
            assert set(row) == {
                "id", "caption_id", "system_message", "prompt", "response",
                "complexity", "attempt_index",
            }

    def test_objectives_report_schema(self, worked_captions, mock_backend, tmp_path):
        build = compile_dataset(worked_captions, GenerationPolicy(k_max=2), mock_backend)
        path = write_objectives_json(build.objectives, tmp_path / "obj.json")
        rows = json.loads(path.read_text())
        assert {tuple(sorted(r)) for r in rows} == {("D", "L", "caption_id", "lambda", "value")}
        for row in rows:
            assert row["value"] == pytest.approx(row["D"] - row["lambda"] * row["L"], abs=1e-12)

    def test_captions_roundtrip(self, tmp_path):
        path = tmp_path / "captions.jsonl"
        path.write_text('{"id": "c1", "text": "A crack on the rail"}\n{"text": "rust"}\n')
        records = load_captions_jsonl(path)
        assert records[0].id == "c1"
        assert records[1].text == "rust"

    def test_empty_caption_rejected(self):
        with pytest.raises(ValidationError):
            CaptionRecord(id="c", text="   ")
