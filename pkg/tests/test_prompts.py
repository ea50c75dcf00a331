import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from railtwin.errors import ValidationError
from railtwin.prompts import (
    DEFAULT_VPI_RULES,
    SystemMessage,
    VpiRule,
    compose,
    load_rules,
    match_vpi,
)

SM = SystemMessage(text="You are an expert railway component defect instructor.")


class TestMatchVpi:
    def test_radial_crack_trigger_scenario(self):
        injections = match_vpi("Steel wheel shows a radial crack", DEFAULT_VPI_RULES)
        assert injections[0] == (
            "A radial crack, about two inches in length, is visible on the "
            "external circumference of the steel wheel"
        )

    def test_no_match_yields_empty(self):
        assert match_vpi("hello", DEFAULT_VPI_RULES) == []

    def test_priority_order(self):
        rules = [
            VpiRule(id="b", trigger_pattern="crack", injection_template="low", priority=2),
            VpiRule(id="a", trigger_pattern="crack", injection_template="high", priority=5),
        ]
        assert match_vpi("a crack", rules) == ["high", "low"]

    def test_id_breaks_priority_ties(self):
        rules = [
            VpiRule(id="zeta", trigger_pattern="crack", injection_template="z", priority=1),
            VpiRule(id="alpha", trigger_pattern="crack", injection_template="a", priority=1),
        ]
        assert match_vpi("crack", rules) == ["a", "z"]

    def test_matching_is_case_insensitive(self):
        rules = [VpiRule(id="r", trigger_pattern="Radial Crack", injection_template="x")]
        assert match_vpi("the RADIAL CRACK widened", rules) == ["x"]

    def test_token_boundary_mode(self):
        rules = [VpiRule(id="r", trigger_pattern="rust", injection_template="x")]
        assert match_vpi("crusty surface", rules) == ["x"]
        assert match_vpi("crusty surface", rules, token_boundary=True) == []

    def test_adding_non_matching_rule_never_changes_output(self):
        base = [VpiRule(id="r", trigger_pattern="crack", injection_template="x", priority=1)]
        extended = base + [VpiRule(id="q", trigger_pattern="zzz-never", injection_template="y")]
        for prompt in ("a crack", "nothing", "CRACK!"):
            assert match_vpi(prompt, base) == match_vpi(prompt, extended)

    def test_duplicate_rule_ids_rejected(self):
        rules = [
            VpiRule(id="r", trigger_pattern="a", injection_template="x"),
            VpiRule(id="r", trigger_pattern="b", injection_template="y"),
        ]
        with pytest.raises(ValidationError):
            match_vpi("ab", rules)

    def test_empty_trigger_rejected(self):
        with pytest.raises(ValidationError):
            VpiRule(id="r", trigger_pattern="  ", injection_template="x")


class TestCompose:
    def test_three_message_sequence(self):
        prompt = compose(SM, "Steel wheel shows a radial crack", ["the injected detail"], [])
        messages = prompt.to_messages()
        assert [m["role"] for m in messages] == ["system", "context", "user"]
        assert messages[0]["content"] == SM.text
        assert messages[1]["content"] == "the injected detail"
        assert messages[2]["content"] == "Steel wheel shows a radial crack"

    def test_two_message_sequence_without_injections(self):
        messages = compose(SM, "p", [], []).to_messages()
        assert [m["role"] for m in messages] == ["system", "user"]

    def test_empty_user_prompt_rejected(self):
        with pytest.raises(ValidationError):
            compose(SM, "   ", [], [])

    def test_media_refs_appended_to_user_message(self):
        messages = compose(SM, "look", [], ["a.png", "b.png"]).to_messages()
        assert "[media: a.png]" in messages[-1]["content"]
        assert "[media: b.png]" in messages[-1]["content"]

    @given(st.text(min_size=1).filter(str.strip), st.lists(st.text(min_size=1), max_size=3))
    @settings(max_examples=100, deadline=None)
    def test_deterministic_serialization(self, user, injections):
        first = json.dumps(compose(SM, user, injections, []).to_messages())
        second = json.dumps(compose(SM, user, injections, []).to_messages())
        assert first == second


class TestSystemMessage:
    def test_update_increments_version_and_keeps_history(self):
        updated = SM.updated(SM.text + " Pay attention to sizes.")
        assert updated.version == SM.version + 1
        assert updated.history[-1] == SM.text

    def test_empty_text_rejected(self):
        with pytest.raises(ValidationError):
            SystemMessage(text="  ")


class TestRulesFile:
    def test_rules_roundtrip(self, tmp_path):
        path = tmp_path / "rules.json"
        path.write_text(
            json.dumps(
                [
                    {
                        "id": "r1",
                        "trigger_pattern": "crack",
                        "injection_template": "a {size} crack",
                        "priority": 3,
                        "slots": {"size": "2 inch"},
                    }
                ]
            )
        )
        rules = load_rules(path)
        assert rules[0].instantiate() == "a 2 inch crack"
        assert rules[0].priority == 3

    def test_unknown_slots_left_visible(self):
        rule = VpiRule(id="r", trigger_pattern="x", injection_template="{mystery} here")
        assert rule.instantiate() == "{mystery} here"

    def test_non_array_rules_file_rejected(self, tmp_path):
        path = tmp_path / "rules.json"
        path.write_text('{"id": "r"}')
        with pytest.raises(ValidationError):
            load_rules(path)
