"""Guards the recorded console fixtures against drift.

The console's vitest suite replays frontend/fixtures/*.json instead of
talking to a live gateway; these tests regenerate the same payloads from the
real gateway and fail when the checked-in files no longer match.
"""

import json
from pathlib import Path

import pytest

FIXTURES_DIR = Path(__file__).resolve().parent.parent / "frontend" / "fixtures"

fixtures_present = pytest.mark.skipif(
    not FIXTURES_DIR.exists(), reason="console fixtures not generated"
)


@fixtures_present
def test_feedback_kind_fixture_matches_parser():
    from scripts.make_console_fixtures import build_kind_fixture

    checked_in = json.loads((FIXTURES_DIR / "feedback_kinds.json").read_text())
    assert checked_in == build_kind_fixture()


@fixtures_present
def test_session_fixture_matches_live_gateway():
    from scripts.make_console_fixtures import build_session_fixture

    checked_in = json.loads((FIXTURES_DIR / "session_alpha3.json").read_text())
    assert checked_in == build_session_fixture()


@fixtures_present
def test_session_fixture_shows_single_finetune():
    session = json.loads((FIXTURES_DIR / "session_alpha3.json").read_text())
    actions = [ex["response"]["action"] for ex in session["feedback"]]
    assert actions.count("finetuned") == 1
    assert session["report"]["satisfaction_trace"] == [
        ex["response"]["satisfaction"] for ex in session["feedback"]
    ]
