import pytest

from railtwin.backends import MockBackend
from railtwin.config import EngineConfig
from railtwin.dataset import CaptionRecord


@pytest.fixture
def mock_backend(tmp_path):
    return MockBackend(seed=7, media_dir=tmp_path / "media")


@pytest.fixture
def worked_captions():
    """The three template-based captions used across the generation tests."""
    return [
        CaptionRecord(id="c1", text="A crack on the rail"),
        CaptionRecord(id="c2", text="Corrosion at the joint"),
        CaptionRecord(id="c3", text="A missing bolt"),
    ]


@pytest.fixture
def engine_config(tmp_path):
    return EngineConfig(data_dir=tmp_path / "data")
