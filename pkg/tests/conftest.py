import pytest

from toolgym.episodes import EpisodeService
from toolgym.toolkit import canonical_registry


@pytest.fixture
def registry():
    return canonical_registry()


@pytest.fixture
def service():
    return EpisodeService()
