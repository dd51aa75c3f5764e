import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

from corpus_fixture import build_corpus


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    """The 20-document synthetic corpus, built once per session."""
    root = tmp_path_factory.mktemp("fixture_corpus")
    return build_corpus(root)
