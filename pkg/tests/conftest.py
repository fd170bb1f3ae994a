import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hypothesis import settings  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def corpus42():
    from turnkit.synth import generate_corpus

    return generate_corpus(100, seed=42)


@pytest.fixture(scope="session")
def walks42(corpus42):
    from turnkit.pipeline import WalkData

    return [WalkData.from_synth(w) for w in corpus42]
