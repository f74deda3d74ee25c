"""Session-scoped trained pipelines shared across test modules."""

import pytest

from hexplain.bench import gen_dataset
from hexplain.hier import PipelineModel
from hexplain.nn import TrainConfig, train
from hexplain.tasks import TaskSpec

LEX4_GLYPH = 4


@pytest.fixture(scope="session")
def lex4_pipeline():
    """Lex1-6 pipeline over 4x4 digit glyphs, two hidden layers of 10."""
    dataset = gen_dataset("digits", 600, seed=42, glyph_size=LEX4_GLYPH)
    model = train(dataset, TrainConfig(0.5, 30, 32, seed=7), hidden=(10, 10))
    return PipelineModel(model, TaskSpec.lex(6))


@pytest.fixture(scope="session")
def pacman_pipeline():
    """Pacman-SP pipeline over 8x8 cell glyphs, one hidden layer of 128."""
    dataset = gen_dataset("cells", 2000, seed=42)
    model = train(
        dataset, TrainConfig(0.3, 60, 32, seed=7), hidden=(128,), num_classes=4
    )
    return PipelineModel(model, TaskSpec.pacman())
