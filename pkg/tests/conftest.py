import numpy as np
import pytest

from motioninv import DenoiserSpec, EmbeddingShapeConfig, init_params, init_zero, linear_schedule


@pytest.fixture(scope="session")
def tiny_spec():
    """2-frame 4x4 C=8 single-level toy: fast enough for elementwise FD."""
    return DenoiserSpec(
        base_channels=8, height=4, width=4, frames=2,
        channel_mults=(1,), cond_vocab=2, time_dim=8,
    )


@pytest.fixture(scope="session")
def small_spec():
    """Two-level spec exercising pooling and multi-resolution embeddings."""
    return DenoiserSpec(
        base_channels=8, height=8, width=8, frames=4,
        channel_mults=(1, 2), cond_vocab=4, time_dim=8,
    )


@pytest.fixture(scope="session")
def tiny_params(tiny_spec):
    return init_params(tiny_spec, seed=7).freeze()


@pytest.fixture(scope="session")
def small_params(small_spec):
    return init_params(small_spec, seed=7).freeze()


@pytest.fixture(scope="session")
def short_schedule():
    return linear_schedule(steps=20)


def zero_set_for(spec, config=None):
    return init_zero(spec, config or EmbeddingShapeConfig(), spec.frames)


def random_video(spec, seed):
    rng = np.random.Generator(np.random.Philox(key=seed))
    return rng.uniform(
        0.0, 1.0, (1, spec.img_channels, spec.frames, spec.height, spec.width)
    )
