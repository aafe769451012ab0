import math
from typing import Sequence

import numpy as np
import pytest

from services.featurestore import FrameDatabase
from services.synthgen import SynthSpec, generate, generate_route


def unit_at(degrees: float) -> list:
    rad = math.radians(degrees)
    return [math.cos(rad), math.sin(rad)]


def db_from_angles(angles: Sequence[float], label: str = "angles") -> FrameDatabase:
    return FrameDatabase.from_vectors([unit_at(a) for a in angles], source_label=label)


def random_db(rng: np.random.Generator, n: int, dim: int, label: str = "random") -> FrameDatabase:
    return FrameDatabase.from_vectors(rng.standard_normal((n, dim)), source_label=label)


@pytest.fixture
def two_bundle_db() -> FrameDatabase:
    """Three frames near 0 degrees, three near 90 degrees."""
    return db_from_angles([0, 3, 6, 90, 93, 96], label="two-bundle")


@pytest.fixture
def four_point_db() -> FrameDatabase:
    return db_from_angles([0, 5, 90, 95], label="four-point")


@pytest.fixture
def route_db() -> FrameDatabase:
    """Ten frames along a smooth route: feature distance grows with frame distance."""
    return generate_route(10, dim=16, step=0.3, turn=0.1, seed=5).db


@pytest.fixture(scope="session")
def high_ams_data():
    """20 well separated clusters of 10 frames, each drifting slowly in time order."""
    spec = SynthSpec(
        n_frames=200,
        dim=32,
        n_clusters=20,
        intra_noise=0.005,
        inter_gap=0.5,
        query_noise=0.005,
        drift=0.03,
        seed=7,
    )
    return generate(spec)


@pytest.fixture(scope="session")
def low_ams_data():
    """Frames scattered far from their cluster centers: no usable cluster structure."""
    spec = SynthSpec(
        n_frames=200,
        dim=64,
        n_clusters=10,
        intra_noise=1.5,
        inter_gap=0.5,
        query_noise=0.005,
        seed=11,
    )
    return generate(spec)
