import math

import numpy as np
import pytest

from conftest import db_from_angles
from models import KeyframeSet
from services.clustering import lattice_indices, recompute_ams
from services.errors import KeyframeSetError, MedoidCountError, StrategyNotApplicableError
from services.featurestore import FrameDatabase
from services.synthgen import generate_route
from strategies import get_strategy, list_strategies, select_keyframes
from strategies.distance import select_distance, select_distance_for_count
from strategies.fixed_rate import select_fixed_rate
from strategies.medoid import select_medoid
from strategies.similarity import select_similarity, select_similarity_for_count


def line_geotags(n, step=0.00005):
    return np.column_stack([51.75 + step * np.arange(n), np.full(n, -1.26)])


class TestKeyframeSet:
    def test_ratio(self):
        assert KeyframeSet((0, 5), "fixed_rate", 10).ratio == 0.2

    @pytest.mark.parametrize(
        "indices, strategy, ams",
        [
            ((3,), "fixed_rate", None),
            ((5, 2), "fixed_rate", None),
            ((2, 2, 5), "fixed_rate", None),
            ((0, 10), "fixed_rate", None),
            ((0, 5), "fixed_rate", 0.5),
            ((0, 5), "medoid", None),
        ],
    )
    def test_rejects_malformed_sets(self, indices, strategy, ams):
        with pytest.raises(KeyframeSetError):
            KeyframeSet(indices, strategy, 10, ams=ams)


class TestMedoidStrategy:
    def test_two_bundles(self, two_bundle_db):
        keyframes = select_medoid(two_bundle_db, 0.33, init="random_restart")
        assert len(keyframes) == 2
        assert sorted(i // 3 for i in keyframes.indices) == [0, 1]
        assert keyframes.ams == pytest.approx(recompute_ams(two_bundle_db, keyframes.indices))
        assert keyframes.params["k"] == 2

    def test_ratio_one_is_rejected(self, two_bundle_db):
        with pytest.raises(MedoidCountError):
            select_medoid(two_bundle_db, 1.0)

    def test_two_of_three(self):
        keyframes = select_medoid(db_from_angles([0, 10, 90]), 0.67)
        assert len(keyframes) == 2
        assert keyframes.ams is not None


class TestSimilarityStrategy:
    def test_constant_sequence_is_padded(self):
        db = db_from_angles([30] * 6)
        assert select_similarity(db, 0.9).indices == (0, 5)

    def test_alternating_orthogonal_frames(self):
        db = db_from_angles([0, 90] * 4)
        assert select_similarity(db, 0.5).indices == tuple(range(8))

    def test_smooth_drift_crossings(self):
        # 10 degrees per frame; cos(30) < cos(25) <= cos(20)
        db = db_from_angles([10 * i for i in range(10)])
        assert select_similarity(db, math.cos(math.radians(25))).indices == (0, 3, 6, 9)

    def test_lower_threshold_never_selects_more(self):
        db = generate_route(80, dim=16, step=0.05, seed=1).db
        counts = [len(select_similarity(db, t)) for t in (0.999, 0.99, 0.98, 0.95, 0.9, 0.5)]
        assert counts == sorted(counts, reverse=True)

    def test_deterministic(self):
        db = generate_route(50, dim=16, step=0.05, seed=2).db
        assert select_similarity(db, 0.99).indices == select_similarity(db, 0.99).indices

    def test_count_search_approaches_target(self):
        db = generate_route(100, dim=16, step=0.05, seed=3).db
        keyframes = select_similarity_for_count(db, 20)
        assert abs(len(keyframes) - 20) <= 2
        assert keyframes.params["target_count"] == 20


class TestDistanceStrategy:
    def test_straight_line_every_third_frame(self):
        db = FrameDatabase.from_vectors(np.eye(10), line_geotags(10))
        assert select_distance(db, 0.0001).indices == (0, 3, 6, 9)

    def test_identical_geotags_are_padded(self):
        db = FrameDatabase.from_vectors(np.eye(6), np.tile([51.75, -1.26], (6, 1)))
        assert select_distance(db, 0.0001).indices == (0, 5)

    def test_missing_geotags_points_to_other_strategies(self):
        db = FrameDatabase.from_vectors(np.eye(4))
        with pytest.raises(StrategyNotApplicableError, match="fixed_rate"):
            select_distance(db, 0.0001)

    def test_non_positive_threshold(self):
        db = FrameDatabase.from_vectors(np.eye(4), line_geotags(4))
        with pytest.raises(KeyframeSetError):
            select_distance(db, 0.0)

    def test_higher_threshold_never_selects_more(self):
        db = FrameDatabase.from_vectors(np.eye(40), line_geotags(40))
        counts = [len(select_distance(db, t)) for t in (0.00004, 0.0001, 0.0002, 0.0005)]
        assert counts == sorted(counts, reverse=True)

    def test_count_search(self):
        db = FrameDatabase.from_vectors(np.eye(100), line_geotags(100))
        assert abs(len(select_distance_for_count(db, 20)) - 20) <= 2


class TestFixedRateStrategy:
    def test_two_of_ten(self):
        assert select_fixed_rate(FrameDatabase.from_vectors(np.eye(10)), 2).indices == (2, 7)

    def test_all_frames(self):
        assert select_fixed_rate(FrameDatabase.from_vectors(np.eye(10)), 10).indices == tuple(range(10))

    def test_large_lattice_is_distinct(self):
        assert len(lattice_indices(12836, 1283)) == 1283

    @pytest.mark.parametrize("count", [1, 11])
    def test_count_out_of_range(self, count):
        with pytest.raises(KeyframeSetError):
            select_fixed_rate(FrameDatabase.from_vectors(np.eye(10)), count)


class TestRegistry:
    def test_all_strategies_are_discovered(self):
        assert [s.id for s in list_strategies()] == ["distance", "fixed_rate", "medoid", "similarity"]

    def test_capabilities(self):
        assert get_strategy("distance").trajectory_free is False
        assert get_strategy("medoid").quality_criterion is True
        assert get_strategy("similarity").specified_number is True
        assert all(not get_strategy(s).quality_criterion for s in ("distance", "fixed_rate", "similarity"))

    def test_unknown_strategy(self):
        with pytest.raises(ValueError):
            get_strategy("learned")

    def test_select_by_ratio(self, two_bundle_db):
        keyframes = select_keyframes(two_bundle_db, "fixed_rate", 0.5)
        assert keyframes.indices == (1, 3, 5)
