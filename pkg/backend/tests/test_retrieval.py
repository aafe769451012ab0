import numpy as np
import pytest

from models import KeyframeSet
from services.errors import ContractError, DimensionMismatchError, KeyframeSetError
from services.evaluation import query_windows
from services.featurestore import FrameDatabase
from services.retrieval import (
    SimilarityCounter,
    build_index,
    query_exhaustive,
    query_im2im,
    query_seq2seq,
    region_stats,
)
from services.synthgen import generate_route
from strategies.fixed_rate import select_fixed_rate


def index_over(db, indices):
    return build_index(db, KeyframeSet(tuple(indices), "fixed_rate", len(db)))


class TestBuildIndex:
    def test_interior_regions(self, route_db):
        index = index_over(route_db, [2, 5, 8])
        assert index.regions == {2: (0, 5), 5: (2, 8), 8: (5, 9)}

    def test_boundary_clamping(self, route_db):
        assert index_over(route_db, [0, 9]).regions == {0: (0, 9), 9: (0, 9)}

    def test_saturation_regions(self, route_db):
        regions = index_over(route_db, range(10)).regions
        assert regions[0] == (0, 1)
        assert regions[4] == (3, 5)
        assert regions[9] == (8, 9)

    def test_keyframes_of_another_database(self, route_db):
        with pytest.raises(KeyframeSetError):
            build_index(route_db, KeyframeSet((0, 11), "fixed_rate", 12))

    def test_region_stats_cover_every_frame(self, route_db):
        stats = region_stats(index_over(route_db, [2, 5, 8]))
        assert stats["covers_all_frames"]
        assert (stats["region_min"], stats["region_max"]) == (5, 7)


class TestIm2Im:
    def test_frame_found_through_nearest_keyframe(self, route_db):
        index = index_over(route_db, [2, 5, 8])
        report = query_im2im(index, route_db.frame(7))
        assert report.best_index == 7
        assert report.stage1_keyframe == 8
        assert report.best_index == query_exhaustive(route_db, route_db.frame(7)).best_index

    def test_keyframe_query_returns_the_keyframe(self, route_db):
        report = query_im2im(index_over(route_db, [2, 5, 8]), route_db.frame(5))
        assert report.best_index == 5
        assert report.best_similarity == pytest.approx(1.0)

    def test_comparisons_are_keyframes_plus_region(self, route_db):
        counter = SimilarityCounter()
        report = query_im2im(index_over(route_db, [2, 5, 8]), route_db.frame(7), counter)
        assert report.comparisons == 3 + 5 == counter.count

    def test_dimension_mismatch(self, route_db):
        with pytest.raises(DimensionMismatchError):
            query_im2im(index_over(route_db, [2, 5, 8]), np.ones(3) / np.sqrt(3))

    def test_exhaustive_dominates(self, route_db):
        index = index_over(route_db, [0, 9])
        rng = np.random.default_rng(0)
        for q in rng.standard_normal((20, route_db.dim)):
            q /= np.linalg.norm(q)
            assert query_exhaustive(route_db, q).best_similarity >= query_im2im(index, q).best_similarity


class TestSeq2Seq:
    def test_copied_window_is_found(self, route_db):
        counter = SimilarityCounter()
        report = query_seq2seq(index_over(route_db, [2, 5, 8]), route_db.features[6:9], counter)
        assert report.best_index == 7
        # 3 keyframes x L, then 3 windows of region [5, 9] x L
        assert report.comparisons == 9 + 9 == counter.count
        assert query_exhaustive(route_db, route_db.features[6:9]).best_index == 7

    def test_length_one_reduces_to_im2im(self, route_db):
        index = index_over(route_db, [2, 5, 8])
        for frame in range(10):
            q = route_db.frame(frame)
            assert query_seq2seq(index, q[None, :]).best_index == query_im2im(index, q).best_index

    def test_short_region_is_expanded(self, route_db):
        index = index_over(route_db, range(10))
        report = query_seq2seq(index, route_db.features[2:7])
        assert report.best_index == 4
        assert report.region == (2, 6)
        assert report.comparisons == 10 * 5 + 1 * 5

    def test_empty_sequence(self, route_db):
        with pytest.raises(ContractError):
            query_seq2seq(index_over(route_db, [2, 5, 8]), np.empty((0, route_db.dim)))


class TestExhaustive:
    def test_constant_database_ties_to_first_frame(self):
        db = FrameDatabase.from_vectors(np.tile([0.6, 0.8], (5, 1)))
        assert query_exhaustive(db, np.array([0.6, 0.8])).best_index == 0

    def test_comparison_counts(self, route_db):
        assert query_exhaustive(route_db, route_db.frame(0)).comparisons == 10
        assert query_exhaustive(route_db, route_db.features[:3]).comparisons == 8 * 3

    def test_stage1_is_unset(self, route_db):
        assert query_exhaustive(route_db, route_db.frame(3)).stage1_keyframe == -1


class TestSaturation:
    @pytest.fixture(scope="class")
    def route(self):
        return generate_route(1000, dim=32, step=0.05, query_noise=0.01, seed=3)

    def test_im2im_equals_exhaustive(self, route):
        index = build_index(route.db, select_fixed_rate(route.db, len(route.db)))
        counter = SimilarityCounter()
        for q, features in query_windows(route.queries, "im2im"):
            before = counter.count
            report = query_im2im(index, features, counter)
            assert report.best_index == query_exhaustive(route.db, features).best_index, q
            start, end = report.region
            assert report.comparisons == len(route.db) + (end - start + 1) == counter.count - before

    def test_seq2seq_equals_exhaustive(self, route):
        index = build_index(route.db, select_fixed_rate(route.db, len(route.db)))
        counter = SimilarityCounter()
        windows = query_windows(route.queries, "seq2seq", 3)
        assert len(windows) == 998
        for q, qseq in windows:
            before = counter.count
            report = query_seq2seq(index, qseq, counter)
            assert report.best_index == query_exhaustive(route.db, qseq).best_index, q
            start, end = report.region
            assert report.comparisons == len(route.db) * 3 + (end - start + 1 - 3 + 1) * 3 == counter.count - before

    def test_reports_are_deterministic(self, route):
        index = build_index(route.db, select_fixed_rate(route.db, 100))
        first = query_im2im(index, route.queries.frame(10))
        second = query_im2im(index, route.queries.frame(10))
        assert (first.best_index, first.best_similarity, first.comparisons) == (
            second.best_index,
            second.best_similarity,
            second.comparisons,
        )
