import numpy as np
import pytest

from services.clustering import faster_msc
from services.errors import ContractError, SeparationInfeasibleError
from services.synthgen import (
    DEFAULT_GPS_STEP,
    GPS_ORIGIN,
    SynthSpec,
    generate,
    generate_route,
    linear_geotags,
    perturb,
    place_centers,
)


class TestSynthSpec:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_clusters": 1},
            {"n_frames": 5, "n_clusters": 6},
            {"dim": 1},
            {"intra_noise": -0.1},
            {"drift": -1.0},
            {"gps_step": 0.0},
        ],
    )
    def test_rejects_invalid_parameters(self, kwargs):
        with pytest.raises(ContractError):
            SynthSpec(**kwargs)


class TestGenerate:
    def test_deterministic_for_a_seed(self):
        first = generate(SynthSpec(n_frames=40, n_clusters=4, query_noise=0.01, seed=9))
        second = generate(SynthSpec(n_frames=40, n_clusters=4, query_noise=0.01, seed=9))
        np.testing.assert_array_equal(first.db.features, second.db.features)
        np.testing.assert_array_equal(first.queries.features, second.queries.features)

    def test_seed_changes_the_data(self):
        first = generate(SynthSpec(n_frames=40, n_clusters=4, seed=1))
        second = generate(SynthSpec(n_frames=40, n_clusters=4, seed=2))
        assert not np.allclose(first.db.features, second.db.features)

    def test_shapes_and_unit_rows(self):
        data = generate(SynthSpec(n_frames=50, dim=12, n_clusters=5))
        assert data.db.features.shape == (50, 12)
        assert data.queries.features.shape == (50, 12)
        np.testing.assert_allclose(np.linalg.norm(data.db.features, axis=1), 1.0)
        assert data.db.source_label == "synth-42"

    def test_zero_query_noise_copies_the_database(self):
        data = generate(SynthSpec(n_frames=30, n_clusters=3, query_noise=0.0))
        np.testing.assert_array_equal(data.queries.features, data.db.features)

    def test_truth_is_the_source_frame(self):
        data = generate(SynthSpec(n_frames=30, n_clusters=3, query_noise=0.02))
        assert data.truth.mode == "frame"
        assert all(data.truth.truth_for(q) == q for q in range(30))
        assert data.gps_truth.truth_for(7) == data.db.geotag(7)

    def test_labels_are_contiguous_clusters(self):
        data = generate(SynthSpec(n_frames=20, n_clusters=4))
        np.testing.assert_array_equal(data.labels, np.repeat(np.arange(4), 5))

    def test_clusters_are_tight(self):
        data = generate(SynthSpec(n_frames=60, n_clusters=3, intra_noise=0.01))
        sims = data.db.features @ data.db.features.T
        same = data.labels[:, None] == data.labels[None, :]
        assert sims[same].min() > sims[~same].max()

    def test_clustered_data_has_high_ams(self):
        data = generate(SynthSpec(n_frames=200, n_clusters=10, intra_noise=0.05, inter_gap=0.5))
        result = faster_msc(data.db, 10, "fixed_rate")
        assert result.ams >= 0.6

    def test_infeasible_separation(self):
        with pytest.raises(SeparationInfeasibleError):
            generate(SynthSpec(n_frames=20, dim=2, n_clusters=10, inter_gap=1.5))


class TestHelpers:
    def test_place_centers_respects_the_gap(self):
        centers = place_centers(np.random.default_rng(0), 8, 16, 0.8)
        sims = centers @ centers.T
        np.fill_diagonal(sims, -1.0)
        assert sims.max() <= np.cos(0.8) + 1e-12

    def test_perturb_keeps_unit_norm(self):
        rng = np.random.default_rng(0)
        x = np.eye(5)
        moved = perturb(rng, x, 0.1)
        np.testing.assert_allclose(np.linalg.norm(moved, axis=1), 1.0)
        assert not np.allclose(moved, x)

    def test_perturb_without_noise(self):
        x = np.eye(3)
        np.testing.assert_array_equal(perturb(np.random.default_rng(0), x, 0.0), x)

    def test_linear_geotags_alternate_direction(self):
        geotags = linear_geotags(np.array([0, 0, 1, 1, 2]))
        lat0, lon0 = GPS_ORIGIN
        expected = [
            (lat0, lon0),
            (lat0 + DEFAULT_GPS_STEP, lon0),
            (lat0 + DEFAULT_GPS_STEP, lon0 + DEFAULT_GPS_STEP),
            (lat0 + DEFAULT_GPS_STEP, lon0 + 2 * DEFAULT_GPS_STEP),
            (lat0 + 2 * DEFAULT_GPS_STEP, lon0 + 2 * DEFAULT_GPS_STEP),
        ]
        np.testing.assert_allclose(geotags, expected)


class TestRoute:
    def test_consecutive_frames_are_one_step_apart(self):
        data = generate_route(50, dim=8, step=0.1, seed=4)
        sims = np.einsum("ij,ij->i", data.db.features[1:], data.db.features[:-1])
        np.testing.assert_allclose(sims, np.cos(0.1), atol=1e-9)

    def test_geotags_head_north(self):
        data = generate_route(5, dim=4)
        np.testing.assert_allclose(np.diff(data.db.geotags[:, 0]), DEFAULT_GPS_STEP)
        np.testing.assert_allclose(data.db.geotags[:, 1], GPS_ORIGIN[1])

    def test_deterministic(self):
        first = generate_route(20, dim=6, seed=8, query_noise=0.01)
        second = generate_route(20, dim=6, seed=8, query_noise=0.01)
        np.testing.assert_array_equal(first.queries.features, second.queries.features)
        assert first.db.source_label == "route-8"

    @pytest.mark.parametrize("kwargs", [{"n_frames": 1}, {"n_frames": 5, "dim": 2}, {"n_frames": 5, "step": 0.0}])
    def test_rejects_invalid_parameters(self, kwargs):
        with pytest.raises(ContractError):
            generate_route(**kwargs)
