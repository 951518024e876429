"""Complete-linkage clustering against a from-scratch oracle, plus cut rules."""

from __future__ import annotations

import random

import numpy as np
import pytest

from carpoolflow.cluster import (
    CompleteLinkageClusterer,
    OdVector,
    complete_linkage,
    cut,
    door_to_door_matches,
    od_vector,
    validate_od_vectors,
)
from carpoolflow.geo import GeoPoint
from carpoolflow.simplify import TimeWindow  # noqa: F401  (import kept light)

from conftest import at, make_trace, spherical_destination
from oracles import complete_linkage_brute


def vec(*coords: float) -> OdVector:
    return OdVector(*coords)


def random_vectors(rng: random.Random, n: int, scale: float = 10_000.0):
    return [
        vec(
            rng.uniform(-scale, scale),
            rng.uniform(-scale, scale),
            rng.uniform(-scale, scale),
            rng.uniform(-scale, scale),
        )
        for _ in range(n)
    ]


class TestOdVector:
    def test_trace_at_reference_is_zero(self):
        reference = GeoPoint(5.0, 45.5)
        trace = make_trace("t", [(reference, at(8, 0)), (reference, at(8, 30))])
        v = od_vector(trace, reference)
        assert v == vec(0.0, 0.0, 0.0, 0.0)

    def test_origin_one_km_east(self):
        reference = GeoPoint(5.0, 45.5)
        east = spherical_destination(reference, 90.0, 1000.0)
        trace = make_trace("t", [(east, at(8, 0)), (reference, at(8, 30))])
        v = od_vector(trace, reference)
        assert v.origin_x == pytest.approx(1000.0, abs=5.0)
        assert abs(v.origin_y) < 5.0
        assert (v.dest_x, v.dest_y) == (0.0, 0.0)

    def test_identical_endpoints_give_identical_vectors(self):
        reference = GeoPoint(5.0, 45.5)
        a = GeoPoint(5.1, 45.6)
        b = GeoPoint(4.9, 45.4)
        t1 = make_trace("t1", [(a, at(7, 0)), (b, at(8, 0))])
        t2 = make_trace("t2", [(a, at(7, 30)), (b, at(8, 30))])
        assert od_vector(t1, reference) == od_vector(t2, reference)


class TestCompleteLinkage:
    def test_single_vector(self):
        dendrogram = complete_linkage([vec(0, 0, 0, 0)])
        assert dendrogram.n_leaves == 1
        assert dendrogram.merges == ()

    def test_three_collinear_points(self):
        dendrogram = complete_linkage(
            [vec(0, 0, 0, 0), vec(1, 0, 0, 0), vec(10, 0, 0, 0)]
        )
        first, second = dendrogram.merges
        assert (first.a, first.b, first.height) == (0, 1, 1.0)
        # complete linkage: the second merge is the farthest pair, 10 meters
        assert (second.a, second.b, second.height) == (2, 3, 10.0)

    def test_heights_non_decreasing(self):
        rng = random.Random(6)
        for _ in range(30):
            dendrogram = complete_linkage(random_vectors(rng, rng.randint(2, 25)))
            heights = dendrogram.heights()
            assert heights == sorted(heights)

    def test_matches_brute_force(self):
        rng = random.Random(20191201)
        for _ in range(100):
            n = rng.randint(1, 8)
            vectors = random_vectors(rng, n)
            expected = complete_linkage_brute([v.as_array().tolist() for v in vectors])
            actual = complete_linkage(vectors)
            assert len(actual.merges) == len(expected)
            for merge, (a, b, height) in zip(actual.merges, expected):
                assert (merge.a, merge.b) == (a, b)
                assert merge.height == pytest.approx(height, rel=1e-12)

    def test_matches_brute_force_with_ties(self):
        # integer grid coordinates force exactly equal inter-cluster distances
        rng = random.Random(77)
        for _ in range(60):
            n = rng.randint(2, 7)
            vectors = [
                vec(rng.randint(0, 3) * 1000.0, rng.randint(0, 1) * 1000.0, 0.0, 0.0)
                for _ in range(n)
            ]
            expected = complete_linkage_brute([v.as_array().tolist() for v in vectors])
            actual = complete_linkage(vectors)
            for merge, (a, b, height) in zip(actual.merges, expected):
                assert (merge.a, merge.b, merge.height) == (a, b, pytest.approx(height))


class TestCut:
    def test_zero_height_gives_singletons(self):
        vectors = [vec(i * 100.0, 0, 0, 0) for i in range(5)]
        labels = cut(complete_linkage(vectors), 0.0)
        assert sorted(labels.cardinalities().values()) == [1, 1, 1, 1, 1]

    def test_max_height_gives_one_cluster(self):
        rng = random.Random(8)
        vectors = random_vectors(rng, 12)
        dendrogram = complete_linkage(vectors)
        labels = cut(dendrogram, max(dendrogram.heights()))
        assert labels.cardinalities() == {1: 12}

    def test_refinement_monotonicity(self):
        rng = random.Random(9)
        for _ in range(40):
            vectors = random_vectors(rng, rng.randint(2, 20))
            dendrogram = complete_linkage(vectors)
            top = max(dendrogram.heights())
            h_low = rng.uniform(0, top)
            h_high = rng.uniform(h_low, top)
            fine = cut(dendrogram, h_low)
            coarse = cut(dendrogram, h_high)
            # every fine cluster sits inside exactly one coarse cluster
            for label in set(fine.labels.values()):
                coarse_labels = {coarse.labels[i] for i in fine.members(label)}
                assert len(coarse_labels) == 1

    def test_permutation_changes_only_labeling(self):
        rng = random.Random(10)
        vectors = random_vectors(rng, 15, scale=3000.0)
        shuffled = vectors[:]
        rng.shuffle(shuffled)
        a = cut(complete_linkage(vectors), 2500.0)
        b = cut(complete_linkage(shuffled), 2500.0)
        assert sorted(a.cardinalities().values()) == sorted(b.cardinalities().values())


def reference_week_vectors():
    """121 journeys in nine well-separated OD neighborhoods, sized like a
    typical week on the reference line (largest cluster holds 76 of 121)."""
    sizes = [76, 15, 7, 9, 4, 1, 7, 1, 1]
    rng = random.Random(2019)
    vectors = []
    ids = []
    for g, size in enumerate(sizes):
        center = 40_000.0 * (g + 1)
        for m in range(size):
            vectors.append(
                vec(
                    center + rng.uniform(-800, 800),
                    rng.uniform(-800, 800),
                    -center + rng.uniform(-800, 800),
                    rng.uniform(-800, 800),
                )
            )
            ids.append(f"g{g}-{m:02d}")
    return vectors, ids, sizes


class TestDoorToDoorMatches:
    def test_reference_week_shape(self):
        vectors, ids, sizes = reference_week_vectors()
        labels = cut(complete_linkage(vectors), 6000.0, ids=ids)
        assert sorted(labels.cardinalities().values(), reverse=True) == sorted(
            sizes, reverse=True
        )
        assert len(labels.cardinalities()) == 9
        matches = door_to_door_matches(labels)
        assert len(matches) == 76
        assert matches == {i for i in ids if i.startswith("g0-")}

    def test_all_singletons_tie_break(self):
        vectors = [vec(i * 100.0, 0, 0, 0) for i in range(4)]
        labels = cut(complete_linkage(vectors), 0.0, ids=["d", "b", "c", "a"])
        assert door_to_door_matches(labels) == {"a"}

    def test_single_cluster_returns_everything(self):
        vectors = [vec(float(i), 0, 0, 0) for i in range(6)]
        labels = cut(complete_linkage(vectors), 1e9, ids=[f"t{i}" for i in range(6)])
        assert door_to_door_matches(labels) == {f"t{i}" for i in range(6)}


class TestClustererEstimator:
    def test_fit_predict_labels(self):
        vectors, ids, sizes = reference_week_vectors()
        X = np.array([v.as_array() for v in vectors])
        est = CompleteLinkageClusterer(cut_height_m=6000.0)
        labels = est.fit_predict(X)
        assert est.n_clusters_ == 9
        assert labels.min() == 0
        assert (labels == 0).sum() == 76  # label 0 is the largest cluster

    def test_get_params(self):
        est = CompleteLinkageClusterer(cut_height_m=1234.0)
        assert est.get_params() == {"cut_height_m": 1234.0}

    def test_input_validation(self):
        with pytest.raises(ValueError):
            validate_od_vectors(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            validate_od_vectors(np.array([[np.nan, 0, 0, 0]]))
        with pytest.raises(ValueError):
            CompleteLinkageClusterer().fit(np.zeros((0, 4)))
