"""Topology, phase enumeration, and flow generation tests."""

import itertools
import json
import random

import pytest

from trafficlab import core
from trafficlab.core import (
    ClusteredProfile,
    ConflictMatrix,
    FlowDataset,
    Movement,
    UniformProfile,
    Vehicle,
)


def brute_force_phases(movements, matrix, pair_size):
    """Independent oracle: filter every subset of the given size."""
    ids = sorted(m.id for m in movements)
    result = []
    for combo in itertools.combinations(ids, pair_size):
        ok = all(not matrix.conflicts(i, j) for i in combo for j in combo if i < j)
        if ok:
            result.append(frozenset(combo))
    return result


def make_movements(n):
    return [
        Movement(id=k, in_lane=k, approach="NESW"[k % 4], out_direction="straight")
        for k in range(n)
    ]


def random_matrix(n, rng):
    pairs = [
        (i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5
    ]
    return ConflictMatrix.from_pairs(n, pairs)


class TestEnumeratePhases:
    def test_two_compatible_movements_single_phase(self):
        movements = make_movements(2)
        matrix = ConflictMatrix.from_pairs(2, [])
        phases = core.enumerate_phases(movements, matrix, 2)
        assert len(phases) == 1
        assert phases[0].green_movements == frozenset({0, 1})
        assert phases[0].id == 0

    def test_two_conflicting_movements_is_an_error(self):
        movements = make_movements(2)
        matrix = ConflictMatrix.from_pairs(2, [(0, 1)])
        with pytest.raises(ValueError, match="no feasible phases"):
            core.enumerate_phases(movements, matrix, 2)

    def test_default_four_arm_matrix_yields_eight_phases(self, default_spec):
        oracle = brute_force_phases(
            default_spec.movements, default_spec.conflict_matrix, 2
        )
        phases = core.enumerate_phases(default_spec.movements, default_spec.conflict_matrix, 2)
        assert len(oracle) == 8
        assert [p.green_movements for p in phases] == oracle

    def test_matches_brute_force_on_random_instances(self):
        rng = random.Random(42)
        for _ in range(50):
            n = rng.randint(2, 10)
            movements = make_movements(n)
            matrix = random_matrix(n, rng)
            pair_size = rng.randint(1, 3)
            oracle = brute_force_phases(movements, matrix, pair_size)
            if not oracle:
                with pytest.raises(ValueError):
                    core.enumerate_phases(movements, matrix, pair_size)
                continue
            phases = core.enumerate_phases(movements, matrix, pair_size)
            assert [p.green_movements for p in phases] == oracle
            assert [p.id for p in phases] == list(range(len(phases)))

    def test_no_emitted_phase_contains_a_conflict(self):
        rng = random.Random(7)
        for _ in range(30):
            n = rng.randint(3, 9)
            movements = make_movements(n)
            matrix = random_matrix(n, rng)
            try:
                phases = core.enumerate_phases(movements, matrix, 2)
            except ValueError:
                continue
            for phase in phases:
                for i, j in itertools.combinations(sorted(phase.green_movements), 2):
                    assert not matrix.conflicts(i, j)


class TestConflictMatrix:
    def test_rejects_self_conflict(self):
        with pytest.raises(ValueError):
            ConflictMatrix.from_pairs(2, [(1, 1)])

    def test_rejects_asymmetric_rows(self):
        with pytest.raises(ValueError):
            ConflictMatrix(((False, True), (False, False)))

    def test_symmetry(self):
        m = ConflictMatrix.from_pairs(3, [(0, 2)])
        assert m.conflicts(0, 2) and m.conflicts(2, 0)
        assert not m.conflicts(0, 1)


MINIMAL_DOC = {
    "yellow_duration": 5,
    "lanes": [{"length_m": 300.0, "vmax_ms": 11.0}, {"length_m": 300.0, "vmax_ms": 11.0}],
    "movements": [
        {"lane": 0, "approach": "N", "turn": "straight"},
        {"lane": 1, "approach": "E", "turn": "straight"},
    ],
    "conflicts": [[0, 1]],
    "phases": [[0], [1]],
}


class TestLoadIntersection:
    def test_minimal_two_lane_two_phase(self):
        spec = core.load_intersection(json.dumps(MINIMAL_DOC))
        assert spec.n_lanes == 2
        assert spec.n_phases == 2

    def test_zero_yellow_rejected(self):
        doc = dict(MINIMAL_DOC, yellow_duration=0)
        with pytest.raises(ValueError, match="yellow"):
            core.load_intersection(json.dumps(doc))

    def test_default_document_without_phases_enumerates_eight(self, default_spec):
        doc = core.intersection_to_document(default_spec)
        del doc["phases"]
        spec = core.load_intersection(json.dumps(doc))
        assert spec.n_phases == 8
        assert spec.phases == default_spec.phases

    def test_conflicting_phase_definition_rejected(self):
        doc = dict(MINIMAL_DOC, phases=[[0, 1]])
        with pytest.raises(ValueError, match="conflicting"):
            core.load_intersection(json.dumps(doc))

    def test_missing_field_rejected(self):
        doc = {k: v for k, v in MINIMAL_DOC.items() if k != "lanes"}
        with pytest.raises(ValueError):
            core.load_intersection(json.dumps(doc))

    def test_malformed_text_rejected(self):
        with pytest.raises(ValueError, match="malformed"):
            core.load_intersection("{not json")

    def test_round_trip(self, default_spec):
        doc = core.intersection_to_document(default_spec)
        again = core.load_intersection(json.dumps(doc))
        assert again == default_spec


class TestGenerateFlow:
    def test_zero_rate_gives_empty_dataset(self):
        flow = core.generate_flow(UniformProfile(0.0, 4), seed=1, duration=100)
        assert flow.vehicles == ()

    def test_clustered_two_platoons_exact_spawns(self):
        profile = ClusteredProfile(
            cluster_size=5, inter_cluster_gap=60, within_gap=2, lane_weights=(1.0,)
        )
        flow = core.generate_flow(profile, seed=9, duration=120)
        assert [v.spawn_time for v in flow.vehicles] == [0, 2, 4, 6, 8, 60, 62, 64, 66, 68]
        assert all(v.movement_id == 0 for v in flow.vehicles)

    def test_deterministic_given_profile_and_seed(self):
        profile = UniformProfile(0.05, 4)
        a = core.generate_flow(profile, seed=11, duration=600)
        b = core.generate_flow(profile, seed=11, duration=600)
        assert a == b
        assert json.dumps(core.flow_to_document(a)) == json.dumps(core.flow_to_document(b))

    def test_different_seeds_differ(self):
        profile = UniformProfile(0.05, 4)
        a = core.generate_flow(profile, seed=11, duration=600)
        b = core.generate_flow(profile, seed=12, duration=600)
        assert a != b

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            UniformProfile(-0.1, 4)

    def test_bad_gaps_rejected(self):
        with pytest.raises(ValueError):
            ClusteredProfile(5, 0, 2, (1.0,))
        with pytest.raises(ValueError):
            ClusteredProfile(5, 60, -1, (1.0,))
        with pytest.raises(ValueError):
            ClusteredProfile(0, 60, 2, (1.0,))
        with pytest.raises(ValueError):
            ClusteredProfile(5, 60, 2, (0.0, 0.0))

    def test_vehicles_sorted_within_duration(self):
        profile = ClusteredProfile(3, 17, 4, (0.3, 0.7))
        flow = core.generate_flow(profile, seed=5, duration=200)
        spawns = [v.spawn_time for v in flow.vehicles]
        assert spawns == sorted(spawns)
        assert all(0 <= s < 200 for s in spawns)


class TestSplitDataset:
    def make_sets(self, n):
        out = []
        for k in range(n):
            vehicles = tuple(Vehicle(id=i, spawn_time=i * 10, movement_id=0) for i in range(10))
            out.append(FlowDataset(vehicles, duration=100, label=f"d{k}"))
        return out

    def test_five_datasets_holdout_four(self):
        data = self.make_sets(5)
        train, val, test = core.split_dataset(data, 4)
        assert train == data[:4]
        assert val.duration == 50
        assert all(v.spawn_time < 50 for v in val.vehicles)
        assert test.duration == 50
        assert all(v.spawn_time < 50 for v in test.vehicles)  # shifted to start at 0
        assert len(val.vehicles) + len(test.vehicles) == 10

    def test_two_datasets(self):
        data = self.make_sets(2)
        train, val, test = core.split_dataset(data, 1)
        assert train == [data[0]]

    def test_single_dataset_rejected(self):
        with pytest.raises(ValueError):
            core.split_dataset(self.make_sets(1), 0)

    def test_val_and_test_disjoint_and_holdout_not_in_train(self):
        data = self.make_sets(3)
        train, val, test = core.split_dataset(data, 1)
        assert data[1] not in train
        val_ids = {v.id for v in val.vehicles}
        test_ids = {v.id for v in test.vehicles}
        assert not (val_ids & test_ids)


class TestVehicleAndFlowInvariants:
    def test_negative_spawn_rejected(self):
        with pytest.raises(ValueError):
            Vehicle(id=0, spawn_time=-1, movement_id=0)

    def test_unsorted_flow_rejected(self):
        vehicles = (Vehicle(0, 50, 0), Vehicle(1, 10, 0))
        with pytest.raises(ValueError, match="sorted"):
            FlowDataset(vehicles, duration=100)

    def test_spawn_beyond_duration_rejected(self):
        with pytest.raises(ValueError, match="duration"):
            FlowDataset((Vehicle(0, 100, 0),), duration=100)


class TestParseProfile:
    def test_uniform(self):
        p = core.parse_profile("uniform(rate_per_lane=0.05,n_lanes=8)")
        assert p == UniformProfile(0.05, 8)

    def test_clustered(self):
        p = core.parse_profile(
            "clustered(cluster_size=5,inter_cluster_gap=60,within_gap=2,lane_weights=1:0:2)"
        )
        assert p == ClusteredProfile(5, 60.0, 2.0, (1.0, 0.0, 2.0))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            core.parse_profile("poisson(rate=1)")
