"""Shared fixtures: small intersections and deterministic demand files."""

import json

import pytest

from trafficlab import core


@pytest.fixture(scope="session")
def default_spec():
    return core.default_intersection()


@pytest.fixture(scope="session")
def two_phase_spec():
    return core.two_phase_intersection(lane_length_m=150.0)


@pytest.fixture(scope="session")
def twelve_phase_spec():
    """Eight movements with the eight pairwise phases plus four protected
    single-left phases, giving the 12-phase layout used in dimension checks."""
    spec = core.default_intersection()
    doc = core.intersection_to_document(spec)
    doc["phases"] = doc["phases"] + [[m.id] for m in spec.movements if m.out_direction == "left"]
    return core.load_intersection(json.dumps(doc))


@pytest.fixture(scope="session")
def four_singleton_spec():
    """Four approaches, each served by its own exclusive phase."""
    doc = {
        "yellow_duration": 5,
        "lanes": [{"length_m": 150.0, "vmax_ms": 11.0} for _ in range(4)],
        "movements": [
            {"lane": k, "approach": a, "turn": "straight"} for k, a in enumerate("NESW")
        ],
        "phases": [[0], [1], [2], [3]],
    }
    return core.load_intersection(json.dumps(doc))


@pytest.fixture(scope="session")
def clustered_flow():
    profile = core.ClusteredProfile(
        cluster_size=5, inter_cluster_gap=40, within_gap=2, lane_weights=(0.4, 0.1, 0.4, 0.1)
    )
    return core.generate_flow(profile, seed=7, duration=1200, label="clustered")


@pytest.fixture(scope="session")
def toy_flows():
    """Asymmetric clustered demand for the two-phase toy intersection."""
    profile = core.ClusteredProfile(
        cluster_size=4, inter_cluster_gap=15, within_gap=2, lane_weights=(0.5, 0.2, 0.25, 0.05)
    )
    return [
        core.generate_flow(profile, seed=s, duration=600, label=f"toy{s}") for s in (1, 2, 3)
    ]
