#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# This file is part of subgoal_hrl.
#
# subgoal_hrl is free software: you can redistribute it and/or modify
# it under the terms of the GNU Lesser General Public License as published by
# the Free Software Foundation, version 3 of the License.
#
# subgoal_hrl is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU Lesser General Public License for more details.
#
# You should have received a copy of the GNU Lesser General Public License
# along with subgoal_hrl.  If not, see <https://www.gnu.org/licenses/>.

from subgoal_hrl import *

from test_base import *

import numpy as np
import os
import pytest
import shutil


def grid_factorization():
    return override_factors([{"name": "pos", "mask": [0, 1]},
                             {"name": "key", "mask": [2]}], 3)


def switch_demos(n=4):
    trajectories = [make_trajectory(f"d{i:d}",
                                    [[t, 0.0, 1.0 if t >= 5 else 0.0]
                                     for t in range(12)])
                    for i in range(n)]
    return make_demo_set(trajectories, ["x", "y", "has_key"])


@pytest.mark.tsc
def test_subgoal(setup_test):
    subgoal = Subgoal(3, 0, [1.0, 2.0], 0.5, 0.75, (0, 1), name="pos:0")
    assert subgoal.distance([1.0, 2.0, 7.0]) == 0.0
    assert abs(subgoal.distance([4.0, 6.0, 0.0]) - 5.0) < 1.0e-12
    assert subgoal.contains([1.3, 2.3, 0.0])
    assert not subgoal.contains([1.5, 2.5, 0.0])
    assert subgoal.to_dict() == {"subgoal_id": 3, "name": "pos:0",
                                 "target": [1.0, 2.0], "threshold": 0.5,
                                 "support": 0.75}

    with pytest.raises(DiscoveryException):
        Subgoal(0, 0, [1.0], 0.0, 1.0, (0,))
    with pytest.raises(DiscoveryException):
        Subgoal(0, 0, [1.0], 0.5, 0.0, (0,))
    with pytest.raises(DiscoveryException):
        Subgoal(0, 0, [1.0, 2.0], 0.5, 1.0, (0,))


@pytest.mark.tsc
def test_subgoal_set(setup_test, tmp_path):
    subgoal_set = keydoor_subgoal_set(small_keydoor())
    assert len(subgoal_set) == 3
    assert [s.subgoal_id() for s in subgoal_set.subgoals()] == [0, 1, 2]
    assert subgoal_set.index(subgoal_set.subgoal(1)) == 1
    assert subgoal_set.index(subgoal_set.subgoal(2)) == 0

    assert subgoal_set.resolve("1").subgoal_id() == 1
    assert subgoal_set.resolve("x+y:1").subgoal_id() == 1
    assert subgoal_set.resolve("has_key").subgoal_id() == 2
    assert subgoal_set.resolve("x+y").subgoal_id() == 0
    with pytest.raises(DiscoveryException):
        subgoal_set.resolve("door")

    path = os.path.join(str(tmp_path), "subgoals.json")
    save_subgoals(subgoal_set.stamped("abc"), path)
    loaded = load_subgoals(path)
    assert loaded == subgoal_set.stamped("abc")
    assert loaded.config_hash() == "abc"
    assert loaded.seed() == 0

    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    path_2 = os.path.join(str(tmp_path), "subgoals_2.json")
    save_subgoals(loaded, path_2)
    with open(path_2, "r", encoding="utf-8") as f:
        assert f.read() == text


@pytest.mark.tsc
def test_subgoal_set_validation(setup_test, tmp_path):
    factorization = grid_factorization()
    a = Subgoal(0, 0, [0.0, 0.0], 0.5, 1.0, (0, 1))
    with pytest.raises(DiscoveryException):
        SubgoalSet(factorization, {0: [a], 1: [a]})
    with pytest.raises(DiscoveryException):
        SubgoalSet(factorization, {0: [a, a]})
    subgoal_set = SubgoalSet(factorization, {0: [a]})
    assert subgoal_set.per_factor(1) == []

    path = os.path.join(str(tmp_path), "subgoals.json")
    with pytest.raises(DiscoveryException) as e:
        load_subgoals(path)
    assert e.value.stage == "load"
    with open(path, "w", encoding="utf-8") as f:
        f.write("{\"factors\": [{}]}\n")
    with pytest.raises(DiscoveryException) as e:
        load_subgoals(path)
    assert e.value.stage == "load"


@pytest.mark.tsc
def test_discovery_parameters(setup_test):
    parameters = discovery_parameters()
    assert parameters == {"corr_threshold": 0.2, "w_dilate": 2, "k_max": 8,
                          "restarts": 5, "w_min": 3, "merge_distance": 2.0,
                          "cluster_k_max": 8,
                          "min_support": 0.4, "demo_copies": 1,
                          "include_terminal": True,
                          "drop_start_subgoals": True, "seed": 0,
                          "verbose": False}

    given = {"k_max": 3}
    parameters = discovery_parameters(given)
    assert parameters["k_max"] == 3
    assert given == {"k_max": 3}

    for bad in [{"demo_copies": 0}, {"min_support": 1.5},
                {"cluster_k_max": 0}, {"merge_distance": -1.0}]:
        with pytest.raises(DiscoveryException) as e:
            discovery_parameters(bad)
        assert e.value.stage == "config"


@pytest.mark.tsc
def test_propagate_switch_times(setup_test):
    demos = switch_demos(2)
    factorization = grid_factorization()
    switches = [SwitchPoint("d0", 5, 1, [1.0]),
                SwitchPoint("d0", 3, 0, [3.0, 0.0]),
                SwitchPoint("d1", 5, 0, [5.0, 0.0])]
    result = propagate_switch_times(switches, demos, factorization)
    assert [s.key() for s in result] == [("d0", 3, 0), ("d0", 3, 1),
                                         ("d0", 5, 0), ("d0", 5, 1),
                                         ("d1", 5, 0), ("d1", 5, 1)]
    assert [s.propagated() for s in result] == [False, True, True, False,
                                                False, True]
    assert np.array_equal(result[1].state(), [0.0])
    assert np.array_equal(result[2].state(), [5.0, 0.0])
    assert np.array_equal(result[5].state(), [1.0])

    # Propagating twice adds nothing
    assert propagate_switch_times(result, demos, factorization) == result

    with pytest.raises(DiscoveryException) as e:
        propagate_switch_times([SwitchPoint("d9", 1, 0, [0.0, 0.0])], demos,
                               factorization)
    assert e.value.stage == "propagation"
    with pytest.raises(DiscoveryException):
        propagate_switch_times([SwitchPoint("d0", 12, 0, [0.0, 0.0])],
                               demos, factorization)


@pytest.mark.tsc
def test_cluster_subgoals(setup_test):
    demos = switch_demos(4)
    factor = grid_factorization()[0]
    switches = []
    for i in range(4):
        switches.append(SwitchPoint(f"d{i:d}", 2, 0, [0.0, 0.0]))
        switches.append(SwitchPoint(f"d{i:d}", 8, 0, [5.0, 5.0]))
    subgoals = cluster_subgoals(switches, demos, factor, seed=0,
                                first_subgoal_id=4)
    assert len(subgoals) == 2
    assert [s.subgoal_id() for s in subgoals] == [4, 5]
    assert [s.name() for s in subgoals] == ["pos:0", "pos:1"]
    assert np.array_equal(subgoals[0].target(), [0.0, 0.0])
    assert np.array_equal(subgoals[1].target(), [5.0, 5.0])
    # Zero spread clusters fall back to the threshold floor
    assert subgoals[0].threshold() == 1.0e-6
    assert all(s.support() == 1.0 for s in subgoals)


@pytest.mark.tsc
def test_cluster_subgoals_single(setup_test):
    demos = switch_demos(2)
    factor = Factor(1, "key", [2], threshold=0.5)
    switches = [SwitchPoint("d0", 5, 1, [1.0]),
                SwitchPoint("d1", 5, 1, [1.0])]
    subgoals = cluster_subgoals(switches, demos, factor)
    assert len(subgoals) == 1
    assert np.array_equal(subgoals[0].target(), [1.0])
    assert subgoals[0].threshold() == 0.5
    assert cluster_subgoals([], demos, factor) == []


@pytest.mark.tsc
def test_cluster_subgoals_pruning(setup_test):
    demos = switch_demos(4)
    factor = grid_factorization()[0]
    switches = [SwitchPoint("d0", 2, 0, [0.0, 0.0]),
                SwitchPoint("d0", 3, 0, [0.0, 0.0]),
                SwitchPoint("d1", 2, 0, [0.0, 0.0]),
                SwitchPoint("d0", 8, 0, [9.0, 9.0]),
                SwitchPoint("d0", 9, 0, [9.0, 9.0])]
    subgoals = cluster_subgoals(switches, demos, factor, min_support=0.4)
    assert len(subgoals) == 1
    assert subgoals[0].support() == 0.5

    with pytest.warns(RuntimeWarning):
        assert cluster_subgoals(switches, demos, factor,
                                min_support=0.9) == []


@pytest.mark.tsc
def test_discover_constant_factor(setup_test):
    # Position changes, a second factor is constant
    trajectories = [make_trajectory(f"d{i:d}",
                                    [[min(t, 10) + 0.01 * i, 3.0]
                                     for t in range(20)], done=True)
                    for i in range(4)]
    demos = make_demo_set(trajectories, ["x", "z"])
    factorization = override_factors([{"name": "x", "mask": [0]},
                                      {"name": "z", "mask": [1]}], 2)
    subgoal_set, diagnostics = discover_with_diagnostics(
        demos, factorization, {"k_max": 2, "restarts": 2})
    assert subgoal_set.per_factor(1) == []
    assert diagnostics["factors"][1]["K"] == 1
    assert diagnostics["factors"][1]["name"] == "z"
    ids = [s.subgoal_id() for s in subgoal_set.subgoals()]
    assert ids == list(range(len(ids)))


@pytest.mark.tsc
def test_discover_keydoor(setup_test):
    demos = generate_demos(keydoor_20(), 10, 0.05, 0)
    factorization = override_factors(
        [{"name": "pos", "mask": [0, 1], "threshold": 0.5},
         {"name": "key", "mask": [2], "threshold": 0.5}], 3)
    parameters = {"k_max": 4, "restarts": 2, "seed": 0}
    subgoal_set, diagnostics = discover_with_diagnostics(demos, factorization,
                                                         parameters)

    assert [entry["name"] for entry in diagnostics["factors"]] \
        == ["pos", "key"]
    assert len(subgoal_set.per_factor(0)) >= 1
    key_subgoals = subgoal_set.per_factor(1)
    assert len(key_subgoals) >= 1
    # The has_key = 0 start state is dropped
    assert all(s.target()[0] > 0.5 for s in key_subgoals)
    for subgoal in subgoal_set.subgoals():
        assert subgoal.support() >= 0.4
        assert subgoal.threshold() >= 0.5
    ids = [s.subgoal_id() for s in subgoal_set.subgoals()]
    assert ids == list(range(len(ids)))

    assert discover(demos, factorization, parameters) == subgoal_set


@pytest.mark.tsc
def test_discover_file_order(setup_test, tmp_path):
    demos = generate_demos(keydoor_20(), 6, 0.05, 3)
    path = os.path.join(str(tmp_path), "demos.jsonl")
    save_demos(demos, path)
    with open(path, "r", encoding="utf-8") as f:
        lines = f.readlines()
    reversed_path = os.path.join(str(tmp_path), "reversed.jsonl")
    with open(reversed_path, "w", encoding="utf-8") as f:
        f.writelines(reversed(lines))
    shutil.copyfile(path + ".meta.json", reversed_path + ".meta.json")
    reordered = load_demos(reversed_path)
    assert [traj.traj_id() for traj in reordered] \
        == [traj.traj_id() for traj in reversed(demos.trajectories())]

    factorization = identify_factors(demos)
    assert identify_factors(reordered) == factorization
    parameters = {"k_max": 4, "restarts": 2, "seed": 1}
    subgoal_set, diagnostics = discover_with_diagnostics(
        demos, factorization, parameters)
    assert discover_with_diagnostics(reordered, factorization,
                                     parameters) \
        == (subgoal_set, diagnostics)


@pytest.mark.tsc
def test_discover_two_corners(setup_test):
    # Right along the top row, down the x = 6 column, then right to the goal
    env = parse_map("S......####\n"
                    "######.####\n"
                    "######.####\n"
                    "######.####\n"
                    "######....G\n")
    demos = generate_demos(env, 15, 0.0, 0)
    factorization = override_factors([{"name": "x+y", "mask": [0, 1]}], 2)
    subgoal_set, diagnostics = discover_with_diagnostics(
        demos, factorization, {"seed": 0})

    targets = [subgoal.target() for subgoal in subgoal_set.subgoals()]
    assert np.allclose(targets, [(6.0, 0.0), (6.0, 4.0), (10.0, 4.0)])
    assert all(subgoal.support() == 1.0
               for subgoal in subgoal_set.subgoals())
    assert subgoal_set.subgoals()[-1].contains(env.goal_cell())
    switch_points = diagnostics["factors"][0]["switch_points"]
    assert len(switch_points) == 3 * len(demos)


@pytest.mark.tsc
def test_discover_dimension_mismatch(setup_test):
    demos = switch_demos(2)
    factorization = override_factors([{"name": "x", "mask": [0, 1]}], 2)
    with pytest.raises(DiscoveryException) as e:
        discover(demos, factorization)
    assert e.value.stage == "config"
