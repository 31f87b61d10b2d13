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

import numpy as np
import os
import pytest

__all__ = \
    [
        "SMALL_KEYDOOR_MAP",

        "keydoor_subgoal_set",
        "make_demo_set",
        "make_trajectory",
        "position_subgoal_set",
        "setup_test",
        "small_keydoor",
        "tmp_run_dir",
        "write_small_keydoor"
    ]

SMALL_KEYDOOR_MAP = ("S..#...\n"
                     "...#...\n"
                     ".K.....\n"
                     "...#..D\n")


@pytest.fixture
def setup_test():
    set_verbosity(True)

    np.random.seed(14012313)


@pytest.fixture
def tmp_run_dir(tmp_path):
    run_dir = os.path.join(str(tmp_path), "run")
    os.makedirs(run_dir)
    return run_dir


def make_trajectory(traj_id, features, done=False, rewards=None,
                    actions=None):
    features = [np.atleast_1d(np.array(x, dtype=np.float64))
                for x in features]
    T = len(features)
    if rewards is None:
        rewards = [0.0] * T
    if actions is None:
        actions = [0] * (T - 1)
    steps = [Step(t, features[t], actions[t] if t < T - 1 else -1,
                  rewards[t], done and t == T - 1)
             for t in range(T)]
    return Trajectory(traj_id, steps)


def make_demo_set(trajectories, feature_names=None, action_count=4):
    trajectories = list(trajectories)
    if feature_names is None:
        feature_names = [f"f{i:d}"
                         for i in range(trajectories[0].feature_dim())]
    return DemoSet(trajectories, feature_names, action_count)


def small_keydoor(step_budget=None, slip=0.0):
    return parse_map(SMALL_KEYDOOR_MAP, name="small-keydoor",
                     step_budget=step_budget, slip=slip)


def write_small_keydoor(directory):
    path = os.path.join(directory, "small-keydoor.map")
    with open(path, "w", encoding="utf-8") as f:
        f.write(SMALL_KEYDOOR_MAP)
    return path


def keydoor_subgoal_set(env, threshold=0.5):
    """
    Position subgoals at the key and the door, and a has_key subgoal.
    """

    factorization = override_factors(
        [{"name": "x+y", "mask": [0, 1], "threshold": threshold},
         {"name": "has_key", "mask": [2], "threshold": threshold}], 3)
    position = [Subgoal(0, 0, env.key_cell(), threshold, 1.0, (0, 1),
                        name="x+y:0"),
                Subgoal(1, 0, env.door_cell(), threshold, 1.0, (0, 1),
                        name="x+y:1")]
    key = [Subgoal(2, 1, (1.0,), threshold, 1.0, (2,), name="has_key:0")]
    return SubgoalSet(factorization, {0: position, 1: key}, seed=0)


def position_subgoal_set(targets, threshold=0.5):
    """
    Position subgoals for an environment with features [x, y].
    """

    factorization = override_factors(
        [{"name": "x+y", "mask": [0, 1], "threshold": threshold}], 2)
    subgoals = [Subgoal(i, 0, target, threshold, 1.0, (0, 1),
                        name=f"x+y:{i:d}")
                for i, target in enumerate(targets)]
    return SubgoalSet(factorization, {0: subgoals}, seed=0)
