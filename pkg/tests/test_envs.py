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
import pytest


@pytest.mark.envs
def test_keydoor_20_layout(setup_test):
    env = keydoor_20()
    assert env.name() == "keydoor-20"
    assert (env.width(), env.height()) == (20, 20)
    assert env.feature_names() == ["x", "y", "has_key"]
    assert env.action_count() == 4
    assert env.diameter() == 38

    features = env.reset(0)
    assert np.array_equal(features, [1.0, 18.0, 0.0])
    assert (10, 3) not in env.walls()
    assert all((10, y) in env.walls() for y in range(20) if y != 3)


@pytest.mark.envs
def test_keydoor_rewards(setup_test):
    env = small_keydoor()
    env.reset(0)

    # Start (0, 0), key (1, 2)
    _, reward, done = env.step(DOWN)
    assert (reward, done) == (0.0, False)
    _, reward, done = env.step(DOWN)
    assert (reward, done) == (0.0, False)
    features, reward, done = env.step(RIGHT)
    assert env.position() == (1, 2)
    assert np.array_equal(features, [1.0, 2.0, 1.0])
    assert (reward, done) == (100.0, False)

    # The key is collected once
    env.step(LEFT)
    _, reward, _ = env.step(RIGHT)
    assert reward == 0.0

    total = 0.0
    for action in [RIGHT] * 5 + [DOWN]:
        _, reward, done = env.step(action)
        total += reward
    assert env.position() == (6, 3)
    assert total == 300.0
    assert done

    with pytest.raises(EnvironmentException):
        env.step(UP)


@pytest.mark.envs
def test_keydoor_door_locked(setup_test):
    env = small_keydoor()
    env.reset(0)
    assert env.move((6, 2), DOWN, state=False) == (6, 2)
    assert env.move((6, 2), DOWN, state=True) == (6, 3)
    assert env.distance_map((6, 3))[(1, 2)] == 6
    assert env.distance_map((1, 2))[(0, 0)] == 3


@pytest.mark.envs
def test_step_budget(setup_test):
    env = small_keydoor(step_budget=3)
    env.reset(0)
    assert not env.step(UP)[2]
    assert not env.step(UP)[2]
    _, reward, done = env.step(UP)
    assert reward == 0.0
    assert done
    assert env.steps() == 3


@pytest.mark.envs
def test_invalid_action(setup_test):
    env = maze_25()
    env.reset(0)
    with pytest.raises(EnvironmentException):
        env.step(4)
    with pytest.raises(EnvironmentException):
        env.step(-1)


@pytest.mark.envs
def test_walls_block(setup_test):
    env = small_keydoor()
    env.reset(0)
    env.step(RIGHT)
    env.step(RIGHT)
    assert env.position() == (2, 0)
    env.step(RIGHT)
    assert env.position() == (2, 0)
    env.step(UP)
    assert env.position() == (2, 0)


@pytest.mark.envs
def test_maze_25(setup_test):
    env = maze_25()
    assert env.feature_names() == ["x", "y"]
    assert env.shortest_path_length() == 80
    assert np.array_equal(env.reset(0), [23.0, 23.0])


@pytest.mark.envs
def test_slip_determinism(setup_test):
    def rollout(seed):
        env = small_keydoor(slip=0.5)
        env.reset(seed)
        return [tuple(env.step(RIGHT)[0]) for _ in range(20)]

    assert rollout(3) == rollout(3)
    assert rollout(3) != rollout(4)


@pytest.mark.envs
def test_parse_map(setup_test):
    env = small_keydoor()
    assert isinstance(env, KeyDoorGrid)
    assert env.start() == (0, 0)
    assert env.key_cell() == (1, 2)
    assert env.door_cell() == (6, 3)
    assert format_map(env) == SMALL_KEYDOOR_MAP

    maze = parse_map("S..\n.#.\n..G\n")
    assert isinstance(maze, MazeGrid)
    assert maze.goal_cell() == (2, 2)
    assert maze.shortest_path_length() == 4
    assert format_map(parse_map(format_map(maze))) == format_map(maze)


@pytest.mark.envs
@pytest.mark.parametrize("text", ["S.x\n..G\n",
                                  "S.S\n..G\n",
                                  "...\n..G\n",
                                  "S..\n...\n",
                                  "S..\n..\n",
                                  "S#.\n#.G\n"])
def test_parse_map_errors(setup_test, text):
    with pytest.raises(EnvironmentException):
        parse_map(text)


@pytest.mark.envs
def test_make_env(setup_test, tmp_path):
    assert make_env("keydoor-20").name() == "keydoor-20"
    assert make_env("maze-25", step_budget=10).step_budget() == 10
    env = make_env(write_small_keydoor(str(tmp_path)))
    assert isinstance(env, KeyDoorGrid)
    with pytest.raises(EnvironmentException):
        make_env("no-such-env")
