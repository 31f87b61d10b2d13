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

from collections import deque
import numpy as np
import os

__all__ = \
    [
        "EnvironmentException",

        "UP",
        "DOWN",
        "LEFT",
        "RIGHT",

        "Environment",
        "GridWorld",
        "KeyDoorGrid",
        "MazeGrid",

        "format_map",
        "keydoor_20",
        "load_map",
        "make_env",
        "maze_25",
        "parse_map"
    ]


class EnvironmentException(Exception):
    pass


UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
_MOVES = ((0, -1), (0, 1), (-1, 0), (1, 0))


class Environment:
    """
    Episodic environment with a finite action set and a real feature vector
    observation. reset(seed) followed by a fixed action sequence reproduces
    the same trajectory.
    """

    def name(self):
        return type(self).__name__

    def action_count(self):
        raise EnvironmentException("Method not overridden")

    def feature_dim(self):
        return len(self.feature_names())

    def feature_names(self):
        raise EnvironmentException("Method not overridden")

    def reset(self, seed=None):
        raise EnvironmentException("Method not overridden")

    def step(self, action):
        raise EnvironmentException("Method not overridden")

    def features(self):
        raise EnvironmentException("Method not overridden")


class GridWorld(Environment):
    """
    A 4-connected grid. Cells are (x, y) with y growing downward. Moves into
    walls or out of bounds leave the agent in place.

    Arguments:

    width, height  Grid dimensions.
    walls          Iterable of wall cells.
    start          Start cell.
    step_budget    Episode length cap. The episode ends (with no additional
                   reward) on the step at which the cap is reached.
    slip           (Optional) Probability that the chosen action is replaced
                   by a uniformly random action.
    name           (Optional) Environment name.
    """

    def __init__(self, width, height, walls, start, step_budget, slip=0.0,
                 name=None):
        if width < 1 or height < 1:
            raise EnvironmentException("Invalid grid dimensions")
        if step_budget < 1:
            raise EnvironmentException("Require a positive step budget")
        if slip < 0.0 or slip >= 1.0:
            raise EnvironmentException("Invalid slip probability")

        self._width = int(width)
        self._height = int(height)
        self._walls = frozenset((int(x), int(y)) for x, y in walls)
        self._start = (int(start[0]), int(start[1]))
        self._step_budget = int(step_budget)
        self._slip = float(slip)
        self._name = name
        self._distance_maps = {}

        if not self.is_free(self._start):
            raise EnvironmentException("Start must be an in-bounds non-wall "
                                       "cell")

        self._rng = None
        self._position = None
        self._steps = 0
        self._done = True

    def name(self):
        return type(self).__name__ if self._name is None else self._name

    def width(self):
        return self._width

    def height(self):
        return self._height

    def walls(self):
        return self._walls

    def start(self):
        return self._start

    def step_budget(self):
        return self._step_budget

    def slip(self):
        return self._slip

    def diameter(self):
        return self._width + self._height - 2

    def action_count(self):
        return len(_MOVES)

    def position(self):
        return self._position

    def steps(self):
        return self._steps

    def done(self):
        return self._done

    def in_bounds(self, cell):
        x, y = cell
        return 0 <= x < self._width and 0 <= y < self._height

    def is_free(self, cell):
        return self.in_bounds(cell) and cell not in self._walls

    def _blocked(self, cell, state):
        return not self.is_free(cell)

    def agent_state(self):
        return None

    def move(self, cell, action, state=None):
        """
        The cell reached by taking action from cell, ignoring slip. state is
        any extra agent state affecting passability (the key for KeyDoorGrid).
        """

        if action not in range(len(_MOVES)):
            raise EnvironmentException(f"Invalid action: {action!r}")
        dx, dy = _MOVES[action]
        next_cell = (cell[0] + dx, cell[1] + dy)
        if self._blocked(next_cell, state):
            return cell
        return next_cell

    def peek(self, action):
        return self.move(self._position, action, self.agent_state())

    def distance_map(self, target, state=None):
        """
        Breadth-first shortest-path distances to target over cells passable
        with the given agent state. The target itself is always passable.
        """

        target = (int(target[0]), int(target[1]))
        key = (target, state)
        if key not in self._distance_maps:
            if not self.in_bounds(target) or target in self._walls:
                raise EnvironmentException("Target must be an in-bounds "
                                           "non-wall cell")
            distances = {target: 0}
            queue = deque([target])
            while len(queue) > 0:
                cell = queue.popleft()
                for dx, dy in _MOVES:
                    neighbour = (cell[0] + dx, cell[1] + dy)
                    if neighbour in distances \
                            or self._blocked(neighbour, state):
                        continue
                    distances[neighbour] = distances[cell] + 1
                    queue.append(neighbour)
            self._distance_maps[key] = distances
        return self._distance_maps[key]

    def reset(self, seed=None):
        self._rng = np.random.default_rng(seed)
        self._position = self._start
        self._steps = 0
        self._done = False
        self._reset_state()
        return self.features()

    def _reset_state(self):
        pass

    def step(self, action):
        """
        Take one action. Returns (features, reward, done).
        """

        if self._done:
            raise EnvironmentException("Episode finished -- call reset")
        if action not in range(len(_MOVES)):
            raise EnvironmentException(f"Invalid action: {action!r}")
        if self._slip > 0.0 and self._rng.random() < self._slip:
            action = int(self._rng.integers(len(_MOVES)))

        self._position = self.peek(action)
        self._steps += 1
        reward, done = self._enter(self._position)
        if not done and self._steps >= self._step_budget:
            done = True
        self._done = done

        return self.features(), reward, done

    def _enter(self, cell):
        raise EnvironmentException("Method not overridden")

    def cell_char(self, cell):
        return "#" if cell in self._walls else "."


class KeyDoorGrid(GridWorld):
    """
    Grid with a key and a locked door. Picking up the key yields key_reward
    once. The door is impassable without the key, and entering it with the
    key yields door_reward and ends the episode.

    Features: [x, y, has_key].
    """

    def __init__(self, width, height, walls, start, key_cell, door_cell,
                 step_budget=1000, slip=0.0, name=None, key_reward=100.0,
                 door_reward=300.0):
        super().__init__(width, height, walls, start, step_budget, slip=slip,
                         name=name)
        self._key_cell = (int(key_cell[0]), int(key_cell[1]))
        self._door_cell = (int(door_cell[0]), int(door_cell[1]))
        self._key_reward = float(key_reward)
        self._door_reward = float(door_reward)
        self._has_key = False

        cells = {self._start, self._key_cell, self._door_cell}
        if len(cells) != 3:
            raise EnvironmentException("Start, key, and door cells must be "
                                       "distinct")
        for cell in cells:
            if not self.is_free(cell):
                raise EnvironmentException("Start, key, and door cells must "
                                           "be in-bounds non-wall cells")
        if self._start not in self.distance_map(self._key_cell, False):
            raise EnvironmentException("Key unreachable from start")
        if self._key_cell not in self.distance_map(self._door_cell, True):
            raise EnvironmentException("Door unreachable from key")

    def key_cell(self):
        return self._key_cell

    def door_cell(self):
        return self._door_cell

    def key_reward(self):
        return self._key_reward

    def door_reward(self):
        return self._door_reward

    def has_key(self):
        return self._has_key

    def feature_names(self):
        return ["x", "y", "has_key"]

    def features(self):
        x, y = self._position
        return np.array([x, y, 1.0 if self._has_key else 0.0],
                        dtype=np.float64)

    def default_script(self):
        return [self._key_cell, self._door_cell]

    def agent_state(self):
        return self._has_key

    def _blocked(self, cell, state):
        if not self.is_free(cell):
            return True
        return cell == self._door_cell and not state

    def distance_map(self, target, state=None):
        if state is None:
            state = tuple(target) == self._door_cell
        return super().distance_map(target, bool(state))

    def _reset_state(self):
        self._has_key = False

    def _enter(self, cell):
        if cell == self._key_cell and not self._has_key:
            self._has_key = True
            return self._key_reward, False
        elif cell == self._door_cell and self._has_key:
            return self._door_reward, True
        else:
            return 0.0, False

    def cell_char(self, cell):
        if cell == self._start:
            return "S"
        elif cell == self._key_cell:
            return "K"
        elif cell == self._door_cell:
            return "D"
        return super().cell_char(cell)


class MazeGrid(GridWorld):
    """
    Grid maze with a single goal. Entering the goal yields goal_reward and
    ends the episode.

    Features: [x, y].
    """

    def __init__(self, width, height, walls, start, goal_cell,
                 step_budget=1500, slip=0.0, name=None, goal_reward=1.0):
        super().__init__(width, height, walls, start, step_budget, slip=slip,
                         name=name)
        self._goal_cell = (int(goal_cell[0]), int(goal_cell[1]))
        self._goal_reward = float(goal_reward)

        if self._goal_cell == self._start:
            raise EnvironmentException("Start and goal must be distinct")
        if not self.is_free(self._goal_cell):
            raise EnvironmentException("Goal must be an in-bounds non-wall "
                                       "cell")
        if self._start not in self.distance_map(self._goal_cell):
            raise EnvironmentException("Goal unreachable from start")

    def goal_cell(self):
        return self._goal_cell

    def goal_reward(self):
        return self._goal_reward

    def shortest_path_length(self):
        return self.distance_map(self._goal_cell)[self._start]

    def feature_names(self):
        return ["x", "y"]

    def features(self):
        x, y = self._position
        return np.array([x, y], dtype=np.float64)

    def default_script(self):
        return [self._goal_cell]

    def _enter(self, cell):
        if cell == self._goal_cell:
            return self._goal_reward, True
        return 0.0, False

    def cell_char(self, cell):
        if cell == self._start:
            return "S"
        elif cell == self._goal_cell:
            return "G"
        return super().cell_char(cell)


def keydoor_20(slip=0.0, step_budget=1000):
    """
    20x20 key/door grid. A wall at x = 10 with a single gap at y = 3 separates
    the start and key (left) from the door (right).
    """

    walls = [(10, y) for y in range(20) if y != 3]
    return KeyDoorGrid(20, 20, walls, start=(1, 18), key_cell=(3, 2),
                       door_cell=(18, 18), step_budget=step_budget, slip=slip,
                       name="keydoor-20")


def maze_25(slip=0.0, step_budget=1500):
    """
    25x25 S-shaped corridor maze. Walls at y = 16 (open for x < 4) and y = 8
    (open for x > 20) force the path from the bottom-right start to the
    top-left goal through both openings.
    """

    walls = [(x, 16) for x in range(4, 25)] + [(x, 8) for x in range(0, 21)]
    return MazeGrid(25, 25, walls, start=(23, 23), goal_cell=(1, 1),
                    step_budget=step_budget, slip=slip, name="maze-25")


def parse_map(text, name=None, step_budget=None, slip=0.0):
    """
    Build an environment from an ASCII map: '#' wall, '.' floor, 'S' start,
    'K' key, 'D' door, 'G' goal. Maps with a key and a door give a
    KeyDoorGrid, maps with a goal give a MazeGrid.
    """

    rows = [row.rstrip("\r") for row in text.split("\n")]
    rows = [row for row in rows if len(row.strip()) > 0]
    if len(rows) == 0:
        raise EnvironmentException("Empty map")
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise EnvironmentException("Map rows must have equal length")

    walls = []
    marks = {}
    for y, row in enumerate(rows):
        for x, c in enumerate(row):
            if c == "#":
                walls.append((x, y))
            elif c in "SKDG":
                if c in marks:
                    raise EnvironmentException(f"Duplicate '{c:s}' in map")
                marks[c] = (x, y)
            elif c != ".":
                raise EnvironmentException(f"Invalid map character "
                                           f"'{c:s}' at ({x:d}, {y:d})")
    if "S" not in marks:
        raise EnvironmentException("Map has no start")

    kwargs = {"name": name, "slip": slip}
    if step_budget is not None:
        kwargs["step_budget"] = step_budget
    if "K" in marks and "D" in marks:
        if "G" in marks:
            raise EnvironmentException("Map cannot have both a goal and a "
                                       "key/door pair")
        return KeyDoorGrid(width, len(rows), walls, marks["S"], marks["K"],
                           marks["D"], **kwargs)
    elif "G" in marks:
        if "K" in marks or "D" in marks:
            raise EnvironmentException("Map key requires a door")
        return MazeGrid(width, len(rows), walls, marks["S"], marks["G"],
                        **kwargs)
    else:
        raise EnvironmentException("Map needs a goal or a key/door pair")


def load_map(path, step_budget=None, slip=0.0):
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return parse_map(text, name=os.path.basename(path),
                     step_budget=step_budget, slip=slip)


def format_map(env):
    return "\n".join("".join(env.cell_char((x, y))
                             for x in range(env.width()))
                     for y in range(env.height())) + "\n"


_named_envs = {"keydoor-20": keydoor_20,
               "maze-25": maze_25}


def make_env(name, slip=0.0, step_budget=None):
    """
    A built-in environment by name ("keydoor-20", "maze-25"), or an
    environment loaded from an ASCII map file.
    """

    kwargs = {"slip": slip}
    if step_budget is not None:
        kwargs["step_budget"] = step_budget
    if name in _named_envs:
        return _named_envs[name](**kwargs)
    elif os.path.isfile(name):
        return load_map(name, **kwargs)
    else:
        raise EnvironmentException(f"Unknown environment: {name:s}")
