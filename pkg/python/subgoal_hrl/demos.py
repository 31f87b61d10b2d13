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

from .common import canonical_real, format_real, info

import json
import numpy as np
import os

__all__ = \
    [
        "DemoException",

        "DemoSet",
        "Step",
        "Trajectory",

        "demo_seeds",
        "generate_demos",
        "load_demos",
        "save_demos",
        "scripted_demonstrate"
    ]


class DemoException(Exception):
    pass


class Step:
    """
    One time step of a trajectory. reward and done describe the arrival into
    this step's state, and action is the action taken from it (-1 on the final
    step).
    """

    def __init__(self, t, features, action, reward, done):
        t = int(t)
        if t < 0:
            raise DemoException("Invalid time index")
        try:
            features = tuple(canonical_real(x) for x in features)
            reward = canonical_real(reward)
        except ValueError:
            raise DemoException(f"Non-finite value at t={t:d}")
        if len(features) == 0:
            raise DemoException("Empty feature vector")
        action = int(action)
        if action < -1:
            raise DemoException(f"Invalid action at t={t:d}")

        self._t = t
        self._features = features
        self._action = action
        self._reward = reward
        self._done = bool(done)

    def t(self):
        return self._t

    def features(self):
        return np.array(self._features, dtype=np.float64)

    def action(self):
        return self._action

    def reward(self):
        return self._reward

    def done(self):
        return self._done

    def __eq__(self, other):
        return isinstance(other, Step) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def _key(self):
        return (self._t, self._features, self._action, self._reward,
                self._done)


class Trajectory:
    def __init__(self, traj_id, steps):
        steps = tuple(steps)
        if len(steps) == 0:
            raise DemoException(f"Trajectory {traj_id:s} is empty")
        for i, step in enumerate(steps):
            if step.t() != i:
                raise DemoException(f"Trajectory {traj_id:s}: time gap at "
                                    f"t={i:d}")
        d = len(steps[0]._features)
        for step in steps:
            if len(step._features) != d:
                raise DemoException(f"Trajectory {traj_id:s}: inconsistent "
                                    f"dimensions at t={step.t():d}")
        for step in steps[:-1]:
            if step.done():
                raise DemoException(f"Trajectory {traj_id:s}: done before "
                                    f"final step at t={step.t():d}")
            if step.action() < 0:
                raise DemoException(f"Trajectory {traj_id:s}: missing action "
                                    f"at t={step.t():d}")
        if steps[-1].action() != -1:
            raise DemoException(f"Trajectory {traj_id:s}: final action must "
                                f"be -1")

        self._traj_id = str(traj_id)
        self._steps = steps

    def traj_id(self):
        return self._traj_id

    def steps(self):
        return self._steps

    def __len__(self):
        return len(self._steps)

    def feature_dim(self):
        return len(self._steps[0]._features)

    def features(self):
        """
        Feature matrix, shape (T, d).
        """

        return np.array([step._features for step in self._steps],
                        dtype=np.float64)

    def actions(self):
        return [step.action() for step in self._steps]

    def rewards(self):
        return np.array([step.reward() for step in self._steps],
                        dtype=np.float64)

    def done(self):
        return self._steps[-1].done()

    def total_return(self):
        return float(self.rewards().sum())

    def __eq__(self, other):
        return isinstance(other, Trajectory) \
            and self._traj_id == other._traj_id \
            and self._steps == other._steps

    def __hash__(self):
        return hash((self._traj_id, self._steps))


class DemoSet:
    """
    A set of demonstration trajectories sharing a feature dimension and an
    action set.
    """

    def __init__(self, trajectories, feature_names, action_count):
        trajectories = tuple(trajectories)
        feature_names = tuple(str(name) for name in feature_names)
        action_count = int(action_count)
        if len(trajectories) == 0:
            raise DemoException("empty demo set")
        if action_count < 1:
            raise DemoException("Invalid action count")
        ids = set()
        for traj in trajectories:
            if traj.traj_id() in ids:
                raise DemoException(f"Duplicate trajectory identifier: "
                                    f"{traj.traj_id():s}")
            ids.add(traj.traj_id())
            if traj.feature_dim() != len(feature_names):
                raise DemoException(f"Trajectory {traj.traj_id():s}: "
                                    f"inconsistent dimensions")
            for step in traj.steps():
                if step.action() >= action_count:
                    raise DemoException(f"Trajectory {traj.traj_id():s}: "
                                        f"invalid action at t={step.t():d}")

        self._trajectories = trajectories
        self._feature_names = feature_names
        self._action_count = action_count

    def trajectories(self):
        return self._trajectories

    def __len__(self):
        return len(self._trajectories)

    def __iter__(self):
        return iter(self._trajectories)

    def feature_names(self):
        return list(self._feature_names)

    def feature_dim(self):
        return len(self._feature_names)

    def action_count(self):
        return self._action_count

    def canonical(self):
        """
        The same demonstrations ordered by traj_id.
        """

        return DemoSet(sorted(self._trajectories,
                              key=lambda traj: traj.traj_id()),
                       self._feature_names, self._action_count)

    def trajectory(self, traj_id):
        for traj in self._trajectories:
            if traj.traj_id() == traj_id:
                return traj
        raise DemoException(f"Trajectory not found: {traj_id:s}")

    def step_count(self):
        return sum(len(traj) for traj in self._trajectories)

    def returns(self):
        """
        Undiscounted return of each demonstration.
        """

        return [traj.total_return() for traj in self._trajectories]

    def __eq__(self, other):
        return isinstance(other, DemoSet) \
            and self._trajectories == other._trajectories \
            and self._feature_names == other._feature_names \
            and self._action_count == other._action_count

    def __hash__(self):
        return hash((self._trajectories, self._feature_names,
                     self._action_count))


def _meta_path(path):
    return f"{path:s}.meta.json"


def _step_line(traj_id, step):
    features = ", ".join(format_real(x) for x in step._features)
    return (f'{{"traj_id": {json.dumps(traj_id):s}, "t": {step.t():d}, '
            f'"features": [{features:s}], "action": {step.action():d}, '
            f'"reward": {format_real(step.reward()):s}, '
            f'"done": {"true" if step.done() else "false":s}}}\n')


def save_demos(demos, path):
    """
    Write a DemoSet as JSON Lines, one step per line, with a companion
    <path>.meta.json holding the feature names and the action count.
    """

    if not isinstance(demos, DemoSet) or len(demos) == 0:
        raise DemoException("empty demo set")

    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for traj in demos:
            for step in traj.steps():
                f.write(_step_line(traj.traj_id(), step))
    with open(_meta_path(path), "w", encoding="utf-8", newline="\n") as f:
        json.dump({"feature_names": demos.feature_names(),
                   "action_count": demos.action_count()}, f)
        f.write("\n")


def load_demos(path):
    if not os.path.isfile(path):
        raise DemoException(f"Demo file not found: {path:s}")
    if not os.path.isfile(_meta_path(path)):
        raise DemoException(f"Demo metadata not found: {_meta_path(path):s}")

    with open(_meta_path(path), "r", encoding="utf-8") as f:
        try:
            meta = json.load(f)
            feature_names = list(meta["feature_names"])
            action_count = int(meta["action_count"])
        except (ValueError, KeyError, TypeError):
            raise DemoException("Malformed demo metadata")

    records = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if len(line.strip()) == 0:
                continue
            try:
                record = json.loads(line)
                traj_id = record["traj_id"]
                if not isinstance(traj_id, str):
                    raise TypeError
                step = Step(record["t"], record["features"],
                            record["action"], record["reward"],
                            record["done"])
            except (ValueError, KeyError, TypeError, DemoException):
                raise DemoException(f"Malformed line {line_number:d}")
            if len(step._features) != len(feature_names):
                raise DemoException(f"Line {line_number:d}: inconsistent "
                                    f"dimensions")
            records.setdefault(traj_id, []).append(step)

    trajectories = []
    for traj_id, steps in records.items():
        steps = sorted(steps, key=lambda step: step.t())
        for i, step in enumerate(steps):
            if step.t() != i:
                raise DemoException(f"Trajectory {traj_id:s}: time gap at "
                                    f"t={i:d}")
        trajectories.append(Trajectory(traj_id, steps))
    return DemoSet(trajectories, feature_names, action_count)


def scripted_demonstrate(env, script, noise_eps, seed, traj_id=None):
    """
    Follow a list of waypoint cells, taking at each step the lowest-id action
    that reduces the shortest-path distance to the current waypoint, or a
    uniformly random action with probability noise_eps.

    Arguments:

    env        A GridWorld.
    script     Ordered waypoint cells.
    noise_eps  Random action probability, in [0, 0.5).
    seed       Seed for the environment and the demonstrator.
    traj_id    (Optional) Trajectory identifier.

    Returns a Trajectory which ends on episode end or on reaching the last
    waypoint.
    """

    if noise_eps < 0.0 or noise_eps >= 0.5:
        raise DemoException("Require 0 <= noise_eps < 0.5")
    script = [(int(cell[0]), int(cell[1])) for cell in script]
    if len(script) == 0:
        raise DemoException("Empty script")
    if traj_id is None:
        traj_id = f"demo_{seed:d}"

    rng = np.random.default_rng(seed)
    features = env.reset(seed)
    max_steps = 10 * env.diameter()
    steps = []
    reward, done = 0.0, False
    waypoint = 0
    while True:
        while waypoint < len(script) and env.position() == script[waypoint]:
            waypoint += 1
        if done or waypoint == len(script):
            break
        if len(steps) >= max_steps:
            raise DemoException(f"Waypoint {script[waypoint]!r} unreachable "
                                f"within {max_steps:d} steps")
        distances = env.distance_map(script[waypoint],
                                     state=env.agent_state())
        if env.position() not in distances:
            raise DemoException(f"Waypoint {script[waypoint]!r} unreachable")

        if rng.random() < noise_eps:
            action = int(rng.integers(env.action_count()))
        else:
            distance = distances[env.position()]
            for action in range(env.action_count()):
                if distances.get(env.peek(action), distance) < distance:
                    break
            else:
                raise DemoException("No distance reducing action")

        steps.append(Step(len(steps), features, action, reward, False))
        features, reward, done = env.step(action)
    steps.append(Step(len(steps), features, -1, reward, done))

    return Trajectory(traj_id, steps)


def demo_seeds(seed, n):
    """
    Per-demonstration seeds derived from a base seed.
    """

    return [int(s) for s in
            np.random.SeedSequence(seed).generate_state(n, dtype=np.uint32)]


def generate_demos(env, n, noise_eps, seed, script=None):
    """
    Generate a DemoSet of n scripted demonstrations. script defaults to the
    environment's waypoint list.
    """

    if n < 1:
        raise DemoException("Require at least one demonstration")
    if script is None:
        script = env.default_script()

    trajectories = []
    for i, demo_seed in enumerate(demo_seeds(seed, n)):
        trajectories.append(scripted_demonstrate(
            env, script, noise_eps, demo_seed, traj_id=f"demo_{i:03d}"))
    demos = DemoSet(trajectories, env.feature_names(), env.action_count())

    info(f"Generated {n:d} demonstrations, mean return "
         f"{np.mean(demos.returns()):.6g}")
    return demos
