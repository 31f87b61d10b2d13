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

from .demos import DemoSet, Step, Trajectory

import numpy as np

__all__ = \
    [
        "TestkitException",

        "SyntheticSlds",

        "generate_slds",
        "random_slds",
        "score_recovery"
    ]


class TestkitException(Exception):
    pass


class SyntheticSlds:
    """
    Parameters of a synthetic switching linear dynamical system with identity
    dynamics matrices:

        x_{t+1} = x_t + b_{z_{t+1}} + v_t,  v_t ~ N(0, sigma^2 I).

    Arguments:

    drifts     Regime drift vectors b_k, shape (K, d).
    sigma      Noise standard deviation.
    schedules  Switch times per trajectory. Trajectory i uses regime j on
               the transitions from x_t, schedules[i][j - 1] <= t <
               schedules[i][j], starting in regime 0. A schedule may list at
               most K - 1 switches. A single schedule is shared by all
               trajectories.
    seed       Seed for the noise.
    x0         (Optional) Initial state. Defaults to zero.
    """

    def __init__(self, drifts, sigma, schedules, seed, x0=None):
        drifts = np.array(drifts, dtype=np.float64)
        if len(drifts.shape) != 2 or drifts.shape[0] < 1 \
                or drifts.shape[1] < 1:
            raise TestkitException("Invalid drifts")
        if sigma < 0.0:
            raise TestkitException("Invalid noise standard deviation")
        schedules = [tuple(int(s) for s in schedule)
                     for schedule in schedules]
        if len(schedules) == 0:
            raise TestkitException("Invalid schedule")
        for schedule in schedules:
            if len(schedule) > drifts.shape[0] - 1:
                raise TestkitException("Invalid schedule: more switches "
                                       "than regimes")
            if any(s < 1 for s in schedule) \
                    or any(b <= a for a, b in zip(schedule[:-1],
                                                  schedule[1:])):
                raise TestkitException("Invalid schedule: switch times must "
                                       "be positive and strictly increasing")
        if x0 is None:
            x0 = np.zeros(drifts.shape[1], dtype=np.float64)
        x0 = np.array(x0, dtype=np.float64)
        if x0.shape != (drifts.shape[1],):
            raise TestkitException("Invalid initial state")

        self._drifts = drifts
        self._sigma = float(sigma)
        self._schedules = schedules
        self._seed = seed
        self._x0 = x0

    def regime_count(self):
        return self._drifts.shape[0]

    def dim(self):
        return self._drifts.shape[1]

    def drifts(self):
        return self._drifts.copy()

    def sigma(self):
        return self._sigma

    def schedule(self, i):
        return self._schedules[i % len(self._schedules)]

    def seed(self):
        return self._seed

    def x0(self):
        return self._x0.copy()


def generate_slds(model, n_traj, T):
    """
    Simulate n_traj trajectories of length T. Returns a DemoSet (actions are
    all 0 apart from the final -1, rewards 0) and a dict mapping traj_id to
    the ground-truth switch times.
    """

    if n_traj < 1:
        raise TestkitException("Require at least one trajectory")
    rng = np.random.default_rng(model.seed())
    trajectories = []
    truth = {}
    for i in range(n_traj):
        schedule = model.schedule(i)
        if len(schedule) > 0 and T <= schedule[-1] + 1:
            raise TestkitException("Trajectory length must exceed the last "
                                   "switch time")
        traj_id = f"slds_{i:03d}"
        x = model.x0()
        states = [x]
        regime = 0
        for t in range(T - 1):
            while regime < len(schedule) and t >= schedule[regime]:
                regime += 1
            x = x + model.drifts()[regime] \
                + model.sigma() * rng.standard_normal(model.dim())
            states.append(x)
        steps = [Step(t, state, 0 if t < T - 1 else -1, 0.0, False)
                 for t, state in enumerate(states)]
        trajectories.append(Trajectory(traj_id, steps))
        truth[traj_id] = list(schedule)

    feature_names = [f"x{j:d}" for j in range(model.dim())]
    return DemoSet(trajectories, feature_names, 1), truth


def random_slds(seed, regimes=3, dim=3, separation=5.0, sigma=0.1,
                switches=(50, 100), jitter=5, n_traj=10):
    """
    A SyntheticSlds with random drift directions pairwise at least
    separation * sigma apart, and per-trajectory switch times jittered
    around a common schedule.
    """

    rng = np.random.default_rng(seed)
    length = separation * sigma
    while True:
        drifts = rng.standard_normal((regimes, dim))
        drifts *= length / np.linalg.norm(drifts, axis=1)[:, None]
        gaps = [np.linalg.norm(drifts[a] - drifts[b])
                for a in range(regimes) for b in range(a + 1, regimes)]
        if len(gaps) == 0 or min(gaps) >= length:
            break
    schedules = []
    for _ in range(n_traj):
        schedules.append(tuple(int(s + rng.integers(-jitter, jitter + 1))
                               for s in switches[:regimes - 1]))
    return SyntheticSlds(drifts, sigma, schedules,
                         int(rng.integers(np.iinfo(np.int32).max)))


def score_recovery(detected, truth, tol):
    """
    Greedy one-to-one matching of detected switch times to true switch times
    within +/- tol.

    Arguments:

    detected  Detected switch times, or SwitchPoint objects.
    truth     True switch times.
    tol       Matching tolerance, in steps.

    Returns (recall, precision). With no true switches recall is 1, and with
    no detections precision is 1.
    """

    if tol < 0:
        raise TestkitException("Require tol >= 0")
    detected = sorted(d.t() if hasattr(d, "t") else int(d) for d in detected)
    truth = sorted(int(t) for t in truth)

    candidates = sorted((abs(d - t), i, j)
                        for i, d in enumerate(detected)
                        for j, t in enumerate(truth)
                        if abs(d - t) <= tol)
    used_detected = set()
    used_truth = set()
    for _, i, j in candidates:
        if i not in used_detected and j not in used_truth:
            used_detected.add(i)
            used_truth.add(j)
    matched = len(used_truth)

    recall = 1.0 if len(truth) == 0 else matched / len(truth)
    precision = 1.0 if len(detected) == 0 else matched / len(detected)
    return recall, precision
