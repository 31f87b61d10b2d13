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

from .common import info

from collections import namedtuple
import numpy as np

__all__ = \
    [
        "HrlException",

        "CONTINUE",
        "EPISODE_END",
        "NONE",
        "SUBGOAL_REACHED",
        "TIMEOUT",

        "AbstractMdp",
        "OptionExecution",
        "SubgoalOption",
        "Transition",

        "abstract_state",
        "abstract_state_key",
        "accumulate_meta_reward",
        "initial_abstract_state",
        "initiation_allowed",
        "intrinsic_reward",
        "termination_check"
    ]


class HrlException(Exception):
    pass


NONE = None

SUBGOAL_REACHED = "SUBGOAL_REACHED"
TIMEOUT = "TIMEOUT"
EPISODE_END = "EPISODE_END"
CONTINUE = "CONTINUE"

_OUTCOMES = (SUBGOAL_REACHED, TIMEOUT, EPISODE_END)

Transition = namedtuple(
    "Transition",
    ["state", "action", "next_state", "env_reward", "intrinsic_reward"])


def initial_abstract_state(subgoal_set):
    return tuple(NONE for _ in subgoal_set.factorization())


def abstract_state_key(s_mu):
    """
    Canonical string for an abstract state: comma-joined subgoal indices, with
    "-" for NONE.
    """

    return ",".join("-" if entry is NONE else f"{entry:d}" for entry in s_mu)


def abstract_state(env_features, previous, subgoal_set):
    """
    Update an abstract state. For each factor, if the masked features lie
    within threshold of one of its subgoals, the entry becomes the index of
    the nearest such subgoal (ties going to the lowest subgoal_id).
    Otherwise the previous entry is kept.
    """

    factorization = subgoal_set.factorization()
    env_features = np.asarray(env_features, dtype=np.float64)
    if env_features.shape != (factorization.feature_dim(),):
        raise HrlException("Feature dimension mismatch")
    if len(previous) != len(factorization):
        raise HrlException("Abstract state dimension mismatch")

    entries = list(previous)
    for factor in factorization:
        best = None
        for index, subgoal in enumerate(
                subgoal_set.per_factor(factor.factor_id())):
            distance = subgoal.distance(env_features)
            if distance <= subgoal.threshold():
                key = (distance, subgoal.subgoal_id())
                if best is None or key < best[0]:
                    best = (key, index)
        if best is not None:
            entries[factor.factor_id()] = best[1]
    return tuple(entries)


class SubgoalOption:
    """
    Option terminating on a subgoal region.

    Arguments:

    option_id  Option identifier, equal to the subgoal_id.
    subgoal    The Subgoal.
    index      Position of the subgoal within its factor's subgoal list.
    timeout    Maximum number of environment steps per execution.
    policy     (Optional) Handle to a low-level learner.
    """

    def __init__(self, option_id, subgoal, index, timeout=1000, policy=None):
        if timeout < 1:
            raise HrlException("Require timeout >= 1")
        self._option_id = int(option_id)
        self._subgoal = subgoal
        self._index = int(index)
        self._timeout = int(timeout)
        self._policy = policy

    def option_id(self):
        return self._option_id

    def subgoal(self):
        return self._subgoal

    def factor_id(self):
        return self._subgoal.factor_id()

    def index(self):
        return self._index

    def name(self):
        return self._subgoal.name()

    def timeout(self):
        return self._timeout

    def policy(self):
        return self._policy

    def set_policy(self, policy):
        self._policy = policy


def initiation_allowed(option, s_mu):
    """
    An option may start anywhere except where its own subgoal is the achieved
    entry of its factor.
    """

    return s_mu[option.factor_id()] != option.index()


def termination_check(option, env_features, steps_in_option, episode_done):
    """
    SUBGOAL_REACHED if the subgoal region is reached (checked first), else
    EPISODE_END if the episode is done, else TIMEOUT if the option has run for
    its timeout, else CONTINUE.
    """

    if steps_in_option < 0:
        raise HrlException("Invalid step count")
    if option.subgoal().contains(env_features):
        return SUBGOAL_REACHED
    elif episode_done:
        return EPISODE_END
    elif steps_in_option >= option.timeout():
        return TIMEOUT
    else:
        return CONTINUE


def intrinsic_reward(option, s_features, s2_features, gamma, bonus=10.0):
    """
    Potential-based shaping toward the option's subgoal, with potential
    phi(s) = -d(s), plus bonus on arriving in the subgoal region:

        gamma phi(s') - phi(s) + bonus 1[d(s') <= threshold].
    """

    subgoal = option.subgoal()
    distance = subgoal.distance(s_features)
    distance2 = subgoal.distance(s2_features)
    reward = -gamma * distance2 + distance
    if distance2 <= subgoal.threshold():
        reward += bonus
    return reward


def accumulate_meta_reward(partial, t, r, gamma):
    if t < 0:
        raise HrlException("Invalid step index")
    return partial + (gamma ** t) * r


class OptionExecution:
    """
    Record of one call-and-return option execution.
    """

    def __init__(self, option_id, start_abstract, end_abstract, duration,
                 meta_reward, outcome, transitions=()):
        if outcome not in _OUTCOMES:
            raise HrlException(f"Invalid outcome: {outcome!r}")
        if duration < 1:
            raise HrlException("Invalid duration")
        transitions = tuple(transitions)
        if len(transitions) not in (0, duration):
            raise HrlException("Transition count does not match duration")

        self._option_id = int(option_id)
        self._start_abstract = tuple(start_abstract)
        self._end_abstract = tuple(end_abstract)
        self._duration = int(duration)
        self._meta_reward = float(meta_reward)
        self._outcome = outcome
        self._transitions = transitions

    def option_id(self):
        return self._option_id

    def start_abstract(self):
        return self._start_abstract

    def end_abstract(self):
        return self._end_abstract

    def duration(self):
        return self._duration

    def meta_reward(self):
        return self._meta_reward

    def outcome(self):
        return self._outcome

    def transitions(self):
        return self._transitions

    def recompute_meta_reward(self, gamma):
        """
        Discounted sum of the logged environmental rewards.
        """

        if len(self._transitions) == 0:
            raise HrlException("Transitions not recorded")
        return sum((gamma ** k) * transition.env_reward
                   for k, transition in enumerate(self._transitions))

    def to_dict(self):
        return {"option_id": self._option_id,
                "start_abstract": abstract_state_key(self._start_abstract),
                "end_abstract": abstract_state_key(self._end_abstract),
                "duration": self._duration,
                "meta_reward": self._meta_reward,
                "outcome": self._outcome}


class AbstractMdp:
    """
    The abstract MDP over subgoal options: one option per subgoal, abstract
    states recording the last achieved subgoal of each factor, and a discount
    gamma in (0, 1). The transition kernel is never estimated.

    Arguments:

    subgoal_set  The SubgoalSet.
    gamma        Discount.
    timeout      Option timeout, in environment steps.
    """

    def __init__(self, subgoal_set, gamma=0.99, timeout=1000):
        if gamma <= 0.0 or gamma >= 1.0:
            raise HrlException("Require 0 < gamma < 1")
        options = []
        for factor in subgoal_set.factorization():
            for index, subgoal in enumerate(
                    subgoal_set.per_factor(factor.factor_id())):
                options.append(SubgoalOption(subgoal.subgoal_id(), subgoal,
                                             index, timeout=timeout))
        options.sort(key=lambda option: option.option_id())

        self._subgoal_set = subgoal_set
        self._gamma = float(gamma)
        self._timeout = int(timeout)
        self._options = tuple(options)
        self._option_map = {option.option_id(): option for option in options}

    def subgoal_set(self):
        return self._subgoal_set

    def factorization(self):
        return self._subgoal_set.factorization()

    def gamma(self):
        return self._gamma

    def timeout(self):
        return self._timeout

    def options(self):
        return self._options

    def option_ids(self):
        return [option.option_id() for option in self._options]

    def option(self, option_id):
        try:
            return self._option_map[option_id]
        except KeyError:
            raise HrlException(f"Unknown option: {option_id!r}")

    def initial_abstract_state(self):
        return initial_abstract_state(self._subgoal_set)

    def abstract_state(self, env_features, previous):
        return abstract_state(env_features, previous, self._subgoal_set)

    def allowed_options(self, s_mu):
        return [option.option_id() for option in self._options
                if initiation_allowed(option, s_mu)]

    def option_for(self, factor_id, index):
        for option in self._options:
            if option.factor_id() == factor_id and option.index() == index:
                return option
        raise HrlException("No option for subgoal")

    def info(self):
        info("Abstract MDP status:")
        info(f"  Discount: {self._gamma:.6g}")
        info(f"  Option timeout: {self._timeout:d}")
        for factor in self.factorization():
            subgoals = self._subgoal_set.per_factor(factor.factor_id())
            info(f"  Factor {factor.factor_id():d} ({factor.name():s}), "
                 f"mask {list(factor.mask())!r}: "
                 f"{len(subgoals):d} subgoal(s)")
            for subgoal in subgoals:
                target = ", ".join(f"{x:.6g}" for x in subgoal.target())
                info(f"    Option {subgoal.subgoal_id():d} "
                     f"({subgoal.name():s}): target [{target:s}], "
                     f"threshold {subgoal.threshold():.6g}, "
                     f"support {subgoal.support():.3f}")
