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


@pytest.mark.hrl
def test_abstract_state(setup_test):
    subgoal_set = keydoor_subgoal_set(small_keydoor())
    s_mu = initial_abstract_state(subgoal_set)
    assert s_mu == (NONE, NONE)
    assert abstract_state_key(s_mu) == "-,-"

    s_mu = abstract_state([0.0, 0.0, 0.0], s_mu, subgoal_set)
    assert s_mu == (NONE, NONE)
    s_mu = abstract_state([1.0, 2.0, 1.0], s_mu, subgoal_set)
    assert s_mu == (0, 0)
    assert abstract_state_key(s_mu) == "0,0"
    # Entries persist outside the subgoal regions
    s_mu = abstract_state([4.0, 2.0, 1.0], s_mu, subgoal_set)
    assert s_mu == (0, 0)
    s_mu = abstract_state([6.0, 3.0, 1.0], s_mu, subgoal_set)
    assert s_mu == (1, 0)

    with pytest.raises(HrlException):
        abstract_state([0.0, 0.0], s_mu, subgoal_set)


@pytest.mark.hrl
def test_abstract_state_nearest(setup_test):
    subgoal_set = position_subgoal_set([(0.0, 0.0), (1.0, 0.0), (0.5, 0.0)],
                                       threshold=1.0)
    s_mu = initial_abstract_state(subgoal_set)
    assert abstract_state([0.9, 0.0], s_mu, subgoal_set) == (1,)
    assert abstract_state([0.4, 0.0], s_mu, subgoal_set) == (2,)
    # Equidistant subgoals resolve to the lowest subgoal_id
    assert abstract_state([0.25, 0.0], s_mu, subgoal_set) == (0,)


@pytest.mark.hrl
def test_initiation(setup_test):
    mdp = AbstractMdp(keydoor_subgoal_set(small_keydoor()))
    assert mdp.option_ids() == [0, 1, 2]
    assert mdp.allowed_options((NONE, NONE)) == [0, 1, 2]
    assert mdp.allowed_options((0, 0)) == [1]
    assert mdp.allowed_options((1, 0)) == [0]
    assert not initiation_allowed(mdp.option(2), (NONE, 0))
    assert mdp.option_for(0, 1).option_id() == 1
    assert mdp.option_for(1, 0).name() == "has_key:0"
    with pytest.raises(HrlException):
        mdp.option(7)
    with pytest.raises(HrlException):
        mdp.option_for(1, 1)


@pytest.mark.hrl
def test_termination_check(setup_test):
    subgoal_set = position_subgoal_set([(2.0, 0.0)])
    option = SubgoalOption(0, subgoal_set.subgoal(0), 0, timeout=5)
    assert termination_check(option, [2.0, 0.0], 5, True) == SUBGOAL_REACHED
    assert termination_check(option, [0.0, 0.0], 5, True) == EPISODE_END
    assert termination_check(option, [0.0, 0.0], 5, False) == TIMEOUT
    assert termination_check(option, [0.0, 0.0], 4, False) == CONTINUE
    with pytest.raises(HrlException):
        termination_check(option, [0.0, 0.0], -1, False)
    with pytest.raises(HrlException):
        SubgoalOption(0, subgoal_set.subgoal(0), 0, timeout=0)


@pytest.mark.hrl
def test_intrinsic_reward(setup_test):
    subgoal_set = position_subgoal_set([(3.0, 0.0)])
    option = SubgoalOption(0, subgoal_set.subgoal(0), 0)
    gamma = 0.9
    r = intrinsic_reward(option, [0.0, 0.0], [1.0, 0.0], gamma, bonus=10.0)
    assert abs(r - (-gamma * 2.0 + 3.0)) < 1.0e-12
    r = intrinsic_reward(option, [2.0, 0.0], [3.0, 0.0], gamma, bonus=10.0)
    assert abs(r - 11.0) < 1.0e-12
    r = intrinsic_reward(option, [2.0, 0.0], [3.0, 0.0], gamma, bonus=0.0)
    assert abs(r - 1.0) < 1.0e-12

    # Shaping telescopes along any path ending in the region
    path = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0),
            (3.0, 0.0)]
    total = sum((gamma ** k) * intrinsic_reward(option, a, b, gamma,
                                                bonus=0.0)
                for k, (a, b) in enumerate(zip(path[:-1], path[1:])))
    assert abs(total - 3.0) < 1.0e-12


@pytest.mark.hrl
def test_meta_reward(setup_test):
    gamma = 0.5
    r_mu = 0.0
    for t, r in enumerate([1.0, 0.0, 4.0]):
        r_mu = accumulate_meta_reward(r_mu, t, r, gamma)
    assert r_mu == 2.0
    with pytest.raises(HrlException):
        accumulate_meta_reward(0.0, -1, 1.0, gamma)

    transitions = [Transition((0.0,), 0, (1.0,), r, 0.0)
                   for r in [1.0, 0.0, 4.0]]
    execution = OptionExecution(0, (NONE,), (0,), 3, r_mu, SUBGOAL_REACHED,
                                transitions=transitions)
    assert execution.recompute_meta_reward(gamma) == r_mu
    assert execution.to_dict() == {"option_id": 0, "start_abstract": "-",
                                   "end_abstract": "0", "duration": 3,
                                   "meta_reward": 2.0,
                                   "outcome": SUBGOAL_REACHED}


@pytest.mark.hrl
def test_option_execution_validation(setup_test):
    with pytest.raises(HrlException):
        OptionExecution(0, (NONE,), (NONE,), 1, 0.0, CONTINUE)
    with pytest.raises(HrlException):
        OptionExecution(0, (NONE,), (NONE,), 0, 0.0, TIMEOUT)
    with pytest.raises(HrlException):
        OptionExecution(0, (NONE,), (NONE,), 2, 0.0, TIMEOUT,
                        transitions=[Transition((0.0,), 0, (0.0,), 0.0,
                                                0.0)])
    execution = OptionExecution(0, (NONE,), (NONE,), 2, 0.0, TIMEOUT)
    with pytest.raises(HrlException):
        execution.recompute_meta_reward(0.9)


@pytest.mark.hrl
def test_abstract_mdp(setup_test):
    subgoal_set = keydoor_subgoal_set(small_keydoor())
    with pytest.raises(HrlException):
        AbstractMdp(subgoal_set, gamma=1.0)
    with pytest.raises(HrlException):
        AbstractMdp(subgoal_set, gamma=0.0)
    mdp = AbstractMdp(subgoal_set, gamma=0.95, timeout=50)
    assert mdp.gamma() == 0.95
    assert mdp.timeout() == 50
    assert all(option.timeout() == 50 for option in mdp.options())
    assert [option.index() for option in mdp.options()] == [0, 1, 0]
    assert mdp.initial_abstract_state() == (NONE, NONE)
    assert mdp.abstract_state(np.array([1.0, 2.0, 0.0]),
                              mdp.initial_abstract_state()) == (0, NONE)
    mdp.info()
