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

from .common import format_real, json_dumps
from .hrl_core import abstract_state_key, initiation_allowed
from .schedules import LinearSchedule

from collections import Counter
import json
import numpy as np
import os

__all__ = \
    [
        "LearnerException",

        "FixedMeta",
        "MetaController",
        "OptionLearner",
        "QLearningMeta",
        "QTable",
        "ReuseMeta",
        "ReusePolicy",

        "extract_demo_meta_actions",
        "extract_demo_plan",
        "fixed_meta",
        "q_update",
        "reuse_select",
        "select_action",
        "state_key",
        "value_iteration"
    ]


class LearnerException(Exception):
    pass


def state_key(s):
    """
    Canonical string for a discrete state: strings are used as is, and
    sequences are comma-joined with "-" for None and reals at 9 significant
    digits.
    """

    if isinstance(s, str):
        return s

    def component(x):
        if x is None:
            return "-"
        elif isinstance(x, (int, np.integer)):
            return f"{int(x):d}"
        else:
            return format_real(x)

    return ",".join(component(x) for x in s)


class QTable:
    """
    Tabular action values. Missing entries read 0.

    Arguments:

    actions  The action set.
    alpha    Learning rate, in (0, 1].
    epsilon  Exploration probability, in [0, 1].
    gamma    Discount, in [0, 1].
    """

    def __init__(self, actions, alpha=0.1, epsilon=0.1, gamma=0.99):
        actions = tuple(int(a) for a in actions)
        if len(actions) == 0:
            raise LearnerException("Empty action set")
        if len(set(actions)) != len(actions):
            raise LearnerException("Duplicate actions")
        if gamma < 0.0 or gamma > 1.0:
            raise LearnerException("Invalid discount")

        self._actions = actions
        self._values = {}
        self._gamma = float(gamma)
        self.set_alpha(alpha)
        self.set_epsilon(epsilon)

    def actions(self):
        return self._actions

    def alpha(self):
        return self._alpha

    def set_alpha(self, alpha):
        if alpha <= 0.0 or alpha > 1.0:
            raise LearnerException("Invalid learning rate")
        self._alpha = float(alpha)

    def epsilon(self):
        return self._epsilon

    def set_epsilon(self, epsilon):
        if epsilon < 0.0 or epsilon > 1.0:
            raise LearnerException("Invalid exploration probability")
        self._epsilon = float(epsilon)

    def gamma(self):
        return self._gamma

    def __len__(self):
        return len(self._values)

    def q(self, s, a):
        return self._values.get((state_key(s), int(a)), 0.0)

    def set_q(self, s, a, value):
        value = float(value)
        if not np.isfinite(value):
            raise LearnerException("Non-finite action value")
        a = int(a)
        if a not in self._actions:
            raise LearnerException(f"Unknown action: {a:d}")
        self._values[(state_key(s), a)] = value

    def max_q(self, s):
        return max(self.q(s, a) for a in self._actions)

    def entries(self):
        """
        (state key, action, value) triples, sorted by state key and action.
        """

        return [(s, a, q) for (s, a), q in sorted(self._values.items())]

    def to_dict(self):
        return {"entries": [{"s": s, "a": a, "q": q}
                            for s, a, q in self.entries()],
                "actions": list(self._actions),
                "alpha": self._alpha, "epsilon": self._epsilon,
                "gamma": self._gamma}

    @classmethod
    def from_dict(cls, data):
        try:
            table = cls(data["actions"], alpha=data["alpha"],
                        epsilon=data["epsilon"], gamma=data["gamma"])
            for entry in data["entries"]:
                table.set_q(str(entry["s"]), entry["a"], entry["q"])
        except (KeyError, TypeError, ValueError):
            raise LearnerException("Malformed action value table")
        return table

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(json_dumps(self.to_dict()))

    @classmethod
    def load(cls, path):
        if not os.path.isfile(path):
            raise LearnerException(f"Checkpoint not found: {path:s}")
        with open(path, "r", encoding="utf-8") as f:
            try:
                data = json.load(f)
            except ValueError:
                raise LearnerException(f"Malformed checkpoint: {path:s}")
        return cls.from_dict(data)

    def __eq__(self, other):
        return isinstance(other, QTable) \
            and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json_dumps(self.to_dict()))


def q_update(table, s, a, r, s2, terminal, discount_pow=1):
    """
    Q(s, a) <- Q(s, a) + alpha (r + gamma^discount_pow max_a' Q(s', a')
                                - Q(s, a)),
    omitting the bootstrap term when terminal.
    """

    r = float(r)
    if not np.isfinite(r):
        raise LearnerException("Non-finite reward")
    if discount_pow < 1:
        raise LearnerException("Require discount_pow >= 1")
    target = r
    if not terminal:
        target += (table.gamma() ** discount_pow) * table.max_q(s2)
    value = table.q(s, a)
    table.set_q(s, a, value + table.alpha() * (target - value))


def select_action(table, s, allowed, rng):
    """
    Epsilon-greedy selection restricted to the allowed actions, breaking
    greedy ties uniformly at random.
    """

    allowed = sorted(int(a) for a in allowed)
    if len(allowed) == 0:
        raise LearnerException("Empty allowed action set")
    if rng.random() < table.epsilon():
        return allowed[int(rng.integers(len(allowed)))]
    values = np.array([table.q(s, a) for a in allowed], dtype=np.float64)
    maximizers = np.flatnonzero(values == values.max())
    return allowed[int(maximizers[int(rng.integers(len(maximizers)))])]


class ReusePolicy:
    """
    Probabilistic reuse of demonstrated meta actions, with a reuse probability
    decayed linearly from start to end over horizon meta decisions.
    """

    def __init__(self, demo_meta_actions, horizon, start=0.9, end=0.0):
        if start < 0.0 or start > 1.0 or end < 0.0 or end > 1.0:
            raise LearnerException("Reuse probabilities must lie in [0, 1]")
        if end > start:
            raise LearnerException("Reuse probability must not increase")
        self._demo_meta_actions = dict(demo_meta_actions)
        self._schedule = LinearSchedule(start, end, horizon)
        self._disabled = False

    def demo_meta_actions(self):
        return dict(self._demo_meta_actions)

    def demo_action(self, s_mu):
        return self._demo_meta_actions.get(tuple(s_mu), None)

    def reuse_prob(self):
        if self._disabled:
            return 0.0
        return min(max(self._schedule.value(), 0.0), 1.0)

    def decisions(self):
        return self._schedule.n()

    def advance(self):
        self._schedule.advance()

    def set_decisions(self, n):
        self._schedule.set_n(n)

    def disable(self):
        self._disabled = True


def reuse_select(reuse, table, s_mu, allowed, rng):
    """
    With probability reuse_prob, the demonstrated meta action for s_mu when it
    exists and is allowed. Otherwise select_action. The reuse schedule then
    advances by one decision.
    """

    option_id = None
    if rng.random() < reuse.reuse_prob():
        demo_action = reuse.demo_action(s_mu)
        if demo_action is not None and demo_action in allowed:
            option_id = demo_action
    if option_id is None:
        option_id = select_action(table, abstract_state_key(s_mu), allowed,
                                  rng)
    reuse.advance()
    return option_id


def _fixed_progress(sequence, s_mu, progress, mdp):
    for option_id in sequence:
        if option_id not in mdp.option_ids():
            raise LearnerException("infeasible fixed plan")
    while progress < len(sequence) \
            and not initiation_allowed(mdp.option(sequence[progress]), s_mu):
        progress += 1
    return progress


def fixed_meta(sequence, s_mu, progress, mdp):
    """
    The next option of a fixed plan. Starting from progress, plan entries
    already achieved in s_mu are skipped. Past the end of the plan the last
    option is repeated.
    """

    sequence = list(sequence)
    if len(sequence) == 0:
        raise LearnerException("Empty fixed plan")
    progress = _fixed_progress(sequence, s_mu, progress, mdp)
    return sequence[min(progress, len(sequence) - 1)]


def extract_demo_meta_actions(demos, mdp):
    """
    Replay demonstrations through the abstract state map. At each abstract
    state change, the previous abstract state votes for the options of the
    subgoals just achieved. Each abstract state maps to its majority option,
    ties going to the lowest option_id.
    """

    votes = {}
    for traj in demos:
        features = traj.features()
        s_mu = mdp.abstract_state(features[0], mdp.initial_abstract_state())
        for x in features[1:]:
            s_mu2 = mdp.abstract_state(x, s_mu)
            for factor_id, (a, b) in enumerate(zip(s_mu, s_mu2)):
                if a != b:
                    option = mdp.option_for(factor_id, b)
                    votes.setdefault(s_mu, Counter())[option.option_id()] += 1
            s_mu = s_mu2

    return {s_mu: min(counter.items(), key=lambda item: (-item[1], item[0]))[0]
            for s_mu, counter in votes.items()}


def extract_demo_plan(demos, mdp):
    """
    The sequence of options achieved by the majority of demonstrations, ties
    going to the lexicographically smallest sequence.
    """

    plans = Counter()
    for traj in demos:
        features = traj.features()
        s_mu = mdp.abstract_state(features[0], mdp.initial_abstract_state())
        plan = []
        for x in features[1:]:
            s_mu2 = mdp.abstract_state(x, s_mu)
            achieved = sorted(
                mdp.option_for(factor_id, b).option_id()
                for factor_id, (a, b) in enumerate(zip(s_mu, s_mu2))
                if a != b)
            plan.extend(achieved)
            s_mu = s_mu2
        plans[tuple(plan)] += 1

    if len(plans) == 0:
        return []
    return list(min(plans.items(), key=lambda item: (-item[1], item[0]))[0])


def value_iteration(states, actions, transitions, reward, gamma, tol=1.0e-10,
                    max_sweeps=10 ** 6, deltas=None):
    """
    Synchronous value iteration,

        v(s) <- max_a sum_{s'} p(s'|s, a) (r(s, a, s') + gamma v(s')),

    until the sup-norm change is below tol.

    Arguments:

    states       Finite state list.
    actions      Callable mapping a state to its action list. States without
                 actions are absorbing with value 0.
    transitions  Callable mapping (s, a) to a list of (p, s') pairs.
    reward       Callable mapping (s, a, s') to a real.
    gamma        Discount, in [0, 1).
    tol          Convergence tolerance.
    max_sweeps   Maximum number of sweeps.
    deltas       (Optional) List, appended with the sup-norm change of each
                 sweep.

    Returns (v, policy), with v mapping states to values and policy mapping
    each non-absorbing state to the frozenset of its greedy actions.
    """

    if gamma < 0.0 or gamma >= 1.0:
        raise LearnerException("Require 0 <= gamma < 1")
    states = list(states)
    index = {s: i for i, s in enumerate(states)}
    model = []
    for s in states:
        entries = []
        for a in actions(s):
            outcomes = [(float(p), index[s2], float(reward(s, a, s2)))
                        for p, s2 in transitions(s, a)]
            entries.append((a, outcomes))
        model.append(entries)

    def backup(v, entries):
        return [sum(p * (r + gamma * v[j]) for p, j, r in outcomes)
                for _, outcomes in entries]

    v = np.zeros(len(states), dtype=np.float64)
    for _ in range(max_sweeps):
        v_new = np.array([max(backup(v, entries)) if len(entries) > 0
                          else 0.0 for entries in model], dtype=np.float64)
        delta = float(np.abs(v_new - v).max()) if len(states) > 0 else 0.0
        v = v_new
        if deltas is not None:
            deltas.append(delta)
        if delta < tol:
            break
    else:
        raise LearnerException("Value iteration did not converge")

    policy = {}
    for s, entries in zip(states, model):
        if len(entries) > 0:
            q = backup(v, entries)
            q_max = max(q)
            policy[s] = frozenset(
                a for (a, _), q_a in zip(entries, q)
                if q_a >= q_max - 1.0e-8 * max(1.0, abs(q_max)))
    return {s: float(v[i]) for i, s in enumerate(states)}, policy


class OptionLearner:
    """
    Low-level Q-learner for one option, with linear schedules for the
    exploration probability and the learning rate over the option's own
    environment steps.
    """

    def __init__(self, option_id, action_count, gamma, epsilon_schedule,
                 alpha_schedule):
        self._option_id = option_id
        self._epsilon_schedule = epsilon_schedule
        self._alpha_schedule = alpha_schedule
        self._table = QTable(range(action_count),
                             alpha=alpha_schedule.value(),
                             epsilon=epsilon_schedule.value(), gamma=gamma)
        self._greedy = False

    def option_id(self):
        return self._option_id

    def table(self):
        return self._table

    def set_table(self, table):
        self._table = table

    def set_greedy(self, greedy):
        self._greedy = bool(greedy)

    def act(self, s, rng):
        self._table.set_epsilon(0.0 if self._greedy
                                else self._epsilon_schedule.value())
        return select_action(self._table, s, self._table.actions(), rng)

    def update(self, s, a, r, s2, terminal):
        self._table.set_alpha(self._alpha_schedule.value())
        q_update(self._table, s, a, r, s2, terminal)

    def advance(self):
        self._epsilon_schedule.advance()
        self._alpha_schedule.advance()


class MetaController:
    """
    Policy over options.
    """

    def __init__(self, table):
        self._table = table
        self._greedy = False

    def table(self):
        return self._table

    def set_table(self, table):
        self._table = table

    def set_greedy(self, greedy):
        self._greedy = bool(greedy)
        if self._greedy:
            self._table.set_epsilon(0.0)

    def epsilon(self):
        return self._table.epsilon()

    def reuse_prob(self):
        return 0.0

    def start_episode(self):
        pass

    def select(self, s_mu, allowed, rng):
        raise LearnerException("Method not overridden")

    def update(self, s_mu, option_id, meta_reward, s_mu2, terminal, duration):
        q_update(self._table, abstract_state_key(s_mu), option_id,
                 meta_reward, abstract_state_key(s_mu2), terminal,
                 discount_pow=duration)


class QLearningMeta(MetaController):
    """
    SMDP Q-learning over options, bootstrapping with gamma^T for an option
    execution of duration T.
    """

    def select(self, s_mu, allowed, rng):
        return select_action(self._table, abstract_state_key(s_mu), allowed,
                             rng)


class ReuseMeta(MetaController):
    def __init__(self, table, reuse):
        super().__init__(table)
        self._reuse = reuse

    def reuse_policy(self):
        return self._reuse

    def set_greedy(self, greedy):
        super().set_greedy(greedy)
        if self._greedy:
            self._reuse.disable()

    def reuse_prob(self):
        return self._reuse.reuse_prob()

    def select(self, s_mu, allowed, rng):
        return reuse_select(self._reuse, self._table, s_mu, allowed, rng)


class FixedMeta(MetaController):
    """
    Executes a fixed option sequence. No learning takes place.
    """

    def __init__(self, table, sequence, mdp):
        super().__init__(table)
        sequence = [int(option_id) for option_id in sequence]
        if len(sequence) == 0:
            raise LearnerException("Empty fixed plan")
        for option_id in sequence:
            if option_id not in mdp.option_ids():
                raise LearnerException("infeasible fixed plan")
        self._sequence = sequence
        self._mdp = mdp
        self._progress = 0

    def sequence(self):
        return list(self._sequence)

    def epsilon(self):
        return 0.0

    def start_episode(self):
        self._progress = 0

    def select(self, s_mu, allowed, rng):
        self._progress = _fixed_progress(self._sequence, s_mu,
                                         self._progress, self._mdp)
        return fixed_meta(self._sequence, s_mu, self._progress, self._mdp)

    def update(self, s_mu, option_id, meta_reward, s_mu2, terminal, duration):
        pass
