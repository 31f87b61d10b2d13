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

from .common import content_hash, format_real, info, json_dumps
from .demos import load_demos
from .envs import make_env
from .hrl_core import CONTINUE, EPISODE_END, SUBGOAL_REACHED, AbstractMdp, \
    OptionExecution, Transition, accumulate_meta_reward, intrinsic_reward, \
    termination_check
from .learners import FixedMeta, OptionLearner, QLearningMeta, QTable, \
    ReuseMeta, ReusePolicy, extract_demo_meta_actions, extract_demo_plan, \
    q_update, select_action, state_key
from .schedules import LinearSchedule
from .tsc import load_subgoals, save_subgoals

from collections import deque
import csv
import dataclasses
import json
import numpy as np
import os
import time
import warnings

__all__ = \
    [
        "ConfigException",
        "TrainingException",

        "META_VARIANTS",

        "FlatAgent",
        "RunConfig",

        "build_meta",
        "build_option_learners",
        "evaluate",
        "route_experience",
        "run_episode",
        "run_flat_episode",
        "train"
    ]


class ConfigException(Exception):
    pass


class TrainingException(Exception):
    pass


META_VARIANTS = ("qlearn", "reuse", "fixed", "flat-baseline")

_METRICS_COLUMNS = ["episode", "env_steps", "return", "ep_len",
                    "opt_success_rates", "meta_eps", "reuse_prob", "ms"]
_SUCCESS_WINDOW = 100


@dataclasses.dataclass
class RunConfig:
    """
    Training run configuration.
    """

    env: str = "keydoor-20"
    seed: int = 0
    gamma: float = 0.99
    meta: str = "qlearn"
    meta_alpha: float = 0.2
    meta_epsilon: float = 0.1
    timeout: int = 1000
    bonus: float = 10.0
    budget: int = 300000
    eval_every: int = 100
    share_experience: bool = True
    subgoals: str = None
    demos: str = None
    plan: list = None
    reuse_horizon: int = 2000
    option_epsilon_start: float = 1.0
    option_epsilon_end: float = 0.1
    option_epsilon_steps: int = 50000
    option_alpha_start: float = 0.1
    option_alpha_end: float = 0.1
    option_alpha_steps: int = 0
    slip: float = 0.0
    episode_steps: int = None
    log_executions: bool = False
    log_transitions: bool = False
    record_wall_clock: bool = False

    def __post_init__(self):
        if self.gamma <= 0.0 or self.gamma >= 1.0:
            raise ConfigException("Require 0 < gamma < 1")
        if self.meta not in META_VARIANTS:
            raise ConfigException(f"Unknown meta variant: {self.meta!s}")
        if self.budget < 1:
            raise ConfigException("Require budget >= 1")
        if self.timeout < 1:
            raise ConfigException("Require timeout >= 1")
        if self.eval_every < 1:
            raise ConfigException("Require eval_every >= 1")
        if self.bonus < 0.0:
            raise ConfigException("Require bonus >= 0")
        if self.reuse_horizon < 0:
            raise ConfigException("Require reuse_horizon >= 0")
        for name in ["meta_alpha", "option_alpha_start",
                     "option_alpha_end"]:
            value = getattr(self, name)
            if value <= 0.0 or value > 1.0:
                raise ConfigException(f"Require 0 < {name:s} <= 1")
        for name in ["meta_epsilon", "option_epsilon_start",
                     "option_epsilon_end"]:
            value = getattr(self, name)
            if value < 0.0 or value > 1.0:
                raise ConfigException(f"Require 0 <= {name:s} <= 1")
        if self.option_epsilon_steps < 0 or self.option_alpha_steps < 0:
            raise ConfigException("Schedule horizons must be non-negative")
        if self.plan is not None:
            if isinstance(self.plan, str):
                self.plan = [token.strip() for token in self.plan.split(",")
                             if len(token.strip()) > 0]
            self.plan = [str(token) for token in self.plan]

    @classmethod
    def from_dict(cls, data):
        names = set(field.name for field in dataclasses.fields(cls))
        unknown = sorted(set(data.keys()) - names)
        if len(unknown) > 0:
            raise ConfigException(f"Unknown configuration keys: "
                                  f"{', '.join(unknown):s}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigException(str(e))

    @classmethod
    def load(cls, path):
        if not os.path.isfile(path):
            raise ConfigException(f"Configuration file not found: {path:s}")
        with open(path, "r", encoding="utf-8") as f:
            try:
                data = json.load(f)
            except ValueError:
                raise ConfigException(f"Malformed configuration file: "
                                      f"{path:s}")
        if not isinstance(data, dict):
            raise ConfigException("Configuration must be a JSON object")
        data = {key: value for key, value in data.items()
                if key not in ("input_hash",)}
        return cls.from_dict(data)

    def to_dict(self):
        return dataclasses.asdict(self)

    def input_paths(self):
        return [path for path in [self.subgoals, self.demos]
                if path is not None and os.path.isfile(path)]


def build_option_learners(mdp, action_count, config):
    return {option.option_id(): OptionLearner(
        option.option_id(), action_count, config.gamma,
        LinearSchedule(config.option_epsilon_start, config.option_epsilon_end,
                       config.option_epsilon_steps),
        LinearSchedule(config.option_alpha_start, config.option_alpha_end,
                       config.option_alpha_steps))
        for option in mdp.options()}


def build_meta(mdp, config, greedy=False):
    """
    The meta controller for config.meta. The reuse variant requires
    demonstrations, and the fixed variant requires a plan or demonstrations
    to extract the majority plan from. A greedy reuse controller never reuses,
    so no demonstrations are loaded for it.
    """

    table = QTable(mdp.option_ids(), alpha=config.meta_alpha,
                   epsilon=config.meta_epsilon, gamma=config.gamma)
    if config.meta == "qlearn":
        return QLearningMeta(table)
    elif config.meta == "reuse":
        if greedy:
            meta = ReuseMeta(table, ReusePolicy({}, config.reuse_horizon))
            meta.set_greedy(True)
            return meta
        if config.demos is None:
            raise ConfigException("Policy reuse requires demonstrations")
        demo_meta_actions = extract_demo_meta_actions(load_demos(config.demos),
                                                      mdp)
        return ReuseMeta(table, ReusePolicy(demo_meta_actions,
                                            config.reuse_horizon))
    elif config.meta == "fixed":
        subgoal_set = mdp.subgoal_set()
        if config.plan is not None:
            sequence = [subgoal_set.resolve(token).subgoal_id()
                        for token in config.plan]
        elif config.demos is not None:
            sequence = extract_demo_plan(load_demos(config.demos), mdp)
        else:
            raise ConfigException("Fixed meta controller requires a plan or "
                                  "demonstrations")
        if len(sequence) == 0:
            raise ConfigException("Empty fixed plan")
        info("Fixed plan: " + ", ".join(mdp.option(option_id).name()
                                        for option_id in sequence))
        return FixedMeta(table, sequence, mdp)
    else:
        raise ConfigException(f"Invalid meta variant: {config.meta:s}")


def route_experience(segment, option, learners, config):
    """
    Replay a segment of transitions into the learner of option, relabeled with
    the option's intrinsic reward. Only the last transition can be terminal,
    when it enters the option's subgoal region.
    """

    if not config.share_experience or len(segment) == 0:
        return
    learner = learners[option.option_id()]
    for i, transition in enumerate(segment):
        r = intrinsic_reward(option, transition.state, transition.next_state,
                             config.gamma, bonus=config.bonus)
        terminal = i == len(segment) - 1 \
            and option.subgoal().contains(transition.next_state)
        learner.update(state_key(transition.state), transition.action, r,
                       state_key(transition.next_state), terminal)


def run_episode(env, mdp, meta, learners, config, rng, seed=None,
                max_steps=None, learn=True):
    """
    One call-and-return episode of the option hierarchy.

    Arguments:

    env        The Environment.
    mdp        The AbstractMdp.
    meta       The meta controller.
    learners   Map from option_id to OptionLearner.
    config     The RunConfig.
    rng        Generator for action selection.
    seed       (Optional) Environment reset seed.
    max_steps  (Optional) Remaining step budget. The episode is truncated,
               and ends, when it is reached.
    learn      Whether to update learners.

    Returns (episode return, option executions).
    """

    if len(mdp.options()) == 0:
        raise TrainingException("No options")
    gamma = mdp.gamma()
    features = env.reset(seed)
    s_mu = mdp.abstract_state(features, mdp.initial_abstract_state())
    meta.start_episode()

    total_return = 0.0
    steps = 0
    executions = []
    segment = []
    done = False
    while not done:
        allowed = mdp.allowed_options(s_mu)
        if len(allowed) == 0:
            warnings.warn("No option allowed, selecting uniformly among all "
                          "options", RuntimeWarning)
            allowed = mdp.option_ids()
            option_id = allowed[int(rng.integers(len(allowed)))]
        else:
            option_id = meta.select(s_mu, allowed, rng)
        option = mdp.option(option_id)
        learner = learners[option_id]

        start_abstract = s_mu
        meta_reward = 0.0
        t = 0
        transitions = []
        outcome = CONTINUE
        while outcome == CONTINUE:
            s = state_key(features)
            action = learner.act(s, rng)
            features2, r, done = env.step(action)
            steps += 1
            total_return += r
            if max_steps is not None and steps >= max_steps:
                done = True
            r_intrinsic = intrinsic_reward(option, features, features2, gamma,
                                           bonus=config.bonus)
            meta_reward = accumulate_meta_reward(meta_reward, t, r, gamma)
            t += 1
            s_mu = mdp.abstract_state(features2, s_mu)
            outcome = termination_check(option, features2, t, done)

            transition = Transition(features, action, features2, r,
                                    r_intrinsic)
            transitions.append(transition)
            if learn:
                learner.update(s, action, r_intrinsic, state_key(features2),
                               outcome in (SUBGOAL_REACHED, EPISODE_END))
                learner.advance()

            segment.append(transition)
            # Regions entered by this transition, not merely occupied
            entered = [other for other in mdp.options()
                       if not other.subgoal().contains(features)
                       and other.subgoal().contains(features2)]
            if learn:
                for other in entered:
                    if other.option_id() != option_id:
                        route_experience(segment, other, learners, config)
            if len(entered) > 0:
                segment = []
            features = features2

        if learn:
            meta.update(start_abstract, option_id, meta_reward, s_mu, done, t)
        executions.append(OptionExecution(option_id, start_abstract, s_mu, t,
                                          meta_reward, outcome,
                                          transitions=transitions))

    return total_return, executions


class FlatAgent:
    """
    Flat tabular Q-learner on the raw environment state and the sparse
    environmental reward, with the option exploration and learning rate
    schedules.
    """

    def __init__(self, action_count, config):
        self._epsilon_schedule = LinearSchedule(config.option_epsilon_start,
                                                config.option_epsilon_end,
                                                config.option_epsilon_steps)
        self._alpha_schedule = LinearSchedule(config.option_alpha_start,
                                              config.option_alpha_end,
                                              config.option_alpha_steps)
        self._table = QTable(range(action_count),
                             alpha=self._alpha_schedule.value(),
                             epsilon=self._epsilon_schedule.value(),
                             gamma=config.gamma)
        self._greedy = False

    def table(self):
        return self._table

    def set_table(self, table):
        self._table = table

    def set_greedy(self, greedy):
        self._greedy = bool(greedy)

    def epsilon(self):
        return 0.0 if self._greedy else self._epsilon_schedule.value()

    def act(self, s, rng):
        self._table.set_epsilon(self.epsilon())
        return select_action(self._table, s, self._table.actions(), rng)

    def update(self, s, a, r, s2, terminal):
        self._table.set_alpha(self._alpha_schedule.value())
        q_update(self._table, s, a, r, s2, terminal)
        self._epsilon_schedule.advance()
        self._alpha_schedule.advance()


def run_flat_episode(env, agent, rng, seed=None, max_steps=None, learn=True):
    """
    One episode of the flat baseline. Returns (episode return, length).
    """

    features = env.reset(seed)
    total_return = 0.0
    steps = 0
    done = False
    while not done:
        s = state_key(features)
        action = agent.act(s, rng)
        features, r, done = env.step(action)
        steps += 1
        total_return += r
        terminal = done
        if max_steps is not None and steps >= max_steps:
            done = True
        if learn:
            agent.update(s, action, r, state_key(features), terminal)
    return total_return, steps


def _episode_seed(rng):
    return int(rng.integers(np.iinfo(np.int32).max))


def _success_rates(windows, option_ids):
    rates = []
    for option_id in option_ids:
        window = windows[option_id]
        rates.append(format_real(np.mean(window)) if len(window) > 0
                     else "nan")
    return "|".join(rates)


def _write_config(config, run_dir):
    data = config.to_dict()
    data["input_hash"] = content_hash(config.input_paths(),
                                      data=config.to_dict())
    with open(os.path.join(run_dir, "config.json"), "w", encoding="utf-8",
              newline="\n") as f:
        f.write(json_dumps(data))


def _load_mdp(config, env):
    if config.subgoals is None:
        raise TrainingException("Subgoal file required")
    if not os.path.isfile(config.subgoals):
        raise TrainingException(f"Subgoal file not found: "
                                f"{config.subgoals:s}")
    subgoal_set = load_subgoals(config.subgoals)
    if subgoal_set.factorization().feature_dim() != env.feature_dim():
        raise TrainingException("Subgoal file does not match the environment "
                                "features")
    mdp = AbstractMdp(subgoal_set, gamma=config.gamma,
                      timeout=config.timeout)
    if len(mdp.options()) == 0:
        raise TrainingException("Subgoal file holds no subgoals")
    return mdp


def _save_checkpoints(run_dir, meta, learners):
    meta.table().save(os.path.join(run_dir, "meta.qtable.json"))
    for option_id, learner in learners.items():
        learner.table().save(os.path.join(run_dir,
                                          f"option_{option_id:d}.qtable.json"))


def train(config, run_dir):
    """
    Train until the environment step budget is exhausted, writing
    run_dir/{config.json, subgoals.json, metrics.csv} and the learner
    checkpoints meta.qtable.json and option_<id>.qtable.json (flat.qtable.json
    for the flat baseline). Checkpoints are written every config.eval_every
    episodes and at the end. A fixed run without a plan records its
    extracted plan in config.json.

    Returns a summary dict.
    """

    os.makedirs(run_dir, exist_ok=True)
    env = make_env(config.env, slip=config.slip,
                   step_budget=config.episode_steps)
    rng = np.random.default_rng(config.seed)
    flat = config.meta == "flat-baseline"

    if flat:
        agent = FlatAgent(env.action_count(), config)
        option_ids = []
    else:
        mdp = _load_mdp(config, env)
        learners = build_option_learners(mdp, env.action_count(), config)
        meta = build_meta(mdp, config)
        if config.meta == "fixed" and config.plan is None:
            config = dataclasses.replace(
                config, plan=[str(option_id)
                              for option_id in meta.sequence()])
        option_ids = mdp.option_ids()
        save_subgoals(mdp.subgoal_set(),
                      os.path.join(run_dir, "subgoals.json"))
        mdp.info()
    _write_config(config, run_dir)

    windows = {option_id: deque(maxlen=_SUCCESS_WINDOW)
               for option_id in option_ids}
    returns = []
    env_steps = 0
    episode = 0
    executions_file = None
    transitions_file = None
    if config.log_executions and not flat:
        executions_file = open(os.path.join(run_dir, "executions.jsonl"), "w",
                               encoding="utf-8", newline="\n")
    if config.log_transitions and not flat:
        transitions_file = open(os.path.join(run_dir, "transitions.jsonl"),
                                "w", encoding="utf-8", newline="\n")
    try:
        with open(os.path.join(run_dir, "metrics.csv"), "w", encoding="utf-8",
                  newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(_METRICS_COLUMNS)
            while env_steps < config.budget:
                t0 = time.perf_counter()
                seed = _episode_seed(rng)
                if flat:
                    episode_return, length = run_flat_episode(
                        env, agent, rng, seed=seed,
                        max_steps=config.budget - env_steps)
                    meta_eps, reuse_prob = agent.epsilon(), 0.0
                else:
                    episode_return, executions = run_episode(
                        env, mdp, meta, learners, config, rng, seed=seed,
                        max_steps=config.budget - env_steps)
                    length = sum(execution.duration()
                                 for execution in executions)
                    for execution in executions:
                        windows[execution.option_id()].append(
                            execution.outcome() == SUBGOAL_REACHED)
                    meta_eps, reuse_prob = meta.epsilon(), meta.reuse_prob()
                    _log_executions(executions_file, transitions_file,
                                    episode, executions)
                env_steps += length
                returns.append(episode_return)
                ms = int(round(1000.0 * (time.perf_counter() - t0))) \
                    if config.record_wall_clock else 0
                writer.writerow([episode, env_steps,
                                 format_real(episode_return), length,
                                 _success_rates(windows, option_ids),
                                 format_real(meta_eps),
                                 format_real(reuse_prob), ms])
                episode += 1
                if episode % config.eval_every == 0:
                    if flat:
                        agent.table().save(os.path.join(run_dir,
                                                        "flat.qtable.json"))
                    else:
                        _save_checkpoints(run_dir, meta, learners)
                    info(f"Episode {episode:d}, {env_steps:d} steps, "
                         f"trailing mean return "
                         f"{np.mean(returns[-_SUCCESS_WINDOW:]):.6g}")
    finally:
        for log_file in [executions_file, transitions_file]:
            if log_file is not None:
                log_file.close()

    if flat:
        agent.table().save(os.path.join(run_dir, "flat.qtable.json"))
    else:
        _save_checkpoints(run_dir, meta, learners)

    summary = {"episodes": episode, "env_steps": env_steps,
               "trailing_mean_return":
               float(np.mean(returns[-_SUCCESS_WINDOW:]))}
    info(f"Training complete: {episode:d} episodes, {env_steps:d} steps, "
         f"trailing mean return {summary['trailing_mean_return']:.6g}")
    return summary


def _log_executions(executions_file, transitions_file, episode, executions):
    for execution in executions:
        if executions_file is not None:
            data = execution.to_dict()
            data["episode"] = episode
            executions_file.write(json.dumps(data, sort_keys=True) + "\n")
        if transitions_file is not None:
            for transition in execution.transitions():
                transitions_file.write(json.dumps(
                    {"episode": episode,
                     "option_id": execution.option_id(),
                     "features": [float(x) for x in transition.state],
                     "action": int(transition.action),
                     "next_features": [float(x)
                                       for x in transition.next_state],
                     "reward": float(transition.env_reward),
                     "intrinsic_reward": float(transition.intrinsic_reward)},
                    sort_keys=True) + "\n")


def evaluate(run_dir, episodes, seed=0, env=None):
    """
    Greedy evaluation of the checkpoints in run_dir. Returns a summary dict
    with the mean and standard deviation of the return, the mean episode
    length, and per-option success rates.
    """

    if episodes < 1:
        raise TrainingException("Require at least one evaluation episode")
    if not os.path.isdir(run_dir):
        raise TrainingException(f"Run directory not found: {run_dir:s}")
    config = RunConfig.load(os.path.join(run_dir, "config.json"))
    if env is None:
        env = make_env(config.env, slip=config.slip,
                       step_budget=config.episode_steps)
    rng = np.random.default_rng(seed)

    returns = []
    lengths = []
    attempts = {}
    successes = {}
    if config.meta == "flat-baseline":
        agent = FlatAgent(env.action_count(), config)
        agent.set_table(QTable.load(os.path.join(run_dir,
                                                 "flat.qtable.json")))
        if len(agent.table().actions()) != env.action_count():
            raise TrainingException("Checkpoint does not match the "
                                    "environment")
        agent.set_greedy(True)
        for _ in range(episodes):
            episode_return, length = run_flat_episode(
                env, agent, rng, seed=_episode_seed(rng), learn=False)
            returns.append(episode_return)
            lengths.append(length)
    else:
        config = dataclasses.replace(
            config, subgoals=os.path.join(run_dir, "subgoals.json"))
        mdp = _load_mdp(config, env)
        learners = build_option_learners(mdp, env.action_count(), config)
        for option_id, learner in learners.items():
            table = QTable.load(os.path.join(
                run_dir, f"option_{option_id:d}.qtable.json"))
            if len(table.actions()) != env.action_count():
                raise TrainingException("Checkpoint does not match the "
                                        "environment")
            learner.set_table(table)
            learner.set_greedy(True)
        meta = build_meta(mdp, config, greedy=True)
        table = QTable.load(os.path.join(run_dir, "meta.qtable.json"))
        if sorted(table.actions()) != sorted(mdp.option_ids()):
            raise TrainingException("Checkpoint does not match the subgoals")
        meta.set_table(table)
        meta.set_greedy(True)
        for _ in range(episodes):
            episode_return, executions = run_episode(
                env, mdp, meta, learners, config, rng,
                seed=_episode_seed(rng), learn=False)
            returns.append(episode_return)
            lengths.append(sum(execution.duration()
                               for execution in executions))
            for execution in executions:
                option_id = execution.option_id()
                attempts[option_id] = attempts.get(option_id, 0) + 1
                successes[option_id] = successes.get(option_id, 0) \
                    + int(execution.outcome() == SUBGOAL_REACHED)

    return {"episodes": episodes,
            "mean_return": float(np.mean(returns)),
            "std_return": float(np.std(returns)),
            "mean_length": float(np.mean(lengths)),
            "success_rates": {str(option_id): successes[option_id]
                              / attempts[option_id]
                              for option_id in sorted(attempts)}}
