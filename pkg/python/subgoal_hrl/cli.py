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

from .common import content_hash, info, json_dumps, set_verbosity
from .demos import DemoException, generate_demos, load_demos, save_demos
from .envs import EnvironmentException, make_env
from .factors import FactorException, identify_factors, override_factors
from .schedules import ScheduleException
from .segmentation import SegmentationException
from .train import META_VARIANTS, ConfigException, RunConfig, evaluate, \
    train
from .tsc import DiscoveryException, discover_with_diagnostics, \
    discovery_parameters, save_subgoals

import argparse
import dataclasses
import json
import multiprocessing
import numpy as np
import os
import sys

__all__ = \
    [
        "EXIT_CONFIG",
        "EXIT_DATA",
        "EXIT_OK",
        "EXIT_RUNTIME",

        "main",
        "run_command"
    ]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4

_GEN_DEMOS_DEFAULTS = {"env": "keydoor-20", "n": 10, "noise": 0.05,
                       "slip": 0.0, "seed": 0}
_DISCOVER_DEFAULTS = {"demos": "demos.jsonl", "factors": "auto", "seed": 0}
_DISCOVERY_KEYS = ("corr_threshold", "w_dilate", "k_max", "restarts", "w_min",
                   "merge_distance", "cluster_k_max", "min_support",
                   "demo_copies", "include_terminal", "drop_start_subgoals")
_EVAL_DEFAULTS = {"run_dir": None, "episodes": 100, "seed": 0}
_TRAIN_KEYS = tuple(field.name for field in dataclasses.fields(RunConfig))


def _known_keys():
    return set(_GEN_DEMOS_DEFAULTS) | set(_DISCOVER_DEFAULTS) \
        | set(_DISCOVERY_KEYS) | set(_EVAL_DEFAULTS) | set(_TRAIN_KEYS)


def _default_out():
    return os.environ.get("SUBGOAL_HRL_OUT", "out")


def _parser():
    common = argparse.ArgumentParser(add_help=False,
                                     argument_default=argparse.SUPPRESS)
    common.add_argument("--config", type=str,
                        help="JSON configuration file. Flags override its "
                             "values.")
    common.add_argument("--seed", type=int, help="Random seed")
    common.add_argument("--seeds", type=str,
                        help="Comma separated seeds, run in parallel "
                             "(train and pipeline)")
    common.add_argument("--out", type=str,
                        help="Output directory (default $SUBGOAL_HRL_OUT, "
                             "or out)")
    common.add_argument("--quiet", action="store_true",
                        help="Suppress progress messages")

    parser = argparse.ArgumentParser(
        prog="subgoal-hrl",
        description="Subgoal discovery from demonstrations and hierarchical "
                    "reinforcement learning over the discovered options")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_env_arguments(p):
        p.add_argument("--env", type=str,
                       help="Environment name (keydoor-20, maze-25) or map "
                            "file")
        p.add_argument("--slip", type=float, help="Slip probability")

    def add_discovery_arguments(p):
        p.add_argument("--factors", type=str,
                       help="auto, a JSON factor list, or a JSON file")
        p.add_argument("--corr-threshold", type=float)
        p.add_argument("--w-dilate", type=int)
        p.add_argument("--k-max", type=int)
        p.add_argument("--restarts", type=int)
        p.add_argument("--w-min", type=int)
        p.add_argument("--cluster-k-max", type=int)
        p.add_argument("--min-support", type=float)
        p.add_argument("--demo-copies", type=int)

    def add_train_arguments(p):
        p.add_argument("--meta", type=str, choices=META_VARIANTS)
        p.add_argument("--budget", type=int,
                       help="Total environment step budget")
        p.add_argument("--gamma", type=float)
        p.add_argument("--meta-alpha", type=float)
        p.add_argument("--meta-epsilon", type=float)
        p.add_argument("--timeout", type=int, help="Option timeout")
        p.add_argument("--bonus", type=float,
                       help="Subgoal arrival bonus")
        p.add_argument("--eval-every", type=int,
                       help="Checkpoint cadence, in episodes")
        p.add_argument("--no-share-experience", dest="share_experience",
                       action="store_false")
        p.add_argument("--plan", type=str,
                       help="Comma separated fixed plan: option ids, subgoal "
                            "names, or factor names")
        p.add_argument("--reuse-horizon", type=int)
        p.add_argument("--option-epsilon-start", type=float)
        p.add_argument("--option-epsilon-end", type=float)
        p.add_argument("--option-epsilon-steps", type=int)
        p.add_argument("--option-alpha-start", type=float)
        p.add_argument("--option-alpha-end", type=float)
        p.add_argument("--option-alpha-steps", type=int)
        p.add_argument("--episode-steps", type=int,
                       help="Environment episode step budget")
        p.add_argument("--log-executions", action="store_true")
        p.add_argument("--log-transitions", action="store_true")
        p.add_argument("--record-wall-clock", action="store_true")

    p = commands.add_parser("gen-demos", parents=[common],
                            argument_default=argparse.SUPPRESS,
                            help="Generate scripted demonstrations")
    add_env_arguments(p)
    p.add_argument("--n", type=int, help="Number of demonstrations")
    p.add_argument("--noise", type=float, help="Demonstrator noise")

    p = commands.add_parser("discover", parents=[common],
                            argument_default=argparse.SUPPRESS,
                            help="Discover subgoals from demonstrations")
    p.add_argument("--demos", type=str, help="Demonstration file")
    add_discovery_arguments(p)

    p = commands.add_parser("train", parents=[common],
                            argument_default=argparse.SUPPRESS,
                            help="Train the hierarchy")
    add_env_arguments(p)
    p.add_argument("--subgoals", type=str, help="Subgoal file")
    p.add_argument("--demos", type=str, help="Demonstration file")
    add_train_arguments(p)

    p = commands.add_parser("eval", parents=[common],
                            argument_default=argparse.SUPPRESS,
                            help="Greedy evaluation of a training run")
    p.add_argument("--run-dir", type=str,
                   help="Training run directory (default --out)")
    p.add_argument("--episodes", type=int)

    p = commands.add_parser("pipeline", parents=[common],
                            argument_default=argparse.SUPPRESS,
                            help="gen-demos, discover, train, and eval")
    add_env_arguments(p)
    p.add_argument("--n", type=int, help="Number of demonstrations")
    p.add_argument("--noise", type=float, help="Demonstrator noise")
    add_discovery_arguments(p)
    add_train_arguments(p)
    p.add_argument("--episodes", type=int)

    return parser


def _load_config_file(path):
    if not os.path.isfile(path):
        raise ConfigException(f"Configuration file not found: {path:s}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except ValueError:
            raise ConfigException(f"Malformed configuration file: {path:s}")
    if not isinstance(data, dict):
        raise ConfigException("Configuration must be a JSON object")
    unknown = sorted(set(data.keys()) - _known_keys())
    if len(unknown) > 0:
        raise ConfigException(f"Unknown configuration keys: "
                              f"{', '.join(unknown):s}")
    return data


def _select(settings, defaults, keys=()):
    selected = dict(defaults)
    for key in tuple(defaults) + tuple(keys):
        if key in settings:
            selected[key] = settings[key]
    return selected


def _write_config(out, settings, paths=()):
    data = dict(settings)
    data["input_hash"] = content_hash(
        [path for path in paths if path is not None and os.path.isfile(path)],
        data=settings)
    with open(os.path.join(out, "config.json"), "w", encoding="utf-8",
              newline="\n") as f:
        f.write(json_dumps(data))
    return data["input_hash"]


def _gen_demos(settings, out):
    settings = _select(settings, _GEN_DEMOS_DEFAULTS)
    if settings["n"] < 1:
        raise ConfigException("Require --n >= 1")
    os.makedirs(out, exist_ok=True)
    env = make_env(settings["env"], slip=settings["slip"])
    demos = generate_demos(env, settings["n"], settings["noise"],
                           settings["seed"])
    path = os.path.join(out, "demos.jsonl")
    save_demos(demos, path)
    _write_config(out, settings, paths=[settings["env"]])
    print(json.dumps({"demos": path, "n": len(demos),
                      "mean_return": float(np.mean(demos.returns()))},
                     sort_keys=True))
    return path


def _factorization(layout, demos, parameters):
    if layout == "auto":
        return identify_factors(demos,
                                corr_threshold=parameters["corr_threshold"],
                                w_dilate=parameters["w_dilate"])
    if isinstance(layout, str):
        if os.path.isfile(layout):
            with open(layout, "r", encoding="utf-8") as f:
                text = f.read()
        else:
            text = layout
        try:
            layout = json.loads(text)
        except ValueError:
            raise ConfigException("Factors must be auto, a JSON list, or a "
                                  "JSON file")
    if not isinstance(layout, list):
        raise ConfigException("Factors must be a list")
    return override_factors(layout, demos.feature_dim())


def _discover(settings, out):
    settings = _select(settings, _DISCOVER_DEFAULTS, keys=_DISCOVERY_KEYS)
    os.makedirs(out, exist_ok=True)
    parameters = {key: settings[key] for key in _DISCOVERY_KEYS
                  if key in settings}
    parameters["seed"] = settings["seed"]
    parameters = discovery_parameters(parameters)
    try:
        demos = load_demos(settings["demos"])
    except DemoException as e:
        raise DiscoveryException(str(e), stage="load")
    try:
        factorization = _factorization(settings["factors"], demos,
                                       parameters)
    except FactorException as e:
        raise DiscoveryException(str(e), stage="factors")
    subgoal_set, diagnostics = discover_with_diagnostics(demos, factorization,
                                                        parameters)
    config_hash = _write_config(out, settings, paths=[settings["demos"]])
    path = os.path.join(out, "subgoals.json")
    save_subgoals(subgoal_set.stamped(config_hash), path)
    with open(os.path.join(out, "diagnostics.json"), "w", encoding="utf-8",
              newline="\n") as f:
        f.write(json_dumps(diagnostics))
    for factor in factorization:
        print(f"{factor.name():s}: "
              f"{len(subgoal_set.per_factor(factor.factor_id())):d} "
              f"subgoal(s)")
    return path


def _train(settings, out):
    config = RunConfig.from_dict({key: settings[key] for key in _TRAIN_KEYS
                                  if key in settings})
    summary = train(config, out)
    print(json.dumps(summary, sort_keys=True))
    return summary


def _eval(settings, out):
    settings = _select(settings, _EVAL_DEFAULTS)
    run_dir = settings["run_dir"] if settings["run_dir"] is not None else out
    summary = evaluate(run_dir, settings["episodes"], seed=settings["seed"])
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "eval.json"), "w", encoding="utf-8",
              newline="\n") as f:
        f.write(json_dumps({"config": settings, "summary": summary}))
    print(json.dumps(summary, sort_keys=True))
    return summary


def _pipeline(settings, out):
    settings = dict(settings)
    demos_path = _gen_demos(settings, os.path.join(out, "demos"))
    settings["demos"] = demos_path
    settings["subgoals"] = _discover(settings, os.path.join(out, "discover"))
    run_dir = os.path.join(out, "run")
    _train(settings, run_dir)
    settings["run_dir"] = run_dir
    return _eval(settings, os.path.join(out, "eval"))


_HANDLERS = {"gen-demos": _gen_demos,
             "discover": _discover,
             "train": _train,
             "eval": _eval,
             "pipeline": _pipeline}


def _error(stage, e, code):
    message = " ".join(str(e).split())
    print(f"ERR:{stage:s}:{message:s}", file=sys.stderr)
    return code


def run_command(command, settings, out):
    """
    Run one command with resolved settings, writing to out. Returns the exit
    code. Errors are reported as a single line "ERR:<stage>:<message>" on
    stderr.
    """

    try:
        _HANDLERS[command](settings, out)
    except (ConfigException, ScheduleException) as e:
        return _error("config", e, EXIT_CONFIG)
    except DiscoveryException as e:
        stage = e.stage if e.stage is not None else "discover"
        return _error(stage, e,
                      EXIT_CONFIG if stage == "config" else EXIT_DATA)
    except (DemoException, EnvironmentException, FactorException,
            SegmentationException) as e:
        return _error("data", e, EXIT_DATA)
    except Exception as e:
        return _error(command, e, EXIT_RUNTIME)
    return EXIT_OK


def _run_seed(command, settings, out, quiet):
    set_verbosity(not quiet)
    return run_command(command, settings, out)


def main(argv=None):
    parser = _parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    quiet = args.pop("quiet", False)
    set_verbosity(not quiet)

    try:
        settings = {}
        if "config" in args:
            settings.update(_load_config_file(args.pop("config")))
        out = args.pop("out", _default_out())
        seeds = args.pop("seeds", None)
        settings.update(args)
        if seeds is not None:
            seeds = [int(seed) for seed in seeds.split(",")
                     if len(seed.strip()) > 0]
            if len(seeds) == 0:
                raise ConfigException("Empty seed list")
            if command not in ("train", "pipeline"):
                raise ConfigException("--seeds requires train or pipeline")
    except (ConfigException, ValueError) as e:
        return _error("config", e, EXIT_CONFIG)

    if seeds is None:
        return run_command(command, settings, out)

    info(f"Running seeds {', '.join(f'{seed:d}' for seed in seeds):s}")
    tasks = [(command, dict(settings, seed=seed),
              os.path.join(out, f"seed_{seed:d}"), quiet)
             for seed in seeds]
    with multiprocessing.Pool(processes=min(len(tasks),
                                            os.cpu_count() or 1)) as pool:
        codes = pool.starmap(_run_seed, tasks)
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
