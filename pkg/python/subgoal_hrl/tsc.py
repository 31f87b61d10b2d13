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

from .common import copy_parameters_dict, info, json_dumps
from .demos import DemoSet, Trajectory
from .factors import Factor, Factorization
from .segmentation import SwitchPoint, build_transition_vectors, \
    detect_switches, fit_gmm, standardization

import json
import numpy as np
import os
from sklearn.cluster import KMeans
from sklearn.metrics import silhouette_score
import warnings

__all__ = \
    [
        "DiscoveryException",

        "Subgoal",
        "SubgoalSet",

        "cluster_subgoals",
        "discover",
        "discover_with_diagnostics",
        "discovery_parameters",
        "load_subgoals",
        "propagate_switch_times",
        "save_subgoals"
    ]


class DiscoveryException(Exception):
    """
    A subgoal discovery failure, annotated with the pipeline stage and, where
    applicable, the factor name.
    """

    def __init__(self, message, stage=None, factor=None):
        super().__init__(message)
        self.stage = stage
        self.factor = factor


_THRESHOLD_FLOOR = 1.0e-6


class Subgoal:
    """
    A target region in the subspace of one factor: the set of feature vectors
    whose masked components lie within threshold (Euclidean distance) of
    target.

    Arguments:

    subgoal_id  Globally unique identifier.
    factor_id   Factor identifier.
    target      Target vector, of the factor mask dimension.
    threshold   Distance threshold, > 0.
    support     Fraction of demonstrations contributing switch points, in
                (0, 1].
    mask        Feature indices of the factor.
    name        (Optional) Name, "<factor name>:<index>".
    """

    def __init__(self, subgoal_id, factor_id, target, threshold, support,
                 mask, name=None):
        target = tuple(float(x) for x in target)
        mask = tuple(int(i) for i in mask)
        threshold = float(threshold)
        support = float(support)
        if len(target) != len(mask):
            raise DiscoveryException("Subgoal target dimension does not "
                                     "match the factor mask")
        if not np.isfinite(threshold) or threshold <= 0.0:
            raise DiscoveryException("Subgoal threshold must be positive")
        if support <= 0.0 or support > 1.0:
            raise DiscoveryException("Subgoal support must lie in (0, 1]")

        self._subgoal_id = int(subgoal_id)
        self._factor_id = int(factor_id)
        self._target = target
        self._threshold = threshold
        self._support = support
        self._mask = mask
        self._name = f"subgoal_{subgoal_id:d}" if name is None else str(name)

    def subgoal_id(self):
        return self._subgoal_id

    def factor_id(self):
        return self._factor_id

    def target(self):
        return np.array(self._target, dtype=np.float64)

    def threshold(self):
        return self._threshold

    def support(self):
        return self._support

    def mask(self):
        return self._mask

    def name(self):
        return self._name

    def distance(self, features):
        """
        Euclidean distance from the masked features to the target.
        """

        x = np.asarray(features, dtype=np.float64)[list(self._mask)]
        return float(np.sqrt(((x - self.target()) ** 2).sum()))

    def contains(self, features):
        return self.distance(features) <= self._threshold

    def to_dict(self):
        return {"subgoal_id": self._subgoal_id, "name": self._name,
                "target": list(self._target), "threshold": self._threshold,
                "support": self._support}

    def __eq__(self, other):
        return isinstance(other, Subgoal) \
            and self._factor_id == other._factor_id \
            and self._mask == other._mask \
            and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self._subgoal_id, self._factor_id, self._target))

    def __repr__(self):
        return (f"Subgoal({self._subgoal_id:d}, {self._name!r}, "
                f"target={self._target!r}, "
                f"threshold={self._threshold:.6g})")


class SubgoalSet:
    """
    The subgoals of every factor. per_factor maps factor_id to a list of
    Subgoal objects. Every factor has an entry, possibly empty.
    """

    def __init__(self, factorization, per_factor, seed=None,
                 config_hash=None):
        per_factor = {int(factor_id): tuple(subgoals)
                      for factor_id, subgoals in per_factor.items()}
        for factor in factorization:
            per_factor.setdefault(factor.factor_id(), ())
        if set(per_factor.keys()) \
                != set(factor.factor_id() for factor in factorization):
            raise DiscoveryException("Unknown factor in subgoal set")

        ids = set()
        for factor_id, subgoals in per_factor.items():
            for subgoal in subgoals:
                if subgoal.factor_id() != factor_id \
                        or subgoal.mask() != factorization[factor_id].mask():
                    raise DiscoveryException("Subgoal factor mismatch")
                if subgoal.subgoal_id() in ids:
                    raise DiscoveryException("Duplicate subgoal identifier")
                ids.add(subgoal.subgoal_id())

        self._factorization = factorization
        self._per_factor = per_factor
        self._seed = seed
        self._config_hash = config_hash

    def factorization(self):
        return self._factorization

    def per_factor(self, factor_id):
        return list(self._per_factor[factor_id])

    def subgoals(self):
        """
        All subgoals, ordered by subgoal_id.
        """

        subgoals = [subgoal for factor in self._factorization
                    for subgoal in self._per_factor[factor.factor_id()]]
        return sorted(subgoals, key=lambda subgoal: subgoal.subgoal_id())

    def __len__(self):
        return sum(len(subgoals) for subgoals in self._per_factor.values())

    def subgoal(self, subgoal_id):
        for subgoal in self.subgoals():
            if subgoal.subgoal_id() == subgoal_id:
                return subgoal
        raise DiscoveryException(f"Subgoal not found: {subgoal_id:d}")

    def index(self, subgoal):
        """
        Position of a subgoal within its factor's list.
        """

        return self.per_factor(subgoal.factor_id()).index(subgoal)

    def resolve(self, token):
        """
        A subgoal from a subgoal_id, a subgoal name, or a factor name (its
        first subgoal).
        """

        token = str(token).strip()
        for subgoal in self.subgoals():
            if subgoal.name() == token or str(subgoal.subgoal_id()) == token:
                return subgoal
        for factor in self._factorization:
            if factor.name() == token:
                subgoals = self.per_factor(factor.factor_id())
                if len(subgoals) == 0:
                    raise DiscoveryException(f"Factor {token:s} has no "
                                             f"subgoals")
                return subgoals[0]
        raise DiscoveryException(f"Unknown subgoal: {token:s}")

    def seed(self):
        return self._seed

    def config_hash(self):
        return self._config_hash

    def stamped(self, config_hash):
        return SubgoalSet(self._factorization, self._per_factor,
                          seed=self._seed, config_hash=config_hash)

    def to_dict(self):
        factors = []
        for factor in self._factorization:
            factors.append(
                {"factor_id": factor.factor_id(), "name": factor.name(),
                 "mask": list(factor.mask()),
                 "threshold": factor.threshold(),
                 "subgoals": [subgoal.to_dict() for subgoal
                              in self._per_factor[factor.factor_id()]]})
        return {"factors": factors, "seed": self._seed,
                "config_hash": self._config_hash}

    @classmethod
    def from_dict(cls, data):
        try:
            factors = []
            per_factor = {}
            for entry in data["factors"]:
                factor = Factor(entry["factor_id"], entry["name"],
                                entry["mask"],
                                threshold=entry.get("threshold", 0.0))
                factors.append(factor)
                per_factor[factor.factor_id()] = [
                    Subgoal(s["subgoal_id"], factor.factor_id(), s["target"],
                            s["threshold"], s["support"], factor.mask(),
                            name=s.get("name"))
                    for s in entry["subgoals"]]
            feature_dim = sum(len(factor.mask()) for factor in factors)
            factorization = Factorization(factors, feature_dim)
        except (KeyError, TypeError, ValueError):
            raise DiscoveryException("Malformed subgoal data",
                                     stage="load")
        return cls(factorization, per_factor, seed=data.get("seed"),
                   config_hash=data.get("config_hash"))

    def __eq__(self, other):
        return isinstance(other, SubgoalSet) \
            and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json_dumps(self.to_dict()))


def save_subgoals(subgoal_set, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json_dumps(subgoal_set.to_dict()))


def load_subgoals(path):
    if not os.path.isfile(path):
        raise DiscoveryException(f"Subgoal file not found: {path:s}",
                                 stage="load")
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except ValueError:
            raise DiscoveryException("Malformed subgoal file", stage="load")
    return SubgoalSet.from_dict(data)


def discovery_parameters(parameters=None):
    """
    Complete a discovery parameters dictionary with defaults.

    Parameters:

    corr_threshold       Factor linkage threshold. Default 0.2.
    w_dilate             Factor change dilation window. Default 2.
    k_max                Maximum number of dynamics regimes. Default 8.
    restarts             EM restarts. Default 5.
    w_min                Minimum gap between switches. Default 3.
    merge_distance       Regimes whose mean displacements lie within
                         merge_distance pooled standard deviations share a
                         label when detecting switches. 0 disables merging.
                         Default 2.0.
    cluster_k_max        Maximum number of subgoal clusters per factor.
                         Default 8.
    min_support          Minimum fraction of demonstrations contributing to a
                         subgoal. Default 0.4.
    demo_copies          Number of copies of each demonstration. Default 1.
    include_terminal     Whether episode-ending demonstrations contribute a
                         final switch point. Default True.
    drop_start_subgoals  Whether subgoals containing every demonstration's
                         initial state are dropped. Default True.
    seed                 Seed. Default 0.
    verbose              Whether to log per-factor details. Default False.
    """

    if parameters is None:
        parameters = {}
    else:
        parameters = copy_parameters_dict(parameters)
    parameters["corr_threshold"] = parameters.get("corr_threshold", 0.2)
    parameters["w_dilate"] = parameters.get("w_dilate", 2)
    parameters["k_max"] = parameters.get("k_max", 8)
    parameters["restarts"] = parameters.get("restarts", 5)
    parameters["w_min"] = parameters.get("w_min", 3)
    parameters["merge_distance"] = parameters.get("merge_distance", 2.0)
    parameters["cluster_k_max"] = parameters.get("cluster_k_max", 8)
    parameters["min_support"] = parameters.get("min_support", 0.4)
    parameters["demo_copies"] = parameters.get("demo_copies", 1)
    parameters["include_terminal"] = parameters.get("include_terminal", True)
    parameters["drop_start_subgoals"] = parameters.get("drop_start_subgoals",
                                                       True)
    parameters["seed"] = parameters.get("seed", 0)
    parameters["verbose"] = parameters.get("verbose", False)

    for key in ["k_max", "restarts", "w_min", "demo_copies"]:
        if parameters[key] < 1:
            raise DiscoveryException(f"Require {key:s} >= 1", stage="config")
    if parameters["merge_distance"] < 0.0:
        raise DiscoveryException("Require merge_distance >= 0",
                                 stage="config")
    if parameters["w_dilate"] < 0:
        raise DiscoveryException("Require w_dilate >= 0", stage="config")
    if parameters["min_support"] < 0.0 or parameters["min_support"] > 1.0:
        raise DiscoveryException("Require 0 <= min_support <= 1",
                                 stage="config")
    if parameters["cluster_k_max"] < 1:
        raise DiscoveryException("Require cluster_k_max >= 1",
                                 stage="config")
    return parameters


def propagate_switch_times(switches, demos, factorization):
    """
    Copy every switch time to the other factors of the same trajectory,
    carrying the other factors' features at that time. Switches colliding on
    (traj_id, t, factor_id) are deduplicated, keeping the non-propagated one.
    The result is ordered by (traj_id, t, factor_id).
    """

    trajectories = {traj.traj_id(): traj for traj in demos}
    factor_ids = set(factor.factor_id() for factor in factorization)

    result = {}
    for switch in switches:
        if switch.traj_id() not in trajectories:
            raise DiscoveryException(f"Switch references unknown trajectory "
                                     f"{switch.traj_id():s}",
                                     stage="propagation")
        if switch.factor_id() not in factor_ids:
            raise DiscoveryException(f"Switch references unknown factor "
                                     f"{switch.factor_id():d}",
                                     stage="propagation")
        if switch.t() > len(trajectories[switch.traj_id()]) - 1:
            raise DiscoveryException("Switch time out of range",
                                     stage="propagation")
        if switch.key() not in result or result[switch.key()].propagated():
            result[switch.key()] = switch

    for switch in switches:
        features = trajectories[switch.traj_id()].features()[switch.t()]
        for factor in factorization:
            key = (switch.traj_id(), switch.t(), factor.factor_id())
            if key not in result:
                result[key] = SwitchPoint(
                    switch.traj_id(), switch.t(), factor.factor_id(),
                    factor.project(features), propagated=True)

    return sorted(result.values(),
                  key=lambda s: (s.traj_id(), s.t(), s.factor_id()))


def cluster_subgoals(switches, demos, factor, k_max=8, min_support=0.4,
                     seed=0, first_subgoal_id=0):
    """
    Cluster the switch states of one factor into subgoals.

    k-means (k-means++ initialization, 10 restarts, 200 iterations) is run for
    2 <= k <= min(k_max, number of distinct states, number of states - 1) and
    k is chosen by maximum mean silhouette, ties going to the smaller k. k = 1
    is used only when no other k is possible. Clusters whose members come from
    fewer than a min_support fraction of the demonstrations are pruned.

    Returns a list of Subgoal objects ordered by mean switch time, with
    identifiers consecutive from first_subgoal_id.
    """

    switches = [switch for switch in switches
                if switch.factor_id() == factor.factor_id()]
    if len(switches) == 0:
        return []

    X = np.array([switch.state() for switch in switches], dtype=np.float64)
    n = X.shape[0]
    distinct = np.unique(X, axis=0).shape[0]

    labels = np.zeros(n, dtype=np.int64)
    best_score = None
    for k in range(2, min(k_max, distinct, n - 1) + 1):
        kmeans = KMeans(n_clusters=k, init="k-means++", n_init=10,
                        max_iter=200, random_state=seed).fit(X)
        score = silhouette_score(X, kmeans.labels_)
        if best_score is None or score > best_score:
            best_score = score
            labels = np.array(kmeans.labels_, dtype=np.int64)

    demo_count = len(demos)
    clusters = []
    for label in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == label)
        points = X[members, :]
        target = points.mean(axis=0)
        mean_distance = np.sqrt(((points - target) ** 2).sum(axis=1)).mean()
        threshold = max(factor.threshold(), 1.5 * mean_distance,
                        _THRESHOLD_FLOOR)
        support = len(set(switches[i].traj_id() for i in members)) \
            / demo_count
        mean_time = np.mean([switches[i].t() for i in members])
        clusters.append((mean_time, tuple(target), threshold, support))

    kept = [cluster for cluster in clusters if cluster[3] >= min_support]
    if len(kept) == 0:
        warnings.warn(f"All subgoal clusters pruned for factor "
                      f"{factor.name():s}", RuntimeWarning)
    kept.sort(key=lambda cluster: (cluster[0], cluster[1]))

    return [Subgoal(first_subgoal_id + i, factor.factor_id(), target,
                    threshold, min(support, 1.0), factor.mask(),
                    name=f"{factor.name():s}:{i:d}")
            for i, (_, target, threshold, support) in enumerate(kept)]


def _copy_demos(demos, copies):
    if copies == 1:
        return demos
    trajectories = []
    for traj in demos:
        for copy in range(copies):
            trajectories.append(Trajectory(f"{traj.traj_id():s}#{copy:d}",
                                           traj.steps()))
    return DemoSet(trajectories, demos.feature_names(),
                   demos.action_count())


def _renumber(subgoals, factor, first_subgoal_id):
    return [Subgoal(first_subgoal_id + i, subgoal.factor_id(),
                    subgoal.target(), subgoal.threshold(), subgoal.support(),
                    subgoal.mask(), name=f"{factor.name():s}:{i:d}")
            for i, subgoal in enumerate(subgoals)]


def discover_with_diagnostics(demos, factorization, parameters=None):
    """
    Run subgoal discovery. Returns (subgoal_set, diagnostics), where
    diagnostics holds, per factor, the selected regime count, the BIC for each
    candidate regime count, and the switch points after propagation.
    """

    parameters = discovery_parameters(parameters)
    seed = parameters["seed"]
    verbose = parameters["verbose"]
    if factorization.feature_dim() != demos.feature_dim():
        raise DiscoveryException("Factorization dimension does not match "
                                 "the demonstrations", stage="config")
    demos = _copy_demos(demos.canonical(), parameters["demo_copies"])

    switches = []
    diagnostics = {}
    for factor in factorization:
        try:
            trajectories = [traj for traj in demos if len(traj) > 1]
            changing = any(
                np.any(np.abs(np.diff(factor.project(traj.features()),
                                      axis=0)) > 0.0)
                for traj in trajectories)
            if not changing:
                diagnostics[factor.factor_id()] = {"K": 1, "bic_per_k": []}
                if verbose:
                    info(f"Factor {factor.name():s}: constant, no switches")
                continue

            std = standardization(demos, factor.mask())
            vectors = [build_transition_vectors(traj, factor.mask(), std)
                       for traj in trajectories]
            model = fit_gmm(np.concatenate(vectors, axis=0),
                            k_max=parameters["k_max"],
                            restarts=parameters["restarts"], seed=seed,
                            lengths=[v.shape[0] for v in vectors],
                            standardization=std, verbose=verbose)
            factor_switches = []
            for traj in trajectories:
                factor_switches.extend(detect_switches(
                    traj, factor, model, w_min=parameters["w_min"],
                    terminal=parameters["include_terminal"],
                    merge_distance=parameters["merge_distance"]))
        except DiscoveryException:
            raise
        except Exception as e:
            raise DiscoveryException(f"Factor {factor.name():s}: {e}",
                                     stage="segmentation",
                                     factor=factor.name())
        diagnostics[factor.factor_id()] = {"K": model.K(),
                                           "bic_per_k": model.bic_per_k()}
        switches.extend(factor_switches)
        if verbose:
            info(f"Factor {factor.name():s}: {model.K():d} regime(s), "
                 f"{len(factor_switches):d} switch point(s)")

    try:
        switches = propagate_switch_times(switches, demos, factorization)
    except DiscoveryException:
        raise
    except Exception as e:
        raise DiscoveryException(str(e), stage="propagation")

    per_factor = {}
    subgoal_id = 0
    for factor in factorization:
        try:
            subgoals = cluster_subgoals(
                switches, demos, factor, k_max=parameters["cluster_k_max"],
                min_support=parameters["min_support"], seed=seed)
            if parameters["drop_start_subgoals"]:
                subgoals = [
                    subgoal for subgoal in subgoals
                    if not all(subgoal.contains(traj.steps()[0].features())
                               for traj in demos)]
        except DiscoveryException:
            raise
        except Exception as e:
            raise DiscoveryException(f"Factor {factor.name():s}: {e}",
                                     stage="clustering",
                                     factor=factor.name())
        subgoals = _renumber(subgoals, factor, subgoal_id)
        subgoal_id += len(subgoals)
        per_factor[factor.factor_id()] = subgoals
        info(f"Factor {factor.name():s}: {len(subgoals):d} subgoal(s)")

        diagnostics[factor.factor_id()]["switch_points"] = [
            switch.to_dict() for switch in switches
            if switch.factor_id() == factor.factor_id()]

    diagnostics = {"factors": [
        dict(factor_id=factor.factor_id(), name=factor.name(),
             **diagnostics[factor.factor_id()])
        for factor in factorization]}
    return SubgoalSet(factorization, per_factor, seed=seed), diagnostics


def discover(demos, factorization, parameters=None):
    """
    Discover subgoals from demonstrations. Per factor: build transition
    vectors, fit the regime mixture, and detect switches. Switch times are then
    propagated across factors once, and the switch states of each factor are
    clustered into subgoals. Deterministic given parameters["seed"].
    """

    subgoal_set, _ = discover_with_diagnostics(demos, factorization,
                                               parameters=parameters)
    return subgoal_set
