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

import numpy as np
from scipy.ndimage import binary_dilation
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

__all__ = \
    [
        "FactorException",

        "Factor",
        "Factorization",

        "change_indicators",
        "identify_factors",
        "jaccard_matrix",
        "override_factors"
    ]


class FactorException(Exception):
    pass


_CHANGE_TOL = 1.0e-9


class Factor:
    """
    A named group of feature indices.

    Arguments:

    factor_id  Integer identifier.
    name       Factor name.
    mask       Feature indices.
    threshold  Distance threshold for subgoal achievement in the masked
               subspace.
    """

    def __init__(self, factor_id, name, mask, threshold=0.0):
        mask = tuple(sorted(set(int(i) for i in mask)))
        if len(mask) == 0:
            raise FactorException(f"Factor {name:s} has an empty mask")
        if min(mask) < 0:
            raise FactorException(f"Factor {name:s} has a negative index")
        threshold = float(threshold)
        if not np.isfinite(threshold) or threshold < 0.0:
            raise FactorException(f"Factor {name:s} has an invalid threshold")

        self._factor_id = int(factor_id)
        self._name = str(name)
        self._mask = mask
        self._threshold = threshold

    def factor_id(self):
        return self._factor_id

    def name(self):
        return self._name

    def mask(self):
        return self._mask

    def threshold(self):
        return self._threshold

    def project(self, features):
        return np.asarray(features, dtype=np.float64)[..., list(self._mask)]

    def to_dict(self):
        return {"factor_id": self._factor_id, "name": self._name,
                "mask": list(self._mask), "threshold": self._threshold}

    def __eq__(self, other):
        return isinstance(other, Factor) \
            and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self._factor_id, self._name, self._mask,
                     self._threshold))

    def __repr__(self):
        return f"Factor({self._factor_id:d}, {self._name!r}, {self._mask!r})"


class Factorization:
    """
    A partition of the feature indices {0, ..., feature_dim - 1} into factors,
    ordered by smallest feature index with factor_id equal to position.
    """

    def __init__(self, factors, feature_dim):
        factors = tuple(factors)
        feature_dim = int(feature_dim)
        if len(factors) == 0:
            raise FactorException("No factors")

        seen = set()
        for factor in factors:
            if len(seen.intersection(factor.mask())) > 0:
                raise FactorException("overlap")
            seen.update(factor.mask())
        if seen != set(range(feature_dim)):
            if max(seen) >= feature_dim:
                raise FactorException("Factor index out of range")
            raise FactorException("incomplete partition")
        for i, factor in enumerate(factors):
            if factor.factor_id() != i:
                raise FactorException("Invalid factor identifiers")
        if list(factors) != sorted(factors, key=lambda f: f.mask()[0]):
            raise FactorException("Factors must be ordered by smallest "
                                  "feature index")
        names = [factor.name() for factor in factors]
        if len(set(names)) != len(names):
            raise FactorException("Duplicate factor names")

        self._factors = factors
        self._feature_dim = feature_dim

    def factors(self):
        return self._factors

    def __len__(self):
        return len(self._factors)

    def __iter__(self):
        return iter(self._factors)

    def __getitem__(self, factor_id):
        return self._factors[factor_id]

    def feature_dim(self):
        return self._feature_dim

    def factor(self, name):
        for factor in self._factors:
            if factor.name() == name:
                return factor
        raise FactorException(f"Factor not found: {name:s}")

    def to_list(self):
        return [factor.to_dict() for factor in self._factors]

    def __eq__(self, other):
        return isinstance(other, Factorization) \
            and self._factors == other._factors \
            and self._feature_dim == other._feature_dim

    def __hash__(self):
        return hash((self._factors, self._feature_dim))


def change_indicators(traj, w_dilate=0):
    """
    Binary change indicators c_i(t) = 1[|y_{t+1,i} - y_{t,i}| > 1e-9], shape
    (T - 1, d), dilated by +/- w_dilate steps within the trajectory.
    """

    features = traj.features()
    changes = np.abs(np.diff(features, axis=0)) > _CHANGE_TOL
    if w_dilate > 0 and changes.shape[0] > 0:
        structure = np.ones((2 * w_dilate + 1, 1), dtype=bool)
        changes = binary_dilation(changes, structure=structure)
    return changes


def jaccard_matrix(indicators, dilated=None):
    """
    Pairwise Jaccard similarity of the columns of a boolean change matrix.
    With dilated change sets, a change of one feature is matched when the
    other feature changes within the dilation window. Two empty columns have
    similarity 0.
    """

    indicators = np.asarray(indicators, dtype=np.int64)
    if dilated is None:
        dilated = indicators
    dilated = np.asarray(dilated, dtype=np.int64)
    if dilated.shape != indicators.shape \
            or np.any(indicators > dilated):
        raise FactorException("Dilated changes must contain the changes")

    near = indicators.T @ dilated
    both = indicators.T @ indicators
    counts = np.diag(both)
    matched = near + near.T - both
    union = counts[:, None] + counts[None, :] - both
    return np.where(union > 0, matched / np.maximum(union, 1), 0.0)


def identify_factors(demos, corr_threshold=0.2, w_dilate=2):
    """
    Group features that change together into factors.

    Features are linked when the Jaccard similarity of their change-indicator
    sets, dilated by +/- w_dilate steps, is at least corr_threshold. Factors
    are the connected components of the link graph. Factor thresholds are
    initialized to zero.
    """

    if corr_threshold <= 0.0 or corr_threshold > 1.0:
        raise FactorException("Require 0 < corr_threshold <= 1")
    if w_dilate < 0:
        raise FactorException("Require w_dilate >= 0")
    if demos.step_count() < 2:
        raise FactorException("Require at least two time steps")
    demos = demos.canonical()

    raw = [change_indicators(traj) for traj in demos if len(traj) > 1]
    if len(raw) == 0 or not any(c.any() for c in raw):
        raise FactorException("degenerate demos")
    indicators = np.concatenate(raw, axis=0)
    dilated = np.concatenate(
        [change_indicators(traj, w_dilate=w_dilate)
         for traj in demos if len(traj) > 1], axis=0)

    similarity = jaccard_matrix(indicators, dilated)
    links = similarity >= corr_threshold
    np.fill_diagonal(links, False)
    _, labels = connected_components(csr_matrix(links), directed=False)

    groups = {}
    for i, label in enumerate(labels):
        groups.setdefault(int(label), []).append(i)
    masks = sorted(groups.values(), key=lambda mask: mask[0])

    names = demos.feature_names()
    factors = [Factor(factor_id, "+".join(names[i] for i in mask), mask)
               for factor_id, mask in enumerate(masks)]
    factorization = Factorization(factors, demos.feature_dim())
    info(f"Identified {len(factorization):d} factor(s): "
         + ", ".join(f"{factor.name():s}{list(factor.mask())!r}"
                     for factor in factorization))
    return factorization


def override_factors(layout, feature_dim):
    """
    Build a Factorization from manual entries, each a dict with keys "name",
    "mask", and optionally "threshold", or a (name, mask[, threshold]) tuple.
    """

    entries = []
    for entry in layout:
        if isinstance(entry, dict):
            try:
                name, mask = entry["name"], entry["mask"]
            except KeyError:
                raise FactorException("Factor entries require name and mask")
            threshold = entry.get("threshold", 0.0)
        else:
            entry = tuple(entry)
            if len(entry) not in (2, 3):
                raise FactorException("Invalid factor entry")
            name, mask = entry[:2]
            threshold = entry[2] if len(entry) == 3 else 0.0
        mask = sorted(set(int(i) for i in mask))
        if len(mask) == 0:
            raise FactorException(f"Factor {name:s} has an empty mask")
        entries.append((name, mask, threshold))

    seen = set()
    for _, mask, _ in entries:
        if len(seen.intersection(mask)) > 0:
            raise FactorException("overlap")
        seen.update(mask)

    entries.sort(key=lambda entry: entry[1][0])
    factors = [Factor(factor_id, name, mask, threshold=threshold)
               for factor_id, (name, mask, threshold) in enumerate(entries)]
    return Factorization(factors, feature_dim)
