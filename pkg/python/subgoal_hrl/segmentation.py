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
import scipy.linalg as sp_linalg
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform
from scipy.special import logsumexp
from sklearn.cluster import kmeans_plusplus
import warnings

__all__ = \
    [
        "SegmentationException",

        "SldsModel",
        "Standardization",
        "SwitchPoint",

        "build_transition_vectors",
        "detect_switches",
        "em_gmm",
        "fit_gmm",
        "gmm_log_likelihood",
        "standardization"
    ]


class SegmentationException(Exception):
    pass


_STD_TOL = 1.0e-12
_RIDGE = 1.0e-6
_EM_TOL = 1.0e-7
_EM_MAX_ITERATIONS = 300


class Standardization:
    """
    Per-dimension affine map x -> (x - mean) / scale. Dimensions with sample
    standard deviation below 1e-12 are left uncentered and unscaled.
    """

    def __init__(self, mean, scale):
        mean = np.array(mean, dtype=np.float64)
        scale = np.array(scale, dtype=np.float64)
        if mean.shape != scale.shape or len(mean.shape) != 1:
            raise SegmentationException("Invalid standardization")
        if np.any(scale <= 0.0):
            raise SegmentationException("Invalid standardization scale")
        self._mean = mean
        self._scale = scale

    def mean(self):
        return self._mean.copy()

    def scale(self):
        return self._scale.copy()

    def dim(self):
        return self._mean.shape[0]

    def __call__(self, vectors):
        return (np.asarray(vectors, dtype=np.float64) - self._mean) \
            / self._scale


def _raw_transition_vectors(traj, mask):
    if len(traj) < 2:
        raise SegmentationException(f"Trajectory {traj.traj_id():s} has "
                                    f"length 1")
    x = traj.features()[:, list(mask)]
    return np.hstack([x[:-1, :], x[1:, :] - x[:-1, :]])


def standardization(demos, mask):
    """
    DemoSet-wide mean and standard deviation of the transition vectors for
    the given feature mask.
    """

    vectors = [_raw_transition_vectors(traj, mask)
               for traj in demos if len(traj) > 1]
    if len(vectors) == 0:
        raise SegmentationException("No transitions")
    vectors = np.concatenate(vectors, axis=0)
    mean = vectors.mean(axis=0)
    std = vectors.std(axis=0)
    flat = std < _STD_TOL
    mean[flat] = 0.0
    std[flat] = 1.0
    return Standardization(mean, std)


def build_transition_vectors(traj, mask, standardization=None):
    """
    Stacked vectors [x_t; x_{t+1} - x_t] for t = 0, ..., T - 2 over the
    masked features, shape (T - 1, 2 m).
    """

    vectors = _raw_transition_vectors(traj, mask)
    if standardization is not None:
        if standardization.dim() != vectors.shape[1]:
            raise SegmentationException("Dimension mismatch")
        vectors = standardization(vectors)
    return vectors


def _cholesky_factors(covariances):
    factors = []
    for j, covariance in enumerate(covariances):
        try:
            factors.append(sp_linalg.cholesky(covariance, lower=True))
        except sp_linalg.LinAlgError:
            raise SegmentationException(f"Covariance {j:d} not positive "
                                        f"definite")
    return factors


def _log_gaussians(X, means, chol_factors):
    n, D = X.shape
    log_prob = np.empty((n, len(means)), dtype=np.float64)
    for j, (mean, L) in enumerate(zip(means, chol_factors)):
        y = sp_linalg.solve_triangular(L, (X - mean).T, lower=True)
        log_det = 2.0 * np.log(np.diag(L)).sum()
        log_prob[:, j] = -0.5 * (D * np.log(2.0 * np.pi) + log_det
                                 + (y ** 2).sum(axis=0))
    return log_prob


def _m_step(X, resp, ridge_weight):
    n, D = X.shape
    counts = resp.sum(axis=0) + 10.0 * np.finfo(np.float64).eps
    weights = counts / counts.sum()
    means = (resp.T @ X) / counts[:, None]
    covariances = np.empty((resp.shape[1], D, D), dtype=np.float64)
    for j in range(resp.shape[1]):
        diff = X - means[j]
        covariances[j] = ((resp[:, j, None] * diff).T @ diff
                          + ridge_weight * np.eye(D)) / counts[j]
        covariances[j] = 0.5 * (covariances[j] + covariances[j].T)
    return weights, means, covariances


def gmm_log_likelihood(X, weights, means, covariances):
    """
    Per-sample log mixture density and log responsibilities.
    """

    X = np.asarray(X, dtype=np.float64)
    chol_factors = _cholesky_factors(covariances)
    with np.errstate(divide="ignore"):
        log_weighted = _log_gaussians(X, means, chol_factors) \
            + np.log(weights)[None, :]
    log_density = logsumexp(log_weighted, axis=1)
    return log_density, log_weighted - log_density[:, None]


def em_gmm(X, k, rng, tol=_EM_TOL, max_iterations=_EM_MAX_ITERATIONS,
           ridge=_RIDGE):
    """
    Full-covariance Gaussian mixture EM from a k-means++ seeded hard
    assignment.

    The covariance M-step is Sigma_j = (S_j + ridge n I) / N_j rather than
    S_j / N_j + ridge I. It is the exact maximizer of the log-likelihood
    penalized by -(ridge n / 2) sum_j tr(Sigma_j^{-1}). The returned trace
    is of this penalized objective and is non-decreasing. Convergence is
    tested on it. Since N_j <= n, the ridge term is ridge n / N_j >=
    ridge, so each covariance has eigenvalues of at least ridge.

    Returns (weights, means, covariances, trace, converged).
    """

    X = np.asarray(X, dtype=np.float64)
    n, D = X.shape
    if k < 1 or k > n:
        raise SegmentationException("Invalid component count")
    ridge_weight = ridge * n

    centers, _ = kmeans_plusplus(
        X, k, random_state=int(rng.integers(np.iinfo(np.int32).max)))
    distances = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    resp = np.zeros((n, k), dtype=np.float64)
    resp[np.arange(n), np.argmin(distances, axis=1)] = 1.0
    weights, means, covariances = _m_step(X, resp, ridge_weight)

    trace = []
    converged = False
    for _ in range(max_iterations):
        chol_factors = _cholesky_factors(covariances)
        log_weighted = _log_gaussians(X, means, chol_factors) \
            + np.log(weights)[None, :]
        log_density = logsumexp(log_weighted, axis=1)
        penalty = 0.0
        for L in chol_factors:
            L_inv = sp_linalg.solve_triangular(L, np.eye(D), lower=True)
            penalty += (L_inv ** 2).sum()
        trace.append(float(log_density.sum() - 0.5 * ridge_weight * penalty))
        if len(trace) > 1 and trace[-1] - trace[-2] < tol:
            converged = True
            break

        resp = np.exp(log_weighted - log_density[:, None])
        weights, means, covariances = _m_step(X, resp, ridge_weight)

    return weights, means, covariances, trace, converged


class SldsModel:
    """
    Mixture model over stacked transition vectors. Each component is one
    regime of the switching linear dynamics.
    """

    def __init__(self, weights, means, covariances, trans_counts, bic_per_k,
                 log_likelihood_trace, standardization=None):
        weights = np.array(weights, dtype=np.float64)
        means = np.array(means, dtype=np.float64)
        covariances = np.array(covariances, dtype=np.float64)
        trans_counts = np.array(trans_counts, dtype=np.int64)
        K = weights.shape[0]
        if K < 1 or means.shape[0] != K or covariances.shape[0] != K \
                or trans_counts.shape != (K, K):
            raise SegmentationException("Inconsistent model dimensions")
        if abs(weights.sum() - 1.0) > 1.0e-9 or np.any(weights < 0.0):
            raise SegmentationException("Weights must lie on the simplex")

        self._weights = weights
        self._means = means
        self._covariances = covariances
        self._trans_counts = trans_counts
        self._bic_per_k = tuple(float(b) for b in bic_per_k)
        self._log_likelihood_trace = tuple(log_likelihood_trace)
        self._standardization = standardization

    def K(self):
        return self._weights.shape[0]

    def dim(self):
        return self._means.shape[1]

    def weights(self):
        return self._weights.copy()

    def means(self):
        return self._means.copy()

    def covariances(self):
        return self._covariances.copy()

    def trans_counts(self):
        return self._trans_counts.copy()

    def transition_matrix(self):
        """
        Row-normalized trans_counts. Rows without counts are uniform.
        """

        counts = self._trans_counts.astype(np.float64)
        totals = counts.sum(axis=1)
        P = np.full(counts.shape, 1.0 / self.K(), dtype=np.float64)
        nonzero = totals > 0
        P[nonzero, :] = counts[nonzero, :] / totals[nonzero, None]
        return P

    def bic_per_k(self):
        return list(self._bic_per_k)

    def log_likelihood_trace(self):
        return list(self._log_likelihood_trace)

    def standardization(self):
        return self._standardization

    def log_likelihood(self, vectors):
        log_density, _ = gmm_log_likelihood(vectors, self._weights,
                                            self._means, self._covariances)
        return float(log_density.sum())

    def responsibilities(self, vectors):
        _, log_resp = gmm_log_likelihood(vectors, self._weights, self._means,
                                         self._covariances)
        return np.exp(log_resp)

    def regime_groups(self, merge_distance):
        """
        Group index of each regime, numbered by first appearance.

        The distance between two regimes is the distance between the
        displacement parts of their means, divided by the pooled
        per-dimension displacement standard deviation. Groups are the
        complete-linkage clusters cut at merge_distance, so every pair of
        regimes in a group is within merge_distance, and a broad regime
        cannot join two distinct motions. Regimes differing only in position
        then share a group. merge_distance <= 0 keeps every regime separate.
        """

        K = self.K()
        if merge_distance <= 0.0 or K == 1:
            return np.arange(K)
        if self.dim() % 2 != 0:
            raise SegmentationException("Expected stacked transition "
                                        "vectors")
        m = self.dim() // 2
        displacement = self._means[:, m:]
        spread = np.array([np.trace(covariance[m:, m:]) / m
                           for covariance in self._covariances])
        gap = np.sqrt(((displacement[:, None, :]
                        - displacement[None, :, :]) ** 2).sum(axis=2))
        distance = gap / np.sqrt(spread[:, None] + spread[None, :])
        np.fill_diagonal(distance, 0.0)
        clusters = fcluster(linkage(squareform(distance, checks=False),
                                    method="complete"),
                            t=merge_distance, criterion="distance")
        _, groups = np.unique(clusters, return_inverse=True)
        first = {}
        for group in groups:
            first.setdefault(int(group), len(first))
        return np.array([first[int(group)] for group in groups],
                        dtype=np.int64)

    def labels(self, vectors, merge_distance=0.0):
        """
        Hard regime labels, as regime group indices when merge_distance > 0.
        """

        vectors = np.asarray(vectors, dtype=np.float64)
        if len(vectors.shape) != 2 or vectors.shape[1] != self.dim():
            raise SegmentationException("Dimension mismatch")
        _, log_resp = gmm_log_likelihood(vectors, self._weights, self._means,
                                         self._covariances)
        labels = np.argmax(log_resp, axis=1)
        if merge_distance > 0.0:
            labels = self.regime_groups(merge_distance)[labels]
        return labels


def _parameter_count(k, D):
    return k * (1 + D + (D * (D + 1)) // 2) - 1


def fit_gmm(vectors, k_max=8, restarts=5, seed=0, lengths=None,
            standardization=None, verbose=False):
    """
    Fit a Gaussian mixture to transition vectors, selecting the number of
    components by BIC.

    Arguments:

    vectors          Transition vectors, shape (n, D).
    k_max            Maximum number of components.
    restarts         Number of seeded EM restarts per component count. The
                     restart with the largest log-likelihood is kept, ties
                     going to the lowest restart index.
    seed             Base seed. Restart r for k components uses the generator
                     np.random.default_rng([seed, k, r]).
    lengths          (Optional) Sequence lengths partitioning the vectors.
                     Discrete transitions are not counted across sequence
                     boundaries.
    standardization  (Optional) The Standardization applied to the vectors,
                     recorded on the model.
    verbose          Whether to log the BIC for each component count.
    """

    X = np.asarray(vectors, dtype=np.float64)
    if len(X.shape) != 2:
        raise SegmentationException("Expected a 2D array of vectors")
    n, D = X.shape
    if k_max < 1:
        raise SegmentationException("Require k_max >= 1")
    if restarts < 1:
        raise SegmentationException("Require restarts >= 1")
    if n < 2 * k_max:
        raise SegmentationException("insufficient data")
    if lengths is None:
        lengths = [n]
    elif sum(lengths) != n:
        raise SegmentationException("Sequence lengths do not match vectors")

    bic_per_k = []
    fits = []
    for k in range(1, k_max + 1):
        best = None
        for restart in range(restarts):
            rng = np.random.default_rng([seed, k, restart])
            weights, means, covariances, trace, converged = em_gmm(X, k, rng)
            if not converged:
                warnings.warn(f"EM reached iteration limit for k={k:d}, "
                              f"restart {restart:d}", RuntimeWarning)
            log_likelihood = float(
                gmm_log_likelihood(X, weights, means, covariances)[0].sum())
            if best is None or log_likelihood > best[0]:
                best = (log_likelihood, weights, means, covariances, trace)
        bic = -2.0 * best[0] + _parameter_count(k, D) * np.log(n)
        bic_per_k.append(bic)
        fits.append(best)
        if verbose:
            info(f"GMM k={k:d}: log-likelihood {best[0]:.6e}, "
                 f"BIC {bic:.6e}")

    K = int(np.argmin(bic_per_k)) + 1
    _, weights, means, covariances, trace = fits[K - 1]

    _, log_resp = gmm_log_likelihood(X, weights, means, covariances)
    labels = np.argmax(log_resp, axis=1)
    trans_counts = np.zeros((K, K), dtype=np.int64)
    offset = 0
    for length in lengths:
        sequence = labels[offset:offset + length]
        for a, b in zip(sequence[:-1], sequence[1:]):
            trans_counts[a, b] += 1
        offset += length

    return SldsModel(weights / weights.sum(), means, covariances,
                     trans_counts, bic_per_k, trace,
                     standardization=standardization)


class SwitchPoint:
    """
    A detected (or propagated) change of dynamics regime.

    Arguments:

    traj_id     Trajectory identifier.
    t           Switch time, 1 <= t <= T - 1.
    factor_id   Factor identifier.
    state       Masked feature vector at time t.
    propagated  Whether the switch was copied from another factor.
    """

    def __init__(self, traj_id, t, factor_id, state, propagated=False):
        t = int(t)
        if t < 1:
            raise SegmentationException("Switch time must be positive")
        self._traj_id = str(traj_id)
        self._t = t
        self._factor_id = int(factor_id)
        self._state = tuple(float(x) for x in state)
        self._propagated = bool(propagated)

    def traj_id(self):
        return self._traj_id

    def t(self):
        return self._t

    def factor_id(self):
        return self._factor_id

    def state(self):
        return np.array(self._state, dtype=np.float64)

    def propagated(self):
        return self._propagated

    def key(self):
        return (self._traj_id, self._t, self._factor_id)

    def to_dict(self):
        return {"traj_id": self._traj_id, "t": self._t,
                "state": list(self._state), "propagated": self._propagated}

    def __eq__(self, other):
        return isinstance(other, SwitchPoint) \
            and self.key() == other.key() \
            and self._state == other._state \
            and self._propagated == other._propagated

    def __hash__(self):
        return hash((self.key(), self._state, self._propagated))

    def __repr__(self):
        return (f"SwitchPoint({self._traj_id!r}, {self._t:d}, "
                f"{self._factor_id:d}, {self._state!r}, "
                f"propagated={self._propagated!r})")


def detect_switches(traj, factor, model, w_min=3, terminal=False,
                    merge_distance=0.0):
    """
    Switch points for one trajectory and factor. A switch is emitted at each
    t >= 1 where the hard regime label of transition t differs from that of
    transition t - 1. With merge_distance > 0 the labels are regime groups,
    see SldsModel.regime_groups. A switch closer than w_min steps to the
    previously kept switch is merged into it.

    With terminal=True, a trajectory ending with done=True whose factor
    features changed also gets a switch at its final time T - 1, replacing
    any merged switch within w_min steps of it.
    """

    if w_min < 1:
        raise SegmentationException("Require w_min >= 1")
    vectors = build_transition_vectors(traj, factor.mask(),
                                       model.standardization())
    if vectors.shape[1] != model.dim():
        raise SegmentationException("Dimension mismatch")
    labels = model.labels(vectors, merge_distance=merge_distance)
    features = traj.features()

    times = []
    for t in range(1, labels.shape[0]):
        if labels[t] != labels[t - 1] \
                and (len(times) == 0 or t - times[-1] >= w_min):
            times.append(t)

    T = len(traj)
    if terminal and traj.done():
        x = factor.project(features)
        if np.any(np.abs(x - x[0]) > 0.0):
            times = [t for t in times if T - 1 - t >= w_min]
            times.append(T - 1)

    return [SwitchPoint(traj.traj_id(), t, factor.factor_id(),
                        factor.project(features[t]))
            for t in times]
