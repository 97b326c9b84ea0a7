"""Observation containers: Euclidean points, weighted empirical distributions,
and homogeneous sets of either.

An observation is the averageable unit the estimators work on.  Euclidean
points average coordinatewise; weighted empirical distributions (finitely
supported measures) average as mixtures, merging duplicate support points.
"""

from __future__ import annotations

import numpy as np


class ContractError(ValueError):
    """An input violated a documented precondition."""


class EuclideanPoint:
    """A point in R^d with finite coordinates."""

    __slots__ = ("coords",)

    def __init__(self, coords):
        c = np.atleast_1d(np.asarray(coords, dtype=float))
        if c.ndim != 1:
            raise ContractError(f"EuclideanPoint needs a 1-d vector, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ContractError("EuclideanPoint coordinates must be finite")
        self.coords = c

    @property
    def dimension(self) -> int:
        return self.coords.shape[0]

    def __eq__(self, other):
        return isinstance(other, EuclideanPoint) and np.array_equal(self.coords, other.coords)

    def __repr__(self):
        return f"EuclideanPoint({self.coords!r})"


class WeightedEmpirical:
    """A finitely supported distribution sum_j w_j * delta_{s_j} on R^p.

    Weights are nonnegative and sum to 1 (within 1e-12).  A Dirac delta is
    the special case of a single support point with weight 1.
    """

    __slots__ = ("support", "weights")

    def __init__(self, support, weights=None):
        s = np.atleast_2d(np.asarray(support, dtype=float))
        if s.shape[0] == 0:
            raise ContractError("WeightedEmpirical support must be nonempty")
        if not np.all(np.isfinite(s)):
            raise ContractError("WeightedEmpirical support points must be finite")
        if weights is None:
            w = np.full(s.shape[0], 1.0 / s.shape[0])
        else:
            w = np.asarray(weights, dtype=float)
        if w.shape != (s.shape[0],):
            raise ContractError("weights length must match number of support points")
        if np.any(w < 0):
            raise ContractError("WeightedEmpirical weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ContractError(f"WeightedEmpirical weights must sum to 1, got {w.sum()!r}")
        self.support = s
        self.weights = w

    @classmethod
    def dirac(cls, point) -> "WeightedEmpirical":
        return cls(np.atleast_2d(np.asarray(point, dtype=float)), np.array([1.0]))

    @property
    def dimension(self) -> int:
        return self.support.shape[1]

    def __repr__(self):
        return f"WeightedEmpirical({self.support.shape[0]} atoms in R^{self.dimension})"


Observation = EuclideanPoint | WeightedEmpirical


class ObservationSet:
    """A nonempty, homogeneous collection of observations.

    Euclidean sets are stored as one (n, d) array so means and bootstrap
    means reduce to matrix operations; empirical sets keep the observation
    list.  ``variant`` is ``"euclidean"`` or ``"empirical"``.
    """

    def __init__(self, observations):
        obs = list(observations)
        if len(obs) == 0:
            raise ContractError("ObservationSet must be nonempty")
        first = obs[0]
        if isinstance(first, EuclideanPoint):
            self.variant = "euclidean"
            dim = first.dimension
            for o in obs:
                if not isinstance(o, EuclideanPoint) or o.dimension != dim:
                    raise ContractError("ObservationSet must be homogeneous in variant and dimension")
            self.points = np.stack([o.coords for o in obs])
            self._obs = None
        elif isinstance(first, WeightedEmpirical):
            self.variant = "empirical"
            dim = first.dimension
            for o in obs:
                if not isinstance(o, WeightedEmpirical) or o.dimension != dim:
                    raise ContractError("ObservationSet must be homogeneous in variant and dimension")
            self.points = None
            self._obs = obs
        else:
            raise ContractError(f"unsupported observation type {type(first).__name__}")
        self.dimension = dim

    @classmethod
    def from_points(cls, points) -> "ObservationSet":
        """Euclidean set from an (n, d) array without per-row wrapping."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] == 0:
            raise ContractError("ObservationSet must be nonempty")
        if not np.all(np.isfinite(pts)):
            raise ContractError("observation coordinates must be finite")
        out = cls.__new__(cls)
        out.variant = "euclidean"
        out.points = pts
        out._obs = None
        out.dimension = pts.shape[1]
        return out

    @classmethod
    def from_dirac_points(cls, points) -> "ObservationSet":
        """Empirical set of Dirac deltas at the given (n, p) sample points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls([WeightedEmpirical.dirac(p) for p in pts])

    def __len__(self) -> int:
        return self.points.shape[0] if self.variant == "euclidean" else len(self._obs)

    def observation(self, i: int) -> Observation:
        if self.variant == "euclidean":
            return EuclideanPoint(self.points[i])
        return self._obs[i]

    @property
    def observations(self) -> list:
        return [self.observation(i) for i in range(len(self))]

    def fingerprint(self) -> int:
        """Hash of the raw data, used to assert paired trial designs."""
        if self.variant == "euclidean":
            return hash(self.points.tobytes())
        parts = []
        for o in self._obs:
            parts.append(o.support.tobytes())
            parts.append(o.weights.tobytes())
        return hash(b"".join(parts))


def _merge_support(support: np.ndarray, weights: np.ndarray) -> WeightedEmpirical:
    """Merge duplicate support rows by summing their weights."""
    seen: dict[bytes, int] = {}
    keep_rows = []
    merged = []
    for row, w in zip(support, weights):
        key = row.tobytes()
        if key in seen:
            merged[seen[key]] += w
        else:
            seen[key] = len(keep_rows)
            keep_rows.append(row)
            merged.append(w)
    w = np.asarray(merged, dtype=float)
    total = w.sum()
    if total > 0:
        w = w / total  # renormalize away accumulated rounding
    return WeightedEmpirical(np.stack(keep_rows), w)


def mixture(observations: list[WeightedEmpirical], coeffs: np.ndarray) -> WeightedEmpirical:
    """The mixture sum_i coeffs_i * obs_i with duplicate atoms merged."""
    support = np.concatenate([o.support for o in observations])
    weights = np.concatenate([c * o.weights for c, o in zip(coeffs, observations)])
    keep = weights > 0
    if not np.any(keep):
        raise ContractError("mixture has no mass")
    return _merge_support(support[keep], weights[keep])


def mean_observation(obs_set: ObservationSet) -> Observation:
    """The sample average of an observation set.

    Euclidean sets average coordinatewise.  Empirical sets average as the
    uniform mixture of the member distributions: for n Dirac observations
    this is the empirical distribution with weight (count)/n on each
    distinct point.
    """
    n = len(obs_set)
    if obs_set.variant == "euclidean":
        # anchored mean: exact when all observations coincide
        anchor = obs_set.points[0]
        return EuclideanPoint(anchor + (obs_set.points - anchor).mean(axis=0))
    return mixture(obs_set._obs, np.full(n, 1.0 / n))
