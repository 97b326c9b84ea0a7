"""The Objective type: an evaluatable target function with optional
derivative oracles, a sign constraint, and a domain predicate.

The callables operate on unwrapped observation values: a coordinate vector
for Euclidean observations, a :class:`~debias.observations.WeightedEmpirical`
for functional ones, or a tuple of those for paired inputs.  ``evaluate``
takes care of unwrapping, domain checking, and finiteness checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .observations import EuclideanPoint, WeightedEmpirical


class DomainError(ValueError):
    """Evaluation was requested outside the objective's domain."""


class EvaluationError(ArithmeticError):
    """The objective produced a non-finite value."""


def unwrap(obs):
    """Strip observation wrappers down to the raw value the callables take."""
    if isinstance(obs, EuclideanPoint):
        return obs.coords
    if isinstance(obs, WeightedEmpirical):
        return obs
    if isinstance(obs, tuple):
        return tuple(unwrap(o) for o in obs)
    return np.asarray(obs, dtype=float)


@dataclass
class Objective:
    """An estimation target F with whatever oracles the problem provides.

    ``fn`` maps an unwrapped observation value to a float.  ``gradient``,
    ``hessian`` and ``third_derivative`` (when present) map a coordinate
    vector to the corresponding derivative array.  ``sign_constraint`` is
    one of ``"none"``, ``"positive"``, ``"negative"``; the scaling method
    requires a sign-definite objective.  ``fn_many`` is an optional batched
    evaluator over an (K, d) array of points, used to keep hot loops out of
    Python.
    """

    fn: Callable
    gradient: Optional[Callable] = None
    hessian: Optional[Callable] = None
    third_derivative: Optional[Callable] = None
    sign_constraint: str = "none"
    domain_check: Optional[Callable] = None
    fn_many: Optional[Callable] = None
    cov_denominator: str = "unbiased"
    name: str = ""

    def __post_init__(self):
        if self.sign_constraint not in ("none", "positive", "negative"):
            raise ValueError(f"bad sign_constraint {self.sign_constraint!r}")
        if self.cov_denominator not in ("unbiased", "plugin"):
            raise ValueError(f"bad cov_denominator {self.cov_denominator!r}")

    def in_domain(self, obs) -> bool:
        value = unwrap(obs)
        return True if self.domain_check is None else bool(self.domain_check(value))

    def evaluate(self, obs) -> float:
        """F at one observation; raises DomainError / EvaluationError."""
        value = unwrap(obs)
        if self.domain_check is not None and not self.domain_check(value):
            raise DomainError(f"{self.name or 'objective'}: point outside domain")
        y = float(self.fn(value))
        if not math.isfinite(y):
            raise EvaluationError(f"{self.name or 'objective'}: non-finite value {y}")
        return y

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        """F at each row of an (K, d) array of Euclidean points."""
        points = np.asarray(points, dtype=float)
        if self.domain_check is not None:
            for i, row in enumerate(points):
                if not self.domain_check(row):
                    raise DomainError(f"{self.name or 'objective'}: row {i} outside domain")
        if self.fn_many is not None:
            out = np.asarray(self.fn_many(points), dtype=float)
        else:
            out = np.array([float(self.fn(row)) for row in points])
        return out
