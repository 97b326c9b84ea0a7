"""Moment tensors, the sigma quantities, and the sufficient conditions under
which the shift/scale corrections provably reduce expected squared error.

With M2 and M4 the centered second and fourth moment tensors of the noise,
gradient g, Hessian H, and third-derivative tensor T of F at the truth:

    sigma1 = g' M2 g
    sigma2 = tr(M2 H)
    sigma3 = g_a (M2)^{ab} T_{bcd} (M2)^{cd}
    sigma4 = H_ab H_cd (M4)^{abcd}
    sigma4' like sigma4 with H replaced by H + 2 g g' / F(x*)

The shift condition margin is

    margin_shift = sigma2^2/4 - (sigma1/C_K + sqrt(sigma1 sigma4) - sigma3)

and the scale condition margin is

    margin_scale = sigma2^2/4 - (sigma1/C_K + sqrt(sigma1 sigma4')
                   - sigma3 - 4 sigma1 sigma2 / F* + 3 sigma1^2 / F*^2).

The source derivation also admits a variant with sqrt(sigma2 sigma4) in the
shift condition; both margins are reported (``margin_shift_alt``) and
neither is asserted as the unique truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import BootstrapPlan, DebiasEstimate, covariance_debias, scale_debias, shift_debias
from .objectives import Objective
from .observations import ContractError, mean_observation
from .resampling import RandomStream

_MAX_M4_DIM = 20
_PSD_SLOP = 1e-10


@dataclass
class MomentTensors:
    """Centered second (d, d) and fourth (d, d, d, d) moment tensors."""

    m2: np.ndarray
    m4: np.ndarray


@dataclass
class SigmaSet:
    """The five sigma contractions and the condition margins at a given C_K."""

    sigma1: float
    sigma2: float
    sigma3: float
    sigma4: float
    sigma4_prime: Optional[float]
    f_star: float
    c_k: float
    margin_shift: float
    margin_shift_alt: float
    margin_scale: Optional[float]


def moments_from_samples(samples: np.ndarray, center: np.ndarray) -> MomentTensors:
    """Empirical centered moment tensors about the given center."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    center = np.asarray(center, dtype=float)
    d = samples.shape[1]
    if d > _MAX_M4_DIM:
        raise ContractError(f"moment tensors limited to d <= {_MAX_M4_DIM}, got d={d}")
    c = samples - center
    n = samples.shape[0]
    m2 = c.T @ c / n
    m4 = np.einsum("na,nb,nc,nd->abcd", c, c, c, c) / n
    return MomentTensors(m2, m4)


def moments_gaussian(sigma: float, d: int) -> MomentTensors:
    """Analytic tensors for N(x*, sigma^2 I): M2 = sigma^2 I and the Isserlis
    fourth moment sigma^4 (d_ab d_cd + d_ac d_bd + d_ad d_bc)."""
    if d > _MAX_M4_DIM:
        raise ContractError(f"moment tensors limited to d <= {_MAX_M4_DIM}, got d={d}")
    eye = np.eye(d)
    m2 = sigma**2 * eye
    m4 = sigma**4 * (
        np.einsum("ab,cd->abcd", eye, eye)
        + np.einsum("ac,bd->abcd", eye, eye)
        + np.einsum("ad,bc->abcd", eye, eye)
    )
    return MomentTensors(m2, m4)


def third_derivative_tensor(F: Objective, x: np.ndarray) -> np.ndarray:
    """Analytic third derivative when available, otherwise central finite
    differences of the Hessian with step h = cbrt(eps) * max(1, |x|)."""
    x = np.asarray(x, dtype=float)
    if F.third_derivative is not None:
        return np.asarray(F.third_derivative(x), dtype=float)
    if F.hessian is None:
        raise ContractError("third derivative needs a hessian oracle to difference")
    d = x.size
    h = float(np.finfo(float).eps) ** (1.0 / 3.0) * max(1.0, float(np.linalg.norm(x)))
    T = np.empty((d, d, d))
    for c in range(d):
        e = np.zeros(d)
        e[c] = h
        T[:, :, c] = (np.asarray(F.hessian(x + e)) - np.asarray(F.hessian(x - e))) / (2.0 * h)
    return (T + T.transpose(0, 2, 1) + T.transpose(2, 1, 0)
            + T.transpose(1, 0, 2) + T.transpose(1, 2, 0) + T.transpose(2, 0, 1)) / 6.0


def _nonnegative(value: float, label: str) -> float:
    if value < -_PSD_SLOP * (1.0 + abs(value)):
        raise ContractError(f"{label} = {value} violates its PSD sign invariant")
    return max(value, 0.0)


def sigma_set(F: Objective, x_star: np.ndarray, moments: MomentTensors, c_k: float) -> SigmaSet:
    """All sigma quantities of F at x_star under the given noise moments,
    plus the shift/scale condition margins for the ratio C_K = K/n.

    The scale margin needs a strictly positive F(x*); otherwise
    ``sigma4_prime`` and ``margin_scale`` are None.
    """
    if F.gradient is None or F.hessian is None:
        raise ContractError("sigma_set needs gradient and hessian oracles")
    if c_k <= 0:
        raise ContractError(f"c_k must be positive, got {c_k}")
    x_star = np.asarray(x_star, dtype=float)
    g = np.asarray(F.gradient(x_star), dtype=float)
    H = np.asarray(F.hessian(x_star), dtype=float)
    T = third_derivative_tensor(F, x_star)
    m2, m4 = moments.m2, moments.m4

    sigma1 = _nonnegative(float(g @ m2 @ g), "sigma1")
    sigma2 = _nonnegative(float(np.einsum("ab,ab->", m2, H)), "sigma2")
    sigma3 = float(np.einsum("a,ab,bcd,cd->", g, m2, T, m2))
    sigma4 = _nonnegative(float(np.einsum("ab,cd,abcd->", H, H, m4)), "sigma4")

    f_star = F.evaluate(x_star)
    margin_shift = sigma2**2 / 4.0 - (sigma1 / c_k + math.sqrt(sigma1 * sigma4) - sigma3)
    margin_shift_alt = sigma2**2 / 4.0 - (sigma1 / c_k + math.sqrt(sigma2 * sigma4) - sigma3)

    if F.sign_constraint == "positive" and f_star > 0:
        Ap = H + 2.0 * np.outer(g, g) / f_star
        sigma4_prime = _nonnegative(float(np.einsum("ab,cd,abcd->", Ap, Ap, m4)), "sigma4_prime")
        margin_scale = sigma2**2 / 4.0 - (
            sigma1 / c_k
            + math.sqrt(sigma1 * sigma4_prime)
            - sigma3
            - 4.0 * sigma1 * sigma2 / f_star
            + 3.0 * sigma1**2 / f_star**2
        )
    else:
        sigma4_prime = None
        margin_scale = None

    return SigmaSet(
        sigma1=sigma1,
        sigma2=sigma2,
        sigma3=sigma3,
        sigma4=sigma4,
        sigma4_prime=sigma4_prime,
        f_star=f_star,
        c_k=c_k,
        margin_shift=margin_shift,
        margin_shift_alt=margin_shift_alt,
        margin_scale=margin_scale,
    )


@dataclass
class MseComparison:
    """Paired Monte Carlo comparison of one debiasing method vs naive."""

    mse_naive: float
    mse_debiased: float
    paired_diff_mean: float
    paired_diff_se: Optional[float]
    trials: int


def _run_method(name: str, F, obs, plan, rng) -> DebiasEstimate:
    if name == "shift":
        return shift_debias(F, obs, plan, rng)
    if name == "scale":
        return scale_debias(F, obs, plan, rng)
    if name == "cov":
        return covariance_debias(F, obs)
    if name == "identity":
        mean = mean_observation(obs) if not isinstance(obs, tuple) else tuple(map(mean_observation, obs))
        naive = F.evaluate(mean)
        return DebiasEstimate(naive, "identity", 0.0, naive, mean)
    raise ContractError(f"unknown method {name!r}")


def empirical_mse_comparison(F: Objective, instance, n: int, K: int, R: int,
                             methods, stream: RandomStream) -> dict[str, MseComparison]:
    """R paired trials of naive vs debiased squared error on fresh samples.

    Every method sees the same observation set within a trial, so the mean
    paired difference (debiased sq.err - naive sq.err) and its standard
    error make "debiasing strictly helps" a one-sided test.
    """
    if R < 1:
        raise ContractError(f"R must be >= 1, got {R}")
    truth = instance.truth_value
    plan = BootstrapPlan(rounds=K)
    naive_sq = np.empty(R)
    deb_sq = {m: np.empty(R) for m in methods}
    for t in range(R):
        ts = stream.split(t)
        obs = instance.sample_observations(n, ts.split(0))
        for j, m in enumerate(methods):
            est = _run_method(m, F, obs, plan, ts.split(1 + j))
            deb_sq[m][t] = (est.debiased_value - truth) ** 2
            if j == 0:
                naive_sq[t] = (est.naive_value - truth) ** 2
        if not methods:
            mean = mean_observation(obs) if not isinstance(obs, tuple) else tuple(map(mean_observation, obs))
            naive_sq[t] = (F.evaluate(mean) - truth) ** 2
    out = {}
    for m in methods:
        diff = deb_sq[m] - naive_sq
        se = float(diff.std(ddof=1) / math.sqrt(R)) if R > 1 else None
        out[m] = MseComparison(
            mse_naive=float(naive_sq.mean()),
            mse_debiased=float(deb_sq[m].mean()),
            paired_diff_mean=float(diff.mean()),
            paired_diff_se=se,
            trials=R,
        )
    return out
