"""Small dense linear algebra used by the benchmark problem generators:
SPD solves, the equality-constrained quadratic minimizer, quadratic forms,
and random orthogonal / conditioned-SPD matrix generation.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .observations import ContractError
from .resampling import RandomStream


class FactorizationError(ValueError):
    """Cholesky failed: the matrix is not positive definite."""


def cholesky_factor(A: np.ndarray):
    """Cholesky factor of an SPD matrix, as scipy's (c, lower) pair."""
    A = np.asarray(A, dtype=float)
    try:
        return scipy.linalg.cho_factor(A, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise FactorizationError(f"matrix is not positive definite: {exc}") from exc


def cholesky_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b for SPD A."""
    return scipy.linalg.cho_solve(cholesky_factor(A), np.asarray(b, dtype=float))


def quadratic_form(A: np.ndarray, y: np.ndarray) -> float:
    """y^T A y."""
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.shape != (y.shape[0], y.shape[0]):
        raise ContractError(f"dimension mismatch: A {A.shape}, y {y.shape}")
    return float(y @ A @ y)


def kkt_solve(B: np.ndarray, A: np.ndarray, b: np.ndarray):
    """Minimize x^T B x subject to A x = b, for SPD B and full-row-rank A.

    Solved through the Schur complement: x = B^{-1} A^T (A B^{-1} A^T)^{-1} b,
    with optimal value b^T (A B^{-1} A^T)^{-1} b.

    Returns
    -------
    (x, value) : minimizer and minimum value.
    """
    B = np.asarray(B, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    d, p = A.shape
    if d > p:
        raise ContractError(f"A must have full row rank, needs d <= p, got {A.shape}")
    if B.shape != (p, p) or b.shape != (d,):
        raise ContractError(f"shape mismatch: B {B.shape}, A {A.shape}, b {b.shape}")
    Binv_At = cholesky_solve(B, A.T)
    schur = A @ Binv_At
    try:
        lam = cholesky_solve(schur, b)
    except FactorizationError as exc:
        raise FactorizationError(f"A B^-1 A^T is rank deficient: {exc}") from exc
    x = Binv_At @ lam
    value = float(b @ lam)
    residual = np.linalg.norm(A @ x - b)
    if residual > 1e-9 * max(1.0, np.linalg.norm(b)):
        raise FactorizationError(f"KKT solve lost feasibility, |Ax-b| = {residual:.3e}")
    return x, value


def random_orthogonal(d: int, stream: RandomStream) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian with the sign of
    R's diagonal pushed into Q."""
    if d < 1:
        raise ContractError(f"d must be >= 1, got {d}")
    G = stream.normal((d, d))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def spd_with_condition(d: int, kappa: float, stream: RandomStream) -> np.ndarray:
    """Random SPD matrix Q diag(lam) Q^T with eigenvalues in [1, kappa].

    The extreme eigenvalues are pinned to 1 and kappa so the condition number
    is exact; interior eigenvalues are log-uniform in [1, kappa].
    """
    if d < 1:
        raise ContractError(f"d must be >= 1, got {d}")
    if kappa < 1:
        raise ContractError(f"kappa must be >= 1, got {kappa}")
    if d == 1:
        return np.array([[1.0]])
    lam = np.empty(d)
    lam[0] = 1.0
    lam[1] = kappa
    if d > 2:
        lam[2:] = np.exp(stream.uniform(d - 2) * np.log(kappa))
    Q = random_orthogonal(d, stream)
    A = (Q * lam) @ Q.T
    return (A + A.T) / 2.0


def random_symmetric_tensor3(d: int, stream: RandomStream) -> np.ndarray:
    """Random rank-3 tensor symmetrized over all index permutations."""
    T = stream.normal((d, d, d))
    out = np.zeros_like(T)
    for perm in ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
        out += np.transpose(T, perm)
    return out / 6.0
