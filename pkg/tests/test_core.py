import math

import numpy as np
import pytest

from debias.core import (
    BootstrapPlan,
    DegenerateDenominatorError,
    UnsupportedMethodError,
    bootstrap_means,
    covariance_debias,
    exact_expectation_debias,
    exact_resample_expectation,
    scale_debias,
    shift_debias,
)
from debias.linalg import quadratic_form, random_symmetric_tensor3
from debias.objectives import DomainError, EvaluationError, Objective
from debias.observations import ContractError, ObservationSet, mean_observation
from debias.problems import p1_quadratic
from debias.resampling import RandomStream


def quad1d():
    return p1_quadratic(np.array([[1.0]]))


def constant_objective(c):
    return Objective(fn=lambda x: c, sign_constraint="positive" if c > 0 else "none")


# ---------------------------------------------------------------------------
# bootstrap_means


def test_bootstrap_means_single_atom():
    s = ObservationSet.from_points([[3.25, -1.5]])
    means = bootstrap_means(s, BootstrapPlan(rounds=20), RandomStream(0))
    assert len(means) == 20
    for m in means:
        assert np.array_equal(m.coords, [3.25, -1.5])


def test_bootstrap_means_two_point_distribution():
    # resample means of {0, 2} with m=2 hit {0, 1, 2} w.p. {1/4, 1/2, 1/4}
    s = ObservationSet.from_points([[0.0], [2.0]])
    K = 4000
    means = bootstrap_means(s, BootstrapPlan(rounds=K, size=2), RandomStream(1))
    vals = np.array([m.coords[0] for m in means])
    assert set(np.unique(vals)) <= {0.0, 1.0, 2.0}
    for target, prob in ((0.0, 0.25), (1.0, 0.5), (2.0, 0.25)):
        freq = np.mean(vals == target)
        se = math.sqrt(prob * (1 - prob) / K)
        assert abs(freq - prob) < 3 * se


def test_bootstrap_means_dirac_weights():
    s = ObservationSet.from_dirac_points([[0.0], [1.0], [2.0]])
    means = bootstrap_means(s, BootstrapPlan(rounds=50), RandomStream(2))
    for m in means:
        assert m.weights.sum() == pytest.approx(1.0, abs=1e-12)
        # weights are multinomial counts over n=3 divided by n
        scaled = m.weights * 3
        assert np.allclose(scaled, np.round(scaled), atol=1e-12)


def test_bootstrap_means_deterministic():
    s = ObservationSet.from_points(np.random.default_rng(3).normal(size=(6, 2)))
    a = bootstrap_means(s, BootstrapPlan(rounds=10), RandomStream(4))
    b = bootstrap_means(s, BootstrapPlan(rounds=10), RandomStream(4))
    for x, y in zip(a, b):
        assert np.array_equal(x.coords, y.coords)


# ---------------------------------------------------------------------------
# shift


def test_shift_single_observation():
    est = shift_debias(quad1d(), ObservationSet.from_points([[1.7]]),
                       BootstrapPlan(rounds=25), RandomStream(0))
    assert est.correction == 0.0
    assert est.debiased_value == est.naive_value == pytest.approx(1.7**2)


def test_shift_constant_objective():
    s = ObservationSet.from_points(np.random.default_rng(5).normal(size=(8, 3)))
    est = shift_debias(constant_objective(7.0), s, BootstrapPlan(rounds=30), RandomStream(1))
    assert est.correction == 0.0
    assert est.debiased_value == 7.0


def test_shift_exact_enumeration_example():
    # {0, 2}, F = x^2: E F(xtilde) = 1.5, c = F(1) - 1.5 = -0.5
    s = ObservationSet.from_points([[0.0], [2.0]])
    est = exact_expectation_debias(quad1d(), s, "shift")
    assert est.correction == pytest.approx(-0.5, abs=1e-14)
    assert est.debiased_value == pytest.approx(0.5, abs=1e-14)
    assert est.naive_value == pytest.approx(1.0, abs=1e-14)


def test_shift_bootstrap_values_length():
    s = ObservationSet.from_points([[0.0], [2.0]])
    est = shift_debias(quad1d(), s, BootstrapPlan(rounds=17), RandomStream(3))
    assert len(est.bootstrap_values) == 17


# ---------------------------------------------------------------------------
# scale


def test_scale_constant_objective():
    s = ObservationSet.from_points(np.random.default_rng(6).normal(size=(5, 2)))
    est = scale_debias(constant_objective(3.0), s, BootstrapPlan(rounds=12), RandomStream(2))
    assert est.correction == 1.0
    assert est.debiased_value == 3.0


def test_scale_single_observation():
    est = scale_debias(quad1d(), ObservationSet.from_points([[2.0]]),
                       BootstrapPlan(rounds=9), RandomStream(0))
    assert est.correction == 1.0
    assert est.debiased_value == 4.0


def test_scale_exact_enumeration_example():
    # {1, 3}, F = x^2: s = 4 * 4.5 / 28.5, debiased = s * 4
    s = ObservationSet.from_points([[1.0], [3.0]])
    est = exact_expectation_debias(quad1d(), s, "scale")
    assert est.correction == pytest.approx(18.0 / 28.5, abs=1e-14)
    assert est.debiased_value == pytest.approx(4.0 * 18.0 / 28.5, abs=1e-13)


def test_scale_rejects_unsigned_before_evaluation():
    calls = []

    def fn(x):
        calls.append(1)
        return float(x[0])

    F = Objective(fn=fn, sign_constraint="none")
    with pytest.raises(UnsupportedMethodError):
        scale_debias(F, ObservationSet.from_points([[1.0]]), BootstrapPlan(rounds=3))
    assert calls == []


def test_scale_negative_objective_matches_negated():
    # the formula is invariant under F -> -F
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(6, 2)) + 3.0
    s = ObservationSet.from_points(pts)
    A = np.eye(2)
    F_pos = Objective(fn=lambda x: float(x @ A @ x) + 1.0, sign_constraint="positive")
    F_neg = Objective(fn=lambda x: -(float(x @ A @ x) + 1.0), sign_constraint="negative")
    est_pos = scale_debias(F_pos, s, BootstrapPlan(rounds=40), RandomStream(8))
    est_neg = scale_debias(F_neg, s, BootstrapPlan(rounds=40), RandomStream(8))
    assert est_neg.correction == pytest.approx(est_pos.correction, rel=1e-12)
    assert est_neg.debiased_value == pytest.approx(-est_pos.debiased_value, rel=1e-12)


def test_scale_degenerate_denominator():
    F = Objective(fn=lambda x: 0.0, sign_constraint="positive")
    with pytest.raises(DegenerateDenominatorError):
        scale_debias(F, ObservationSet.from_points([[1.0], [2.0]]), BootstrapPlan(rounds=5))


# ---------------------------------------------------------------------------
# covariance


def test_covariance_hand_example():
    # d=1, F=x^2 (H=2), {0, 2}: c = -(1/(2*2*1)) * (2 + 2) = -1
    s = ObservationSet.from_points([[0.0], [2.0]])
    est = covariance_debias(quad1d(), s)
    assert est.correction == pytest.approx(-1.0, abs=1e-14)
    assert est.debiased_value == pytest.approx(0.0, abs=1e-14)


def test_covariance_linear_objective():
    F = Objective(
        fn=lambda x: float(x.sum()),
        gradient=lambda x: np.ones_like(x),
        hessian=lambda x: np.zeros((x.size, x.size)),
    )
    s = ObservationSet.from_points(np.random.default_rng(9).normal(size=(7, 3)))
    est = covariance_debias(F, s)
    assert est.correction == 0.0


def test_covariance_requires_hessian():
    F = Objective(fn=lambda x: float(x[0]))
    with pytest.raises(UnsupportedMethodError):
        covariance_debias(F, ObservationSet.from_points([[1.0], [2.0]]))


def test_covariance_unbiased_needs_two():
    with pytest.raises(ContractError):
        covariance_debias(quad1d(), ObservationSet.from_points([[1.0]]))


def test_covariance_plugin_variant():
    s = ObservationSet.from_points([[0.0], [2.0]])
    unbiased = covariance_debias(quad1d(), s, denominator="unbiased")
    plugin = covariance_debias(quad1d(), s, denominator="plugin")
    assert plugin.correction == pytest.approx(unbiased.correction / 2, abs=1e-14)


# ---------------------------------------------------------------------------
# exact expectation as oracle


def test_exact_size_guard():
    s = ObservationSet.from_points(np.random.default_rng(10).normal(size=(30, 1)))
    with pytest.raises(ContractError):
        exact_expectation_debias(quad1d(), s, "shift", resample_size=30)


def test_exact_mode_validation():
    s = ObservationSet.from_points([[1.0]])
    with pytest.raises(ContractError):
        exact_expectation_debias(quad1d(), s, "wiggle")


def test_bootstrap_converges_to_exact():
    # |c_K - c_exact| shrinks like 1/sqrt(K); 4 standard error band
    s = ObservationSet.from_points([[0.0], [1.0], [3.0]])
    F = quad1d()
    exact = exact_expectation_debias(F, s, "shift").correction
    est = shift_debias(F, s, BootstrapPlan(rounds=40_000), RandomStream(11))
    boot = np.asarray(est.bootstrap_values)
    se = boot.std(ddof=1) / math.sqrt(boot.size)
    assert abs(est.correction - exact) < 4 * se


def test_bootstrap_consistency_over_seeds():
    # spec protocol: 200 seeds, K = 10_000, n = 5, d = 2 quadratic
    rng = RandomStream(12)
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    F = p1_quadratic(A)
    pts = rng.normal((5, 2))
    s = ObservationSet.from_points(pts)
    exact = exact_expectation_debias(F, s, "shift").correction
    draws = np.array([
        shift_debias(F, s, BootstrapPlan(rounds=10_000), rng.split(t)).correction
        for t in range(200)
    ])
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - exact) < 4 * se


# ---------------------------------------------------------------------------
# invariants


def test_reconstruction_exact():
    rng = RandomStream(13)
    F = p1_quadratic(np.eye(3) * 1.5)
    for t in range(10):
        s = ObservationSet.from_points(rng.normal((6, 3)) + 2.0)
        sh = shift_debias(F, s, BootstrapPlan(rounds=20), rng.split(t))
        sc = scale_debias(F, s, BootstrapPlan(rounds=20), rng.split(100 + t))
        cv = covariance_debias(F, s)
        assert sh.debiased_value == sh.naive_value + sh.correction
        assert sc.debiased_value == sc.correction * sc.naive_value
        assert cv.debiased_value == cv.naive_value + cv.correction


def test_jensen_direction_exact_shift():
    # convex F: exact shift correction is never positive
    rng = RandomStream(14)
    for t in range(30):
        d = int(rng.generator.integers(1, 4))
        n = int(rng.generator.integers(2, 5))
        A = np.eye(d)
        s = ObservationSet.from_points(rng.normal((n, d)))
        est = exact_expectation_debias(p1_quadratic(A), s, "shift")
        assert est.correction <= 1e-13


def test_degenerate_set_fixed_point():
    F = quad1d()
    for val in (0.1, 1 / 3, 0.7):
        s = ObservationSet.from_points([[val]] * 5)
        plan = BootstrapPlan(rounds=30, size=7)
        assert shift_debias(F, s, plan, RandomStream(1)).correction == 0.0
        assert scale_debias(F, s, plan, RandomStream(1)).correction == 1.0
        assert covariance_debias(F, s).correction == 0.0


def test_quadratic_resampling_identity():
    # E ||xt - xbar||^2_A == (1/(n m)) sum_i ||x_i - xbar||^2_A, any matrix A
    rng = RandomStream(15)
    for _ in range(25):
        n = int(rng.generator.integers(2, 4))
        m = int(rng.generator.integers(2, 4))
        d = int(rng.generator.integers(1, 4))
        pts = rng.normal((n, d))
        A = rng.normal((d, d))
        obs = ObservationSet.from_points(pts)
        xbar = mean_observation(obs).coords
        lhs = exact_resample_expectation(obs, lambda o: quadratic_form(A, o.coords - xbar), m)
        rhs = math.fsum(quadratic_form(A, p - xbar) for p in pts) / (n * m)
        assert abs(lhs - rhs) < 1e-12


def test_third_order_resampling_identity():
    # E T[(xt - xbar)]^3 == (1/(m^2 n)) sum_i T[(x_i - xbar)]^3
    rng = RandomStream(16)
    for _ in range(25):
        n = int(rng.generator.integers(2, 4))
        m = int(rng.generator.integers(2, 4))
        d = int(rng.generator.integers(1, 4))
        pts = rng.normal((n, d))
        T = random_symmetric_tensor3(d, rng)
        obs = ObservationSet.from_points(pts)
        xbar = mean_observation(obs).coords

        def cubic(o):
            y = o.coords - xbar
            return float(np.einsum("abc,a,b,c->", T, y, y, y))

        lhs = exact_resample_expectation(obs, cubic, m)
        rhs = math.fsum(
            float(np.einsum("abc,a,b,c->", T, p - xbar, p - xbar, p - xbar)) for p in pts
        ) / (m * m * n)
        assert abs(lhs - rhs) < 1e-12


def test_quadratic_unbiasedness_smoke():
    # covariance debias of x'Ax has mean-zero residual; small-R version of
    # the acceptance criterion
    rng = RandomStream(17)
    A = np.diag([1.0, 2.0, 3.0])
    F = p1_quadratic(A)
    x_star = np.array([0.5, -0.2, 1.0])
    truth = F.evaluate_batch(x_star[None, :])[0]
    R, n = 4000, 10
    residuals = np.empty(R)
    for t in range(R):
        pts = x_star + rng.split(t).normal((n, 3))
        est = covariance_debias(F, ObservationSet.from_points(pts))
        residuals[t] = est.debiased_value - truth
    se = residuals.std(ddof=1) / math.sqrt(R)
    assert abs(residuals.mean()) < 3 * se


# ---------------------------------------------------------------------------
# error contracts


def test_domain_violation_identifies_resample():
    F = Objective(
        fn=lambda x: float(x[0] ** 2),
        domain_check=lambda x: bool(x[0] < 1.9),
        name="guarded",
    )
    s = ObservationSet.from_points([[0.0], [2.0]])
    # the sample mean (1.0) passes; the all-twos resample does not
    with pytest.raises(DomainError, match="resample"):
        shift_debias(F, s, BootstrapPlan(rounds=200), RandomStream(18))


def test_nonfinite_value_aborts():
    F = Objective(fn=lambda x: float("inf") if x[0] > 1.9 else 1.0)
    s = ObservationSet.from_points([[0.0], [2.0]])
    with pytest.raises(EvaluationError, match="resample"):
        shift_debias(F, s, BootstrapPlan(rounds=200), RandomStream(19))


def test_plan_validation():
    with pytest.raises(ContractError):
        BootstrapPlan(rounds=0)
    with pytest.raises(ContractError):
        BootstrapPlan(rounds=5, size=0)
