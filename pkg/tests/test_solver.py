import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from permsense.errors import ConfigInvalid
from permsense.linalg import projector_pair
from permsense.model import ProblemConfig, generate_instance
from permsense.solver import (
    EstimatorConfig,
    KKT_PASS,
    estimate_joint_altmin,
    estimate_two_stage,
    lambda_from_theorem,
    lasso_projected,
    objective_joint,
    resolve_lambda,
    robust_regression,
    soft_threshold,
)

# frozen constants, computed once from the closed forms
LAMBDA_SIGMA002_P150_M1 = 0.04135573535861165


def rng(seed=0):
    return np.random.default_rng(seed)


class TestSoftThreshold:
    def test_basic(self):
        assert np.allclose(soft_threshold([3.0, -0.5, 0.0], 1.0), [2.0, 0.0, 0.0])

    def test_zero_threshold_identity(self):
        v = rng(1).standard_normal(7)
        assert np.array_equal(soft_threshold(v, 0.0), v)

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            soft_threshold([1.0], -0.1)

    def test_grid_search_oracle(self):
        # per coordinate, soft_threshold minimizes 0.5 (u - v)^2 + t |u|
        g = rng(2)
        v = g.standard_normal(5) * 2
        t = 0.7
        out = soft_threshold(v, t)
        grid = np.linspace(-6, 6, 120_001)  # step 1e-4
        for i in range(5):
            vals = 0.5 * (grid - v[i]) ** 2 + t * np.abs(grid)
            assert abs(out[i] - grid[np.argmin(vals)]) <= 1e-4

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-100, 100), min_size=1, max_size=8),
        st.floats(0, 50),
    )
    def test_shrinks_toward_zero(self, values, t):
        v = np.array(values)
        out = soft_threshold(v, t)
        assert np.all(np.abs(out) <= np.abs(v) + 1e-12)
        assert np.all(np.abs(v) - np.abs(out) <= t + 1e-12)
        assert np.all(out * v >= 0)


class TestLambdaFromTheorem:
    def test_zero_sigma(self):
        assert lambda_from_theorem(0.0, 100) == 0.0

    def test_closed_form_at_e_squared(self):
        val = lambda_from_theorem(1.0, math.e ** 2, 0.0)
        assert abs(val - 8.0 / math.e) < 1e-12

    def test_frozen_regression_value(self):
        assert abs(lambda_from_theorem(0.02, 150, 1.0) - LAMBDA_SIGMA002_P150_M1) < 1e-15

    def test_small_p_rejected(self):
        with pytest.raises(ValueError):
            lambda_from_theorem(1.0, 1)


class TestResolveLambda:
    def test_floor_mode(self):
        cfg = EstimatorConfig(lambda_mode="floor", zero_sigma_lambda_floor=1e-6)
        assert resolve_lambda(cfg, None, 10, [0.0, -5.0, 2.0]) == pytest.approx(5e-6)

    def test_theorem_zero_sigma_falls_back_to_floor(self):
        cfg = EstimatorConfig()
        lam = resolve_lambda(cfg, 0.0, 10, [2.0, -2.0])
        assert lam == pytest.approx(cfg.zero_sigma_lambda_floor * 2.0)

    def test_theorem_normalizations(self):
        p = 50
        lam_thm = lambda_from_theorem(0.1, p)
        cfg_z = EstimatorConfig(theorem_normalization="z")
        cfg_e = EstimatorConfig(theorem_normalization="e")
        assert resolve_lambda(cfg_z, 0.1, p, np.ones(p)) == pytest.approx(lam_thm / math.sqrt(p))
        assert resolve_lambda(cfg_e, 0.1, p, np.ones(p)) == pytest.approx(lam_thm)

    def test_explicit_requires_value(self):
        with pytest.raises(ConfigInvalid):
            EstimatorConfig(lambda_mode="explicit")


def _coordinate_descent_lasso(h_perp, y2, lam, sweeps=40_000, tol=1e-14):
    """Independent oracle: exact coordinate descent on
    (1/p)||Hperp(y2 - sqrt(p) e)||^2 + lam ||e||_1 with Hperp dense."""
    p = len(y2)
    sp = math.sqrt(p)
    e = np.zeros(p)
    diag = np.diag(h_perp)
    for _ in range(sweeps):
        delta = 0.0
        for i in range(p):
            if diag[i] <= 0:
                continue
            c = y2 - sp * e
            c[i] += sp * e[i]  # contribution of all other coordinates
            target = (h_perp[i] @ c) / (sp * diag[i])
            new = math.copysign(max(abs(target) - lam / (2 * diag[i]), 0.0), target)
            delta = max(delta, abs(new - e[i]))
            e[i] = new
        if delta < tol:
            break
    return e


class TestLassoProjected:
    def test_data_in_range_gives_zero(self):
        g = rng(3)
        a2 = g.standard_normal((10, 4))
        y2 = a2 @ g.standard_normal(4)
        proj = projector_pair(a2)
        e, _, kkt = lasso_projected(proj, y2, 10, 0.5)
        assert np.allclose(e, 0)
        assert kkt == 0.0

    def test_threshold_dominance_gives_zero(self):
        # the smooth gradient at the origin is -(2/sqrt(p)) Hperp y2
        g = rng(4)
        a2 = g.standard_normal((12, 3))
        y2 = g.standard_normal(12)
        proj = projector_pair(a2)
        p = 12
        lam = 2.0 * np.max(np.abs(proj.complement_part(y2))) / math.sqrt(p) + 1e-9
        e, _, _ = lasso_projected(proj, y2, p, lam)
        assert np.allclose(e, 0)

    def test_coordinate_descent_cross_check(self):
        cfg0 = ProblemConfig(d=3, m=0, p=8, k=2, noise_percent=2.0, seed=9)
        inst = generate_instance(cfg0)
        proj = projector_pair(inst.a2)
        lam = lambda_from_theorem(inst.sigma, inst.p) / math.sqrt(inst.p)
        e, _, _ = lasso_projected(proj, inst.y2, inst.p, lam)
        h_perp = np.eye(inst.p) - proj.q @ proj.q.T
        e_cd = _coordinate_descent_lasso(h_perp, inst.y2, lam)
        assert np.linalg.norm(e - e_cd) < 1e-8

    def test_sampling_cloud_optimality(self):
        cfg0 = ProblemConfig(d=3, m=0, p=8, k=2, noise_percent=2.0, seed=10)
        inst = generate_instance(cfg0)
        proj = projector_pair(inst.a2)
        lam = lambda_from_theorem(inst.sigma, inst.p) / math.sqrt(inst.p)
        e, _, _ = lasso_projected(proj, inst.y2, inst.p, lam)
        sp = math.sqrt(inst.p)

        def objective(v):
            r = proj.complement_part(inst.y2 - sp * v)
            return (r @ r) / inst.p + lam * np.sum(np.abs(v))

        f_hat = objective(e)
        e0 = inst.z0 / sp
        g = rng(777)
        for center in (e, e0):
            for _ in range(500):
                probe = center + g.standard_normal(inst.p) * g.uniform(1e-4, 0.3)
                assert objective(probe) >= f_hat - 1e-12

    def test_certificate_reported(self):
        cfg0 = ProblemConfig(d=4, m=0, p=14, k=4, noise_percent=2.0, seed=12)
        inst = generate_instance(cfg0)
        proj = projector_pair(inst.a2)
        lam = lambda_from_theorem(inst.sigma, inst.p) / math.sqrt(inst.p)
        _, _, kkt = lasso_projected(proj, inst.y2, inst.p, lam)
        assert kkt <= KKT_PASS * (1 + lam)


class TestTwoStage:
    def test_noiseless_unpermuted_exact(self):
        inst = generate_instance(ProblemConfig(d=5, m=2, p=9, k=0, sigma=0.0, seed=1))
        res = estimate_two_stage(inst)
        assert np.linalg.norm(res.x_hat - inst.x0) < 1e-8
        assert np.allclose(res.z_hat, 0)

    def test_noiseless_permuted_floor_mode(self):
        hits = 0
        for seed in range(20):
            inst = generate_instance(ProblemConfig(d=20, m=5, p=60, k=6, sigma=0.0, seed=seed))
            res = estimate_two_stage(inst, EstimatorConfig(lambda_mode="floor"))
            err = np.linalg.norm(res.x_hat - inst.x0) / np.linalg.norm(inst.x0)
            hits += err < 1e-4
        assert hits >= 19

    def test_matches_joint_solver(self):
        inst = generate_instance(ProblemConfig(d=5, m=3, p=15, k=2, noise_percent=2.0, seed=3))
        r1 = estimate_two_stage(inst)
        r2 = estimate_joint_altmin(inst)
        assert np.linalg.norm(r1.x_hat - r2.x_hat) < 1e-6

    def test_z_is_sqrt_p_times_e(self):
        inst = generate_instance(ProblemConfig(d=4, m=2, p=12, k=2, noise_percent=2.0, seed=4))
        res = estimate_two_stage(inst)
        assert np.allclose(res.z_hat, math.sqrt(inst.p) * res.e_hat)

    def test_result_serializes(self):
        inst = generate_instance(ProblemConfig(d=4, m=2, p=12, k=0, sigma=0.0, seed=5))
        doc = estimate_two_stage(inst).to_json()
        assert '"x_hat"' in doc and '"kkt_residual"' in doc


class TestJointAltmin:
    def test_noiseless_unpermuted_one_pass(self):
        inst = generate_instance(ProblemConfig(d=5, m=2, p=9, k=0, sigma=0.0, seed=6))
        res = estimate_joint_altmin(inst)
        assert np.linalg.norm(res.x_hat - inst.x0) < 1e-8

    def test_threshold_dominance_reduces_to_least_squares(self):
        inst = generate_instance(ProblemConfig(d=4, m=2, p=10, k=0, noise_percent=1.0, seed=7))
        a = np.vstack([inst.a1, inst.a2])
        y = np.concatenate([inst.y1, inst.y2])
        x_ls = np.linalg.lstsq(a, y, rcond=None)[0]
        lam1 = 2 * np.max(np.abs(inst.y2 - inst.a2 @ x_ls)) * 10
        cfg = EstimatorConfig(lambda_mode="explicit",
                              explicit_lambda=lam1 / math.sqrt(inst.p))
        res = estimate_joint_altmin(inst, cfg)
        assert np.allclose(res.z_hat, 0)
        assert np.linalg.norm(res.x_hat - x_ls) < 1e-10

    def test_objective_agreement_many_instances(self):
        for seed in range(50):
            k = (0, 2, 4)[seed % 3]
            inst = generate_instance(
                ProblemConfig(d=5, m=3, p=15, k=k, noise_percent=2.0, seed=seed)
            )
            r1 = estimate_two_stage(inst)
            r2 = estimate_joint_altmin(inst)
            gap = abs(r1.final_objective - r2.final_objective)
            assert gap <= 1e-9 * max(1.0, abs(r2.final_objective))
            assert np.linalg.norm(r1.x_hat - r2.x_hat) <= 1e-6 * (1 + np.linalg.norm(inst.x0))


def _l1_regression_enumeration(a, y):
    """Oracle: an l1-regression optimum interpolates d points, so enumerate
    all (N choose d) interpolating fits and take the best objective."""
    n, d = a.shape
    best = math.inf
    for subset in itertools.combinations(range(n), d):
        sub = a[list(subset)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        x = np.linalg.solve(sub, y[list(subset)])
        best = min(best, float(np.sum(np.abs(y - a @ x))))
    return best


class TestRobustRegression:
    def test_exact_fit(self):
        g = rng(8)
        a = g.standard_normal((9, 3))
        x_star = g.standard_normal(3)
        x = robust_regression(a, a @ x_star)
        assert np.linalg.norm(x - x_star) < 1e-6

    def test_median_property(self):
        a = np.ones((5, 1))
        x = robust_regression(a, np.array([0.0, 0.0, 0.0, 0.0, 100.0]))
        assert abs(x[0]) < 1e-6

    def test_lp_enumeration_oracle(self):
        for seed in range(20):
            g = rng((40, seed))
            a = g.standard_normal((7, 2))
            x_true = g.standard_normal(2)
            y = a @ x_true + 0.05 * g.standard_normal(7)
            y[g.integers(7)] += 10.0  # one gross outlier
            x = robust_regression(a, y)
            obj = float(np.sum(np.abs(y - a @ x)))
            assert obj <= _l1_regression_enumeration(a, y) + 1e-6

    def test_scale_equivariance(self):
        g = rng(41)
        a = g.standard_normal((10, 3))
        y = g.standard_normal(10)
        x1 = robust_regression(a, y)
        for c in (0.5, 2.0, 10.0):
            xc = robust_regression(a, c * y)
            assert np.linalg.norm(xc - c * x1) < 1e-5 * (1 + c * np.linalg.norm(x1))


class TestSupportContainment:
    def test_recovered_support_within_true(self):
        hits = 0
        n_seeds = 40
        for seed in range(n_seeds):
            inst = generate_instance(
                ProblemConfig(d=20, m=0, p=100, k=10, noise_percent=2.0, seed=(50, seed))
            )
            res = estimate_two_stage(inst)
            found = set(np.flatnonzero(np.abs(res.z_hat) > 10 * inst.sigma).tolist())
            true = set(np.flatnonzero(inst.z0).tolist())
            hits += found <= true
        assert hits >= 0.9 * n_seeds


def test_objective_joint_matches_direct_evaluation():
    inst = generate_instance(ProblemConfig(d=4, m=2, p=9, k=2, noise_percent=2.0, seed=55))
    g = rng(56)
    x = g.standard_normal(4)
    z = g.standard_normal(9)
    lam1 = 0.3
    direct = (
        np.sum((inst.y1 - inst.a1 @ x) ** 2)
        + np.sum((inst.y2 - inst.a2 @ x - z) ** 2)
        + lam1 * np.sum(np.abs(z))
    )
    assert np.isclose(objective_joint(inst.a1, inst.a2, inst.y1, inst.y2, x, z, lam1), direct)
