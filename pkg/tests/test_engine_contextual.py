import math

import numpy as np
import pytest

from semibandits.engine_contextual import (CumulativeLoss, PrecisionEstimate,
                                           ScheduleInvariantError,
                                           batch_mean_actions,
                                           ftrl_mean_action, iterate_entropy,
                                           mgr_estimate, mgr_scan,
                                           _mgr_scan_numpy, run_contextual,
                                           schedule_constants, schedule_init,
                                           schedule_params, schedule_step,
                                           systematic_sample, theta_tilde)
from semibandits.environment import SyntheticEnv, make_env_spec
from semibandits.model import ActionVector, ProblemConfig, split_rng
from semibandits.projection import project_offsets, reference_offsets
from semibandits.regularizer import neg_shannon

from helpers import capped_softmax


def bobw_config(T=64, seed=0, lam=0.1, **kw):
    return ProblemConfig(K=8, m=2, T=T, d=3, lambda_min=lam, seed=seed, **kw)


class TestSchedule:
    def test_initial_beta_prime_is_c1(self):
        cfg = bobw_config()
        c1, _ = schedule_constants(cfg)
        assert schedule_init(cfg).beta_prime == pytest.approx(c1)

    def test_zero_entropy_linear_growth(self):
        cfg = bobw_config(T=1000)
        st = schedule_init(cfg)
        c1 = st.c1
        for t in range(1, 50):
            st = schedule_step(st, 0.0, cfg)[0]
            assert st.beta_prime == pytest.approx(c1 * (t + 1))

    def test_max_entropy_sqrt_growth_within_factor_two(self):
        cfg = ProblemConfig(K=8, m=2, T=10_000, d=3, lambda_min=0.1)
        st = schedule_init(cfg)
        hmax = 2 * math.log(4)
        for t in range(1, 10_000):
            st = schedule_step(st, hmax, cfg)[0]
            ratio = st.beta_prime / (st.c1 * math.sqrt(st.t))
            assert 0.5 <= ratio <= 2.0 + 1e-9

    def test_invariants_hold_over_horizon(self):
        cfg = bobw_config(T=512)
        st = schedule_init(cfg)
        eta, alpha, gamma, M = schedule_params(st, cfg)
        rng = np.random.default_rng(0)
        hmax = 2 * math.log(4)
        for _ in range(511):
            assert 0 < eta <= 0.5 and 0.0 <= gamma <= 0.5
            assert M == math.ceil(st.beta)
            prev_bp, prev_eta = st.beta_prime, eta
            st, eta, alpha, gamma, M = schedule_step(
                st, rng.uniform(0, hmax), cfg)
            # increments bounded by c1, learning rate nonincreasing
            assert prev_bp <= st.beta_prime <= prev_bp + st.c1 + 1e-12
            assert eta <= prev_eta + 1e-15

    def test_entropy_range_checked(self):
        cfg = bobw_config()
        st = schedule_init(cfg)
        with pytest.raises(ScheduleInvariantError):
            schedule_step(st, -0.5, cfg)
        with pytest.raises(ScheduleInvariantError):
            schedule_step(st, 100.0, cfg)

    def test_m_equals_K_rejected(self):
        with pytest.raises(ScheduleInvariantError):
            schedule_constants(ProblemConfig(K=4, m=4, T=16, d=1))


class TestFtrlMeanAction:
    def test_zero_losses_uniform(self):
        cfg = bobw_config()
        cum = CumulativeLoss(np.zeros((8, 3)))
        a = ftrl_mean_action(cum, np.array([0.3, 0.0, 0.1]), 0.1, cfg)
        assert np.allclose(a, 0.25, atol=1e-12)

    def test_softmax_closed_form(self):
        cfg = ProblemConfig(K=2, m=1, T=8, d=1)
        cum = CumulativeLoss(np.array([[math.log(3.0)], [0.0]]))
        a = ftrl_mean_action(cum, np.array([1.0]), 1.0, cfg)
        assert np.allclose(a, [0.25, 0.75], atol=1e-9)

    def test_cap_binding_instance(self):
        # one arm's cumulative score is a large negative surrogate: its
        # coordinate caps at 1 and the remaining mass splits by softmax
        cfg = ProblemConfig(K=3, m=2, T=8, d=1)
        cum = CumulativeLoss(np.array([[-1000.0], [0.2], [-0.1]]))
        a = ftrl_mean_action(cum, np.array([1.0]), 1.0, cfg)
        assert a[0] == pytest.approx(1.0, abs=1e-9)
        want = reference_offsets(np.array([-1000.0, 0.2, -0.1]), 2,
                                 neg_shannon())
        assert np.linalg.norm(a - want) <= 1e-9


class TestMgrEstimate:
    def test_zero_samples_half_identity(self):
        cfg = ProblemConfig(K=3, m=1, T=8, d=2)
        est = mgr_estimate(lambda X: None, lambda n: None, 0, cfg)
        assert np.allclose(est.matrices, 0.5 * np.eye(2)[None], atol=0)

    def test_never_selected_arm(self):
        cfg = ProblemConfig(K=2, m=1, T=8, d=2)
        M = 7
        rng = split_rng(0, 5)

        def ctx(n):
            x = rng.normal(size=(n, 2))
            return x / np.linalg.norm(x, axis=1, keepdims=True)

        est = mgr_estimate(lambda X: np.tile([1, 0], (len(X), 1)), ctx, M, cfg)
        assert np.allclose(est.matrices[1], (M + 1) / 2 * np.eye(2), atol=0)

    def test_d1_geometric_series(self):
        cfg = ProblemConfig(K=1, m=1, T=8, d=1)
        for M in (1, 3, 10, 30):
            est = mgr_estimate(lambda X: np.ones((len(X), 1), dtype=np.uint8),
                               lambda n: np.ones((n, 1)), M, cfg)
            want = (2.0 - 2.0 ** (-M)) / 2.0
            assert est.matrices[0, 0, 0] == pytest.approx(want, abs=1e-15)

    def test_scan_matches_bruteforce_and_fallback(self):
        rng = np.random.default_rng(42)
        for _ in range(40):
            M = int(rng.integers(0, 50))
            K = int(rng.integers(1, 7))
            d = int(rng.integers(1, 4))
            A = (rng.random((M, K)) < 0.4).astype(np.uint8)
            X = rng.normal(size=(M, d))
            X /= np.maximum(1.0, np.linalg.norm(X, axis=1, keepdims=True))
            eye = np.eye(d)
            want = np.zeros((K, d, d))
            C = np.repeat(eye[None], K, axis=0)
            for n in range(M):
                F = eye - 0.5 * np.outer(X[n], X[n])
                for k in range(K):
                    if A[n, k]:
                        C[k] = C[k] @ F
                    want[k] += C[k]
            assert np.allclose(mgr_scan(A, X), want, atol=1e-12)
            assert np.allclose(_mgr_scan_numpy(A, X), want, atol=1e-12)

    def test_operator_norm_bound(self):
        cfg = ProblemConfig(K=4, m=2, T=8, d=3)
        rng = split_rng(1, 5)

        def ctx(n):
            x = rng.normal(size=(n, 3))
            return x / np.linalg.norm(x, axis=1, keepdims=True)

        def pol(X):
            return (rng.random((len(X), 4)) < 0.5).astype(np.uint8)

        for M in (0, 5, 20):
            est = mgr_estimate(pol, ctx, M, cfg)
            assert (est.op_norms() <= (M + 1) / 2 + 1e-12).all()
            sym_gap = np.abs(est.matrices
                             - np.transpose(est.matrices, (0, 2, 1))).max()
            assert sym_gap == 0.0


class TestThetaTilde:
    def test_zero_off_support(self):
        est = PrecisionEstimate(np.tile(0.5 * np.eye(2)[None], (3, 1, 1)), 4)
        th = theta_tilde(est, np.array([1.0, 0.0]), np.array([1.0, 2.0, 3.0]),
                         ActionVector(np.array([0, 1, 0])))
        assert np.allclose(th[0], 0.0) and np.allclose(th[2], 0.0)
        assert np.allclose(th[1], [1.0, 0.0])

    def test_formula(self):
        est = PrecisionEstimate(0.5 * np.eye(2)[None], 4)
        th = theta_tilde(est, np.array([1.0, 0.0]), np.array([1.0]),
                         ActionVector(np.array([1])))
        assert np.allclose(th[0], [0.5, 0.0])


class TestBatchPolicy:
    def test_batch_mean_actions_match_projection(self):
        rng = np.random.default_rng(3)
        for m in (1, 2, 5):
            K = 8
            offs = rng.uniform(-6, 6, size=(200, K))
            batch = batch_mean_actions(offs, m)
            assert np.allclose(batch.sum(axis=1), m, atol=1e-9)
            for i in range(0, 200, 23):
                want = project_offsets(offs[i], m, neg_shannon(), 1e-12)
                assert np.abs(batch[i] - want).max() <= 1e-9
                soft = capped_softmax(np.exp(offs[i].min() - offs[i]), m)
                assert np.abs(batch[i] - soft).max() <= 1e-9

    def test_systematic_sample_exact_cardinality_and_marginals(self):
        rng = np.random.default_rng(4)
        means = batch_mean_actions(rng.uniform(-3, 3, size=(9, 6)), 2)
        reps = 30_000
        tiled = np.repeat(means, reps // 9, axis=0)
        u = split_rng(4, 9).random(len(tiled))
        bits = systematic_sample(tiled, u)
        assert (bits.sum(axis=1) == 2).all()
        for i in range(9):
            block = bits[i * (reps // 9):(i + 1) * (reps // 9)]
            emp = block.mean(axis=0)
            se = np.sqrt(means[i] * (1 - means[i]) / len(block)) + 1e-9
            assert (np.abs(emp - means[i]) <= 5 * se + 0.01).all()


class TestRunContextual:
    def test_t1_round(self):
        spec = make_env_spec("stochastic", 8, 2, 3, seed=5)
        cfg = bobw_config(T=1, seed=5, lam=spec.lambda_min)
        env = SyntheticEnv(spec, 1, seed=5)
        seen = {}
        recs = list(run_contextual(env, cfg, on_round=lambda d: seen.update(d)))
        assert len(recs) == 1
        assert np.allclose(seen["abar"], 0.25, atol=1e-9)  # forced uniform
        assert recs[0].gamma_t <= 0.5 + 1e-12
        assert recs[0].M_t >= 1  # finite, small
        assert recs[0].M_t == math.ceil(1.0 / recs[0].eta_t)

    def test_determinism(self):
        spec = make_env_spec("stochastic", 8, 2, 3, seed=6)
        cfg = bobw_config(T=40, seed=6, lam=spec.lambda_min)
        a = [r for r in run_contextual(SyntheticEnv(spec, 40, seed=6), cfg)]
        b = [r for r in run_contextual(SyntheticEnv(spec, 40, seed=6), cfg)]
        for ra, rb in zip(a, b):
            assert ra.action == rb.action
            assert ra.cum_regret == rb.cum_regret
            assert ra.M_t == rb.M_t

    def test_invariants_short_run(self):
        spec = make_env_spec("stochastic", 8, 2, 3, seed=7)
        cfg = bobw_config(T=96, seed=7, lam=spec.lambda_min)
        env = SyntheticEnv(spec, 96, seed=7)
        hmax = 2 * math.log(4)
        etas = []

        def check(d):
            est = d["precision"]
            assert (est.op_norms() <= (d["M"] + 1) / 2 + 1e-12).all()
            scaled = np.abs(d["eta"] * (d["theta_tilde"] @ d["context"]))
            assert (scaled <= 1.0 + 1e-12).all()
            assert 0.0 <= d["entropy"] <= hmax + 1e-9
            etas.append(d["eta"])

        for rec in run_contextual(env, cfg, on_round=check):
            assert rec.entropy_t <= hmax + 1e-9
        assert all(e2 <= e1 + 1e-15 for e1, e2 in zip(etas, etas[1:]))

    def test_popcount_invariant_all_draws(self):
        spec = make_env_spec("stochastic", 6, 2, 2, seed=8)
        cfg = ProblemConfig(K=6, m=2, T=64, d=2, lambda_min=spec.lambda_min,
                            seed=8)
        env = SyntheticEnv(spec, 64, seed=8)
        for rec in run_contextual(env, cfg):
            assert rec.action.count("1") == 2

    def test_mc_bias_within_bound_small(self):
        # fixed mixed policy on d=2, K=4: the averaged estimate stays
        # within the geometric bias envelope plus Monte-Carlo error
        rng = split_rng(9, 1)
        K, d, m = 4, 2, 2
        gamma, M = 0.5, 60
        theta = np.array([[0.5, 0.1], [-0.2, 0.3], [0.0, -0.4], [0.3, 0.2]])
        p_fixed = np.array([0.7, 0.5, 0.5, 0.3])
        e_bits = np.eye(K, dtype=np.uint8)

        def ctx(n):
            x = rng.normal(size=(n, d))
            return x / np.linalg.norm(x, axis=1, keepdims=True)

        def pol(X):
            n = len(X)
            bits = systematic_sample(np.tile(p_fixed, (n, 1)), rng.random(n))
            take = rng.random(n) < gamma
            bits[take] = e_bits[rng.integers(K, size=int(take.sum()))]
            return bits

        cfg = ProblemConfig(K=K, m=m, T=8, d=d, lambda_min=0.5, seed=9)
        reps = 20_000
        X = ctx(reps)
        A = pol(X)
        losses = X @ theta.T
        acc = np.zeros((K, d))
        sq = np.zeros((K, d))
        for i in range(reps):
            est = mgr_estimate(pol, ctx, M, cfg)
            th = theta_tilde(est, X[i], losses[i],
                             ActionVector(A[i].astype(np.int8)))
            acc += th
            sq += th * th
        mean = acc / reps
        se = np.sqrt(np.maximum(sq / reps - mean ** 2, 0.0) / reps)
        lam = 0.5  # contexts uniform on the circle: E[xx^T] = I/2
        bound = math.sqrt(m) * math.exp(-gamma * lam * M / (2 * K))
        for k in range(K):
            gap = np.linalg.norm(mean[k] - theta[k])
            assert gap <= bound + 5 * np.linalg.norm(se[k]) + 1e-9


def test_entropy_helper():
    assert iterate_entropy(np.array([1.0, 0.0, 1.0])) == 0.0
    a = np.full(4, 0.5)
    assert iterate_entropy(a) == pytest.approx(2 * math.log(2))


def test_embedded_at_most_m_instance_end_to_end():
    # An at-most-m problem runs through make_exact: slack arms carry zero
    # loss, exploration uses slack-padded singletons, and dropping slack
    # coordinates of any played action leaves at most m real arms.
    from semibandits.model import make_exact
    base = ProblemConfig(K=6, m=2, T=48, d=2, lambda_min=0.3, seed=10,
                         exact_m=False)
    cfg = make_exact(base)
    assert cfg.K == 8 and cfg.n_slack == 2
    spec = make_env_spec("stochastic", cfg.K, cfg.m, cfg.d, seed=10,
                         n_slack=cfg.n_slack)
    cfg = ProblemConfig(K=cfg.K, m=cfg.m, T=cfg.T, d=cfg.d,
                        lambda_min=spec.lambda_min, seed=10,
                        n_slack=cfg.n_slack)
    env = SyntheticEnv(spec, cfg.T, seed=10)
    for rec in run_contextual(env, cfg):
        bits = np.frombuffer(rec.action.encode(), dtype=np.uint8) - ord("0")
        assert bits.sum() == 2              # exact-m on the augmented set
        assert bits[:6].sum() <= 2          # at most m real arms
    # slack arms never contribute loss
    assert np.allclose(env.realized[:, 6:], 0.0)
