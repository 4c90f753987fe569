import numpy as np
import pytest

from semibandits.model import (ActionVector, Context, InvariantError,
                               MeanAction, ProblemConfig, load_config,
                               make_exact, save_config, split_rng)
from semibandits.projection import bisect_project
from semibandits.regularizer import quadratic

from helpers import solve_capped_slsqp


class TestActionVector:
    def test_rejects_non_binary(self):
        with pytest.raises(InvariantError):
            ActionVector(np.array([0, 2, 1]))
        with pytest.raises(InvariantError):
            ActionVector(np.array([1, -1]))

    def test_popcount_and_validate(self):
        a = ActionVector.from_indices(5, [0, 3])
        assert a.popcount() == 2
        a.validate(m=2, exact_m=True)
        a.validate(m=3, exact_m=False)
        with pytest.raises(InvariantError):
            a.validate(m=3, exact_m=True)
        with pytest.raises(InvariantError):
            a.validate(m=1, exact_m=False)

    def test_immutable(self):
        a = ActionVector.from_indices(3, [1])
        with pytest.raises(ValueError):
            a.bits[0] = 1


class TestMeanAction:
    def test_validate(self):
        MeanAction(np.array([0.5, 0.5])).validate(m=1)
        with pytest.raises(InvariantError):
            MeanAction(np.array([0.6, 0.6])).validate(m=1)
        with pytest.raises(InvariantError):
            MeanAction(np.array([1.2, -0.2])).validate(m=1)


def test_context_norm():
    Context(np.array([0.6, 0.8]))
    with pytest.raises(InvariantError):
        Context(np.array([1.0, 0.1]))


class TestProblemConfig:
    def test_validation(self):
        with pytest.raises(InvariantError):
            ProblemConfig(K=3, m=4, T=10)
        with pytest.raises(InvariantError):
            ProblemConfig(K=3, m=1, T=0)
        with pytest.raises(InvariantError):
            ProblemConfig(K=3, m=1, T=10, lambda_min=0.0)
        with pytest.raises(InvariantError):
            ProblemConfig(K=3, m=1, T=10, eps_proj=0.0)
        with pytest.raises(InvariantError):
            ProblemConfig(K=3, m=1, T=10, schedule_scale=0.5,
                          exploration_scale=0.6)

    def test_roundtrip_file(self, tmp_path):
        cfg = ProblemConfig(K=12, m=4, T=256, d=2, lambda_min=0.25,
                            eps_proj=1e-8, exact_m=False, seed=77,
                            schedule_scale=0.5, exploration_scale=0.25,
                            mgr_scale=0.125)
        path = tmp_path / "cfg.ini"
        save_config(cfg, str(path))
        assert load_config(str(path)) == cfg

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[problem]\nK = 4\nm = 2\nT = 8\nbogus = 1\n")
        with pytest.raises(KeyError):
            load_config(str(path))


class TestMakeExact:
    def test_identity_case(self):
        cfg = ProblemConfig(K=10, m=3, T=10, exact_m=True)
        assert make_exact(cfg) is cfg

    def test_augmentation(self):
        cfg = ProblemConfig(K=10, m=3, T=10, exact_m=False)
        aug = make_exact(cfg)
        assert aug.K == 13 and aug.m == 3 and aug.exact_m
        assert aug.n_slack == 3 and aug.n_real == 10

    def test_embedded_projection_lands_in_at_most_m_polytope(self):
        # Project on the augmented exact-m instance, drop the slack
        # coordinates: the result must lie in the at-most-m polytope, and
        # the augmented solve must agree with a general-purpose solver.
        rng = np.random.default_rng(5)
        reg = quadratic()
        for K, m in [(2, 1), (3, 2), (4, 2), (4, 3)]:
            aug = make_exact(ProblemConfig(K=K, m=m, T=10, exact_m=False))
            for _ in range(10):
                abar = rng.uniform(0.2, 0.8, size=aug.K)
                abar *= m / abar.sum()
                lhat = rng.uniform(-1.0, 1.0, size=aug.K)
                a = bisect_project(0.7, lhat, abar, aug, reg)
                dropped = a[:K]
                assert dropped.sum() <= m + 1e-9
                assert (dropped >= 0.0).all() and (dropped <= 1.0).all()
                ref = solve_capped_slsqp(0.7, lhat, abar, m, reg.kind)
                assert np.linalg.norm(a - ref) < 1e-5


class TestSplitRng:
    def test_reproducible_and_independent(self):
        a = split_rng(42, 1, 2).random(4)
        b = split_rng(42, 1, 2).random(4)
        c = split_rng(42, 1, 3).random(4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
