import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from featacq.agent import Agent, PPOConfig, group_features
from featacq.core import Dataset, PartialInstance, TaskSpec
from featacq.env import AcquisitionEnv, EnvConfig
from featacq.explain import (
    CLASS_PAIR,
    CLUSTER_SET,
    ClusteringModel,
    GoalController,
    SubGoal,
    cluster_posterior,
    collapse,
    fit_clustering,
    goal_entropy,
    goal_reward,
    render_explanation,
    run_goal_episode,
    segment_entropy_drops,
    select_subgoal,
    write_report,
)
from featacq.surrogate import GaussianMixture, MixtureSurrogate, fit_em


class TestSelectSubgoal:
    def test_top_two(self):
        assert select_subgoal([0.5, 0.3, 0.2]).members == (0, 1)
        assert select_subgoal([0.1, 0.3, 0.6]).members == (2, 1)

    def test_uniform_tie_break(self):
        assert select_subgoal(np.full(4, 0.25)).members == (0, 1)

    def test_all_clusters(self):
        g = select_subgoal([0.2, 0.5, 0.3], CLUSTER_SET, 3)
        assert sorted(g.members) == [0, 1, 2]

    def test_too_few_categories(self):
        with pytest.raises(ValueError):
            select_subgoal([0.4, 0.6], CLUSTER_SET, 3)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=5, max_size=5), st.floats(0.01, 100.0))
    def test_scale_free(self, p, scale):
        p = np.array(p) + 1e-3
        a = select_subgoal(p / p.sum(), CLUSTER_SET, 3)
        b = select_subgoal(scale * p / (scale * p).sum(), CLUSTER_SET, 3)
        assert a.members == b.members

    def test_subgoal_validation(self):
        with pytest.raises(ValueError):
            SubGoal(CLASS_PAIR, (1, 1))
        with pytest.raises(ValueError):
            SubGoal("pairs", (0, 1))
        np.testing.assert_array_equal(SubGoal(CLUSTER_SET, (3, 0)).embedding(5), [1, 0, 0, 1, 0])


class TestGoalReward:
    def test_unchanged(self):
        g = SubGoal(CLASS_PAIR, (0, 2))
        p = [0.3, 0.3, 0.4]
        assert goal_reward(p, p, g, gamma=1.0) == 0.0

    def test_binary_elimination(self):
        g = SubGoal(CLASS_PAIR, (0, 1))
        assert goal_reward([0.5, 0.5, 0.0], [1.0, 0.0, 0.0], g, gamma=1.0) == pytest.approx(math.log(2))

    def test_collapse(self):
        np.testing.assert_allclose(collapse([0.1, 0.2, 0.3, 0.4], (3, 1)), [0.4, 0.2, 0.4])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6))
    def test_permuting_rest_is_invisible(self, seed):
        rng = np.random.default_rng(seed)
        before, after = rng.dirichlet(np.ones(6), size=2)
        g = SubGoal(CLUSTER_SET, (1, 4))
        perm = np.array([2, 1, 5, 0, 4, 3])  # fixes members 1 and 4
        r = goal_reward(before, after, g, 0.9)
        assert goal_reward(before[perm], after[perm], g, 0.9) == pytest.approx(r, abs=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 12), st.floats(0.5, 1.0))
    def test_telescoping(self, seed, T, gamma):
        rng = np.random.default_rng(seed)
        posts = rng.dirichlet(np.ones(5), size=T + 1)
        g = select_subgoal(posts[0], CLUSTER_SET, 3)
        total = sum(gamma**t * goal_reward(posts[t], posts[t + 1], g, gamma) for t in range(T))
        expect = goal_entropy(posts[0], g) - gamma**T * goal_entropy(posts[T], g)
        assert total == pytest.approx(expect, rel=1e-9, abs=1e-12)


def two_d_problem():
    surrogate = MixtureSurrogate(
        TaskSpec("unsupervised", 2),
        GaussianMixture(np.array([[0.0, 0.0], [1.5, -1.0]]),
                        np.array([[[1.0, 0.6], [0.6, 1.0]], [[0.5, -0.1], [-0.1, 0.8]]]), np.log([0.6, 0.4])))
    clustering = ClusteringModel(GaussianMixture(
        np.array([[-1.0, -1.0], [1.0, 0.5], [0.5, -1.5]]),
        np.array([np.eye(2) * 0.8, [[1.0, 0.3], [0.3, 0.6]], np.eye(2) * 0.5]), np.log([0.3, 0.4, 0.3])))
    return surrogate, clustering


def quadrature_cluster_posterior(surrogate, clustering, x0):
    cond, _ = surrogate.joint.condition(np.array([0]), np.array([x0]))

    def integrand(x1, z):
        dens = np.exp(cond.logpdf(np.array([[x1]]))[0])
        return dens * clustering.posterior(np.array([x0, x1]))[0, z]

    out = np.array([integrate.quad(integrand, -12, 12, args=(z,), epsabs=1e-12, limit=200)[0]
                    for z in range(clustering.n_clusters)])
    return out / out.sum()


class TestClusterPosterior:
    @pytest.mark.parametrize("x0", [-0.8, 0.4, 1.7])
    def test_quadrature_oracle(self, x0):
        s, c = two_d_problem()
        oracle = quadrature_cluster_posterior(s, c, x0)
        est = cluster_posterior(s, c, PartialInstance([x0, 0.0], [0]), 1000, np.random.default_rng(0))
        np.testing.assert_allclose(est, oracle, rtol=0.01)

    def test_fully_observed_exact(self):
        s, c = two_d_problem()
        x = np.array([0.3, -0.4])
        for n in (1, 7, 50):
            np.testing.assert_allclose(cluster_posterior(s, c, PartialInstance(x, [0, 1]), n), c.posterior(x)[0])

    def test_prior_recovery(self):
        s, _ = two_d_problem()
        c = ClusteringModel(s.joint)
        est = cluster_posterior(s, c, PartialInstance.empty(2), 4096, np.random.default_rng(1))
        np.testing.assert_allclose(est, s.joint.weights, atol=0.02)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 3), st.integers(1, 60), st.integers(0, 10**6))
    def test_valid_distribution(self, mask_code, n, seed):
        s, c = two_d_problem()
        obs = [i for i in range(2) if mask_code >> i & 1]
        p = cluster_posterior(s, c, PartialInstance([0.2, -0.3], obs), n, np.random.default_rng(seed))
        assert abs(p.sum() - 1.0) < 1e-9 and np.all(p >= 0)

    def test_fit_clustering(self):
        rng = np.random.default_rng(0)
        x = np.concatenate([rng.normal(-3, 0.5, (100, 2)), rng.normal(3, 0.5, (100, 2))])
        c = fit_clustering(x, 2, seed=0)
        assert c.n_clusters == 2
        post = c.posterior(np.array([[-3.0, -3.0], [3.0, 3.0]]))
        assert post[0].argmax() != post[1].argmax()


def class_task(d=6, classes=4, n=300, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, classes, n)
    centers = 2.0 * rng.standard_normal((classes, d))
    x = centers[y] + rng.standard_normal((n, d))
    ds = Dataset(x, y, TaskSpec("classification", d, classes))
    return ds, fit_em(ds, 1, seed=0)


def goal_agent(s, ds, goal_dim):
    g = group_features(s, ds, 2)
    return Agent.create(s, g, PPOConfig(hidden=(8, 8)), goal_dim=goal_dim, rng=np.random.default_rng(0))


class TestGoalEpisodes:
    def test_single_goal_when_T_covers_d(self):
        ds, s = class_task()
        env = AcquisitionEnv(s, ds, EnvConfig(goal_reward=True, allow_terminate=False, hard_budget=6))
        tr = run_goal_episode(goal_agent(s, ds, 4), env, CLASS_PAIR, T=6, x=ds.x[0], y=ds.y[0])
        segs = tr.meta["segments"]
        assert len(segs) == 1 and len(segs[0]["acquired"]) == 6

    def test_segments_and_warm_start(self):
        ds, s = class_task()
        env = AcquisitionEnv(s, ds, EnvConfig(goal_reward=True, allow_terminate=False, hard_budget=6))
        tr = run_goal_episode(goal_agent(s, ds, 4), env, CLASS_PAIR, T=2, x=ds.x[1], y=ds.y[1], warm_start=2)
        segs = tr.meta["segments"]
        assert segs[0]["goal"] is None and len(segs[0]["acquired"]) == 2
        assert [len(r["acquired"]) for r in segs[1:]] == [2, 2]
        assert all(len(r["goal"]) == 2 for r in segs[1:])
        # chained posteriors: each segment starts where the previous ended
        for a, b in zip(segs, segs[1:]):
            np.testing.assert_allclose(a["posterior_after"], b["posterior_before"])
        assert sum(st_.rewards["goal"] != 0 for st_ in tr.steps[:2]) == 0

    def test_goal_rewards_telescope_per_segment(self):
        ds, s = class_task()
        gamma = 0.9
        env = AcquisitionEnv(s, ds, EnvConfig(gamma=gamma, goal_reward=True, allow_terminate=False, hard_budget=6))
        tr = run_goal_episode(goal_agent(s, ds, 4), env, CLASS_PAIR, T=3, x=ds.x[2], y=ds.y[2])
        for j, seg in enumerate(tr.meta["segments"]):
            g = SubGoal(CLASS_PAIR, tuple(seg["goal"]))
            rs = [st_.rewards["goal"] for st_ in tr.steps[3 * j:3 * j + 3]]
            total = sum(gamma**t * r for t, r in enumerate(rs))
            expect = goal_entropy(seg["posterior_before"], g) - gamma**3 * goal_entropy(seg["posterior_after"], g)
            assert total == pytest.approx(expect, rel=1e-9, abs=1e-12)

    def test_cluster_goals(self):
        ds, s = class_task()
        clus = fit_clustering(ds, 5, seed=0)
        env = AcquisitionEnv(s, ds, EnvConfig(goal_reward=True, allow_terminate=False, hard_budget=4))
        tr = run_goal_episode(goal_agent(s, ds, 5), env, CLUSTER_SET, C=3, T=2, x=ds.x[3], y=ds.y[3],
                              clustering=clus, rng=np.random.default_rng(0))
        segs = tr.meta["segments"]
        assert len(segs) == 2 and all(len(r["goal"]) == 3 for r in segs)
        for r in segs:
            assert abs(sum(r["posterior_before"]) - 1) < 1e-9

    def test_controller_validation(self):
        ds, s = class_task()
        with pytest.raises(ValueError):
            GoalController(s, CLUSTER_SET)
        reg = MixtureSurrogate(TaskSpec("regression", 1), GaussianMixture(np.zeros((1, 2)), np.eye(2)[None], np.zeros(1)))
        with pytest.raises(ValueError):
            GoalController(reg, CLASS_PAIR)

    def test_render_and_report(self, tmp_path):
        ds, s = class_task()
        env = AcquisitionEnv(s, ds, EnvConfig(goal_reward=True, allow_terminate=False, hard_budget=4))
        tr = run_goal_episode(goal_agent(s, ds, 4), env, CLASS_PAIR, T=2, x=ds.x[4], y=ds.y[4], warm_start=1)
        text = render_explanation(tr, feature_names=[f"f{i}" for i in range(6)]).splitlines()
        assert text[0].startswith("1. acquired {f") and "warm start" in text[0]
        assert "to disambiguate {class" in text[1] and "->" in text[1]
        write_report(tmp_path / "r.jsonl", [tr], ["a"])
        recs = [json.loads(line) for line in (tmp_path / "r.jsonl").read_text().splitlines()]
        assert [r["segment"] for r in recs] == list(range(len(tr.meta["segments"])))
        assert recs[0]["instance"] == "a"

    def test_entropy_drop_helper(self):
        ds, s = class_task()
        env = AcquisitionEnv(s, ds, EnvConfig(goal_reward=True, allow_terminate=False, hard_budget=4))
        agent = goal_agent(s, ds, 4)
        traces = [run_goal_episode(agent, env, CLASS_PAIR, T=2, x=ds.x[j], y=ds.y[j]) for j in range(10)]
        drops = segment_entropy_drops(traces)
        assert drops.shape == (20,)
        expect = [r["entropy_after"] < r["entropy_before"] for t in traces for r in t.meta["segments"]]
        np.testing.assert_array_equal(drops, expect)
