"""Train a small goal-conditioned agent and print its explained acquisitions.

Run: python3 demos/explain_goals.py   (about a minute)
"""
import numpy as np

from featacq.agent import Agent, PPOConfig, group_features, train_ppo
from featacq.core import Dataset, TaskSpec
from featacq.env import AcquisitionEnv, EnvConfig
from featacq.explain import CLASS_PAIR, GoalController, render_explanation, run_goal_episode, segment_entropy_drops
from featacq.surrogate import fit_em


def main():
    rng = np.random.default_rng(0)
    d, C = 8, 4
    y = rng.integers(0, C, 1000)
    x = 1.5 * rng.standard_normal((C, d))[y] + rng.standard_normal((1000, d))
    task = TaskSpec("classification", d, C)
    train, test = Dataset(x[:800], y[:800], task), Dataset(x[800:], y[800:], task)
    s = fit_em(train, 1, seed=0)
    cfg = PPOConfig(rollout_steps=256, updates=20, minibatch=64, epochs=4, lr=1e-3, hidden=(64, 64))
    env = AcquisitionEnv(s, train, EnvConfig(goal_reward=True, allow_terminate=False, hard_budget=6))
    agent = Agent.create(s, group_features(s, train, 3, rng=rng), cfg, goal_dim=C, rng=rng)
    train_ppo(env, agent, cfg, rng, goal_controller=GoalController(s, CLASS_PAIR, T=2, gamma=env.config.gamma))
    traces = [run_goal_episode(agent, env, CLASS_PAIR, T=2, x=a, y=b) for a, b in zip(test.x, test.y)]
    for tr in traces[:3]:
        print(render_explanation(tr))
        print()
    print(f"goal entropy fell in {segment_entropy_drops(traces).mean():.1%} of segments")


if __name__ == "__main__":
    main()
