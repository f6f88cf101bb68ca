"""Dynamic greedy acquisition vs a fixed global order on the guiding-feature task.

Run: python3 demos/greedy_vs_static.py
"""
import numpy as np

from featacq.core import Dataset
from featacq.eval import accuracy_curve
from featacq.greedy import GreedyPolicy, StaticPolicy, static_order
from featacq.synthetic import guiding_feature_data, guiding_feature_mixture


def main():
    rng = np.random.default_rng(0)
    s = guiding_feature_mixture()
    x, y, _ = guiding_feature_data(200, rng)
    xv, yv, _ = guiding_feature_data(100, rng)
    test = Dataset(x, y, s.task)
    budgets = list(range(s.task.d + 1))
    order = static_order(s, Dataset(xv, yv, s.task), rng=rng)
    dyn = accuracy_curve(GreedyPolicy(), s, test, budgets, np.random.default_rng(1))
    stat = accuracy_curve(StaticPolicy(order), s, test, budgets, np.random.default_rng(1))
    print(f"static order: {order}")
    print("budget  greedy  static")
    for a, b in zip(dyn, stat):
        print(f"{a.budget:6d}  {a.value:6.3f}  {b.value:6.3f}")


if __name__ == "__main__":
    main()
