"""OOD detection from a partially observed instance: score norms vs raw likelihood.

Run: python3 demos/partial_ood.py
"""
import warnings

import numpy as np

from featacq.core import Dataset, PartialInstance, TaskSpec
from featacq.ood import auroc, fit_dose, neg_log_marginal, ood_score
from featacq.surrogate import fit_em
from featacq.synthetic import mixture_data


def main():
    rng = np.random.default_rng(0)
    x, _, _ = mixture_data(1300, rng, d=10)
    train = Dataset(x[:1000], None, TaskSpec("unsupervised", 10))
    s = fit_em(train, 3, seed=0)
    with warnings.catch_warnings():
        # the variance floor is expected at the smallest noise levels
        warnings.simplefilter("ignore", RuntimeWarning)
        model = fit_dose(s, train, rng=rng, masks_per_instance=2)
    x_in = x[1000:]
    print("shift  observed  ood_score  -log p(x_o)")
    for shift in (1.0, 2.0, 5.0):
        x_out = x_in + shift * x[:1000].std(axis=0)
        for k in (2, 5, 8):
            masks = [np.sort(rng.choice(10, k, replace=False)) for _ in x_in]
            insts = [[PartialInstance(r, o) for r, o in zip(data, masks)] for data in (x_in, x_out)]
            a = [[ood_score(model, s, i) for i in group] for group in insts]
            b = [[neg_log_marginal(s, i) for i in group] for group in insts]
            print(f"{shift:5.1f}  {k:8d}  {auroc(*a):9.3f}  {auroc(*b):11.3f}")


if __name__ == "__main__":
    main()
