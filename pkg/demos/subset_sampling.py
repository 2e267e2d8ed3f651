"""How the soft subset mask sharpens as the temperature drops.

The mask V is the elementwise max of k Concrete vectors that share one
score vector.  High temperatures spread mass over many features; at the
training default 0.1 the mask is already close to k-hot.

Run: python3 demos/subset_sampling.py
"""

import numpy as np

from l2x import autodiff as ad
from l2x import sampling as sp


def main():
    d, k = 10, 3
    scores = np.array([3.0, 2.5, 2.0, 0.0, 0.0, -0.5, -1.0, -1.0, -2.0, -3.0])
    noise = sp.sample_gumbel(7, k, d)

    print(f"scores: {scores}")
    print(f"top-{k} by raw score: {sp.hard_top_k(scores, k)}")
    print()

    for tau in (5.0, 1.0, 0.5, 0.1, 0.01):
        mask = sp.relaxed_subset_mask(ad.constant(scores), noise, temperature=tau)
        v = mask.V.data
        active = int((v > 0.01).sum())
        print(f"tau={tau:<5} V={np.array2string(v, precision=3, suppress_small=True)} "
              f"entries>0.01: {active}")

    print()
    print("the same noise always picks the same subset; gradients flow")
    print("through V, so the scores can learn which features deserve mass")

    # gradient of sum(V) with respect to the scores
    params = ad.ParameterSet()
    lw = params.add("scores", scores.copy())
    v = sp.relaxed_subset_mask(lw, noise, temperature=0.1).V
    grads = ad.backward(ad.reduce_sum(v), params)
    print(f"d sum(V) / d scores = {np.array2string(grads['scores'], precision=3)}")


if __name__ == "__main__":
    main()
