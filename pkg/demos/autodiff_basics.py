"""Tour of the reverse-mode engine: build a graph, read gradients back.

Run: python3 demos/autodiff_basics.py
"""

import numpy as np

from l2x import autodiff as ad


def main():
    rng = np.random.default_rng(0)

    # parameters live in a named set; everything else enters as constants
    params = ad.ParameterSet()
    w = params.add("w", rng.normal(size=(3, 2)))
    b = params.add("b", np.zeros(2))
    x = ad.constant(rng.normal(size=(4, 3)))

    # a two-layer forward pass ending in a scalar
    h = ad.relu(ad.add_bias(ad.matmul(x, w), b))
    p = ad.softmax(h, temperature=0.5)
    loss = ad.neg(ad.reduce_mean(ad.log(ad.add(p, ad.constant(np.full((4, 2), 1e-3))))))
    print(f"loss value: {loss.item():.6f}")

    grads = ad.backward(loss, params)
    for name, g in grads.items():
        print(f"grad[{name}]: shape {g.shape}, norm {np.linalg.norm(g):.6f}")

    # the engine ships its own numerical cross-check
    def f():
        h = ad.relu(ad.add_bias(ad.matmul(x, w), b))
        p = ad.softmax(h, temperature=0.5)
        return ad.neg(ad.reduce_mean(ad.log(ad.add(p, ad.constant(np.full((4, 2), 1e-3))))))

    report = ad.finite_diff_check(f, params, step=1e-6)
    print(f"finite differences: worst relative error {report.max_rel_error:.2e} "
          f"over {report.n_checked} coordinates")


if __name__ == "__main__":
    main()
