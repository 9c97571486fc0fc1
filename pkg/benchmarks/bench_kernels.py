"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Times single-query model evaluations (the attack's inner loop) and one full
attack per backend, and prints the speedup of each backend over pure Python.
"""
import argparse
import contextlib
import timeit

import numpy as np

from optattack import kernels, synthetic
from optattack.boundary import Untargeted
from optattack.models import GbdtModel, MlpModel
from optattack.rgf import RgfConfig, rgf_attack


def random_forest(rng, n_trees, depth, d, k):
    trees = []
    for t in range(n_trees):
        nodes = []
        for i in range(2 ** depth - 1):
            nodes.append({"feat": int(rng.integers(d)), "thresh": float(rng.normal()),
                          "left": 2 * i + 1, "right": 2 * i + 2})
        nodes += [{"leaf": float(rng.normal())} for _ in range(2 ** depth)]
        trees.append((t % k, nodes))
    return trees


@contextlib.contextmanager
def active_backend(backend):
    previous = kernels.active
    kernels.active = backend
    try:
        yield
    finally:
        kernels.active = previous


def bench(backend, repeat):
    rng = np.random.default_rng(0)
    d = 20
    x = rng.normal(size=d)
    gbdt = GbdtModel(random_forest(rng, 100, 5, d, 3), k=3, dim=d, backend=backend)
    mlp = MlpModel([
        (rng.normal(size=(64, d)), rng.normal(size=64), "relu"),
        (rng.normal(size=(10, 64)), np.zeros(10), "identity"),
    ], backend=backend)
    x0, theta = rng.normal(size=d), rng.normal(size=d)
    lo, hi = np.full(d, -1.0), np.full(d, 1.0)

    def attack():
        with active_backend(backend):
            o = synthetic.radial(2)
            o.model._k = backend
            rgf_attack(o, [0.1, 0.1], Untargeted(0), None, RgfConfig(seed=0, query_budget=3000))

    cases = {
        "gbdt predict (100 trees, depth 5)": lambda: gbdt.predict(x),
        "mlp predict (20-64-10)": lambda: mlp.predict(x),
        "ray point + clamp (d=20)": lambda: backend.ray_point(x0, theta, 0.3, lo, hi),
        "squared norm (d=20)": lambda: backend.sq_norm(x0),
        "rgf attack (3000 queries)": attack,
    }
    out = {}
    for name, fn in cases.items():
        n = 3 if name.startswith("rgf") else 2000
        out[name] = min(timeit.repeat(fn, number=n, repeat=repeat)) / n
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = kernels.available_backends()
    results = {name: bench(kernels.load_backend(name), args.repeat) for name in names}
    base = results["python"]
    print(f"{'case':36s}" + "".join(f"{n:>14s}" for n in names) + "   speedup")
    for case in base:
        row = "".join(f"{results[n][case] * 1e6:12.2f}us" for n in names)
        fastest = min(results[n][case] for n in names)
        print(f"{case:36s}{row}   x{base[case] / fastest:.1f}")


if __name__ == "__main__":
    main()
