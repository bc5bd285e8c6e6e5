"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 16384] [--c 16] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from wavegcn import _backend, data, haar, layers
from wavegcn.matching import edge_dissimilarity, greedy_match


def cases(n, c, seed=0):
    g = data.point_cloud_graph(n, 10, seed)
    f = data.smooth_features(g, c, 5, seed)
    h = haar.build_hierarchy(g, f)
    p = haar.forward(h, f)
    w = edge_dissimilarity(g, f)
    K = np.random.default_rng(seed).normal(size=(c, 2 * c))
    return {
        "greedy_match": lambda: greedy_match(g, w, seed),
        "haar_forward": lambda: haar.forward(h, f),
        "haar_inverse": lambda: haar.inverse(h, p),
        "build_hierarchy": lambda: haar.build_hierarchy(g, f),
        "edge_conv_max": lambda: layers.edge_conv(f, g, K),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=16384)
    ap.add_argument("--c", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    try:
        from wavegcn import _ckernels  # noqa: F401
        backends = ["python", "cython"]
    except ImportError:
        backends = ["python"]
        print("compiled kernels not built; timing the fallback only")
    work = cases(args.n, args.c)
    times = {}
    for b in backends:
        previous = _backend.use(b)
        for name, fn in work.items():
            fn()
            times[(name, b)] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        _backend.use(previous)
    print(f"n={args.n} c={args.c}, best of {args.repeat}, milliseconds")
    print(f"{'kernel':<18}" + "".join(f"{b:>10}" for b in backends) + ("   speedup" if len(backends) > 1 else ""))
    for name in work:
        row = f"{name:<18}" + "".join(f"{1e3 * times[(name, b)]:>10.2f}" for b in backends)
        if len(backends) > 1:
            row += f"{times[(name, 'python')] / times[(name, 'cython')]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
