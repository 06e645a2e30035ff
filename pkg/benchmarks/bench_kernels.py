"""Time the compiled and pure-Python kernel backends on the same inputs.

Usage: ``python3 benchmarks/bench_kernels.py [--size N] [--repeat R]``.
Prints one line per kernel with the best-of-R time for each backend, the
speedup and whether the outputs agree bitwise.
"""
import argparse
import timeit

import numpy as np

from skewthermo import kernels


def _cases(size):
    rng = np.random.default_rng(0)
    digits = rng.integers(1, 50, size)
    states = 64
    indptr = np.arange(0, states * states + 1, states)
    indices = np.tile(np.arange(states), states)
    cum = np.tile(np.linspace(1.0 / states, 1.0, states), states)
    u = rng.random(size)
    edges = np.linspace(0.0, 1.0, 101)
    return {
        "gauss_digits": lambda k: k.gauss_digits(0.6180339887498949, min(size, 40)),
        "dl_counts": lambda k: k.dl_counts(0.3141592653589793, 0.0, size, edges),
        "gauss_log_derivative_sum": lambda k: k.gauss_log_derivative_sum(0.2718281828459045, size),
        "markov_sample": lambda k: k.markov_sample(indptr, indices, cum, 0, u),
        "backward_tails": lambda k: k.backward_tails(digits),
        "forward_pasts": lambda k: k.forward_pasts(digits),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return a.dtype == b.dtype and np.array_equal(a, b)
    return a == b


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=200_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled backend not built; timing the Python kernels only")
    mods = {}
    for name in backends:
        kernels.use_backend(name)
        mods[name] = {fn: getattr(kernels, fn) for fn in kernels._FUNCTIONS}
    print(f"{'kernel':<26}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'bitwise':>9}")
    for name, call in _cases(args.size).items():
        times, outs = [], []
        for b in backends:
            ns = argparse.Namespace(**mods[b])
            outs.append(call(ns))
            times.append(min(timeit.repeat(lambda: call(ns), number=1, repeat=args.repeat)))
        speed = times[-1] / times[0] if len(times) == 2 else float("nan")
        same = _same(outs[0], outs[-1])
        print(f"{name:<26}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times) + f"{speed:>9.1f}x{str(same):>9}")
    kernels.use_backend(backends[0])


if __name__ == "__main__":
    main()
