"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from clocklmi import _pykernels

try:
    from clocklmi import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(rng):
    coeffs = rng.standard_normal((7, 36))  # degree-6 6x6 polynomial matrix
    taus = np.linspace(0.0, 1.0, 1000)
    half = rng.standard_normal((4001, 6, 6)) * 0.1
    x0 = rng.standard_normal(6)
    out = np.empty((2001, 6))
    return {
        "horner_grid (1000 pts, deg 6, 6x6)": lambda k: k.horner_grid(coeffs, taus),
        "rk4_steps (2000 steps, 6 states)": lambda k: k.rk4_steps(half, x0, 2000, 1e-3, out),
        "rk4_step (single step, 6 states)": lambda k: k.rk4_step(half[0], half[1], half[2], x0,
                                                                   1e-3),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = [("python", _pykernels)]
    if _ckernels is not None:
        backends.append(("cython", _ckernels))
    else:
        print("compiled kernels not built; timing the fallback only")
    print(f"{'kernel':40s} " + " ".join(f"{b:>12s}" for b, _ in backends) + "   speedup")
    for name, fn in cases(rng).items():
        times = []
        for _, mod in backends:
            number = 20
            best = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat))
            times.append(best / number)
        cols = " ".join(f"{t * 1e3:10.3f}ms" for t in times)
        speed = f"{times[0] / times[1]:8.1f}x" if len(times) == 2 else ""
        print(f"{name:40s} {cols} {speed}")


if __name__ == "__main__":
    main()
