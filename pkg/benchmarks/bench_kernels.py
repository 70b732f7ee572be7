"""Compare the numba and numpy kernel paths.

Usage: python3 benchmarks/bench_kernels.py [--n 256] [--repeat 20] [--steps 50]

Times each pointwise kernel on an n x n array, then a short full run with
each backend selected through ``KSIPM_DISABLE_NUMBA`` in a subprocess.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from ksipm import _kernels as K

STEP_SNIPPET = """
import time, numpy as np
from ksipm import SimParams, Stepper, SimState, Grid, BACKEND
from ksipm.initial import gaussian_bump
g = Grid({n}, {n})
st = SimState.initial(gaussian_bump(g, 4 * np.pi, sigma=0.5))
s = Stepper(SimParams(grid=g, g=1.0, t_end=1.0))
st = s.step(st).state
t0 = time.perf_counter()
for _ in range({steps}):
    st = s.step(st).state
print(BACKEND, (time.perf_counter() - t0) / {steps})
"""


def kernel_args(n, rng):
    a = [rng.standard_normal((n, n)) for _ in range(5)]
    z = [rng.standard_normal((n, n // 2 + 1)) + 1j * rng.standard_normal((n, n // 2 + 1)) for _ in range(3)]
    dec = np.exp(-rng.random((n, n // 2 + 1)))
    return {
        "fluxes": (a[0], a[1], a[2]),
        "fluxes_speed": tuple(a),
        "heun_predict": (dec, z[0], z[1], 1e-3),
        "heun_correct": (dec, z[0], z[1], z[2], 1e-3),
        "field_stats": (a[0], 0.1),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--steps", type=int, default=50)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    inputs = kernel_args(args.n, rng)
    print(f"kernel timings on {args.n}x{args.n} (mean of {args.repeat}, microseconds)")
    print(f"{'kernel':<14}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for name, call_args in inputs.items():
        K.NUMBA_KERNELS[name](*call_args)  # compile outside the timer
        t_np = timeit.timeit(lambda: K.NUMPY_KERNELS[name](*call_args), number=args.repeat) / args.repeat
        t_nb = timeit.timeit(lambda: K.NUMBA_KERNELS[name](*call_args), number=args.repeat) / args.repeat
        print(f"{name:<14}{t_np * 1e6:>12.1f}{t_nb * 1e6:>12.1f}{t_np / t_nb:>10.2f}")
    print(f"\nfull step, g=1, {args.n}x{args.n} (mean of {args.steps} steps, ms)")
    code = STEP_SNIPPET.format(n=args.n, steps=args.steps)
    for disable in ("0", "1"):
        env = dict(os.environ, KSIPM_DISABLE_NUMBA=disable)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, per_step = out.stdout.split()
        print(f"{backend:<14}{float(per_step) * 1e3:>12.2f}")


if __name__ == "__main__":
    main()
