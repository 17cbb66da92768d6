"""Time the numba kernels against their numpy fallbacks at run-time sizes.

    python benchmarks/bench_kernels.py [--repeat N] [--end-to-end]

Each kernel is checked for agreement before timing. ``--end-to-end`` also
times a few experiment steps in a subprocess per path (the flag
``STIP_DISABLE_NUMBA=1`` selects numpy at import time).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from stip import _accel
from stip.geometry import PathLibrary
from stip.gp import Hyperparams, kernel_matrix


def cases(rng):
    x = rng.uniform(-20, 20, (25, 2))
    pts = rng.uniform(-20, 20, (5, 2))
    hyp = Hyperparams(1.3, 8.0, 0.01)
    k = kernel_matrix(x, x, hyp) + hyp.noise_var * np.eye(25)
    chol = np.linalg.cholesky(k)
    ys = rng.normal(size=25)
    field = rng.normal(size=(60, 60))
    grid_pts = rng.uniform(-75, 75, (5, 2))
    bounds = np.array([-75.0, 75.0, -75.0, 75.0])
    lib = PathLibrary()
    grid = (-73.75, -73.75, 2.5, 2.5)
    return {
        "se_kernel 25x3600": ((x, rng.uniform(-75, 75, (3600, 2)), 1.3, 8.0), {}),
        "variance_reduction m=5 n=25": ((pts, x, chol, 1.3, 8.0, 0.01), {}),
        "lml n=25": ((x, ys, 1.3, 8.0, 0.01), {}),
        "bilinear m=5": ((field, *grid, grid_pts), {}),
        "bilinear_mean m=5": ((field, *grid, grid_pts, bounds, -1.0), {}),
        "advect 60x60": ((field, 4.7, -1.2, 2.5, 2.5), {}),
        "place_paths 11 paths": ((3.0, -4.0, 0.7, lib.local_samples, lib.local_ends, bounds), {}),
    }


def _close(a, b):
    if isinstance(a, tuple):
        return all(_close(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-9, atol=1e-12)


def bench(repeat):
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numpy us':>12s} {'numba us':>12s} {'speedup':>8s}")
    for label, (args, kw) in cases(rng).items():
        name = label.split(" ")[0]
        f_np = getattr(_accel, name + "_numpy")
        f_nb = getattr(_accel, name + "_numba")
        r_np, r_nb = f_np(*args, **kw), f_nb(*args, **kw)  # also compiles
        if not _close(r_np, r_nb):
            raise SystemExit(f"{label}: numpy and numba disagree")
        n = max(1, repeat // 10) if "3600" in label else repeat
        t_np = min(timeit.repeat(lambda: f_np(*args, **kw), number=n, repeat=3)) / n
        t_nb = min(timeit.repeat(lambda: f_nb(*args, **kw), number=n, repeat=3)) / n
        print(f"{label:32s} {t_np * 1e6:12.1f} {t_nb * 1e6:12.1f} {t_np / t_nb:8.1f}")


SNIPPET = """
import time
from stip.experiment import ExperimentConfig, run_experiment
run_experiment(ExperimentConfig(time_steps=1, spread_sigma=7.3750248266626794))
t = time.perf_counter()
run_experiment(ExperimentConfig(time_steps={steps}, spread_sigma=7.3750248266626794))
print(time.perf_counter() - t)
"""


def end_to_end(steps):
    for label, flag in (("numpy", "1"), ("numba", "0")):
        env = dict(os.environ, STIP_DISABLE_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, "-c", SNIPPET.format(steps=steps)], env=env, capture_output=True, text=True, check=True
        )
        print(f"end-to-end {steps} steps, {label}: {float(out.stdout.strip()):.2f} s")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=2000)
    ap.add_argument("--end-to-end", action="store_true")
    ap.add_argument("--steps", type=int, default=3)
    a = ap.parse_args()
    bench(a.repeat)
    if a.end_to_end:
        end_to_end(a.steps)
