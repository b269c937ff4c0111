"""Time the numba kernels against their numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--repeat 20] [--n 64] [--json out.json]

Kernels are timed side by side in one process (compile time excluded by a
warm-up call).  The end-to-end log-posterior evaluation, the sampler's unit
of work, is timed in two subprocesses with NURBSCT_NUMBA=1 and =0.
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from nurbsct import kernels
from nurbsct.projector import FanBeamGeometry, ray_endpoints
from nurbsct.prior import PriorSpec
from nurbsct.raster import ShapeParams, curve_polyline


def best_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(n):
    rng = np.random.default_rng(0)
    v = ShapeParams(rng.uniform(15, 25, 12), 2 * np.pi * np.arange(12) / 12, 0.027)
    px, py = curve_polyline(v.vector)
    q = rng.uniform(-32, 32, size=(4096, 2))
    geom = FanBeamGeometry.default(num_views=6)
    sx, sy, dx, dy = ray_endpoints(geom)
    spec = PriorSpec.default(12)
    r, th = v.radii.copy(), v.angles.copy()
    args = (spec.window_lo, spec.window_hi, spec.r_max, spec.osc_k, True)
    return {
        "scanline_fill": (lambda f: f(px, py, n, 64.0), kernels._scanline_fill_nb,
                          kernels._scanline_fill_np),
        "points_in_polygon": (lambda f: f(q[:, 0].copy(), q[:, 1].copy(), px, py),
                              kernels._points_in_polygon_nb, kernels._points_in_polygon_np),
        "siddon": (lambda f: f(sx, sy, dx, dy, n, 64.0), kernels._siddon_nb,
                   kernels._siddon_np),
        "constraints": (lambda f: f(r, th, *args), kernels._constraints_code_nb,
                        kernels._constraints_code_np),
    }


_E2E = """
import time, numpy as np
from nurbsct.phantoms import make_phantom, simulate_data
from nurbsct.posterior import PosteriorProblem, initial_state
from nurbsct.prior import PriorSpec
from nurbsct.projector import FanBeamGeometry, MatrixCache
from nurbsct._accel import backend
cache = MatrixCache()
geom = FanBeamGeometry.default(num_views=6)
data = simulate_data(make_phantom("omega2", 256), geom, 0.1, cache=cache)
prob = PosteriorProblem(data, {n}, PriorSpec.default(12), cache=cache)
v = initial_state(12, c=0.027).vector
rng = np.random.default_rng(0)
vs = [v + rng.normal(0, 0.3, v.size) * (np.arange(v.size) % 2 == 0) for _ in range(200)]
prob(v)
t0 = time.perf_counter()
for w in vs:
    prob(w)
print(backend(), (time.perf_counter() - t0) / len(vs))
"""


def end_to_end(n):
    out = {}
    for flag in ("1", "0"):
        env = dict(os.environ, NURBSCT_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", _E2E.format(n=n)], env=env,
                             capture_output=True, text=True, check=True)
        name, sec = res.stdout.split()
        out[name] = float(sec)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--n", type=int, default=64, help="grid side")
    ap.add_argument("--json", help="also write the timings to this file")
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args(argv)

    rows = {}
    print(f"{'kernel':20s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'speed-up':>9s}")
    for name, (call, nb, npf) in kernel_cases(args.n).items():
        t_nb = best_time(lambda: call(nb), args.repeat)
        t_np = best_time(lambda: call(npf), args.repeat)
        rows[name] = {"numba": t_nb, "numpy": t_np}
        print(f"{name:20s} {1e3 * t_nb:12.4f} {1e3 * t_np:12.4f} {t_np / t_nb:9.1f}")
    if not args.skip_e2e:
        e2e = end_to_end(args.n)
        rows["log_posterior"] = e2e
        print(f"{'log_posterior':20s} {1e3 * e2e['numba']:12.4f} {1e3 * e2e['numpy']:12.4f} "
              f"{e2e['numpy'] / e2e['numba']:9.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
