"""Compare the compiled kernels with the pure-Python fallback.

Each mode runs in its own interpreter because the switch
(``OTSUB_DISABLE_NUMBA=1``) is read at import time.

    python3 benchmarks/bench_kernels.py [--R 12] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys
import time

CHILD = r"""
import json, sys, time
import numpy as np
from otsub import _accel
from otsub._kernels import farthest_point_cover_coords, pairwise_euclidean
from otsub.exact import solve_transport_simplex
from otsub.instances import InstanceSpec
from otsub.subsample import SubsampleParams, approximate

R, repeat = int(sys.argv[1]), int(sys.argv[2])
space, r, s = InstanceSpec("grid", "cauchy-density", R).build()
x = np.ascontiguousarray(space.coords)

def best(fn):
    fn()  # compile / warm caches
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        ts.append(time.perf_counter() - t0)
    return min(ts), out

res = {"numba": _accel.NUMBA_ENABLED}
res["pairwise"], _ = best(lambda: pairwise_euclidean(x, x))
res["cover"], _ = best(lambda: farthest_point_cover_coords(x, 1.5, 0))
res["simplex"], plan = best(lambda: solve_transport_simplex(r, s, 2.0))
res["subsample"], est = best(lambda: approximate(r, s, 2.0, SubsampleParams(S=100, B=2, seed=1)))
res["value"] = plan.value
res["estimate"] = est.estimate
print(json.dumps(res))
"""


def run(mode, R, repeat):
    env = dict(os.environ)
    env.pop("OTSUB_DISABLE_NUMBA", None)
    if mode == "python":
        env["OTSUB_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", CHILD, str(R), str(repeat)], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--R", type=int, default=12, help="grid resolution (N = R^2)")
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args(argv)
    t0 = time.perf_counter()
    fast = run("numba", a.R, a.repeat)
    slow = run("python", a.R, a.repeat)
    print(f"grid {a.R}x{a.R}, best of {a.repeat} (numba enabled: {fast['numba']})")
    print(f"{'kernel':<10} {'numba s':>10} {'python s':>10} {'speedup':>9}")
    for k in ("pairwise", "cover", "simplex", "subsample"):
        print(f"{k:<10} {fast[k]:>10.5f} {slow[k]:>10.5f} {slow[k] / max(fast[k], 1e-12):>8.1f}x")
    same = abs(fast["value"] - slow["value"]) <= 1e-9 * fast["value"] and fast["estimate"] == slow["estimate"]
    print(f"results agree: {same}  (total {time.perf_counter() - t0:.1f}s)")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
