"""Compare the numba and numpy geodesic-flow backends on a loop-detection scan.

    python3 benchmarks/bench_flow.py [--lanes 1024] [--repeat 3]

Both backends integrate the same lanes; the script reports wall time per
backend and the largest disagreement in the final states.
"""

import argparse
import math
import time

import numpy as np

from revlab.geometry import BridgeSpec, RoundSphere, build_bridge_metric, build_profile_metric
from revlab.kernels.flow import scan_lanes


def lanes_for(metric, x0, n):
    psi = (np.arange(n) + 0.5) * (2 * math.pi / n)
    a0 = float(metric.a(np.array([x0]))[0])
    xs = np.full(n, x0)
    return xs, np.zeros(n), np.cos(psi), a0 * np.sin(psi)


def run(metric, x0, n, t_end, backend, repeat):
    xs, ths, pxs, pts = lanes_for(metric, x0, n)
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        status, out = scan_lanes(metric, xs, ths, pxs, pts, t_end, 1e-10, detect=True,
                                 base=(x0, 0.0), backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, status, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lanes", type=int, default=1024)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    cases = [
        ("bridge torus, band equator", build_bridge_metric(BridgeSpec()), 0.0),
        ("round sphere, equator", build_profile_metric(RoundSphere()), math.pi / 2),
    ]
    t_end = 2 * math.pi + 0.1
    print(f"{'case':32s} {'backend':8s} {'seconds':>9s} {'lanes/s':>10s}")
    for label, metric, x0 in cases:
        # warm up the compiled kernels outside the timing
        run(metric, x0, 8, t_end, "numba", 1)
        results = {}
        for backend in ("numba", "numpy"):
            secs, status, out = run(metric, x0, args.lanes, t_end, backend, args.repeat)
            results[backend] = (status, out)
            print(f"{label:32s} {backend:8s} {secs:9.3f} {args.lanes / secs:10.1f}")
        (s1, o1), (s2, o2) = results["numba"], results["numpy"]
        same = np.array_equal(s1, s2)
        diff = float(np.max(np.abs(o1 - o2)))
        print(f"{'':32s} status agree: {same}, max state difference: {diff:.2e}")


if __name__ == "__main__":
    main()
