"""Time the compiled kernel against the numpy fallback on the same ensemble.

    python benchmarks/bench_kernels.py [--trials 200] [--horizon 20000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from ttsa import kernels
from ttsa.core import NoiseModel
from ttsa.engine import record_indices
from ttsa.problems import PolyakSpec, make_linear_ttsa, make_polyak, random_linear_ttsa_spec
from ttsa.schedules import build_schedule


def cases():
    polyak = make_polyak(PolyakSpec([[0.5]], [0.5], NoiseModel.additive(0.5), NoiseModel.additive(0.5)))
    linear = make_linear_ttsa(random_linear_ttsa_spec(6, 4, seed=0, margin=5.0, noise_scale=0.05, zeta=0.15))
    yield "polyak 1+1", polyak, build_schedule(polyak, "both_one_over_k", beta=4, min_offset=100)
    yield "linear 6+4", linear, build_schedule(linear, "both_one_over_k", beta=4, min_offset=100)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--horizon", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    print(f"backends available: {', '.join(backends)}; selected: {kernels.BACKEND}")
    seeds = list(range(args.trials))
    rec = record_indices(args.horizon)[1:]
    print(f"{'case':<12} {'backend':<9} {'seconds':>9} {'steps/s':>12} {'speedup':>8}")
    for name, p, s in cases():
        x0, y0 = np.zeros(p.dim_fast), np.zeros(p.dim_slow)
        timings, outputs = {}, {}
        for b in backends:
            timings[b], outputs[b] = best_of(
                lambda: kernels.simulate_affine(p.affine, s, x0, y0, args.horizon, rec, seeds, p.noise_fast,
                                                p.noise_slow, backend=b, threads=args.threads),
                args.repeat)
        base = timings["python"]
        for b in backends:
            rate = args.trials * args.horizon / timings[b]
            print(f"{name:<12} {b:<9} {timings[b]:>9.3f} {rate:>12.3e} {base / timings[b]:>7.1f}x")
        if "compiled" in outputs:
            diff = max(float(np.max(np.abs(u - v))) for u, v in zip(outputs["python"], outputs["compiled"]))
            print(f"{name:<12} max |compiled - python| = {diff:.2e}")


if __name__ == "__main__":
    main()
