#!/usr/bin/env python3
"""Benchmark the compiled chain kernels against the pure-Python fallback.

Usage: python benchmarks/bench_backends.py [--steps N]
"""

import argparse
import time

import numpy as np

import temperlab as tl
from temperlab._backend import get_backend
from temperlab.finitelab import random_reversible_chain
from temperlab.tempering import (AugState, TemperingConfig, TemperingState,
                                 run_chain)


def time_chain(backend, kind, steps, augmented=False):
    spec = tl.two_mode_spec(4.0, 2)
    ladder = tl.build_ladder(1.0, 1.0, 2, 4.0)
    h = 0.5 if kind == "rwm" else 2e-3
    cfg = TemperingConfig(proposal_kind=kind, h=h, alpha=0.5, q_adj=0.5,
                          lazy=True, seed=1)
    if augmented:
        init = AugState(0, 0, spec.modes[0].copy())
    else:
        init = TemperingState(0, spec.modes[0].copy())
    run_chain(init, spec, ladder, cfg, min(steps, 2000), backend=backend)  # warm up
    t0 = time.perf_counter()
    trace = run_chain(init, spec, ladder, cfg, steps, backend=backend)
    dt = time.perf_counter() - t0
    return steps / dt, trace


def time_cut_scan(backend_name, n, reps):
    rng = np.random.default_rng(7)
    chain = random_reversible_chain(rng, n)
    F = chain.flows()
    F = np.ascontiguousarray((F + F.T) / 2)
    backend = get_backend(backend_name)
    backend.cut_scan(F, chain.pi, [0.0])  # warm up
    t0 = time.perf_counter()
    for _ in range(reps):
        backend.cut_scan(F, chain.pi, [0.0, 0.05, 0.2])
    return (time.perf_counter() - t0) / reps


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=300_000)
    args = parser.parse_args()

    try:
        get_backend("compiled")
        backends = ["compiled", "python"]
    except ImportError:
        print("compiled extension not built; benchmarking the fallback only")
        backends = ["python"]

    rows = []
    for label, kind, aug in [("tempering/rwm", "rwm", False),
                             ("tempering/mala", "mala", False),
                             ("augmented/rwm", "rwm", True)]:
        rates = {}
        ref = None
        for b in backends:
            rate, trace = time_chain(b, kind, args.steps, augmented=aug)
            rates[b] = rate
            if ref is None:
                ref = trace.xs
            else:
                assert np.array_equal(ref, trace.xs), "backends disagree"
        rows.append((label, rates))

    scan = {}
    for b in backends:
        scan[b] = time_cut_scan(b, 16, 3)
    rows.append(("cut-scan n=16", {b: 1.0 / scan[b] for b in backends}))

    width = max(len(r[0]) for r in rows) + 2
    header = f"{'kernel':<{width}}" + "".join(f"{b:>16}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for label, rates in rows:
        line = f"{label:<{width}}"
        for b in backends:
            unit = "steps/s" if "scan" not in label else "scans/s"
            line += f"{rates[b]:>12,.0f} {unit[:3]}"
        if len(backends) == 2:
            line += f"{rates['compiled'] / rates['python']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
