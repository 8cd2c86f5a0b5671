"""Benchmark the compiled trial kernel against the pure numpy fallback.

Both backends run the exact same seeded workload (same networks, same
generator seeds), so the reported trial counts must agree; the script
asserts that before printing throughput.

Usage:
    python benchmarks/bench_kernels.py [--runs N] [--group-size L] [--mode M]
"""

import argparse
import math
import time

import numpy as np

from beamselect import Scenario, sample_network
from beamselect._kernels import _ref
from beamselect.beampattern import phase_difference_components

try:
    from beamselect._kernels import _fast
except ImportError:
    _fast = None


def make_workload(group_size: int, eta_db: float):
    scen = Scenario(seed=2024, num_candidates=512, num_selected=256,
                    group_size=group_size, disk_radius_wavelengths=5.0,
                    intended_direction=0.0,
                    unintended_directions=(math.radians(65.0),),
                    inr_threshold=10.0 ** (eta_db / 10.0), target_snr=10.0,
                    noise_power=0.05, lognormal_mean=0.0, lognormal_var=0.2)
    net = sample_network(scen)
    cmat, smat = phase_difference_components(
        net, scen.intended_direction, scen.unintended_directions)
    afix = np.ascontiguousarray(net.shadowing[:, 1:2])
    pool = np.arange(scen.num_candidates, dtype=np.intp)
    thr = np.full(1, scen.inr_threshold)
    return scen, cmat, smat, afix, pool, thr


def run_backend(impl, runs: int, mode: str, workload) -> tuple[int, float]:
    scen, cmat, smat, afix, pool, thr = workload
    sigma = math.sqrt(scen.lognormal_var)
    if mode == "fixed":
        args = (afix, 0.0, 0.0)
    else:
        args = (None, scen.lognormal_mean, sigma)
    total = 0
    t0 = time.perf_counter()
    for run in range(runs):
        gen = np.random.Generator(np.random.PCG64(1_000_000 + run))
        res = impl.run_trials(gen, pool, cmat, smat, *args, scen.target_snr,
                              thr, scen.group_sizes, 200_000, False)
        total += res["trials"]
    return total, time.perf_counter() - t0


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--runs", type=int, default=300,
                        help="selection runs per backend (default 300)")
    parser.add_argument("--group-size", type=int, default=16,
                        help="nodes per trial group (default 16)")
    parser.add_argument("--eta-db", type=float, default=0.0,
                        help="approval threshold in dB (default 0, ~20 "
                             "trials per run)")
    parser.add_argument("--mode", choices=("fixed", "redraw", "both"),
                        default="both")
    args = parser.parse_args()

    workload = make_workload(args.group_size, args.eta_db)
    modes = ("fixed", "redraw") if args.mode == "both" else (args.mode,)
    backends = [("ref", _ref)] + ([("fast", _fast)] if _fast else [])
    if _fast is None:
        print("compiled extension not available; timing the fallback only")

    for mode in modes:
        print(f"\nmode={mode} runs={args.runs} L={args.group_size} "
              f"eta={args.eta_db:g}dB")
        results = {}
        for name, impl in backends:
            trials, elapsed = run_backend(impl, args.runs, mode, workload)
            results[name] = (trials, elapsed)
            print(f"  {name:>4}: {trials:>9} trials in {elapsed:8.3f}s "
                  f"({trials / elapsed:12.0f} trials/s)")
        if len(results) == 2:
            assert results["ref"][0] == results["fast"][0], \
                "backends disagree on the workload"
            speedup = results["ref"][1] / results["fast"][1]
            print(f"  speedup: {speedup:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
