"""Benchmark the sampler with compiled kernels against the interpreted path.

Runs the same fit twice in subprocesses, once with CLAMR_NUMBA=1 and once
with CLAMR_NUMBA=0, checks that the retained draws are byte-identical, and
reports wall times and the speedup. The compiled worker does a small warmup
fit first so jit compilation stays out of the measured time.

Usage::

    python3 benchmarks/bench_gibbs.py [--n 300] [--iterations 1500] [--seed 0]
"""

import argparse
import hashlib
import os
import subprocess
import sys
import time


def run_fit(n: int, iterations: int, seed: int) -> str:
    from clamr import SimScenario, build_config, run_chain, scenario_mr_specs, simulate

    data, _ = simulate(SimScenario(kind="misspecified", n=n, seed=seed))
    specs = scenario_mr_specs("misspecified")

    def fit(iters: int) -> "object":
        config = build_config(
            specs,
            variance_mode="simulation",
            rhos=0.7,
            L=10,
            iterations=iters,
            burn_in=iters // 5,
            thin=5,
            seed=seed,
        )
        return run_chain(config, data)

    fit(50)  # warmup: compile (or just exercise) every kernel
    t0 = time.perf_counter()
    draws = fit(iterations)
    elapsed = time.perf_counter() - t0

    digest = hashlib.sha256()
    for arr in (draws.c, draws.s, draws.mu, draws.sigma2, draws.loglik):
        digest.update(arr.tobytes())
    print(f"RESULT {digest.hexdigest()} {elapsed:.3f}")
    return digest.hexdigest()


def run_worker(flag: str, args) -> tuple[str, float]:
    env = dict(os.environ, CLAMR_NUMBA=flag)
    proc = subprocess.run(
        [
            sys.executable,
            os.path.abspath(__file__),
            "--worker",
            "--n", str(args.n),
            "--iterations", str(args.iterations),
            "--seed", str(args.seed),
        ],
        env=env,
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        raise SystemExit(f"worker with CLAMR_NUMBA={flag} failed")
    for line in proc.stdout.splitlines():
        if line.startswith("RESULT "):
            _, digest, elapsed = line.split()
            return digest, float(elapsed)
    raise SystemExit(f"worker with CLAMR_NUMBA={flag} printed no result")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=300)
    parser.add_argument("--iterations", type=int, default=1500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        run_fit(args.n, args.iterations, args.seed)
        return 0

    print(f"workload: misspecified n={args.n}, L=10, {args.iterations} iterations")
    digest_jit, time_jit = run_worker("1", args)
    print(f"compiled kernels:    {time_jit:8.3f}s")
    digest_py, time_py = run_worker("0", args)
    print(f"interpreted kernels: {time_py:8.3f}s")
    if digest_jit != digest_py:
        raise SystemExit(
            f"draw digests differ: {digest_jit[:16]} (compiled) "
            f"vs {digest_py[:16]} (interpreted)"
        )
    print(f"draws byte-identical ({digest_jit[:16]}…)")
    print(f"speedup: {time_py / time_jit:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
