"""Compare the numba-compiled kernels against the pure-numpy fallback.

Runs a representative workload (LHMC chains on the far-mode mixture and on a
Bayesian logistic regression posterior) in a subprocess per backend, since
the backend is fixed at import time by the VLHMC_NUMBA environment variable.

Usage: python benchmarks/compare_backends.py [--samples 2000]
"""

import argparse
import json
import os
import subprocess
import sys
import textwrap

WORKLOAD = textwrap.dedent(
    """
    import json, time
    import numpy as np
    import vlhmc
    from vlhmc.dynamics import DynamicsParams

    n_samples = {n_samples}
    results = {{"numba_enabled": vlhmc.NUMBA_ENABLED}}

    spec = vlhmc.GaussianMixtureSpec(
        [0.5, 0.5], [[6.5, -6.5], [-6.5, 6.5]], [np.eye(2), np.eye(2)]
    )
    mixture = vlhmc.make_gaussian_mixture(spec)
    cfg = vlhmc.SamplerConfig(
        dynamics=DynamicsParams(0.05, 100, friction=0.5),
        n_samples=n_samples, leapfrog_jitter=(80, 120),
    )
    vlhmc.lhmc_chain(mixture, np.zeros(2), cfg, 0)  # warm-up (jit compile)
    t0 = time.perf_counter()
    chain = vlhmc.lhmc_chain(mixture, np.zeros(2), cfg, 1)
    results["mixture_lhmc_seconds"] = time.perf_counter() - t0
    results["mixture_acceptance"] = chain.acceptance_rate

    rng = np.random.default_rng(2)
    x = rng.standard_normal((500, 8))
    x = (x - x.mean(axis=0)) / x.std(axis=0)
    labels = (rng.uniform(size=500) < 1 / (1 + np.exp(-x @ rng.normal(size=8)))).astype(float)
    blr = vlhmc.make_blr_target(vlhmc.BlrModel(x, labels, 100.0))
    cfg_blr = vlhmc.SamplerConfig(
        dynamics=DynamicsParams(0.00045, 100, mass=3.0, friction=0.5),
        n_samples=max(200, n_samples // 4), leapfrog_jitter=(80, 120),
    )
    vlhmc.lhmc_chain(blr, np.zeros(8), cfg_blr, 0)  # warm-up
    t0 = time.perf_counter()
    vlhmc.lhmc_chain(blr, np.zeros(8), cfg_blr, 1)
    results["blr_lhmc_seconds"] = time.perf_counter() - t0

    print(json.dumps(results))
    """
)


def run_backend(numba_flag: str, n_samples: int) -> dict:
    env = dict(os.environ, VLHMC_NUMBA=numba_flag)
    proc = subprocess.run(
        [sys.executable, "-c", WORKLOAD.format(n_samples=n_samples)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=2000)
    args = parser.parse_args()

    numba = run_backend("1", args.samples)
    numpy_only = run_backend("0", args.samples)
    assert numba["numba_enabled"] and not numpy_only["numba_enabled"]

    print(f"{'workload':<22}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for key, label in (
        ("mixture_lhmc_seconds", "far-mode LHMC"),
        ("blr_lhmc_seconds", "BLR LHMC"),
    ):
        a, b = numba[key], numpy_only[key]
        print(f"{label:<22}{a:>11.3f}s{b:>11.3f}s{b / a:>9.1f}x")


if __name__ == "__main__":
    main()
