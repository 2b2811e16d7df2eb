#!/usr/bin/env python3
"""Compare the numba-compiled kernels against the pure-numpy fallback.

Times the single-step kernel and a full closed-loop hover scenario under
both backends (each in its own process so the import-time backend switch is
honest), plus the in-process jit-vs-py_func micro comparison.

Usage: python benchmarks/bench_backends.py [--steps N]
"""

import argparse
import json
import os
import subprocess
import sys
import textwrap
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent

WORKER = textwrap.dedent("""
    import json, time
    import numpy as np
    from ammsim.backend import BACKEND
    from ammsim import kernels
    from ammsim.dynamics import default_hexrotor
    from ammsim.scenarios import Scenario, run_scenario
    from ammsim.control import Setpoint
    from ammsim.dynamics import DisturbanceProfile

    n_steps = {n_steps}
    model = default_hexrotor(with_arm=True)
    s = np.zeros(kernels.STATE_BASE + 6); s[3] = 1.0; s[2] = 1.0
    s[13:15] = [1.0, -0.5]
    args = (s, 1e-3, np.full(6, 1.7e5), np.zeros((n_steps, 3)),
            np.zeros((n_steps, 3)), np.zeros((n_steps, 3)), 0.0, model.mass,
            model.inertia, np.linalg.inv(model.inertia),
            model.mapping().entries, 0.0, 1, model.arm_param_vector(),
            np.zeros(9), 9.81, np.empty((n_steps, s.size)))

    kernels.simulate_span(*args)            # warm-up / compile
    t0 = time.perf_counter()
    kernels.simulate_span(*args)
    span_s = time.perf_counter() - t0

    sc = Scenario(name="bench", vehicle="hexrotor",
                  controller_mode="hexrotor_ppd", arm_mode="frozen",
                  duration=n_steps * 1e-3, initial_position=(0.2, 0, 1.0),
                  setpoint_schedule=((0.0, Setpoint(position=np.array([0, 0, 1.0]))),),
                  disturbance=DisturbanceProfile(gust_noise_std=0.2, seed=1))
    t0 = time.perf_counter()
    run_scenario(sc)
    closed_s = time.perf_counter() - t0
    print(json.dumps({{"backend": BACKEND, "span_us_per_step": 1e6 * span_s / n_steps,
                       "closed_loop_us_per_step": 1e6 * closed_s / n_steps}}))
""")


def run_worker(pure_numpy: bool, n_steps: int) -> dict:
    env = dict(os.environ, AMM_PURE_NUMPY="1" if pure_numpy else "0")
    proc = subprocess.run([sys.executable, "-c", WORKER.format(n_steps=n_steps)],
                          capture_output=True, text=True, env=env, cwd=REPO)
    if proc.returncode != 0:
        raise RuntimeError(proc.stderr)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def micro_inprocess() -> dict | None:
    """jit vs .py_func on the derivative kernel, same process."""
    from ammsim.backend import USE_NUMBA
    if not USE_NUMBA:
        return None
    import time

    import numpy as np

    from ammsim import kernels
    from ammsim.dynamics import default_hexrotor

    model = default_hexrotor(with_arm=True)
    s = np.zeros(kernels.STATE_BASE + 6)
    s[3] = 1.0
    s[13:15] = [1.0, -0.5]
    args = (s, 6, np.full(6, 1.7e5), np.zeros(3), np.zeros(3), np.zeros(3),
            0.0, model.mass, model.inertia, np.linalg.inv(model.inertia),
            model.mapping().entries, 0.0, 1, model.arm_param_vector(),
            np.zeros(9), 9.81)
    kernels.amm_deriv(*args)
    reps = 2000
    t0 = time.perf_counter()
    for _ in range(reps):
        kernels.amm_deriv(*args)
    jit_us = 1e6 * (time.perf_counter() - t0) / reps
    reps = 200
    t0 = time.perf_counter()
    for _ in range(reps):
        kernels.amm_deriv.py_func(*args)
    py_us = 1e6 * (time.perf_counter() - t0) / reps
    return {"deriv_jit_us": jit_us, "deriv_pyfunc_us": py_us,
            "speedup": py_us / jit_us}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=4000)
    args = ap.parse_args()

    print(f"== backend benchmark ({args.steps} steps, coupled arm model) ==")
    results = {}
    for pure in (False, True):
        r = run_worker(pure, args.steps)
        results[r["backend"]] = r
        print(f"{r['backend']:>6}: span kernel {r['span_us_per_step']:8.2f} us/step, "
              f"closed loop {r['closed_loop_us_per_step']:8.2f} us/step")
    if "numba" in results and "numpy" in results:
        s = (results["numpy"]["span_us_per_step"]
             / results["numba"]["span_us_per_step"])
        c = (results["numpy"]["closed_loop_us_per_step"]
             / results["numba"]["closed_loop_us_per_step"])
        print(f"speedup: span {s:.1f}x, closed loop {c:.1f}x")
    micro = micro_inprocess()
    if micro:
        print(f"in-process derivative kernel: jit {micro['deriv_jit_us']:.2f} us, "
              f"py_func {micro['deriv_pyfunc_us']:.2f} us "
              f"({micro['speedup']:.1f}x)")


if __name__ == "__main__":
    main()
