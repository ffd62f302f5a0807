"""Kernel benchmark: compiled path against the plain-Python fallback.

Run as ``python -m ckpsim.bench``. The module times a fixed workload in
the current process, then re-runs itself in a subprocess with
CKP_DISABLE_NUMBA=1 and reports both, so the two paths never share an
interpreter (the kernel implementation is chosen at import time).
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import time

from ._kernels import NUMBA_ENABLED
from .evolution import MetricsPlan, run
from .rng import split
from .state import Params, SimpleRootCF, new_state

WORKLOAD = dict(p="1/5", k=5, t_max=20000, trials=20, seed=12345)


def time_workload() -> dict:
    params = Params.make(0, WORKLOAD["p"], WORKLOAD["k"])
    # warm-up trial so compilation is not billed to the measurement
    st = new_state(params, SimpleRootCF(), capacity=64)
    run(st, 32, split(0, 0), plan=MetricsPlan(times=[]), record=lambda s: None)

    t0 = time.perf_counter()
    steps = 0
    for i in range(WORKLOAD["trials"]):
        st = new_state(params, SimpleRootCF(),
                       capacity=WORKLOAD["t_max"] + 8)
        traj = run(st, WORKLOAD["t_max"], split(WORKLOAD["seed"], i),
                   plan=MetricsPlan(times=[]), record=lambda s: None)
        steps += traj.final_clock
    elapsed = time.perf_counter() - t0
    return {
        "kernel": "numba" if NUMBA_ENABLED else "python",
        "steps": steps,
        "seconds": elapsed,
        "steps_per_second": steps / elapsed,
    }


def main() -> int:
    mine = time_workload()
    print(json.dumps(mine))
    if os.environ.get("CKP_BENCH_CHILD"):
        return 0
    env = dict(os.environ, CKP_BENCH_CHILD="1",
               CKP_DISABLE_NUMBA="0" if not NUMBA_ENABLED else "1")
    out = subprocess.run([sys.executable, "-m", "ckpsim.bench"],
                         env=env, capture_output=True, text=True)
    if out.returncode != 0:
        print(out.stderr, file=sys.stderr)
        return out.returncode
    other = json.loads(out.stdout.strip().splitlines()[-1])
    print(json.dumps(other))
    fast, slow = (mine, other) if mine["steps_per_second"] \
        >= other["steps_per_second"] else (other, mine)
    print(f"{fast['kernel']} kernel is "
          f"{fast['steps_per_second'] / slow['steps_per_second']:.1f}x "
          f"faster ({fast['steps_per_second']:.0f} vs "
          f"{slow['steps_per_second']:.0f} steps/s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
