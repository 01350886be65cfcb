"""Real background curvature worker with an artificial 20 ms cost.

Gradient steps take about 1 ms, so each Hessian is consumed roughly
15-20 steps after the iterate it was evaluated at.

    python3 demos/threaded_worker.py
"""

import time

import numpy as np

from splitcubic import ProviderSpec, RunConfig, gen_synthetic, make_logistic_oracle, run_split_client


class SlowGrad:
    def __init__(self, oracle, delay):
        self._o, self._delay = oracle, delay

    def __getattr__(self, name):
        return getattr(self._o, name)

    def grad(self, x):
        time.sleep(self._delay)
        return self._o.grad(x)


oracle = SlowGrad(make_logistic_oracle(gen_synthetic(200, 20, 10)), 0.001)
cfg = RunConfig(rho=1.0, max_iters=300, grad_tol=0.0, eig_tol=0.0, track_mu=False,
                provider=ProviderSpec(kind="threaded", worker_sleep=0.02))
trace = run_split_client(oracle, cfg)
delays = np.array(trace.consumed_delays)
print(f"{trace.n_iters} steps, {delays.size} curvature updates consumed")
print(f"observed delays: min {delays.min()}  median {np.median(delays):g}  max {delays.max()}")
print(f"final loss {trace.records[-1].f:.6f}, worker shutdown {trace.shutdown_ns / 1e6:.2f} ms")
