"""Async vs lazy vs vanilla cubic Newton on synthetic logistic regression.

Every method pays a simulated curvature cost of ``tau`` gradient steps.
Vanilla blocks on it each step, lazy blocks every ``p`` steps and the
async split-client never blocks. Prints charged time-to-threshold for
the best setting of each method.

    python3 demos/compare_methods.py [tau]
"""

import math
import sys

from splitcubic import ProviderSpec, RunConfig, gen_synthetic, make_logistic_oracle
from splitcubic.bench import estimate_f_star, run_method, time_to_threshold

tau = int(sys.argv[1]) if len(sys.argv) > 1 else 50
oracle = make_logistic_oracle(gen_synthetic(500, 50, 1))
L = oracle.lipschitz_hessian_bound
f_star = estimate_f_star(oracle)
threshold = f_star + 1e-6 * (1 + abs(f_star))
print(f"tau={tau}  L={L:.3g}  f*={f_star:.10f}")

periods = {"async": [1], "vanilla": [1], "lazy": sorted({1, max(1, round(math.sqrt(tau))), tau})}
for driver, ps in periods.items():
    best = (math.inf, None)
    for c in (0.001, 0.01, 0.1, 1.0):
        for adaptive in (True, False):
            for p in ps:
                rc = RunConfig(rho=c * L, adaptive=adaptive, max_iters=300, grad_tol=1e-12,
                               track_mu=False, provider=ProviderSpec(tau=tau))
                t = time_to_threshold(run_method(oracle, driver, rc, p), threshold)
                best = min(best, (t, f"rho={c:g}L adaptive={adaptive} p={p}"), key=lambda b: b[0])
    print(f"{driver:>8s}: {best[0]:>8g} charged steps  ({best[1]})")
