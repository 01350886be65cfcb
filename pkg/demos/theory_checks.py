"""Evaluate the complexity bound and the one-step inequalities on live runs.

    python3 demos/theory_checks.py
"""

import numpy as np

from splitcubic import analysis
from splitcubic.verify import lemma_campaign, loglog_slope, sum_bound_campaign, theorem1_run

for tau in (0, 5, 20):
    trace, mu, params, report = theorem1_run(tau, T=200)
    avg = np.cumsum(mu) / np.arange(1, mu.size + 1)
    print(f"tau={tau:2d} rho={params.rho:8.3g}  avg mu at T=200: {avg[-1]:.3e}  "
          f"bound: {analysis.theorem1_bound(params):.3e}  "
          f"slope over T in [20,200]: {loglog_slope(avg, 20, 200):.3f}")

lem = lemma_campaign(100, seed=0, sum_bound_trials=0)
for line in lem.lines():
    print(line)

sb = sum_bound_campaign(1000, seed=0)
print(sb.lines()[0], "| violations by other forms:", sb.info["violations_by_form"])

# a constant window shows why the (tau+1)^3/3 constant is too small
rep = analysis.check_lemma_sum_bound(np.ones(50), 5)
for name, part in rep.parts.items():
    print(f"constant sequence, {name:>12s}: lhs={part.lhs:10.1f} rhs={part.rhs:10.1f}")
