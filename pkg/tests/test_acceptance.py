"""Acceptance criteria 1-10.

Each test records a one-line verdict that is printed in the terminal
summary. Run standalone with ``python3 tests/test_acceptance.py``.
"""

import math
import sys
import threading
import time

import numpy as np
import pytest

if __name__ == "__main__":
    # script entry: hand over to pytest so the package-relative imports below resolve
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))

from splitcubic import (
    ProviderSpec,
    RunConfig,
    bundled_a1a_sample,
    gen_synthetic,
    make_logistic_oracle,
    make_test_oracle,
    run_lazy,
    run_split_client,
    run_vanilla,
)
from splitcubic.bench import estimate_f_star, profile, run_method, time_to_threshold
from splitcubic.verify import lemma_campaign, solver_campaign, sum_bound_campaign, theorem1_campaign

from .conftest import fd_grad, fd_hess, rel_err
from .test_curvature import SlowGrad


# ---------------------------------------------------------------------------
# 1. solver correctness

def test_c01_solver_correctness(acceptance):
    t0 = time.perf_counter()
    res = solver_campaign(1000, seed=7)
    secs = time.perf_counter() - t0
    ok = res.violations == 0 and secs < 60
    acceptance(1, "solver", ok,
               f"{res.passed['invariants']}/1000 KKT, {res.passed['global_min_d3']} d<=3 brute-force, "
               f"worst ratio {res.info['worst_ratio']:.2e}, {secs:.1f}s")
    assert res.violations == 0, res.failures[:3]
    assert secs < 60


# ---------------------------------------------------------------------------
# 2. tau = 0 collapse

def test_c02_tau0_is_vanilla(acceptance):
    o = make_logistic_oracle(gen_synthetic(200, 20, 1))
    cfg = RunConfig(rho=o.lipschitz_hessian_bound, max_iters=50, grad_tol=0.0, eig_tol=0.0)
    a, b = run_split_client(o, cfg), run_vanilla(o, cfg)
    gap = max(float(np.max(np.abs(x - y))) for x, y in zip(a.iterates, b.iterates))
    ok = len(a.iterates) == len(b.iterates) == 51 and gap <= 1e-12
    acceptance(2, "trajectory", ok, f"max coordinate gap {gap:.1e} over 50 steps")
    assert ok


# ---------------------------------------------------------------------------
# 3. one-step lemmas and windowed sum bound

def test_c03_one_step_lemmas(acceptance):
    res = lemma_campaign(500, seed=3, sum_bound_trials=0)
    counts = {k: v for k, v in res.passed.items() if k != "sum_bound_derived"}
    bad = sum(v for k, v in res.failed.items() if k != "sum_bound_derived")
    acceptance(3, "one-step", bad == 0,
               f"{sum(counts.values())} checks over {len(counts)} (checker, oracle) pairs, {bad} violations")
    assert bad == 0, res.failures[:3]


def test_c03_sum_bound(acceptance):
    res = sum_bound_campaign(1000, seed=3)
    bad = res.failed["sum_bound_derived"]
    forms = res.info["violations_by_form"]
    acceptance(3, "sum-bound", bad == 0,
               f"(tau+1)^3/3 form violated on {bad}/1000 sequences; jensen form {forms['jensen']}")
    assert bad == 0


# ---------------------------------------------------------------------------
# 4. complexity bound on real runs

@pytest.fixture(scope="module")
def theorem1():
    return theorem1_campaign(seed=1)


def test_c04_prefix_bound(acceptance, theorem1):
    ok = theorem1.violations == 0
    worst = max(v["worst_ratio"] for v in theorem1.info.values())
    acceptance(4, "bound", ok, f"all prefixes T in [10,200], worst lhs/rhs {worst:.2e}")
    assert ok


def test_c04_running_average_slope(acceptance, theorem1):
    slopes = {k: v["slope_final_decade"] for k, v in theorem1.info.items()}
    ok = all(s <= -0.5 for s in slopes.values())
    acceptance(4, "slope", ok, ", ".join(f"{k} {s:.3f}" for k, s in slopes.items()))
    assert ok, slopes


# ---------------------------------------------------------------------------
# 5. wall-clock ordering

RHO_GRID = (0.001, 0.01, 0.1, 1.0, 10.0)
P_GRID = (1, 2, 5, 7, 10, 25, 50)


@pytest.fixture(scope="module")
def ordering_problem():
    o = make_logistic_oracle(gen_synthetic(500, 50, 1))
    f_star = estimate_f_star(o)
    return o, f_star + 1e-6 * (1 + abs(f_star))


def best_time(oracle, driver, tau, threshold, periods=(1,)):
    L = oracle.lipschitz_hessian_bound
    best = math.inf
    for c in RHO_GRID:
        for adaptive in (True, False):
            for p in periods:
                rc = RunConfig(rho=c * L, adaptive=adaptive, max_iters=300, grad_tol=1e-12,
                               track_mu=False, provider=ProviderSpec(tau=tau))
                best = min(best, time_to_threshold(run_method(oracle, driver, rc, p), threshold))
    return best


def test_c05_ordering_at_tau50(acceptance, ordering_problem):
    o, thr = ordering_problem
    t = {d: best_time(o, d, 50, thr, P_GRID if d == "lazy" else (1,))
         for d in ("async", "lazy", "vanilla")}
    ok = t["async"] < t["lazy"] < t["vanilla"]
    acceptance(5, "ordering", ok, f"async {t['async']:g} < lazy {t['lazy']:g} < vanilla {t['vanilla']:g}")
    assert ok


def test_c05_ratio_grows_with_tau(acceptance, ordering_problem):
    o, thr = ordering_problem
    ratios = [best_time(o, "vanilla", tau, thr) / best_time(o, "async", tau, thr)
              for tau in (4, 16, 64)]
    ok = ratios[0] < ratios[1] < ratios[2]
    acceptance(5, "ratio", ok, "vanilla/async " + ", ".join(
        f"tau={tau}: {r:.2f}" for tau, r in zip((4, 16, 64), ratios)))
    assert ok


# ---------------------------------------------------------------------------
# 6. charged-time formulas

def test_c06_charged_time(acceptance):
    rng = np.random.Generator(np.random.Philox(6))
    o = make_logistic_oracle(gen_synthetic(60, 4, 6))
    mismatches = []
    for _ in range(20):
        T = int(rng.integers(1, 80))
        tau = int(rng.integers(0, 40))
        p = int(rng.integers(1, T + 5))
        cfg = RunConfig(max_iters=T, grad_tol=0.0, track_mu=False, provider=ProviderSpec(tau=tau))
        got = (run_split_client(o, cfg).charged_time, run_vanilla(o, cfg).charged_time,
               run_lazy(o, cfg, p).charged_time)
        want = (T, T * (tau + 1), T + -(-T // p) * tau)
        if got != want:
            mismatches.append(((T, tau, p), got, want))
    acceptance(6, "formulas", not mismatches, f"{20 - len(mismatches)}/20 triples exact")
    assert not mismatches


# ---------------------------------------------------------------------------
# 7. oracle calculus

def test_c07_oracle_calculus(acceptance):
    rng = np.random.Generator(np.random.Philox(7))
    A = rng.standard_normal((6, 6))
    oracles = {
        "logistic": make_logistic_oracle(gen_synthetic(100, 6, 7), l2=1e-3),
        "quadratic": make_test_oracle("quadratic", A=A + A.T, b=rng.standard_normal(6)),
        "rosenbrock": make_test_oracle("rosenbrock", d=6),
        "sum_of_cubics": make_test_oracle("sum_of_cubics", d=6),
    }
    worst_g = worst_h = 0.0
    for o in oracles.values():
        for _ in range(20):
            x = rng.standard_normal(6)
            worst_g = max(worst_g, rel_err(o.grad(x), fd_grad(o.f, x)))
            worst_h = max(worst_h, rel_err(o.hess_array(x), fd_hess(o.grad, x)))
    logi = oracles["logistic"]
    L = logi.lipschitz_hessian_bound
    worst_lip = 0.0
    for _ in range(200):
        x, y = rng.standard_normal(6) * 2, rng.standard_normal(6) * 2
        lhs = np.linalg.norm(logi.hess_array(x) - logi.hess_array(y), 2)
        worst_lip = max(worst_lip, lhs / (L * np.linalg.norm(x - y)))
    ok = worst_g <= 1e-5 and worst_h <= 1e-4 and worst_lip <= 1 + 1e-12
    acceptance(7, "calculus", ok, f"grad rel {worst_g:.1e}, hess rel {worst_h:.1e}, "
               f"Lipschitz ratio {worst_lip:.3f} on 200 pairs")
    assert ok


# ---------------------------------------------------------------------------
# 8. profile

def test_c08_profile(acceptance):
    rows = profile([50, 100, 200, 400], n=1000, seed=1)
    ratio = [r["t_decomp_ns"] / r["t_grad_ns"] for r in rows]
    rising = ratio[1] < ratio[2] < ratio[3]
    cheap_step = rows[-1]["t_step_ns"] < rows[-1]["t_decomp_ns"]
    acceptance(8, "profile", rising and cheap_step,
               "decomp/grad " + ", ".join(f"{x:.2f}" for x in ratio)
               + f"; step/decomp at d=400 {rows[-1]['t_step_ns'] / rows[-1]['t_decomp_ns']:.3f}")
    assert rising and cheap_step


# ---------------------------------------------------------------------------
# 9. L-BFGS curvature

def test_c09_lbfgs(acceptance):
    o = make_logistic_oracle(bundled_a1a_sample(), l2=1e-3)
    cfg = RunConfig(rho=1.0, adaptive=True, max_iters=500, grad_tol=1e-4, track_mu=False,
                    provider=ProviderSpec(tau=5, curvature="lbfgs"))
    tr = run_split_client(o, cfg)
    res = np.array(tr.secant_residuals)
    ok = tr.status == "converged" and tr.records[-1].grad_norm <= 1e-4 \
        and res.size > 0 and np.all(res <= 1e-8)
    acceptance(9, "lbfgs", ok, f"{tr.status} after {tr.n_iters} iterations, "
               f"{res.size} updates, max secant residual {res.max(initial=0):.1e}")
    assert ok


# ---------------------------------------------------------------------------
# 10. threaded provider

def test_c10_threaded(acceptance):
    o = SlowGrad(make_logistic_oracle(gen_synthetic(200, 20, 10)), 0.001)
    cfg = RunConfig(rho=1.0, max_iters=300, grad_tol=0.0, eig_tol=0.0, track_mu=False,
                    provider=ProviderSpec(kind="threaded", worker_sleep=0.02))
    box = {}
    runner = threading.Thread(target=lambda: box.update(trace=run_split_client(o, cfg)), daemon=True)
    runner.start()
    runner.join(timeout=120)
    assert not runner.is_alive(), "run did not finish: deadlock"
    tr = box["trace"]
    d = np.array(tr.consumed_delays)
    frac = float(np.mean((d >= 10) & (d <= 60))) if d.size else 0.0
    ok = frac >= 0.8 and tr.shutdown_ns is not None and tr.shutdown_ns < 100e6
    acceptance(10, "threaded", ok, f"{frac:.0%} of {d.size} delays in [10,60], "
               f"median {np.median(d) if d.size else float('nan'):g}, "
               f"shutdown {tr.shutdown_ns / 1e6:.2f} ms")
    assert ok
