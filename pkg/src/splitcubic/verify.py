"""Seeded verification campaigns shared by the CLI and the test suite.

Each campaign returns a :class:`CampaignResult` with pass/fail counts per
check and the falsifying instances, serialized to plain lists so they can
be dumped as JSON.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from . import analysis
from .cubic import CubicModel, model_value, solve_cubic
from .linalg import sym_eig
from .optimizer import ProviderSpec, RunConfig, run_split_client, run_vanilla
from .problems import SumOfCubicsOracle, gen_synthetic, make_logistic_oracle


@dataclass
class CampaignResult:
    name: str
    passed: dict = field(default_factory=dict)
    failed: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def tally(self, check: str, ok: bool, instance=None):
        bucket = self.passed if ok else self.failed
        bucket[check] = bucket.get(check, 0) + 1
        self.passed.setdefault(check, 0)
        self.failed.setdefault(check, 0)
        if not ok and instance is not None:
            self.failures.append({"check": check, **instance})

    @property
    def violations(self) -> int:
        return sum(self.failed.values())

    def lines(self) -> list[str]:
        return [f"{self.name}/{k}: {self.passed[k]} passed, {self.failed[k]} failed"
                for k in sorted(self.passed)]

    def merge(self, other: CampaignResult) -> CampaignResult:
        for k in other.passed:
            self.passed[f"{other.name}/{k}"] = other.passed[k]
            self.failed[f"{other.name}/{k}"] = other.failed[k]
        self.failures += other.failures
        self.info[other.name] = other.info
        return self


def _rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def _tolist(a):
    return np.asarray(a, dtype=float).tolist()


# ---------------------------------------------------------------------------
# cubic solver

def random_cubic_model(rng, d_max: int = 20) -> CubicModel:
    """Random model with indefinite H allowed, rho log-uniform on [0.1, 100].

    A quarter of the draws zero the gradient's component along the
    smallest eigenvector, exercising the hard and near-hard cases.
    """
    d = int(rng.integers(1, d_max + 1))
    A = rng.standard_normal((d, d))
    F = sym_eig((A + A.T) / 2)
    c = rng.standard_normal(d) * 10 ** rng.uniform(-3, 1)
    if rng.random() < 0.25:
        c[0] *= 10 ** rng.uniform(-16, -4) if rng.random() < 0.5 else 0.0
    g = F.eigenvectors @ c
    rho = float(10 ** rng.uniform(-1, 2))
    return CubicModel(g, F, rho)


def solution_violations(model: CubicModel, sol) -> dict:
    """Ratio of each certificate quantity to its tolerance; values above 1 fail."""
    lam = model.lambda_min
    return {
        "shift_identity": abs(sol.sigma_star - 0.5 * model.rho * sol.r) / (1e-8 * (1 + sol.sigma_star)),
        "psd_shift": -(lam + sol.sigma_star) / (1e-10 * (1 + abs(lam))),
        "kkt": sol.kkt_residual / (1e-8 * (1 + np.linalg.norm(model.g))),
        "decrease": 0.0 if sol.model_decrease >= 0 else math.inf,
    }


def brute_force_min(model: CubicModel, rng, starts: int = 40) -> float:
    """Smallest model value found by multistart BFGS, seeded on a coarse grid."""
    d = model.F.dim
    g, H, rho = model.g, model.F.matrix, model.rho
    scale = 1.0 + (np.linalg.norm(g) + np.abs(model.lambda_min)) / rho
    scale = 3.0 * max(scale, math.sqrt(2 * np.linalg.norm(g) / rho))

    def m(s):
        n = np.linalg.norm(s)
        return g @ s + 0.5 * s @ H @ s + rho / 6 * n**3

    def grad(s):
        return g + H @ s + 0.5 * rho * np.linalg.norm(s) * s

    best = 0.0
    pts = [rng.uniform(-scale, scale, d) for _ in range(starts)]
    axes = np.linspace(-scale, scale, 9)
    grid = np.stack(np.meshgrid(*([axes] * d)), -1).reshape(-1, d) if d <= 3 else []
    seeds = sorted(grid, key=m)[:10] if len(grid) else []
    for s0 in list(pts) + list(seeds):
        res = scipy.optimize.minimize(m, s0, jac=grad, method="BFGS", options={"gtol": 1e-12})
        best = min(best, float(res.fun))
    return best


def solver_campaign(trials: int, seed: int, brute_every: int = 10) -> CampaignResult:
    rng = _rng(seed)
    out = CampaignResult("solver_kkt")
    worst = 0.0
    for k in range(trials):
        model = random_cubic_model(rng)
        inst = {"trial": k, "g": _tolist(model.g), "H": _tolist(model.F.matrix), "rho": model.rho}
        try:
            sol = solve_cubic(model)
        except Exception as exc:  # a crash is a violation, not an abort
            out.tally("invariants", False, {**inst, "error": repr(exc)})
            continue
        ratios = solution_violations(model, sol)
        worst = max(worst, max(ratios.values()))
        out.tally("invariants", all(v <= 1.0 for v in ratios.values()), {**inst, **ratios})
        if brute_every and k % brute_every == 0:
            small = CubicModel(model.g[:3], sym_eig(model.F.matrix[:3, :3]), model.rho)
            sol3 = solve_cubic(small)
            ref = brute_force_min(small, rng)
            val = model_value(small, sol3.s)
            out.tally("global_min_d3", val <= ref + 1e-6,
                      {"trial": k, "g": _tolist(small.g), "H": _tolist(small.F.matrix),
                       "rho": small.rho, "solver": val, "brute_force": ref})
    out.info["worst_ratio"] = worst
    return out


# ---------------------------------------------------------------------------
# one-step lemmas

def lemma_instance(rng, which: str):
    """Random ``(oracle, x, g, H, M)`` with injected gradient and Hessian errors."""
    if which == "sum_of_cubics":
        oracle = SumOfCubicsOracle(5)
        x = rng.standard_normal(5) * 2.0
    else:
        oracle = make_logistic_oracle(gen_synthetic(40, 10, int(rng.integers(2**31))), l2=1e-3)
        x = rng.standard_normal(10)
    d = oracle.dim
    g = oracle.grad(x)
    H = oracle.hess_array(x)
    g = g + rng.standard_normal(d) * 10 ** rng.uniform(-4, 0) * (1 + np.linalg.norm(g))
    mode = rng.integers(3)
    if mode == 0:
        E = rng.standard_normal((d, d))
        E = (E + E.T) / 2
        H = H + E / np.linalg.norm(E, 2) * 10 ** rng.uniform(-3, 0.5)
    elif mode == 1:
        v = rng.standard_normal(d)
        H = H + rng.choice([-1, 1]) * rng.uniform(0, 10) * np.outer(v, v) / (v @ v)
    M = oracle.lipschitz_hessian_bound * 10 ** rng.uniform(0, 2)
    return oracle, x, g, H, M


LEMMA_CHECKS = {
    "one_step": analysis.check_one_step,
    "cubicfunc": analysis.check_lemma_cubicfunc,
    "grad_and_eig": analysis.check_lemma_grad_and_eig,
}


def lemma_campaign(trials: int, seed: int, sum_bound_trials: int | None = None) -> CampaignResult:
    """``trials`` draws per one-step checker on each oracle, plus the sum bound."""
    rng = _rng(seed)
    out = CampaignResult("lemmas")
    for which in ("sum_of_cubics", "logistic"):
        for k in range(trials):
            oracle, x, g, H, M = lemma_instance(rng, which)
            inst = {"oracle": which, "trial": k, "x": _tolist(x), "g": _tolist(g),
                    "H": _tolist(H), "M": M}
            for name, fn in LEMMA_CHECKS.items():
                rep = fn(oracle, x, g, H, M)
                out.tally(f"{name}[{which}]", rep.satisfied,
                          {**inst, "lhs": rep.lhs, "rhs": rep.rhs})
    sb = sum_bound_campaign(trials if sum_bound_trials is None else sum_bound_trials, seed)
    for k in sb.passed:
        out.passed[k], out.failed[k] = sb.passed[k], sb.failed[k]
    out.failures += sb.failures
    out.info.update(sb.info)
    return out


def sum_bound_campaign(trials: int, seed: int) -> CampaignResult:
    """Random sequences (length <= 50, tau <= 10) against the windowed-sum bound.

    Only the ``(tau+1)^3/3`` form counts toward violations; the other
    forms are tallied in ``info``.
    """
    rng = _rng(seed + 1)
    out = CampaignResult("sum_bound")
    other = {"stated": 0, "derived_full": 0, "jensen": 0}
    for k in range(trials):
        m = int(rng.integers(1, 51))
        tau = int(rng.integers(1, 11))
        r = rng.uniform(0, 1, m)
        rep = analysis.check_lemma_sum_bound(r, tau)
        out.tally("sum_bound_derived", rep.satisfied,
                  {"trial": k, "tau": tau, "r": _tolist(r), "lhs": rep.lhs, "rhs": rep.rhs})
        for key in other:
            other[key] += not rep.parts[key].satisfied
    out.info["violations_by_form"] = other
    return out


# ---------------------------------------------------------------------------
# complexity bound on real runs

def theorem1_run(tau: int, n: int = 500, d: int = 50, seed: int = 1, T: int = 200):
    """Fixed-rho split-client run at ``rho = max(L, 20 tau L)`` with its bound report.

    Returns ``(trace, mu_next, params, report)`` where ``mu_next[t]`` is
    ``mu_rho(x_{t+1})``. ``F0`` uses ``f*`` from a long adaptive vanilla run.
    """
    oracle = make_logistic_oracle(gen_synthetic(n, d, seed))
    L = oracle.lipschitz_hessian_bound
    rho = analysis.rho_threshold(L, tau)
    ref = run_vanilla(oracle, RunConfig(adaptive=True, max_iters=300, grad_tol=1e-10,
                                        track_mu=False))
    f_star = min(ref.records[-1].f, min(r.f for r in ref.records))
    cfg = RunConfig(rho=rho, max_iters=T, grad_tol=0.0, eig_tol=0.0, track_mu=False,
                    provider=ProviderSpec(tau=tau))
    trace = run_split_client(oracle, cfg)
    mu_next = np.array([analysis.mu_rho(oracle, x, rho) for x in trace.iterates[1:]])
    F0 = max(oracle.f(trace.iterates[0]) - f_star, 0.0)
    params = analysis.TheoryParams(rho=rho, L=L, tau=tau, F0=F0, T=T, tau0=trace.tau0 or 0,
                                   delta=0.0, delta0=trace.delta0)
    report = analysis.check_theorem1_prefixes(mu_next, params)
    return trace, mu_next, params, report


def loglog_slope(avg, lo: int, hi: int) -> float:
    """Least-squares slope of ``log avg[T-1]`` against ``log T`` for ``T`` in ``[lo, hi]``."""
    Ts = np.arange(lo, hi + 1)
    return float(np.polyfit(np.log(Ts), np.log(np.asarray(avg)[Ts - 1]), 1)[0])


def theorem1_campaign(seed: int, taus=(0, 5, 20), T: int = 200) -> CampaignResult:
    out = CampaignResult("theorem1")
    for tau in taus:
        _, mu, params, rep = theorem1_run(tau, seed=seed, T=T)
        avg = np.cumsum(mu) / np.arange(1, mu.size + 1)
        out.tally(f"bound[tau={tau}]", rep.satisfied,
                  {"tau": tau, "lhs": rep.lhs, "rhs": rep.rhs, "T": rep.context["T"]})
        out.info[f"tau={tau}"] = {"worst_ratio": rep.lhs / rep.rhs,
                                  "slope_final_decade": loglog_slope(avg, T // 10, T)}
    return out
