"""Stationarity measure, complexity bounds and numerical inequality checks.

Every checker returns a :class:`TheoryReport` oriented as ``lhs <= rhs``:
``lhs`` is the quantity being bounded and ``rhs`` the bound, so the
one-step descent inequality ``f(x) - f(x+) >= B`` is reported with
``lhs = B`` and ``rhs = f(x) - f(x+)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .cubic import CubicModel, solve_cubic
from .errors import InvalidParams
from .linalg import min_eig_estimate, sym_eig

REL_TOL = 1e-9
_EPS = np.finfo(float).eps


def mu_rho(oracle, x, rho: float) -> float:
    """``max(||grad f||^{3/2}, max(0, -lambda_min)^3 / rho^{3/2})``."""
    if not rho > 0:
        raise InvalidParams("rho must be positive")
    x = np.asarray(x, dtype=float)
    gnorm = float(np.linalg.norm(oracle.grad(x)))
    lam = sym_eig(oracle.hess(x)).lambda_min
    return max(gnorm**1.5, max(0.0, -lam) ** 3 / rho**1.5)


@dataclass(frozen=True)
class TheoryParams:
    """Constants entering the complexity bound.

    ``F0`` is the initial gap ``f(x0) - inf f``; ``tau0`` the number of
    steps served by ``H0``; ``delta0`` and ``delta`` the spectral errors of
    ``H0`` and of later updates.
    """

    rho: float
    L: float
    tau: float
    F0: float
    T: int
    tau0: float = 0.0
    delta: float = 0.0
    delta0: float = 0.0

    def __post_init__(self):
        if self.T < 1:
            raise InvalidParams("T must be at least 1")
        for name in ("rho", "L", "tau", "F0", "tau0", "delta", "delta0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidParams(f"{name} must be finite and nonnegative, got {v}")
        if not self.rho > 0:
            raise InvalidParams("rho must be positive")

    def replace(self, **kw) -> TheoryParams:
        return TheoryParams(**{**asdict(self), **kw})


@dataclass(frozen=True)
class TheoryReport:
    lhs: float
    rhs: float
    satisfied: bool
    margin: float
    context: dict = field(default_factory=dict)
    parts: dict = field(default_factory=dict)

    @classmethod
    def compare(cls, lhs, rhs, context=None, parts=None, atol=0.0) -> TheoryReport:
        """``satisfied`` iff ``lhs <= rhs + 1e-9 |rhs| + atol``.

        ``atol`` absorbs rounding in quantities formed by cancellation,
        such as differences of function values.
        """
        lhs, rhs = float(lhs), float(rhs)
        ok = lhs <= rhs + REL_TOL * abs(rhs) + atol
        return cls(lhs, rhs, bool(ok), rhs - lhs, dict(context or {}), dict(parts or {}))


# ---------------------------------------------------------------------------
# complexity bound

def rho_threshold(L: float, tau: float) -> float:
    return max(L, 20.0 * tau * L)


def optimal_rho(params: TheoryParams) -> float:
    """The regularization minimizing the fixed-rho bound subject to the threshold."""
    p = params
    if not p.F0 > 0:
        raise InvalidParams("optimal rho needs F0 > 0")
    return max(
        p.L,
        20.0 * p.tau * p.L,
        18.0 * math.sqrt(p.tau0 * p.delta0**3 / p.F0),
        18.0 * math.sqrt(p.delta**3 * p.T / p.F0),
    )


def theorem1_bound(params: TheoryParams, optimized: bool = False) -> float:
    """Upper bound on ``(1/T) sum_{t<T} mu_rho(x_{t+1})``.

    The fixed form is ``1008 [sqrt(rho) F0 / T + 292 tau0 delta0^3 /
    (rho^{3/2} T) + 292 (T - tau0) delta^3 / (rho^{3/2} T)]`` and requires
    ``rho >= max(L, 20 tau L)``. With ``optimized=True`` the closed form
    obtained at :func:`optimal_rho` is returned instead and ``params.rho``
    is ignored. When ``tau0 > T`` only the first ``T`` steps count toward
    the initialization term.
    """
    p = params
    T = float(p.T)
    tau0 = min(p.tau0, T)
    if optimized:
        head = (1.0 + math.sqrt(20.0 * p.tau)) * math.sqrt(p.L) * p.F0
        head += 43.0 * tau0**0.25 * (p.F0 * p.delta0) ** 0.75
        tail = 43.0 * (T - tau0) / T * (p.F0 * p.delta) ** 0.75 / T**0.75
        return 1008.0 * (head / T + tail)
    thr = rho_threshold(p.L, p.tau)
    if p.rho < thr * (1.0 - 1e-12):
        raise InvalidParams(f"rho = {p.rho} is below max(L, 20 tau L) = {thr}")
    r15 = p.rho**1.5
    return 1008.0 * (
        math.sqrt(p.rho) * p.F0 / T
        + 292.0 * tau0 * p.delta0**3 / (r15 * T)
        + 292.0 * (T - tau0) * p.delta**3 / (r15 * T)
    )


def check_theorem1_prefixes(mu_next, params: TheoryParams, t_min: int = 10,
                            optimized: bool = False) -> TheoryReport:
    """Check the running average of ``mu_rho(x_{t+1})`` against the bound for every prefix.

    ``mu_next[t]`` must hold ``mu_rho(x_{t+1})``. The report carries the
    prefix with the smallest relative slack; ``parts["averages"]`` and
    ``parts["bounds"]`` hold the full curves.
    """
    mu = np.asarray(mu_next, dtype=float)
    if mu.size < t_min:
        raise InvalidParams(f"need at least {t_min} values, got {mu.size}")
    avgs = np.cumsum(mu) / np.arange(1, mu.size + 1)
    Ts = np.arange(t_min, mu.size + 1)
    bounds = np.array([theorem1_bound(params.replace(T=int(T)), optimized) for T in Ts])
    sel = avgs[Ts - 1]
    ok = sel <= bounds * (1.0 + REL_TOL)
    worst = int(np.argmax(sel / bounds))
    return TheoryReport(
        float(sel[worst]), float(bounds[worst]), bool(np.all(ok)),
        float(bounds[worst] - sel[worst]),
        {**asdict(params), "T": int(Ts[worst])},
        {"prefixes": Ts, "averages": sel, "bounds": bounds, "violations": int(np.sum(~ok))},
    )


# ---------------------------------------------------------------------------
# one-step inequalities

def _one_step(oracle, x, g_used, H_used, M):
    if M < oracle.lipschitz_hessian_bound:
        raise InvalidParams(f"M = {M} is below the Hessian Lipschitz bound "
                            f"{oracle.lipschitz_hessian_bound}")
    x = np.asarray(x, dtype=float)
    g = np.asarray(g_used, dtype=float)
    H = H_used.entries if hasattr(H_used, "entries") else np.asarray(H_used, dtype=float)
    sol = solve_cubic(CubicModel(g, sym_eig(H), float(M)))
    x_plus = x + sol.s
    f, f_plus = oracle.f(x), oracle.f(x_plus)
    e_g = float(np.linalg.norm(oracle.grad(x) - g))
    e_H = float(np.linalg.norm(oracle.hess_array(x) - H, 2))
    return dict(
        x_plus=x_plus, r=sol.r, decrease=f - f_plus, e_g=e_g, e_H=e_H, M=float(M),
        atol=8.0 * _EPS * (abs(f) + abs(f_plus)),
    )


def _ctx(s):
    return {k: s[k] for k in ("M", "r", "e_g", "e_H")}


def check_one_step(oracle, x, g_used, H_used, M) -> TheoryReport:
    """Descent guaranteed by one inexact cubic step with ``M >= L``.

    ``f(x) - f(x+) >= mu_M(x+) / (1008 sqrt M) + M r^3 / 72
    - 4 ||grad f(x) - g||^{3/2} / sqrt M - 73 ||hess f(x) - H||^3 / M^2``
    """
    s = _one_step(oracle, x, g_used, H_used, M)
    M, r = s["M"], s["r"]
    sq = math.sqrt(M)
    bound = (mu_rho(oracle, s["x_plus"], M) / (1008.0 * sq) + M * r**3 / 72.0
             - 4.0 * s["e_g"] ** 1.5 / sq - 73.0 * s["e_H"] ** 3 / M**2)
    return TheoryReport.compare(bound, s["decrease"], _ctx(s), atol=s["atol"])


def check_lemma_cubicfunc(oracle, x, g_used, H_used, M) -> TheoryReport:
    """``f(x) - f(x+) >= M r^3 / 36 - 3 e_g^{3/2} / sqrt M - 72 e_H^3 / M^2``."""
    s = _one_step(oracle, x, g_used, H_used, M)
    M, r = s["M"], s["r"]
    bound = M * r**3 / 36.0 - 3.0 * s["e_g"] ** 1.5 / math.sqrt(M) - 72.0 * s["e_H"] ** 3 / M**2
    return TheoryReport.compare(bound, s["decrease"], _ctx(s), atol=s["atol"])


def check_lemma_grad_and_eig(oracle, x, g_used, H_used, M) -> TheoryReport:
    """Gradient and curvature at ``x+`` controlled by the step length.

    ``||grad f(x+)||^{3/2} / sqrt M <= 3 M r^3 + 2 e_g^{3/2} / sqrt M + e_H^3 / M^2``
    and ``max(0, -lambda_min(hess f(x+)))^3 / M^2 <= 14 M r^3 + 4 e_H^3 / M^2``.
    The top-level fields describe whichever part has less relative slack.
    """
    s = _one_step(oracle, x, g_used, H_used, M)
    M, r = s["M"], s["r"]
    sq = math.sqrt(M)
    xp = s["x_plus"]
    gp = float(np.linalg.norm(oracle.grad(xp)))
    lam = sym_eig(oracle.hess(xp)).lambda_min
    grad = TheoryReport.compare(
        gp**1.5 / sq, 3.0 * M * r**3 + 2.0 * s["e_g"] ** 1.5 / sq + s["e_H"] ** 3 / M**2, _ctx(s))
    eig = TheoryReport.compare(
        max(0.0, -lam) ** 3 / M**2, 14.0 * M * r**3 + 4.0 * s["e_H"] ** 3 / M**2, _ctx(s))

    def slack(rep):
        return rep.margin / max(abs(rep.rhs), 1e-300)

    worst = min((grad, eig), key=slack)
    return TheoryReport(worst.lhs, worst.rhs, grad.satisfied and eig.satisfied, worst.margin,
                        _ctx(s), {"grad": grad, "eig": eig})


def check_lemma_sum_bound(r, tau: int) -> TheoryReport:
    """Windowed-sum cube bound over a 0-based sequence ``r_0 .. r_{m-1}``.

    ``lhs = sum_{k=1}^{m-1} (sum_{i=k-tau}^{k-1} r_i)^3`` with ``r_i = 0``
    for ``i < 0``. Parts:

    ``stated``   ``tau^3 / 3 * sum_{k=1}^{m-1} r_k^3``
    ``derived``  ``(tau+1)^3 / 3 * sum_{k=1}^{m-1} r_k^3`` (binds ``satisfied``)
    ``derived_full``  as ``derived`` but summing ``r_k^3`` over all ``k``
    ``jensen``   ``tau^3 * sum_k r_k^3``, which always holds: each window
                 cube is at most ``tau^2`` times its sum of cubes and each
                 ``r_i`` lies in at most ``tau`` windows.
    """
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or np.any(r < 0) or not np.all(np.isfinite(r)):
        raise InvalidParams("r must be a finite nonnegative sequence")
    if tau < 1:
        raise InvalidParams("tau must be at least 1")
    csum = np.concatenate(([0.0], np.cumsum(r)))
    k = np.arange(1, r.size)
    windows = csum[k] - csum[np.maximum(k - tau, 0)]
    lhs = float(np.sum(windows**3))
    tail = float(np.sum(r[1:] ** 3))
    full = float(np.sum(r**3))
    ctx = {"tau": int(tau), "m": int(r.size)}
    parts = {
        "stated": TheoryReport.compare(lhs, tau**3 / 3.0 * tail, ctx),
        "derived": TheoryReport.compare(lhs, (tau + 1) ** 3 / 3.0 * tail, ctx),
        "derived_full": TheoryReport.compare(lhs, (tau + 1) ** 3 / 3.0 * full, ctx),
        "jensen": TheoryReport.compare(lhs, float(tau) ** 3 * full, ctx),
    }
    main = parts["derived"]
    return TheoryReport(main.lhs, main.rhs, main.satisfied, main.margin, ctx, parts)


# ---------------------------------------------------------------------------
# wall-clock models

@dataclass(frozen=True)
class WallclockModels:
    t_async: float
    t_vanilla: float
    t_lazy: float
    speedup_vanilla: float
    speedup_lazy: float
    lazy_ratio_bound: float


def wallclock_models(T: int, tau: float, p: int) -> WallclockModels:
    """Charged time of ``T`` steps under the three execution models.

    ``speedup_*`` are the ratios to the asynchronous time and
    ``lazy_ratio_bound = 2 sqrt(tau) / (1 + sqrt(tau))`` is the lower
    bound on the lazy/async time-to-accuracy ratio (valid for ``tau >= p``,
    no inexactness).

    >>> wallclock_models(100, 9, 3)[:3]
    (100.0, 1000.0, 400.0)
    """
    if T < 1:
        raise InvalidParams("T must be at least 1")
    if tau < 0 or p < 1:
        raise InvalidParams("need tau >= 0 and p >= 1")
    ta = float(T)
    tv = T * (tau + 1.0)
    tl = T + T / p * tau
    rt = math.sqrt(tau)
    return WallclockModels(ta, tv, tl, tv / ta, tl / ta, 2.0 * rt / (1.0 + rt))


def charged_time(driver: str, T: int, tau: int, p: int = 1) -> int:
    """Integer charged time of a simulated run with ``T`` trace rows."""
    if driver == "async":
        return T
    if driver == "vanilla":
        return T * (tau + 1)
    if driver == "lazy":
        return T + -(-T // p) * tau
    raise InvalidParams(f"unknown driver {driver!r}")


# ---------------------------------------------------------------------------
# certificates

@dataclass(frozen=True)
class StationarityCertificate:
    grad_norm: float
    lambda_min_estimate: float
    grad_ok: bool
    eig_ok: bool

    @property
    def ok(self) -> bool:
        return self.grad_ok and self.eig_ok


def stationarity_certificate(oracle, x, grad_tol: float, eig_tol: float,
                             lanczos_iters: int | None = None, seed: int = 0
                             ) -> StationarityCertificate:
    """Recheck ``||grad f|| <= grad_tol`` and ``lambda_min >= -eig_tol`` from scratch.

    The eigenvalue is estimated by Lanczos on Hessian-vector products, so
    the certificate does not reuse anything computed by the optimizer.
    Lanczos overestimates ``lambda_min``; the default runs ``dim`` steps,
    which is exact up to rounding.
    """
    x = np.asarray(x, dtype=float)
    gnorm = float(np.linalg.norm(oracle.grad(x)))
    iters = oracle.dim if lanczos_iters is None else lanczos_iters
    lam = min_eig_estimate(lambda v: oracle.hvp(x, v), oracle.dim, iters, seed)
    return StationarityCertificate(gnorm, lam, gnorm <= grad_tol, lam >= -eig_tol)
