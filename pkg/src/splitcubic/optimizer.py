"""Cubic-regularized Newton drivers.

``run_split_client`` is the asynchronous method: a fresh gradient every
step and whatever curvature the provider has delivered so far.
``run_vanilla`` recomputes the Hessian synchronously every step and
``run_lazy`` every ``p`` steps. All three share one loop; they differ only
in the provider they drive and hence in the time they are charged.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import mu_rho
from .cubic import CubicModel, CubicSolution, model_value, solve_cubic
from .curvature import (
    CurvatureProvider,
    DelaySchedule,
    InitStrategy,
    LazyProvider,
    SimulatedProvider,
    ThreadedProvider,
    init_h0,
    initial_update,
)
from .errors import InvalidParams
from .problems import ObjectiveOracle

CSV_HEADER = (
    "t", "f", "grad_norm", "mu_rho", "rho", "tau_obs", "accepted", "r_ratio",
    "step_norm", "sigma", "charged_time", "wall_grad_ns", "wall_hess_ns",
    "wall_decomp_ns", "wall_step_ns",
)
STALL_STEP = 1e-14
# predicted decreases below this fraction of |f| are lost in rounding
NOISE_FLOOR = 1e-13


@dataclass(frozen=True)
class ProviderSpec:
    """Which curvature client to run and how.

    ``tau`` is the curvature cost in step units: the simulated delay for
    ``simulated`` (or its upper end when ``tau_min`` is set, giving
    seeded uniform delays in ``[tau_min, tau]``) and the blocking cost
    charged by vanilla and lazy.
    """

    kind: str = "simulated"
    tau: int = 0
    tau_min: int | None = None
    curvature: str = "exact"
    memory: int = 10
    worker_sleep: float = 0.0

    def __post_init__(self):
        if self.kind not in ("simulated", "threaded"):
            raise InvalidParams(f"unknown provider kind {self.kind!r}")
        if self.tau < 0 or (self.tau_min is not None and not 0 <= self.tau_min <= self.tau):
            raise InvalidParams("need 0 <= tau_min <= tau")


@dataclass(frozen=True)
class RunConfig:
    rho: float = 1.0
    adaptive: bool = False
    eta: float = 0.1
    inc: float = 2.0
    dec: float = 0.5
    rho_min: float = 1e-8
    max_iters: int = 100
    grad_tol: float = 1e-8
    eig_tol: float = 1e-6
    provider: ProviderSpec = field(default_factory=ProviderSpec)
    init: InitStrategy = field(default_factory=InitStrategy.zero)
    seed: int = 0
    max_step_norm: float | None = None
    curvature_ridge: float = 0.0
    track_mu: bool = True
    x0: tuple | None = None

    def __post_init__(self):
        if not self.rho > 0:
            raise InvalidParams("rho must be positive")
        if not 0 < self.eta < 1:
            raise InvalidParams("eta must lie in (0, 1)")
        if not self.inc > 1:
            raise InvalidParams("inc must exceed 1")
        if not 0 < self.dec < 1:
            raise InvalidParams("dec must lie in (0, 1)")
        if not self.rho_min > 0:
            raise InvalidParams("rho_min must be positive")
        if self.max_iters < 0:
            raise InvalidParams("max_iters must be nonnegative")
        if self.grad_tol < 0 or self.eig_tol < 0:
            raise InvalidParams("tolerances must be nonnegative")
        if self.max_step_norm is not None and not self.max_step_norm > 0:
            raise InvalidParams("max_step_norm must be positive")
        if self.curvature_ridge < 0:
            raise InvalidParams("curvature_ridge must be nonnegative")

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)

    def start_point(self, dim: int) -> np.ndarray:
        if self.x0 is None:
            return np.zeros(dim)
        x0 = np.array(self.x0, dtype=float)
        if x0.shape != (dim,):
            raise InvalidParams(f"x0 has length {x0.size}, problem dim is {dim}")
        return x0


@dataclass(frozen=True)
class IterRecord:
    t: int
    f: float
    grad_norm: float
    mu_rho: float
    rho: float
    tau_obs: int
    accepted: bool
    r_ratio: float
    step_norm: float
    sigma: float
    charged_time: int
    wall_grad_ns: int
    wall_hess_ns: int
    wall_decomp_ns: int
    wall_step_ns: int
    scalar_iters: int = 0

    def csv_row(self) -> list[str]:
        out = []
        for name in CSV_HEADER:
            v = getattr(self, name)
            if isinstance(v, bool):
                out.append("1" if v else "0")
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out


@dataclass
class RunTrace:
    """Everything a run produced.

    ``records[t]`` describes iterate ``x_t`` and the step taken from it;
    the last record of a converged run has no step (``step_norm`` is NaN).
    ``iterates`` holds ``x_0 .. x_final`` with rejected steps omitted, so
    ``iterates[t]`` is ``x_t`` only for runs without rejections.
    """

    method: str
    mode: str
    status: str = "running"
    message: str = ""
    records: list[IterRecord] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)
    points: list[np.ndarray] = field(default_factory=list)
    consumed: list[tuple[int, int, int, str]] = field(default_factory=list)
    wall_elapsed_ns: list[int] = field(default_factory=list)
    tau0: int | None = None
    delta0: float = float("nan")
    lipschitz: float = float("nan")
    secant_residuals: list[float] = field(default_factory=list)
    shutdown_ns: int | None = None

    @property
    def x_final(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def n_iters(self) -> int:
        return len(self.records)

    @property
    def charged_time(self) -> int:
        return self.records[-1].charged_time if self.records else 0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def consumed_delays(self) -> list[int]:
        return [ready - src for src, ready, _, _ in self.consumed if src >= 0]

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for rec in self.records:
            w.writerow(rec.csv_row())
        text = buf.getvalue()
        if target is None:
            return text
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", newline="") as fh:
                fh.write(text)
        return text


@dataclass(frozen=True)
class AdaptiveState:
    rho: float
    f: float
    eta: float = 0.1
    inc: float = 2.0
    dec: float = 0.5
    rho_min: float = 1e-8
    very_successful: float = 0.75


def adaptive_rho_step(state: AdaptiveState, proposed: CubicSolution, f_new: float):
    """Acceptance test on the ratio of actual to predicted decrease.

    Returns ``(accept, rho_next, r)``. A proposal with no predicted
    decrease is rejected outright and ``rho`` grows. When the predicted
    decrease is below the rounding level of ``f`` the ratio carries no
    information; ``rho`` is then left alone and the step is accepted iff
    ``f`` does not increase.
    """
    pred = proposed.model_decrease
    if not pred > 0:
        return False, max(state.rho * state.inc, state.rho_min), float("nan")
    r = (state.f - f_new) / pred
    if pred <= NOISE_FLOOR * max(1.0, abs(state.f)) and math.isfinite(f_new):
        # the ratio is rounding noise: keep rho, accept only non-increase
        return f_new <= state.f, state.rho, float(r)
    if not math.isfinite(r):
        # f_new overflowed: treat as a failed step
        r = -math.inf
    if r >= state.very_successful:
        rho_next = state.rho * state.dec
    elif r < state.eta:
        rho_next = state.rho * state.inc
    else:
        rho_next = state.rho
    return r >= state.eta, max(rho_next, state.rho_min), float(r)


def _cap(model: CubicModel, sol: CubicSolution, cap: float | None) -> CubicSolution:
    if cap is None or sol.r <= cap:
        return sol
    s = sol.s * (cap / sol.r)
    return dataclasses.replace(sol, s=s, r=float(np.linalg.norm(s)),
                               model_decrease=max(0.0, -model_value(model, s)))


def _drive(oracle: ObjectiveOracle, config: RunConfig, provider: CurvatureProvider,
           method: str, mode: str) -> RunTrace:
    now = time.perf_counter_ns
    x = config.start_point(oracle.dim)
    H0, delta0 = init_h0(config.init, oracle, x)
    current = initial_update(H0, config.curvature_ridge, delta0=delta0)
    trace = RunTrace(method, mode, delta0=delta0, lipschitz=oracle.lipschitz_hessian_bound)
    trace.iterates.append(x.copy())
    trace.points.append(x.copy())
    rho = config.rho
    warm = None
    charged = 0
    start = now()
    f = oracle.f(x)
    g = None
    try:
        for t in range(config.max_iters + 1):
            t0 = now()
            if g is None:
                g = oracle.grad(x)
            wall_grad = now() - t0
            if not (math.isfinite(f) and np.all(np.isfinite(g))):
                trace.status = "nonfinite"
                trace.message = f"non-finite objective or gradient at t={t}"
                break
            upd = provider.poll(t, x, g)
            wall_hess = wall_decomp = 0
            if upd is not None:
                current = upd
                trace.consumed.append((upd.source_iter, upd.ready_iter, t, upd.tag))
                if trace.tau0 is None:
                    trace.tau0 = t
                if mode != "threaded":
                    wall_hess, wall_decomp = upd.wall_hess_ns, upd.wall_decomp_ns
            gnorm = float(np.linalg.norm(g))
            mu = mu_rho(oracle, x, rho) if config.track_mu else float("nan")
            tau_obs = t - max(current.source_iter, 0)
            lam_hat = current.factorization.lambda_min
            done = gnorm <= config.grad_tol and lam_hat >= -config.eig_tol
            if t == config.max_iters and not done:
                trace.status = "max_iters"
                break
            charged += provider.charge(t)
            if done:
                trace.records.append(IterRecord(
                    t, f, gnorm, mu, rho, tau_obs, False, float("nan"), float("nan"),
                    float("nan"), charged, wall_grad, wall_hess, wall_decomp, 0,
                ))
                trace.wall_elapsed_ns.append(now() - start)
                trace.status = "converged"
                break

            t1 = now()
            model = CubicModel(g, current.factorization, rho)
            sol = _cap(model, solve_cubic(model, warm), config.max_step_norm)
            wall_step = now() - t1
            x_new = x + sol.s
            f_new = oracle.f(x_new) if np.all(np.isfinite(x_new)) else math.nan
            pred = sol.model_decrease
            if config.adaptive:
                state = AdaptiveState(rho, f, config.eta, config.inc, config.dec, config.rho_min)
                accept, rho_next, ratio = adaptive_rho_step(state, sol, f_new)
            else:
                accept, rho_next = True, rho
                ratio = (f - f_new) / pred if pred > 0 else float("nan")
            if sol.r < STALL_STEP and gnorm > config.grad_tol and current.source_iter < t:
                provider.request_refresh()
            trace.records.append(IterRecord(
                t, f, gnorm, mu, rho, tau_obs, bool(accept), float(ratio), sol.r,
                sol.sigma_star, charged, wall_grad, wall_hess, wall_decomp, wall_step,
                sol.iterations_used,
            ))
            trace.wall_elapsed_ns.append(now() - start)
            if accept:
                if not (math.isfinite(f_new) and np.all(np.isfinite(x_new))):
                    trace.status = "nonfinite"
                    trace.message = f"non-finite iterate after step t={t}"
                    break
                x, f, g = x_new, f_new, None
                trace.iterates.append(x.copy())
            trace.points.append(x.copy())
            warm = sol.sigma_star
            rho = rho_next
    except Exception as exc:
        trace.status = "error"
        trace.message = f"{type(exc).__name__}: {exc}"
        exc.trace = trace
        raise
    finally:
        provider.close()
        trace.secant_residuals = list(provider.secant_log)
        trace.shutdown_ns = getattr(provider, "shutdown_ns", None)
    return trace


def _provider_args(config: RunConfig):
    spec = config.provider
    return dict(curvature=spec.curvature, memory=spec.memory, ridge=config.curvature_ridge)


def make_provider(oracle: ObjectiveOracle, config: RunConfig) -> CurvatureProvider:
    spec = config.provider
    if spec.kind == "threaded":
        return ThreadedProvider(oracle, worker_sleep=spec.worker_sleep, **_provider_args(config))
    if spec.tau_min is None:
        schedule = DelaySchedule.fixed(spec.tau)
    else:
        schedule = DelaySchedule.uniform(spec.tau_min, spec.tau, config.seed)
    return SimulatedProvider(oracle, schedule, **_provider_args(config))


def run_split_client(oracle: ObjectiveOracle, config: RunConfig) -> RunTrace:
    """Asynchronous split-client cubic regularization.

    Each step charges one time unit: curvature work overlaps with the
    gradient steps.

    Examples
    --------
    >>> from splitcubic.problems import QuadraticOracle
    >>> import numpy as np
    >>> orc = QuadraticOracle(np.eye(2), np.array([1.0, -2.0]))
    >>> tr = run_split_client(orc, RunConfig(rho=1.0, max_iters=50))
    >>> tr.status, np.allclose(tr.x_final, [-1.0, 2.0])
    ('converged', True)
    """
    provider = make_provider(oracle, config)
    return _drive(oracle, config, provider, "async", config.provider.kind)


def run_lazy(oracle: ObjectiveOracle, config: RunConfig, p: int) -> RunTrace:
    """Lazy Hessian: synchronous refresh every ``p`` steps, ``tau`` units each."""
    provider = LazyProvider(oracle, p, config.provider.tau, **_provider_args(config))
    return _drive(oracle, config, provider, f"lazy(p={p})" if p > 1 else "vanilla", "simulated")


def run_vanilla(oracle: ObjectiveOracle, config: RunConfig) -> RunTrace:
    """Cubic Newton with a fresh Hessian every step; charges ``tau + 1`` per step."""
    return run_lazy(oracle, config, 1)


__all__ = [
    "CSV_HEADER", "ProviderSpec", "RunConfig", "IterRecord", "RunTrace", "AdaptiveState",
    "adaptive_rho_step", "make_provider", "run_split_client", "run_lazy", "run_vanilla",
]
