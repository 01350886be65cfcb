import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from splitcubic import (
    CubicModel,
    CubicSolution,
    InitStrategy,
    InvalidParams,
    ProviderSpec,
    RunConfig,
    adaptive_rho_step,
    analysis,
    gen_synthetic,
    make_logistic_oracle,
    make_test_oracle,
    run_lazy,
    run_split_client,
    run_vanilla,
    solve_cubic,
    stationarity_certificate,
    sym_eig,
)
from splitcubic.optimizer import CSV_HEADER, AdaptiveState


def logistic(n=200, d=20, seed=1):
    return make_logistic_oracle(gen_synthetic(n, d, seed))


def proposal(decrease):
    return CubicSolution(np.zeros(1), 0.0, 0.0, decrease, 0.0, 0)


# ---------------------------------------------------------------------------
# adaptive rule

def test_adaptive_perfect_model_shrinks_rho():
    accept, rho, r = adaptive_rho_step(AdaptiveState(4.0, 10.0), proposal(1.0), 9.0)
    assert (accept, rho, r) == (True, 2.0, 1.0)


def test_adaptive_increase_rejects_and_grows():
    accept, rho, r = adaptive_rho_step(AdaptiveState(4.0, 10.0), proposal(1.0), 10.5)
    assert not accept and rho == 8.0 and r < 0


def test_adaptive_boundary_is_inclusive():
    accept, rho, r = adaptive_rho_step(AdaptiveState(4.0, 10.0, eta=0.25), proposal(1.0), 9.75)
    assert r == 0.25 and accept and rho == 4.0


def test_adaptive_no_predicted_decrease():
    accept, rho, r = adaptive_rho_step(AdaptiveState(4.0, 10.0), proposal(0.0), 9.0)
    assert not accept and rho == 8.0 and math.isnan(r)


def test_adaptive_rho_floor():
    _, rho, _ = adaptive_rho_step(AdaptiveState(1e-8, 10.0, rho_min=1e-8), proposal(1.0), 9.0)
    assert rho == 1e-8


def test_adaptive_overflowing_trial_rejected():
    accept, rho, _ = adaptive_rho_step(AdaptiveState(1.0, 1.0), proposal(0.5), math.inf)
    assert not accept and rho == 2.0


def test_adaptive_noise_floor_keeps_rho():
    accept, rho, _ = adaptive_rho_step(AdaptiveState(3.0, 1.0), proposal(1e-16), 1.0 + 1e-15)
    assert not accept and rho == 3.0
    accept, rho, _ = adaptive_rho_step(AdaptiveState(3.0, 1.0), proposal(1e-16), 1.0)
    assert accept and rho == 3.0


@given(st.floats(1e-3, 1e3), st.floats(-10, 10), st.floats(1e-3, 10), st.floats(-20, 20))
def test_adaptive_rule_property(rho, f, pred, f_new):
    accept, rho_next, r = adaptive_rho_step(AdaptiveState(rho, f), proposal(pred), f_new)
    assert rho_next >= 1e-8
    if accept:
        assert f_new <= f
    if r >= 0.75:
        assert rho_next == pytest.approx(rho * 0.5)
    elif r < 0.1:
        assert rho_next == pytest.approx(rho * 2.0)


# ---------------------------------------------------------------------------
# drivers

def test_tau0_equals_vanilla():
    o = logistic()
    cfg = RunConfig(rho=o.lipschitz_hessian_bound, max_iters=50, grad_tol=0.0, eig_tol=0.0)
    a = run_split_client(o, cfg)
    b = run_vanilla(o, cfg)
    assert len(a.iterates) == len(b.iterates) == 51
    assert max(np.max(np.abs(x - y)) for x, y in zip(a.iterates, b.iterates)) <= 1e-12
    assert a.charged_time == b.charged_time == 50


def test_quadratic_monotone_to_minimum():
    q = make_test_oracle("quadratic", A=np.eye(3), b=np.array([1.0, -2.0, 0.5]))
    tr = run_split_client(q, RunConfig(rho=100.0, max_iters=200, grad_tol=1e-10))
    f = tr.column("f")
    assert np.all(np.diff(f) <= 0)
    assert tr.status == "converged"
    np.testing.assert_allclose(tr.x_final, [-1.0, 2.0, -0.5], atol=1e-8)
    assert f[-1] == pytest.approx(-0.5 * (1 + 4 + 0.25), abs=1e-8)


def test_async_tau20_below_complexity_bound():
    o = logistic(500, 50, 1)
    L = o.lipschitz_hessian_bound
    tau, T = 20, 200
    rho = analysis.rho_threshold(L, tau)
    tr = run_split_client(o, RunConfig(rho=rho, max_iters=T, grad_tol=0.0, eig_tol=0.0,
                                       track_mu=False, provider=ProviderSpec(tau=tau)))
    mu = [analysis.mu_rho(o, x, rho) for x in tr.iterates[1:]]
    f_star = min(r.f for r in run_vanilla(o, RunConfig(adaptive=True, max_iters=100,
                                                       grad_tol=1e-12, track_mu=False)).records)
    params = analysis.TheoryParams(rho=rho, L=L, tau=tau, F0=o.f(tr.iterates[0]) - f_star,
                                   T=T, tau0=tr.tau0, delta0=tr.delta0)
    rep = analysis.check_theorem1_prefixes(mu, params)
    assert rep.satisfied
    assert rep.lhs < 0.1 * rep.rhs


def test_vanilla_charged_time():
    tr = run_vanilla(logistic(), RunConfig(max_iters=100, grad_tol=0.0,
                                            provider=ProviderSpec(tau=9)))
    assert tr.n_iters == 100 and tr.charged_time == 1000


def test_rosenbrock_adaptive_converges():
    r = make_test_oracle("rosenbrock", d=2)
    tr = run_vanilla(r, RunConfig(rho=1.0, adaptive=True, max_iters=500, grad_tol=1e-6,
                                  x0=(-1.2, 1.0)))
    assert tr.status == "converged"
    assert np.linalg.norm(r.grad(tr.x_final)) <= 1e-6
    np.testing.assert_allclose(tr.x_final, [1.0, 1.0], atol=1e-5)


def test_stationary_start_terminates_immediately():
    q = make_test_oracle("quadratic", A=np.diag([1.0, 2.0]))
    tr = run_vanilla(q, RunConfig())
    assert tr.status == "converged" and tr.n_iters == 1 and tr.records[0].t == 0


def test_lazy_p1_equals_vanilla():
    o = logistic()
    cfg = RunConfig(rho=5.0, adaptive=True, max_iters=40, provider=ProviderSpec(tau=3))
    a, b = run_lazy(o, cfg, 1), run_vanilla(o, cfg)
    assert a.column("f").tolist() == b.column("f").tolist()
    assert a.charged_time == b.charged_time


def test_lazy_charged_time():
    tr = run_lazy(logistic(), RunConfig(max_iters=99, grad_tol=0.0, provider=ProviderSpec(tau=9)), 3)
    assert tr.charged_time == 99 + 33 * 9 == 396


def test_lazy_large_period_is_frozen_hessian():
    o = logistic(100, 5, 3)
    cfg = RunConfig(rho=2.0, max_iters=15, grad_tol=0.0, eig_tol=0.0)
    tr = run_lazy(o, cfg, p=1000)
    F = sym_eig(o.hess(np.zeros(5)))
    x, warm = np.zeros(5), None
    for k in range(15):
        sol = solve_cubic(CubicModel(o.grad(x), F, 2.0), warm)
        x, warm = x + sol.s, sol.sigma_star
        np.testing.assert_allclose(tr.iterates[k + 1], x, rtol=0, atol=1e-13)


@pytest.mark.parametrize("tau", [0, 4])
def test_monotone_descent_exact_fixed_rho(tau):
    o = logistic(150, 8, 5)
    tr = run_vanilla(o, RunConfig(rho=o.lipschitz_hessian_bound, max_iters=40, grad_tol=0.0,
                                  provider=ProviderSpec(tau=tau)))
    f = tr.column("f")
    assert np.all(np.diff(f) <= 1e-15 * np.abs(f[1:]))


def test_adaptive_safety():
    o = make_test_oracle("rosenbrock", d=3)
    tr = run_split_client(o, RunConfig(rho=1e-3, adaptive=True, max_iters=200,
                                       x0=(-1.0, 1.5, 0.5), provider=ProviderSpec(tau=3)))
    rejected = 0
    for k, rec in enumerate(tr.records[:-1]):
        nxt = tr.records[k + 1]
        if rec.accepted:
            assert nxt.f < rec.f
        else:
            rejected += 1
            np.testing.assert_array_equal(tr.points[k + 1], tr.points[k])
            assert nxt.f == rec.f
    assert rejected > 0  # the tiny initial rho forces some rejections


@pytest.mark.parametrize("driver", ["async", "vanilla", "lazy"])
def test_charged_time_formulas(driver):
    o = logistic(80, 6, 2)
    for T, tau, p in [(1, 0, 1), (7, 3, 2), (20, 5, 6), (33, 1, 33)]:
        cfg = RunConfig(max_iters=T, grad_tol=0.0, provider=ProviderSpec(tau=tau))
        tr = {"async": lambda: run_split_client(o, cfg), "vanilla": lambda: run_vanilla(o, cfg),
              "lazy": lambda: run_lazy(o, cfg, p)}[driver]()
        assert tr.charged_time == analysis.charged_time(driver, T, tau, p)
        assert np.all(np.diff(tr.column("charged_time")) > 0)


def test_converged_run_certificate():
    o = logistic(100, 10, 7)
    tr = run_split_client(o, RunConfig(rho=1.0, adaptive=True, max_iters=300, grad_tol=1e-9,
                                       provider=ProviderSpec(tau=4)))
    assert tr.status == "converged"
    cert = stationarity_certificate(o, tr.x_final, 1e-9, 1e-6)
    assert cert.ok and cert.grad_norm == pytest.approx(tr.records[-1].grad_norm, rel=1e-12)


def test_nonfinite_aborts_with_trace():
    class Blowup:
        dim = 2
        lipschitz_hessian_bound = 0.0
        _calls = 0

        def f(self, x):
            return float(x @ x)

        def grad(self, x):
            self._calls += 1
            return 2 * x + 1 if self._calls < 4 else np.array([np.nan, 0.0])

        def hess(self, x):
            from splitcubic import SymMatrix
            return SymMatrix(2 * np.eye(2))

        def hess_array(self, x):
            return 2 * np.eye(2)

    tr = run_vanilla(Blowup(), RunConfig(max_iters=20, track_mu=False))
    assert tr.status == "nonfinite"
    assert tr.n_iters == 3


def test_max_step_norm_caps_steps():
    o = make_test_oracle("quadratic", A=np.eye(2), b=np.array([30.0, 40.0]))
    tr = run_vanilla(o, RunConfig(rho=1e-3, max_iters=5, grad_tol=0.0, max_step_norm=0.5))
    assert np.nanmax(tr.column("step_norm")) <= 0.5 + 1e-12


def test_stall_sends_refresh_hint():
    from splitcubic.curvature import SimulatedProvider
    from splitcubic.optimizer import _drive

    class Spy(SimulatedProvider):
        hints = 0

        def request_refresh(self):
            self.hints += 1

    o = logistic(60, 4, 1)
    prov = Spy(o, 50)
    # an enormous rho makes every step underflow while the curvature is stale
    tr = _drive(o, RunConfig(rho=1e40, max_iters=6, grad_tol=0.0, eig_tol=0.0), prov,
                "async", "simulated")
    assert np.all(tr.column("step_norm") < 1e-14)
    assert prov.hints == 6


def test_init_strategy_recorded():
    o = logistic(60, 4, 1)
    tr = run_split_client(o, RunConfig(max_iters=5, init=InitStrategy.scaled_identity(1.0),
                                       provider=ProviderSpec(tau=3)))
    H = o.hess_array(np.zeros(4))
    assert tr.delta0 == pytest.approx(np.linalg.norm(np.eye(4) - H, 2))
    assert tr.tau0 == 3


def test_csv_schema_and_reproducibility():
    o = logistic(60, 4, 1)
    cfg = RunConfig(rho=1.0, adaptive=True, max_iters=25, provider=ProviderSpec(tau=2, tau_min=1))
    a, b = run_split_client(o, cfg), run_split_client(o, cfg)
    text = a.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == a.n_iters + 1
    strip = lambda t: [r[:11] for r in csv.reader(io.StringIO(t))]  # drop wall-clock columns
    assert strip(text) == strip(b.to_csv())


@pytest.mark.parametrize("kw", [
    dict(rho=0.0), dict(eta=1.0), dict(inc=1.0), dict(dec=1.0), dict(rho_min=0.0),
    dict(max_iters=-1), dict(grad_tol=-1.0), dict(max_step_norm=0.0), dict(curvature_ridge=-1.0),
])
def test_run_config_validation(kw):
    with pytest.raises(InvalidParams):
        RunConfig(**kw)


def test_provider_spec_validation():
    with pytest.raises(InvalidParams):
        ProviderSpec(kind="gpu")
    with pytest.raises(InvalidParams):
        ProviderSpec(tau=2, tau_min=3)


def test_start_point_length_checked():
    with pytest.raises(InvalidParams):
        run_vanilla(logistic(60, 4, 1), RunConfig(x0=(1.0, 2.0)))
