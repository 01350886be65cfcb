"""Benchmark harness: experiment configs, method comparison runs, profiling.

Config grammar (INI, parsed by :mod:`configparser`)::

    [experiment]
    problem = synthetic        # synthetic | libsvm | test
    n = 500                    # synthetic
    d = 50                     # synthetic, or test problem dimension
    seed = 1
    path = data/a1a            # libsvm
    kind = rosenbrock          # test: rosenbrock | sum_of_cubics
    l2 = 1e-3
    output_dir = results
    repetitions = 1
    max_iters = 500
    grad_tol = 1e-8
    eig_tol = 1e-6
    threshold_rtol = 1e-6      # threshold = f* + rtol (1 + |f*|)
    fstar_iters = 300

    [method:async]             # one section per method; the name is free
    driver = async             # async | vanilla | lazy
    provider = simulated       # simulated | threaded (async only)
    tau = 50
    rho = 0.1L, 1L, 10L        # numbers, optionally suffixed L (times the oracle's L)
    adaptive = true, false
    p = 1, 7, 50               # lazy only
    curvature = exact          # exact | lbfgs
    init = zero                # zero | identity:MU | lbfgs:K | diagonal | recycled:PATH

Any method key may hold a comma-separated list; the method is run over the
Cartesian product of its lists (the tuning grid). The summary reports
every grid point and marks the best time-to-threshold per method.
"""

from __future__ import annotations

import configparser
import csv
import itertools
import math
import os
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cubic import CubicModel, solve_cubic
from .curvature import InitStrategy
from .errors import InvalidParams
from .linalg import sym_eig
from .optimizer import ProviderSpec, RunConfig, RunTrace, run_lazy, run_split_client, run_vanilla
from .problems import gen_synthetic, load_libsvm, make_logistic_oracle, make_test_oracle

OUTPUT_ENV = "SCC_OUTPUT_DIR"
DEFAULT_RHO_GRID = ("0.1L", "1L", "10L", "100L")
SUMMARY_HEADER = (
    "method", "grid_point", "repetition", "driver", "mode", "rho", "adaptive", "p", "tau",
    "status", "iters", "final_f", "time_to_threshold", "time_unit", "best", "trace_csv",
)
PROFILE_HEADER = ("d", "t_grad_ns", "t_hess_ns", "t_decomp_ns", "t_step_ns")


class ConfigError(Exception):
    """Experiment config is malformed or refers to missing files."""


@dataclass
class MethodSpec:
    name: str
    driver: str
    grid: dict

    def points(self):
        keys = sorted(self.grid)
        for combo in itertools.product(*(self.grid[k] for k in keys)):
            yield dict(zip(keys, combo))


@dataclass
class ExperimentConfig:
    problem: dict
    methods: list[MethodSpec]
    output_dir: Path
    repetitions: int = 1
    run: dict = field(default_factory=dict)


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not cp.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    ex = cp["experiment"]
    try:
        problem = {
            "problem": ex.get("problem", "synthetic"),
            "n": ex.getint("n", 500),
            "d": ex.getint("d", 50),
            "seed": ex.getint("seed", 1),
            "path": ex.get("path"),
            "kind": ex.get("kind", "rosenbrock"),
            "l2": ex.getfloat("l2", 1e-3),
        }
        run = {
            "max_iters": ex.getint("max_iters", 500),
            "grad_tol": ex.getfloat("grad_tol", 1e-8),
            "eig_tol": ex.getfloat("eig_tol", 1e-6),
            "threshold_rtol": ex.getfloat("threshold_rtol", 1e-6),
            "fstar_iters": ex.getint("fstar_iters", 300),
        }
        reps = ex.getint("repetitions", 1)
    except ValueError as exc:
        raise ConfigError(f"bad value in [experiment]: {exc}") from None
    if problem["problem"] not in ("synthetic", "libsvm", "test"):
        raise ConfigError(f"unknown problem {problem['problem']!r}")
    if problem["problem"] == "libsvm":
        p = problem["path"]
        if not p:
            raise ConfigError("libsvm problem needs a path")
        full = Path(p) if Path(p).is_absolute() else path.parent / p
        if not full.is_file():
            raise ConfigError(f"dataset not found: {full}")
        problem["path"] = str(full)
    if reps < 1:
        raise ConfigError("repetitions must be at least 1")
    out = os.environ.get(OUTPUT_ENV) or ex.get("output_dir", "results")
    out_dir = Path(out) if Path(out).is_absolute() or os.environ.get(OUTPUT_ENV) else path.parent / out

    methods = []
    for sec in cp.sections():
        if not sec.startswith("method:"):
            continue
        name = sec.split(":", 1)[1].strip()
        body = dict(cp[sec])
        driver = body.pop("driver", name)
        if driver not in ("async", "vanilla", "lazy"):
            raise ConfigError(f"[{sec}] unknown driver {driver!r}")
        grid = {k: _split(v) for k, v in body.items()}
        grid.setdefault("rho", list(DEFAULT_RHO_GRID))
        if driver == "lazy" and "p" not in grid:
            tau = int(grid.get("tau", ["0"])[0])
            grid["p"] = sorted({1, max(1, round(math.sqrt(tau))), max(1, tau)})
            grid["p"] = [str(v) for v in grid["p"]]
        methods.append(MethodSpec(name, driver, grid))
    if not methods:
        raise ConfigError("config defines no [method:...] sections")
    cfg = ExperimentConfig(problem, methods, out_dir, reps, run)
    for m in methods:
        for pt in m.points():
            _run_config(pt, cfg, 1.0, 0)  # validate every grid point up front
    return cfg


def build_oracle(problem: dict):
    kind = problem["problem"]
    if kind == "synthetic":
        data = gen_synthetic(problem["n"], problem["d"], problem["seed"])
        return make_logistic_oracle(data, problem["l2"])
    if kind == "libsvm":
        return make_logistic_oracle(load_libsvm(problem["path"]), problem["l2"])
    return make_test_oracle(problem["kind"], d=problem["d"])


def _rho(text: str, L: float) -> float:
    t = text.strip()
    if t.endswith("L"):
        return float(t[:-1] or 1.0) * L
    return float(t)


def _run_config(pt: dict, cfg: ExperimentConfig, L: float, rep: int) -> tuple[RunConfig, int]:
    known = {"provider", "tau", "tau_min", "rho", "adaptive", "p", "curvature", "memory",
             "init", "worker_sleep", "max_step_norm", "curvature_ridge", "eta", "inc", "dec",
             "rho_min", "x0"}
    extra = set(pt) - known
    if extra:
        raise ConfigError(f"unknown method keys: {sorted(extra)}")
    try:
        spec = ProviderSpec(
            kind=pt.get("provider", "simulated"),
            tau=int(pt.get("tau", 0)),
            tau_min=int(pt["tau_min"]) if "tau_min" in pt else None,
            curvature=pt.get("curvature", "exact"),
            memory=int(pt.get("memory", 10)),
            worker_sleep=float(pt.get("worker_sleep", 0.0)),
        )
        rc = RunConfig(
            rho=_rho(pt.get("rho", "1L"), L),
            adaptive=_bool(pt.get("adaptive", "false")),
            eta=float(pt.get("eta", 0.1)),
            inc=float(pt.get("inc", 2.0)),
            dec=float(pt.get("dec", 0.5)),
            rho_min=float(pt.get("rho_min", 1e-8)),
            max_iters=cfg.run["max_iters"],
            grad_tol=cfg.run["grad_tol"],
            eig_tol=cfg.run["eig_tol"],
            provider=spec,
            init=InitStrategy.parse(pt.get("init", "zero")),
            seed=rep,
            max_step_norm=float(pt["max_step_norm"]) if "max_step_norm" in pt else None,
            curvature_ridge=float(pt.get("curvature_ridge", 0.0)),
            x0=tuple(float(v) for v in pt["x0"].split()) if "x0" in pt else None,
        )
        p = int(pt.get("p", 1))
        if p < 1:
            raise InvalidParams("p must be at least 1")
    except (ValueError, InvalidParams) as exc:
        raise ConfigError(f"invalid method parameters {pt}: {exc}") from None
    return rc, p


def estimate_f_star(oracle, iters: int = 300) -> float:
    """Lowest loss of a long adaptive vanilla run."""
    tr = run_vanilla(oracle, RunConfig(adaptive=True, max_iters=iters, grad_tol=1e-12,
                                       track_mu=False))
    return min(r.f for r in tr.records)


def time_to_threshold(trace: RunTrace, threshold: float) -> float:
    """First time the loss is at or below ``threshold``; charged units or seconds."""
    for k, rec in enumerate(trace.records):
        if rec.f <= threshold:
            if trace.mode == "threaded":
                return trace.wall_elapsed_ns[k] * 1e-9
            return float(rec.charged_time)
    return math.inf


def run_method(oracle, driver: str, rc: RunConfig, p: int) -> RunTrace:
    if driver == "async":
        return run_split_client(oracle, rc)
    if driver == "vanilla":
        return run_vanilla(oracle, rc)
    return run_lazy(oracle, rc, p)


def cmd_run(config_path, log=print) -> int:
    """Run every method over its grid; exit 0, 2 (config) or 3 (run failure)."""
    try:
        cfg = load_config(config_path)
        oracle = build_oracle(cfg.problem)
    except ConfigError as exc:
        log(f"config error: {exc}")
        return 2
    except (OSError, ValueError) as exc:
        log(f"config error: {exc}")
        return 2
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    L = oracle.lipschitz_hessian_bound
    f_star = estimate_f_star(oracle, cfg.run["fstar_iters"])
    threshold = f_star + cfg.run["threshold_rtol"] * (1 + abs(f_star))
    log(f"f* = {f_star!r}, threshold = {threshold!r}, L = {L!r}")
    rows, status = [], 0
    for m in cfg.methods:
        for gi, pt in enumerate(m.points()):
            for rep in range(cfg.repetitions):
                rc, p = _run_config(pt, cfg, L, rep)
                fname = f"{m.name}_g{gi}_r{rep}.csv"
                try:
                    trace = run_method(oracle, m.driver, rc, p)
                except Exception as exc:
                    trace = getattr(exc, "trace", None)
                    log(f"run {m.name} grid {gi} rep {rep} failed: {exc}")
                    status = 3
                    if trace is None:
                        continue
                trace.to_csv(out / fname)
                if trace.status in ("nonfinite", "error"):
                    status = 3
                ttt = time_to_threshold(trace, threshold)
                rows.append({
                    "method": m.name, "grid_point": gi, "repetition": rep, "driver": m.driver,
                    "mode": trace.mode, "rho": rc.rho, "adaptive": int(rc.adaptive),
                    "p": p if m.driver == "lazy" else "", "tau": rc.provider.tau,
                    "status": trace.status, "iters": trace.n_iters,
                    "final_f": trace.records[-1].f if trace.records else math.nan,
                    "time_to_threshold": ttt,
                    "time_unit": "seconds" if trace.mode == "threaded" else "charged",
                    "best": 0, "trace_csv": fname,
                })
    for m in cfg.methods:
        mine = [r for r in rows if r["method"] == m.name]
        if mine:
            min(mine, key=lambda r: r["time_to_threshold"])["best"] = 1
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_HEADER, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        if r["best"]:
            log(f"{r['method']:>12s}  best time-to-threshold {r['time_to_threshold']} "
                f"({r['time_unit']}), rho={r['rho']:.4g} adaptive={r['adaptive']} p={r['p']}")
    return status


def _median_ns(fn, repeats: int = 5) -> int:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        fn()
        times.append(time.perf_counter_ns() - t0)
    return max(1, int(statistics.median(times)))


def profile(d_list, n: int = 1000, seed: int = 1, repeats: int = 5) -> list[dict]:
    """Median phase timings of the logistic oracle per dimension."""
    rows = []
    for d in d_list:
        oracle = make_logistic_oracle(gen_synthetic(n, d, seed))
        x = np.random.Generator(np.random.Philox(seed)).standard_normal(d) * 0.1
        g = oracle.grad(x)
        H = oracle.hess(x)
        F = sym_eig(H)
        model = CubicModel(g, F, max(oracle.lipschitz_hessian_bound, 1e-3))
        rows.append({
            "d": d,
            "t_grad_ns": _median_ns(lambda: oracle.grad(x), repeats),
            "t_hess_ns": _median_ns(lambda: oracle.hess_array(x), repeats),
            "t_decomp_ns": _median_ns(lambda: sym_eig(H), repeats),
            "t_step_ns": _median_ns(lambda: solve_cubic(model), repeats),
        })
    return rows


def cmd_profile(d_list, n: int = 1000, seed: int = 1, output_dir=None, log=print) -> int:
    if not d_list or any(d < 1 for d in d_list) or n < 1:
        log("usage error: --dims needs positive integers and --n must be positive")
        return 2
    out = Path(os.environ.get(OUTPUT_ENV) or output_dir or "results")
    out.mkdir(parents=True, exist_ok=True)
    rows = profile(d_list, n, seed)
    with open(out / "profile.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, PROFILE_HEADER, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        log(" ".join(f"{k}={r[k]}" for k in PROFILE_HEADER))
    return 0
