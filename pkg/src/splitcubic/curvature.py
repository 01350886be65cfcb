"""Curvature clients.

A provider hands the optimizer factorized Hessian approximations that may
be stale (computed at an earlier iterate) and inexact (quasi-Newton).
Every provider implements the same small protocol, driven once per
optimizer step:

``poll(t, x, g)``
    Called at step ``t`` with the current iterate and gradient. Returns a
    new :class:`CurvatureUpdate` if one is available to the optimizer at
    this step, else ``None``.
``charge(t)``
    Time units the step costs in the logical wall-clock model.
``request_refresh()``
    Hint that the current curvature is useless (the step stalled).
``close()``
    Release resources; idempotent.

Three execution models are provided: a deterministic logical-clock
simulation of the asynchronous worker, a real background thread, and the
synchronous periodic refresh of the lazy baseline.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, InvalidParams, WorkerPanicked
from .linalg import SpectralFactorization, SymMatrix, sym_eig
from .matrix_io import read_matrix
from .problems import ObjectiveOracle

CURVATURE_KINDS = ("exact", "lbfgs")


@dataclass(frozen=True)
class CurvatureUpdate:
    """A factorized curvature matrix with its provenance on the step axis.

    ``source_iter`` is the iterate index the matrix was built at (``-1``
    for the initial ``H0``) and ``ready_iter`` the first step allowed to
    use it. ``tag`` is ``"exact"``, ``"lbfgs"`` or ``"surrogate"``;
    ``delta_claimed`` is only meaningful for surrogates.
    """

    factorization: SpectralFactorization
    source_iter: int
    ready_iter: int
    tag: str = "exact"
    delta_claimed: float = 0.0
    wall_hess_ns: int = 0
    wall_decomp_ns: int = 0

    def __post_init__(self):
        if self.ready_iter < self.source_iter:
            raise ValueError("ready_iter precedes source_iter")

    @property
    def delay(self) -> int:
        return self.ready_iter - self.source_iter

    @property
    def matrix(self) -> np.ndarray:
        return self.factorization.matrix


# ---------------------------------------------------------------------------
# initial matrix

@dataclass(frozen=True)
class InitStrategy:
    """Choice of the predefined matrix ``H0`` used before the first update."""

    kind: str = "zero"
    mu: float | None = None
    k: int | None = None
    path: str | None = None
    memory: int = 10

    def __post_init__(self):
        if self.kind not in ("zero", "scaled_identity", "lbfgs_warmup", "diagonal", "recycled"):
            raise InvalidParams(f"unknown init strategy {self.kind!r}")
        if self.kind == "scaled_identity" and not (self.mu is not None and self.mu > 0):
            raise InvalidParams("scaled_identity needs mu > 0")
        if self.kind == "lbfgs_warmup" and not (self.k is not None and self.k >= 1):
            raise InvalidParams("lbfgs_warmup needs k >= 1")
        if self.kind == "recycled" and not self.path:
            raise InvalidParams("recycled needs a path")
        if self.memory < 1:
            raise InvalidParams("memory must be positive")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def scaled_identity(cls, mu: float):
        return cls("scaled_identity", mu=float(mu))

    @classmethod
    def lbfgs_warmup(cls, k: int, memory: int = 10):
        return cls("lbfgs_warmup", k=int(k), memory=memory)

    @classmethod
    def diagonal(cls):
        return cls("diagonal")

    @classmethod
    def recycled(cls, path):
        return cls("recycled", path=str(path))

    @classmethod
    def parse(cls, text: str) -> InitStrategy:
        """Parse ``zero``, ``identity:MU``, ``lbfgs:K``, ``diagonal`` or ``recycled:PATH``."""
        head, _, arg = text.strip().partition(":")
        try:
            if head == "zero":
                return cls.zero()
            if head in ("identity", "scaled_identity"):
                return cls.scaled_identity(float(arg or 1.0))
            if head in ("lbfgs", "lbfgs_warmup"):
                return cls.lbfgs_warmup(int(arg or 5))
            if head == "diagonal":
                return cls.diagonal()
            if head == "recycled":
                return cls.recycled(arg)
        except ValueError as exc:
            raise InvalidParams(f"bad init strategy {text!r}: {exc}") from None
        raise InvalidParams(f"unknown init strategy {text!r}")


class LbfgsMemory:
    """Bounded history of curvature pairs ``(s_i, y_i)``.

    Pairs failing ``s^T y > 1e-10 ||s|| ||y||`` are rejected so that every
    stored pair keeps the BFGS recurrence positive definite.
    """

    ADMISSIBILITY = 1e-10

    def __init__(self, capacity: int = 10):
        if capacity < 1:
            raise InvalidParams("capacity must be positive")
        self.capacity = capacity
        self.pairs: deque[tuple[np.ndarray, np.ndarray]] = deque(maxlen=capacity)

    def __len__(self):
        return len(self.pairs)

    def push(self, s, y) -> bool:
        s = np.array(s, dtype=float)
        y = np.array(y, dtype=float)
        sy = float(s @ y)
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(y))):
            return False
        if sy <= self.ADMISSIBILITY * np.linalg.norm(s) * np.linalg.norm(y):
            return False
        self.pairs.append((s, y))
        return True

    @property
    def gamma(self) -> float:
        if not self.pairs:
            return 1.0
        s, y = self.pairs[-1]
        return float(y @ y) / float(y @ s)

    def copy(self) -> LbfgsMemory:
        out = LbfgsMemory(self.capacity)
        out.pairs.extend(self.pairs)
        return out


def lbfgs_materialize(mem: LbfgsMemory, dim: int) -> SymMatrix:
    """Dense BFGS Hessian approximation seeded with ``gamma I``."""
    B = mem.gamma * np.eye(dim)
    for s, y in mem.pairs:
        if s.shape != (dim,):
            raise DimensionMismatch(f"pair of length {s.shape[0]} for dim {dim}")
        Bs = B @ s
        B = B - np.outer(Bs, Bs) / float(s @ Bs) + np.outer(y, y) / float(y @ s)
    return SymMatrix(B)


def init_h0(strategy: InitStrategy, oracle: ObjectiveOracle, x0) -> tuple[SymMatrix, float]:
    """Build ``H0`` and measure ``delta0 = ||H0 - hess f(x0)||_2``."""
    x0 = np.asarray(x0, dtype=float)
    d = oracle.dim
    if x0.shape != (d,):
        raise DimensionMismatch(f"x0 has shape {x0.shape}, oracle dim is {d}")
    kind = strategy.kind
    if kind == "zero":
        H0 = SymMatrix(np.zeros((d, d)))
    elif kind == "scaled_identity":
        H0 = SymMatrix(strategy.mu * np.eye(d))
    elif kind == "diagonal":
        H0 = SymMatrix(np.diag(np.diag(oracle.hess_array(x0))))
    elif kind == "recycled":
        H0 = read_matrix(strategy.path)
        if H0.dim != d:
            raise DimensionMismatch(f"recycled matrix has dim {H0.dim}, expected {d}")
    else:
        mem = LbfgsMemory(strategy.memory)
        x, g = x0.copy(), oracle.grad(x0)
        gnorm = float(np.linalg.norm(g))
        if gnorm > 0:
            step = 1.0 / (10.0 * gnorm)
            for _ in range(strategy.k):
                x_new = x - step * g
                g_new = oracle.grad(x_new)
                mem.push(x_new - x, g_new - g)
                x, g = x_new, g_new
        H0 = lbfgs_materialize(mem, d)
    delta0 = float(np.linalg.norm(H0.entries - oracle.hess_array(x0), 2))
    return H0, delta0


# ---------------------------------------------------------------------------
# delay schedules

@dataclass(frozen=True)
class DelaySchedule:
    """Compute time of each curvature update in optimizer-step units.

    Fixed when ``tau_min == tau_max``; otherwise drawn uniformly from the
    integers in ``[tau_min, tau_max]`` with a seeded generator.
    """

    tau_min: int = 0
    tau_max: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.tau_min < 0 or self.tau_max < self.tau_min:
            raise InvalidParams("need 0 <= tau_min <= tau_max")

    @classmethod
    def fixed(cls, tau: int):
        return cls(int(tau), int(tau))

    @classmethod
    def uniform(cls, lo: int, hi: int, seed: int = 0):
        return cls(int(lo), int(hi), seed)

    def sampler(self) -> Callable[[], int]:
        if self.tau_min == self.tau_max:
            return lambda: self.tau_min
        rng = np.random.Generator(np.random.Philox(self.seed))
        return lambda: int(rng.integers(self.tau_min, self.tau_max + 1))


# ---------------------------------------------------------------------------
# providers

def _timed_factorize(H: SymMatrix, ridge: float):
    if ridge:
        H = SymMatrix(H.entries + ridge * np.eye(H.dim))
    t0 = time.perf_counter_ns()
    F = sym_eig(H)
    return F, time.perf_counter_ns() - t0


class CurvatureProvider:
    """Common machinery: optional L-BFGS pair collection and matrix builds."""

    def __init__(self, oracle: ObjectiveOracle, curvature: str = "exact",
                 memory: int = 10, ridge: float = 0.0):
        if curvature not in CURVATURE_KINDS:
            raise InvalidParams(f"unknown curvature kind {curvature!r}")
        if ridge < 0:
            raise InvalidParams("curvature_ridge must be nonnegative")
        self.oracle = oracle
        self.curvature = curvature
        self.ridge = float(ridge)
        self.mem = LbfgsMemory(memory) if curvature == "lbfgs" else None
        self._last_xg = None
        # every update handed to the optimizer, in order
        self.consumed: list[CurvatureUpdate] = []
        self.secant_log: list[float] = []

    def _observe(self, x, g):
        """Feed the L-BFGS memory with the pair ending at ``(x, g)``."""
        if self.mem is None:
            return
        if self._last_xg is not None:
            x_prev, g_prev = self._last_xg
            s, y = x - x_prev, g - g_prev
            if np.any(s) and self.mem.push(s, y):
                B = lbfgs_materialize(self.mem, s.shape[0])
                self.secant_log.append(
                    float(np.linalg.norm(B.entries @ s - y) / max(np.linalg.norm(y), 1e-300))
                )
        self._last_xg = (np.array(x, copy=True), np.array(g, copy=True))

    def _build(self, x, mem=None) -> tuple[SymMatrix, str, int]:
        t0 = time.perf_counter_ns()
        if self.curvature == "exact":
            H = self.oracle.hess(x)
        else:
            H = lbfgs_materialize(mem if mem is not None else self.mem, self.oracle.dim)
        return H, self.curvature, time.perf_counter_ns() - t0

    def _make_update(self, x, source, ready, mem=None) -> CurvatureUpdate:
        H, tag, t_hess = self._build(x, mem)
        F, t_dec = _timed_factorize(H, self.ridge)
        return CurvatureUpdate(F, source, ready, tag, wall_hess_ns=t_hess, wall_decomp_ns=t_dec)

    def _record(self, upd):
        if upd is not None:
            self.consumed.append(upd)
        return upd

    def poll(self, t: int, x, g) -> CurvatureUpdate | None:
        raise NotImplementedError

    def charge(self, t: int) -> int:
        return 1

    def request_refresh(self) -> None:
        pass

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class SimulatedProvider(CurvatureProvider):
    """Deterministic logical-clock model of one asynchronous worker.

    At each step the provider first delivers a pending update whose
    ``ready_iter`` has been reached, then, if idle, snapshots the current
    iterate; that computation becomes usable ``tau`` steps later, with
    ``tau`` drawn from the schedule. ``tau = 0`` delivers within the same
    step, reproducing fresh curvature at every iterate.
    """

    def __init__(self, oracle, schedule: DelaySchedule | int = 0, curvature="exact",
                 memory=10, ridge=0.0):
        super().__init__(oracle, curvature, memory, ridge)
        if not isinstance(schedule, DelaySchedule):
            schedule = DelaySchedule.fixed(schedule)
        self.schedule = schedule
        self.tau_max = schedule.tau_max
        self._draw = schedule.sampler()
        self._pending: CurvatureUpdate | None = None

    def poll(self, t, x, g):
        self._observe(x, g)
        out = None
        if self._pending is not None and self._pending.ready_iter <= t:
            out, self._pending = self._pending, None
        if self._pending is None:
            tau = self._draw()
            self._pending = self._make_update(x, t, t + tau)
            if tau == 0:
                # a zero-cost update supersedes whatever was delivered above
                out, self._pending = self._pending, None
        return self._record(out)


class LazyProvider(CurvatureProvider):
    """Synchronous refresh every ``p`` steps, charging ``tau`` per refresh.

    ``p = 1`` is vanilla cubic Newton. Stall hints from the driver are
    ignored: the period already bounds staleness, and a fixed schedule
    keeps the charged time equal to ``T + ceil(T/p) tau``.
    """

    def __init__(self, oracle, p: int = 1, tau: int = 0, curvature="exact", memory=10, ridge=0.0):
        super().__init__(oracle, curvature, memory, ridge)
        if p < 1:
            raise InvalidParams("lazy period p must be >= 1")
        if tau < 0:
            raise InvalidParams("tau must be nonnegative")
        self.p = int(p)
        self.tau = int(tau)
        self._refreshed_at = -1

    def poll(self, t, x, g):
        self._observe(x, g)
        if t % self.p == 0:
            self._refreshed_at = t
            return self._record(self._make_update(x, t, t))
        return None

    def charge(self, t):
        return 1 + (self.tau if self._refreshed_at == t else 0)


class _Slot:
    """Single-slot mailbox; a put overwrites any unread item."""

    def __init__(self):
        self._lock = threading.Lock()
        self._item = None
        self.ready = threading.Event()

    def put(self, item):
        with self._lock:
            self._item = item
        self.ready.set()

    def take(self):
        with self._lock:
            item, self._item = self._item, None
            self.ready.clear()
        return item


class ThreadedProvider(CurvatureProvider):
    """Curvature computed by a real background thread.

    The optimizer posts ``(t, x)`` to an inbox each step; the worker, when
    idle, takes the latest post, builds and factorizes the matrix, and
    publishes to an outbox that the optimizer reads without blocking. Both
    mailboxes keep only their newest item. ``worker_sleep`` (seconds) is
    added to every computation to emulate an expensive Hessian.
    """

    def __init__(self, oracle, curvature="exact", memory=10, ridge=0.0,
                 worker_sleep: float = 0.0, join_timeout: float = 5.0):
        super().__init__(oracle, curvature, memory, ridge)
        self.worker_sleep = float(worker_sleep)
        self.join_timeout = join_timeout
        self._inbox = _Slot()
        self._outbox = _Slot()
        self._stop = threading.Event()
        self._error: BaseException | None = None
        self._latest_source = -1
        self.published = 0
        self.shutdown_ns: int | None = None
        self._thread = threading.Thread(target=self._work, name="curvature-worker", daemon=True)
        self._thread.start()

    def _work(self):
        try:
            while not self._stop.is_set():
                if not self._inbox.ready.wait(timeout=0.05):
                    continue
                job = self._inbox.take()
                if job is None:
                    continue
                t, x, mem = job
                upd = self._make_update(x, t, t, mem)
                if self.worker_sleep and self._stop.wait(self.worker_sleep):
                    break
                if self._stop.is_set():
                    break
                self._outbox.put(upd)
                self.published += 1
        except BaseException as exc:  # surfaced on the optimizer thread
            self._error = exc

    def poll(self, t, x, g):
        if self._error is not None:
            raise WorkerPanicked(f"curvature worker failed: {self._error!r}") from self._error
        self._observe(x, g)
        mem = self.mem.copy() if self.mem is not None else None
        self._inbox.put((t, np.array(x, copy=True), mem))
        upd = self._outbox.take()
        if upd is None or upd.source_iter <= self._latest_source:
            return None
        self._latest_source = upd.source_iter
        upd = CurvatureUpdate(
            upd.factorization, upd.source_iter, max(t, upd.source_iter), upd.tag,
            wall_hess_ns=upd.wall_hess_ns, wall_decomp_ns=upd.wall_decomp_ns,
        )
        return self._record(upd)

    def close(self):
        if self._stop.is_set():
            return
        t0 = time.perf_counter_ns()
        self._stop.set()
        self._inbox.ready.set()
        self._thread.join(self.join_timeout)
        self.shutdown_ns = time.perf_counter_ns() - t0
        if self._thread.is_alive():
            raise WorkerPanicked("curvature worker did not stop")

    @property
    def alive(self) -> bool:
        return self._thread.is_alive()


def initial_update(H0: SymMatrix, ridge: float = 0.0, tag: str = "surrogate",
                   delta0: float = 0.0) -> CurvatureUpdate:
    F, t_dec = _timed_factorize(H0, ridge)
    return CurvatureUpdate(F, -1, 0, tag, delta_claimed=delta0, wall_decomp_ns=t_dec)


def staleness_error(oracle, update: CurvatureUpdate, x) -> float:
    """``||H_used - hess f(x)||_2``; the spectral error the step actually sees."""
    return float(np.linalg.norm(update.matrix - oracle.hess_array(x), 2))


__all__ = [
    "CurvatureUpdate", "InitStrategy", "LbfgsMemory", "lbfgs_materialize", "init_h0",
    "DelaySchedule", "CurvatureProvider", "SimulatedProvider", "LazyProvider",
    "ThreadedProvider", "initial_update", "staleness_error",
]
