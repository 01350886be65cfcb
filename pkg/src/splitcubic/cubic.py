"""Global minimization of the cubic-regularized quadratic model

    m(s) = g^T s + 1/2 s^T H s + rho/6 ||s||^3

through the secular equation phi(sigma) = sigma - rho/2 ||s(sigma)|| = 0,
where s(sigma) = -(H + sigma I)^{-1} g. One spectral factorization of H
serves every shift, so each evaluation of phi costs O(d) once the
gradient is rotated into the eigenbasis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import MaxIterExceeded, NonFinite
from .linalg import SpectralFactorization, shifted_solve

ROOT_RTOL = 1e-10
MAX_SCALAR_ITERS = 200


@dataclass(frozen=True)
class CubicModel:
    g: np.ndarray
    F: SpectralFactorization
    rho: float
    _c: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if not self.rho > 0 or not math.isfinite(self.rho):
            raise ValueError(f"rho must be positive and finite, got {self.rho}")
        if g.shape != (self.F.dim,):
            raise ValueError("gradient and factorization dimensions differ")
        if not np.all(np.isfinite(g)):
            raise NonFinite("gradient contains NaN or Inf")
        object.__setattr__(self, "g", g)
        # gradient in the eigenbasis
        object.__setattr__(self, "_c", self.F.eigenvectors.T @ g)

    @property
    def lambda_min(self) -> float:
        return self.F.lambda_min


@dataclass(frozen=True)
class CubicSolution:
    s: np.ndarray
    sigma_star: float
    r: float
    model_decrease: float
    kkt_residual: float
    iterations_used: int
    hard_case: bool = False


def model_value(model: CubicModel, s) -> float:
    s = np.asarray(s, dtype=float)
    H = model.F.matrix
    return float(model.g @ s + 0.5 * s @ (H @ s) + model.rho / 6.0 * np.linalg.norm(s) ** 3)


def phi(model: CubicModel, sigma: float) -> float:
    u = shifted_solve(model.F, sigma, model.g)
    return float(sigma - 0.5 * model.rho * np.linalg.norm(u))


def _eps_shift(lam1: float) -> float:
    return 1e-12 * (1.0 + abs(lam1))


class _Secular:
    """phi and its Newton companion in the pole-offset variable.

    Iterates are parametrized by ``t = sigma + lambda_min`` so that the
    distance to the pole of ``||s(sigma)||`` is carried with full relative
    precision; near-hard-case roots can lie within 1e-8 of ``-lambda_min``.
    """

    def __init__(self, model: CubicModel):
        lam = model.F.eigenvalues
        self.lam1 = float(lam[0])
        self.gap = lam - lam[0]
        # scaled so that squares neither underflow nor overflow
        self.scale = float(np.max(np.abs(model._c))) or 1.0
        self.cs2 = (model._c / self.scale) ** 2
        self.half_rho = 0.5 * model.rho
        self.evals = 0

    def sigma(self, t):
        return t - self.lam1

    def norm(self, t):
        return self.scale * math.sqrt(float(np.sum(self.cs2 / (self.gap + t) ** 2)))

    def phi(self, t):
        self.evals += 1
        if t <= 0:
            return -math.inf
        return self.sigma(t) - self.half_rho * self.norm(t)

    def newton(self, t):
        """Newton step on h = 1/||s|| - rho / (2 sigma).

        h shares its root with phi for sigma > 0 and is concave, so Newton
        iterates approach the root monotonically from the left. Returns NaN
        when the step cannot be formed in floating point.
        """
        sigma = self.sigma(t)
        d = self.gap + t
        with np.errstate(all="ignore"):
            n2 = float(np.sum(self.cs2 / d**2))
            ns = math.sqrt(n2)
            try:
                h = 1.0 / (self.scale * ns) - self.half_rho / sigma
                dh = float(np.sum(self.cs2 / d**3)) / (n2 * ns * self.scale) \
                    + self.half_rho / sigma**2
                return t - h / dh
            except (ZeroDivisionError, OverflowError):
                return math.nan


def _bracket(sec: _Secular, warm_start):
    """Bracket in the offset variable; returns ``(t_lo, t_hi, phi(t_hi))``."""
    lam1 = sec.lam1
    eps = _eps_shift(lam1)
    t_lo = eps if lam1 < 0 else lam1 + eps
    sigma_lo = max(0.0, -lam1) + eps
    sigma_hi = max(sigma_lo, warm_start or 0.0, 1.0)
    t_hi = t_lo if sigma_hi == sigma_lo else sigma_hi + lam1
    phi_hi = sec.phi(t_hi)
    while phi_hi < 0:
        sigma_hi *= 2.0
        if not math.isfinite(sigma_hi):
            raise NonFinite("overflow while bracketing the secular equation")
        t_hi = sigma_hi + lam1
        phi_hi = sec.phi(t_hi)
    return t_lo, t_hi, phi_hi


def bracket_sigma(model: CubicModel, warm_start: float | None = None) -> tuple[float, float]:
    """Return ``(sigma_lo, sigma_hi)`` with ``phi(sigma_hi) >= 0``.

    ``sigma_lo`` sits just above the leftmost feasible shift
    ``max(0, -lambda_min)``; ``sigma_hi`` is found by doubling from
    ``max(sigma_lo, warm_start, 1)``.
    """
    lam1 = model.lambda_min
    if not np.any(model.g) and lam1 >= 0:
        return 0.0, 0.0
    sec = _Secular(model)
    t_lo, t_hi, _ = _bracket(sec, warm_start)
    return sec.sigma(t_lo), sec.sigma(t_hi)


def _finish(model, z, sigma, iters, hard=False):
    Q = model.F.eigenvectors
    s = Q @ z
    c = model._c
    lam = model.F.eigenvalues
    m = float(c @ z + 0.5 * np.sum(lam * z**2) + model.rho / 6.0 * np.linalg.norm(z) ** 3)
    H = model.F.matrix
    kkt = float(np.linalg.norm(H @ s + sigma * s + model.g))
    return CubicSolution(
        s=s,
        sigma_star=float(sigma),
        r=float(scipy.linalg.norm(s)),
        model_decrease=max(0.0, -m),
        kkt_residual=kkt,
        iterations_used=iters,
        hard_case=hard,
    )


def _hard_case(model: CubicModel):
    """Return the hard-case solution, or None if the easy case applies.

    In the hard case g has no component along the lambda_min eigenspace
    and the step restricted to the other eigenvectors at sigma = -lambda_min
    is too short; the missing length is supplied along an eigenvector of
    lambda_min. Its sign is chosen so that the eigenvector's first nonzero
    component is positive.
    """
    lam = model.F.eigenvalues
    lam1 = float(lam[0])
    if lam1 >= 0:
        return None
    c = model._c
    gnorm = float(np.linalg.norm(model.g))
    in_D = lam <= lam1 + 1e-10 * (1.0 + abs(lam1))
    if np.linalg.norm(c[in_D]) > 1e-10 * (1.0 + gnorm):
        return None
    sigma = -lam1
    z = np.zeros_like(c)
    z[~in_D] = -c[~in_D] / (lam[~in_D] + sigma)
    target = sigma / (0.5 * model.rho)
    r_perp = float(np.linalg.norm(z))
    if r_perp > target:
        return None
    alpha = math.sqrt(max(target**2 - r_perp**2, 0.0))
    v = model.F.eigenvectors[:, 0]
    lead = np.flatnonzero(np.abs(v) > 1e-12)
    if lead.size and v[lead[0]] < 0:
        alpha = -alpha
    z[0] = alpha
    return _finish(model, z, sigma, 0, hard=True)


def solve_cubic(model: CubicModel, warm_start: float | None = None) -> CubicSolution:
    """Global minimizer of the cubic model.

    Safeguarded Newton iteration on the secular equation inside a bracket
    ``[lo, hi]`` with ``phi(lo) <= 0 <= phi(hi)``; any Newton proposal
    leaving the bracket is replaced by bisection. ``warm_start`` (typically
    the previous optimal shift) is used both to seed the bracket search and
    as the first iterate.
    """
    lam = model.F.eigenvalues
    lam1 = float(lam[0])
    g_zero = not np.any(model.g)
    if g_zero and lam1 >= 0:
        return _finish(model, np.zeros_like(lam), 0.0, 0)
    hard = _hard_case(model)
    if hard is not None:
        return hard

    sec = _Secular(model)
    lo, hi, phi_hi = _bracket(sec, warm_start)
    phi_lo = sec.phi(lo)
    if phi_lo > 0:
        # root squeezed between the feasibility limit and lo
        hi, phi_hi = lo, phi_lo
        lo = max(0.0, lam1)
        phi_lo = sec.phi(lo)

    t_warm = None if warm_start is None else warm_start + lam1
    if t_warm is not None and lo < t_warm < hi:
        t = t_warm
        val = sec.phi(t)
    else:
        t, val = hi, phi_hi

    width = prev_abs = math.inf
    for _ in range(MAX_SCALAR_ITERS):
        if abs(val) <= ROOT_RTOL * (1.0 + sec.sigma(t)):
            break
        if val < 0:
            lo = t
        else:
            hi = t
        if hi - lo <= 4.0 * np.finfo(float).eps * hi:
            t = hi
            break
        cand = math.nan
        # Newton must halve either the bracket or |phi|, else bisect
        if sec.sigma(t) > 0 and (hi - lo <= 0.5 * width or abs(val) <= 0.5 * prev_abs):
            cand = sec.newton(t)
        if not lo < cand < hi:
            cand = math.sqrt(lo * hi) if lo > 0 and hi > 4.0 * lo else 0.5 * (lo + hi)
        width, prev_abs = hi - lo, abs(val)
        t = cand
        val = sec.phi(t)
    else:
        raise MaxIterExceeded(
            f"secular equation unsolved after {MAX_SCALAR_ITERS} iterations"
        )
    z = -model._c / (sec.gap + t)
    return _finish(model, z, sec.sigma(t), sec.evals)
