"""Dense symmetric linear algebra: spectral factorization, shifted solves
and a Lanczos estimate of the smallest eigenvalue."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NonFinite, SingularShift


class SymMatrix:
    """Immutable dense symmetric matrix.

    The constructor symmetrizes its input with ``(A + A.T) / 2`` so that
    matrices accumulated with rounding drift are accepted. The spectral
    factorization is computed on first request and cached.
    """

    __slots__ = ("_entries", "_fact")

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
        # halves first so huge entries cannot overflow; symmetric pairs stay bit-exact
        a = np.where(a == a.T, a, 0.5 * a + 0.5 * a.T)
        a.setflags(write=False)
        self._entries = a
        self._fact = None

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    def factorize(self) -> SpectralFactorization:
        if self._fact is None:
            self._fact = sym_eig(self)
        return self._fact

    def __matmul__(self, other):
        return self._entries @ other

    def __repr__(self):
        return f"SymMatrix(dim={self.dim})"


@dataclass(frozen=True)
class SpectralFactorization:
    """``A = Q diag(eigenvalues) Q^T`` with eigenvalues ascending.

    ``matrix`` keeps the factorized matrix so that residuals can be checked
    against the original rather than the reconstruction.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T


def _as_array(A) -> np.ndarray:
    if isinstance(A, SymMatrix):
        return A.entries
    return SymMatrix(A).entries


def sym_eig(A) -> SpectralFactorization:
    """Full symmetric eigendecomposition (LAPACK ``syevd``)."""
    a = _as_array(A)
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix contains NaN or Inf")
    lam, q = scipy.linalg.eigh(a, driver="evd")
    for arr in (lam, q):
        arr.setflags(write=False)
    return SpectralFactorization(lam, q, a)


def shift_threshold(lambda_min: float) -> float:
    return 1e-14 * (1.0 + abs(lambda_min))


def shifted_solve(F: SpectralFactorization, sigma: float, g) -> np.ndarray:
    """Solve ``(A + sigma I) u = g`` reusing the factorization of ``A``.

    Raises SingularShift unless ``lambda_min + sigma`` is safely positive.
    """
    lam = F.eigenvalues
    if lam[0] + sigma <= shift_threshold(lam[0]):
        raise SingularShift(
            f"lambda_min + sigma = {lam[0] + sigma:.3e} is not positive"
        )
    q = F.eigenvectors
    return q @ ((q.T @ np.asarray(g, dtype=float)) / (lam + sigma))


def min_eig_estimate(apply_A, dim: int, iters: int, seed: int = 0) -> float:
    """Smallest Ritz value of a Lanczos run with full reorthogonalization.

    Only matrix-vector products with the symmetric operator are needed.
    The estimate is an upper bound on the true smallest eigenvalue
    (Cauchy interlacing) and is exact once ``iters >= dim``. On breakdown
    (an invariant subspace has been found) the run continues from a fresh
    random vector orthogonal to the current basis.
    """
    if dim < 1 or iters < 1:
        raise ValueError("dim and iters must be positive")
    rng = np.random.default_rng(seed)
    k_max = min(iters, dim)
    V = np.zeros((dim, k_max))
    alpha = np.zeros(k_max)
    beta = np.zeros(k_max)

    def fresh(j):
        for _ in range(10):
            v = rng.standard_normal(dim)
            # twice is enough
            for _ in range(2):
                v -= V[:, :j] @ (V[:, :j].T @ v)
            nv = np.linalg.norm(v)
            if nv > 1e-8:
                return v / nv
        raise RuntimeError("could not extend Lanczos basis")

    v = fresh(0)
    k = 0
    for j in range(k_max):
        V[:, j] = v
        w = np.asarray(apply_A(v), dtype=float)
        alpha[j] = v @ w
        for _ in range(2):
            w -= V[:, : j + 1] @ (V[:, : j + 1].T @ w)
        k = j + 1
        if k == k_max:
            break
        b = np.linalg.norm(w)
        scale = max(1.0, abs(alpha[j]), beta[j - 1] if j else 0.0)
        if b <= 1e-12 * scale:
            beta[j] = 0.0
            v = fresh(j + 1)
        else:
            beta[j] = b
            v = w / b
    if k == 1:
        return float(alpha[0])
    ritz = scipy.linalg.eigvalsh_tridiagonal(
        alpha[:k], beta[: k - 1], select="i", select_range=(0, 0)
    )
    return float(ritz[0])
