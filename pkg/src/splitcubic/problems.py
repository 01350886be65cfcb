"""Objective oracles, synthetic data and LIBSVM ingestion."""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ParseError
from .linalg import SymMatrix

# max |d^3/dt^3 log(1 + e^{-t})| = max |p(1-p)(1-2p)| over p in (0, 1)
SIGMOID_THIRD_DERIV_MAX = 1.0 / (6.0 * math.sqrt(3.0))


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"features must be a non-empty n x d matrix, got {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError("labels must be a vector with one entry per row")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or Inf")
        if not np.all((y == 1.0) | (y == -1.0)):
            raise ValueError("labels must be -1 or +1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


class ObjectiveOracle:
    """Exact zeroth, first and second order information for ``f``.

    Subclasses implement ``f``, ``grad`` and ``hess_array``; ``hess`` wraps
    the latter in a SymMatrix. Oracles hold no mutable state and may be
    called from several threads at once.
    """

    dim: int
    lipschitz_hessian_bound: float
    name: str = "oracle"

    def f(self, x) -> float:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def hess_array(self, x) -> np.ndarray:
        raise NotImplementedError

    def hess(self, x) -> SymMatrix:
        return SymMatrix(self.hess_array(x))

    def hvp(self, x, v) -> np.ndarray:
        return self.hess_array(x) @ v


class LogisticOracle(ObjectiveOracle):
    r"""Mean logistic loss with an optional ridge term.

    ``f(x) = mean(log(1 + exp(-y_i a_i^T x))) + l2/2 ||x||^2``
    """

    def __init__(self, data: Dataset, l2: float = 1e-3):
        if l2 < 0:
            raise ValueError("l2 must be nonnegative")
        self.data = data
        self.l2 = float(l2)
        self.dim = data.d
        self.name = f"logistic[{data.name}]"
        # rows scaled by their label; the loss only sees y_i a_i
        self._Z = data.features * data.labels[:, None]
        row_norms = np.linalg.norm(data.features, axis=1)
        self.lipschitz_hessian_bound = SIGMOID_THIRD_DERIV_MAX * float(np.mean(row_norms**3))

    def f(self, x):
        m = self._Z @ x
        return float(np.mean(np.logaddexp(0.0, -m)) + 0.5 * self.l2 * (x @ x))

    def grad(self, x):
        m = self._Z @ x
        return -(self._Z.T @ expit(-m)) / self.data.n + self.l2 * x

    def hess_array(self, x):
        m = self._Z @ x
        p = expit(m)
        w = p * (1.0 - p)
        X = self.data.features
        H = (X.T * w) @ X / self.data.n
        H[np.diag_indices_from(H)] += self.l2
        return H

    def hvp(self, x, v):
        m = self._Z @ x
        p = expit(m)
        X = self.data.features
        return X.T @ (p * (1.0 - p) * (X @ v)) / self.data.n + self.l2 * v


def make_logistic_oracle(data: Dataset, l2: float = 1e-3) -> LogisticOracle:
    return LogisticOracle(data, l2)


class QuadraticOracle(ObjectiveOracle):
    """``f(x) = x^T A x / 2 + b^T x``; the Hessian is constant so L = 0."""

    lipschitz_hessian_bound = 0.0

    def __init__(self, A, b=None):
        self.A = SymMatrix(A)
        self.dim = self.A.dim
        self.b = np.zeros(self.dim) if b is None else np.asarray(b, dtype=float)
        if self.b.shape != (self.dim,):
            raise ValueError("b has the wrong length")
        self.name = "quadratic"

    def f(self, x):
        return float(0.5 * x @ (self.A.entries @ x) + self.b @ x)

    def grad(self, x):
        return self.A.entries @ x + self.b

    def hess_array(self, x):
        return np.array(self.A.entries)

    def hess(self, x):
        return self.A


class RosenbrockOracle(ObjectiveOracle):
    """Chained Rosenbrock function in ``d >= 2`` variables.

    ``lipschitz_hessian_bound`` is valid on the ball ``||x|| <= 10``: the
    Hessian difference is bounded in the max-row-sum norm by
    ``(2400 * 10 + 3 * 400) ||x - y||``.
    """

    lipschitz_hessian_bound = 2400.0 * 10.0 + 3 * 400.0

    def __init__(self, d: int = 2):
        if d < 2:
            raise ValueError("rosenbrock needs d >= 2")
        self.dim = d
        self.name = f"rosenbrock({d})"

    def f(self, x):
        return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))

    def grad(self, x):
        g = np.zeros_like(x, dtype=float)
        t = x[1:] - x[:-1] ** 2
        g[:-1] += -400.0 * x[:-1] * t - 2.0 * (1.0 - x[:-1])
        g[1:] += 200.0 * t
        return g

    def hess_array(self, x):
        d = self.dim
        H = np.zeros((d, d))
        i = np.arange(d - 1)
        H[i, i] += 1200.0 * x[:-1] ** 2 - 400.0 * x[1:] + 2.0
        H[i + 1, i + 1] += 200.0
        H[i, i + 1] = -400.0 * x[:-1]
        H[i + 1, i] = -400.0 * x[:-1]
        return H


class SumOfCubicsOracle(ObjectiveOracle):
    """``f(x) = sum(x_i^3) / 6``; Hessian ``diag(x)`` is 1-Lipschitz globally."""

    lipschitz_hessian_bound = 1.0

    def __init__(self, d: int):
        self.dim = d
        self.name = f"sum_of_cubics({d})"

    def f(self, x):
        return float(np.sum(x**3) / 6.0)

    def grad(self, x):
        return 0.5 * x**2

    def hess_array(self, x):
        return np.diag(np.asarray(x, dtype=float))

    def hvp(self, x, v):
        return x * v


def make_test_oracle(kind: str, **params) -> ObjectiveOracle:
    """Build ``quadratic(A, b)``, ``rosenbrock(d)`` or ``sum_of_cubics(d)``."""
    if kind == "quadratic":
        return QuadraticOracle(params["A"], params.get("b"))
    if kind == "rosenbrock":
        return RosenbrockOracle(int(params.get("d", 2)))
    if kind == "sum_of_cubics":
        return SumOfCubicsOracle(int(params["d"]))
    raise ValueError(f"unknown test oracle {kind!r}")


def gen_synthetic(n: int, d: int, seed: int, flip_prob: float = 0.05) -> Dataset:
    """Gaussian features with labels from a random hyperplane.

    All draws come from one Philox (counter-based) stream: features,
    then the ground-truth direction, then the flip coins.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    rng = np.random.Generator(np.random.Philox(seed))
    X = rng.standard_normal((n, d))
    w_star = rng.standard_normal(d)
    y = np.where(X @ w_star >= 0.0, 1.0, -1.0)
    flip = rng.random(n) < flip_prob
    y[flip] *= -1.0
    return Dataset(X, y, name=f"synthetic(n={n},d={d},seed={seed})")


def parse_libsvm(text, name: str = "libsvm") -> Dataset:
    """Parse LIBSVM sparse text into a dense Dataset.

    ``text`` may be ``bytes``, ``str`` or a binary/text stream. Indices are
    1-based and strictly increasing per line; ``d`` is the largest index
    seen. Positive labels map to +1 and everything else to -1.
    """
    if hasattr(text, "read"):
        text = text.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    rows, labels = [], []
    d = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].replace("−", "-").strip()
        if not line:
            continue
        tokens = line.split()
        if ":" in tokens[0]:
            raise ParseError(lineno, "missing label")
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(lineno, f"bad label {tokens[0]!r}") from None
        entries = {}
        last = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(lineno, f"malformed token {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(lineno, f"malformed token {tok!r}") from None
            if idx < 1:
                raise ParseError(lineno, f"index {idx} is not 1-based")
            if idx <= last:
                raise ParseError(lineno, f"non-increasing index {idx} after {last}")
            if not math.isfinite(val):
                raise ParseError(lineno, f"non-finite value {val_s!r}")
            entries[idx] = val
            last = idx
        d = max(d, last)
        rows.append(entries)
        labels.append(1.0 if label > 0 else -1.0)
    if not rows:
        raise ParseError(0, "no samples in input")
    if d == 0:
        raise ParseError(0, "no features in input")
    X = np.zeros((len(rows), d))
    for i, entries in enumerate(rows):
        for idx, val in entries.items():
            X[i, idx - 1] = val
    return Dataset(X, np.array(labels), name=name)


def write_libsvm(data: Dataset, stream=None) -> str:
    """Serialize with ``repr`` floats (exact round trip); zeros are omitted."""
    buf = io.StringIO()
    for row, label in zip(data.features, data.labels):
        toks = ["+1" if label > 0 else "-1"]
        toks += [f"{j + 1}:{v!r}" for j, v in enumerate(row.tolist()) if v != 0.0]
        buf.write(" ".join(toks) + "\n")
    out = buf.getvalue()
    if stream is not None:
        stream.write(out)
    return out


def load_libsvm(path) -> Dataset:
    with open(path, "rb") as fh:
        return parse_libsvm(fh, name=os.path.basename(str(path)))


def bundled_a1a_sample() -> Dataset:
    """100-line sample in the a1a layout (123 binary features) shipped with the package."""
    path = os.path.join(os.path.dirname(__file__), "data", "a1a_sample.libsvm")
    return load_libsvm(path)
