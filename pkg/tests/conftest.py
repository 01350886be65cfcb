import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}
_ACCEPTANCE_PARTS: dict[int, dict[str, tuple[bool, str]]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def acceptance():
    """``record(n, part, ok, detail)`` folds a sub-check into criterion ``n``'s line."""

    def record(n: int, part: str, ok: bool, detail: str) -> None:
        parts = _ACCEPTANCE_PARTS.setdefault(n, {})
        parts[part] = (bool(ok), detail)
        verdict = "PASS" if all(v for v, _ in parts.values()) else "FAIL"
        body = "; ".join(f"{k} {'ok' if v else 'FAILED'} ({d})" for k, (v, d) in parts.items())
        ACCEPTANCE_LINES[n] = f"criterion {n:2d}: {verdict}  {body}"
        print(ACCEPTANCE_LINES[n])

    return record


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


def fd_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_hess(grad, x, h=1e-5):
    d = x.size
    H = np.zeros((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        H[:, i] = (grad(x + e) - grad(x - e)) / (2 * h)
    return 0.5 * (H + H.T)


def rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))
