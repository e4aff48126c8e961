import itertools

import numpy as np
import pytest

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion and print it."""
    sink = request.config.stash[_ACCEPTANCE_KEY]

    def _report(label, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        sink.append(line)
        print(line)
        return ok

    return _report


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def brute_force_assignment(x, y, p):
    """Smallest mean ``||x_i - y_sigma(i)||^p`` over every permutation."""
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    y = np.asarray(y, dtype=float).reshape(len(y), -1)
    n = x.shape[0]
    best = np.inf
    for perm in itertools.permutations(range(n)):
        cost = np.mean(np.sum(np.abs(x - y[list(perm)]) ** 2, axis=1) ** (p / 2))
        best = min(best, cost)
    return best


def quantile_integral(va, wa, vb, wb, p, grid=10**6):
    """Midpoint-rule integral of ``|F_a^-1(u) - F_b^-1(u)|^p`` on ``grid`` cells."""
    u = (np.arange(grid) + 0.5) / grid
    oa, ob = np.argsort(va, kind="stable"), np.argsort(vb, kind="stable")
    ca, cb = np.cumsum(wa[oa]), np.cumsum(wb[ob])
    qa = va[oa][np.minimum(np.searchsorted(ca, u), len(va) - 1)]
    qb = vb[ob][np.minimum(np.searchsorted(cb, u), len(vb) - 1)]
    return float(np.mean(np.abs(qa - qb) ** p))


def central_difference(fun, x, h=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-12))
