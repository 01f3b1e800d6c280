import numpy as np
import pytest

from lsfp.channel import LinkBudget, normalized_snr, sample_fading
from lsfp.geometry import build_hex_torus, drop_users
from lsfp.sinr import SystemParams


def realistic_drop(L=7, K=10, M=64, seed=0):
    """One drop of the default urban-macro setup; returns (beta, params, geom)."""
    geom = build_hex_torus(L)
    rng = np.random.default_rng(seed)
    budget = LinkBudget()
    users = drop_users(geom, K, rng)
    beta = sample_fading(geom, users, budget, rng)
    rho_f, rho_r = normalized_snr(budget)
    return beta, SystemParams(L, K, M, rho_f, rho_r), geom


def small_drop(L, K, M=64, seed=0):
    """First L cells and K users of a 7-cell drop: realistic statistics at small size."""
    beta, params, _ = realistic_drop(7, max(K, 1), M, seed)
    beta = beta[:L, :K, :L].copy()
    return beta, SystemParams(L, K, M, params.rho_f, params.rho_r)


def synthetic(L, K, M=8, rng=None, rho=(2.0, 3.0)):
    """Well-scaled random fading in [0.01, 1] with order-one powers."""
    rng = rng or np.random.default_rng(0)
    beta = rng.uniform(0.01, 1.0, size=(L, K, L))
    return beta, SystemParams(L, K, M, rho[0], rho[1])


def random_unit(rng, K, L):
    v = np.abs(rng.normal(size=(K, L, L))) + 1e-3
    return v / np.linalg.norm(v, axis=2, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_DETAILS = pytest.StashKey[dict]()
_OUTCOMES = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record the measured quantities of the running acceptance criterion."""
    number = request.node.get_closest_marker("criterion").args[0]

    def record(detail):
        request.config.stash.setdefault(_DETAILS, {})[number] = detail
        print(f"criterion {number}: {detail}")
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    rep = outcome.get_result()
    if marker is None or rep.when == "teardown" or (rep.when == "setup" and rep.passed):
        return
    item.config.stash.setdefault(_OUTCOMES, {})[marker.args[0]] = rep.outcome


def pytest_terminal_summary(terminalreporter, config):
    outcomes = config.stash.get(_OUTCOMES, {})
    if not outcomes:
        return
    details = config.stash.get(_DETAILS, {})
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(outcomes):
        tag = "PASS" if outcomes[n] == "passed" else "FAIL"
        terminalreporter.write_line(f"[{tag}] criterion {n}: {details.get(n, outcomes[n])}")
