"""Acceptance checks: exact properties on random instances, then desk-scale Monte Carlo.

Run with ``pytest -v -s tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``;
a pass/fail line per criterion is printed at the end of the session.
"""

import sys
import time

import numpy as np
import pytest

from conftest import random_unit, realistic_drop, small_drop, synthetic
from lsfp.duality import algorithm3
from lsfp.eigen import build_downlink_DF, build_uplink_DF
from lsfp.feasibility import algorithm1, algorithm2
from lsfp.harness import TrialConfig, outage_rate, run_trials
from lsfp.precoders import algorithm4, zf_lsfp
from lsfp.sinr import A_from_alpha, bs_power, build_stacked, interference_terms, sinr_matrix, sinr_scalar

DRAW_SIZES = [(L, K) for L in (2, 3, 7) for K in (1, 2, 5)]

# reference values for the relative performance of the suboptimal solvers
TABLE_RATIOS = {"alg4_ZL": 0.889, "alg5": 0.861, "alg4_Z1": 0.556}


def _random_instance(i, rng):
    """Alternate well-scaled synthetic fading with realistic sub-drops."""
    L, K = DRAW_SIZES[i % len(DRAW_SIZES)]
    if i % 2:
        return small_drop(L, K, seed=i)
    return synthetic(L, K, rng=rng)


@pytest.mark.criterion(1)
def test_duality_eigenvalue_equality(criterion):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(1000):
        b, p = _random_instance(i, rng)
        m = build_stacked(b, p)
        v = random_unit(rng, p.K, p.L)
        u = rng.uniform(0.1, 1.0, p.K * p.L)
        u /= np.linalg.norm(u)
        lam_d = build_downlink_DF(v, m, u).eigenvalue()
        lam_u = build_uplink_DF(v, m, u).eigenvalue()
        worst = max(worst, abs(lam_d - lam_u) / lam_d)
    elapsed = time.perf_counter() - t0
    criterion(f"max rel err {worst:.2e} (<= 1e-10), {elapsed:.1f} s (< 30 s)")
    assert worst <= 1e-10
    assert elapsed < 30


@pytest.mark.criterion(2)
def test_cross_form_sinr(criterion):
    rng = np.random.default_rng(202)
    err_bs = err_sum = 0.0
    for i in range(1000):
        b, p = _random_instance(i, rng)
        m = build_stacked(b, p)
        a = rng.normal(size=b.shape)
        a /= np.sqrt(bs_power(a, b, p).max())
        ref = sinr_scalar(a, b, p)
        err_bs = max(err_bs, np.max(np.abs(sinr_matrix(A_from_alpha(a, p), m, "per-bs") - ref) / ref))
        # the folded form needs the sum budget met exactly
        a = a / np.sqrt(bs_power(a, b, p).sum() / p.L)
        ref = sinr_scalar(a, b, p)
        err_sum = max(err_sum, np.max(np.abs(sinr_matrix(A_from_alpha(a, p), m, "sum") - ref) / ref))
    criterion(f"per-BS form {err_bs:.2e}, sum form {err_sum:.2e} (<= 1e-9)")
    assert err_bs <= 1e-9
    assert err_sum <= 1e-9


@pytest.mark.criterion(3)
def test_equal_sinr_at_optimum(criterion):
    spread = {"alg1": 0.0, "alg2": 0.0, "alg3": 0.0}
    for seed in range(100):
        b, p = small_drop(3, 2, seed=seed)
        spread["alg1"] = max(spread["alg1"], algorithm1(b, p)[1].sinr_spread)
        spread["alg2"] = max(spread["alg2"], algorithm2(b, p)[1].sinr_spread)
        spread["alg3"] = max(spread["alg3"], algorithm3(b, p)[2].sinr_spread)
    criterion("max spread " + ", ".join(f"{k} {v:.1e}" for k, v in spread.items()) + " (<= 1e-3)")
    assert max(spread.values()) <= 1e-3


@pytest.mark.criterion(4)
def test_sum_power_solvers_agree(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(50):
        b, p = small_drop(3, 2, M=64, seed=1000 + seed)
        s2 = algorithm2(b, p)[1].min_sinr
        s3 = algorithm3(b, p)[2].min_sinr
        worst = max(worst, abs(s2 - s3) / s3)
    elapsed = time.perf_counter() - t0
    criterion(f"max rel diff {worst:.2e} (<= 1e-3), {elapsed:.1f} s (< 300 s)")
    assert worst <= 1e-3
    assert elapsed < 300


@pytest.mark.criterion(5)
def test_one_over_L_bound(criterion):
    worst = {1.0: np.inf, 3.0: np.inf}
    for seed in range(50):
        b, p = small_drop(3, 2, seed=2000 + seed)
        opt = algorithm1(b, p)[1].min_sinr
        for Z in worst:
            worst[Z] = min(worst[Z], algorithm4(b, p, Z)[1].min_sinr / opt)
    criterion(f"min ratio to optimum: Z=L {worst[3.0]:.3f}, Z=1 {worst[1.0]:.3f} (>= 1/L = 0.333)")
    assert min(worst.values()) >= 1 / 3


def _oracle_sinr(beta, params, rows):
    """Min SINR of a batch of two-cell single-user precoders.

    ``rows`` has shape (N, 2, 2): BS j sends ``rows[:, j, v]`` to the user of
    cell v. Written directly from the closed-form bound, independent of the
    package's SINR code.
    """
    M = params.M
    c = params.rho_f * params.rho_r * params.tau
    g = beta[:, 0, :]                                           # g[j, l]
    load = 1.0 + params.rho_r * params.tau * g.sum(axis=1)     # per BS
    gamma = M * load * np.sum(rows**2, axis=2)                 # (N, 2)
    out = np.empty((rows.shape[0], 2))
    for l in range(2):
        proj = g[0, l] * rows[:, 0, :] + g[1, l] * rows[:, 1, :]   # (N, 2) over target v
        sig = M * c * proj[:, l] ** 2
        leak = M * c * proj[:, 1 - l] ** 2
        resid = params.rho_f / M * (gamma @ g[:, l])
        out[:, l] = sig / (1.0 / M + leak + resid)
    return out.min(axis=1)


def _oracle_rows(params, beta, r, theta):
    load = 1.0 + params.rho_r * params.tau * beta[:, 0, :].sum(axis=1)
    scale = r / np.sqrt(params.M * load)
    return np.stack([np.cos(theta), np.sin(theta)], axis=2) * scale[:, :, None]


def _random_search(beta, params, mode, rng, n_global=50_000, rounds=10, per_round=5_000):
    """Best min-SINR over random precoders meeting the power constraint with equality."""

    def radii(x):
        # per-BS: largest BS at full power; sum: total power equals L
        if mode == "per-bs":
            return x / x.max(axis=1, keepdims=True)
        return np.sqrt(2.0) * x / np.linalg.norm(x, axis=1, keepdims=True)

    x = rng.uniform(0, 1, (n_global, 2))
    theta = rng.uniform(0, 2 * np.pi, (n_global, 2))
    vals = _oracle_sinr(beta, params, _oracle_rows(params, beta, radii(x), theta))
    i = int(np.argmax(vals))
    best, bx, bt = vals[i], x[i], theta[i]
    for step in np.geomspace(0.3, 1e-4, rounds):
        x = np.clip(bx + step * rng.normal(size=(per_round, 2)), 1e-9, None)
        theta = bt + 2 * np.pi * step * rng.normal(size=(per_round, 2))
        vals = _oracle_sinr(beta, params, _oracle_rows(params, beta, radii(x), theta))
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, bx, bt = vals[i], x[i], theta[i]
    return best


@pytest.mark.criterion(6)
def test_tiny_instance_oracle(criterion):
    rng = np.random.default_rng(606)
    err = {"alg1": 0.0, "alg3": 0.0}
    for seed in range(20):
        b, p = small_drop(2, 1, seed=3000 + seed)
        ref_bs = _random_search(b, p, "per-bs", rng)
        ref_sum = _random_search(b, p, "sum", rng)
        err["alg1"] = max(err["alg1"], abs(algorithm1(b, p)[1].min_sinr - ref_bs) / ref_bs)
        err["alg3"] = max(err["alg3"], abs(algorithm3(b, p)[2].min_sinr - ref_sum) / ref_sum)
    criterion(f"max rel gap to 1e5-sample search: alg1 {err['alg1']:.2e}, alg3 {err['alg3']:.2e} (<= 2%)")
    assert max(err.values()) <= 0.02


def _positive_signal(a, beta):
    """Flip coefficient columns so every user's own projection is positive."""
    own = np.einsum("jkl,jkl->kl", beta, a)
    return a * np.where(own < 0, -1.0, 1.0)[None]


@pytest.mark.criterion(7)
def test_quasi_concavity(criterion):
    rng = np.random.default_rng(707)
    violations = 0
    worst = 0.0
    for i in range(1000):
        b, p = small_drop(2, 2, seed=i) if i % 2 else synthetic(2, 2, rng=rng)
        a1 = _positive_signal(rng.normal(size=b.shape), b)
        a2 = _positive_signal(rng.normal(size=b.shape), b)
        t = 0.5 if i % 4 < 2 else rng.uniform()
        s1, s2 = sinr_scalar(a1, b, p), sinr_scalar(a2, b, p)
        mid = sinr_scalar(t * a1 + (1 - t) * a2, b, p)
        # per user and for the minimum over users
        floor = np.minimum(s1, s2)
        gap = np.max((floor - mid) / floor)
        gap_min = (min(s1.min(), s2.min()) - mid.min()) / min(s1.min(), s2.min())
        worst = max(worst, gap, gap_min)
        violations += gap > 1e-9 or gap_min > 1e-9
    criterion(f"{violations} violations in 1000 pairs, largest relative drop {worst:.1e}")
    assert violations == 0


@pytest.mark.criterion(8)
def test_zero_forcing_nulls_directed_interference(criterion):
    worst = 0.0
    for seed in range(100):
        b, p, _ = realistic_drop(seed=4000 + seed)
        J0, J1, _ = interference_terms(zf_lsfp(b, p), b, p)
        worst = max(worst, np.max(J1 / J0))
    criterion(f"max J1/J0 {worst:.1e} (<= 1e-12)")
    assert worst <= 1e-12


@pytest.fixture(scope="module")
def seven_cell():
    """Paired 200-drop run at L=7, K=10, M=64, plus Algorithm 4 at Z=1."""
    t0 = time.perf_counter()
    data = run_trials(TrialConfig(drops=200, algorithms="pa,alg3,alg1,alg4,alg5"))
    low = run_trials(TrialConfig(drops=200, algorithms="alg4", z_budget=1.0))
    r = {a: outage_rate(data.rates(a)) for a in data.algorithms}
    r["alg4_Z1"] = outage_rate(low.rates("alg4"))
    r["alg4_ZL"] = r.pop("alg4")
    failures = sum(data.failures.values()) + sum(low.failures.values())
    return r, failures, time.perf_counter() - t0


@pytest.mark.criterion(9)
def test_seven_cell_outage(criterion, seven_cell):
    r, failures, elapsed = seven_cell
    ratio = r["alg3"] / r["pa"]
    criterion(f"R_out alg3 {r['alg3']:.3f} (in [0.2, 0.8]), PA {r['pa']:.2e} (<= 5e-3), "
              f"ratio {ratio:.0f} (>= 100), {failures} failed solves, run {elapsed:.0f} s")
    assert 0.2 <= r["alg3"] <= 0.8
    assert r["pa"] <= 5e-3
    assert ratio >= 100


@pytest.mark.criterion(10)
def test_suboptimal_ordering(criterion, seven_cell):
    r, _, _ = seven_cell
    ratios = {k: r[k] / r["alg1"] for k in TABLE_RATIOS}
    ordering = (r["alg1"] >= r["alg4_ZL"]
                and abs(r["alg4_ZL"] - r["alg5"]) <= 0.15 * r["alg1"]
                and min(r["alg4_ZL"], r["alg5"]) > r["alg4_Z1"])
    within = {k: abs(ratios[k] - TABLE_RATIOS[k]) <= 0.15 for k in TABLE_RATIOS}
    criterion(f"R_out alg1 {r['alg1']:.3f}, alg4(Z=L) {r['alg4_ZL']:.3f}, alg5 {r['alg5']:.3f}, "
              f"alg4(Z=1) {r['alg4_Z1']:.3f}; ordering {'ok' if ordering else 'violated'}; ratios "
              + ", ".join(f"{k} {100 * ratios[k]:.1f}%" for k in TABLE_RATIOS))
    assert ordering
    assert all(within.values())


@pytest.mark.criterion(11)
def test_nineteen_cell_direction(criterion, seven_cell):
    r7, _, _ = seven_cell
    data = run_trials(TrialConfig(cells=19, drops=100, algorithms="pa,alg3,alg6"))
    r = {a: outage_rate(data.rates(a)) for a in data.algorithms}
    ratio = r["alg6"] / r["pa"]
    criterion(f"R_out alg3 {r7['alg3']:.3f} -> {r['alg3']:.3f}, PA {r7['pa']:.2e} -> {r['pa']:.2e}, "
              f"alg6/PA {ratio:.0f} (>= 50)")
    assert r["alg3"] > r7["alg3"]
    assert r["pa"] < r7["pa"]
    assert ratio >= 50


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
