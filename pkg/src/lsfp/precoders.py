"""Baseline and suboptimal precoders.

Every function returns coefficients ``alpha[j, k, v]``; the max-min
algorithms also return a SolveReport.
"""

import numpy as np

from .duality import DualitySolveConfig, algorithm3
from .eigen import build_downlink_DF, maxmin_power_given_beamformers
from .errors import ConfigurationError, IllConditionedError
from .sinr import (
    BeamformerPowerSet,
    alpha_from_A,
    assemble_A,
    bs_power,
    build_stacked,
    equilibrated_condition,
    make_report,
)

CONDITION_LIMIT = 1e12


def no_lsfp(beta, params):
    """Each BS serves only its own users, scaled so that gamma_j = 1."""
    beta = np.asarray(beta, dtype=float)
    L, K, _ = beta.shape
    load = 1.0 + params.rho_r_tau * beta.sum(axis=2)  # [j, k]
    c = 1.0 / np.sqrt(params.M * load.sum(axis=1))
    alpha = np.zeros_like(beta)
    idx = np.arange(L)
    alpha[idx, :, idx] = c[:, None]
    return alpha


def zf_lsfp(beta, params):
    """Zero-forcing coefficients that null every directed cross term.

    ``A^[k]`` is proportional to the inverse of ``B^[k]`` with one scale
    shared by all users, chosen so the most loaded BS transmits at full power.

    Raises
    ------
    IllConditionedError
        If some ``B^[k]`` has equilibrated condition number above 1e12.
    """
    beta = np.asarray(beta, dtype=float)
    L, K, _ = beta.shape
    blocks = []
    for k in range(K):
        Bk = beta[:, k, :].T
        cond = equilibrated_condition(Bk)
        if not cond < CONDITION_LIMIT:
            raise IllConditionedError(f"fading block {k} is ill-conditioned", condition_number=cond)
        blocks.append(np.linalg.solve(Bk, np.eye(L)))
    A = np.vstack(blocks)
    alpha = alpha_from_A(A, params)
    return alpha / np.sqrt(bs_power(alpha, beta, params).max())


def pa_only(beta, params, mode="per-bs", Z=None):
    """Power allocation only: canonical beamformers, max-min powers.

    Sum mode uses the balanced Perron powers at budget Z (default L); per-BS
    mode rescales that solution by its largest BS power.
    """
    beta = np.asarray(beta, dtype=float)
    L, K, _ = beta.shape
    Z = float(L if Z is None else Z)
    mats = build_stacked(beta, params, Z)
    v = np.broadcast_to(np.eye(L)[None], (K, L, L)).copy()
    p, _ = maxmin_power_given_beamformers(build_downlink_DF(v, mats), Z, mats, v)
    alpha = alpha_from_A(assemble_A(BeamformerPowerSet(v, p)), params)
    if mode == "per-bs":
        alpha = alpha / np.sqrt(bs_power(alpha, beta, params).max())
    elif mode != "sum":
        raise ConfigurationError(f"unknown constraint mode {mode!r}")
    return alpha


def algorithm4(beta, params, Z=None, cfg=None):
    """Sum-power duality solution rescaled into the per-BS constraints."""
    Z = float(params.L if Z is None else Z)
    base = cfg or DualitySolveConfig()
    cfg = DualitySolveConfig(base.ips_iterations, Z, base.eigen_tol, base.refine_passes)
    _, A, rep = algorithm3(beta, params, cfg)
    scale = rep.bs_power.max()
    alpha = alpha_from_A(A, params) / np.sqrt(scale)
    report = make_report("alg4", alpha, beta, params, iterations=rep.iterations,
                         info={"Z": Z, "sum_solution_peak": float(scale),
                               "ips_residual": rep.info["ips_residual"]})
    return alpha, report


def z_grid(L, step):
    """Budgets 1, 1 + step, ... below L, then L itself."""
    if not step > 0:
        raise ConfigurationError("Z step must be positive")
    n = int(np.floor((L - 1) / step + 1e-9))
    grid = [1.0 + i * step for i in range(n + 1)]
    if L - grid[-1] > 1e-9:
        grid.append(float(L))
    return grid


def algorithm5(beta, params, step=0.5, cfg=None):
    """Line search over the sum budget Z for Algorithm 4; keeps the best."""
    best = None
    sweep = []
    for Z in z_grid(params.L, step):
        alpha, rep = algorithm4(beta, params, Z, cfg)
        sweep.append((Z, rep.min_sinr))
        if best is None or rep.min_sinr > best[1].min_sinr:
            best = (alpha, rep)
    alpha, rep = best
    rep.algorithm = "alg5"
    rep.info = dict(rep.info, sweep=sweep, best_Z=rep.info["Z"])
    return alpha, rep


def subnetwork(beta, cells):
    """Fading sub-tensor restricted to the BSs and users of ``cells``."""
    cells = np.asarray(cells)
    return beta[np.ix_(cells, np.arange(beta.shape[1]), cells)]


def _inner_solver(inner, step):
    if inner == "alg5":
        return lambda b, p: algorithm5(b, p, step)[0]
    if inner == "alg4":
        return lambda b, p: algorithm4(b, p)[0]
    if inner == "alg1":
        from .feasibility import algorithm1

        def run(b, p):
            A, _ = algorithm1(b, p)
            return alpha_from_A(A, p)
        return run
    raise ConfigurationError(f"unsupported inner algorithm {inner!r}")


def algorithm6(beta, params, neighbors, inner="alg5", step=0.5):
    """Decentralized precoding: each BS solves its neighborhood, keeps its own row.

    Parameters
    ----------
    neighbors : ndarray (L, N)
        Cooperation set of every BS, including itself.

    Notes
    -----
    A local solve only sees the pilot load of its neighborhood, so a kept
    row can exceed unit power once the load of all cells is counted. Such
    rows are scaled down to gamma_j = 1.
    """
    beta = np.asarray(beta, dtype=float)
    L, K, _ = beta.shape
    neighbors = np.asarray(neighbors)
    if neighbors.shape[0] != L or not all(j in neighbors[j] for j in range(L)):
        raise ConfigurationError("every BS must belong to its own neighborhood")
    solve = _inner_solver(inner, step)
    alpha = np.zeros_like(beta)
    for j in range(L):
        cells = np.sort(neighbors[j])
        local = solve(subnetwork(beta, cells), params.with_cells(len(cells)))
        pos = int(np.flatnonzero(cells == j)[0])
        alpha[j][:, cells] = local[pos]
    gam = bs_power(alpha, beta, params)
    over = gam > 1.0 + 1e-12
    alpha[over] /= np.sqrt(gam[over])[:, None, None]
    report = make_report("alg6", alpha, beta, params,
                         info={"inner": inner, "rescaled_bs": np.flatnonzero(over).tolist()})
    return alpha, report
