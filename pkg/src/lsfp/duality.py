"""Max-min precoding under a sum-power budget via uplink-downlink duality."""

from dataclasses import dataclass

import numpy as np

from .eigen import build_downlink_DF, build_uplink_DF, maxmin_power_given_beamformers
from .errors import ConfigurationError
from .sinr import (
    BeamformerPowerSet,
    alpha_from_A,
    assemble_A,
    build_stacked,
    make_report,
    relative_signal_power,
)


@dataclass(frozen=True)
class DualitySolveConfig:
    ips_iterations: int = 200
    Z: float = None           # sum-power budget, defaults to L
    eigen_tol: float = 1e-12
    refine_passes: int = 0    # extra beamformer/power alternations, off by default

    def budget(self, L):
        Z = float(L if self.Z is None else self.Z)
        if not 0 < Z <= L:
            raise ConfigurationError(f"sum-power budget must lie in (0, {L}], got {Z}")
        if self.ips_iterations < 1:
            raise ConfigurationError("ips_iterations must be at least 1")
        return Z


def uplink_interference(p_u, mats):
    """Per-group uplink covariance T[k] = sum_{n,j} Q^[njk] p_U[n,j], shape (K, L, L)."""
    # diagonal part: sum_{n,j} p[n,j] qdiag[n,j,k,i]
    diag = np.einsum("nj,njki->ki", p_u, mats.q_diag)
    T = np.einsum("kji,kj,kjm->kim", mats.b_vec, p_u, mats.b_vec)
    K, L = mats.K, mats.L
    T[:, np.arange(L), np.arange(L)] += diag
    return T


def _whitened(p_u, mats):
    T = uplink_interference(p_u, mats)
    # X[k, :, l] = T[k]^-1 b[k, l]
    X = np.linalg.solve(T, np.transpose(mats.b_vec, (0, 2, 1)))
    return np.transpose(X, (0, 2, 1))


def iterative_power_search(mats, iterations=200, p0=None):
    """Fixed-point search for balanced virtual-uplink powers.

    Each step sets ``p[k,l] <- 1 / (b^T T_k^-1 b)`` and renormalises to a
    total of K*L. Returns ``(p_u, residual)`` where the residual is the
    relative spread of ``p[k,l] * b^T T_k^-1 b`` at the final powers.
    """
    K, L = mats.K, mats.L
    p = np.ones((K, L)) if p0 is None else np.asarray(p0, dtype=float)
    for _ in range(iterations):
        q = np.einsum("klj,klj->kl", mats.b_vec, _whitened(p, mats))
        p_t = 1.0 / q
        p = K * L * p_t / p_t.sum()
    balance = p * np.einsum("klj,klj->kl", mats.b_vec, _whitened(p, mats))
    residual = float((balance.max() - balance.min()) / balance.max())
    return p, residual


def uplink_beamformers(p_u, mats):
    """Unit-norm receive beamformers w[k,l] proportional to T_k^-1 b[k,l]."""
    X = _whitened(np.asarray(p_u, dtype=float), mats)
    return X / np.linalg.norm(X, axis=2, keepdims=True)


def uplink_relative_power(w, p_u, mats):
    """Gamma_U[k, l] of the virtual uplink for given beamformers and powers."""
    T = uplink_interference(p_u, mats)
    num = p_u * np.einsum("klj,klj->kl", mats.b_vec, w) ** 2
    den = np.einsum("kli,kim,klm->kl", w, T, w)
    return num / den


def algorithm3(beta, params, cfg=None, mats=None):
    """Sum-power max-min precoding through the virtual uplink.

    Returns ``(BeamformerPowerSet, A, SolveReport)``; the report evaluates the
    resulting coefficients with the scalar SINR formulas.
    """
    cfg = cfg or DualitySolveConfig()
    Z = cfg.budget(params.L)
    if mats is None or mats.Z != Z:
        mats = build_stacked(beta, params, Z)
    p_u, residual = iterative_power_search(mats, cfg.ips_iterations)
    w = uplink_beamformers(p_u, mats)
    gamma_up = uplink_relative_power(w, p_u, mats)
    sys = build_downlink_DF(w, mats)
    p, balance = maxmin_power_given_beamformers(sys, Z, mats, w, tol=cfg.eigen_tol)
    v = w
    for _ in range(cfg.refine_passes):
        p_u = iterative_power_search(mats, cfg.ips_iterations, p0=p_u)[0]
        v = uplink_beamformers(p_u, mats)
        sys = build_downlink_DF(v, mats)
        p, balance = maxmin_power_given_beamformers(sys, Z, mats, v, tol=cfg.eigen_tol)
    bps = BeamformerPowerSet(v, p)
    A = assemble_A(bps)
    alpha = alpha_from_A(A, params)
    report = make_report(
        "alg3", alpha, beta, params,
        iterations=cfg.ips_iterations,
        info={
            "Z": Z,
            "ips_residual": residual,
            "uplink_gamma": float(np.min(gamma_up)),
            "downlink_gamma": float(np.min(relative_signal_power(A, mats))),
            "balance": balance,
            "uplink_powers": p_u,
        },
    )
    return bps, A, report
