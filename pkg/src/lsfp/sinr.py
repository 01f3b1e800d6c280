"""SINR lower bound for large-scale fading precoding, scalar and matrix forms.

Array conventions used throughout the package:

* ``beta[j, k, l]``  fading from BS j to user k of cell l, shape (L, K, L).
* ``alpha[j, k, v]`` coefficient of BS j for user k of cell v, shape (L, K, L).
* stacked ``A`` has shape (K*L, L); row ``k*L + j`` holds BS j inside user
  group k, column ``v`` the target cell, and ``A = sqrt(M rho_f rho_r tau) alpha``.
* user (k, l) has flat index ``k*L + l``; per-user arrays are shaped (K, L).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class SystemParams:
    L: int
    K: int
    M: int
    rho_f: float
    rho_r: float
    tau: int = None

    def __post_init__(self):
        if self.tau is None:
            object.__setattr__(self, "tau", self.K)
        if min(self.L, self.K, self.M) < 1:
            raise ConfigurationError("L, K and M must be positive")
        if self.tau < self.K:
            raise ConfigurationError("training length tau must be at least K")
        if not (self.rho_f > 0 and self.rho_r > 0):
            raise ConfigurationError("normalized powers must be positive")

    @property
    def rho_r_tau(self):
        return self.rho_r * self.tau

    @property
    def a_scale(self):
        """Factor between ``alpha`` and the stacked matrix ``A``."""
        return np.sqrt(self.M * self.rho_f * self.rho_r * self.tau)

    def with_cells(self, L):
        return SystemParams(L, self.K, self.M, self.rho_f, self.rho_r, self.tau)


@dataclass
class BeamformerPowerSet:
    """Unit-norm beamformers ``v[k, l]`` (length L) and powers ``p[k, l]``."""

    v: np.ndarray
    p: np.ndarray


@dataclass
class SolveReport:
    algorithm: str
    sinr: np.ndarray
    bs_power: np.ndarray
    status: str = "ok"
    iterations: int = 0
    info: dict = field(default_factory=dict)
    alpha: np.ndarray = None

    @property
    def min_sinr(self):
        return float(np.min(self.sinr))

    @property
    def sinr_spread(self):
        """Relative spread (max - min) / max of the per-user SINRs."""
        hi = float(np.max(self.sinr))
        return (hi - self.min_sinr) / hi if hi > 0 else 0.0


def _check_dims(alpha, beta):
    if alpha.shape != beta.shape or alpha.ndim != 3 or alpha.shape[0] != alpha.shape[2]:
        raise ConfigurationError(f"shape mismatch: alpha {alpha.shape}, beta {beta.shape}")


def estimate_gain(beta, params):
    """Per (BS j, user group k) factor mapping phi to alpha, shape (L, K)."""
    L = beta.shape[0]
    own = beta[np.arange(L), :, np.arange(L)]  # beta[j, k, j]
    return np.sqrt(params.rho_r_tau) * own / (1.0 + params.rho_r_tau * beta.sum(axis=2))


def alpha_from_phi(phi, beta, params):
    phi = np.asarray(phi, dtype=float)
    _check_dims(phi, beta)
    return estimate_gain(beta, params)[:, :, None] * phi


def phi_from_alpha(alpha, beta, params):
    alpha = np.asarray(alpha, dtype=float)
    _check_dims(alpha, beta)
    return alpha / estimate_gain(beta, params)[:, :, None]


def bs_power(alpha, beta, params):
    """Average transmit power gamma_j of every BS, shape (L,)."""
    alpha = np.asarray(alpha, dtype=float)
    _check_dims(alpha, beta)
    load = 1.0 + params.rho_r_tau * beta.sum(axis=2)  # (L, K)
    return params.M * np.sum(load * np.sum(alpha**2, axis=2), axis=1)


def interference_terms(alpha, beta, params):
    """Return (J0, J1, J2), each shaped (K, L).

    J0 is the coherent signal, J1 the directed (pilot contamination)
    interference and J2 the remaining interference plus noise.
    """
    alpha = np.asarray(alpha, dtype=float)
    _check_dims(alpha, beta)
    L = beta.shape[0]
    c = params.rho_f * params.rho_r_tau
    # proj[k, l, v] = sum_j beta[j,k,l] alpha[j,k,v]
    proj = np.einsum("jkl,jkv->klv", beta, alpha)
    sq = proj**2
    diag = sq[:, np.arange(L), np.arange(L)]
    J0 = c * diag
    J1 = c * (sq.sum(axis=2) - diag)
    gamma = bs_power(alpha, beta, params)
    J2 = params.rho_f / params.M * np.einsum("jkl,j->kl", beta, gamma)
    return J0, J1, J2


def sinr_scalar(alpha, beta, params):
    """Per-user SINR lower bound, shape (K, L)."""
    J0, J1, J2 = interference_terms(alpha, beta, params)
    M = params.M
    return M * J0 / (1.0 / M + M * J1 + J2)


def rate(sinr):
    """Achievable rate log2(1 + SINR) in bits per channel use."""
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise DomainError("SINR must be non-negative")
    return np.log2(1.0 + sinr)


# -- stacked matrix forms ----------------------------------------------------

def A_from_alpha(alpha, params):
    L, K, _ = alpha.shape
    return params.a_scale * np.transpose(alpha, (1, 0, 2)).reshape(K * L, L)


def alpha_from_A(A, params):
    KL, L = A.shape
    return np.transpose(A.reshape(KL // L, L, L), (1, 0, 2)) / params.a_scale


@dataclass
class StackedMatrices:
    """Matrix-form ingredients built from one fading tensor.

    Diagonal matrices are stored by their diagonals, indexed
    ``[k, l, n, j]`` for user (k, l) and stacked row ``n*L + j``. The
    quadratic form behind ``Q[k, l]`` is ``diag(q_diag[k, l]) + bb^T`` with
    ``b = b_vec[k, l]`` placed in block k.
    """

    beta: np.ndarray
    params: SystemParams
    Z: float
    b_vec: np.ndarray        # (K, L, L): b_vec[k, l] = beta[:, k, l]
    pilot_load: np.ndarray   # (L, K): 1/(rho_r tau) + sum_s beta[j, k, s]
    bhat: np.ndarray         # (K, L, K, L)
    btilde: np.ndarray       # (L, K)
    bsum: np.ndarray         # (K, L, K, L), power-folded diagonal
    condition: np.ndarray    # (K,) equilibrated condition numbers of B^[k]

    @property
    def L(self):
        return self.beta.shape[0]

    @property
    def K(self):
        return self.beta.shape[1]

    @property
    def q_diag(self):
        return self.bsum / self.params.M

    @property
    def singular(self):
        return bool(np.any(self.condition > 1e12))

    def B_block(self, k):
        """B^[k] with entry (l, j) = beta[j, k, l]."""
        return self.beta[:, k, :].T

    def B(self):
        K, L = self.K, self.L
        out = np.zeros((K * L, K * L))
        for k in range(K):
            out[k * L:(k + 1) * L, k * L:(k + 1) * L] = self.B_block(k)
        return out

    def Bhat_matrix(self, k, l):
        return np.diag(self.bhat[k, l].reshape(-1))

    def Q(self, k, l):
        """Dense KL x KL matrix of the relative-signal-power denominator."""
        L = self.L
        out = np.diag(self.q_diag[k, l].reshape(-1))
        sl = slice(k * L, (k + 1) * L)
        out[sl, sl] += np.outer(self.b_vec[k, l], self.b_vec[k, l])
        return out

    def Q_block(self, k, l, n):
        L = self.L
        out = np.diag(self.q_diag[k, l, n])
        if n == k:
            out = out + np.outer(self.b_vec[k, l], self.b_vec[k, l])
        return out


def equilibrated_condition(Bk):
    """Condition number of a fading block after scaling each row to unit max."""
    scaled = Bk / np.max(np.abs(Bk), axis=1, keepdims=True)
    return float(np.linalg.cond(scaled))


def build_stacked(beta, params, Z=None):
    """Build the stacked matrices; ``Z`` is the sum-power budget (default L)."""
    beta = np.asarray(beta, dtype=float)
    if np.any(~(beta > 0)):
        raise DomainError("fading coefficients must be positive")
    L, K, _ = beta.shape
    if (L, K) != (params.L, params.K):
        raise ConfigurationError(f"beta shape {beta.shape} does not match L={params.L}, K={params.K}")
    Z = float(L if Z is None else Z)
    if not Z > 0:
        raise ConfigurationError("sum-power budget must be positive")
    load = 1.0 / params.rho_r_tau + beta.sum(axis=2)              # [j, n]
    b_vec = np.transpose(beta, (1, 2, 0)).copy()                  # [k, l, j]
    # bhat[k,l,n,j] = beta[j,k,l] * load[j,n]
    bhat = b_vec[:, :, None, :] * load.T[None, None, :, :]
    bsum = (1.0 / (Z * params.rho_f) + b_vec)[:, :, None, :] * load.T[None, None, :, :]
    cond = np.array([equilibrated_condition(beta[:, k, :].T) for k in range(K)])
    return StackedMatrices(beta, params, Z, b_vec, load, bhat, load / params.rho_f, bsum, cond)


def signal_matrix(A, mats):
    """BA reshaped to [k, l, v] = sum_j beta[j, k, l] A[k*L + j, v]."""
    K, L = mats.K, mats.L
    A = np.asarray(A, dtype=float)
    if A.shape != (K * L, L):
        raise ConfigurationError(f"A must have shape {(K * L, L)}, got {A.shape}")
    return np.einsum("klj,kjv->klv", mats.b_vec, A.reshape(K, L, L))


def bs_power_matrix(A, mats):
    """Per-BS power gamma_j computed from the stacked matrix, shape (L,)."""
    K, L = mats.K, mats.L
    rowpow = np.sum(np.asarray(A).reshape(K, L, L) ** 2, axis=2)  # [k, j]
    return np.einsum("jk,kj->j", mats.btilde, rowpow)


def sinr_matrix(A, mats, mode="per-bs"):
    """Per-user SINR from the stacked matrix.

    ``per-bs`` keeps the explicit 1/M noise term; ``sum`` folds the noise
    into the interference through the sum-power budget ``mats.Z``, which
    matches the scalar SINR whenever the budget is met with equality.
    """
    L = mats.L
    X = signal_matrix(A, mats)
    sq = X**2
    sig = sq[:, np.arange(L), np.arange(L)]
    cross = sq.sum(axis=2) - sig
    rowpow = np.sum(np.asarray(A).reshape(mats.K, L, L) ** 2, axis=2)  # [n, j]
    M = mats.params.M
    if mode == "per-bs":
        den = 1.0 / M + cross + np.einsum("klnj,nj->kl", mats.bhat, rowpow) / M
    elif mode == "sum":
        den = cross + np.einsum("klnj,nj->kl", mats.bsum, rowpow) / M
    else:
        raise ConfigurationError(f"unknown constraint mode {mode!r}")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(sig > 0, sig / np.where(den > 0, den, 1.0), 0.0)
    return out


def relative_signal_power(A, mats):
    """Gamma = SINR / (1 + SINR) in the power-folded (sum) form, shape (K, L)."""
    L = mats.L
    X = signal_matrix(A, mats)
    sq = X**2
    sig = sq[:, np.arange(L), np.arange(L)]
    rowpow = np.sum(np.asarray(A).reshape(mats.K, L, L) ** 2, axis=2)
    den = sq.sum(axis=2) + np.einsum("klnj,nj->kl", mats.q_diag, rowpow)
    return np.where(den > 0, sig / np.where(den > 0, den, 1.0), 0.0)


def relative_signal_power_factored(bps, mats):
    """Gamma from beamformers and powers: signal over sum of v^T Q^[kln] v p."""
    v, p = bps.v, bps.p
    proj = np.einsum("klj,klj->kl", mats.b_vec, v)
    # quadratic forms of every beamformer with every user's Q blocks
    diag_part = np.einsum("klnj,nvj,nv->kl", mats.q_diag, v**2, p)
    # rank-one part only couples users of the same group k
    cross = np.einsum("klj,kvj->klv", mats.b_vec, v) ** 2
    rank1 = np.einsum("klv,kv->kl", cross, p)
    return proj**2 * p / (diag_part + rank1)


def assemble_A(bps):
    """Stack v[k, l] * sqrt(p[k, l]) as column l of block k."""
    v = np.asarray(bps.v, dtype=float)
    K, L, _ = v.shape
    cols = v * np.sqrt(np.asarray(bps.p, dtype=float))[:, :, None]  # [k, l, j]
    return np.transpose(cols, (0, 2, 1)).reshape(K * L, L)


def factor_A(A, L):
    """Split a stacked matrix into unit-norm beamformers and powers.

    Zero columns get power 0 and the canonical beamformer e_l.
    """
    KL = A.shape[0]
    K = KL // L
    cols = np.transpose(np.asarray(A, dtype=float).reshape(K, L, L), (0, 2, 1))  # [k, l, j]
    norms = np.linalg.norm(cols, axis=2)
    v = np.where(norms[:, :, None] > 0, cols / np.where(norms > 0, norms, 1.0)[:, :, None],
                 np.broadcast_to(np.eye(L)[None], cols.shape))
    return BeamformerPowerSet(v, norms**2)


def sum_power_weights(v, mats):
    """Weights c[k, l] with sum_j gamma_j = sum_kl c[k, l] p[k, l]."""
    return np.einsum("jk,klj->kl", mats.btilde, np.asarray(v) ** 2)


def per_bs_power_weights(v, mats):
    """Weights c[j, k, l] with gamma_j = sum_kl c[j, k, l] p[k, l]."""
    return np.einsum("jk,klj->jkl", mats.btilde, np.asarray(v) ** 2)


def make_report(name, alpha, beta, params, **kwargs):
    """Evaluate a coefficient set with the scalar formulas and wrap it up."""
    return SolveReport(
        algorithm=name,
        sinr=sinr_scalar(alpha, beta, params),
        bs_power=bs_power(alpha, beta, params),
        alpha=alpha,
        **kwargs,
    )
