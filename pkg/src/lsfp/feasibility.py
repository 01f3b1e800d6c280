"""Optimal max-min precoding: bisection over a second-order cone feasibility test.

Each SINR constraint becomes a cone once the sign of every signal entry is
fixed to be non-negative. The feasibility test solves the max-slack program

    minimize s  subject to  SINR[k,l](A) >= S  for all users,
                            gamma_j(A) <= s^2  (per-BS)   or
                            sum_j gamma_j(A) <= Z s^2  (sum power)

with Clarabel, plus a cap s <= 4. The target S is feasible iff the optimal
s is at most one.
"""

from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DegenerateBeamformerError, SolverFailure
from .sinr import (
    BeamformerPowerSet,
    alpha_from_A,
    assemble_A,
    bs_power,
    build_stacked,
    factor_A,
    make_report,
    sinr_scalar,
)

SLACK_TOL = 1e-8
WITNESS_RTOL = 1e-6
S_CAP = 4.0
# fallback caps tried when the solver stalls near the SINR ceiling
RETRY_CAPS = (2.0, 1.25)

_INFEASIBLE = {clarabel.SolverStatus.PrimalInfeasible, clarabel.SolverStatus.AlmostPrimalInfeasible}
_SOLVED = {clarabel.SolverStatus.Solved, clarabel.SolverStatus.AlmostSolved}


@dataclass
class FeasibilityProblem:
    """Target SINR level ``S`` with per-BS or sum-power constraints."""

    S: float
    mats: object
    mode: str = "per-bs"
    Z: float = None

    def __post_init__(self):
        if not self.S >= 0:
            raise ConfigurationError("target SINR must be non-negative")
        if self.mode not in ("per-bs", "sum"):
            raise ConfigurationError(f"unknown constraint mode {self.mode!r}")
        if self.mode == "sum":
            self.Z = float(self.mats.L if self.Z is None else self.Z)
            if not self.Z > 0:
                raise ConfigurationError("sum-power budget must be positive")


@dataclass
class FeasibilityResult:
    status: str                  # feasible | infeasible | indeterminate
    witness: np.ndarray = None   # stacked A at full power, when feasible
    slack: float = float("nan")
    solver_status: str = ""

    @property
    def feasible(self):
        return self.status == "feasible"


@dataclass(frozen=True)
class BisectionConfig:
    rel_tol: float = 1e-3        # gap tolerance relative to the initial feasible level
    max_iter: int = 60           # total feasibility checks, bracketing included
    max_indeterminate: float = 0.05
    equalize: bool = True        # re-balance the final witness to equal SINRs

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ConfigurationError("bisection tolerance must be positive")
        if self.max_iter < 2:
            raise ConfigurationError("max_iter must be at least 2")


class _ConeTemplate:
    """Sparse cone data for one fading tensor; only the sqrt(S) factor varies.

    Variable layout: X (K*L*L entries, row-major over the stacked rows of A
    after scaling row (k, j) by sqrt(btilde[j, k])), then y (L), then s.
    """

    def __init__(self, mats, mode, Z=None):
        K, L = mats.K, mats.L
        M = mats.params.M
        self.K, self.L = K, L
        nx = K * L * L
        self.n = nx + L + 1
        iy, i_s = nx, nx + L
        self.row_scale = np.sqrt(mats.btilde.T)  # [k, j]

        def xi(k, j, v):
            return (k * L + j) * L + v

        rows, cols, vals, scaled = [], [], [], []
        b, bscaled = [], []
        cones = []
        r = 0

        def entry(col, val, flag=False):
            # cone slack = b - A z, so a coefficient +val on z enters A as -val
            rows.append(r)
            cols.append(col)
            vals.append(-val)
            scaled.append(flag)

        # cap on the power scale keeps the program bounded near the
        # interference-limited SINR ceiling, where s would diverge
        entry(i_s, -1.0)
        b.append(S_CAP)  # row 0, replaced per solve
        bscaled.append(False)
        r += 1
        cones.append(clarabel.NonnegativeConeT(1))

        # power cone: s - y_j >= 0, or ||y|| <= sqrt(Z) s
        if mode == "per-bs":
            for j in range(L):
                entry(i_s, 1.0)
                entry(iy + j, -1.0)
                b.append(0.0)
                bscaled.append(False)
                r += 1
            cones.append(clarabel.NonnegativeConeT(L))
        else:
            entry(i_s, np.sqrt(Z))
            b.append(0.0)
            bscaled.append(False)
            r += 1
            for j in range(L):
                entry(iy + j, 1.0)
                b.append(0.0)
                bscaled.append(False)
                r += 1
            cones.append(clarabel.SecondOrderConeT(L + 1))

        # per-BS cones: ||rows of BS j|| <= y_j
        for j in range(L):
            entry(iy + j, 1.0)
            b.append(0.0)
            bscaled.append(False)
            r += 1
            for k in range(K):
                for v in range(L):
                    entry(xi(k, j, v), 1.0)
                    b.append(0.0)
                    bscaled.append(False)
                    r += 1
            cones.append(clarabel.SecondOrderConeT(1 + K * L))

        # user cones
        beta = mats.beta
        rho_f = mats.params.rho_f
        for k in range(K):
            for l in range(L):
                c = beta[:, k, l] / self.row_scale[k]
                g = 1.0 / c.max()
                c = c * g
                for j in range(L):
                    entry(xi(k, j, l), c[j])
                b.append(0.0)
                bscaled.append(False)
                r += 1
                # noise constant
                b.append(g / np.sqrt(M))
                bscaled.append(True)
                r += 1
                for v in range(L):
                    if v == l:
                        continue
                    for j in range(L):
                        entry(xi(k, j, v), c[j], True)
                    b.append(0.0)
                    bscaled.append(False)
                    r += 1
                w = g * np.sqrt(rho_f * beta[:, k, l] / M)
                for j in range(L):
                    entry(iy + j, w[j], True)
                    b.append(0.0)
                    bscaled.append(False)
                    r += 1
                cones.append(clarabel.SecondOrderConeT(2 + (L - 1) + L))

        self.m = r
        self.cones = cones
        self._rows = np.array(rows)
        self._cols = np.array(cols)
        self._vals = np.array(vals)
        self._scaled = np.array(scaled)
        self._b = np.array(b)
        self._bscaled = np.array(bscaled)
        self.P = sp.csc_matrix((self.n, self.n))
        self.q = np.zeros(self.n)
        self.q[i_s] = 1.0

    def data(self, S, cap=S_CAP):
        root = np.sqrt(S)
        vals = np.where(self._scaled, root * self._vals, self._vals)
        A = sp.csc_matrix((vals, (self._rows, self._cols)), shape=(self.m, self.n))
        b = np.where(self._bscaled, root * self._b, self._b)
        b[0] = cap
        return A, b

    def unpack(self, z):
        K, L = self.K, self.L
        X = np.asarray(z[: K * L * L]).reshape(K, L, L)
        return (X / self.row_scale[:, :, None]).reshape(K * L, L), float(z[-1])


def _settings(verbose=False):
    s = clarabel.DefaultSettings()
    s.verbose = verbose
    return s


def feasibility_check(prob, template=None):
    """Decide whether the target SINR ``prob.S`` is achievable.

    A feasible answer carries a witness ``A`` scaled up until its binding
    power constraint is tight. The witness is re-checked with the scalar
    SINR formulas; a mismatch is reported as indeterminate. Close to the
    interference-limited ceiling the interior-point solver can stall; the
    check is then repeated with tighter caps on the power scale, which
    leave the decision unchanged.
    """
    mats = prob.mats
    K, L = mats.K, mats.L
    if prob.S == 0:
        return FeasibilityResult("feasible", np.zeros((K * L, L)), 1.0, "trivial")
    tpl = template or _ConeTemplate(mats, prob.mode, prob.Z)
    for cap in (S_CAP,) + RETRY_CAPS:
        res = _solve_once(prob, tpl, cap)
        if res.status != "indeterminate":
            break
    return res


def _solve_once(prob, tpl, cap):
    mats = prob.mats
    A_c, b = tpl.data(prob.S, cap)
    solver = clarabel.DefaultSolver(tpl.P, tpl.q, A_c, b, tpl.cones, _settings())
    sol = solver.solve()
    status = str(sol.status)
    if sol.status in _INFEASIBLE:
        return FeasibilityResult("infeasible", solver_status=status)
    if sol.status not in _SOLVED:
        return FeasibilityResult("indeterminate", solver_status=status)
    A, s = tpl.unpack(sol.x)
    slack = 1.0 - s
    if slack < -SLACK_TOL:
        return FeasibilityResult("infeasible", slack=slack, solver_status=status)
    if not s > 0:
        return FeasibilityResult("indeterminate", slack=slack, solver_status=status)
    A = A / s
    params = mats.params
    alpha = alpha_from_A(A, params)
    gam = bs_power(alpha, mats.beta, params)
    scale = gam.max() if prob.mode == "per-bs" else gam.sum() / prob.Z
    A = A / np.sqrt(scale)
    alpha = alpha / np.sqrt(scale)
    achieved = sinr_scalar(alpha, mats.beta, params).min()
    if achieved < prob.S * (1 - WITNESS_RTOL):
        return FeasibilityResult("indeterminate", A, slack, status + " (witness check failed)")
    return FeasibilityResult("feasible", A, slack, status)


def _equalized(A, mats, mode, Z):
    """Best equal-SINR powers for the witness's beamformers."""
    from .eigen import maxmin_power_constrained

    bps = factor_A(A, mats.L)
    p, level, _ = maxmin_power_constrained(bps.v, mats, mode=mode, Z=Z)
    return assemble_A(BeamformerPowerSet(bps.v, p)), level


def bisection_maxmin(beta, params, mode="per-bs", Z=None, cfg=None, initial=None):
    """Max-min SINR by bisection over the cone feasibility test.

    Parameters
    ----------
    mode : {'per-bs', 'sum'}
    Z : float, optional
        Sum-power budget in ``'sum'`` mode (default L).
    initial : tuple (A, level), optional
        Known feasible point. By default the duality solver provides it,
        rescaled to per-BS feasibility in ``'per-bs'`` mode.

    Returns
    -------
    A : ndarray (K*L, L)
    report : SolveReport
    """
    from .duality import DualitySolveConfig, algorithm3

    cfg = cfg or BisectionConfig()
    L = params.L
    Z = float(L if Z is None else Z)
    mats = build_stacked(beta, params, Z)
    if initial is None:
        _, A0, rep0 = algorithm3(beta, params, DualitySolveConfig(Z=Z), mats=mats)
        if mode == "per-bs":
            A0 = A0 / np.sqrt(rep0.bs_power.max())
        initial = (A0, sinr_scalar(alpha_from_A(A0, params), beta, params).min())
    best_A, lo = initial
    if not lo > 0:
        raise SolverFailure("initial feasible point has zero SINR")
    tol = cfg.rel_tol * lo
    tpl = _ConeTemplate(mats, mode, Z)
    trace = []
    indeterminate = 0

    def check(S):
        nonlocal indeterminate
        res = feasibility_check(FeasibilityProblem(S, mats, mode, Z), template=tpl)
        trace.append((float(S), res.status))
        if res.status == "indeterminate":
            indeterminate += 1
        return res

    def accept(res):
        nonlocal best_A, lo
        level = sinr_scalar(alpha_from_A(res.witness, params), beta, params).min()
        if level > lo:
            best_A, lo = res.witness, level

    # upper bracket by doubling
    hi = 2.0 * lo
    while len(trace) < cfg.max_iter:
        res = check(hi)
        if res.feasible:
            accept(res)
            hi = 2.0 * max(hi, lo)
        else:
            break
    while hi - lo > tol and len(trace) < cfg.max_iter:
        mid = 0.5 * (lo + hi)
        res = check(mid)
        if res.feasible:
            accept(res)
            lo = max(lo, mid)
        else:
            hi = mid
    if trace and indeterminate / len(trace) > cfg.max_indeterminate:
        raise SolverFailure(f"{indeterminate} of {len(trace)} feasibility checks were indeterminate")

    raw_level = lo
    A = best_A
    if cfg.equalize:
        try:
            A_eq, level = _equalized(A, mats, mode, Z)
        except DegenerateBeamformerError:
            A_eq, level = None, -np.inf
        if level >= raw_level:
            A = A_eq
    alpha = alpha_from_A(A, params)
    report = make_report(
        "alg1" if mode == "per-bs" else "alg2", alpha, beta, params,
        iterations=len(trace),
        info={
            "mode": mode,
            "Z": Z,
            "trace": trace,
            "bracket": (float(lo), float(hi)),
            "indeterminate": indeterminate,
            "raw_level": float(raw_level),
            "initial_level": float(initial[1]),
        },
    )
    if indeterminate:
        report.status = "ok-with-indeterminate"
    return A, report


def algorithm1(beta, params, cfg=None):
    """Optimal precoding with one power constraint per BS."""
    return bisection_maxmin(beta, params, "per-bs", cfg=cfg)


def algorithm2(beta, params, Z=None, cfg=None):
    """Optimal precoding under the sum-power constraint ``sum_j gamma_j <= Z``."""
    return bisection_maxmin(beta, params, "sum", Z=Z, cfg=cfg)
