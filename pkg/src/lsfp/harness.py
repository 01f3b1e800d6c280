"""Monte Carlo driver: paired drops, rate statistics and output files."""

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .channel import LinkBudget, normalized_snr, read_beta_csv, sample_fading, write_beta_csv
from .duality import DualitySolveConfig, algorithm3
from .errors import ConfigurationError, LsfpError
from .feasibility import algorithm1, algorithm2
from .geometry import build_hex_torus, drop_users, neighborhoods
from .precoders import algorithm4, algorithm5, algorithm6, no_lsfp, pa_only, zf_lsfp
from .sinr import SystemParams, alpha_from_A, rate, sinr_scalar

RATES_HEADER = ["drop", "algorithm", "k", "l", "sinr", "rate"]


@dataclass
class TrialConfig:
    cells: int = 7
    users: int = 10
    antennas: int = 64
    drops: int = 200
    seed: int = 0
    algorithms: tuple = ("none", "zf", "pa", "alg3", "alg5")
    z_budget: float = None        # sum budget for alg2/alg3/alg4/pa, default L
    z_step: float = 0.5
    pa_mode: str = "sum"
    tau: int = None               # default K
    cell_radius: float = 1.0
    exclusion_radius: float = 0.0625
    shadow_sigma: float = 8.0
    bandwidth: float = 20e6
    bs_noise_figure: float = 4.0
    ue_noise_figure: float = 9.0
    bs_tx_power: float = 48.0
    ue_tx_power: float = 23.0
    out_rates: str = None
    out_summary: str = None
    dump_beta: str = None
    replay_beta: str = None
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.algorithms, str):
            self.algorithms = tuple(a.strip() for a in self.algorithms.split(",") if a.strip())
        self.algorithms = tuple(self.algorithms)
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown or not self.algorithms:
            raise ConfigurationError(f"unknown algorithm ids {unknown}; choose from {sorted(ALGORITHMS)}")
        if self.drops < 1:
            raise ConfigurationError("drops must be at least 1")
        if self.users < 1 or self.antennas < 1:
            raise ConfigurationError("users and antennas must be positive")
        if self.pa_mode not in ("sum", "per-bs"):
            raise ConfigurationError("pa_mode must be 'sum' or 'per-bs'")
        if not self.z_step > 0:
            raise ConfigurationError("z_step must be positive")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")

    @property
    def budget(self):
        return LinkBudget(self.bandwidth, self.bs_noise_figure, self.ue_noise_figure,
                          self.bs_tx_power, self.ue_tx_power, self.shadow_sigma)

    def params(self, L=None):
        rho_f, rho_r = normalized_snr(self.budget)
        return SystemParams(L or self.cells, self.users, self.antennas, rho_f, rho_r, self.tau)


@dataclass
class _Context:
    Z: float
    step: float
    pa_mode: str
    geom: object


def _alg1(beta, params, ctx):
    return alpha_from_A(algorithm1(beta, params)[0], params)


def _alg2(beta, params, ctx):
    return alpha_from_A(algorithm2(beta, params, ctx.Z)[0], params)


def _alg3(beta, params, ctx):
    return algorithm3(beta, params, DualitySolveConfig(Z=ctx.Z))[2].alpha


def _alg6(beta, params, ctx):
    if ctx.geom is None:
        raise ConfigurationError("alg6 needs a 7- or 19-cell layout")
    return algorithm6(beta, params, neighborhoods(ctx.geom), step=ctx.step)[0]


ALGORITHMS = {
    "none": lambda beta, params, ctx: no_lsfp(beta, params),
    "zf": lambda beta, params, ctx: zf_lsfp(beta, params),
    "pa": lambda beta, params, ctx: pa_only(beta, params, ctx.pa_mode, ctx.Z),
    "alg1": _alg1,
    "alg2": _alg2,
    "alg3": _alg3,
    "alg4": lambda beta, params, ctx: algorithm4(beta, params, ctx.Z)[0],
    "alg5": lambda beta, params, ctx: algorithm5(beta, params, ctx.step)[0],
    "alg6": _alg6,
}


@dataclass
class RateDataset:
    """Per-user results; ``rows`` hold (drop, algorithm, k, l, sinr, rate)."""

    algorithms: tuple
    drops: int
    rows: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)
    betas: dict = field(default_factory=dict)

    def rates(self, algorithm):
        return np.array([r[5] for r in self.rows if r[1] == algorithm])

    def min_rates(self, algorithm):
        """Minimum rate of every successful drop, in drop order."""
        per_drop = {}
        for d, a, _, _, _, rt in self.rows:
            if a == algorithm:
                per_drop[d] = min(per_drop.get(d, np.inf), rt)
        return np.array([per_drop[d] for d in sorted(per_drop)])

    @property
    def failure_rate(self):
        total = self.drops * len(self.algorithms)
        return sum(self.failures.values()) / total if total else 0.0


def _run_drop(args):
    """Solve one drop with every algorithm; returns (rows, failed algorithms, beta)."""
    drop, beta, cfg, seed_seq = args
    params = cfg.params()
    geom = build_hex_torus(cfg.cells, cfg.cell_radius, cfg.exclusion_radius) if cfg.cells in (7, 19) else None
    if beta is None:
        rng = np.random.default_rng(seed_seq)
        users = drop_users(geom, cfg.users, rng)
        beta = sample_fading(geom, users, cfg.budget, rng)
    ctx = _Context(float(cfg.cells if cfg.z_budget is None else cfg.z_budget), cfg.z_step, cfg.pa_mode, geom)
    rows, failed = [], []
    for name in cfg.algorithms:
        try:
            alpha = ALGORITHMS[name](beta, params, ctx)
            s = sinr_scalar(alpha, beta, params)
            if not np.all(np.isfinite(s)):
                raise LsfpError("non-finite SINR")
        except (LsfpError, np.linalg.LinAlgError):
            failed.append(name)
            continue
        r = rate(s)
        for (k, l), val in np.ndenumerate(s):
            rows.append((drop, name, k, l, float(val), float(r[k, l])))
    return rows, failed, beta


def _replayed(cfg):
    tensors = read_beta_csv(cfg.replay_beta)
    drops = sorted(tensors)
    for d in drops:
        L, K, _ = tensors[d].shape
        if (L, K) != (cfg.cells, cfg.users):
            raise ConfigurationError(
                f"replayed drop {d} has L={L}, K={K}; config says L={cfg.cells}, K={cfg.users}")
    return [(d, tensors[d]) for d in drops]


def run_trials(cfg):
    """Run every algorithm on the same fading tensor of each drop.

    Drop ``i`` draws positions and shadowing from the ``i``-th child of
    ``SeedSequence(cfg.seed)``, so results do not depend on execution order.
    """
    if cfg.replay_beta:
        jobs = [(d, beta, cfg, None) for d, beta in _replayed(cfg)]
    else:
        if cfg.cells not in (7, 19):
            raise ConfigurationError("random drops need cells = 7 or 19")
        seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.drops)
        jobs = [(d, None, cfg, seqs[d]) for d in range(cfg.drops)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_run_drop, jobs))
    else:
        results = [_run_drop(j) for j in jobs]
    data = RateDataset(cfg.algorithms, len(jobs), failures={a: 0 for a in cfg.algorithms})
    for (d, _, _, _), (rows, failed, beta) in zip(jobs, results):
        data.rows.extend(rows)
        data.betas[d] = beta
        for a in failed:
            data.failures[a] += 1
    return data


def outage_rate(rates, q=0.05):
    """Empirical lower q-quantile: the ceil(q n)-th smallest value (minimum at q = 0)."""
    rates = np.sort(np.asarray(rates, dtype=float).ravel())
    if rates.size == 0:
        raise ValueError("outage rate of an empty sample")
    if not 0 <= q <= 1:
        raise ValueError("quantile must lie in [0, 1]")
    idx = max(math.ceil(q * rates.size - 1e-12) - 1, 0)
    return float(rates[idx])


def empirical_cdf(values):
    """Pairs [value, P(X <= value)] of the sorted sample."""
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    return [[float(x), (i + 1) / n] for i, x in enumerate(v)]


def summarize(data, q=0.05):
    out = {}
    for a in data.algorithms:
        rates = data.rates(a)
        entry = {"algorithm": a, "drops": data.drops, "failures": data.failures.get(a, 0)}
        if rates.size:
            entry.update(r_out_5pct=outage_rate(rates, q), median_rate=float(np.median(rates)),
                         min_rate_cdf=empirical_cdf(data.min_rates(a)))
        else:
            entry.update(r_out_5pct=None, median_rate=None, min_rate_cdf=[])
        out[a] = entry
    return out


def write_rates_csv(path, data):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RATES_HEADER)
        for d, a, k, l, s, r in data.rows:
            w.writerow([d, a, k, l, repr(s), repr(r)])


def write_summary_json(path, summary):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)


def dump_betas(path, data):
    """Write all fading tensors; the drop column is omitted for a single drop."""
    drops = sorted(data.betas)
    if len(drops) == 1:
        write_beta_csv(path, data.betas[drops[0]])
        return
    for i, d in enumerate(drops):
        write_beta_csv(path, data.betas[d], drop=d, append=i > 0)


def config_fields():
    return {f.name: f for f in fields(TrialConfig)}
