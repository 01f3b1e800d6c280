"""Large-scale fading: urban-macro path loss, log-normal shadowing, link budget."""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .geometry import wrapped_distance

BOLTZMANN = 1.381e-23
REFERENCE_TEMPERATURE = 290.0


@dataclass(frozen=True)
class LinkBudget:
    bandwidth: float = 20e6          # Hz
    bs_noise_figure: float = 4.0     # dB
    ue_noise_figure: float = 9.0     # dB
    bs_tx_power: float = 48.0        # dBm
    ue_tx_power: float = 23.0        # dBm
    shadow_sigma: float = 8.0        # dB

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise DomainError("bandwidth must be positive")
        if self.shadow_sigma < 0:
            raise DomainError("shadow_sigma must be non-negative")


def db_to_linear(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def pathloss_db(d):
    """Urban-macro path gain in dB at distance ``d`` km (no shadowing)."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    out = -139.5 - 35.0 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def noise_power_dbm(budget, side):
    """Thermal noise power at the receiver on ``side`` ('bs' or 'ue'), in dBm."""
    if side == "bs":
        nf = budget.bs_noise_figure
    elif side == "ue":
        nf = budget.ue_noise_figure
    else:
        raise ValueError(f"side must be 'bs' or 'ue', got {side!r}")
    watts = REFERENCE_TEMPERATURE * BOLTZMANN * budget.bandwidth * db_to_linear(nf)
    return float(10.0 * np.log10(watts * 1000.0))


def normalized_snr(budget):
    """Return (rho_f, rho_r): transmit powers normalized by receiver noise.

    Downlink power is divided by the user-side noise, uplink power by the
    BS-side noise.
    """
    rho_f = db_to_linear(budget.bs_tx_power - noise_power_dbm(budget, "ue"))
    rho_r = db_to_linear(budget.ue_tx_power - noise_power_dbm(budget, "bs"))
    return float(rho_f), float(rho_r)


def link_distances(geom, drop):
    """Wrapped distances d[j, k, l] from BS j to user k of cell l."""
    pos = drop.positions
    return wrapped_distance(geom, pos[None, :, :, :], geom.bs_positions[:, None, None, :])


def sample_fading(geom, drop, budget, rng):
    """Draw beta[j, k, l] (linear) with i.i.d. shadowing on every link."""
    d = link_distances(geom, drop)
    shadow = rng.normal(0.0, budget.shadow_sigma, size=d.shape) if budget.shadow_sigma > 0 else 0.0
    return db_to_linear(pathloss_db(d) + shadow)


def write_beta_csv(path, beta, drop=None, append=False):
    """Write a fading tensor as rows ``j,k,l,beta`` (``drop,j,k,l,beta`` when tagged)."""
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        w = csv.writer(fh)
        if not append:
            w.writerow((["drop"] if drop is not None else []) + ["j", "k", "l", "beta"])
        for (j, k, l), b in np.ndenumerate(beta):
            row = [j, k, l, repr(float(b))]
            w.writerow(([drop] if drop is not None else []) + row)


def read_beta_csv(path):
    """Read fading tensors back. Returns a dict ``{drop: beta}`` (drop 0 if untagged)."""
    entries = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            d = int(row.get("drop", 0) or 0)
            entries.setdefault(d, []).append((int(row["j"]), int(row["k"]), int(row["l"]), float(row["beta"])))
    out = {}
    for d, rows in entries.items():
        idx = np.array([r[:3] for r in rows])
        L = idx[:, 0].max() + 1
        K = idx[:, 1].max() + 1
        beta = np.full((L, K, L), np.nan)
        beta[idx[:, 0], idx[:, 1], idx[:, 2]] = [r[3] for r in rows]
        if np.isnan(beta).any():
            raise DomainError(f"incomplete fading tensor for drop {d} in {path}")
        out[d] = beta
    return out
