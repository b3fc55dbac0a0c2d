"""End-to-end link model: user selection, AF relaying, per-hop FSO/RF pick.

The chain is: N users reach the first relay over RF (best one selected), the
first relay amplifies-and-forwards onto the first FSO hop, and each of the
remaining M-1 relay hops decodes-and-forwards whichever of its FSO or RF
links is stronger. Outage logic composes per-stage CDFs; sample-path logic
mirrors the same structure draw by draw for Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb, gammaln

from .channels import (
    GammaGammaPE,
    NegExp,
    gg_pe_snr_cdf,
    negexp_snr_cdf,
    rayleigh_snr_cdf,
)
from .specfun import EvaluationError, MeijerGSpec, SeriesControl, meijer_g

__all__ = [
    "SystemConfig",
    "HopDraw",
    "multiuser_cdf",
    "af_known_csi",
    "af_unknown_csi",
    "hop_select_cdf",
    "fso_cdf",
    "second_relay_cdf",
    "e2e_snr_from_draws",
]


@dataclass(frozen=True)
class SystemConfig:
    """Static description of one multi-hop relay link."""

    n_users: int
    n_relays: int
    mean_snr_fso: float
    mean_snr_rf: float
    csi_mode: str
    fso_turbulence: GammaGammaPE | NegExp
    gamma_th: float
    gain_c: float | None = None
    eta: float = 1.0

    def __post_init__(self):
        if self.n_users < 1 or self.n_relays < 1:
            raise ValueError("n_users and n_relays must be >= 1")
        if not (self.mean_snr_fso > 0 and self.mean_snr_rf > 0):
            raise ValueError("mean SNRs must be positive")
        if not self.gamma_th > 0:
            raise ValueError("gamma_th must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.csi_mode not in ("Known", "Unknown"):
            raise ValueError("csi_mode must be 'Known' or 'Unknown'")
        if self.csi_mode == "Unknown":
            if self.gain_c is None or not self.gain_c > 0:
                raise ValueError("Unknown CSI mode requires positive gain_c")
        elif self.gain_c is not None:
            raise ValueError("gain_c only applies to Unknown CSI mode")
        if not isinstance(self.fso_turbulence, (GammaGammaPE, NegExp)):
            raise TypeError("fso_turbulence must be GammaGammaPE or NegExp")


@dataclass(frozen=True)
class HopDraw:
    """One relay hop's pair of instantaneous SNRs."""

    snr_fso: float
    snr_rf: float

    def __post_init__(self):
        if self.snr_fso < 0 or self.snr_rf < 0:
            raise ValueError("SNR draws must be non-negative")


def multiuser_cdf(gamma, cfg: SystemConfig):
    """CDF of the best of N user->relay RF links."""
    return rayleigh_snr_cdf(gamma, cfg.mean_snr_rf) ** cfg.n_users


def af_known_csi(g1, g2, exact):
    """Relay output SNR with CSI-assisted gain.

    exact=True evaluates g1 g2/(g1+g2+1); exact=False the high-SNR floor
    min(g1, g2) that the closed forms build on.
    """
    a = np.asarray(g1, dtype=float)
    b = np.asarray(g2, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("SNRs must be non-negative")
    out = a * b / (a + b + 1.0) if exact else np.minimum(a, b)
    return float(out) if out.ndim == 0 else out


def af_unknown_csi(g1, g2, c):
    """Relay output SNR with fixed (channel-blind) gain: g1 g2/(c + g2)."""
    if not c > 0:
        raise ValueError("c must be positive")
    a = np.asarray(g1, dtype=float)
    b = np.asarray(g2, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("SNRs must be non-negative")
    out = a * b / (c + b)
    return float(out) if out.ndim == 0 else out


def fso_cdf(gamma, cfg: SystemConfig, ctl: SeriesControl | None = None):
    """CDF of a single FSO link SNR under the configured turbulence."""
    prm = cfg.fso_turbulence
    if isinstance(prm, NegExp):
        return negexp_snr_cdf(gamma, cfg.mean_snr_fso, prm)
    return gg_pe_snr_cdf(gamma, cfg.mean_snr_fso, prm, "meijer", ctl)


def hop_select_cdf(gamma, cfg: SystemConfig, ctl: SeriesControl | None = None):
    """CDF of max(FSO, RF) on one DF hop: product of the two link CDFs."""
    return fso_cdf(gamma, cfg, ctl) * rayleigh_snr_cdf(gamma, cfg.mean_snr_rf)


# ---------------------------------------------------------------------------
# first-relay output CDF
# ---------------------------------------------------------------------------

def _binom_weights(n_users):
    # expansion of the best-of-N survival: sum_k c_k e^{-(k+1) g/mean}
    k = np.arange(n_users)
    return n_users * comb(n_users - 1, k) * (-1.0) ** k / (k + 1.0)


def _unknown_gg_survival(g, cfg, prm, ctl):
    """Survival of g1 g2/(C + g2) with g1 best-of-N Rayleigh, g2 GG-PE."""
    al, be, x2 = prm.alpha, prm.beta, prm.xi2
    c = al * be * prm.kappa
    lcg = (math.log(x2) + (al + be - 3.0) * math.log(2.0) - math.log(math.pi)
           - gammaln(al) - gammaln(be))
    cg = math.exp(lcg)
    psi1 = (1.0, 0.5, (x2 + 2.0) / 2.0, (x2 + 1.0) / 2.0)
    psi2 = (x2 / 2.0, (x2 + 1.0) / 2.0, al / 2.0, (al + 1.0) / 2.0,
            be / 2.0, (be + 1.0) / 2.0, 1.0, 0.0, 0.5)
    surv = 0.0
    for k, ck in enumerate(_binom_weights(cfg.n_users)):
        z = (c * c * g * cfg.gain_c * (k + 1.0)
             / (16.0 * cfg.mean_snr_fso * cfg.mean_snr_rf))
        G = meijer_g(MeijerGSpec(7, 2, 4, 9, psi1, psi2, z), ctl)
        surv += ck * math.exp(-(k + 1.0) * g / cfg.mean_snr_rf) * (1.0 - cg * G)
    return surv


def _unknown_ne_survival(g, cfg, prm, ctl):
    """Same survival with g2 negative-exponential."""
    surv = 0.0
    for k, ck in enumerate(_binom_weights(cfg.n_users)):
        z = (prm.lam ** 2 * g * cfg.gain_c * (k + 1.0)
             / (4.0 * cfg.mean_snr_fso * cfg.mean_snr_rf))
        G = meijer_g(MeijerGSpec(3, 0, 0, 3, (), (1.0, 0.0, 0.5), z), ctl)
        surv += (ck * math.exp(-(k + 1.0) * g / cfg.mean_snr_rf)
                 * G / math.sqrt(math.pi))
    return surv


def _second_relay_raw(g, cfg: SystemConfig, ctl: SeriesControl | None):
    """Unclamped scalar first-relay output CDF; g > 0."""
    if cfg.csi_mode == "Known":
        return 1.0 - (1.0 - multiuser_cdf(g, cfg)) * (1.0 - fso_cdf(g, cfg, ctl))
    prm = cfg.fso_turbulence
    fn = (_unknown_ne_survival if isinstance(prm, NegExp)
          else _unknown_gg_survival)
    return 1.0 - fn(g, cfg, prm, ctl)


def second_relay_cdf(gamma, cfg: SystemConfig, ctl: SeriesControl | None = None):
    """CDF of the SNR delivered by the first relay onto the second hop.

    Known CSI composes best-of-N RF with the FSO link through the min
    approximation; Unknown CSI keeps the fixed-gain ratio's exact law.
    """
    g, scalar = np.asarray(gamma, dtype=float), np.ndim(gamma) == 0
    g = np.atleast_1d(g)
    out = np.empty(g.shape)
    for i, v in enumerate(g):
        if v <= 0.0:
            out[i] = 0.0
            continue
        F = _second_relay_raw(v, cfg, ctl)
        if not -1e-6 <= F <= 1.0 + 1e-6:
            raise EvaluationError(
                f"first-relay CDF out of range at gamma={v}: {F}"
            )
        out[i] = min(max(F, 0.0), 1.0)
    return float(out[0]) if scalar else out


def e2e_snr_from_draws(first_hop, later_hops, cfg: SystemConfig):
    """End-to-end equivalent SNR of one sample path.

    first_hop is the AF output SNR reaching the second relay; each later DF
    hop forwards the stronger of its FSO/RF pair; the chain is limited by
    its weakest stage.
    """
    if len(later_hops) != cfg.n_relays - 1:
        raise ValueError(
            f"need {cfg.n_relays - 1} later hops, got {len(later_hops)}"
        )
    snr = float(first_hop)
    for hop in later_hops:
        snr = min(snr, max(hop.snr_fso, hop.snr_rf))
    return snr
