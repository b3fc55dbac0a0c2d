"""Deterministic outage and DPSK BER evaluators.

Four routes: the closed-form outage composition, semi-analytic quadrature
of Pe = 1/2 int e^{-g} F(g) dg over the closed-form CDF, a series-exact
expansion of that integral for Gamma-Gamma turbulence, and its small-BER
asymptote. Negative-exponential turbulence with known CSI additionally has
a finite closed BER sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.special import comb, gammaln

from .channels import (
    AsymptoticBranch,
    GammaGammaPE,
    NegExp,
    gg_pe_asymptotic,
    gg_series_coeffs,
)
from .specfun import EvaluationError, MeijerGSpec, SeriesControl, meijer_g
from .system import SystemConfig, _second_relay_raw, hop_select_cdf

__all__ = [
    "PerfPoint",
    "QuadratureControl",
    "AsymptoticBer",
    "UnsupportedCombinationError",
    "pout_closed_form",
    "ber_from_cdf",
    "ber_quadrature",
    "ber_series_exact",
    "ber_asymptotic",
    "ber_closed_ne",
]

METRICS = ("Pout", "BER")
METHODS = ("ClosedForm", "SeriesExact", "Asymptotic", "Quadrature", "MonteCarlo")


class UnsupportedCombinationError(ValueError):
    """Requested evaluator does not cover this scheme/turbulence pairing."""


@dataclass(frozen=True)
class PerfPoint:
    """One point of a performance curve."""

    avg_snr_db: float
    metric: str
    value: float
    method: str
    stderr: float | None = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("value must be a probability")
        if (self.stderr is not None) != (self.method == "MonteCarlo"):
            raise ValueError("stderr is present exactly for MonteCarlo points")
        if self.stderr is not None and not self.stderr >= 0.0:
            raise ValueError("stderr must be non-negative")


@dataclass(frozen=True)
class QuadratureControl:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-9
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")


class AsymptoticBer(NamedTuple):
    value: float
    branch: AsymptoticBranch


# ---------------------------------------------------------------------------
# outage
# ---------------------------------------------------------------------------

def pout_closed_form(cfg: SystemConfig, gamma_th=None,
                     ctl: SeriesControl | None = None):
    """Outage probability at gamma_th (defaults to cfg.gamma_th).

    Survival product over the first-relay output and the M-1 selection
    hops. The raw value must sit in [-1e-9, 1+1e-9]; anything further out
    flags broken cancellation instead of being clamped away.
    """
    gth = cfg.gamma_th if gamma_th is None else float(gamma_th)
    if not gth > 0:
        raise ValueError("gamma_th must be positive")
    first = _second_relay_raw(gth, cfg, ctl)
    hop_surv = 1.0 - hop_select_cdf(gth, cfg, ctl)
    raw = 1.0 - (1.0 - first) * hop_surv ** (cfg.n_relays - 1)
    if not -1e-9 <= raw <= 1.0 + 1e-9:
        raise EvaluationError(
            f"closed-form outage sum escaped [0,1] at gamma_th={gth}: {raw}"
        )
    return min(max(raw, 0.0), 1.0)


# ---------------------------------------------------------------------------
# BER via quadrature
# ---------------------------------------------------------------------------

def ber_from_cdf(cdf, ctl: QuadratureControl | None = None, mean_snr_hint=1.0):
    """DPSK BER from an end-to-end SNR CDF: 1/2 int_0^inf e^{-g} cdf(g) dg.

    Integrates up to g_cut = max(50, 20*mean_snr_hint) and adds the
    analytic tail bound e^{-g_cut}/2 (the CDF is ~1 there), keeping the
    truncation error below 1e-22 of the head.
    """
    ctl = ctl or QuadratureControl()
    gcut = max(50.0, 20.0 * float(mean_snr_hint))
    edges = [e for e in (0.0, 8.0, 60.0) if e < gcut] + [gcut]

    def integrand(g):
        return 0.5 * math.exp(-g) * cdf(g)

    total, esttot = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, est = quad(integrand, lo, hi, epsabs=ctl.abs_tol,
                        epsrel=ctl.rel_tol, limit=ctl.max_subdivisions)
        total += val
        esttot += est
    total += 0.5 * math.exp(-gcut)
    if esttot > max(100.0 * ctl.abs_tol, 10.0 * ctl.rel_tol * abs(total)):
        raise EvaluationError(
            f"BER quadrature error estimate {esttot:.2e} too large"
        )
    return total


def ber_quadrature(cfg: SystemConfig, ctl: QuadratureControl | None = None,
                   series_ctl: SeriesControl | None = None):
    """Reference BER for any scheme: quadrature over the closed-form Pout."""
    hint = max(cfg.mean_snr_fso, cfg.mean_snr_rf)
    return ber_from_cdf(
        lambda g: pout_closed_form(cfg, g, series_ctl) if g > 0 else 0.0,
        ctl, hint,
    )


# ---------------------------------------------------------------------------
# BER series for Gamma-Gamma turbulence
# ---------------------------------------------------------------------------

_NMAX = 120


def _linear_coeffs(prm, nmax):
    co = gg_series_coeffs(prm, nmax)
    x0 = co.sign_x0 * math.exp(co.log_x0)
    with np.errstate(under="ignore"):
        y = co.sign_y * np.exp(co.log_y)
        z = co.sign_z * np.exp(co.log_z)
    return x0, y, z


def _conv_pow(h, j, nmax):
    out = np.zeros(nmax)
    out[0] = 1.0
    for _ in range(j):
        out = np.convolve(out, h)[:nmax]
    return out


def _gg_bracket_lists(prm, extra_unit):
    """Parameter lists of the exponential-tilted CDF-moment G-term."""
    al, be, x2 = prm.alpha, prm.beta, prm.xi2
    a_tail = ((x2 + 2.0) / 2.0, (x2 + 1.0) / 2.0)
    b_main = [x2 / 2.0, (x2 + 1.0) / 2.0, al / 2.0, (al + 1.0) / 2.0,
              be / 2.0, (be + 1.0) / 2.0]
    if extra_unit:
        b_main.append(1.0)
    return a_tail, tuple(b_main) + (0.0, 0.5)


def _gg_norm_const(prm):
    al, be, x2 = prm.alpha, prm.beta, prm.xi2
    return math.exp(math.log(x2) + (al + be - 3.0) * math.log(2.0)
                    - math.log(math.pi) - gammaln(al) - gammaln(be))


def _tilted_moment_sum(prm, t, z_b, p, x0, y, z, cg, a_tail, b_all,
                       ctl, mean_fso):
    """Inner (k1, k2, n) sum shared by the exact and both-CSI BER series."""
    al, be, x2 = prm.alpha, prm.beta, prm.xi2
    m = len(b_all) - 2  # residues at every b except the trailing (0, 1/2)
    nmax = len(y)
    inner = 0.0
    for k1 in range(t + 1):
        for k2 in range(k1 + 1):
            cc = comb(t, k1, exact=True) * comb(k1, k2, exact=True) \
                * x0 ** (t - k1)
            if cc == 0.0:
                continue
            H = np.convolve(_conv_pow(y, k1 - k2, nmax),
                            _conv_pow(z, k2, nmax))[:nmax]
            nz = np.nonzero(H)[0]
            if len(nz) == 0:
                continue
            nlast = nz[-1]
            consec = 0
            for n in range(nlast + 1):
                if H[n] == 0.0:
                    continue
                S = n + x2 * (t - k1) + al * (k1 - k2) + be * k2
                spec = MeijerGSpec(m, 3, 5, len(b_all),
                                   (-S / 2.0, 1.0, 0.5) + a_tail, b_all, z_b)
                G = meijer_g(spec, ctl)
                term = (cc * H[n] * mean_fso ** (-S / 2.0)
                        * p ** (-1.0 - S / 2.0)
                        * (math.exp(gammaln(1.0 + S / 2.0)) - cg * G))
                inner += term
                if abs(term) < ctl.rel_tol * abs(inner):
                    consec += 1
                    if consec >= 3:
                        break
                else:
                    consec = 0
            else:
                if nlast == nmax - 1:
                    raise EvaluationError(
                        f"BER series still moving at term n={nlast}"
                    )
    return inner


def ber_series_exact(cfg: SystemConfig, ctl: SeriesControl | None = None):
    """Series-exact DPSK BER for Gamma-Gamma turbulence, either CSI mode."""
    prm = cfg.fso_turbulence
    if not isinstance(prm, GammaGammaPE):
        raise UnsupportedCombinationError(
            "series BER covers Gamma-Gamma turbulence only"
        )
    ctl = ctl or SeriesControl()
    c = prm.alpha * prm.beta * prm.kappa
    cg = _gg_norm_const(prm)
    x0, y, z = _linear_coeffs(prm, _NMAX)
    N, M = cfg.n_users, cfg.n_relays
    gbF, gbR = cfg.mean_snr_fso, cfg.mean_snr_rf
    a_tail, b_all = _gg_bracket_lists(prm, extra_unit=cfg.csi_mode == "Unknown")
    tot = 1.0
    if cfg.csi_mode == "Known":
        for k in range(1, N + 1):
            for t in range(M):
                for u in range(t + 1):
                    om = (comb(N, k, exact=True) * comb(M - 1, t, exact=True)
                          * comb(t, u, exact=True) * (-1.0) ** (k + t + u))
                    p = 1.0 + (k + u) / gbR
                    z_b = c * c / (16.0 * gbF * p)
                    tot += om * _tilted_moment_sum(
                        prm, t, z_b, p, x0, y, z, cg, a_tail, b_all, ctl, gbF)
    else:
        for k in range(N):
            for t in range(M):
                for u in range(t + 1):
                    sig = (comb(M - 1, t, exact=True) * comb(t, u, exact=True)
                           * comb(N - 1, k, exact=True)
                           * (-1.0) ** (t + u + k) * N / (k + 1.0))
                    p = 1.0 + (k + u + 1.0) / gbR
                    z_b = (c * c * cfg.gain_c * (k + 1.0)
                           / (16.0 * gbF * gbR * p))
                    tot -= sig * _tilted_moment_sum(
                        prm, t, z_b, p, x0, y, z, cg, a_tail, b_all, ctl, gbF)
    return tot / 2.0


def ber_asymptotic(cfg: SystemConfig, ctl: SeriesControl | None = None):
    """High-SNR BER: CDF powers replaced by their leading power law.

    The exponential-tilted G bracket is kept exact; only the selection-hop
    CDF factor collapses to its dominant branch.
    """
    prm = cfg.fso_turbulence
    if not isinstance(prm, GammaGammaPE):
        raise UnsupportedCombinationError(
            "asymptotic BER covers Gamma-Gamma turbulence only"
        )
    ctl = ctl or SeriesControl()
    branch = gg_pe_asymptotic(prm, cfg.mean_snr_fso)
    om_lead, lead2 = branch.coefficient, branch.exponent
    c = prm.alpha * prm.beta * prm.kappa
    cg = _gg_norm_const(prm)
    N, M = cfg.n_users, cfg.n_relays
    gbF, gbR = cfg.mean_snr_fso, cfg.mean_snr_rf
    a_tail, b_all = _gg_bracket_lists(prm, extra_unit=cfg.csi_mode == "Unknown")
    m = len(b_all) - 2
    tot = 1.0
    if cfg.csi_mode == "Known":
        krange, sign = range(1, N + 1), 1.0
    else:
        krange, sign = range(N), -1.0
    for k in krange:
        for t in range(M):
            for u in range(t + 1):
                if cfg.csi_mode == "Known":
                    w = (comb(N, k, exact=True) * comb(M - 1, t, exact=True)
                         * comb(t, u, exact=True) * (-1.0) ** (k + t + u))
                    p = 1.0 + (k + u) / gbR
                    z_b = c * c / (16.0 * gbF * p)
                else:
                    w = (comb(M - 1, t, exact=True) * comb(t, u, exact=True)
                         * comb(N - 1, k, exact=True)
                         * (-1.0) ** (t + u + k) * N / (k + 1.0))
                    p = 1.0 + (k + u + 1.0) / gbR
                    z_b = (c * c * cfg.gain_c * (k + 1.0)
                           / (16.0 * gbF * gbR * p))
                S = 2.0 * lead2 * t
                spec = MeijerGSpec(m, 3, 5, len(b_all),
                                   (-S / 2.0, 1.0, 0.5) + a_tail, b_all, z_b)
                G = meijer_g(spec, ctl)
                tot += sign * w * om_lead ** t * p ** (-1.0 - S / 2.0) * (
                    math.exp(gammaln(1.0 + S / 2.0)) - cg * G)
    return AsymptoticBer(value=tot / 2.0, branch=branch)


def ber_closed_ne(cfg: SystemConfig, ctl: SeriesControl | None = None):
    """Closed-form DPSK BER for negative-exponential turbulence, known CSI."""
    prm = cfg.fso_turbulence
    if not isinstance(prm, NegExp):
        raise UnsupportedCombinationError(
            "closed BER form covers negative-exponential turbulence only"
        )
    if cfg.csi_mode != "Known":
        raise UnsupportedCombinationError(
            "no closed BER form for Unknown CSI; use ber_quadrature"
        )
    ctl = ctl or SeriesControl()
    N, M = cfg.n_users, cfg.n_relays
    gbF, gbR = cfg.mean_snr_fso, cfg.mean_snr_rf
    rt_pi = math.sqrt(math.pi)
    tot = 1.0
    for k in range(1, N + 1):
        for t in range(M):
            for u in range(t + 1):
                for v in range(t + 1):
                    lam_w = (comb(N, k, exact=True) * comb(M - 1, t, exact=True)
                             * comb(t, u, exact=True) * comb(t, v, exact=True)
                             * (-1.0) ** (k + t + u + v))
                    p = 1.0 + (k + u) / gbR
                    z_b = (prm.lam * (v + 1.0)) ** 2 / (4.0 * gbF * p)
                    G = meijer_g(
                        MeijerGSpec(2, 1, 1, 2, (0.0,), (0.0, 0.5), z_b), ctl)
                    tot += lam_w / (rt_pi * p) * G
    return tot / 2.0
