"""SNR-domain fading models for the optical and radio hops.

Three families: Rayleigh (RF links), negative-exponential turbulence, and
Gamma-Gamma turbulence with pointing error (GG-PE). For GG-PE the CDF is
available through three routes that cross-check each other: the Meijer-G
closed form, a power-series expansion around gamma = 0, and the small-gamma
power-law asymptote. Samplers draw from the same laws for Monte Carlo use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np
from scipy.special import gammaln, gammasgn

from .specfun import (
    EvaluationError,
    MeijerGSpec,
    SeriesControl,
    meijer_g,
)

__all__ = [
    "GammaGammaPE",
    "NegExp",
    "AsymptoticBranch",
    "rayleigh_snr_cdf",
    "negexp_snr_cdf",
    "gg_pe_snr_cdf",
    "gg_pe_snr_pdf",
    "gg_pe_asymptotic",
    "gg_series_coeffs",
    "GgSeriesCoeffs",
    "sample_snr",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class GammaGammaPE:
    """Gamma-Gamma turbulence with pointing error.

    alpha and beta are the large/small-scale scintillation shapes, xi the
    pointing-error severity. kappa is the scaling constant inside the G
    argument; it has no universal definition, so it is an explicit knob
    defaulting to xi^2/(xi^2+1), which normalizes the CDF to 1.
    """

    alpha: float
    beta: float
    xi: float
    kappa: float | None = None

    def __post_init__(self):
        if not (self.beta > 0 and self.alpha >= self.beta):
            raise ValueError("need alpha >= beta > 0")
        if not self.xi > 0:
            raise ValueError("xi must be positive")
        if self.kappa is None:
            x2 = self.xi * self.xi
            object.__setattr__(self, "kappa", x2 / (x2 + 1.0))
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @property
    def xi2(self):
        return self.xi * self.xi


@dataclass(frozen=True)
class NegExp:
    """Negative-exponential turbulence: F(gamma) = 1 - exp(-lam sqrt(gamma/mean))."""

    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")


@dataclass(frozen=True)
class AsymptoticBranch:
    """Dominant small-gamma branch of the GG-PE CDF: coefficient * gamma^exponent."""

    exponent: float
    coefficient: float


def _as_float_array(gamma):
    g = np.asarray(gamma, dtype=float)
    return g, g.ndim == 0


def rayleigh_snr_cdf(gamma, mean_snr):
    """CDF of the RF hop SNR: 1 - exp(-gamma/mean_snr)."""
    if not mean_snr > 0:
        raise ValueError("mean_snr must be positive")
    g, scalar = _as_float_array(gamma)
    out = -np.expm1(-np.maximum(g, 0.0) / mean_snr)
    return float(out) if scalar else out


def negexp_snr_cdf(gamma, mean_snr, params):
    """CDF of the FSO hop SNR under negative-exponential turbulence."""
    if not isinstance(params, NegExp):
        raise TypeError("params must be NegExp")
    if not mean_snr > 0:
        raise ValueError("mean_snr must be positive")
    g, scalar = _as_float_array(gamma)
    out = -np.expm1(-params.lam * np.sqrt(np.maximum(g, 0.0) / mean_snr))
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# Gamma-Gamma with pointing error
# ---------------------------------------------------------------------------

def _gg_norm_log(prm):
    # log of xi^2 / (Gamma(alpha) Gamma(beta))
    return math.log(prm.xi2) - gammaln(prm.alpha) - gammaln(prm.beta)


def _gg_cdf_meijer_one(g, mean_snr, prm, ctl):
    if g <= 0.0:
        return 0.0
    z = prm.alpha * prm.beta * prm.kappa * math.sqrt(g / mean_snr)
    x2 = prm.xi2
    spec = MeijerGSpec(
        3, 1, 2, 4,
        (1.0, x2 + 1.0),
        (x2, prm.alpha, prm.beta, 0.0),
        z,
    )
    val = math.exp(_gg_norm_log(prm)) * meijer_g(spec, ctl)
    if not -1e-6 <= val <= 1.0 + 1e-6:
        raise EvaluationError(f"GG-PE CDF out of range at gamma={g}: {val}")
    return min(max(val, 0.0), 1.0)


def _gg_series_prepare(prm):
    """Log-space ingredients of the gamma->0 expansion of the GG-PE CDF.

    The CDF is X0 x^{xi2/2} + sum_n Y_n x^{(n+alpha)/2} + Z_n x^{(n+beta)/2}
    with x = gamma/mean_snr; Y and Z are mirror families in alpha/beta.
    """
    al, be, x2 = prm.alpha, prm.beta, prm.xi2
    for d in (al - be, x2 - al, x2 - be):
        if abs(d - round(d)) < 1e-9:
            raise EvaluationError(
                "series expansion is degenerate when alpha, beta, xi^2 are "
                "integer-spaced; use the meijer method"
            )
    lc = math.log(al * be * prm.kappa)
    lnorm = -gammaln(al) - gammaln(be)
    lx2 = math.log(x2)
    lX0 = gammaln(al - x2) + gammaln(be - x2) + x2 * lc + lnorm
    sX0 = gammasgn(al - x2) * gammasgn(be - x2)

    def family(u, v):
        # coefficient family for powers x^{(n+u)/2}, mirrored via (u, v)
        base = (
            lx2 + gammaln(x2 - u) + gammaln(v - u) - gammaln(x2 + 1.0 - u)
            + u * lc + lnorm
        )
        sbase = gammasgn(x2 - u) * gammasgn(v - u) * gammasgn(x2 + 1.0 - u)
        return base, sbase

    baseY, sbaseY = family(al, be)
    baseZ, sbaseZ = family(be, al)
    return lX0, sX0, (baseY, sbaseY, al, be), (baseZ, sbaseZ, be, al)


def _gg_family_terms(fam, x2, lc, lnx, nmax):
    """Log magnitudes and signs of one coefficient family times its x power."""
    base, sbase, u, v = fam
    lr_num, s_num = 0.0, 1.0  # rf(u - xi2, n)
    lr_d1, lr_d2 = 0.0, 0.0   # rf(1 - xi2 + u, n), rf(1 - v + u, n)
    s_d = 1.0
    lfact = 0.0
    out_l = np.empty(nmax)
    out_s = np.empty(nmax)
    for n in range(nmax):
        lt = (base + lr_num - lr_d1 - lr_d2 - lfact
              + n * lc - math.log(n + u) + (n + u) * 0.5 * lnx)
        out_l[n] = lt
        out_s[n] = sbase * s_num * s_d
        f = u - x2 + n
        if f == 0.0:
            out_l[n + 1:] = -math.inf
            out_s[n + 1:] = 0.0
            break
        lr_num += math.log(abs(f))
        s_num *= math.copysign(1.0, f)
        d1, d2 = 1.0 - x2 + u + n, 1.0 - v + u + n
        lr_d1 += math.log(abs(d1))
        lr_d2 += math.log(abs(d2))
        s_d *= math.copysign(1.0, d1) * math.copysign(1.0, d2)
        lfact += math.log(n + 1.0)
    return out_l, out_s


def _gg_cdf_series_float(g, mean_snr, prm, ctl, nmax=200):
    x = g / mean_snr
    lnx = math.log(x)
    al, be, x2 = prm.alpha, prm.beta, prm.xi2
    lc = math.log(al * be * prm.kappa)
    lX0, sX0, famY, famZ = _gg_series_prepare(prm)
    lY, sY = _gg_family_terms(famY, x2, lc, lnx, nmax)
    lZ, sZ = _gg_family_terms(famZ, x2, lc, lnx, nmax)
    logs = np.concatenate(([lX0 + 0.5 * x2 * lnx], lY, lZ))
    signs = np.concatenate(([sX0], sY, sZ))
    top = np.max(logs)
    if not math.isfinite(top):
        raise EvaluationError("series expansion produced no finite terms")
    w = signs * np.exp(logs - top)
    total = math.exp(top) * float(np.sum(w))
    mass = math.exp(top) * float(np.sum(np.abs(w)))
    return total, mass


def _gg_cdf_series_mp(g, mean_snr, prm, dps, nmax=300):
    al, be, xi = mp.mpf(prm.alpha), mp.mpf(prm.beta), mp.mpf(prm.xi)
    kap = mp.mpf(prm.kappa)
    with mp.workdps(dps):
        x2 = xi * xi
        c = al * be * kap
        ga, gb = mp.gamma(al), mp.gamma(be)
        x = mp.mpf(g) / mp.mpf(mean_snr)
        s = mp.gamma(al - x2) * mp.gamma(be - x2) * c ** x2 / (ga * gb) * x ** (x2 / 2)
        for n in range(nmax):
            Yn = (x2 * mp.gamma(x2 - al) * mp.gamma(be - al) * mp.rf(al - x2, n)
                  * c ** (n + al)
                  / ((n + al) * ga * gb * mp.gamma(x2 + 1 - al)
                     * mp.rf(1 - x2 + al, n) * mp.rf(1 - be + al, n)
                     * mp.factorial(n)))
            Zn = (x2 * mp.gamma(x2 - be) * mp.gamma(al - be) * mp.rf(be - x2, n)
                  * c ** (n + be)
                  / ((n + be) * ga * gb * mp.gamma(x2 + 1 - be)
                     * mp.rf(1 - x2 + be, n) * mp.rf(1 - al + be, n)
                     * mp.factorial(n)))
            ds = Yn * x ** ((n + al) / 2) + Zn * x ** ((n + be) / 2)
            s += ds
            if n > 8 and abs(ds) < mp.mpf(10) ** (-dps) * abs(s):
                break
        return float(s)


def _gg_cdf_series_one(g, mean_snr, prm, ctl):
    if g <= 0.0:
        return 0.0
    total, mass = _gg_cdf_series_float(g, mean_snr, prm, ctl)
    err = _EPS * mass * 300.0  # ~nmax ulps accumulate along each family
    if total != 0.0 and err / abs(total) <= ctl.rel_tol:
        val = total
    else:
        lost = math.log10(max(mass, 1e-300) / max(abs(total), 1e-300))
        dps = max(25, int(math.ceil(lost)) + 25)
        val = _gg_cdf_series_mp(g, mean_snr, prm, dps)
    if not -1e-6 <= val <= 1.0 + 1e-6:
        raise EvaluationError(f"series CDF out of range at gamma={g}: {val}")
    return min(max(val, 0.0), 1.0)


def gg_pe_asymptotic(params, mean_snr):
    """Small-gamma power law of the GG-PE CDF: coefficient * gamma^exponent.

    The active branch is set by min(alpha, beta, xi^2); coincident leading
    exponents contribute jointly.
    """
    if not isinstance(params, GammaGammaPE):
        raise TypeError("params must be GammaGammaPE")
    if not mean_snr > 0:
        raise ValueError("mean_snr must be positive")
    al, be, x2 = params.alpha, params.beta, params.xi2
    c = al * be * params.kappa / math.sqrt(mean_snr)
    lead = min(al, be, x2)
    tol = 1e-9 * max(1.0, lead)
    coef = 0.0
    if be - lead <= tol:
        coef += (x2 * math.exp(gammaln(al - be) + gammaln(x2 - be)
                               - gammaln(al) - gammaln(be + 1.0)
                               - gammaln(x2 + 1.0 - be)) * c**be)
    if x2 - lead <= tol:
        coef += math.exp(gammaln(al - x2) + gammaln(be - x2)
                         - gammaln(al) - gammaln(be)) * gammasgn(al - x2) * gammasgn(be - x2) * c**x2
    if al - lead <= tol and al - be > tol:
        coef += (x2 * math.exp(gammaln(be - al) + gammaln(x2 - al)
                               - gammaln(be) - gammaln(al + 1.0)
                               - gammaln(x2 + 1.0 - al)) * c**al)
    if not (math.isfinite(coef) and coef > 0):
        raise EvaluationError(
            "asymptotic coefficient is degenerate for these parameters"
        )
    return AsymptoticBranch(exponent=lead / 2.0, coefficient=coef)


def gg_pe_snr_cdf(gamma, mean_snr, params, method="meijer",
                  ctl: SeriesControl | None = None):
    """CDF of the FSO hop SNR under GG-PE turbulence.

    method 'meijer' is the closed form, 'seriesA' the expansion around the
    origin, 'asymptoticB' the leading power law (useful as gamma -> 0 only;
    its value is not clipped to [0, 1]).
    """
    if not isinstance(params, GammaGammaPE):
        raise TypeError("params must be GammaGammaPE")
    if not mean_snr > 0:
        raise ValueError("mean_snr must be positive")
    ctl = ctl or SeriesControl()
    g, scalar = _as_float_array(gamma)
    if method == "meijer":
        vals = [_gg_cdf_meijer_one(v, mean_snr, params, ctl) for v in np.atleast_1d(g)]
    elif method == "seriesA":
        vals = [_gg_cdf_series_one(v, mean_snr, params, ctl) for v in np.atleast_1d(g)]
    elif method == "asymptoticB":
        branch = gg_pe_asymptotic(params, mean_snr)
        vals = [
            branch.coefficient * v**branch.exponent if v > 0 else 0.0
            for v in np.atleast_1d(g)
        ]
    else:
        raise ValueError(f"unknown method {method!r}")
    out = np.array(vals)
    return float(out[0]) if scalar else out.reshape(g.shape)


def gg_pe_snr_pdf(gamma, mean_snr, params, ctl: SeriesControl | None = None):
    """Density of the FSO hop SNR under GG-PE turbulence. Undefined at 0."""
    if not isinstance(params, GammaGammaPE):
        raise TypeError("params must be GammaGammaPE")
    if not mean_snr > 0:
        raise ValueError("mean_snr must be positive")
    ctl = ctl or SeriesControl()
    g, scalar = _as_float_array(gamma)
    if np.any(np.atleast_1d(g) <= 0.0):
        raise ValueError("density is undefined at gamma <= 0")
    x2 = params.xi2
    norm = math.exp(_gg_norm_log(params))
    vals = []
    for v in np.atleast_1d(g):
        z = params.alpha * params.beta * params.kappa * math.sqrt(v / mean_snr)
        spec = MeijerGSpec(
            3, 0, 1, 3, (x2 + 1.0,), (x2, params.alpha, params.beta), z
        )
        vals.append(norm / (2.0 * v) * meijer_g(spec, ctl))
    out = np.array(vals)
    return float(out[0]) if scalar else out.reshape(g.shape)


# ---------------------------------------------------------------------------
# series coefficients shared with the error-rate expansion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GgSeriesCoeffs:
    """Log-magnitude/sign form of the CDF expansion coefficients.

    The CDF around the origin is X0 x^{xi2/2} + sum Y_n x^{(n+alpha)/2}
    + sum Z_n x^{(n+beta)/2} with x = gamma/mean_snr; these arrays hold
    log|X0|, log|Y_n|, log|Z_n| and their signs, scale-free in mean_snr.
    """

    log_x0: float
    sign_x0: float
    log_y: np.ndarray
    sign_y: np.ndarray
    log_z: np.ndarray
    sign_z: np.ndarray


def gg_series_coeffs(params, nmax=60):
    """Expansion coefficients of the GG-PE CDF, in log space."""
    if not isinstance(params, GammaGammaPE):
        raise TypeError("params must be GammaGammaPE")
    prm = params
    al, be, x2 = prm.alpha, prm.beta, prm.xi2
    lc = math.log(al * be * prm.kappa)
    lX0, sX0, famY, famZ = _gg_series_prepare(prm)

    def family(fam):
        base, sbase, u, v = fam
        ll = np.empty(nmax)
        ss = np.empty(nmax)
        lr_num, s_num = 0.0, 1.0
        lr_den, s_den = 0.0, 1.0
        lfact = 0.0
        for n in range(nmax):
            ll[n] = base + lr_num - lr_den - lfact + n * lc - math.log(n + u)
            ss[n] = sbase * s_num * s_den
            f = u - x2 + n
            if f == 0.0:
                ll[n + 1:] = -math.inf
                ss[n + 1:] = 0.0
                break
            lr_num += math.log(abs(f))
            s_num *= math.copysign(1.0, f)
            d1, d2 = 1.0 - x2 + u + n, 1.0 - v + u + n
            lr_den += math.log(abs(d1)) + math.log(abs(d2))
            s_den *= math.copysign(1.0, d1) * math.copysign(1.0, d2)
            lfact += math.log(n + 1.0)
        return ll, ss

    lY, sY = family(famY)
    lZ, sZ = family(famZ)
    return GgSeriesCoeffs(lX0, sX0, lY, sY, lZ, sZ)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def sample_snr(params, mean_snr, rng, size=None):
    """Draw instantaneous SNR(s) from one hop's fading law.

    params is a GammaGammaPE, a NegExp, or the string 'rayleigh'. Pass a
    numpy Generator as rng; with size=None a single float comes back.
    The GG-PE route draws (pointing, large-scale, small-scale) in that fixed
    order, which reproducible simulations rely on.
    """
    if not mean_snr > 0:
        raise ValueError("mean_snr must be positive")
    n = 1 if size is None else size
    if isinstance(params, str):
        if params != "rayleigh":
            raise ValueError(f"unknown fading family {params!r}")
        g = -mean_snr * np.log1p(-rng.random(n))
    elif isinstance(params, NegExp):
        u = rng.random(n)
        g = mean_snr * (np.log1p(-u) / params.lam) ** 2
    elif isinstance(params, GammaGammaPE):
        hp = rng.random(n) ** (1.0 / params.xi2)
        xa = rng.gamma(params.alpha, 1.0 / params.alpha, n)
        xb = rng.gamma(params.beta, 1.0 / params.beta, n)
        g = mean_snr * (xa * xb * hp / params.kappa) ** 2
    else:
        raise TypeError(f"unsupported params type {type(params).__name__}")
    return float(g[0]) if size is None else g
