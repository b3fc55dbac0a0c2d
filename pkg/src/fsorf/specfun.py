"""Special functions behind the link closed forms.

Everything here reduces to evaluating Meijer G-functions G^{m,n}_{p,q}(z)
for positive real z and real parameter vectors. Two independent methods are
provided: a Slater residue-series expansion (fast path, used by the model
code) and a Mellin-Barnes contour integral (oracle, used to cross-check the
series). Keeping both honest and independent is the point; do not merge them.

Gamma-heavy products are assembled in log space with explicit sign tracking,
and the series path escalates to arbitrary precision (mpmath) whenever its
own cancellation estimate says float64 cannot reach the requested tolerance.
"""

from __future__ import annotations

import math
import threading
import warnings
from contextlib import contextmanager
from dataclasses import dataclass
from typing import NamedTuple

import mpmath as mp
import numpy as np
from scipy import integrate
from scipy.special import gammaln, gammasgn, loggamma

__all__ = [
    "EvaluationError",
    "SeriesError",
    "ContourError",
    "SeriesControl",
    "MeijerGSpec",
    "ln_gamma",
    "pochhammer",
    "hyp1f2",
    "Hyp1f2Result",
    "meijer_g_slater",
    "meijer_g_contour",
    "meijer_g",
    "collect_meijer_instances",
]

_EPS = np.finfo(float).eps
_INT_TOL = 1e-9  # below this distance to an integer, treat a spacing as degenerate


class EvaluationError(Exception):
    """A numerical evaluator could not reach its accuracy target."""


class SeriesError(EvaluationError):
    """Series summation failed; carries the partial sum for diagnostics."""

    def __init__(self, message, partial=None, terms=None):
        super().__init__(message)
        self.partial = partial
        self.terms = terms


class ContourError(EvaluationError):
    """Contour quadrature failed; carries the abscissa and tail estimate."""

    def __init__(self, message, sigma=None, tail=None):
        super().__init__(message)
        self.sigma = sigma
        self.tail = tail


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for the series evaluators."""

    rel_tol: float = 1e-10
    max_terms: int = 500
    pole_epsilon: float = 1e-6

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.pole_epsilon > 0):
            raise ValueError("rel_tol and pole_epsilon must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


_DEFAULT_CTL = SeriesControl()


def ln_gamma(x):
    """ln Gamma(x) for x > 0."""
    if x <= 0:
        raise ValueError(f"ln_gamma requires x > 0, got {x}")
    return float(gammaln(x))


def pochhammer(a, n):
    """Rising factorial (a)_n = a (a+1) ... (a+n-1), with (a)_0 = 1.

    Computed as a running product so that a <= 0 (including exact zeros of
    the product) needs no gamma-function detours.
    """
    if n < 0 or n != int(n):
        raise ValueError("n must be a non-negative integer")
    out = 1.0
    x = float(a)
    for _ in range(int(n)):
        out *= x
        x += 1.0
    return out


class Hyp1f2Result(NamedTuple):
    value: float
    terms: int


def hyp1f2(a, b1, b2, z, ctl: SeriesControl | None = None) -> Hyp1f2Result:
    """Generalized hypergeometric 1F2(a; b1, b2; z) by direct summation.

    Lower parameters sitting exactly on a non-positive integer are nudged by
    ctl.pole_epsilon before summing. Returns the value together with the
    number of terms actually used.
    """
    ctl = ctl or _DEFAULT_CTL

    def _regularize(b):
        r = round(b)
        if r <= 0 and abs(b - r) < ctl.pole_epsilon:
            return r + ctl.pole_epsilon
        return float(b)

    b1 = _regularize(b1)
    b2 = _regularize(b2)
    if a == 0:
        return Hyp1f2Result(1.0, 1)

    acc = 1.0
    term = 1.0
    for k in range(ctl.max_terms):
        term *= (a + k) * z / ((b1 + k) * (b2 + k) * (k + 1))
        acc += term
        if k >= 1 and abs(term) <= ctl.rel_tol * abs(acc):
            return Hyp1f2Result(acc, k + 2)
    raise SeriesError(
        f"1F2 did not converge in {ctl.max_terms} terms (a={a}, b=({b1},{b2}), z={z})",
        partial=acc,
        terms=ctl.max_terms,
    )


@dataclass(frozen=True)
class MeijerGSpec:
    """One G^{m,n}_{p,q}(z | a; b) instance with real parameters, z > 0."""

    m: int
    n: int
    p: int
    q: int
    a: tuple
    b: tuple
    z: float

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        object.__setattr__(self, "z", float(self.z))
        if not (0 <= self.m <= self.q and 0 <= self.n <= self.p):
            raise ValueError(f"invalid orders m={self.m}, n={self.n}, p={self.p}, q={self.q}")
        if self.p > self.q:
            raise ValueError("only p <= q instances are supported")
        if len(self.a) != self.p or len(self.b) != self.q:
            raise ValueError("parameter vector lengths must match p and q")
        if not (self.z > 0 and math.isfinite(self.z)):
            raise ValueError(f"argument must be positive and finite, got z={self.z}")

    def order_label(self):
        return f"G[{self.m},{self.n};{self.p},{self.q}](z={self.z:.6g})"


# ---------------------------------------------------------------------------
# instance collection hook (lets tests enumerate every G actually evaluated)
# ---------------------------------------------------------------------------

_collector = threading.local()


@contextmanager
def collect_meijer_instances():
    """Record every MeijerGSpec passed to meijer_g() on this thread."""
    sink = []
    prev = getattr(_collector, "sink", None)
    _collector.sink = sink
    try:
        yield sink
    finally:
        _collector.sink = prev


def _record(spec):
    sink = getattr(_collector, "sink", None)
    if sink is not None:
        sink.append(spec)


# ---------------------------------------------------------------------------
# Slater residue series
# ---------------------------------------------------------------------------

def _is_nonpos_int(x, tol=_INT_TOL):
    r = round(x)
    return r <= 0 and abs(x - r) <= tol


def _gamma_arg_ulps(t, scale):
    """Sensitivity of ln|Gamma(t)| to an eps*scale formation error in t.

    The argument t is itself a difference of parameters, so it carries
    round-off of order eps*scale; near a pole psi(t) ~ 1/dist blows that up.
    Returned in 'ulps': multiply by machine eps to get the log-error bound.
    """
    if t > 0.5:
        psi_mag = math.log(t) + 2.0
    else:
        dist = abs(t - round(t))
        psi_mag = 1.0 / max(dist, 1e-300) + 5.0
    return scale * psi_mag


def _degenerate_shifts(spec):
    """Perturbation pattern resolving integer-spaced residue bases.

    The residue series assumes the poles of the first m gamma factors are
    simple, which fails when two of b_1..b_m differ by an integer, or when
    some b_h (h <= m) exceeds a trailing b_j (j > m) by a positive integer.
    Returns per-index multipliers for the first m entries (0 = untouched).
    """
    m, q, b = spec.m, spec.q, spec.b
    flagged = [False] * m
    adj = [[] for _ in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            d = b[i] - b[j]
            if abs(d - round(d)) < _INT_TOL:
                adj[i].append(j)
                adj[j].append(i)
                flagged[i] = flagged[j] = True
        for j in range(m, q):
            if _is_nonpos_int(1.0 + b[i] - b[j]):
                flagged[i] = True

    shifts = [0] * m
    seen = [False] * m
    for root in range(m):
        if seen[root] or not flagged[root]:
            continue
        stack, comp = [root], []
        seen[root] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        for r, idx in enumerate(sorted(comp)):
            shifts[idx] = r + 1
    return shifts if any(shifts) else None


def _slater_float(spec, ctl, b_vec):
    """One float64 pass. Returns (value, abs_mass) where abs_mass bounds the
    total magnitude summed, for the caller's cancellation estimate."""
    m, n, p, q, a, z = spec.m, spec.n, spec.p, spec.q, spec.a, spec.z
    lnz = math.log(z)
    x = z if (p - m - n) % 2 == 0 else -z

    logpref = np.empty(m)
    signpref = np.empty(m)
    logmag = np.empty(m)  # prefactor log-error bound in ulps of machine eps
    for h in range(m):
        bh = b_vec[h]
        lp, sg, lm = bh * lnz, 1.0, abs(bh * lnz)
        dead = False  # a denominator gamma at a pole zeroes this residue
        for j in range(m):
            if j != h:
                t = b_vec[j] - bh
                if _is_nonpos_int(t, 0.0):
                    raise EvaluationError(
                        f"{spec.order_label()}: unresolved degeneracy "
                        f"b[{j}] - b[{h}] = {t}"
                    )
                lp += gammaln(t)
                lm += _gamma_arg_ulps(t, abs(bh) + abs(b_vec[j]))
                sg *= gammasgn(t)
        for j in range(n):
            t = 1.0 + bh - a[j]
            lp += gammaln(t)
            lm += _gamma_arg_ulps(t, 1.0 + abs(bh) + abs(a[j]))
            sg *= gammasgn(t)
        for j in range(m, q):
            t = 1.0 + bh - b_vec[j]
            if _is_nonpos_int(t, 0.0):
                dead = True
                break
            lp -= gammaln(t)
            lm += _gamma_arg_ulps(t, 1.0 + abs(bh) + abs(b_vec[j]))
            sg *= gammasgn(t)
        if not dead:
            for j in range(n, p):
                t = a[j] - bh
                if _is_nonpos_int(t, 0.0):
                    dead = True
                    break
                lp -= gammaln(t)
                lm += _gamma_arg_ulps(t, abs(bh) + abs(a[j]))
                sg *= gammasgn(t)
        if dead:
            logpref[h] = -math.inf
            signpref[h] = 0.0
            logmag[h] = 0.0
        else:
            logpref[h] = lp
            signpref[h] = sg
            logmag[h] = lm

    # Two round-off channels accumulate along the series: term k has been
    # through O(k (p+q)) multiplications, and each series parameter is itself
    # a difference of b/a entries whose formation error is relative to the
    # parameter's own (possibly tiny) magnitude.
    ops = p + q + 2
    sums = np.zeros(m)
    masses = np.zeros(m)
    for h in range(m):
        if signpref[h] == 0.0:
            continue
        bh = b_vec[h]
        num = [1.0 + bh - a[j] for j in range(p)]
        den = [1.0 + bh - b_vec[j] for j in range(q) if j != h]
        scale = 1.0 + abs(bh) + max(
            (abs(v) for v in list(a) + list(b_vec)), default=0.0
        )
        form_ulps = sum(
            scale / abs(c) for c in num + den if c != 0.0 and abs(c) < 0.5
        )
        term, acc, mass, asum = 1.0, 1.0, 1.0, 1.0
        small = 0
        for k in range(ctl.max_terms):
            r = x / (k + 1.0)
            for c in num:
                r *= c + k
            for c in den:
                r /= c + k
            term *= r
            acc += term
            asum += abs(term)
            mass += abs(term) * (1.0 + ops * (k + 1))
            if abs(term) <= ctl.rel_tol * max(abs(acc), 1e-300):
                small += 1
                if small >= 3:
                    break
            else:
                small = 0
        else:
            raise SeriesError(
                f"residue series for {spec.order_label()} branch {h} did not "
                f"converge in {ctl.max_terms} terms",
                partial=acc,
                terms=ctl.max_terms,
            )
        sums[h] = acc
        masses[h] = mass + asum * form_ulps + abs(acc) * logmag[h]

    scale = float(np.max(logpref)) if m else 0.0
    weights = signpref * np.exp(logpref - scale)
    total = float(np.dot(weights, sums))
    mass = float(np.dot(np.abs(weights), masses))
    if not math.isfinite(scale):
        return math.nan, math.inf
    return total * math.exp(scale), mass * math.exp(scale)


def _slater_mp(spec, ctl, b_vec, dps):
    """Arbitrary-precision re-summation of the same expansion."""
    m, n, p, q = spec.m, spec.n, spec.p, spec.q
    with mp.workdps(dps):
        a = [mp.mpf(v) for v in spec.a]
        b = [mp.mpf(v) for v in b_vec]
        z = mp.mpf(spec.z)
        x = z if (p - m - n) % 2 == 0 else -z
        def _pole(v):
            return v <= 0 and mp.isint(v)

        total = mp.mpf(0)
        mass = mp.mpf(0)
        for h in range(m):
            # A denominator gamma at an exact pole kills this residue, the
            # same way gammasgn() == 0 drops it on the float64 pass.
            if any(_pole(1 + b[h] - b[j]) for j in range(m, q)) or any(
                _pole(a[j] - b[h]) for j in range(n, p)
            ):
                continue
            if any(_pole(b[j] - b[h]) for j in range(m) if j != h) or any(
                _pole(1 + b[h] - a[j]) for j in range(n)
            ):
                raise EvaluationError(
                    f"{spec.order_label()}: unresolved parameter degeneracy at "
                    f"branch {h}"
                )
            pref = mp.power(z, b[h])
            for j in range(m):
                if j != h:
                    pref *= mp.gamma(b[j] - b[h])
            for j in range(n):
                pref *= mp.gamma(1 + b[h] - a[j])
            for j in range(m, q):
                pref /= mp.gamma(1 + b[h] - b[j])
            for j in range(n, p):
                pref /= mp.gamma(a[j] - b[h])
            num = [1 + b[h] - a[j] for j in range(p)]
            den = [1 + b[h] - b[j] for j in range(q) if j != h]
            term, acc, bmass = mp.mpf(1), mp.mpf(1), mp.mpf(1)
            tol = mp.mpf(10) ** (-(dps - 3))
            small = 0
            for k in range(4 * ctl.max_terms):
                r = x / (k + 1)
                for c in num:
                    r *= c + k
                for c in den:
                    r /= c + k
                term *= r
                acc += term
                bmass += abs(term)
                if abs(term) <= tol * max(abs(acc), mp.mpf(10) ** -2000):
                    small += 1
                    if small >= 3:
                        break
                else:
                    small = 0
            else:
                raise SeriesError(
                    f"high-precision residue series for {spec.order_label()} "
                    f"branch {h} did not converge",
                    partial=float(acc),
                )
            total += pref * acc
            mass += abs(pref) * bmass
        return total, mass


def _slater_eval(spec, ctl, b_vec):
    """Float64 first; re-sum in mpmath when cancellation eats the tolerance."""
    try:
        val, absmass = _slater_float(spec, ctl, b_vec)
    except OverflowError:
        val, absmass = math.nan, math.inf

    if math.isfinite(val) and val != 0.0:
        err = _EPS * absmass / abs(val)
        if err <= ctl.rel_tol:
            return val
        digits_lost = math.log10(absmass / abs(val))
    elif math.isfinite(absmass) and absmass > 0:
        digits_lost = max(math.log10(absmass) + 300, 20)
    else:
        digits_lost = 40.0

    dps = int(math.ceil(digits_lost)) + 20
    for _ in range(4):
        if dps > 1500:
            break
        total, mass = _slater_mp(spec, ctl, b_vec, dps)
        if total == 0:
            achieved = mp.mpf(10) ** (-dps) * mass
            if achieved < mp.mpf(10) ** -320:
                return 0.0
            dps = 2 * dps
            continue
        achieved = mp.mpf(10) ** (-dps + 6) * mass / abs(total)
        if achieved <= ctl.rel_tol:
            return float(total)
        dps += int(mp.ceil(mp.log10(achieved / ctl.rel_tol))) + 10
    raise SeriesError(
        f"residue series for {spec.order_label()} kept losing precision; "
        f"use meijer_g_contour",
        partial=float(val) if math.isfinite(val) else None,
    )


def meijer_g_slater(spec: MeijerGSpec, ctl: SeriesControl | None = None) -> float:
    """Evaluate G by Slater's residue expansion around the b_1..b_m poles.

    Raises SeriesError (pointing at meijer_g_contour) when the expansion is
    outside its convergence region, which for p = q means z >= 1.
    """
    ctl = ctl or _DEFAULT_CTL
    if spec.m == 0:
        raise EvaluationError("m = 0 has no residue series; use meijer_g_contour")
    if spec.p == spec.q and spec.z >= 1.0:
        raise SeriesError(
            f"residue series for {spec.order_label()} diverges for z >= 1 when "
            f"p = q; use meijer_g_contour"
        )
    for h in range(spec.m):
        for j in range(spec.n):
            if _is_nonpos_int(1.0 + spec.b[h] - spec.a[j]):
                raise EvaluationError(
                    f"{spec.order_label()}: a[{j}] collides with b[{h}] "
                    f"(non-separable pole pair)"
                )

    shifts = _degenerate_shifts(spec)
    if shifts is None:
        return _slater_eval(spec, ctl, list(spec.b))

    # Integer-spaced residue bases: split the coincident poles symmetrically
    # and average, cancelling the O(eps) error of each one-sided evaluation.
    eps = ctl.pole_epsilon
    hi = list(spec.b)
    lo = list(spec.b)
    for i, s in enumerate(shifts):
        hi[i] += s * eps
        lo[i] -= s * eps
    return 0.5 * (_slater_eval(spec, ctl, hi) + _slater_eval(spec, ctl, lo))


# ---------------------------------------------------------------------------
# Mellin-Barnes contour integral
# ---------------------------------------------------------------------------

def _contour_log_height(spec, sigma):
    """log |integrand| on the real axis, used to pick the abscissa."""
    tot = sigma * math.log(spec.z)
    for j in range(spec.m):
        tot += gammaln(spec.b[j] - sigma)
    for j in range(spec.n):
        tot += gammaln(1.0 - spec.a[j] + sigma)
    for j in range(spec.m, spec.q):
        tot -= gammaln(1.0 - spec.b[j] + sigma)
    for j in range(spec.n, spec.p):
        tot -= gammaln(spec.a[j] - sigma)
    return tot


def _pick_abscissa(spec):
    hi = min(spec.b[: spec.m]) if spec.m else None
    lo = max(a - 1.0 for a in spec.a[: spec.n]) if spec.n else None
    if hi is None:
        raise ContourError("m = 0 instances are not needed here", sigma=None)
    if lo is not None:
        if hi - lo <= 1e-9:
            raise ContourError(
                f"no separating strip: max(a)-1 = {lo} >= min(b) = {hi}", sigma=None
            )
        margin = min(0.25, 0.125 * (hi - lo))
        grid = np.linspace(lo + margin, hi - margin, 161)
    else:
        # No left pole chain; scan leftward and sit near the saddle.
        margin = 0.25
        grid = hi - margin - np.linspace(0.0, 60.0, 601)
    heights = np.array([_contour_log_height(spec, s) for s in grid])
    heights[~np.isfinite(heights)] = np.inf
    return float(grid[int(np.argmin(heights))])


def meijer_g_contour(spec: MeijerGSpec, ctl: SeriesControl | None = None) -> float:
    """Evaluate G by numerical Mellin-Barnes integration.

    Integrates along the vertical line Re s = sigma0 chosen near the saddle
    of the integrand, in panels, until the exponential decay (rate pi/2 per
    unit of 2(m+n)-p-q) has exhausted the tail.
    """
    ctl = ctl or _DEFAULT_CTL
    c_star = 2 * (spec.m + spec.n) - spec.p - spec.q
    if c_star <= 0:
        raise ContourError(
            f"{spec.order_label()}: vertical contour does not decay "
            f"(2(m+n)-p-q = {c_star})",
            sigma=None,
        )
    sigma0 = _pick_abscissa(spec)
    lnz = math.log(spec.z)
    b = np.asarray(spec.b)
    a = np.asarray(spec.a)
    m, n, p, q = spec.m, spec.n, spec.p, spec.q

    def integrand(t):
        s = sigma0 + 1j * t
        w = s * lnz
        for j in range(m):
            w += loggamma(b[j] - s)
        for j in range(n):
            w += loggamma(1.0 - a[j] + s)
        for j in range(m, q):
            w -= loggamma(1.0 - b[j] + s)
        for j in range(n, p):
            w -= loggamma(a[j] - s)
        return math.exp(w.real) * math.cos(w.imag) if w.real < 700 else math.inf

    width = max(1.0, 8.0 / c_star)
    acc = 0.0
    quiet = 0
    t0 = 0.0
    for _ in range(400):
        with warnings.catch_warnings():
            # roundoff gripes on ~1e-300 tail panels; convergence is policed
            # by the panel-decay test below instead
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            piece, _err = integrate.quad(
                integrand, t0, t0 + width, epsabs=0.0, epsrel=1e-12,
                limit=ctl.max_terms,
            )
        acc += piece
        t0 += width
        if abs(piece) <= max(1e-16 * abs(acc), 1e-320):
            quiet += 1
            if quiet >= 2:
                break
        else:
            quiet = 0
    else:
        tail = abs(piece)
        raise ContourError(
            f"{spec.order_label()}: contour quadrature did not settle by "
            f"t = {t0:.1f}",
            sigma=sigma0,
            tail=tail,
        )
    return acc / math.pi


def meijer_g(spec: MeijerGSpec, ctl: SeriesControl | None = None) -> float:
    """Default G evaluator: Slater series, contour integral as fallback."""
    _record(spec)
    try:
        return meijer_g_slater(spec, ctl)
    except SeriesError:
        return meijer_g_contour(spec, ctl)
