"""Bose functions g(n, u) = sum_{k>=1} k^-n e^{uk} and the Riemann zeta function.

Conventions: ``u`` is the exponent per unit cycle length, so physical
evaluations use u = beta * alpha <= 0. Near u = 0 the series converges
slowly and the small-|u| expansion

    g(n, u) = Gamma(1-n) (-u)^(n-1) + sum_k zeta(n-k) u^k / k!

is used instead (with a log term for integer n >= 1).
"""

import math
from functools import lru_cache

from . import _kernels
from .errors import ConvergenceError, DivergenceError, DomainError

INTEGER_TOL = 1e-9
SERIES_CAP = 10_000_000
DEFAULT_TOL = 1e-12
SWITCH_U = -0.5

_BORWEIN_N = 60


def _borwein_coeffs(n):
    d = []
    acc = 0.0
    for i in range(n + 1):
        acc += n * math.exp(
            math.lgamma(n + i) - math.lgamma(n - i + 1) - math.lgamma(2 * i + 1)
        ) * 4.0**i
        d.append(acc)
    return d


_D = _borwein_coeffs(_BORWEIN_N)


def _eta(s):
    """Dirichlet eta via Borwein's accelerated alternating sum (s >= 0)."""
    n = _BORWEIN_N
    dn = _D[n]
    total = 0.0
    for k in range(n):
        term = (_D[k] - dn) / (k + 1.0) ** s
        total += -term if k % 2 else term
    return -total / dn


@lru_cache(maxsize=4096)
def zeta_value(s: float) -> float:
    """Riemann zeta at real ``s`` != 1, continued to the whole real line."""
    s = float(s)
    if s == 1.0:
        raise DomainError("zeta has a pole at s = 1")
    if s >= 0.0:
        if s > 60.0:
            return 1.0 + 2.0**-s + 3.0**-s
        # zeta = eta / (1 - 2^(1-s)); expm1 keeps the denominator accurate near s=1
        return _eta(s) / -math.expm1((1.0 - s) * math.log(2.0))
    if s == math.floor(s) and int(s) % 2 == 0:
        return 0.0
    mag, sign = _zeta_log_abs_neg(s)
    return sign * math.exp(mag)


def _zeta_log_abs_neg(s):
    """(log|zeta(s)|, sign) for s < 0 from the reflection formula."""
    sin_part = math.sin(math.pi * s / 2.0)
    z1 = zeta_value(1.0 - s)
    log_mag = (
        s * math.log(2.0)
        + (s - 1.0) * math.log(math.pi)
        + math.log(abs(sin_part))
        + math.lgamma(1.0 - s)
        + math.log(z1)
    )
    return log_mag, (1.0 if sin_part > 0 else -1.0)


def _is_integer(n):
    return abs(n - round(n)) < INTEGER_TOL


def _zeta_term(s, k, u):
    """zeta(s) * u^k / k!, computed in log space when zeta(s) is large."""
    if u == 0.0:
        return 0.0
    log_fact = math.lgamma(k + 1.0)
    sgn_u = -1.0 if (u < 0 and k % 2) else 1.0
    if s < 0.0:
        if s == math.floor(s) and int(s) % 2 == 0:
            return 0.0
        log_mag, sign = _zeta_log_abs_neg(s)
        return sign * sgn_u * math.exp(log_mag + k * math.log(abs(u)) - log_fact)
    return zeta_value(s) * sgn_u * math.exp(k * math.log(abs(u)) - log_fact)


def bose_g_expansion(n: float, u: float) -> float:
    """Small-|u| expansion of g(n, u), valid for 0 < |u| < 2*pi.

    For u > 0 this is the analytic continuation; the non-analytic leading
    term is complex there and only its real part is returned.
    """
    n = float(n)
    u = float(u)
    if u == 0.0:
        raise DomainError("expansion is singular at u = 0; use zeta_value")
    if abs(u) >= 2.0 * math.pi:
        raise DomainError(f"expansion requires |u| < 2*pi, got u={u}")
    alpha = -u
    abs_a = abs(alpha)
    integer = _is_integer(n)
    m = int(round(n))
    skip = -1
    if integer and m >= 1:
        skip = m - 1
        # (-alpha)^(m-1)/(m-1)! * (H_{m-1} - log alpha); real part for alpha < 0
        harmonic = math.fsum(1.0 / j for j in range(1, m))
        lead = (u ** (m - 1)) / math.factorial(m - 1) * (harmonic - math.log(abs_a))
    else:
        if integer:
            n = float(m)
        phase = 1.0 if alpha > 0 else math.cos(math.pi * (n - 1.0))
        lead = math.gamma(1.0 - n) * abs_a ** (n - 1.0) * phase
    terms = [lead]
    small = 0
    k_min = int(max(n, 0.0) + 2.0 * abs(n)) + 8
    for k in range(0, 4000):
        if k == skip:
            continue
        t = _zeta_term(n - k, k, u)
        terms.append(t)
        if k > k_min:
            ref = abs(math.fsum(terms))
            small = small + 1 if abs(t) <= 1e-17 * max(ref, 1e-300) else 0
            if small >= 4:
                return math.fsum(terms)
    raise ConvergenceError(f"expansion did not converge for n={n}, u={u}")


def bose_g(n: float, u: float, tol: float = DEFAULT_TOL, max_terms: int = SERIES_CAP) -> float:
    """Direct series for g(n, u) = sum k^-n e^{uk}; zeta(n) at u = 0."""
    n = float(n)
    u = float(u)
    if not tol > 0:
        raise DomainError("tol must be positive")
    if u > 0.0:
        raise DivergenceError(f"series diverges for u > 0 (u={u})")
    if u == 0.0:
        if n <= 1.0:
            raise DivergenceError(f"series diverges at u = 0 for n <= 1 (n={n})")
        return zeta_value(n)
    value, n_terms, ok = _kernels.bose_series(n, u, tol, int(max_terms))
    if not ok:
        raise ConvergenceError(
            f"series for g({n}, {u}) not within tol after {n_terms} terms"
        )
    return value


@lru_cache(maxsize=65536)
def bose(n: float, u: float) -> float:
    """g(n, u) for u <= 0, choosing the series or the expansion by |u|."""
    n = float(n)
    u = float(u)
    if u > 0.0:
        raise DivergenceError(f"g(n, u) diverges for u > 0 (u={u})")
    if u == 0.0:
        return bose_g(n, u)
    if u <= SWITCH_U:
        return bose_g(n, u)
    return bose_g_expansion(n, u)
