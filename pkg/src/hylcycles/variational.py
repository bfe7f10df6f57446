"""Variational layer of the HYL cycle model.

The rate function on pair densities (x, y) is built from

    F_mu(x, y) = f0(beta, x) - mu (x + y) + a/2 (x + y)^2 - b/2 y^2

restricted to the cone K(kappa) = {y = 0} u {y >= kappa}. Its minimisers
are found in the chemical-potential variable s (x = p0'(beta, s)), where
every stationarity condition becomes a one-dimensional monotone equation:

* subcritical point (x1, 0):  s + a p0'(s) = mu
* supercritical point (x2, y2): a p0'(s) - (a-b)/b s = mu, left branch,
  with y2 = -s/b
* pinned point (x3, kappa): subcritical point at mu - a kappa

Transition potentials and pressures follow from comparing the values of
F at these points.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .bose import bose, zeta_value
from .errors import AmbiguityError, ConvergenceError, DomainError, HylError, NoSolutionError
from .ideal_gas import GasParams, critical_density, free_energy_f0, invert_bose

REL_BAND = 1e-9
COEXISTENCE = "coexistence"
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class HylParams:
    """Interaction strengths a > b >= 0, chemical potential mu, cutoff scale kappa."""

    a: float
    b: float
    mu: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        for name in ("a", "b", "mu", "kappa"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.a >= 0 and math.isfinite(self.a)):
            raise DomainError(f"a must be nonnegative and finite, got {self.a}")
        # a = b = 0 is the interaction-free case, used only by the simulator
        if not (0 <= self.b < self.a or self.a == self.b == 0):
            raise DomainError(f"need a > b >= 0, got a={self.a}, b={self.b}")
        if not math.isfinite(self.mu):
            raise DomainError("mu must be finite")
        if not self.kappa >= 0:
            raise DomainError(f"kappa must be in [0, inf], got {self.kappa}")

    @property
    def kappa_kind(self) -> str:
        if self.kappa == 0:
            return "zero"
        if math.isinf(self.kappa):
            return "infinite"
        return "finite"

    def with_mu(self, mu: float) -> "HylParams":
        return replace(self, mu=mu)


@dataclass(frozen=True)
class PhasePoint:
    """Pair density: x in short cycles, y in long cycles."""

    x: float
    y: float
    in_cone: bool


@dataclass(frozen=True)
class ZeroSet:
    points: tuple
    regime: str
    ambiguous: bool = False

    def rho_interval(self):
        ys = [p.y for p in self.points]
        return min(ys), max(ys)


@dataclass(frozen=True)
class TransitionPotentials:
    mu_t: float
    mu_c: float
    mu_star: float
    alpha_bar: float
    mu_r: Optional[float] = None
    mu_star_kappa: Optional[float] = None
    mu_hat_star_kappa: Optional[float] = None


@dataclass(frozen=True)
class PhaseDiagramRow:
    beta: float
    mu: float
    region: str = ""
    phase: str = ""
    mu_t: float = math.nan
    mu_c: float = math.nan
    mu_star: float = math.nan
    mu_star_kappa: Optional[float] = None
    mu_r: Optional[float] = None
    beta_t_reached: Optional[bool] = None
    pressure: float = math.nan
    rho_kappa: Union[float, str, None] = None
    delta_kappa: Union[float, str, None] = None
    error: str = ""


def in_cone(y: float, kappa: float) -> bool:
    """Membership of the long-cycle density y in {0} u [kappa, inf)."""
    if y == 0:
        return True
    if y < 0 or math.isinf(kappa):
        return False
    return y >= kappa * (1.0 - 1e-12)


def _band(v):
    return REL_BAND * max(1.0, abs(v))


# ---------------------------------------------------------------------------
# ideal-gas pieces on primitive arguments (cache friendly)


def _gas(d, beta):
    return GasParams(d, beta, 0.0)


def _pref(d, beta):
    return (4.0 * math.pi * beta) ** (-d / 2.0)


def _p0(d, beta, s):
    return _pref(d, beta) / beta * bose(1.0 + d / 2.0, beta * s)


def _p1(d, beta, s):
    if s == 0.0:
        return critical_density(d, beta)
    return _pref(d, beta) * bose(d / 2.0, beta * s)


def _mu_c(d, beta, a):
    return a * critical_density(d, beta)


def beta_t(d: int, a: float, b: float) -> float:
    """Inverse temperature above which the transition is continuous (d >= 5); inf otherwise."""
    if d < 5 or b == 0:
        return math.inf
    return (a * b / ((4.0 * math.pi) ** (d / 2.0) * (a - b)) * zeta_value(d / 2.0 - 1.0)) ** (
        2.0 / (d - 2.0)
    )


# ---------------------------------------------------------------------------
# stationary points


@lru_cache(maxsize=200_000)
def _x1_state(d, beta, a, mu):
    """(x1, s1): unique solution of s + a p0'(s) = mu, clamped at s = 0."""
    if d >= 3 and mu >= _mu_c(d, beta, a):
        return mu / a, 0.0

    def h(s):
        return s + a * _p1(d, beta, s) - mu

    if mu < 0:
        hi = mu
    elif d >= 3:
        hi = 0.0
    else:
        j = 0
        hi = -1.0
        while h(hi) <= 0:
            j += 1
            hi = -(2.0 ** -j)
            if j > 1074:
                raise ConvergenceError("no upper bracket for the subcritical point")
    if h(hi) == 0.0:
        return _p1(d, beta, hi), hi
    width = 1.0
    lo = hi - width
    while h(lo) > 0:
        width *= 2.0
        lo = hi - width
    s = brentq(h, lo, hi, xtol=1e-300, rtol=4 * _EPS, maxiter=500)
    return _p1(d, beta, s), s


@lru_cache(maxsize=4096)
def _alpha_bar(d, beta, a, b):
    """Minimiser of a p0'(s) - (a-b)/b s over s <= 0 (0 when the infimum sits at s = 0)."""
    n = d / 2.0 - 1.0
    target = (4.0 * math.pi) ** (d / 2.0) * (a - b) / (a * b) * beta ** n
    if n > 1.0 and zeta_value(n) <= target:
        return 0.0
    return invert_bose(n, target) / beta


def _psi(d, beta, a, b, s):
    return a * _p1(d, beta, s) - (a - b) / b * s


@lru_cache(maxsize=4096)
def _mu_t(d, beta, a, b):
    if b == 0:
        return math.inf
    ab = _alpha_bar(d, beta, a, b)
    if ab == 0.0:
        return _mu_c(d, beta, a)
    return _psi(d, beta, a, b, ab)


@lru_cache(maxsize=200_000)
def _x2_state(d, beta, a, b, mu):
    """(x2, y2, s2) on the left branch of a p0'(s) - (a-b)/b s = mu."""
    if b == 0:
        raise NoSolutionError("the supercritical point needs b > 0")
    ab = _alpha_bar(d, beta, a, b)
    mt = _mu_t(d, beta, a, b)
    if mu < mt:
        if mu >= mt - _band(mt):
            return _p1(d, beta, ab), -ab / b, ab
        raise NoSolutionError(f"mu={mu} is below mu_t={mt}")

    def f(s):
        return _psi(d, beta, a, b, s) - mu

    if f(ab) >= 0.0:
        s = ab
    else:
        lo = min(ab - 1.0, -(abs(mu) / a + 1.0) * a * b / (a - b) - 1.0)
        while f(lo) <= 0:
            lo = 2.0 * lo
        s = brentq(f, lo, ab, xtol=1e-300, rtol=4 * _EPS, maxiter=500)
    return _p1(d, beta, s), -s / b, s


# pressures (= -F) at the three kinds of stationary point


def _press_sub(d, beta, a, mu):
    x, s = _x1_state(d, beta, a, mu)
    return 0.5 * a * x * x + _p0(d, beta, s)


def _press_sup(d, beta, a, b, mu):
    _, _, s = _x2_state(d, beta, a, b, mu)
    return (mu - s) ** 2 / (2.0 * a) - s * s / (2.0 * b) + _p0(d, beta, s)


def _press_pinned(d, beta, a, b, kappa, mu):
    return _press_sub(d, beta, a, mu - a * kappa) + kappa * mu - 0.5 * (a - b) * kappa ** 2


# ---------------------------------------------------------------------------
# transition potentials


@lru_cache(maxsize=4096)
def _mu_star(d, beta, a, b):
    if b == 0:
        return math.inf
    mt = _mu_t(d, beta, a, b)
    if _alpha_bar(d, beta, a, b) == 0.0:
        return mt

    def delta(mu):
        return _press_sup(d, beta, a, b, mu) - _press_sub(d, beta, a, mu)

    if delta(mt) >= 0:
        return mt
    if d >= 3:
        hi = _mu_c(d, beta, a)
        if delta(hi) <= 0:
            return hi
    else:
        step = max(1.0, abs(mt))
        hi = mt + step
        while delta(hi) <= 0:
            step *= 2.0
            hi = mt + step
    return brentq(delta, mt, hi, xtol=1e-14, rtol=4 * _EPS, maxiter=500)


def _mu_r_closed(d, beta, a, b, kappa):
    return (a - b) * kappa + a * _p1(d, beta, -b * kappa)


@lru_cache(maxsize=4096)
def _mu_r(d, beta, a, b, kappa):
    # the infimum defining mu_r is attained where the supercritical point
    # has y2 = kappa, i.e. s2 = -b kappa; that point lies on the left branch
    # only when -b kappa <= alpha_bar, otherwise y2 >= kappa already at mu_t
    if -b * kappa <= _alpha_bar(d, beta, a, b):
        return _mu_r_closed(d, beta, a, b, kappa)
    return _mu_t(d, beta, a, b)


@lru_cache(maxsize=4096)
def _mu_star_kappa(d, beta, a, b, kappa):
    ms = _mu_star(d, beta, a, b)
    mr = _mu_r(d, beta, a, b, kappa)
    if mr <= ms:
        return ms

    def g(mu):
        return _press_pinned(d, beta, a, b, kappa, mu) - _press_sub(d, beta, a, mu)

    g_lo, g_hi = g(ms), g(mr)
    if g_lo >= 0:
        return ms
    if g_hi <= 0:
        return mr
    return brentq(g, ms, mr, xtol=1e-14, rtol=4 * _EPS, maxiter=500)


def _branch_minima(d, beta, a, b, kappa, mu):
    """Minima of the K-independent limit functional along its two y-branches.

    Free branch: y = clip(mu/a - x, 0, kappa) (no counter-term).
    Pinned branch: y = max(kappa, (mu - a x)/(a - b)) (counter-term active).
    Both are minimised over x, parametrising x < rho_c by s and treating the
    flat part of f0 above rho_c separately.
    """
    rho_c = critical_density(d, beta)

    def free(x, f0):
        y = min(max(mu / a - x, 0.0), kappa)
        t = x + y
        return f0 - mu * t + 0.5 * a * t * t

    def pinned(x, f0):
        y = max(kappa, (mu - a * x) / (a - b))
        t = x + y
        return f0 - mu * t + 0.5 * a * t * t - 0.5 * b * y * y

    out = []
    for branch in (free, pinned):

        def by_s(s):
            x = _p1(d, beta, s)
            return branch(x, s * x - _p0(d, beta, s))

        # stationarity gives s = mu - a(x + y) + (b-term), so this is safely left
        s_lo = -4.0 * (abs(mu) + a * kappa + 1.0)
        s_hi = 0.0 if d >= 3 else -1e-12
        r = minimize_scalar(by_s, bounds=(s_lo, s_hi), method="bounded",
                            options={"xatol": 1e-13, "maxiter": 2000})
        best = min(r.fun, by_s(s_hi))
        if d >= 3:
            f0c = -_p0(d, beta, 0.0)
            x_hi = max(rho_c, abs(mu) / a + kappa) * 2.0 + 1.0
            r2 = minimize_scalar(lambda x: branch(x, f0c), bounds=(rho_c, x_hi),
                                 method="bounded", options={"xatol": 1e-14})
            best = min(best, r2.fun, branch(rho_c, f0c))
        out.append(best)
    return out[0], out[1]


@lru_cache(maxsize=4096)
def _mu_hat_star_kappa(d, beta, a, b, kappa, n_grid=50):
    msk = _mu_star_kappa(d, beta, a, b, kappa)
    mr = _mu_r(d, beta, a, b, kappa)
    if mr <= msk:
        return msk
    tol = 1e-10

    def diff(mu):
        fr, pn = _branch_minima(d, beta, a, b, kappa, mu)
        return pn - fr

    grid = np.linspace(msk, mr, n_grid)
    vals = np.array([diff(m) for m in grid])
    signs = np.where(vals > tol, 1, np.where(vals < -tol, -1, 0))
    nz = signs[signs != 0]
    if len(nz) and np.count_nonzero(np.diff(nz)) > 1:
        raise ConvergenceError("branch comparison changes sign more than once")
    if signs[0] <= 0:
        return msk
    neg = np.nonzero(signs < 0)[0]
    if len(neg) == 0:
        return mr
    j = neg[0]
    return brentq(diff, grid[j - 1], grid[j], xtol=1e-12)


# ---------------------------------------------------------------------------
# public operations


def _key(gas, hyl):
    if hyl.a == 0:
        raise DomainError("the variational problem needs a > 0")
    return gas.d, gas.beta, hyl.a, hyl.b


def free_energy_F(gas: GasParams, hyl: HylParams, x: float, y: float) -> float:
    """F_mu(x, y), without the cone restriction."""
    t = x + y
    return free_energy_f0(gas, x) - hyl.mu * t + 0.5 * hyl.a * t * t - 0.5 * hyl.b * y * y


def x_tilde_1(gas: GasParams, hyl: HylParams) -> float:
    """Unique root of s_beta(x) = mu - a x."""
    d, beta, a, _ = _key(gas, hyl)
    return _x1_state(d, beta, a, hyl.mu)[0]


def x_tilde_2(gas: GasParams, hyl: HylParams) -> float:
    """Minimal root of s_beta(x) = -b/(a-b) (mu - a x); needs mu >= mu_t."""
    return _x2_state(gas.d, gas.beta, hyl.a, hyl.b, hyl.mu)[0]


def y_tilde(gas: GasParams, hyl: HylParams) -> float:
    """Long-cycle density (mu - a x2)/(a - b) paired with x_tilde_2."""
    return _x2_state(gas.d, gas.beta, hyl.a, hyl.b, hyl.mu)[1]


def x_tilde_3(gas: GasParams, hyl: HylParams) -> float:
    """x_tilde_1 at the shifted potential mu - a kappa."""
    if math.isinf(hyl.kappa):
        raise DomainError("x_tilde_3 needs finite kappa")
    d, beta, a, _ = _key(gas, hyl)
    return _x1_state(d, beta, a, hyl.mu - a * hyl.kappa)[0]


def alpha_bar(gas: GasParams, hyl: HylParams) -> float:
    if hyl.b == 0:
        raise DomainError("alpha_bar needs b > 0")
    return _alpha_bar(*_key(gas, hyl))


def mu_c(gas: GasParams, hyl: HylParams) -> float:
    return _mu_c(*_key(gas, hyl)[:3])


def mu_t(gas: GasParams, hyl: HylParams) -> float:
    """inf_{s<0} a p0'(s) - (a-b)/b s; +inf for b = 0 (mean-field)."""
    return _mu_t(*_key(gas, hyl))


def mu_t_closed_form_d2(beta: float, a: float, b: float) -> float:
    c2 = 4.0 * math.pi * (a - b) / (a * b)
    return a / (4.0 * math.pi) * ((1.0 + c2) * math.log1p(c2) - c2 * math.log(c2)) / beta


def _check_finite_kappa(hyl):
    if hyl.kappa_kind != "finite":
        raise DomainError("needs 0 < kappa < inf")
    if hyl.b == 0:
        raise DomainError("needs b > 0")


def mu_r(gas: GasParams, hyl: HylParams) -> float:
    """inf{s >= mu_t : x2(s) <= (s - kappa(a-b))/a}."""
    _check_finite_kappa(hyl)
    return _mu_r(*_key(gas, hyl), hyl.kappa)


def mu_r_closed_form(gas: GasParams, hyl: HylParams) -> float:
    """(a-b) kappa + a p0'(beta, -b kappa), without the validity check."""
    _check_finite_kappa(hyl)
    return _mu_r_closed(*_key(gas, hyl), hyl.kappa)


def mu_star(gas: GasParams, hyl: HylParams) -> float:
    return _mu_star(*_key(gas, hyl))


def mu_star_kappa(gas: GasParams, hyl: HylParams) -> float:
    _check_finite_kappa(hyl)
    return _mu_star_kappa(*_key(gas, hyl), hyl.kappa)


def mu_hat_star_kappa(gas: GasParams, hyl: HylParams) -> float:
    _check_finite_kappa(hyl)
    return _mu_hat_star_kappa(*_key(gas, hyl), hyl.kappa)


def transition_potentials(gas: GasParams, hyl: HylParams) -> TransitionPotentials:
    key = _key(gas, hyl)
    mc = _mu_c(gas.d, gas.beta, hyl.a)
    if hyl.b == 0:
        return TransitionPotentials(math.inf, mc, math.inf, math.nan)
    tp = TransitionPotentials(_mu_t(*key), mc, _mu_star(*key), _alpha_bar(*key))
    if hyl.kappa_kind == "finite":
        tp = replace(
            tp,
            mu_r=_mu_r(*key, hyl.kappa),
            mu_star_kappa=_mu_star_kappa(*key, hyl.kappa),
            mu_hat_star_kappa=_mu_hat_star_kappa(*key, hyl.kappa),
        )
    return tp


def _pt(x, y, kappa):
    return PhasePoint(x, y, in_cone(y, kappa))


def zero_set(gas: GasParams, hyl: HylParams) -> ZeroSet:
    d, beta, a, b = _key(gas, hyl)
    mu, kappa = hyl.mu, hyl.kappa
    x1 = _x1_state(d, beta, a, mu)[0]
    sub = _pt(x1, 0.0, kappa)
    if b == 0 or hyl.kappa_kind == "infinite":
        return ZeroSet((sub,), "subcritical")

    def supercrit():
        x2, y2, _ = _x2_state(d, beta, a, b, mu)
        return _pt(x2, y2, kappa)

    def pinned():
        return _pt(_x1_state(d, beta, a, mu - a * kappa)[0], kappa, kappa)

    ms = _mu_star(d, beta, a, b)
    if hyl.kappa_kind == "finite":
        mr = _mu_r(d, beta, a, b, kappa)
        if mr > ms:
            msk = _mu_star_kappa(d, beta, a, b, kappa)
            if abs(mu - msk) <= _band(msk):
                return _coexist(sub, pinned(), mu != msk)
            if mu < msk:
                return ZeroSet((sub,), "subcritical")
            if mu <= mr:
                return ZeroSet((pinned(),), "intermediate")
            return ZeroSet((supercrit(),), "supercritical")
    if abs(mu - ms) <= _band(ms):
        return _coexist(sub, supercrit(), mu != ms)
    if mu < ms:
        return ZeroSet((sub,), "subcritical")
    return ZeroSet((supercrit(),), "supercritical")


def _coexist(p, q, ambiguous):
    scale = max(1.0, abs(p.x), abs(p.y))
    if abs(p.x - q.x) <= 1e-12 * scale and abs(p.y - q.y) <= 1e-12 * scale:
        return ZeroSet((p,), "coexistence", ambiguous)
    return ZeroSet((p, q), "coexistence", ambiguous)


def pressure(gas: GasParams, hyl: HylParams) -> float:
    """p^(kappa) = -F_mu at a rate-function zero."""
    p = zero_set(gas, hyl).points[0]
    return -free_energy_F(gas, hyl, p.x, p.y)


def rate_function_value(gas: GasParams, hyl: HylParams, p: PhasePoint) -> float:
    """I^(kappa)(x, y) = F_mu(x, y) + p^(kappa) on K(kappa), +inf off it."""
    if p.x < 0 or not in_cone(p.y, hyl.kappa) or (hyl.kappa_kind == "infinite" and p.y != 0):
        return math.inf
    return free_energy_F(gas, hyl, p.x, p.y) + pressure(gas, hyl)


def p_sub(gas: GasParams, hyl: HylParams) -> float:
    """inf_{s<0} (mu - s)^2/(2a) + p0(beta, s), by direct 1-D minimisation."""
    d, beta, a = gas.d, gas.beta, hyl.a
    mu = hyl.mu

    def obj(s):
        return (mu - s) ** 2 / (2.0 * a) + _p0(d, beta, s)

    s_lo = min(mu, 0.0) - 1.0
    while _p1(d, beta, s_lo) >= (mu - s_lo) / a:
        s_lo = 2.0 * s_lo
    r = minimize_scalar(obj, bounds=(s_lo, 0.0), method="bounded",
                        options={"xatol": 1e-15, "maxiter": 5000})
    return min(r.fun, obj(0.0))


def p_sup(gas: GasParams, hyl: HylParams) -> float:
    """sup_{s<=alpha_bar} (mu - s)^2/(2a) - s^2/(2b) + p0(beta, s), by direct maximisation."""
    d, beta, a, b = _key(gas, hyl)
    mu = hyl.mu
    ab = _alpha_bar(d, beta, a, b)

    def obj(s):
        return -((mu - s) ** 2 / (2.0 * a) - s * s / (2.0 * b) + _p0(d, beta, s))

    s_lo = min(ab - 1.0, -(abs(mu) / a + 1.0) * a * b / (a - b) - 1.0)
    r = minimize_scalar(obj, bounds=(s_lo, ab), method="bounded",
                        options={"xatol": 1e-15, "maxiter": 5000})
    return -min(r.fun, obj(ab))


def condensate_rho(gas: GasParams, hyl: HylParams) -> float:
    """Long-cycle density at the rate-function zero."""
    zs = zero_set(gas, hyl)
    if len(zs.points) == 2:
        raise AmbiguityError(f"two zeroes at mu={hyl.mu}; condensate density undefined")
    return zs.points[0].y


def condensate_delta(gas: GasParams, hyl: HylParams) -> float:
    """Double-limit density in cycles longer than K, K -> inf."""
    _key(gas, hyl)
    mf = (hyl.mu / hyl.a - critical_density(gas.d, gas.beta))
    mf = max(mf, 0.0) if math.isfinite(mf) else 0.0
    if hyl.kappa_kind == "infinite" or hyl.b == 0:
        return mf
    if hyl.kappa_kind == "zero":
        return condensate_rho(gas, hyl)
    mh = _mu_hat_star_kappa(*_key(gas, hyl), hyl.kappa)
    if abs(hyl.mu - mh) <= _band(mh):
        raise AmbiguityError(f"mu={hyl.mu} sits at the order-parameter transition {mh}")
    if hyl.mu < mh:
        return mf
    return condensate_rho(gas, hyl)


# ---------------------------------------------------------------------------
# phase diagram


def region_label(mu: float, mt: float, mc: float) -> str:
    """A below mu_t, B above mu_c, band in between (where the transition lies)."""
    if mu < mt:
        return "A"
    if mu > mc:
        return "B"
    return "band"


def phase_diagram_row(d: int, beta: float, mu: float, a: float, b: float, kappa: float) -> PhaseDiagramRow:
    row = PhaseDiagramRow(beta=float(beta), mu=float(mu))
    try:
        gas = GasParams(d, beta)
        hyl = HylParams(a, b, mu, kappa)
        tp = transition_potentials(gas, hyl)
        bt = beta_t(d, a, b)
        row = replace(
            row,
            region=region_label(mu, tp.mu_t, tp.mu_c),
            mu_t=tp.mu_t,
            mu_c=tp.mu_c,
            mu_star=tp.mu_star,
            mu_star_kappa=tp.mu_star_kappa,
            mu_r=tp.mu_r,
            beta_t_reached=(beta >= bt) if d >= 5 else None,
        )
        zs = zero_set(gas, hyl)
        row = replace(row, phase=zs.regime, pressure=pressure(gas, hyl))
        try:
            rho = condensate_rho(gas, hyl)
        except AmbiguityError:
            rho = COEXISTENCE
        try:
            delta = condensate_delta(gas, hyl)
        except AmbiguityError:
            delta = COEXISTENCE
        row = replace(row, rho_kappa=rho, delta_kappa=delta)
    except (HylError, ValueError, ArithmeticError) as exc:
        row = replace(row, error=f"{type(exc).__name__}: {exc}")
    return row


def default_workers() -> int:
    env = os.environ.get("HYL_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def phase_diagram(d, beta_grid, mu_grid, a, b, kappa=0.0, workers=None):
    """One row per (beta, mu), ordered by beta then mu; errors go into the row."""
    beta_grid = list(beta_grid)
    mu_grid = list(mu_grid)
    if not beta_grid or not mu_grid:
        raise DomainError("grids must be nonempty")
    for g in (beta_grid, mu_grid):
        if any(y <= x for x, y in zip(g, g[1:])):
            raise DomainError("grids must be strictly increasing")
    tasks = [(d, bt, m, a, b, kappa) for bt in beta_grid for m in mu_grid]
    workers = workers or default_workers()
    if workers <= 1:
        return [phase_diagram_row(*t) for t in tasks]
    # transition potentials depend on beta only; warm them per beta first so
    # threads do not race to compute the same cached values
    with ThreadPoolExecutor(max_workers=workers) as ex:
        list(ex.map(lambda bt: phase_diagram_row(d, bt, mu_grid[0], a, b, kappa), beta_grid))
        return list(ex.map(lambda t: phase_diagram_row(*t), tasks))
