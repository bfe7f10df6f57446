"""Ideal Bose gas: cycle weights, pressure p0 and its derivatives, critical
density, the inverse density map s_beta and the free energy f0."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .bose import bose, zeta_value
from .errors import DivergenceError, DomainError

DEFAULT_ROOT_TOL = 1e-10


@dataclass(frozen=True)
class GasParams:
    """Dimension, inverse temperature and reference chemical potential."""

    d: int
    beta: float
    alpha: float = 0.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"d must be a positive integer, got {self.d}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError(f"beta must be positive and finite, got {self.beta}")
        if math.isnan(self.alpha):
            raise DomainError("alpha is NaN")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def prefactor(self) -> float:
        """(4 pi beta)^(-d/2)."""
        return (4.0 * math.pi * self.beta) ** (-self.d / 2.0)


@dataclass(frozen=True)
class CycleWeight:
    k: int
    q_k: float
    tilted: float


def cycle_weight(gas: GasParams, k: int) -> CycleWeight:
    """q_k = (4 pi beta)^(-d/2) k^(-1-d/2) and its tilt q_k e^{beta alpha k}."""
    if k < 1:
        raise DomainError("cycle length must be >= 1")
    q = gas.prefactor * float(k) ** (-1.0 - gas.d / 2.0)
    return CycleWeight(int(k), q, q * math.exp(gas.beta * gas.alpha * k))


def cycle_weights(gas: GasParams, k_max: int, alpha=None):
    """Arrays (q_k, q_k e^{beta alpha k}) for k = 1..k_max."""
    a = gas.alpha if alpha is None else alpha
    k = np.arange(1, k_max + 1, dtype=np.float64)
    q = gas.prefactor * k ** (-1.0 - gas.d / 2.0)
    return q, q * np.exp(gas.beta * a * k)


def _chem(gas, s):
    s = gas.alpha if s is None else float(s)
    if s > 0:
        raise DomainError(f"ideal-gas quantities diverge for alpha > 0 (got {s})")
    return s


def pressure_p0(gas: GasParams, s=None) -> float:
    """p0(beta, s) = (1/beta)(4 pi beta)^(-d/2) g(1 + d/2, beta s); s defaults to alpha."""
    s = _chem(gas, s)
    return gas.prefactor / gas.beta * bose(1.0 + gas.d / 2.0, gas.beta * s)


def pressure_p0_deriv(gas: GasParams, order: int, s=None) -> float:
    """First or second derivative of p0 in the chemical potential."""
    s = _chem(gas, s)
    if order == 1:
        n = gas.d / 2.0
        scale = gas.prefactor
    elif order == 2:
        n = gas.d / 2.0 - 1.0
        scale = gas.beta * gas.prefactor
    else:
        raise DomainError("order must be 1 or 2")
    if s == 0.0 and n <= 1.0:
        raise DivergenceError(
            f"derivative of order {order} diverges at alpha = 0 in d={gas.d}"
        )
    return scale * bose(n, gas.beta * s)


def critical_density(d: int, beta: float) -> float:
    """(4 pi beta)^(-d/2) zeta(d/2) for d >= 3, +inf for d = 1, 2."""
    if d <= 2:
        return math.inf
    return (4.0 * math.pi * beta) ** (-d / 2.0) * zeta_value(d / 2.0)


def invert_bose(n: float, target: float) -> float:
    """Unique u < 0 with g(n, u) = target, for target below g(n, 0)."""
    if target <= 0:
        raise DomainError("target must be positive")
    if n == 1.0:
        # g(1, u) = -log(1 - e^u); the smallest subnormal stands in for an
        # underflowed root so the result stays strictly negative
        if target < 1.0:
            return math.log(-math.expm1(-target))
        return min(math.log1p(-math.exp(-target)), -5e-324)

    def resid(u):
        return bose(n, u) - target

    # g(n, u) >= e^u, so the root lies below log(target)
    hi = min(math.log(target), -0.5)
    if resid(hi) < 0:
        j = 1
        lo = hi
        hi = -0.5
        while resid(hi) < 0:
            lo = hi
            hi = -(2.0 ** -j)
            j += 1
            if j > 1074:
                raise DomainError("target is not below the critical value")
    else:
        lo = hi - 1.0
        while resid(lo) > 0:
            hi = lo
            lo = 2.0 * lo - 1.0
    if resid(hi) == 0.0:
        return hi
    return brentq(resid, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def s_beta(gas: GasParams, x: float, tol: float = DEFAULT_ROOT_TOL) -> float:
    """Chemical potential s <= 0 at which the ideal gas has density x.

    Returns 0 for x at or above the critical density. ``tol`` is kept for
    interface symmetry; the bracketed solve runs to machine precision, which
    is always tighter.
    """
    if not x > 0:
        raise DomainError(f"x must be positive, got {x}")
    rho_c = critical_density(gas.d, gas.beta)
    if x >= rho_c:
        return 0.0
    u = invert_bose(gas.d / 2.0, x / gas.prefactor)
    return u / gas.beta


def free_energy_f0(gas: GasParams, x: float) -> float:
    """Legendre transform f0(beta, x) = s x - p0(beta, s) with s = s_beta(x)."""
    if x < 0:
        raise DomainError("x must be nonnegative")
    if x == 0:
        return 0.0
    s = s_beta(gas, x)
    return s * x - pressure_p0(gas, s)
