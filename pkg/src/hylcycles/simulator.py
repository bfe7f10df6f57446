"""Finite-volume cycle-count model.

Cycle counts N_k (k = 1..k_max) are independent Poisson variables with
means V q_k e^{beta alpha k} under the reference measure. The HYL
Hamiltonian

    H = -(mu - alpha) S + a S^2/(2V) - b C/(2V),
    S = sum_k k N_k,   C = sum_{k >= m} (k N_k)^2,

tilts that measure by e^{-beta H}. This module evaluates H, samples the
reference measure, computes tilted expectations exactly on tiny state
spaces, and runs a Metropolis chain for larger volumes.
"""

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
from scipy.special import gammaln, logsumexp, roots_legendre

from . import _kernels
from .errors import (
    CutoffError,
    DomainError,
    InsufficientSamplesError,
    StateSpaceError,
    TailMassError,
)
from .ideal_gas import GasParams, cycle_weights
from .variational import HylParams

EPS_TAIL = 1e-8
STATE_BUDGET = 100_000_000
K_MAX_LIMIT = 200_000
CHUNK_STEPS = 1 << 16
P_TELEPORT = 0.1
MIN_BATCHES = 20


@dataclass(frozen=True)
class VolumeSchedule:
    volume: float
    m_cutoff: int
    kappa_target: float
    k_max: int

    def __post_init__(self):
        if not self.volume > 0:
            raise DomainError("volume must be positive")
        if self.m_cutoff < 1 or self.k_max < 1:
            raise DomainError("m_cutoff and k_max must be >= 1")


@dataclass(frozen=True)
class CycleCountConfig:
    """Counts N_k for k = 1..len(counts); lambda_k = N_k / volume."""

    counts: tuple
    volume: float

    @classmethod
    def from_array(cls, arr, volume):
        return cls(tuple(int(v) for v in arr), float(volume))

    @classmethod
    def from_dict(cls, counts: dict, volume, k_max=None):
        k_max = k_max or (max(counts) if counts else 1)
        arr = [0] * k_max
        for k, n in counts.items():
            if not 1 <= k <= k_max:
                raise DomainError(f"cycle length {k} outside 1..{k_max}")
            if n < 0:
                raise DomainError("counts must be nonnegative")
            arr[k - 1] = int(n)
        return cls(tuple(arr), float(volume))

    def as_dict(self):
        return {k + 1: n for k, n in enumerate(self.counts) if n}

    def as_array(self):
        return np.asarray(self.counts, dtype=np.int64)


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int
    tau_int: float = math.nan


@dataclass
class SampleStream:
    """Post-burn-in snapshots of a chain (rows of ``counts``)."""

    counts: np.ndarray
    volume: float
    m_cutoff: int
    seed: int
    accept_rate: float = math.nan
    thin: int = 1

    def __iter__(self) -> Iterator[CycleCountConfig]:
        for row in self.counts:
            yield CycleCountConfig.from_array(row, self.volume)

    def __len__(self):
        return self.counts.shape[0]


@dataclass(frozen=True)
class ExactResult:
    pressure: float
    mean_weight: float  # E_Q[e^{-beta H} | N <= cap]
    mean_m1: float
    mean_m2: float
    tail_mass: float  # Q(some N_k > cap)
    n_states: int
    p0_truncated: float
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# schedules


def default_m_cutoff(volume: float, kappa: float) -> int:
    if kappa == 0:
        return max(1, math.ceil(math.sqrt(volume)))
    if math.isinf(kappa):
        return max(1, math.ceil(volume ** 2))
    return max(1, math.ceil(kappa * volume))


def reference_tail(gas: GasParams, k_max: int):
    """Upper bounds on the reference (density, count) per unit volume beyond k_max.

    Both tails are sums of k^-n e^{uk} with n >= 0, so the first neglected
    term over (1 - e^u) bounds them.
    """
    if gas.alpha >= 0:
        raise DomainError("reference process needs alpha < 0")
    u = gas.beta * gas.alpha
    k1 = k_max + 1.0
    geo = gas.prefactor * math.exp(u * k1) / -math.expm1(u)
    return geo * k1 ** (-gas.d / 2.0), geo * k1 ** (-1.0 - gas.d / 2.0)


def _reference_k_max(gas, volume, eps):
    k = 1
    while True:
        dens, count = reference_tail(gas, k)
        if dens < eps and count * volume < eps:
            return k
        k += 1
        if k > K_MAX_LIMIT:
            raise TailMassError("reference tail does not fall below eps within the k_max limit")


def _tilted_k_max(gas, hyl, volume, m_cut, eps):
    """Largest length a single cycle can plausibly take under the tilt."""
    beta = gas.beta
    if hyl.a > hyl.b:
        k_hi = int(min(K_MAX_LIMIT, 8 * max(1.0, hyl.mu) * volume / (hyl.a - hyl.b)
                       + 50 * math.sqrt(volume / beta) + 50))
    elif hyl.mu < 0:
        # no quadratic confinement (a = b = 0): plain geometric decay in e^{beta mu k}
        k_hi = int(min(K_MAX_LIMIT, 50 + 60.0 / (beta * -hyl.mu)))
    else:
        raise TailMassError("without interaction the tilt needs mu < 0")
    k = np.arange(1, k_hi + 1, dtype=np.float64)
    quad = np.where(k >= m_cut, hyl.a - hyl.b, hyl.a)
    logw = (np.log(volume * gas.prefactor) - (1.0 + gas.d / 2.0) * np.log(k)
            + beta * (hyl.mu * k - quad * k * k / (2.0 * volume)))
    w = np.exp(logw) * k / volume
    tail = np.cumsum(w[::-1])[::-1]  # tail[i] = sum_{j >= i+1}
    ok = np.nonzero(tail < eps)[0]
    if len(ok) == 0:
        raise TailMassError("tilted single-cycle weight does not decay within the k_max limit")
    return max(1, int(ok[0]))


def make_schedule(gas: GasParams, hyl: HylParams, volume: float, k_max: Optional[int] = None,
                  m_cutoff: Optional[int] = None, eps_tail: float = EPS_TAIL) -> VolumeSchedule:
    """Volume schedule with default cutoff and a certified truncation.

    The automatic k_max is the largest of the reference tail bound, the
    tilted single-cycle bound, and m_cutoff (finite kappa). An explicit
    ``k_max`` is only checked against the reference tail.
    """
    m = default_m_cutoff(volume, hyl.kappa) if m_cutoff is None else int(m_cutoff)
    if k_max is None:
        k_max = max(_reference_k_max(gas, volume, eps_tail), _tilted_k_max(gas, hyl, volume, m, eps_tail))
        if not math.isinf(hyl.kappa):
            k_max = max(k_max, m)
    dens, count = reference_tail(gas, k_max)
    if dens > eps_tail or count * volume > eps_tail:
        raise TailMassError(
            f"k_max={k_max} leaves reference tail density {dens:.3g}, count {count * volume:.3g} > {eps_tail}"
        )
    return VolumeSchedule(float(volume), m, hyl.kappa, int(k_max))


# ---------------------------------------------------------------------------
# Hamiltonian and reference sampling


def _check(cfg_counts, sched):
    if len(cfg_counts) > sched.k_max:
        raise DomainError("configuration has cycle lengths beyond k_max")


def hamiltonian(cfg: CycleCountConfig, hyl: HylParams, gas: GasParams, sched: VolumeSchedule) -> float:
    counts = cfg.as_array()
    _check(counts, sched)
    if cfg.volume != sched.volume:
        raise DomainError("configuration volume differs from the schedule")
    v = sched.volume
    k = np.arange(1, len(counts) + 1, dtype=np.float64)
    kn = k * counts
    s = float(kn.sum())
    c = float((kn[sched.m_cutoff - 1:] ** 2).sum())
    return -(hyl.mu - gas.alpha) * s + hyl.a * s * s / (2.0 * v) - hyl.b * c / (2.0 * v)


def _hamiltonian_rows(counts, hyl, gas, sched):
    k = np.arange(1, counts.shape[1] + 1, dtype=np.float64)
    kn = counts * k
    s = kn.sum(axis=1)
    c = (kn[:, sched.m_cutoff - 1:] ** 2).sum(axis=1)
    v = sched.volume
    return -(hyl.mu - gas.alpha) * s + hyl.a * s * s / (2.0 * v) - hyl.b * c / (2.0 * v)


def reference_rates(gas: GasParams, sched: VolumeSchedule) -> np.ndarray:
    """Poisson means V q_k e^{beta alpha k}, k = 1..k_max."""
    _, tilted = cycle_weights(gas, sched.k_max)
    return sched.volume * tilted


def sample_reference(gas: GasParams, sched: VolumeSchedule, seed: int, n: Optional[int] = None):
    """Independent Poisson counts; one config, or an (n, k_max) array when n is given."""
    dens, count = reference_tail(gas, sched.k_max)
    if dens > EPS_TAIL or count * sched.volume > EPS_TAIL:
        raise TailMassError(f"k_max={sched.k_max} violates the tail bound")
    rng = np.random.default_rng(seed)
    rates = reference_rates(gas, sched)
    if n is None:
        return CycleCountConfig.from_array(rng.poisson(rates), sched.volume)
    return rng.poisson(rates, size=(n, sched.k_max))


# ---------------------------------------------------------------------------
# exact enumeration


def exact_pressure_finite(gas: GasParams, hyl: HylParams, sched: VolumeSchedule, count_cap: int,
                          state_budget: int = STATE_BUDGET, chunk: int = 1 << 18) -> ExactResult:
    """Tilted expectations by summing over every count vector with N_k <= count_cap.

    The pressure is p0 truncated at k_max plus (1/(beta V)) log E_Q[e^{-beta H} | N <= cap].
    Conditioning on the cap makes the zero-Hamiltonian case exact; the
    neglected reference mass is returned as ``tail_mass``.
    """
    base = count_cap + 1
    k_max = sched.k_max
    n_states = base ** k_max
    if n_states > state_budget:
        raise StateSpaceError(f"{base}^{k_max} = {n_states} states exceeds the budget {state_budget}")
    rates = reference_rates(gas, sched)
    log_rates = np.log(rates)
    n_vals = np.arange(base)
    # log Poisson pmf table, shape (k_max, base)
    log_pmf = n_vals[None, :] * log_rates[:, None] - rates[:, None] - gammaln(n_vals + 1.0)[None, :]
    log_in_cap = np.log(np.exp(log_pmf).sum(axis=1)).sum()
    tail_mass = -math.expm1(log_in_cap)
    k = np.arange(1, k_max + 1, dtype=np.float64)
    powers = base ** np.arange(k_max, dtype=np.int64)
    m = sched.m_cutoff
    beta = gas.beta

    lw_parts, lq_parts, m1_parts, m2_parts = [], [], [], []
    h_min = math.inf
    for start in range(0, n_states, chunk):
        idx = np.arange(start, min(start + chunk, n_states), dtype=np.int64)
        counts = (idx[:, None] // powers[None, :]) % base
        lp = log_pmf[np.arange(k_max)[None, :], counts].sum(axis=1)
        h = _hamiltonian_rows(counts.astype(np.float64), hyl, gas, sched)
        h_min = min(h_min, float(h.min()))
        lw = lp - beta * h
        kn = counts * k
        m1 = kn[:, : m - 1].sum(axis=1) / sched.volume
        m2 = kn[:, m - 1:].sum(axis=1) / sched.volume
        lq_parts.append(logsumexp(lp))
        lw_parts.append(logsumexp(lw))
        # log of sum M e^{lw}; M >= 0, zero entries contribute nothing
        m1_parts.append(logsumexp(lw, b=m1))
        m2_parts.append(logsumexp(lw, b=m2))
    if not math.isfinite(h_min):
        raise DomainError("Hamiltonian is not bounded below on the truncated space")
    log_q = logsumexp(lq_parts)
    log_w = logsumexp(lw_parts)
    log_mean_w = log_w - log_q
    mean_m1 = math.exp(logsumexp(m1_parts) - log_w)
    mean_m2 = math.exp(logsumexp(m2_parts) - log_w)
    p0_trunc = float(rates.sum()) / (beta * sched.volume)
    return ExactResult(
        pressure=p0_trunc + log_mean_w / (beta * sched.volume),
        mean_weight=math.exp(log_mean_w),
        mean_m1=mean_m1,
        mean_m2=mean_m2,
        tail_mass=tail_mass,
        n_states=n_states,
        p0_truncated=p0_trunc,
        extra={"log_mean_weight": log_mean_w, "h_min": h_min},
    )


# ---------------------------------------------------------------------------
# Metropolis chain


def _run_chain(gas, sched, drift, a, b, n_steps, burn_in, seed, thin=1, count_cap=None,
               p_teleport=P_TELEPORT, init=None):
    if not n_steps > burn_in >= 0:
        raise DomainError("need n_steps > burn_in >= 0")
    thin = max(1, int(thin))
    rates = reference_rates(gas, sched)
    log_rates = np.log(rates)
    cdf = np.cumsum(rates)
    counts = np.zeros(sched.k_max, dtype=np.int64) if init is None else np.array(init, dtype=np.int64)
    if counts.shape != (sched.k_max,):
        raise DomainError("initial configuration has the wrong length")
    k = np.arange(1, sched.k_max + 1, dtype=np.float64)
    kn = k * counts
    state = np.array([kn.sum(), (kn[sched.m_cutoff - 1:] ** 2).sum()], dtype=np.float64)
    n_rows = (n_steps - burn_in + thin - 1) // thin
    out = np.zeros((n_rows, sched.k_max), dtype=np.int32)
    rng = np.random.default_rng(seed)
    cap = -1 if count_cap is None else int(count_cap)
    accepted = 0
    rows = 0
    for step0 in range(0, n_steps, CHUNK_STEPS):
        n = min(CHUNK_STEPS, n_steps - step0)
        uni = rng.random((n, 4))
        acc, r = _kernels.mh_chain(counts, cdf, log_rates, float(sched.volume), float(gas.beta),
                                   float(drift), float(a), float(b), int(sched.m_cutoff), cap,
                                   float(p_teleport), uni, step0, burn_in, thin, out, rows, state)
        accepted += acc
        rows += r
    return out[:rows], accepted / n_steps


def default_thin(n_steps, burn_in, max_rows=200_000):
    return max(1, -(-(n_steps - burn_in) // max_rows))


def mcmc_sample(gas: GasParams, hyl: HylParams, sched: VolumeSchedule, n_steps: int, burn_in: int,
                seed: int, thin: Optional[int] = None, count_cap: Optional[int] = None,
                p_teleport: float = P_TELEPORT, init=None) -> SampleStream:
    """Metropolis chain targeting Q tilted by e^{-beta H}; deterministic given seed."""
    if gas.alpha >= 0:
        raise DomainError("reference process needs alpha < 0")
    thin = default_thin(n_steps, burn_in) if thin is None else thin
    rows, acc = _run_chain(gas, sched, hyl.mu - gas.alpha, hyl.a, hyl.b, n_steps, burn_in, seed,
                           thin, count_cap, p_teleport, init)
    return SampleStream(rows, sched.volume, sched.m_cutoff, seed, acc, thin)


def reference_chain(gas: GasParams, sched: VolumeSchedule, n_steps: int, burn_in: int, seed: int,
                    thin: Optional[int] = None, count_cap: Optional[int] = None) -> SampleStream:
    """The same chain with the tilt switched off (targets Q, optionally capped)."""
    thin = default_thin(n_steps, burn_in) if thin is None else thin
    rows, acc = _run_chain(gas, sched, 0.0, 0.0, 0.0, n_steps, burn_in, seed, thin, count_cap)
    return SampleStream(rows, sched.volume, sched.m_cutoff, seed, acc, thin)


# ---------------------------------------------------------------------------
# estimators


def batch_means(values, seed: int = 0, n_batches: int = 50) -> SimEstimate:
    """Mean with a batch-means standard error and integrated autocorrelation time."""
    x = np.asarray(values, dtype=np.float64)
    n = len(x)
    nb = min(n_batches, n)
    if nb < MIN_BATCHES:
        raise InsufficientSamplesError(f"{n} samples cannot form {MIN_BATCHES} batches")
    size = n // nb
    used = x[: size * nb]
    means = used.reshape(nb, size).mean(axis=1)
    mean = float(used.mean())
    se = float(means.std(ddof=1) / math.sqrt(nb))
    var = float(used.var())
    tau = (len(used) * se * se / (2.0 * var)) if var > 0 else 0.5
    return SimEstimate(mean, se, n, seed, tau)


def pair_density_rows(counts, sched):
    k = np.arange(1, counts.shape[1] + 1, dtype=np.float64)
    kn = counts * k
    m = sched.m_cutoff
    return kn[:, : m - 1].sum(axis=1) / sched.volume, kn[:, m - 1:].sum(axis=1) / sched.volume


def estimate_pair_density(stream: SampleStream, sched: VolumeSchedule, n_batches: int = 50):
    """Batch-mean estimates of (M1, M2)."""
    if len(stream) == 0:
        raise InsufficientSamplesError("empty stream")
    m1, m2 = pair_density_rows(stream.counts, sched)
    return batch_means(m1, stream.seed, n_batches), batch_means(m2, stream.seed, n_batches)


def estimate_DK(stream: SampleStream, K: int, sched: VolumeSchedule, n_batches: int = 50) -> SimEstimate:
    """Batch-mean estimate of D_K = sum_{k > K} k lambda_k."""
    if K >= sched.k_max:
        raise CutoffError(f"K={K} must be below k_max={sched.k_max}")
    if K < 0:
        raise CutoffError("K must be nonnegative")
    k = np.arange(1, stream.counts.shape[1] + 1, dtype=np.float64)
    vals = (stream.counts[:, K:] * k[K:]).sum(axis=1) / sched.volume
    return batch_means(vals, stream.seed, n_batches)


def estimate_mean_weight(gas: GasParams, hyl: HylParams, sched: VolumeSchedule, n_steps: int,
                         burn_in: int, seed: int, count_cap: Optional[int] = None,
                         thin: Optional[int] = None, n_batches: int = 50,
                         method: str = "integration") -> SimEstimate:
    """E_Q[e^{-beta H}] (conditioned on the cap, if any).

    ``integration`` exponentiates the thermodynamic-integration estimate of
    log E_Q[e^{-beta H}] (error by the delta method). ``direct`` averages
    e^{-beta H} along an untilted chain; it is unbiased but its variance is
    dominated by states the reference chain almost never visits.
    """
    if method == "direct":
        stream = reference_chain(gas, sched, n_steps, burn_in, seed, thin, count_cap)
        h = _hamiltonian_rows(stream.counts.astype(np.float64), hyl, gas, sched)
        return batch_means(np.exp(-gas.beta * h), seed, n_batches)
    if method != "integration":
        raise DomainError(f"unknown method {method!r}")
    p = estimate_pressure(gas, hyl, sched, n_steps, burn_in, seed, count_cap=count_cap,
                          n_batches=n_batches)
    p0_trunc = float(reference_rates(gas, sched).sum()) / (gas.beta * sched.volume)
    scale = gas.beta * sched.volume
    w = math.exp(scale * (p.mean - p0_trunc))
    return SimEstimate(w, w * scale * p.std_error, p.n_samples, seed)


def estimate_pressure(gas: GasParams, hyl: HylParams, sched: VolumeSchedule, n_steps: int,
                      burn_in: int, seed: int, n_nodes: int = 8, count_cap: Optional[int] = None,
                      n_batches: int = 50) -> SimEstimate:
    """Finite-volume pressure by thermodynamic integration over the coupling.

    log E_Q[e^{-beta H}] = -beta int_0^1 E_lambda[H] d lambda, where E_lambda
    is the chain tilted by e^{-lambda beta H}; Gauss-Legendre nodes on [0, 1].
    """
    nodes, weights = roots_legendre(n_nodes)
    lam = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    total = 0.0
    var = 0.0
    n_samples = 0
    for i, (l, wi) in enumerate(zip(lam, w)):
        thin = default_thin(n_steps, burn_in)
        rows, _ = _run_chain(gas, sched, l * (hyl.mu - gas.alpha), l * hyl.a, l * hyl.b,
                             n_steps, burn_in, seed + 7919 * i, thin, count_cap)
        h = _hamiltonian_rows(rows.astype(np.float64), hyl, gas, sched)
        est = batch_means(h, seed, n_batches)
        total += wi * est.mean
        var += (wi * est.std_error) ** 2
        n_samples += est.n_samples
    p0_trunc = float(reference_rates(gas, sched).sum()) / (gas.beta * sched.volume)
    scale = 1.0 / sched.volume
    return SimEstimate(p0_trunc - total * scale, math.sqrt(var) * scale, n_samples, seed)


def poisson_gof_pvalue(samples, mean: float, min_expected: float = 5.0) -> float:
    """Chi-square goodness-of-fit p-value of integer samples against Poisson(mean)."""
    from scipy.stats import chi2, poisson

    x = np.asarray(samples, dtype=np.int64)
    n = len(x)
    hi = int(x.max()) + 1
    pmf = poisson.pmf(np.arange(hi), mean)
    obs = np.bincount(x, minlength=hi).astype(float)
    exp = pmf * n
    # fold the upper tail into the last cell, then merge sparse cells from the top
    exp[-1] += n * poisson.sf(hi - 1, mean)
    o_cells, e_cells = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(obs, exp):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            o_cells.append(o_acc)
            e_cells.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0:
        if e_cells:
            o_cells[-1] += o_acc
            e_cells[-1] += e_acc
        else:
            o_cells.append(o_acc)
            e_cells.append(e_acc)
    if len(e_cells) < 2:
        return 1.0
    o_arr = np.array(o_cells)
    e_arr = np.array(e_cells)
    stat = float(((o_arr - e_arr) ** 2 / e_arr).sum())
    return float(chi2.sf(stat, len(e_cells) - 1))


def chain_poisson_check(stream: SampleStream, gas: GasParams, sched: VolumeSchedule, k: int = 1,
                        spacing: float = 10.0) -> float:
    """Poisson GOF p-value for the length-k count of a zero-tilt chain.

    Chain samples are correlated, so the stream is subsampled every
    ``spacing * tau_int`` rows first; the chi-square test assumes independence.
    """
    x = stream.counts[:, k - 1].astype(np.float64)
    tau = batch_means(x, stream.seed).tau_int
    step = max(1, int(math.ceil(spacing * max(tau, 0.5))))
    sub = x[::step]
    if len(sub) < 100:
        raise InsufficientSamplesError(f"only {len(sub)} roughly independent samples for the GOF test")
    return poisson_gof_pvalue(sub, float(reference_rates(gas, sched)[k - 1]))
