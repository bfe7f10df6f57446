"""Hot loops: the direct Bose series and the Metropolis chain on cycle counts.

Each kernel exists as plain python (``*_py``) and, when numba is enabled, as a
compiled twin. The public names (``bose_series``, ``mh_chain``) point at
whichever path ``_accel.USE_NUMBA`` selects. The Bose series fallback is a
chunked numpy sum rather than the scalar loop.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit


def bose_series_py(n, u, tol, max_terms):
    """Sum k^-n e^{uk} for u < 0 with a geometric tail bound.

    Stops once the tail bound drops below ``tol * min(1, partial sum)``, so
    ``tol`` is absolute for values above one and relative below. Returns
    ``(value, n_terms, converged)``. Summation is Kahan-compensated.
    """
    eu = math.exp(u)
    total = 0.0
    comp = 0.0
    t = math.exp(u)
    k = 1
    while k <= max_terms:
        y = t - comp
        s = total + y
        comp = (s - total) - y
        total = s
        k1 = k + 1.0
        t = math.exp(u * k1 - n * math.log(k1))
        if n >= 0.0:
            r = eu
        else:
            r = eu * ((k1 + 1.0) / k1) ** (-n)
        if r < 1.0 and t / (1.0 - r) <= tol * min(1.0, total):
            return total, k, True
        k += 1
    return total, max_terms, False


def bose_series_numpy(n, u, tol, max_terms):
    """Chunked numpy variant of :func:`bose_series_py`.

    The tail test runs at chunk boundaries, so it may sum more terms than the
    scalar loop; the result still meets ``tol``.
    """
    eu = math.exp(u)
    partials = []
    start = 1
    chunk = 256
    while start <= max_terms:
        stop = min(start + chunk, max_terms + 1)
        k = np.arange(start, stop, dtype=np.float64)
        partials.append(float(np.exp(u * k - n * np.log(k)).sum()))
        k1 = float(stop)
        t = math.exp(u * k1 - n * math.log(k1))
        r = eu if n >= 0.0 else eu * ((k1 + 1.0) / k1) ** (-n)
        if r < 1.0 and t / (1.0 - r) <= tol * min(1.0, math.fsum(partials)):
            return math.fsum(partials), stop - 1, True
        start = stop
        chunk = min(chunk * 2, 1 << 20)
    return math.fsum(partials), max_terms, False


def mh_chain_py(counts, cdf, log_rates, volume, beta, drift, a, b, m_cut, cap,
                p_tele, uniforms, step0, burn_in, thin, out, row0, state):
    """Advance a Metropolis chain on cycle counts by ``len(uniforms)`` steps.

    ``counts[k-1]`` holds N_k and is updated in place. ``state`` carries
    ``[S, C]`` with S = sum k N_k and C = sum_{k>=m_cut} (k N_k)^2, and is also
    updated in place. Each step consumes one row of four uniforms: move type,
    cycle length, direction, acceptance. After ``burn_in`` global steps every
    ``thin``-th state is copied into ``out`` starting at row ``row0``.

    Proposals are symmetric: a local move picks k with probability
    proportional to the reference rate, a teleport picks k uniformly in
    [m_cut, k_max] (in [1, k_max] if m_cut > k_max); both propose N_k +- 1 with equal probability. ``cap < 0``
    disables the per-length count cap.

    Returns ``(accepted, rows_written)``.
    """
    k_max = counts.shape[0]
    # teleport range: the long lengths, or every length when none reaches m_cut
    tele_lo = m_cut if m_cut <= k_max else 1
    n_long = k_max - tele_lo + 1
    total_rate = cdf[k_max - 1]
    two_v = 2.0 * volume
    S = state[0]
    C = state[1]
    accepted = 0
    row = row0
    for i in range(uniforms.shape[0]):
        u0 = uniforms[i, 0]
        u1 = uniforms[i, 1]
        if u0 < p_tele:
            k = tele_lo + int(u1 * n_long)
            if k > k_max:
                k = k_max
        else:
            idx = np.searchsorted(cdf, u1 * total_rate, side="right")
            if idx >= k_max:
                idx = k_max - 1
            k = idx + 1
        nk = counts[k - 1]
        ok = True
        if uniforms[i, 2] < 0.5:
            if cap >= 0 and nk + 1 > cap:
                ok = False
            new_nk = nk + 1
            log_q = log_rates[k - 1] - math.log(nk + 1.0)
            dS = float(k)
        else:
            if nk == 0:
                ok = False
            new_nk = nk - 1
            log_q = math.log(max(nk, 1) * 1.0) - log_rates[k - 1]
            dS = -float(k)
        if ok:
            S_new = S + dS
            dH = -drift * dS + a * (S_new * S_new - S * S) / two_v
            dC = 0.0
            if k >= m_cut:
                kk = float(k) * float(k)
                dC = kk * (float(new_nk) * float(new_nk) - float(nk) * float(nk))
                dH -= b * dC / two_v
            log_acc = log_q - beta * dH
            if log_acc >= 0.0 or math.log(uniforms[i, 3]) < log_acc:
                counts[k - 1] = new_nk
                S = S_new
                C += dC
                accepted += 1
        j = step0 + i
        if j >= burn_in and (j - burn_in) % thin == 0:
            out[row, :] = counts
            row += 1
    state[0] = S
    state[1] = C
    return accepted, row - row0


if USE_NUMBA:
    bose_series = njit(cache=True, nogil=True)(bose_series_py)
    mh_chain = njit(cache=True, nogil=True)(mh_chain_py)
else:
    bose_series = bose_series_numpy
    mh_chain = mh_chain_py
