"""Compiled kernels against their pure-python fallbacks."""

import hashlib
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from hylcycles import _accel, _kernels

numba = pytest.importorskip("numba")

SNIPPET = """
import hashlib, sys
from hylcycles import _accel
from hylcycles.ideal_gas import GasParams
from hylcycles.simulator import VolumeSchedule, mcmc_sample
from hylcycles.variational import HylParams
from hylcycles.bose import bose_g
s = mcmc_sample(GasParams(1, 1.0, -3.0), HylParams(1.0, 0.5, 0.6, 0.5),
                VolumeSchedule(4.0, 2, 0.5, 6), 100000, 1000, seed=17, count_cap=3)
print(_accel.USE_NUMBA, hashlib.sha256(s.counts.tobytes()).hexdigest(), s.accept_rate,
      repr(bose_g(1.5, -0.01)))
"""


def _run(disable):
    env = dict(os.environ)
    if disable:
        env["HYL_DISABLE_NUMBA"] = "1"
    else:
        env.pop("HYL_DISABLE_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", SNIPPET], env=env, capture_output=True, text=True, check=True)
    return out.stdout.split()


def test_env_flag_switches_backend_with_identical_chain():
    fast = _run(False)
    slow = _run(True)
    assert fast[0] == "True" and slow[0] == "False"
    assert fast[1] == slow[1]  # bit-identical sample stream
    assert fast[2] == slow[2]
    assert float(fast[3]) == pytest.approx(float(slow[3]), rel=1e-13)


@pytest.mark.parametrize("n,u", [(1.5, -0.01), (2.5, -1.0), (-1.0, -0.3), (0.5, -1e-4)])
def test_bose_kernels_agree(n, u):
    compiled = _accel.compile_kernel(_kernels.bose_series_py)
    v1, k1, ok1 = compiled(n, u, 1e-12, 10_000_000)
    v2, k2, ok2 = _kernels.bose_series_py(n, u, 1e-12, 10_000_000)
    v3, _, ok3 = _kernels.bose_series_numpy(n, u, 1e-12, 10_000_000)
    assert ok1 and ok2 and ok3
    assert v1 == v2 and k1 == k2
    assert v3 == pytest.approx(v1, rel=1e-13)


def test_chain_kernels_agree_in_process():
    compiled = _accel.compile_kernel(_kernels.mh_chain_py)
    rng = np.random.default_rng(3)
    rates = np.array([0.5, 0.2, 0.1, 0.05, 0.02, 0.01])
    cdf = np.cumsum(rates)
    uni = rng.random((5000, 4))
    outs = []
    for fn in (compiled, _kernels.mh_chain_py):
        counts = np.zeros(6, dtype=np.int64)
        state = np.zeros(2)
        out = np.zeros((5000, 6), dtype=np.int32)
        acc, rows = fn(counts, cdf, np.log(rates), 4.0, 1.0, 3.6, 1.0, 0.5, 2, -1, 0.1,
                       uni, 0, 0, 1, out, 0, state)
        outs.append((acc, rows, out.copy(), state.copy()))
    assert outs[0][0] == outs[1][0]
    assert outs[0][1] == outs[1][1]
    assert np.array_equal(outs[0][2], outs[1][2])
    assert np.allclose(outs[0][3], outs[1][3])
    # running state tracks the configuration
    last = outs[0][2][-1].astype(float)
    k = np.arange(1, 7)
    assert outs[0][3][0] == pytest.approx((k * last).sum())
    assert outs[0][3][1] == pytest.approx(((k * last)[1:] ** 2).sum())
