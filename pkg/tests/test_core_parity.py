"""Compiled core versus pure-numpy fallback parity checks."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

import prismsel
from prismsel._core import PHI_CMI, PHI_PCG, PHI_PLAIN, PHI_QCAP, _fallback

try:
    from prismsel._core import _speedups
except ImportError:
    _speedups = None

needs_native = pytest.mark.skipif(_speedups is None, reason="compiled core unavailable")


def test_native_core_loaded_by_default():
    assert prismsel.USING_NATIVE


def random_inputs(rng, dtype, n=64, m=7):
    # the running max is always float64; only kernel columns vary in dtype
    cur = rng.uniform(0.0, 0.5, size=n)
    cols = rng.uniform(0.0, 1.0, size=(m, n)).astype(dtype)
    qcap = np.ascontiguousarray(rng.uniform(0.0, 1.0, size=n))
    pcap = np.ascontiguousarray(rng.uniform(0.0, 0.3, size=n))
    return cur, cols, qcap, pcap


@needs_native
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("kind", [PHI_PLAIN, PHI_QCAP, PHI_PCG, PHI_CMI])
class TestParity:
    def test_fl_gain(self, dtype, kind, rng):
        cur, cols, qcap, pcap = random_inputs(rng, dtype)
        for col in cols:
            a = _speedups.fl_gain(cur, col, kind, qcap, pcap)
            b = _fallback.fl_gain(cur, col, kind, qcap, pcap)
            assert a == pytest.approx(b, abs=1e-6 if dtype == np.float32 else 1e-12)

    def test_fl_gains_many(self, dtype, kind, rng):
        cur, cols, qcap, pcap = random_inputs(rng, dtype)
        a = _speedups.fl_gains_many(cols, cur, kind, qcap, pcap)
        b = _fallback.fl_gains_many(cols, cur, kind, qcap, pcap)
        assert np.allclose(a, b, atol=1e-6 if dtype == np.float32 else 1e-12)

    def test_fl_commit(self, dtype, kind, rng):
        cur, cols, _, _ = random_inputs(rng, dtype)
        cur2 = cur.copy()
        for col in cols:
            _speedups.fl_commit(cur, col)
            _fallback.fl_commit(cur2, col)
        assert np.array_equal(cur, cur2)


_SUBPROCESS_PROG = """
import json, sys
import numpy as np
import prismsel
from prismsel.measures import MeasureSpec
from prismsel.optimize import lazy_greedy
from prismsel.kernels import compute_kernel, clip_nonnegative

rng = np.random.default_rng(77)
k = clip_nonnegative(compute_kernel(rng.normal(size=(60, 5)), rng.normal(size=(3, 5))))
sel = lazy_greedy(MeasureSpec.from_name("flvmi"), k, 10)
print(json.dumps({"native": prismsel.USING_NATIVE,
                  "order": sel.order, "objective": sel.objective}))
"""


def _run_selection(force_fallback):
    env = dict(os.environ)
    env["PRISMSEL_FORCE_FALLBACK"] = "1" if force_fallback else "0"
    out = subprocess.run(
        [sys.executable, "-c", _SUBPROCESS_PROG],
        capture_output=True, text=True, env=env, check=True,
    )
    return json.loads(out.stdout)


@needs_native
def test_force_fallback_env_selects_fallback_and_agrees():
    native = _run_selection(force_fallback=False)
    fallback = _run_selection(force_fallback=True)
    assert native["native"] is True
    assert fallback["native"] is False
    assert native["order"] == fallback["order"]
    assert native["objective"] == pytest.approx(fallback["objective"], rel=1e-12)
