import os
import subprocess
import sys

import numpy as np
import pytest

from vrutwin import _kernels_py
from vrutwin._backend import available_backends

compiled = available_backends().get("cython")
needs_ext = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


@needs_ext
@pytest.mark.parametrize("n,hid", [(1, 1), (3, 4), (32, 64), (7, 128)])
def test_gate_kernels_agree(rng, n, hid):
    z = rng.normal(scale=4.0, size=(n, 4 * hid))
    c = rng.normal(size=(n, hid))
    for a, b in zip(compiled.lstm_gates_forward(z, c), _kernels_py.lstm_gates_forward(z, c)):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
    act, c_new, tanh_c, _ = _kernels_py.lstm_gates_forward(z, c)
    dh, dc = rng.normal(size=(n, hid)), rng.normal(size=(n, hid))
    got = compiled.lstm_gates_backward(dh, dc, act, c, tanh_c)
    want = _kernels_py.lstm_gates_backward(dh, dc, act, c, tanh_c)
    for a, b in zip(got, want):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


@needs_ext
def test_gate_kernels_saturate_cleanly():
    z = np.array([[800.0, -800.0, 800.0, -800.0]])
    act, c, _, h = compiled.lstm_gates_forward(z, np.zeros((1, 1)))
    np.testing.assert_array_equal(act, [[1.0, 0.0, 1.0, 0.0]])
    assert c[0, 0] == 1.0 and h[0, 0] == 0.0


@needs_ext
def test_haversine_kernels_agree(rng):
    la1, la2 = rng.uniform(-89, 89, (2, 500))
    lo1, lo2 = rng.uniform(-180, 180, (2, 500))
    a = compiled.haversine_many(la1, lo1, la2, lo2, 6_371_000.0)
    b = _kernels_py.haversine_many(la1, lo1, la2, lo2, 6_371_000.0)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-6)


def test_env_forces_python_backend():
    env = dict(os.environ, VRUTWIN_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "from vrutwin._backend import BACKEND; print(BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
