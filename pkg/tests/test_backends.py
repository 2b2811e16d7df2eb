"""Numba and pure-numpy paths must agree numerically.

The numba backend is the default; the fallback is selected with
AMM_PURE_NUMPY=1.  Bitwise trace determinism is guaranteed per backend;
across backends we require close numerical agreement, not bit equality.
"""

import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ammsim import kernels
from ammsim.backend import BACKEND, HAS_NUMBA

REPO = Path(__file__).resolve().parent.parent


def test_backend_reports_numba_by_default():
    if os.environ.get("AMM_PURE_NUMPY") == "1":
        assert BACKEND == "numpy"
    elif HAS_NUMBA:
        assert BACKEND == "numba"


@pytest.mark.skipif(not HAS_NUMBA, reason="numba unavailable")
def test_jitted_kernels_match_python_source():
    # the dispatcher keeps the uncompiled function; both paths must agree
    if BACKEND != "numba":
        pytest.skip("fallback already selected")
    q = np.array([0.9, 0.1, -0.2, 0.15])
    q = q / np.linalg.norm(q)
    np.testing.assert_allclose(kernels.quat_to_rot(q),
                               kernels.quat_to_rot.py_func(q), rtol=1e-15)
    a, b = np.array([1.0, -2.0, 0.5]), np.array([0.3, 0.7, -1.1])
    np.testing.assert_allclose(kernels.cross3(a, b),
                               kernels.cross3.py_func(a, b), rtol=1e-15)

    from ammsim.dynamics import default_hexrotor
    model = default_hexrotor(with_arm=True)
    s = np.zeros(kernels.STATE_BASE + 6)
    s[3] = 1.0
    s[2] = 1.0
    s[10:13] = [0.3, -0.2, 0.1]
    s[13:15] = [1.0, -0.5]
    s[15:17] = [0.4, 0.3]
    args = (s, 6, np.full(6, 1.5e5), np.array([0.1, 0.0, -0.2]),
            np.zeros(3), np.zeros(3), 0.0, model.mass, model.inertia,
            np.linalg.inv(model.inertia), model.mapping().entries, 0.02, 1,
            model.arm_param_vector(), np.zeros(9), 9.81)
    np.testing.assert_allclose(kernels.amm_deriv(*args),
                               kernels.amm_deriv.py_func(*args),
                               rtol=1e-12, atol=1e-12)


@pytest.mark.skipif(not HAS_NUMBA, reason="numba unavailable")
def test_fallback_process_produces_matching_trace(tmp_path):
    # run the same short scenario in a pure-numpy subprocess and compare
    script = (
        "import numpy as np\n"
        "from ammsim.scenarios import Scenario, run_scenario\n"
        "from ammsim.control import Setpoint\n"
        "from ammsim.dynamics import DisturbanceProfile\n"
        "sc = Scenario(name='b', vehicle='hexrotor',"
        " controller_mode='hexrotor_ppd', duration=1.0,"
        " initial_position=(0.2, 0, 1.0),"
        " setpoint_schedule=((0.0, Setpoint(position=np.array([0,0,1.0]))),),"
        " disturbance=DisturbanceProfile(gust_noise_std=0.2, seed=3))\n"
        "tr = run_scenario(sc)\n"
        "np.save(r'{out}', tr.states)\n")
    paths = {}
    for flag, name in (("0", "jit"), ("1", "numpy")):
        out = tmp_path / f"{name}.npy"
        env = dict(os.environ, AMM_PURE_NUMPY=flag)
        proc = subprocess.run(
            [sys.executable, "-c", script.format(out=out)],
            capture_output=True, text=True, env=env, cwd=REPO)
        assert proc.returncode == 0, proc.stderr
        paths[name] = out
    a = np.load(paths["jit"])
    b = np.load(paths["numpy"])
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-11)
