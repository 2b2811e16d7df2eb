import numpy as np
import pytest

from ammsim import kernels
from ammsim.dynamics import default_hexrotor


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Touch every jitted kernel once so compile time stays out of the
    timed acceptance criteria (cached builds make this near-instant)."""
    model = default_hexrotor(with_arm=True, rotor_tc=0.02)
    s = np.zeros(kernels.STATE_BASE + 6)
    s[3] = 1.0
    s[2] = 1.0
    out = np.empty((5, s.size))
    kernels.simulate_span(
        s, 1e-3, np.full(6, 1.0e5), np.zeros((5, 3)), np.zeros((5, 3)),
        np.zeros((5, 3)), 0.1, model.mass, model.inertia,
        np.linalg.inv(model.inertia), model.mapping().entries, 0.02, 1,
        model.arm_param_vector(), np.zeros(9), 9.81, out)
    armless = default_hexrotor()
    s0 = np.zeros(kernels.STATE_BASE + 6)
    s0[3] = 1.0
    kernels.simulate_span(
        s0, 1e-3, np.full(6, 1.0e5), np.zeros((5, 3)), np.zeros((5, 3)),
        np.zeros((5, 3)), 0.0, armless.mass, armless.inertia,
        np.linalg.inv(armless.inertia), armless.mapping().entries, 0.0, 0,
        armless.arm_param_vector(), np.zeros(9), 9.81, out)
