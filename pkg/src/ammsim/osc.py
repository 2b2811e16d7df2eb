"""Operational-space force decomposition for the coupled vehicle + arm system.

Given the generalized mass matrix A and a task Jacobian J (task rates =
J * generalized rates), the task-space inertia, the dynamically consistent
generalized inverse, and the nullspace projector are

    Lambda = (J A^-1 J^T)^-1
    Jbar   = A^-1 J^T Lambda
    N      = I - J^T Jbar^T

and the actuator command splits into a task part and an internal part that
produces no task acceleration:

    tau = J^T F_op + N Gamma0

For the planar aerial manipulator the generalized coordinates are stacked
as [arm joints (2); rotor coordinates (6)].  The rotor block is obtained by
a congruence with the actuation map: with zeta_dot := M^T * (body twist),
the dual of zeta is exactly the squared-rotor-speed command, so the stacked
decomposition returns joint torques and rotor speeds in one vector while
staying dimensionally consistent (Lambda is invariant under the change of
coordinates).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import SingularTask

COND_LIMIT = 1e12


@dataclass(frozen=True)
class CombinedJacobian:
    """Task Jacobian with a labeled [manipulator | vehicle] column split."""

    J: np.ndarray
    n_manip: int

    def __post_init__(self):
        object.__setattr__(self, "J", np.asarray(self.J, dtype=float))
        if not 0 <= self.n_manip <= self.J.shape[1]:
            raise ValueError("n_manip outside column range")


@dataclass(frozen=True)
class ActuatorVector:
    """Eq-style stacked actuator command: joint torques over rotor values."""

    joint_torques: np.ndarray
    rotor_speeds_sq: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.joint_torques, self.rotor_speeds_sq])


@dataclass(frozen=True)
class OscState:
    """Operational-space quantities at one configuration."""

    A: np.ndarray
    Lambda: np.ndarray
    Jbar: np.ndarray
    N: np.ndarray

    def to_json(self) -> str:
        return json.dumps({
            "A": self.A.tolist(),
            "Lambda": self.Lambda.tolist(),
            "Jbar": self.Jbar.tolist(),
            "N": self.N.tolist(),
        })


def operational_inertia(A: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Task-space inertia (J A^-1 J^T)^-1; raises SingularTask when the
    task matrix condition number exceeds 1e12."""
    A = np.asarray(A, dtype=float)
    J = J.J if isinstance(J, CombinedJacobian) else np.asarray(J, dtype=float)
    core = J @ np.linalg.solve(A, J.T)
    core = 0.5 * (core + core.T)
    if np.linalg.cond(core) > COND_LIMIT:
        raise SingularTask("task inertia numerically singular")
    lam = np.linalg.inv(core)
    return 0.5 * (lam + lam.T)


def dyn_consistent_inverse(A: np.ndarray, J: np.ndarray,
                           Lambda: np.ndarray | None = None) -> np.ndarray:
    """Generalized inverse A^-1 J^T Lambda; satisfies J Jbar = I."""
    A = np.asarray(A, dtype=float)
    J = J.J if isinstance(J, CombinedJacobian) else np.asarray(J, dtype=float)
    if Lambda is None:
        Lambda = operational_inertia(A, J)
    return np.linalg.solve(A, J.T) @ Lambda


def operational_force(Lambda: np.ndarray, f_m_star,
                      semantics: str = "acceleration") -> np.ndarray:
    """Task force from the task command.

    ``semantics='acceleration'`` (default): the command is an acceleration-
    like vector and is weighted by the task inertia, F_op = Lambda f*.
    ``semantics='force'``: the command is already a force and passes through.
    """
    f = np.asarray(f_m_star, dtype=float)
    if semantics == "acceleration":
        return np.asarray(Lambda) @ f
    if semantics == "force":
        return f.copy()
    raise ValueError("semantics must be 'acceleration' or 'force'")


def nullspace_projector(J: np.ndarray, Jbar: np.ndarray) -> np.ndarray:
    """I - J^T Jbar^T, idempotent; routes torques invisibly to the task."""
    J = J.J if isinstance(J, CombinedJacobian) else np.asarray(J, dtype=float)
    n = J.shape[1]
    return np.eye(n) - J.T @ np.asarray(Jbar).T


def decompose(J, F_op, Jbar, Gamma0) -> np.ndarray | ActuatorVector:
    """Stacked actuator vector J^T F_op + (I - J^T Jbar^T) Gamma0.

    With a CombinedJacobian the result is partitioned into the manipulator
    and vehicle blocks; with a plain array the raw vector is returned.
    """
    Jarr = J.J if isinstance(J, CombinedJacobian) else np.asarray(J, dtype=float)
    F_op = np.asarray(F_op, dtype=float)
    Gamma0 = np.asarray(Gamma0, dtype=float)
    out = Jarr.T @ F_op + nullspace_projector(Jarr, Jbar) @ Gamma0
    if isinstance(J, CombinedJacobian):
        k = J.n_manip
        return ActuatorVector(joint_torques=out[:k], rotor_speeds_sq=out[k:])
    return out


def osc_state(A: np.ndarray, J) -> OscState:
    """Convenience builder computing all Eq-style quantities at once."""
    lam = operational_inertia(A, J)
    jbar = dyn_consistent_inverse(A, J, lam)
    Jarr = J.J if isinstance(J, CombinedJacobian) else np.asarray(J, dtype=float)
    return OscState(A=np.asarray(A, dtype=float), Lambda=lam, Jbar=jbar,
                    N=nullspace_projector(Jarr, jbar))


def amm_task_model(model, state) -> tuple[CombinedJacobian, np.ndarray]:
    """Stacked task Jacobian and mass matrix of the planar aerial manipulator.

    Task rows: world x and z of the arm endpoint, plus world-y angular rate
    of the base (attitude-keeping row).  Columns: [arm qd (2); rotor
    coordinates (6)] where the rotor block is the body-twist block composed
    with the inverse-transposed actuation map, so that the dual variables of
    the vehicle block are squared rotor speeds.
    """
    from .dynamics import VehicleModel  # local import to avoid a cycle

    assert isinstance(model, VehicleModel) and model.mounted_arm is not None
    arm_par = model.mounted_arm.param_vector()
    svec = state.as_vector(model.rotor_count)
    p = svec[0:3]
    R = kernels.quat_to_rot(svec[3:7])
    q1, q2 = svec[13], svec[14]
    A_u, _, pe, o1, o2, ahat, _ = kernels.amm_mass_bias(
        p, R, svec[10:13], q1, q2, svec[15], svec[16],
        model.mass, model.inertia, arm_par, 9.81)

    # endpoint world-velocity rows on u = [v_w, omega_b, qd]
    Ve = np.zeros((3, 8))
    Ve[:, 0:3] = np.eye(3)
    Ve[:, 3:6] = -kernels.skew3(pe - p) @ R
    Ve[:, 6] = kernels.cross3(ahat, pe - o1)
    Ve[:, 7] = kernels.cross3(ahat, pe - o2)
    J_u = np.zeros((3, 8))
    J_u[0, :] = Ve[0, :]
    J_u[1, :] = Ve[2, :]
    J_u[2, 3:6] = R[1, :]  # world-y angular rate

    # coordinate change u = S z, z = [qd (2); zeta_dot (6)]
    mmap = model.mapping().entries
    minv_t = np.linalg.inv(mmap).T
    base = np.zeros((6, 6))
    base[0:3, 0:3] = R
    base[3:6, 3:6] = np.eye(3)
    S = np.zeros((8, 8))
    S[0:6, 2:8] = base @ minv_t
    S[6, 0] = 1.0
    S[7, 1] = 1.0

    A_z = S.T @ A_u @ S
    J_z = J_u @ S
    return CombinedJacobian(J=J_z, n_manip=2), 0.5 * (A_z + A_z.T)
