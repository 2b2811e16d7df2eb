"""Flight and arm controllers.

Hexrotor: proportional position loop cascaded into a PD velocity loop with
gravity feedforward, producing a full body wrench (lateral authority used
directly, attitude held level).  Quadrotor baseline: the position loop's
force demand is converted to a lean-angle setpoint tracked by an attitude
PD, with collective thrust along the current axis.  Arm: task-space PID
resolved through the arm Jacobian to joint velocity commands.

Controllers are pure functions of (measurement, setpoint, gains, memory);
memory is passed in and returned, never hidden.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from . import kernels
from .allocation import GRAVITY, Wrench
from .errors import NearSingularArm
from .manipulators import PlanarArmModel, planar_fk, planar_jacobian


@dataclass(frozen=True)
class GainSet:
    """Controller gains; shipped defaults live in config/defaults.json."""

    pos_p: float = 1.1
    vel_p: float = 7.0
    vel_d: float = 0.12
    att_p: float = 5.0
    att_d: float = 0.9
    endpoint_kp: float = 4.0
    endpoint_ki: float = 1.5
    endpoint_kd: float = 0.15
    integrator_limit: float = 0.15
    arm_kp_hold: float = 1.2
    arm_kv: float = 0.03
    yaw_p: float = 2.0
    yaw_d: float = 0.4

    def __post_init__(self):
        gains = [self.pos_p, self.vel_p, self.vel_d, self.att_p, self.att_d,
                 self.endpoint_kp, self.endpoint_ki, self.endpoint_kd,
                 self.arm_kp_hold, self.arm_kv, self.yaw_p, self.yaw_d]
        if min(gains) < 0:
            raise ValueError("gains must be >= 0")
        if self.integrator_limit <= 0:
            raise ValueError("integrator_limit must be > 0")

    @classmethod
    def from_dict(cls, doc: dict) -> "GainSet":
        known = {k: float(v) for k, v in doc.items()
                 if k in cls.__dataclass_fields__}
        return cls(**known)

    @classmethod
    def from_json(cls, path) -> "GainSet":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def load_default_gains(profile: str = "hexrotor") -> GainSet:
    """Gains from the packaged defaults file (per-vehicle profiles)."""
    text = resources.files("ammsim").joinpath("config/defaults.json").read_text()
    doc = json.loads(text)
    return GainSet.from_dict(doc[profile])


@dataclass(frozen=True)
class Setpoint:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0
    endpoint_target: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, float))
        if self.endpoint_target is not None:
            object.__setattr__(self, "endpoint_target",
                               np.asarray(self.endpoint_target, float))


@dataclass(frozen=True)
class ControllerMemory:
    """Explicit one-step memory for derivative-on-measurement terms."""

    prev_vel: np.ndarray | None = None
    prev_ang_vel: np.ndarray | None = None


def _vee(m: np.ndarray) -> np.ndarray:
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def _yaw_rotation(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def attitude_pd_torque(R: np.ndarray, R_sp: np.ndarray, ang_vel_body,
                       kp: float, kd: float, yaw_kp: float | None = None,
                       yaw_kd: float | None = None) -> np.ndarray:
    """Body torque steering R toward R_sp: kp on the SO(3) error, kd damping."""
    err = 0.5 * _vee(R.T @ R_sp - R_sp.T @ R)
    w = np.asarray(ang_vel_body, float)
    tau = kp * err - kd * w
    if yaw_kp is not None:
        tau[2] = yaw_kp * err[2] - yaw_kd * w[2]
    return tau


def nested_p_pd(state, sp: Setpoint, gains: GainSet, dt: float,
                mem: ControllerMemory, mass: float) -> tuple[Wrench, ControllerMemory]:
    """Fully actuated position hold: body wrench command.

    Outer loop turns position error into a velocity setpoint; the inner PD
    turns velocity error into a world force on top of exact gravity
    feedforward; the attitude loop keeps the craft level at the commanded
    yaw.  The derivative term acts on the measured velocity, so setpoint
    changes cause no kick.
    """
    R = kernels.quat_to_rot(state.base_orientation)
    v_sp = gains.pos_p * (sp.position - state.base_position)
    e_v = v_sp - state.base_lin_vel
    if mem.prev_vel is None:
        dv = np.zeros(3)
    else:
        dv = (state.base_lin_vel - mem.prev_vel) / dt
    f_world = gains.vel_p * e_v - gains.vel_d * dv
    f_world[2] += mass * GRAVITY
    f_body = R.T @ f_world
    tau_body = attitude_pd_torque(R, _yaw_rotation(sp.yaw), state.base_ang_vel,
                                  gains.att_p, gains.att_d,
                                  gains.yaw_p, gains.yaw_d)
    return (Wrench(force=f_body, torque=tau_body),
            replace(mem, prev_vel=state.base_lin_vel.copy()))


def quadrotor_cascade(state, sp: Setpoint, gains: GainSet, dt: float,
                      mem: ControllerMemory, mass: float,
                      ) -> tuple[float, tuple[float, float, float], np.ndarray,
                                 ControllerMemory]:
    """Underactuated position hold: (thrust N, attitude setpoint rpy, torque).

    The position loop's force demand is realized by leaning the thrust axis;
    pitch/roll setpoints use the nose-up-positive sign convention, so a +x
    position error commands a negative (nose-down) pitch.
    """
    R = kernels.quat_to_rot(state.base_orientation)
    v_sp = gains.pos_p * (sp.position - state.base_position)
    e_v = v_sp - state.base_lin_vel
    if mem.prev_vel is None:
        dv = np.zeros(3)
    else:
        dv = (state.base_lin_vel - mem.prev_vel) / dt
    f_world = gains.vel_p * e_v - gains.vel_d * dv
    f_world[2] += mass * GRAVITY
    f_world[2] = max(f_world[2], 0.1 * mass * GRAVITY)

    z_des = f_world / np.linalg.norm(f_world)
    x_c = np.array([math.cos(sp.yaw), math.sin(sp.yaw), 0.0])
    y_des = np.cross(z_des, x_c)
    y_des = y_des / np.linalg.norm(y_des)
    x_des = np.cross(y_des, z_des)
    R_sp = np.column_stack([x_des, y_des, z_des])

    thrust = float(f_world @ R[:, 2])
    tau = attitude_pd_torque(R, R_sp, state.base_ang_vel,
                             gains.att_p, gains.att_d,
                             gains.yaw_p, gains.yaw_d)
    roll_sp = math.asin(max(-1.0, min(1.0, float(y_des[2]))))
    pitch_sp = math.asin(max(-1.0, min(1.0, float(x_des[2]))))
    return (thrust, (roll_sp, pitch_sp, sp.yaw), tau,
            replace(mem, prev_vel=state.base_lin_vel.copy()))


@dataclass(frozen=True)
class EndpointPidState:
    """Integrator and previous measurement of the endpoint PID."""

    integral: np.ndarray = field(default_factory=lambda: np.zeros(2))
    prev_point: np.ndarray | None = None


def endpoint_pid(arm: PlanarArmModel, q, endpoint_error, gains: GainSet,
                 dt: float, pid_state: EndpointPidState,
                 det_tol: float = 1e-6) -> tuple[np.ndarray, EndpointPidState]:
    """Resolved-rate endpoint correction: joint velocity command (rad/s).

    The PID acts in the arm plane (XZ); its output velocity is mapped
    through the inverse arm Jacobian.  The integrator clamps at
    +/-integrator_limit per axis, bounding the command contribution by
    endpoint_ki * integrator_limit.  Raises NearSingularArm at an elbow
    fold; callers zero the command in that case.
    """
    q = np.asarray(q, float)
    e = np.asarray(endpoint_error, float)
    J = planar_jacobian(arm, q)
    det = float(np.linalg.det(J))
    if abs(det) < det_tol:
        raise NearSingularArm(f"|det J| = {abs(det):.2e} below {det_tol}")
    integral = np.clip(pid_state.integral + e * dt,
                       -gains.integrator_limit, gains.integrator_limit)
    point = planar_fk(arm, q)
    if pid_state.prev_point is None:
        d = np.zeros(2)
    else:
        d = -(point - pid_state.prev_point) / dt
    u = gains.endpoint_kp * e + gains.endpoint_ki * integral + gains.endpoint_kd * d
    qd_cmd = np.linalg.solve(J, u)
    return qd_cmd, EndpointPidState(integral=integral, prev_point=point)
