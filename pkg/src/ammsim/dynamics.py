"""Vehicle models, simulation state, disturbances, and the RK4 stepper.

The floating base couples rigidly to the optional two-link arm; rotor
thrust enters through the actuation map with an optional first-order
spin-up lag.  Everything is deterministic: gust noise comes from a counter-
keyed generator seeded by the disturbance profile, never from global state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .allocation import (GRAVITY, MappingMatrix, RotorGeometry,
                         build_mapping_matrix, matrix_rank)
from .errors import NonFiniteState
from .manipulators import PlanarArmModel

DEFAULT_DT = 1e-3


@dataclass(frozen=True)
class VehicleModel:
    """Rigid multirotor base, optionally carrying the planar arm."""

    name: str = "hexrotor"
    mass: float = 2.0
    inertia: np.ndarray = field(
        default_factory=lambda: np.diag([0.025, 0.025, 0.045]))
    geometry: RotorGeometry = field(default_factory=RotorGeometry)
    mounted_arm: PlanarArmModel | None = None
    first_order_rotor_tc: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "inertia", np.asarray(self.inertia, float))
        if self.mass <= 0:
            raise ValueError("mass must be > 0")
        if self.inertia.shape != (3, 3):
            raise ValueError("inertia must be 3x3")
        eig = np.linalg.eigvalsh(0.5 * (self.inertia + self.inertia.T))
        if eig.min() <= 0:
            raise ValueError("inertia must be symmetric positive definite")

    @property
    def rotor_count(self) -> int:
        return self.geometry.rotor_count

    @property
    def total_mass(self) -> float:
        """Base plus arm links: the mass the rotors have to carry."""
        if self.mounted_arm is None:
            return self.mass
        return self.mass + sum(self.mounted_arm.link_masses)

    def mapping(self) -> MappingMatrix:
        return build_mapping_matrix(self.geometry)

    def hover_wrench(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.total_mass * GRAVITY, 0.0, 0.0, 0.0])

    def arm_param_vector(self) -> np.ndarray:
        if self.mounted_arm is None:
            return np.zeros(17)
        return self.mounted_arm.param_vector()

    @classmethod
    def from_json(cls, path) -> "VehicleModel":
        with open(path) as f:
            doc = json.load(f)
        geom_doc = doc["geometry"]
        max_w = geom_doc["max_rpm"] * 2.0 * math.pi / 60.0
        geom = RotorGeometry(
            rotor_count=int(geom_doc["rotor_count"]),
            arm_length=float(geom_doc["arm_length_m"]),
            cant=math.radians(float(geom_doc["cant_deg"])),
            dihedral=math.radians(float(geom_doc["dihedral_deg"])),
            thrust_coeff=float(geom_doc["kf"]),
            drag_coeff=float(geom_doc["km"]),
            max_speed_sq=max_w * max_w,
            rotor_angles=tuple(math.radians(a) for a in
                               geom_doc.get("rotor_angles_deg", ())),
        )
        inertia = np.asarray(doc["inertia_kgm2"], float)
        if inertia.ndim == 1:
            inertia = np.diag(inertia)
        arm = None
        if doc.get("arm") is not None:
            a = doc["arm"]
            arm = PlanarArmModel(
                link_lengths=tuple(a["link_lengths_m"]),
                link_masses=tuple(a["link_masses_kg"]),
                com_offsets=tuple(a["com_offsets_m"]),
                link_inertias=tuple(a["link_inertias_kgm2"]),
                mount_offset=tuple(a.get("mount_offset_m", (0.0, 0.0, 0.06))),
            )
        return cls(name=doc.get("name", "vehicle"), mass=float(doc["mass_kg"]),
                   inertia=inertia, geometry=geom, mounted_arm=arm,
                   first_order_rotor_tc=float(doc.get("rotor_tc_s", 0.05)))


def default_hexrotor(with_arm: bool = False,
                     rotor_tc: float = 0.05) -> VehicleModel:
    """Desk-scale canted hexrotor; values are implementation defaults, not
    measurements of any particular airframe."""
    return VehicleModel(
        name="hexrotor",
        mounted_arm=PlanarArmModel() if with_arm else None,
        first_order_rotor_tc=rotor_tc,
    )


def build_quadrotor_model(mass: float = 2.0, arm_length: float = 0.25,
                          inertia=None, thrust_coeff: float = 2.0e-5,
                          drag_coeff: float = 4.0e-7,
                          max_speed_sq: float = 640000.0,
                          rotor_tc: float = 0.05) -> VehicleModel:
    """Parallel-rotor comparison craft: cant 0, dihedral 0, rank-4 map."""
    geom = RotorGeometry(
        rotor_count=4, arm_length=arm_length, cant=0.0, dihedral=0.0,
        thrust_coeff=thrust_coeff, drag_coeff=drag_coeff,
        max_speed_sq=max_speed_sq,
        rotor_angles=tuple(math.radians(45.0 + 90.0 * i) for i in range(4)))
    model = VehicleModel(
        name="quadrotor", mass=mass,
        inertia=np.diag([0.02, 0.02, 0.035]) if inertia is None else inertia,
        geometry=geom, first_order_rotor_tc=rotor_tc)
    assert matrix_rank(model.mapping()) == 4
    return model


@dataclass(frozen=True)
class AmmState:
    """Simulator integration variable: base pose/twist plus arm state."""

    base_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_orientation: np.ndarray = field(
        default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    base_lin_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_ang_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    arm_q: np.ndarray = field(default_factory=lambda: np.zeros(2))
    arm_qd: np.ndarray = field(default_factory=lambda: np.zeros(2))
    rotor_speeds_sq: np.ndarray | None = None
    time: float = 0.0

    def __post_init__(self):
        for name in ("base_position", "base_orientation", "base_lin_vel",
                     "base_ang_vel", "arm_q", "arm_qd"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), float))
        if abs(np.linalg.norm(self.base_orientation) - 1.0) > 1e-9:
            raise ValueError("base orientation quaternion must be normalized")
        vals = np.concatenate([self.base_position, self.base_orientation,
                               self.base_lin_vel, self.base_ang_vel,
                               self.arm_q, self.arm_qd])
        if not np.isfinite(vals).all():
            raise ValueError("state entries must be finite")

    def as_vector(self, n_rotors: int) -> np.ndarray:
        s = np.zeros(kernels.STATE_BASE + n_rotors)
        s[0:3] = self.base_position
        s[3:7] = self.base_orientation
        s[7:10] = self.base_lin_vel
        s[10:13] = self.base_ang_vel
        s[13:15] = self.arm_q
        s[15:17] = self.arm_qd
        if self.rotor_speeds_sq is not None:
            s[17:17 + n_rotors] = self.rotor_speeds_sq
        return s

    @classmethod
    def from_vector(cls, s: np.ndarray, time: float) -> "AmmState":
        return cls(base_position=s[0:3].copy(),
                   base_orientation=s[3:7].copy(),
                   base_lin_vel=s[7:10].copy(),
                   base_ang_vel=s[10:13].copy(),
                   arm_q=s[13:15].copy(), arm_qd=s[15:17].copy(),
                   rotor_speeds_sq=s[17:].copy() if s.size > 17 else None,
                   time=time)


@dataclass(frozen=True)
class DisturbanceProfile:
    """Wind steps, gust noise, and sensor noise, all keyed by one seed."""

    wind_steps: tuple = ()
    gust_noise_std: float = 0.0
    sensor_noise_std_pos: float = 0.0
    sensor_noise_std_att: float = 0.0
    seed: int = 0

    def __post_init__(self):
        steps = tuple((float(t0), float(t1), np.asarray(f, float))
                      for t0, t1, f in self.wind_steps)
        for t0, t1, _ in steps:
            if t1 < t0:
                raise ValueError("wind step times must be ordered")
        if min(self.gust_noise_std, self.sensor_noise_std_pos,
               self.sensor_noise_std_att) < 0:
            raise ValueError("noise stds must be >= 0")
        object.__setattr__(self, "wind_steps", steps)

    @classmethod
    def from_dict(cls, doc: dict) -> "DisturbanceProfile":
        steps = tuple((s["start_s"], s["end_s"], np.asarray(s["force_n"], float))
                      for s in doc.get("wind_steps", ()))
        sens = doc.get("sensor_noise_std", {})
        return cls(wind_steps=steps,
                   gust_noise_std=float(doc.get("gust_noise_std_n", 0.0)),
                   sensor_noise_std_pos=float(sens.get("position_m", 0.0)),
                   sensor_noise_std_att=float(sens.get("attitude_rad", 0.0)),
                   seed=int(doc.get("seed", 0)))


def step_wind(dist: DisturbanceProfile, t: float) -> np.ndarray:
    """Deterministic part of the wind: sum of the active step forces."""
    f = np.zeros(3)
    for t0, t1, force in dist.wind_steps:
        if t0 <= t < t1:
            f += force
    return f


def sample_wind(dist: DisturbanceProfile, t: float,
                rng: np.random.Generator) -> np.ndarray:
    """Active step forces plus seeded Gaussian gust noise (world frame, N)."""
    f = step_wind(dist, t)
    if dist.gust_noise_std > 0.0:
        f = f + rng.normal(0.0, dist.gust_noise_std, 3)
    return f


def wind_rows(dist: DisturbanceProfile, dt: float, n_steps: int) -> np.ndarray:
    """Per-step zero-order-hold wind samples for a whole run (one draw per
    step, reproducible from the profile seed alone)."""
    rng = np.random.default_rng(dist.seed)
    rows = np.empty((n_steps, 3))
    for k in range(n_steps):
        rows[k] = step_wind(dist, k * dt)
    if dist.gust_noise_std > 0.0:
        rows += rng.normal(0.0, dist.gust_noise_std, (n_steps, 3))
    return rows


def step(model: VehicleModel, state: AmmState, cmd, dist: DisturbanceProfile
         | None = None, dt: float = DEFAULT_DT, clamp: bool = True,
         disable_rotor_lag: bool = False) -> AmmState:
    """Advance the coupled dynamics one RK4 step.

    ``cmd`` is an ActuatorVector (joint torques + rotor speeds) or a plain
    rotor-speed array.  Commands outside actuator limits are clamped when
    ``clamp`` is set, else rejected.  Wind is sampled at the step start and
    held; the draw is keyed by (profile seed, step index) so identical
    inputs replay bitwise.
    """
    if not 0.0 < dt <= 0.01:
        raise ValueError("dt must be in (0, 0.01]")
    if hasattr(cmd, "rotor_speeds_sq"):
        speeds = np.asarray(cmd.rotor_speeds_sq, float)
        joint_tau = np.asarray(cmd.joint_torques, float)
    else:
        speeds = np.asarray(cmd, float)
        joint_tau = np.zeros(2)
    limit = model.geometry.max_speed_sq
    if clamp:
        speeds = np.minimum(np.maximum(speeds, 0.0), limit)
    elif speeds.min() < 0 or speeds.max() > limit:
        raise ValueError("rotor command outside [0, max_speed_sq]")

    if dist is None:
        wind = np.zeros(3)
    else:
        k = int(round(state.time / dt))
        wind = sample_wind(dist, state.time,
                           np.random.default_rng((dist.seed, k)))

    arm_ctl = np.zeros(9)
    arm_ctl[7:9] = joint_tau
    tc = 0.0 if disable_rotor_lag else model.first_order_rotor_tc
    s = state.as_vector(model.rotor_count)
    if state.rotor_speeds_sq is None and tc > 0.0:
        s[17:] = speeds  # start the lag state on the commanded value
    try:
        out = kernels.rk4_step(
            s, dt, model.rotor_count, speeds, wind, np.zeros(3), np.zeros(3),
            0.0, model.mass, model.inertia, np.linalg.inv(model.inertia),
            model.mapping().entries, tc, 1 if model.mounted_arm else 0,
            model.arm_param_vector(), arm_ctl, GRAVITY)
    except np.linalg.LinAlgError as e:
        raise NonFiniteState(f"state non-finite at t={state.time}: {e}") from e
    if not np.isfinite(out).all():
        raise NonFiniteState(f"state non-finite after step at t={state.time}")
    return AmmState.from_vector(out, state.time + dt)


def system_momentum(model: VehicleModel, state: AmmState):
    """(linear, angular-about-origin) momentum of base plus arm links.

    Built directly from body kinematics, independent of the simulator's
    mass-matrix assembly, so conservation checks exercise both paths.
    """
    p = state.base_position
    R = kernels.quat_to_rot(state.base_orientation)
    v = state.base_lin_vel
    w0 = R @ state.base_ang_vel
    I0w = R @ model.inertia @ R.T
    P = model.mass * v
    L = I0w @ w0 + np.cross(p, model.mass * v)
    if model.mounted_arm is not None:
        ap = model.arm_param_vector()
        m1, m2, i1, i2 = ap[2], ap[3], ap[6], ap[7]
        ahat, o1, o2, pc1, pc2, pe, u1, u2 = kernels.arm_frames(
            p, R, state.arm_q[0], state.arm_q[1], ap)
        qd1, qd2 = state.arm_qd
        w1 = w0 + ahat * qd1
        w2 = w0 + ahat * (qd1 + qd2)
        vc1 = v + np.cross(w0, o1 - p) + np.cross(w1, pc1 - o1)
        vc2 = (v + np.cross(w0, o1 - p) + np.cross(w1, o2 - o1)
               + np.cross(w2, pc2 - o2))
        I1w = i1 * (np.eye(3) - np.outer(u1, u1))
        I2w = i2 * (np.eye(3) - np.outer(u2, u2))
        P = P + m1 * vc1 + m2 * vc2
        L = (L + I1w @ w1 + np.cross(pc1, m1 * vc1)
             + I2w @ w2 + np.cross(pc2, m2 * vc2))
    return P, L


def system_energy(model: VehicleModel, state: AmmState,
                  gravity: float = GRAVITY) -> float:
    """Kinetic plus gravitational potential energy of base plus arm."""
    p = state.base_position
    R = kernels.quat_to_rot(state.base_orientation)
    v = state.base_lin_vel
    wb = state.base_ang_vel
    w0 = R @ wb
    T = 0.5 * (model.mass * v @ v + wb @ model.inertia @ wb)
    V = gravity * model.mass * p[2]
    if model.mounted_arm is not None:
        ap = model.arm_param_vector()
        m1, m2, i1, i2 = ap[2], ap[3], ap[6], ap[7]
        ahat, o1, o2, pc1, pc2, pe, u1, u2 = kernels.arm_frames(
            p, R, state.arm_q[0], state.arm_q[1], ap)
        qd1, qd2 = state.arm_qd
        w1 = w0 + ahat * qd1
        w2 = w0 + ahat * (qd1 + qd2)
        vc1 = v + np.cross(w0, o1 - p) + np.cross(w1, pc1 - o1)
        vc2 = (v + np.cross(w0, o1 - p) + np.cross(w1, o2 - o1)
               + np.cross(w2, pc2 - o2))
        I1w = i1 * (np.eye(3) - np.outer(u1, u1))
        I2w = i2 * (np.eye(3) - np.outer(u2, u2))
        T += 0.5 * (m1 * vc1 @ vc1 + w1 @ I1w @ w1
                    + m2 * vc2 @ vc2 + w2 @ I2w @ w2)
        V += gravity * (m1 * pc1[2] + m2 * pc2[2])
    return T + V


def endpoint_world(model: VehicleModel, state: AmmState) -> np.ndarray:
    """World position of the arm endpoint."""
    if model.mounted_arm is None:
        raise ValueError("vehicle has no mounted arm")
    R = kernels.quat_to_rot(state.base_orientation)
    frames = kernels.arm_frames(state.base_position, R, state.arm_q[0],
                                state.arm_q[1], model.arm_param_vector())
    return frames[5]
