"""On-board manipulators: 2-DOF planar arm and the 6-RUS hexa platform.

Planar arm: links move in a vertical plane (x horizontal, z up), joint
angles measured from +x, gravity along -z.  Closed-form kinematics,
Jacobian, and rigid-body joint torques.

Hexa: six revolute-universal-spherical chains.  Each crank rotates about a
fixed base axis; a rigid rod couples the crank tip to a platform anchor.
IK is closed form per chain; FK is Newton iteration on the six rod-length
residuals; the constraint Jacobians give the platform-twist to crank-rate
map and the statics dual to it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NoConvergence, SingularConfiguration, Unreachable

_Z = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class JointState:
    """Joint positions and velocities of one manipulator."""

    q: np.ndarray
    qd: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "qd", np.asarray(self.qd, dtype=float))
        if self.q.shape != self.qd.shape:
            raise ValueError("q and qd must have the same length")


@dataclass(frozen=True)
class PlatformPose:
    """Position plus unit quaternion (w, x, y, z) of the moving platform."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "orientation",
                           np.asarray(self.orientation, dtype=float))
        if abs(np.linalg.norm(self.orientation) - 1.0) > 1e-12:
            raise ValueError("orientation quaternion must be normalized")

    def rotation(self) -> np.ndarray:
        return kernels.quat_to_rot(self.orientation)

    @classmethod
    def identity(cls, position=(0.0, 0.0, 0.0)) -> "PlatformPose":
        return cls(position=np.asarray(position, dtype=float),
                   orientation=np.array([1.0, 0.0, 0.0, 0.0]))


@dataclass(frozen=True)
class PlanarArmModel:
    """Two-link arm rigidly mounted on the vehicle, moving in a body plane."""

    link_lengths: tuple[float, float] = (0.20, 0.16)
    link_masses: tuple[float, float] = (0.12, 0.08)
    com_offsets: tuple[float, float] = (0.10, 0.08)
    link_inertias: tuple[float, float] = (4.0e-4, 1.8e-4)
    mount_offset: tuple[float, float, float] = (0.0, 0.0, 0.06)
    mount_axis: tuple[float, float, float] = (0.0, -1.0, 0.0)

    def __post_init__(self):
        if min(self.link_lengths) <= 0 or min(self.link_masses) <= 0:
            raise ValueError("link lengths and masses must be > 0")
        if min(self.link_inertias) < 0:
            raise ValueError("link inertias must be >= 0")

    @classmethod
    def from_json(cls, path) -> "PlanarArmModel":
        with open(path) as f:
            doc = json.load(f)
        return cls(
            link_lengths=tuple(doc["link_lengths_m"]),
            link_masses=tuple(doc["link_masses_kg"]),
            com_offsets=tuple(doc["com_offsets_m"]),
            link_inertias=tuple(doc["link_inertias_kgm2"]),
            mount_offset=tuple(doc.get("mount_offset_m", (0.0, 0.0, 0.06))),
            mount_axis=tuple(doc.get("mount_axis", (0.0, -1.0, 0.0))),
        )

    def param_vector(self) -> np.ndarray:
        """Flat layout consumed by the simulation kernels."""
        l1, l2 = self.link_lengths
        m1, m2 = self.link_masses
        lc1, lc2 = self.com_offsets
        i1, i2 = self.link_inertias
        axis = np.asarray(self.mount_axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        ex = np.array([1.0, 0.0, 0.0])
        return np.array([l1, l2, m1, m2, lc1, lc2, i1, i2,
                         *self.mount_offset, *axis, *ex])


def planar_fk(model: PlanarArmModel, q) -> np.ndarray:
    """Tip position (x, z) in the arm plane."""
    q = np.asarray(q, dtype=float)
    l1, l2 = model.link_lengths
    return np.array([l1 * math.cos(q[0]) + l2 * math.cos(q[0] + q[1]),
                     l1 * math.sin(q[0]) + l2 * math.sin(q[0] + q[1])])


def planar_jacobian(model: PlanarArmModel, q) -> np.ndarray:
    """d(tip)/dq, 2x2."""
    q = np.asarray(q, dtype=float)
    l1, l2 = model.link_lengths
    s1, c1 = math.sin(q[0]), math.cos(q[0])
    s12, c12 = math.sin(q[0] + q[1]), math.cos(q[0] + q[1])
    return np.array([[-l1 * s1 - l2 * s12, -l2 * s12],
                     [l1 * c1 + l2 * c12, l2 * c12]])


def planar_inverse_dynamics(model: PlanarArmModel, q, qd, qdd,
                            gravity: float = 9.81) -> np.ndarray:
    """Joint torques for the given motion (inertial + Coriolis + gravity)."""
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    qdd = np.asarray(qdd, dtype=float)
    l1, _ = model.link_lengths
    m1, m2 = model.link_masses
    lc1, lc2 = model.com_offsets
    i1, i2 = model.link_inertias
    M, C, G = kernels.planar_arm_matrices(l1, lc1, lc2, m1, m2, i1, i2,
                                          q[1], qd[0], qd[1], gravity, q[0])
    return M @ qdd + C + G


def planar_forward_dynamics(model: PlanarArmModel, q, qd, tau,
                            gravity: float = 9.81) -> np.ndarray:
    """Joint accelerations under the given torques (fixed base)."""
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    tau = np.asarray(tau, dtype=float)
    l1, _ = model.link_lengths
    m1, m2 = model.link_masses
    lc1, lc2 = model.com_offsets
    i1, i2 = model.link_inertias
    M, C, G = kernels.planar_arm_matrices(l1, lc1, lc2, m1, m2, i1, i2,
                                          q[1], qd[0], qd[1], gravity, q[0])
    return np.linalg.solve(M, tau - C - G)


def planar_energy(model: PlanarArmModel, q, qd, gravity: float = 9.81) -> float:
    """Kinetic plus potential energy of the fixed-base arm."""
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    l1, _ = model.link_lengths
    m1, m2 = model.link_masses
    lc1, lc2 = model.com_offsets
    i1, i2 = model.link_inertias
    M, _, _ = kernels.planar_arm_matrices(l1, lc1, lc2, m1, m2, i1, i2,
                                          q[1], qd[0], qd[1], gravity, q[0])
    T = 0.5 * qd @ M @ qd
    V = gravity * (m1 * lc1 * math.sin(q[0])
                   + m2 * (l1 * math.sin(q[0]) + lc2 * math.sin(q[0] + q[1])))
    return T + V


# --- 6-RUS hexa -------------------------------------------------------------


@dataclass(frozen=True)
class HexaModel:
    """Geometry and platform inertia of a 6-RUS parallel manipulator."""

    base_anchor_points: np.ndarray
    platform_anchor_points: np.ndarray
    crank_length: float
    rod_length: float
    crank_axes: np.ndarray
    platform_mass: float = 0.35
    platform_inertia: np.ndarray = field(
        default_factory=lambda: np.diag([4e-4, 4e-4, 7e-4]))
    crank_ref: np.ndarray | None = None
    home_height: float = 0.11

    def __post_init__(self):
        for name in ("base_anchor_points", "platform_anchor_points", "crank_axes"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), float))
        object.__setattr__(self, "platform_inertia",
                           np.asarray(self.platform_inertia, float))
        if self.base_anchor_points.shape != (6, 3):
            raise ValueError("need 6 base anchors")
        if not (self.rod_length > self.crank_length > 0):
            raise ValueError("rod_length > crank_length > 0 required")
        axes = self.crank_axes / np.linalg.norm(self.crank_axes, axis=1)[:, None]
        object.__setattr__(self, "crank_axes", axes)
        if self.crank_ref is None:
            ref = np.cross(axes, _Z)
        else:
            ref = np.asarray(self.crank_ref, float)
        ref = ref / np.linalg.norm(ref, axis=1)[:, None]
        object.__setattr__(self, "crank_ref", ref)

    def crank_basis(self) -> tuple[np.ndarray, np.ndarray]:
        """(e1, e2) per chain: crank direction at angle 0 and at +90 deg."""
        e1 = self.crank_ref
        e2 = np.cross(e1, self.crank_axes)
        return e1, e2

    @classmethod
    def from_json(cls, path) -> "HexaModel":
        with open(path) as f:
            doc = json.load(f)
        inertia = np.asarray(doc.get("platform_inertia_kgm2",
                                     [4e-4, 4e-4, 7e-4]), float)
        if inertia.ndim == 1:
            inertia = np.diag(inertia)
        return cls(
            base_anchor_points=np.asarray(doc["base_anchors_m"], float),
            platform_anchor_points=np.asarray(doc["platform_anchors_m"], float),
            crank_length=float(doc["crank_length_m"]),
            rod_length=float(doc["rod_length_m"]),
            crank_axes=np.asarray(doc["crank_axes"], float),
            platform_mass=float(doc.get("platform_mass_kg", 0.35)),
            platform_inertia=inertia,
            home_height=float(doc.get("home_height_m", 0.11)),
        )


def default_hexa_model() -> HexaModel:
    """Symmetric desk-scale hexa: anchor pairs on 120-degree centers, each
    base anchor linked to the platform anchor 60 degrees away, giving the
    three-fold mirror symmetry the neutral-pose tests rely on."""
    gamma_b = math.radians(12.0)
    gamma_p = math.radians(12.0)
    rb, rp = 0.12, 0.08
    phi = []
    psi = []
    for k in range(3):
        c = 2.0 * math.pi * k / 3.0
        phi += [c - gamma_b, c + gamma_b]
        psi += [c + math.radians(60.0) - gamma_p, c - math.radians(60.0) + gamma_p]
    base = np.array([[rb * math.cos(a), rb * math.sin(a), 0.0] for a in phi])
    plat = np.array([[rp * math.cos(a), rp * math.sin(a), 0.0] for a in psi])
    axes = np.array([[-math.sin(a), math.cos(a), 0.0] for a in phi])
    return HexaModel(base_anchor_points=base, platform_anchor_points=plat,
                     crank_length=0.05, rod_length=0.14, crank_axes=axes)


def neutral_pose(model: HexaModel) -> PlatformPose:
    return PlatformPose.identity((0.0, 0.0, model.home_height))


@dataclass(frozen=True)
class JacobianSet:
    """Constraint Jacobians of the hexa and their composition.

    Rows are the six rod constraints scaled to dimensionless crank terms:
    J_gamma (6x6 diagonal) w.r.t. crank angles, J_X (6x6) w.r.t. platform
    twist (world linear velocity, world angular velocity), and
    J_pm = J_gamma^-1 J_X, the platform-twist to crank-rate map.
    """

    J_gamma: np.ndarray
    J_X: np.ndarray
    J_pm: np.ndarray


def _chain_geometry(model: HexaModel, pose: PlatformPose):
    R = pose.rotation()
    anchors_w = pose.position + (R @ model.platform_anchor_points.T).T
    e1, e2 = model.crank_basis()
    return anchors_w, e1, e2, R


def hexa_ik(model: HexaModel, pose: PlatformPose) -> np.ndarray:
    """Crank angles placing every crank tip at rod distance from its anchor.

    Fixed branch: of the two circle intersections every chain takes the
    outward one (crank tip pushed away from the rod), the usual crank-up
    working branch of this architecture.
    """
    anchors_w, e1, e2, _ = _chain_geometry(model, pose)
    c = model.crank_length
    r = model.rod_length
    angles = np.empty(6)
    for i in range(6):
        d = anchors_w[i] - model.base_anchor_points[i]
        A = 2.0 * c * (d @ e1[i])
        B = 2.0 * c * (d @ e2[i])
        C = (d @ d) + c * c - r * r
        amp = math.hypot(A, B)
        if amp < 1e-15 or abs(C) > amp:
            raise Unreachable(
                f"chain {i}: pose outside workspace (|C|/amp="
                f"{abs(C) / max(amp, 1e-300):.3f})")
        angles[i] = math.atan2(B, A) - math.acos(max(-1.0, min(1.0, C / amp)))
    return angles


def crank_tips(model: HexaModel, angles) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    e1, e2 = model.crank_basis()
    return (model.base_anchor_points
            + model.crank_length * (np.cos(angles)[:, None] * e1
                                    + np.sin(angles)[:, None] * e2))


def rod_residuals(model: HexaModel, angles, pose: PlatformPose) -> np.ndarray:
    """Signed rod-length errors (m) for each chain."""
    anchors_w, _, _, _ = _chain_geometry(model, pose)
    tips = crank_tips(model, angles)
    return np.linalg.norm(anchors_w - tips, axis=1) - model.rod_length


def hexa_fk(model: HexaModel, angles, guess: PlatformPose,
            tol: float = 1e-10, max_iter: int = 50) -> PlatformPose:
    """Newton iteration on the rod-length residuals from a pose guess."""
    angles = np.asarray(angles, dtype=float)
    tips = crank_tips(model, angles)
    x = guess.position.copy()
    quat = guess.orientation.copy()
    reach = model.rod_length + model.crank_length
    for _ in range(max_iter):
        R = kernels.quat_to_rot(quat)
        anchors_w = x + (R @ model.platform_anchor_points.T).T
        s = anchors_w - tips
        lengths = np.linalg.norm(s, axis=1)
        res = lengths - model.rod_length
        if np.max(np.abs(res)) < tol:
            return PlatformPose(position=x, orientation=quat)
        J = np.empty((6, 6))
        for i in range(6):
            shat = s[i] / lengths[i]
            J[i, 0:3] = shat
            J[i, 3:6] = np.cross(R @ model.platform_anchor_points[i], shat)
        try:
            delta = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError as e:
            raise NoConvergence(f"singular FK Jacobian: {e}") from e
        if not np.isfinite(delta).all() or np.linalg.norm(delta[0:3]) > 5.0 * reach:
            raise NoConvergence("FK Newton step left the solution basin")
        x = x + delta[0:3]
        quat = kernels.quat_normalize(
            kernels.quat_mul(kernels.rotvec_to_quat(delta[3:6]), quat))
    raise NoConvergence(f"FK did not reach {tol} m in {max_iter} iterations")


def hexa_jacobians(model: HexaModel, angles, pose: PlatformPose,
                   det_tol: float = 1e-10) -> JacobianSet:
    """Differentiate the rod constraints at a consistent (angles, pose) state.

    Rows are normalized by crank length and rod length so that the J_gamma
    diagonal is the cosine-like fold measure of each chain; the composition
    J_pm is unaffected by the common row scaling.
    """
    angles = np.asarray(angles, dtype=float)
    anchors_w, e1, e2, R = _chain_geometry(model, pose)
    tips = crank_tips(model, angles)
    c = model.crank_length
    Jg = np.zeros((6, 6))
    Jx = np.empty((6, 6))
    for i in range(6):
        s = anchors_w[i] - tips[i]
        shat = s / np.linalg.norm(s)
        dk = c * (-math.sin(angles[i]) * e1[i] + math.cos(angles[i]) * e2[i])
        Jg[i, i] = (shat @ dk) / c
        Jx[i, 0:3] = shat / c
        Jx[i, 3:6] = np.cross(R @ model.platform_anchor_points[i], shat) / c
    det = float(np.prod(np.diag(Jg)))
    if abs(det) < det_tol:
        raise SingularConfiguration(
            f"actuation singularity: |det J_gamma| = {abs(det):.3e}")
    Jpm = Jx / np.diag(Jg)[:, None]
    return JacobianSet(J_gamma=Jg, J_X=Jx, J_pm=Jpm)


def hexa_torques(J: JacobianSet, wrench) -> np.ndarray:
    """Crank torques that exert the given platform wrench.

    Statics dual of the twist map: with crank rates q_dot = J_pm x_dot,
    virtual work fixes J_pm^T Gamma = F, i.e. Gamma = J_pm^-T F.  Wrench is
    (force, torque) in the manipulator base frame, the frame J_pm's twist
    side uses.
    """
    if hasattr(wrench, "as_array"):
        wrench = wrench.as_array()
    wrench = np.asarray(wrench, dtype=float)
    return np.linalg.solve(J.J_pm.T, wrench)
