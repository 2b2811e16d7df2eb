"""Tilted-rotor actuation: mapping matrix, rank analysis, inverse allocation,
and the cant-angle sweep.

Rotor i sits at azimuth psi_i on a circle of radius ``arm_length``.  Its
thrust axis starts at body +z and is tilted twice: first about the arm's
radial direction by the alternating cant angle (sign follows the rotor's
spin direction), then about the tangential direction by the dihedral angle.
Column i of the mapping matrix is the body wrench produced by a unit of
squared rotor speed:

    force_i  = kf * axis_i
    torque_i = r_i x force_i + spin_i * km * axis_i

The reaction (drag) torque term gives a parallel-rotor layout its yaw
authority, which is what limits that layout to rank 4.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyRange, InfeasibleWrench, SingularMapping

GRAVITY = 9.81


def _alternating(n: int) -> tuple[int, ...]:
    return tuple(1 if i % 2 == 0 else -1 for i in range(n))


@dataclass(frozen=True)
class RotorGeometry:
    """Rotor layout of a multirotor with canted/dihedral-tilted rotors."""

    rotor_count: int = 6
    arm_length: float = 0.30
    cant: float = math.radians(28.0)
    dihedral: float = 0.0
    thrust_coeff: float = 2.0e-5
    drag_coeff: float = 4.0e-7
    max_speed_sq: float = 640000.0
    rotor_angles: tuple[float, ...] = ()
    spin_directions: tuple[int, ...] = ()

    def __post_init__(self):
        if self.rotor_count < 4:
            raise ValueError("rotor_count must be >= 4")
        if self.arm_length <= 0 or self.thrust_coeff <= 0 or self.max_speed_sq <= 0:
            raise ValueError("arm_length, thrust_coeff, max_speed_sq must be > 0")
        if self.drag_coeff < 0:
            raise ValueError("drag_coeff must be >= 0")
        if not (abs(self.cant) < math.pi / 2 and abs(self.dihedral) < math.pi / 2):
            raise ValueError("|cant| and |dihedral| must be < pi/2")
        if not self.rotor_angles:
            step = 2.0 * math.pi / self.rotor_count
            object.__setattr__(
                self, "rotor_angles",
                tuple(i * step for i in range(self.rotor_count)))
        if not self.spin_directions:
            object.__setattr__(self, "spin_directions",
                               _alternating(self.rotor_count))
        if len(self.rotor_angles) != self.rotor_count:
            raise ValueError("rotor_angles length must match rotor_count")
        if len(self.spin_directions) != self.rotor_count:
            raise ValueError("spin_directions length must match rotor_count")
        if sum(self.spin_directions) != 0:
            raise ValueError("spin_directions must sum to 0")
        for a, b in zip(self.spin_directions,
                        self.spin_directions[1:] + self.spin_directions[:1]):
            if a == b:
                raise ValueError("spin_directions must alternate around the circle")

    @classmethod
    def from_json(cls, path) -> "RotorGeometry":
        """Load geometry from a JSON document.

        Keys: rotor_count, arm_length_m, cant_deg, dihedral_deg, kf, km,
        max_rpm.  Optional: rotor_angles_deg, spin_directions.
        """
        with open(path) as f:
            doc = json.load(f)
        try:
            max_w = doc["max_rpm"] * 2.0 * math.pi / 60.0
            kwargs = dict(
                rotor_count=int(doc["rotor_count"]),
                arm_length=float(doc["arm_length_m"]),
                cant=math.radians(float(doc["cant_deg"])),
                dihedral=math.radians(float(doc["dihedral_deg"])),
                thrust_coeff=float(doc["kf"]),
                drag_coeff=float(doc["km"]),
                max_speed_sq=max_w * max_w,
            )
        except KeyError as e:
            raise ValueError(f"geometry file {path} missing key {e}") from e
        if "rotor_angles_deg" in doc:
            kwargs["rotor_angles"] = tuple(
                math.radians(a) for a in doc["rotor_angles_deg"])
        if "spin_directions" in doc:
            kwargs["spin_directions"] = tuple(int(s) for s in doc["spin_directions"])
        return cls(**kwargs)


@dataclass(frozen=True)
class Wrench:
    """6-D force/torque pair."""

    force: np.ndarray
    torque: np.ndarray
    frame: str = "body"

    def __post_init__(self):
        object.__setattr__(self, "force", np.asarray(self.force, dtype=float))
        object.__setattr__(self, "torque", np.asarray(self.torque, dtype=float))
        if self.force.shape != (3,) or self.torque.shape != (3,):
            raise ValueError("force and torque must be 3-vectors")
        if not (np.isfinite(self.force).all() and np.isfinite(self.torque).all()):
            raise ValueError("wrench entries must be finite")
        if self.frame not in ("body", "world"):
            raise ValueError("frame must be 'body' or 'world'")

    @classmethod
    def from_array(cls, w, frame: str = "body") -> "Wrench":
        w = np.asarray(w, dtype=float)
        return cls(force=w[0:3], torque=w[3:6], frame=frame)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])


@dataclass(frozen=True)
class RotorCommand:
    """Per-rotor squared angular speeds; ``saturated`` records whether a
    clamp-mode allocation had to cut into the request."""

    speeds_sq: np.ndarray
    saturated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "speeds_sq",
                           np.asarray(self.speeds_sq, dtype=float))


@dataclass(frozen=True)
class MappingMatrix:
    """Squared-rotor-speed to body-wrench map (6 x rotor_count)."""

    entries: np.ndarray
    source_geometry: RotorGeometry = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "entries", np.asarray(self.entries, dtype=float))
        if self.entries.shape[0] != 6:
            raise ValueError("mapping matrix must have 6 rows")


def rotor_axes(geom: RotorGeometry) -> np.ndarray:
    """Unit thrust axes (rotor_count x 3): cant about radial, dihedral about
    tangential, applied to body +z in that order."""
    axes = np.empty((geom.rotor_count, 3))
    for i in range(geom.rotor_count):
        psi = geom.rotor_angles[i]
        radial = np.array([math.cos(psi), math.sin(psi), 0.0])
        tangential = np.array([-math.sin(psi), math.cos(psi), 0.0])
        axis = np.array([0.0, 0.0, 1.0])
        axis = _rodrigues(radial, geom.spin_directions[i] * geom.cant) @ axis
        axis = _rodrigues(tangential, geom.dihedral) @ axis
        axes[i] = axis
    return axes


def _rodrigues(axis: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    K = np.array([[0.0, -axis[2], axis[1]],
                  [axis[2], 0.0, -axis[0]],
                  [-axis[1], axis[0], 0.0]])
    return np.eye(3) * c + K * s + np.outer(axis, axis) * (1.0 - c)


def build_mapping_matrix(geom: RotorGeometry) -> MappingMatrix:
    """Assemble the 6 x n actuation map from the rotor layout."""
    n = geom.rotor_count
    M = np.empty((6, n))
    axes = rotor_axes(geom)
    for i in range(n):
        psi = geom.rotor_angles[i]
        r = geom.arm_length * np.array([math.cos(psi), math.sin(psi), 0.0])
        f = geom.thrust_coeff * axes[i]
        tau = np.cross(r, f) + geom.spin_directions[i] * geom.drag_coeff * axes[i]
        M[0:3, i] = f
        M[3:6, i] = tau
    return MappingMatrix(entries=M, source_geometry=geom)


def matrix_rank(M: MappingMatrix | np.ndarray, tol: float = 1e-8) -> int:
    """Numerical rank: singular values above tol * largest singular value."""
    if tol <= 0:
        raise ValueError("tol must be > 0")
    entries = M.entries if isinstance(M, MappingMatrix) else np.asarray(M)
    sv = np.linalg.svd(entries, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def _solve_speeds(entries: np.ndarray, w: np.ndarray,
                  rank: int) -> tuple[np.ndarray, float]:
    """Raw allocation solve; returns (speeds_sq, residual norm)."""
    n = entries.shape[1]
    if rank == 6 and n == 6:
        sol = np.linalg.solve(entries, w)
        return sol, 0.0
    sol, *_ = np.linalg.lstsq(entries, w, rcond=None)
    resid = float(np.linalg.norm(entries @ sol - w))
    return sol, resid


def allocate_wrench(M: MappingMatrix, w: Wrench | np.ndarray,
                    clamp: bool = False,
                    rank_tol: float = 1e-8) -> RotorCommand:
    """Rotor speeds realizing a body wrench.

    Square full-rank maps are inverted exactly; rank-deficient maps fall back
    to the minimum-norm least-squares solution and raise SingularMapping when
    the request has components outside the achievable span (e.g. lateral
    force on a parallel-rotor quadrotor).  Speeds outside [0, max_speed_sq]
    raise InfeasibleWrench unless ``clamp`` is set, in which case they are
    saturated (the simulator-loop mode).
    """
    warr = w.as_array() if isinstance(w, Wrench) else np.asarray(w, dtype=float)
    entries = M.entries
    rank = matrix_rank(M, rank_tol)
    sol, resid = _solve_speeds(entries, warr, rank)
    wnorm = float(np.linalg.norm(warr))
    if rank < 6 and resid > max(1e-9 * wnorm, 1e-12):
        raise SingularMapping(
            f"mapping rank {rank} < 6 cannot realize requested wrench "
            f"(residual {resid:.3e})")
    limit = M.source_geometry.max_speed_sq if M.source_geometry else np.inf
    tol = 1e-9 * max(limit, 1.0)
    outside = sol.min() < -tol or sol.max() > limit + tol
    if outside and not clamp:
        raise InfeasibleWrench(
            f"allocation outside [0, {limit:g}]: min {sol.min():.4g}, "
            f"max {sol.max():.4g}")
    sol = np.minimum(np.maximum(sol, 0.0), limit)
    return RotorCommand(speeds_sq=sol, saturated=bool(outside))


def wrench_from_command(M: MappingMatrix, cmd: RotorCommand | np.ndarray) -> Wrench:
    """Forward map: body wrench produced by the given squared speeds."""
    arr = cmd.speeds_sq if isinstance(cmd, RotorCommand) else np.asarray(cmd)
    return Wrench.from_array(M.entries @ arr, frame="body")


def hover_speeds(M: MappingMatrix, weight: float) -> np.ndarray:
    """Speeds balancing a pure +z force of ``weight`` newtons (least squares
    on rank-deficient maps, so the parallel-rotor baseline hovers too)."""
    w = np.array([0.0, 0.0, weight, 0.0, 0.0, 0.0])
    rank = matrix_rank(M)
    sol, _ = _solve_speeds(M.entries, w, rank)
    return sol


def hover_efficiency(geom: RotorGeometry, weight: float) -> float:
    """Hover force per unit of total squared rotor speed, N/(rad^2/s^2).

    For a symmetric layout this equals kf*cos(cant), so it is maximal for
    parallel rotors and decays as the rotors tilt.
    """
    M = build_mapping_matrix(geom)
    sol = hover_speeds(M, weight)
    return weight / float(np.sum(sol))


def max_lateral_force(geom: RotorGeometry, weight: float,
                      n_directions: int = 64) -> float:
    """Largest lateral force achievable in every horizontal direction while
    hovering, with all rotor speeds inside [0, max_speed_sq].

    Allocation is linear, so for each direction the feasible scale is found
    exactly from the per-rotor headroom; the reported value is the minimum
    over a direction grid (the inscribed-circle radius of the lateral slice
    of the actuation polytope).
    """
    M = build_mapping_matrix(geom)
    if matrix_rank(M) < 6:
        return 0.0
    base = hover_speeds(M, weight)
    limit = geom.max_speed_sq
    if base.min() < 0 or base.max() > limit:
        return 0.0
    Minv = np.linalg.inv(M.entries)
    best = np.inf
    for k in range(n_directions):
        th = 2.0 * math.pi * k / n_directions
        delta = Minv @ np.array([math.cos(th), math.sin(th), 0.0, 0.0, 0.0, 0.0])
        s_max = np.inf
        for i in range(delta.size):
            if delta[i] > 0:
                s_max = min(s_max, (limit - base[i]) / delta[i])
            elif delta[i] < 0:
                s_max = min(s_max, -base[i] / delta[i])
        best = min(best, s_max)
    return float(max(best, 0.0))


@dataclass(frozen=True)
class SweepReport:
    """Cant-angle sweep of hover efficiency and guaranteed lateral force."""

    cant_deg: np.ndarray
    max_lateral_force_n: np.ndarray
    hover_efficiency: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("cant_deg,max_lateral_force_N,hover_efficiency\n")
            for c, l, e in zip(self.cant_deg, self.max_lateral_force_n,
                               self.hover_efficiency):
                f.write(f"{c:.17g},{l:.17g},{e:.17g}\n")


def sweep_cant(geom: RotorGeometry, cant_min: float, cant_max: float,
               step: float, weight: float | None = None) -> SweepReport:
    """Evaluate the two sweep metrics over cant angles (degrees).

    ``weight`` defaults to 30% of max collective thrust of the untilted
    layout, which keeps hover feasible across the whole range.
    """
    if step <= 0 or cant_max < cant_min:
        raise EmptyRange(f"invalid cant range [{cant_min}, {cant_max}] step {step}")
    if cant_min <= 0.0 or cant_max >= 90.0:
        raise EmptyRange("cant range must lie within (0, 90) degrees")
    if weight is None:
        weight = 0.3 * geom.rotor_count * geom.thrust_coeff * geom.max_speed_sq
    values = np.arange(cant_min, cant_max + 0.5 * step, step)
    if values.size == 0:
        raise EmptyRange("cant range contains no sample points")
    eff = np.empty(values.size)
    lat = np.empty(values.size)
    for k, deg in enumerate(values):
        g = RotorGeometry(
            rotor_count=geom.rotor_count, arm_length=geom.arm_length,
            cant=math.radians(float(deg)), dihedral=geom.dihedral,
            thrust_coeff=geom.thrust_coeff, drag_coeff=geom.drag_coeff,
            max_speed_sq=geom.max_speed_sq, rotor_angles=geom.rotor_angles,
            spin_directions=geom.spin_directions)
        eff[k] = hover_efficiency(g, weight)
        lat[k] = max_lateral_force(g, weight)
    return SweepReport(cant_deg=values, max_lateral_force_n=lat,
                       hover_efficiency=eff)
