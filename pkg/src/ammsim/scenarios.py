"""Declarative scenarios, the closed-loop runner, trace files, and metrics.

A scenario bundles one vehicle, one controller, a setpoint schedule, a
disturbance profile, and an optional arm task.  Runs are deterministic:
every random draw comes from generators keyed by the disturbance seed, so a
rerun with the same manifest reproduces the trace byte for byte.

Trace CSV schema (planar-AMM layout; unused columns stay empty):

    t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,q1,q2,qd1,qd2,epx,epz,
    fx,fy,fz,tx,ty,tz,w1,w2,w3,w4,w5,w6,windx,windy,windz,flags

A ``<name>.meta.json`` sidecar persists the setpoint schedule and endpoint
target so metrics recompute identically from disk.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import control, kernels
from .allocation import GRAVITY, allocate_wrench
from .control import ControllerMemory, EndpointPidState, GainSet, Setpoint
from .dynamics import (DEFAULT_DT, AmmState, DisturbanceProfile, VehicleModel,
                       build_quadrotor_model, default_hexrotor, endpoint_world,
                       wind_rows)
from .errors import (EmptyTrace, EmptyWindow, InvalidScenario, NearSingularArm,
                     NonFiniteState)

TRACE_COLUMNS = ("t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,q1,q2,qd1,qd2,"
                 "epx,epz,fx,fy,fz,tx,ty,tz,w1,w2,w3,w4,w5,w6,"
                 "windx,windy,windz,flags")

FLAG_SATURATED = 1
FLAG_NEAR_SINGULAR_ARM = 2

DEFAULT_ARM_Q = (math.pi / 2.0, -math.pi / 3.0)


@dataclass(frozen=True)
class Scenario:
    """One experiment definition."""

    name: str
    vehicle: str = "hexrotor"
    controller_mode: str = "hexrotor_ppd"
    gains: GainSet | None = None
    duration: float = 10.0
    dt: float = DEFAULT_DT
    control_dt: float = 5e-3
    setpoint_schedule: tuple = ()
    disturbance: DisturbanceProfile = field(default_factory=DisturbanceProfile)
    arm_mode: str = "none"
    arm_trajectory: dict | None = None
    initial_position: tuple = (0.0, 0.0, 1.0)
    initial_arm_q: tuple = DEFAULT_ARM_Q
    rotor_lag: bool = True
    output: str | None = None

    def __post_init__(self):
        if self.duration <= 0 or self.dt <= 0:
            raise InvalidScenario("duration and dt must be > 0")
        if self.duration < self.dt:
            raise InvalidScenario("duration shorter than one dt")
        if self.controller_mode not in ("hexrotor_ppd", "quadrotor_cascade"):
            raise InvalidScenario(f"unknown controller {self.controller_mode}")
        if self.arm_mode not in ("none", "frozen", "endpoint_pid"):
            raise InvalidScenario(f"unknown arm mode {self.arm_mode}")
        if not self.setpoint_schedule:
            object.__setattr__(self, "setpoint_schedule",
                               ((0.0, Setpoint(position=self.initial_position)),))

    @classmethod
    def from_json(cls, path, seed_override: int | None = None,
                  dt_override: float | None = None) -> "Scenario":
        path = Path(path)
        with open(path) as f:
            doc = json.load(f)
        return cls.from_dict(doc, base_dir=path.parent,
                             seed_override=seed_override,
                             dt_override=dt_override)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None,
                  seed_override: int | None = None,
                  dt_override: float | None = None) -> "Scenario":
        base_dir = Path(base_dir) if base_dir else Path(".")
        try:
            name = doc["name"]
            duration = float(doc["duration_s"])
        except KeyError as e:
            raise InvalidScenario(f"scenario missing key {e}") from e
        gains = None
        gdoc = doc.get("gains")
        if isinstance(gdoc, str) and gdoc != "default":
            gains = GainSet.from_json(base_dir / gdoc)
        elif isinstance(gdoc, dict):
            gains = GainSet.from_dict(gdoc)
        schedule = []
        for item in doc.get("setpoints", ()):
            schedule.append((float(item.get("t_s", 0.0)), Setpoint(
                position=np.asarray(item["position_m"], float),
                yaw=float(item.get("yaw_rad", 0.0)),
                endpoint_target=(np.asarray(item["endpoint_target_m"], float)
                                 if "endpoint_target_m" in item else None))))
        dist = DisturbanceProfile.from_dict(doc.get("disturbance", {}))
        if seed_override is not None:
            dist = DisturbanceProfile(
                wind_steps=dist.wind_steps,
                gust_noise_std=dist.gust_noise_std,
                sensor_noise_std_pos=dist.sensor_noise_std_pos,
                sensor_noise_std_att=dist.sensor_noise_std_att,
                seed=seed_override)
        return cls(
            name=name,
            vehicle=doc.get("vehicle", "hexrotor"),
            controller_mode=doc.get("controller", "hexrotor_ppd"),
            gains=gains,
            duration=duration,
            dt=dt_override if dt_override else float(doc.get("dt_s", DEFAULT_DT)),
            control_dt=float(doc.get("control_dt_s", 5e-3)),
            setpoint_schedule=tuple(schedule),
            disturbance=dist,
            arm_mode=doc.get("arm_mode", "none"),
            arm_trajectory=doc.get("arm_trajectory"),
            initial_position=tuple(doc.get("initial_position_m", (0.0, 0.0, 1.0))),
            initial_arm_q=tuple(doc.get("initial_arm_q_rad", DEFAULT_ARM_Q)),
            rotor_lag=bool(doc.get("rotor_lag", True)),
            output=doc.get("output"),
        )

    def resolve_vehicle(self, base_dir: Path | None = None) -> VehicleModel:
        if self.vehicle == "hexrotor":
            return default_hexrotor(with_arm=self.arm_mode != "none",
                                    rotor_tc=0.05 if self.rotor_lag else 0.0)
        if self.vehicle == "quadrotor":
            return build_quadrotor_model(
                rotor_tc=0.05 if self.rotor_lag else 0.0)
        path = Path(self.vehicle)
        if base_dir and not path.is_absolute():
            path = Path(base_dir) / path
        return VehicleModel.from_json(path)

    def resolve_gains(self) -> GainSet:
        if self.gains is not None:
            return self.gains
        profile = ("quadrotor" if self.controller_mode == "quadrotor_cascade"
                   else "hexrotor")
        return control.load_default_gains(profile)


@dataclass
class Trace:
    """Fixed-dt time series of one run plus the context metrics need."""

    t: np.ndarray
    states: np.ndarray            # rows of the kernel state vector
    cmd_wrench: np.ndarray        # commanded body wrench per step
    cmd_speeds: np.ndarray        # clamped rotor commands per step
    wind: np.ndarray
    endpoint: np.ndarray          # world (x, z) per step; NaN when no arm
    flags: np.ndarray
    n_rotors: int
    has_arm: bool
    setpoint_schedule: tuple = ()
    endpoint_target: np.ndarray | None = None

    def setpoint_at(self, t: float) -> Setpoint:
        active = self.setpoint_schedule[0][1]
        for t0, sp in self.setpoint_schedule:
            if t >= t0:
                active = sp
        return active

    def setpoint_positions(self) -> np.ndarray:
        out = np.empty((self.t.size, 3))
        for i, ti in enumerate(self.t):
            out[i] = self.setpoint_at(ti).position
        return out

    def to_csv(self, path) -> None:
        path = Path(path)
        n = self.t.size

        def fmt(x):
            return format(x, ".17g")

        with open(path, "w") as f:
            f.write(TRACE_COLUMNS + "\n")
            for i in range(n):
                s = self.states[i]
                row = [fmt(self.t[i])]
                row += [fmt(v) for v in s[0:13]]
                if self.has_arm:
                    row += [fmt(v) for v in s[13:17]]
                    row += [fmt(self.endpoint[i, 0]), fmt(self.endpoint[i, 1])]
                else:
                    row += ["", "", "", "", "", ""]
                row += [fmt(v) for v in self.cmd_wrench[i]]
                speeds = [fmt(v) for v in self.cmd_speeds[i]]
                speeds += [""] * (6 - self.n_rotors)
                row += speeds
                row += [fmt(v) for v in self.wind[i]]
                row.append(str(int(self.flags[i])))
                f.write(",".join(row) + "\n")
        meta = {
            "endpoint_target": (self.endpoint_target.tolist()
                                if self.endpoint_target is not None else None),
            "has_arm": self.has_arm,
            "n_rotors": self.n_rotors,
            "setpoints": [
                {"t_s": t0, "position_m": sp.position.tolist(),
                 "yaw_rad": sp.yaw}
                for t0, sp in self.setpoint_schedule],
        }
        with open(path.with_suffix(".meta.json"), "w") as f:
            json.dump(meta, f, sort_keys=True, indent=1)

    @classmethod
    def from_csv(cls, path) -> "Trace":
        path = Path(path)
        with open(path) as f:
            header = f.readline().strip()
            if header != TRACE_COLUMNS:
                raise EmptyTrace(f"unexpected trace header in {path}")
            rows = [line.rstrip("\n").split(",") for line in f if line.strip()]
        if not rows:
            raise EmptyTrace(f"no rows in {path}")

        def col(i):
            return np.array([float(r[i]) if r[i] != "" else np.nan for r in rows])

        data = np.column_stack([col(i) for i in range(35)])
        t = data[:, 0]
        states = np.zeros((t.size, kernels.STATE_BASE + 6))
        states[:, 0:13] = data[:, 1:14]
        states[:, 13:17] = np.nan_to_num(data[:, 14:18])
        has_arm = not np.isnan(data[:, 14]).all()
        endpoint = data[:, 18:20]
        cmd_wrench = data[:, 20:26]
        speeds = data[:, 26:32]
        n_rotors = 6 if not np.isnan(speeds[:, 4]).any() else 4
        wind = data[:, 32:35]
        flags = np.array([int(r[35]) for r in rows])
        meta_path = path.with_suffix(".meta.json")
        schedule = ()
        target = None
        if meta_path.exists():
            with open(meta_path) as f:
                meta = json.load(f)
            schedule = tuple(
                (m["t_s"], Setpoint(position=np.asarray(m["position_m"]),
                                    yaw=m.get("yaw_rad", 0.0)))
                for m in meta.get("setpoints", ()))
            if meta.get("endpoint_target") is not None:
                target = np.asarray(meta["endpoint_target"], float)
        return cls(t=t, states=states, cmd_wrench=cmd_wrench,
                   cmd_speeds=speeds[:, :n_rotors], wind=wind,
                   endpoint=endpoint, flags=flags, n_rotors=n_rotors,
                   has_arm=has_arm, setpoint_schedule=schedule,
                   endpoint_target=target)


def _platform_rows(traj: dict | None, dt: float, n_steps: int):
    """Prescribed moving-platform offset r(t) and inertial reaction force
    -m_p r''(t), both in the body frame, sampled per step."""
    if traj is None:
        return np.zeros((n_steps, 3)), np.zeros((n_steps, 3)), 0.0
    m_p = float(traj.get("mass_kg", 0.35))
    r0 = np.asarray(traj.get("offset_m", (0.0, 0.0, 0.12)), float)
    amp = np.asarray(traj.get("amplitude_m", (0.03, 0.03, 0.0)), float)
    freq = float(traj.get("freq_hz", 1.0))
    phase = np.asarray(traj.get("phase_rad", (0.0, math.pi / 2.0, 0.0)), float)
    w = 2.0 * math.pi * freq
    t = np.arange(n_steps) * dt
    arg = w * t[:, None] + phase[None, :]
    r = r0[None, :] + amp[None, :] * np.sin(arg)
    rddot = -amp[None, :] * w * w * np.sin(arg)
    return r, -m_p * rddot, m_p


def _endpoint_plane_error(model: VehicleModel, meas: AmmState,
                          target_w: np.ndarray) -> np.ndarray:
    """Endpoint error in the arm plane (x, z), from measured base pose."""
    R = kernels.quat_to_rot(meas.base_orientation)
    mount = np.asarray(model.mounted_arm.mount_offset, float)
    target_b = R.T @ (target_w - meas.base_position) - mount
    from .manipulators import planar_fk
    tip = planar_fk(model.mounted_arm, meas.arm_q)
    return np.array([target_b[0] - tip[0], target_b[2] - tip[1]])


def run_scenario(scenario: Scenario, base_dir: Path | None = None) -> Trace:
    """Execute one scenario deterministically and return its trace."""
    model = scenario.resolve_vehicle(base_dir)
    gains = scenario.resolve_gains()
    dt = scenario.dt
    n_steps = int(round(scenario.duration / dt))
    if n_steps < 1:
        raise InvalidScenario("duration below one dt")
    every = max(1, int(round(scenario.control_dt / dt)))
    n_rot = model.rotor_count
    dist = scenario.disturbance

    winds = wind_rows(dist, dt, n_steps)
    plat_r, plat_f, m_p = _platform_rows(scenario.arm_trajectory, dt, n_steps)
    n_ticks = (n_steps + every - 1) // every
    rng_sensor = np.random.default_rng((dist.seed, 1))
    noise_pos = rng_sensor.normal(0.0, 1.0, (n_ticks, 3)) * dist.sensor_noise_std_pos
    noise_att = rng_sensor.normal(0.0, 1.0, (n_ticks, 3)) * dist.sensor_noise_std_att

    mapping = model.mapping()
    tc = model.first_order_rotor_tc
    has_arm = model.mounted_arm is not None
    arm_par = model.arm_param_vector()
    inertia_inv = np.linalg.inv(model.inertia)

    sp0 = scenario.setpoint_schedule[0][1]
    s = np.zeros(kernels.STATE_BASE + n_rot)
    s[0:3] = scenario.initial_position
    s[3:7] = kernels.rotvec_to_quat(np.array([0.0, 0.0, sp0.yaw]))
    if has_arm:
        s[13:15] = scenario.initial_arm_q
    hover = allocate_wrench(mapping, model.hover_wrench(), clamp=True)
    s[17:] = hover.speeds_sq  # spin-up state starts at steady hover

    target_w = None
    if has_arm:
        state0 = AmmState.from_vector(s, 0.0)
        default_target = endpoint_world(model, state0)
        if sp0.endpoint_target is not None:
            target_w = sp0.endpoint_target.astype(float)
        else:
            target_w = default_target
    q_hold = np.array(scenario.initial_arm_q)

    states = np.empty((n_steps, s.size))
    cmd_wrench = np.empty((n_steps, 6))
    cmd_speeds = np.empty((n_steps, n_rot))
    flags = np.zeros(n_steps, dtype=np.int64)
    span_out = np.empty((every, s.size))

    mem = ControllerMemory()
    pid_state = EndpointPidState()

    for tick in range(n_ticks):
        k0 = tick * every
        k1 = min(k0 + every, n_steps)
        t = k0 * dt
        sp = scenario.setpoint_schedule[0][1]
        for t0, cand in scenario.setpoint_schedule:
            if t >= t0:
                sp = cand

        meas = AmmState(
            base_position=s[0:3] + noise_pos[tick],
            base_orientation=kernels.quat_normalize(kernels.quat_mul(
                kernels.rotvec_to_quat(noise_att[tick]), s[3:7])),
            base_lin_vel=s[7:10], base_ang_vel=s[10:13],
            arm_q=s[13:15], arm_qd=s[15:17], time=t)

        tick_flags = 0
        if scenario.controller_mode == "hexrotor_ppd":
            wrench, mem = control.nested_p_pd(meas, sp, gains,
                                              scenario.control_dt, mem,
                                              model.total_mass)
            warr = wrench.as_array()
        else:
            thrust, _, tau, mem = control.quadrotor_cascade(
                meas, sp, gains, scenario.control_dt, mem, model.total_mass)
            warr = np.array([0.0, 0.0, thrust, tau[0], tau[1], tau[2]])
        cmd = allocate_wrench(mapping, warr, clamp=True)
        if cmd.saturated:
            tick_flags |= FLAG_SATURATED

        arm_ctl = np.zeros(9)
        if has_arm:
            arm_ctl[2] = 1.0  # gravity compensation on
            if scenario.arm_mode == "frozen":
                arm_ctl[0] = gains.arm_kp_hold
                arm_ctl[1] = gains.arm_kv
                arm_ctl[3:5] = q_hold
            else:
                try:
                    err = _endpoint_plane_error(model, meas, target_w)
                    qd_cmd, pid_state = control.endpoint_pid(
                        model.mounted_arm, meas.arm_q, err, gains,
                        scenario.control_dt, pid_state)
                except NearSingularArm:
                    qd_cmd = np.zeros(2)
                    tick_flags |= FLAG_NEAR_SINGULAR_ARM
                arm_ctl[1] = gains.arm_kv
                arm_ctl[5:7] = qd_cmd

        try:
            status = kernels.simulate_span(
                s, dt, cmd.speeds_sq, winds[k0:k1], plat_r[k0:k1],
                plat_f[k0:k1], m_p, model.mass, model.inertia, inertia_inv,
                mapping.entries, tc, 1 if has_arm else 0, arm_par, arm_ctl,
                GRAVITY, span_out[:k1 - k0])
        except np.linalg.LinAlgError:
            status = 0  # state went non-finite inside a kernel solve
        if status >= 0:
            raise NonFiniteState(
                f"simulation diverged at t={(k0 + status) * dt:.3f} s "
                f"(step {k0 + status})")
        states[k0:k1] = span_out[:k1 - k0]
        cmd_wrench[k0:k1] = warr
        cmd_speeds[k0:k1] = cmd.speeds_sq
        flags[k0:k1] = tick_flags
        s = span_out[k1 - k0 - 1].copy()

    endpoint = np.full((n_steps, 2), np.nan)
    if has_arm:
        for i in range(n_steps):
            row = states[i]
            R = kernels.quat_to_rot(row[3:7])
            frames = kernels.arm_frames(row[0:3], R, row[13], row[14], arm_par)
            endpoint[i, 0] = frames[5][0]
            endpoint[i, 1] = frames[5][2]

    return Trace(
        t=(np.arange(n_steps) + 1) * dt,
        states=states, cmd_wrench=cmd_wrench, cmd_speeds=cmd_speeds,
        wind=winds, endpoint=endpoint, flags=flags, n_rotors=n_rot,
        has_arm=has_arm, setpoint_schedule=scenario.setpoint_schedule,
        endpoint_target=target_w)


# --- metrics ----------------------------------------------------------------

AXES = {"x": 0, "y": 1, "z": 2}


def position_error_stddev(trace: Trace, axis: str,
                          window: tuple[float, float] | None = None) -> float:
    """Population standard deviation of (position - setpoint) in mm."""
    i = AXES[axis]
    if window is None:
        window = (3.0, float(trace.t[-1]))
    t0, t1 = window
    mask = (trace.t >= t0) & (trace.t <= t1)
    if not mask.any():
        raise EmptyWindow(f"window [{t0}, {t1}] selects no samples")
    err = trace.states[mask, i] - trace.setpoint_positions()[mask, i]
    return float(np.std(err) * 1000.0)


def error_increase_pct(free_std: float, disturbed_std: float) -> float:
    """Percentage increase of the disturbed deviation over the free one."""
    if free_std <= 0:
        raise ZeroDivisionError("free-hover standard deviation must be > 0")
    return 100.0 * (disturbed_std - free_std) / free_std


def endpoint_rms(trace: Trace, target=None,
                 window: tuple[float, float] | None = None) -> float:
    """Root-mean-square endpoint error in the world XZ plane, meters."""
    if trace.t.size == 0:
        raise EmptyTrace("trace has no rows")
    if np.isnan(trace.endpoint).all():
        raise EmptyTrace("endpoint columns not populated")
    if target is None:
        target = trace.endpoint_target
    target = np.asarray(target, float)
    tgt_xz = np.array([target[0], target[-1]])
    mask = np.ones(trace.t.size, dtype=bool)
    if window is not None:
        mask = (trace.t >= window[0]) & (trace.t <= window[1])
        if not mask.any():
            raise EmptyWindow("window selects no samples")
    err = trace.endpoint[mask] - tgt_xz[None, :]
    return float(np.sqrt(np.mean(np.sum(err * err, axis=1))))


def settle_time(trace: Trace, band: float = 0.02) -> float | None:
    """First time after which |position error| stays within ``band`` of the
    initial error magnitude (absolute floor 5 mm); None if never."""
    sp = trace.setpoint_positions()
    err = np.linalg.norm(trace.states[:, 0:3] - sp, axis=1)
    thresh = max(band * err[0], 5e-3)
    inside = err <= thresh
    for i in range(trace.t.size):
        if inside[i:].all():
            return float(trace.t[i])
    return None


@dataclass(frozen=True)
class MetricsReport:
    """Per-axis hold deviations and the derived comparison numbers."""

    std_mm: dict
    window: tuple
    endpoint_rms_m: float | None = None
    settle_time_s: float | None = None
    free_std_mm: float | None = None
    disturbed_std_mm: float | None = None
    error_increase_pct: float | None = None

    def to_dict(self) -> dict:
        return {
            "std_mm": self.std_mm,
            "window_s": list(self.window),
            "endpoint_rms_m": self.endpoint_rms_m,
            "settle_time_s": self.settle_time_s,
            "free_std_mm": self.free_std_mm,
            "disturbed_std_mm": self.disturbed_std_mm,
            "error_increase_pct": self.error_increase_pct,
            "stddev_kind": "population",
        }


def compute_metrics(trace: Trace,
                    window: tuple[float, float] | None = None) -> MetricsReport:
    if window is None:
        window = (3.0, float(trace.t[-1]))
    std = {a: position_error_stddev(trace, a, window) for a in ("x", "y", "z")}
    ep = None
    if trace.has_arm and trace.endpoint_target is not None:
        ep = endpoint_rms(trace, window=window)
    return MetricsReport(std_mm=std, window=window, endpoint_rms_m=ep,
                         settle_time_s=settle_time(trace))


def comparison_report(free: Trace, disturbed: Trace, axis: str = "x",
                      window: tuple[float, float] | None = None) -> MetricsReport:
    """Free-hover vs disturbed pair, error-increase style."""
    if window is None:
        window = (3.0, float(min(free.t[-1], disturbed.t[-1])))
    f = position_error_stddev(free, axis, window)
    d = position_error_stddev(disturbed, axis, window)
    base = compute_metrics(disturbed, window)
    return MetricsReport(std_mm=base.std_mm, window=window,
                         endpoint_rms_m=base.endpoint_rms_m,
                         settle_time_s=base.settle_time_s,
                         free_std_mm=f, disturbed_std_mm=d,
                         error_increase_pct=error_increase_pct(f, d))
