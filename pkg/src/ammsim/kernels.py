"""Hot numerical kernels: quaternion algebra, coupled base+arm dynamics, RK4.

Every function here is compiled with numba on the default backend and runs as
plain numpy/Python when ``AMM_PURE_NUMPY=1`` (see :mod:`ammsim.backend`).
Kernels operate on flat float64 arrays only; the object-level API lives in
the surrounding modules.

Simulation state vector layout (length 17 + n_rotors):

    [0:3]   base position, world frame (m)
    [3:7]   base orientation quaternion (w, x, y, z), body -> world
    [7:10]  base linear velocity, world frame (m/s)
    [10:13] base angular velocity, body frame (rad/s)
    [13:15] arm joint angles (rad)          (zero when no arm mounted)
    [15:17] arm joint velocities (rad/s)
    [17:]   per-rotor squared speed state (rad^2/s^2), used when lag > 0

Arm parameter vector ``arm_par`` (length 17):

    [l1, l2, m1, m2, lc1, lc2, I1, I2,
     mount_x, mount_y, mount_z,          joint-1 location in body frame
     axis_x, axis_y, axis_z,             joint axis in body frame (unit)
     ex_x, ex_y, ex_z]                   in-plane reference axis (unit)

Arm control vector ``arm_ctl`` (length 9):

    [kp_hold, kv, grav_comp_flag, q_hold1, q_hold2, qd_cmd1, qd_cmd2,
     tau_direct1, tau_direct2]
"""

import numpy as np

from .backend import jit

STATE_BASE = 17


@jit
def cross3(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@jit
def skew3(a):
    out = np.zeros((3, 3))
    out[0, 1] = -a[2]
    out[0, 2] = a[1]
    out[1, 0] = a[2]
    out[1, 2] = -a[0]
    out[2, 0] = -a[1]
    out[2, 1] = a[0]
    return out


@jit
def quat_normalize(q):
    n = np.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return q / n


@jit
def quat_mul(a, b):
    out = np.empty(4)
    out[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    out[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2]
    out[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1]
    out[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]
    return out


@jit
def quat_to_rot(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    R = np.empty((3, 3))
    R[0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[0, 1] = 2.0 * (x * y - w * z)
    R[0, 2] = 2.0 * (x * z + w * y)
    R[1, 0] = 2.0 * (x * y + w * z)
    R[1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[1, 2] = 2.0 * (y * z - w * x)
    R[2, 0] = 2.0 * (x * z - w * y)
    R[2, 1] = 2.0 * (y * z + w * x)
    R[2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return R


@jit
def axis_angle_rot(axis, angle):
    c = np.cos(angle)
    s = np.sin(angle)
    K = skew3(axis)
    R = np.eye(3) * c + K * s + np.outer(axis, axis) * (1.0 - c)
    return R


@jit
def rotvec_to_quat(v):
    angle = np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    q = np.empty(4)
    if angle < 1e-12:
        q[0] = 1.0
        q[1] = 0.5 * v[0]
        q[2] = 0.5 * v[1]
        q[3] = 0.5 * v[2]
        return quat_normalize(q)
    h = 0.5 * angle
    f = np.sin(h) / angle
    q[0] = np.cos(h)
    q[1] = f * v[0]
    q[2] = f * v[1]
    q[3] = f * v[2]
    return q


@jit
def planar_arm_matrices(l1, lc1, lc2, m1, m2, i1, i2, q2, qd1, qd2, g, q1):
    """Closed-form two-link terms: mass matrix, Coriolis vector, gravity vector.

    The arm lives in a vertical plane with x horizontal, z up; q measured
    from the +x axis, gravity acting along -z.
    """
    c2 = np.cos(q2)
    a11 = m1 * lc1 * lc1 + i1 + i2 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2)
    a12 = m2 * (lc2 * lc2 + l1 * lc2 * c2) + i2
    a22 = m2 * lc2 * lc2 + i2
    M = np.empty((2, 2))
    M[0, 0] = a11
    M[0, 1] = a12
    M[1, 0] = a12
    M[1, 1] = a22
    h = -m2 * l1 * lc2 * np.sin(q2)
    C = np.empty(2)
    C[0] = h * qd2 * qd1 + h * (qd1 + qd2) * qd2
    C[1] = -h * qd1 * qd1
    G = np.empty(2)
    G[0] = (m1 * lc1 + m2 * l1) * g * np.cos(q1) + m2 * lc2 * g * np.cos(q1 + q2)
    G[1] = m2 * lc2 * g * np.cos(q1 + q2)
    return M, C, G


@jit
def arm_frames(p, R, q1, q2, arm_par):
    """World-frame joint locations, link directions, and the joint axis."""
    l1 = arm_par[0]
    l2 = arm_par[1]
    lc1 = arm_par[4]
    lc2 = arm_par[5]
    mount = arm_par[8:11]
    axis_b = arm_par[11:14]
    ex_b = arm_par[14:17]

    ahat = R @ axis_b
    ex_w = R @ ex_b
    R1rel = axis_angle_rot(ahat, q1)
    u1 = R1rel @ ex_w
    u2 = axis_angle_rot(ahat, q1 + q2) @ ex_w

    o1 = p + R @ mount
    pc1 = o1 + lc1 * u1
    o2 = o1 + l1 * u1
    pc2 = o2 + lc2 * u2
    pe = o2 + l2 * u2
    return ahat, o1, o2, pc1, pc2, pe, u1, u2


@jit
def amm_mass_bias(p, R, wb, q1, q2, qd1, qd2, mass, inertia_b, arm_par, g):
    """Mass matrix and force bias of the coupled base + two-link system.

    Generalized velocities are u = [v_world, omega_body, qd1, qd2].  Returns
    (A, h, pe, o1, o2, ahat, qgrav_arm) with A u_dot = Q_applied - h; h folds
    velocity-product terms and gravity together, qgrav_arm is the gravity
    contribution on the arm rows (used for gravity compensation).
    """
    m1 = arm_par[2]
    m2 = arm_par[3]
    i1 = arm_par[6]
    i2 = arm_par[7]

    ahat, o1, o2, pc1, pc2, pe, u1, u2 = arm_frames(p, R, q1, q2, arm_par)

    w0 = R @ wb
    w1 = w0 + ahat * qd1
    w2 = w0 + ahat * (qd1 + qd2)

    # thin-rod link inertia about COM: negligible about the link axis
    I1w = i1 * (np.eye(3) - np.outer(u1, u1))
    I2w = i2 * (np.eye(3) - np.outer(u2, u2))

    # body Jacobians (3 x 8) for angular and COM linear velocity
    W1 = np.zeros((3, 8))
    W1[:, 3:6] = R
    W1[:, 6] = ahat
    W2 = np.zeros((3, 8))
    W2[:, 3:6] = R
    W2[:, 6] = ahat
    W2[:, 7] = ahat

    V1 = np.zeros((3, 8))
    V1[:, 0:3] = np.eye(3)
    V1[:, 3:6] = -skew3(pc1 - p) @ R
    V1[:, 6] = cross3(ahat, pc1 - o1)
    V2 = np.zeros((3, 8))
    V2[:, 0:3] = np.eye(3)
    V2[:, 3:6] = -skew3(pc2 - p) @ R
    V2[:, 6] = cross3(ahat, pc2 - o1)
    V2[:, 7] = cross3(ahat, pc2 - o2)

    A = np.zeros((8, 8))
    A[0:3, 0:3] = mass * np.eye(3)
    A[3:6, 3:6] = inertia_b
    A += m1 * (V1.T @ V1) + m2 * (V2.T @ V2)
    A += W1.T @ (I1w @ W1) + W2.T @ (I2w @ W2)

    # velocity-product accelerations with u_dot = 0
    dahat = cross3(w0, ahat)
    al1 = dahat * qd1
    al2 = dahat * (qd1 + qd2)
    a_o1 = cross3(w0, cross3(w0, o1 - p))
    a_c1 = a_o1 + cross3(al1, pc1 - o1) + cross3(w1, cross3(w1, pc1 - o1))
    a_o2 = a_o1 + cross3(al1, o2 - o1) + cross3(w1, cross3(w1, o2 - o1))
    a_c2 = a_o2 + cross3(al2, pc2 - o2) + cross3(w2, cross3(w2, pc2 - o2))

    h = np.zeros(8)
    h[3:6] = cross3(wb, inertia_b @ wb)
    h += m1 * (V1.T @ a_c1) + m2 * (V2.T @ a_c2)
    h += W1.T @ (I1w @ al1 + cross3(w1, I1w @ w1))
    h += W2.T @ (I2w @ al2 + cross3(w2, I2w @ w2))

    # gravity enters h with opposite sign (h is subtracted from applied forces)
    gvec = np.zeros(3)
    gvec[2] = -g
    qg = np.zeros(8)
    qg[2] = mass * gvec[2]
    qg += m1 * (V1.T @ gvec) + m2 * (V2.T @ gvec)
    h -= qg
    qgrav_arm = qg[6:8].copy()

    return A, h, pe, o1, o2, ahat, qgrav_arm


@jit
def amm_deriv(s, n_rot, cmd, wind_f, plat_r, plat_f, m_p, mass, inertia_b,
              inertia_b_inv, mmap, tc, has_arm, arm_par, arm_ctl, g):
    """Time derivative of the full state under zero-order-hold inputs."""
    p = s[0:3]
    quat = quat_normalize(s[3:7])
    v = s[7:10]
    wb = s[10:13]
    R = quat_to_rot(quat)

    ds = np.zeros(s.shape[0])

    # rotor spin-up lag
    if tc > 0.0:
        w_sq = s[STATE_BASE:STATE_BASE + n_rot]
        ds[STATE_BASE:STATE_BASE + n_rot] = (cmd - w_sq) / tc
    else:
        w_sq = cmd

    wrench = mmap @ w_sq
    f_body = wrench[0:3]
    tau_body = wrench[3:6]

    # prescribed-platform reaction (body frame): inertial part precomputed,
    # weight shift evaluated against the live attitude
    f_plat = np.zeros(3)
    tau_plat = np.zeros(3)
    if m_p > 0.0:
        fw = R.T @ np.array([0.0, 0.0, -m_p * g])
        f_plat = plat_f + fw
        tau_plat = cross3(plat_r, f_plat)

    if has_arm == 1:
        q1 = s[13]
        q2 = s[14]
        qd1 = s[15]
        qd2 = s[16]
        A, h, pe, o1, o2, ahat, qgrav_arm = amm_mass_bias(
            p, R, wb, q1, q2, qd1, qd2, mass, inertia_b, arm_par, g)

        tau_arm = np.empty(2)
        kp = arm_ctl[0]
        kv = arm_ctl[1]
        gc = arm_ctl[2]
        tau_arm[0] = (kp * (arm_ctl[3] - q1) + kv * (arm_ctl[5] - qd1)
                      + arm_ctl[7] - gc * qgrav_arm[0])
        tau_arm[1] = (kp * (arm_ctl[4] - q2) + kv * (arm_ctl[6] - qd2)
                      + arm_ctl[8] - gc * qgrav_arm[1])

        Q = np.zeros(8)
        Q[0:3] = R @ (f_body + f_plat) + wind_f
        Q[3:6] = tau_body + tau_plat
        Q[6] = tau_arm[0]
        Q[7] = tau_arm[1]

        udot = np.linalg.solve(A, Q - h)
        ds[7:10] = udot[0:3]
        ds[10:13] = udot[3:6]
        ds[13] = qd1
        ds[14] = qd2
        ds[15] = udot[6]
        ds[16] = udot[7]
    else:
        f_world = R @ (f_body + f_plat) + wind_f
        f_world[2] -= mass * g
        ds[7:10] = f_world / mass
        ds[10:13] = inertia_b_inv @ (tau_body + tau_plat
                                     - cross3(wb, inertia_b @ wb))

    ds[0:3] = v
    wq = np.empty(4)
    wq[0] = 0.0
    wq[1] = wb[0]
    wq[2] = wb[1]
    wq[3] = wb[2]
    ds[3:7] = 0.5 * quat_mul(quat, wq)
    return ds


@jit
def rk4_step(s, dt, n_rot, cmd, wind_f, plat_r, plat_f, m_p, mass, inertia_b,
             inertia_b_inv, mmap, tc, has_arm, arm_par, arm_ctl, g):
    k1 = amm_deriv(s, n_rot, cmd, wind_f, plat_r, plat_f, m_p, mass, inertia_b,
                   inertia_b_inv, mmap, tc, has_arm, arm_par, arm_ctl, g)
    k2 = amm_deriv(s + 0.5 * dt * k1, n_rot, cmd, wind_f, plat_r, plat_f, m_p,
                   mass, inertia_b, inertia_b_inv, mmap, tc, has_arm, arm_par,
                   arm_ctl, g)
    k3 = amm_deriv(s + 0.5 * dt * k2, n_rot, cmd, wind_f, plat_r, plat_f, m_p,
                   mass, inertia_b, inertia_b_inv, mmap, tc, has_arm, arm_par,
                   arm_ctl, g)
    k4 = amm_deriv(s + dt * k3, n_rot, cmd, wind_f, plat_r, plat_f, m_p, mass,
                   inertia_b, inertia_b_inv, mmap, tc, has_arm, arm_par,
                   arm_ctl, g)
    out = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out[3:7] = quat_normalize(out[3:7])
    return out


@jit
def simulate_span(s, dt, cmd, wind_rows, plat_r_rows, plat_f_rows, m_p, mass,
                  inertia_b, inertia_b_inv, mmap, tc, has_arm, arm_par,
                  arm_ctl, g, out_states):
    """Advance ``wind_rows.shape[0]`` steps, one zero-order-hold row per step.

    Writes the post-step state into out_states[k].  Returns -1 on success or
    the index of the first step whose state went non-finite.
    """
    n_steps = wind_rows.shape[0]
    n_rot = cmd.shape[0]
    cur = s.copy()
    for k in range(n_steps):
        cur = rk4_step(cur, dt, n_rot, cmd, wind_rows[k], plat_r_rows[k],
                       plat_f_rows[k], m_p, mass, inertia_b, inertia_b_inv,
                       mmap, tc, has_arm, arm_par, arm_ctl, g)
        out_states[k, :] = cur
        if not np.isfinite(cur.sum()):
            return k
    return -1
