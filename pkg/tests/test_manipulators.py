import math

import numpy as np
import pytest

from ammsim import kernels
from ammsim.errors import NoConvergence, SingularConfiguration, Unreachable
from ammsim.manipulators import (HexaModel, PlanarArmModel, PlatformPose,
                                 crank_tips, default_hexa_model, hexa_fk,
                                 hexa_ik, hexa_jacobians, hexa_torques,
                                 neutral_pose, planar_energy,
                                 planar_forward_dynamics, planar_fk,
                                 planar_inverse_dynamics, planar_jacobian,
                                 rod_residuals)


def quat_angle_error(qa, qb) -> float:
    dq = kernels.quat_mul(qa, qb * np.array([1.0, -1.0, -1.0, -1.0]))
    return 2.0 * math.asin(min(1.0, np.linalg.norm(dq[1:4])))


def perturbed_pose(pose: PlatformPose, dp, dq) -> PlatformPose:
    return PlatformPose(
        pose.position + dp,
        kernels.quat_normalize(kernels.quat_mul(kernels.rotvec_to_quat(dq),
                                                pose.orientation)))


def sample_workspace_pose(model, rng, dp=0.02, da=0.15):
    home = neutral_pose(model)
    while True:
        pose = perturbed_pose(home, rng.uniform(-dp, dp, 3),
                              rng.normal(size=3) * da / math.sqrt(3.0))
        try:
            return pose, hexa_ik(model, pose)
        except Unreachable:
            continue


class TestPlanarKinematics:
    def test_fk_stretched(self):
        m = PlanarArmModel(link_lengths=(0.3, 0.2))
        np.testing.assert_allclose(planar_fk(m, [0.0, 0.0]), [0.5, 0.0],
                                   atol=1e-15)

    def test_fk_vertical(self):
        m = PlanarArmModel(link_lengths=(0.3, 0.2))
        np.testing.assert_allclose(planar_fk(m, [math.pi / 2, 0.0]),
                                   [0.0, 0.5], atol=1e-15)

    def test_fk_folded_45(self):
        # hand evaluation: 0.3cos45 + 0.3cos(-45) = 0.42426..., z = 0
        m = PlanarArmModel(link_lengths=(0.3, 0.3))
        tip = planar_fk(m, [math.pi / 4, -math.pi / 2])
        np.testing.assert_allclose(tip, [0.3 * math.sqrt(2.0), 0.0],
                                   atol=1e-15)
        assert tip[0] == pytest.approx(0.4243, abs=5e-5)

    def test_jacobian_at_zero(self):
        m = PlanarArmModel(link_lengths=(0.3, 0.2))
        J = planar_jacobian(m, [0.0, 0.0])
        np.testing.assert_allclose(J[:, 0], [0.0, 0.5], atol=1e-15)

    def test_jacobian_matches_finite_differences(self):
        m = PlanarArmModel()
        rng = np.random.default_rng(11)
        eps = 1e-6
        for _ in range(100):
            q = rng.uniform(-2.5, 2.5, 2)
            J = planar_jacobian(m, q)
            Jfd = np.empty((2, 2))
            for k in range(2):
                d = np.zeros(2)
                d[k] = eps
                Jfd[:, k] = (planar_fk(m, q + d) - planar_fk(m, q - d)) / (2 * eps)
            assert np.abs(J - Jfd).max() <= 1e-6 * max(1.0, np.abs(Jfd).max())

    def test_elbow_singularities(self):
        m = PlanarArmModel()
        assert np.linalg.det(planar_jacobian(m, [0.3, 0.0])) == pytest.approx(0.0, abs=1e-15)
        assert np.linalg.det(planar_jacobian(m, [0.3, math.pi])) == pytest.approx(0.0, abs=1e-12)

    def test_json_loading(self, tmp_path):
        import json
        doc = {"link_lengths_m": [0.2, 0.16], "link_masses_kg": [0.12, 0.08],
               "com_offsets_m": [0.1, 0.08],
               "link_inertias_kgm2": [4e-4, 1.8e-4]}
        p = tmp_path / "arm.json"
        p.write_text(json.dumps(doc))
        m = PlanarArmModel.from_json(p)
        assert m.link_lengths == (0.2, 0.16)


class TestPlanarDynamics:
    def test_rest_without_gravity_is_torque_free(self):
        m = PlanarArmModel()
        tau = planar_inverse_dynamics(m, [0.7, -0.4], [0, 0], [0, 0], gravity=0.0)
        np.testing.assert_allclose(tau, 0.0, atol=1e-15)

    def test_static_torque_matches_potential_gradient(self):
        # oracle: central finite differences of the potential energy
        m = PlanarArmModel()
        rng = np.random.default_rng(5)
        eps = 1e-6
        for _ in range(50):
            q = rng.uniform(-2.0, 2.0, 2)
            tau = planar_inverse_dynamics(m, q, [0, 0], [0, 0])
            for k in range(2):
                d = np.zeros(2)
                d[k] = eps
                v_plus = planar_energy(m, q + d, [0, 0])
                v_minus = planar_energy(m, q - d, [0, 0])
                dV = (v_plus - v_minus) / (2 * eps)
                assert tau[k] == pytest.approx(dV, rel=1e-6, abs=1e-9)

    def test_power_balance_along_trajectory(self):
        # integrate applied work with the same RK4 substeps as the motion;
        # energy bookkeeping must close to 1e-8 relative
        m = PlanarArmModel()
        dt = 1e-4
        q = np.array([0.9, -0.5])
        qd = np.array([0.0, 0.0])
        work = 0.0
        e0 = planar_energy(m, q, qd)

        def tau_at(t, q, qd):
            return np.array([0.02 * math.sin(2.0 * t), -0.015 * math.cos(3.0 * t)])

        t = 0.0
        for _ in range(20000):
            def deriv(state, t):
                qq, qqd = state[:2], state[2:]
                tau = tau_at(t, qq, qqd)
                return np.concatenate([qqd, planar_forward_dynamics(m, qq, qqd, tau)]), tau @ qqd

            s = np.concatenate([q, qd])
            k1, p1 = deriv(s, t)
            k2, p2 = deriv(s + 0.5 * dt * k1, t + 0.5 * dt)
            k3, p3 = deriv(s + 0.5 * dt * k2, t + 0.5 * dt)
            k4, p4 = deriv(s + dt * k3, t + dt)
            s = s + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            work += (dt / 6.0) * (p1 + 2 * p2 + 2 * p3 + p4)
            q, qd = s[:2], s[2:]
            t += dt
        e1 = planar_energy(m, q, qd)
        scale = max(abs(e0), abs(e1), abs(work), 1e-3)
        assert abs((e1 - e0) - work) <= 1e-8 * scale


class TestHexaIK:
    def setup_method(self):
        self.model = default_hexa_model()
        self.home = neutral_pose(self.model)

    def test_neutral_six_fold_symmetry(self):
        angles = hexa_ik(self.model, self.home)
        assert np.ptp(angles) < 1e-12

    def test_pure_z_translation_equal_and_monotone(self):
        zs = np.linspace(0.08, 0.14, 7)
        firsts = []
        for z in zs:
            a = hexa_ik(self.model, PlatformPose.identity((0, 0, z)))
            assert np.ptp(a) < 1e-12
            firsts.append(a[0])
        assert np.all(np.diff(firsts) > 0)

    def test_rod_constraint_residuals(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            pose, angles = sample_workspace_pose(self.model, rng)
            assert np.abs(rod_residuals(self.model, angles, pose)).max() < 1e-10

    def test_unreachable_pose(self):
        with pytest.raises(Unreachable):
            hexa_ik(self.model, PlatformPose.identity((0, 0, 0.5)))

    def test_json_loading(self):
        m = HexaModel.from_json("config/hexa.json")
        a1 = hexa_ik(m, neutral_pose(m))
        a2 = hexa_ik(self.model, self.home)
        np.testing.assert_allclose(a1, a2, atol=1e-12)


class TestHexaFK:
    def setup_method(self):
        self.model = default_hexa_model()
        self.home = neutral_pose(self.model)

    def test_roundtrip_200_poses(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            pose, angles = sample_workspace_pose(self.model, rng)
            guess = perturbed_pose(pose, rng.uniform(-4e-3, 4e-3, 3),
                                   rng.uniform(-8e-3, 8e-3, 3))
            rec = hexa_fk(self.model, angles, guess)
            assert np.linalg.norm(rec.position - pose.position) <= 1e-8
            assert quat_angle_error(rec.orientation, pose.orientation) <= 1e-8

    def test_neutral_identity(self):
        angles = hexa_ik(self.model, self.home)
        rec = hexa_fk(self.model, angles, self.home)
        np.testing.assert_allclose(rec.position, self.home.position, atol=1e-12)

    def test_far_guess_no_convergence(self):
        angles = hexa_ik(self.model, self.home)
        with pytest.raises(NoConvergence):
            hexa_fk(self.model, angles, PlatformPose.identity((2.0, 2.0, -3.0)))


class TestHexaJacobians:
    def setup_method(self):
        self.model = default_hexa_model()
        self.home = neutral_pose(self.model)

    def _fd_jacobian(self, pose, eps=1e-7):
        J = np.empty((6, 6))
        for k in range(6):
            d = np.zeros(6)
            d[k] = eps
            plus = hexa_ik(self.model, perturbed_pose(pose, d[0:3], d[3:6]))
            minus = hexa_ik(self.model, perturbed_pose(pose, -d[0:3], -d[3:6]))
            J[:, k] = (plus - minus) / (2 * eps)
        return J

    def test_jpm_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            pose, angles = sample_workspace_pose(self.model, rng)
            J = hexa_jacobians(self.model, angles, pose)
            Jfd = self._fd_jacobian(pose)
            rel = np.abs(J.J_pm - Jfd).max() / np.abs(Jfd).max()
            assert rel <= 1e-6

    def test_constraint_rate_identity(self):
        rng = np.random.default_rng(9)
        pose, angles = sample_workspace_pose(self.model, rng)
        J = hexa_jacobians(self.model, angles, pose)
        for _ in range(20):
            xd = rng.normal(size=6)
            qd = J.J_pm @ xd
            np.testing.assert_allclose(J.J_gamma @ qd, J.J_X @ xd,
                                       rtol=1e-12, atol=1e-12)

    def test_neutral_block_symmetry(self):
        # the six chains are one orbit of the symmetry group: rotating the
        # pose twist by 120 deg permutes crank rates two chains onward
        angles = hexa_ik(self.model, self.home)
        J = hexa_jacobians(self.model, angles, self.home).J_pm
        c, s = math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3)
        Rz = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
        T = np.zeros((6, 6))
        T[0:3, 0:3] = Rz
        T[3:6, 3:6] = Rz
        P = np.zeros((6, 6))
        for i in range(6):
            P[(i + 2) % 6, i] = 1.0
        np.testing.assert_allclose(P @ J, J @ T, atol=1e-10)

    def test_fold_configuration_singular(self):
        # rod laid exactly along the crank: the fold where branch solutions
        # merge; the chain cannot move and J_gamma loses rank
        m = self.model
        e1, e2 = m.crank_basis()
        th0 = math.radians(40.0)
        direction = math.cos(th0) * e1[0] + math.sin(th0) * e2[0]
        tip = m.base_anchor_points[0] + m.crank_length * direction
        anchor_world = tip + m.rod_length * direction
        plat = m.platform_anchor_points.copy()
        plat[0] = anchor_world - self.home.position
        folded = HexaModel(m.base_anchor_points, plat, m.crank_length,
                           m.rod_length, m.crank_axes,
                           home_height=m.home_height)
        angles = hexa_ik(m, self.home)
        angles[0] = th0
        assert abs(rod_residuals(folded, angles, self.home)[0]) < 1e-12
        with pytest.raises(SingularConfiguration):
            hexa_jacobians(folded, angles, self.home)


class TestHexaTorques:
    def setup_method(self):
        self.model = default_hexa_model()
        self.home = neutral_pose(self.model)
        angles = hexa_ik(self.model, self.home)
        self.J = hexa_jacobians(self.model, angles, self.home)

    def test_zero_wrench(self):
        np.testing.assert_allclose(hexa_torques(self.J, np.zeros(6)), 0.0)

    def test_pure_z_force_equal_torques(self):
        G = hexa_torques(self.J, np.array([0, 0, 5.0, 0, 0, 0]))
        assert np.ptp(G) <= 1e-12

    def test_virtual_work_balance(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            pose, angles = sample_workspace_pose(self.model, rng)
            J = hexa_jacobians(self.model, angles, pose)
            F = rng.normal(size=6)
            G = hexa_torques(J, F)
            xd = rng.normal(size=6)
            qd = J.J_pm @ xd
            assert abs(G @ qd - F @ xd) <= 1e-9 * max(1.0, abs(F @ xd))


def test_crank_tips_on_circle():
    m = default_hexa_model()
    tips = crank_tips(m, np.full(6, 0.7))
    d = np.linalg.norm(tips - m.base_anchor_points, axis=1)
    np.testing.assert_allclose(d, m.crank_length, rtol=1e-12)
