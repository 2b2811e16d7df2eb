import numpy as np
import pytest

from ammsim.dynamics import AmmState, default_hexrotor
from ammsim.errors import SingularTask
from ammsim.osc import (ActuatorVector, CombinedJacobian, amm_task_model,
                        decompose, dyn_consistent_inverse, nullspace_projector,
                        operational_force, operational_inertia, osc_state)


def random_spd(rng, n):
    Q = rng.normal(size=(n, n))
    return Q @ Q.T + n * np.eye(n)


def random_full_rank(rng, k, n):
    while True:
        J = rng.normal(size=(k, n))
        if np.linalg.matrix_rank(J) == k:
            return J


class TestOperationalInertia:
    def test_identity_case(self):
        lam = operational_inertia(np.eye(4), np.eye(4))
        np.testing.assert_allclose(lam, np.eye(4), atol=1e-12)

    def test_coordinate_selection(self):
        A = np.diag([2.0, 5.0, 7.0])
        J = np.array([[0.0, 1.0, 0.0]])
        lam = operational_inertia(A, J)
        assert lam.shape == (1, 1)
        assert lam[0, 0] == pytest.approx(5.0, rel=1e-12)

    def test_spd_on_random_inputs(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            A = random_spd(rng, 7)
            J = random_full_rank(rng, 3, 7)
            lam = operational_inertia(A, J)
            assert np.abs(lam - lam.T).max() < 1e-12
            assert np.linalg.eigvalsh(lam).min() > 0

    def test_singular_task_raises(self):
        A = np.eye(4)
        J = np.array([[1.0, 0, 0, 0], [1.0, 1e-14, 0, 0]])  # nearly dependent rows
        with pytest.raises(SingularTask):
            operational_inertia(A, J)


class TestDynConsistentInverse:
    def test_identity_mass_reduces_to_pinv(self):
        rng = np.random.default_rng(1)
        J = random_full_rank(rng, 2, 5)
        jbar = dyn_consistent_inverse(np.eye(5), J)
        np.testing.assert_allclose(jbar, np.linalg.pinv(J), atol=1e-10)

    def test_right_inverse_property(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            A = random_spd(rng, 6)
            J = random_full_rank(rng, 3, 6)
            jbar = dyn_consistent_inverse(A, J)
            assert np.abs(J @ jbar - np.eye(3)).max() <= 1e-10

    def test_square_jacobian_gives_plain_inverse(self):
        rng = np.random.default_rng(3)
        A = random_spd(rng, 4)
        J = random_full_rank(rng, 4, 4)
        jbar = dyn_consistent_inverse(A, J)
        np.testing.assert_allclose(jbar, np.linalg.inv(J), atol=1e-8)


class TestOperationalForce:
    def test_zero_command(self):
        np.testing.assert_allclose(operational_force(np.eye(3), np.zeros(3)), 0.0)

    def test_identity_inertia(self):
        f = np.array([1.0, -2.0, 0.5])
        np.testing.assert_allclose(operational_force(np.eye(3), f), f)

    def test_matches_direct_product(self):
        rng = np.random.default_rng(4)
        lam = random_spd(rng, 3)
        f = rng.normal(size=3)
        np.testing.assert_allclose(operational_force(lam, f), lam @ f,
                                   atol=1e-12)

    def test_force_semantics_passthrough(self):
        lam = np.diag([2.0, 3.0, 4.0])
        f = np.array([1.0, 1.0, 1.0])
        np.testing.assert_allclose(operational_force(lam, f, semantics="force"), f)
        with pytest.raises(ValueError):
            operational_force(lam, f, semantics="torque")


class TestNullspaceProjector:
    def test_square_invertible_no_nullspace(self):
        rng = np.random.default_rng(5)
        A = random_spd(rng, 4)
        J = random_full_rank(rng, 4, 4)
        N = nullspace_projector(J, dyn_consistent_inverse(A, J))
        np.testing.assert_allclose(N, 0.0, atol=1e-9)

    def test_idempotent_and_annihilated(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            A = random_spd(rng, 8)
            J = random_full_rank(rng, 3, 8)
            jbar = dyn_consistent_inverse(A, J)
            N = nullspace_projector(J, jbar)
            assert np.abs(N @ N - N).max() <= 1e-10
            assert np.abs(jbar.T @ N).max() <= 1e-10


class TestDecompose:
    def test_zero_nullspace_term(self):
        rng = np.random.default_rng(7)
        A = random_spd(rng, 6)
        J = random_full_rank(rng, 3, 6)
        jbar = dyn_consistent_inverse(A, J)
        F = rng.normal(size=3)
        out = decompose(J, F, jbar, np.zeros(6))
        np.testing.assert_allclose(out, J.T @ F, atol=1e-13)

    def test_both_zero(self):
        rng = np.random.default_rng(8)
        A = random_spd(rng, 5)
        J = random_full_rank(rng, 2, 5)
        jbar = dyn_consistent_inverse(A, J)
        np.testing.assert_allclose(decompose(J, np.zeros(2), jbar, np.zeros(5)),
                                   0.0)

    def test_nullspace_invisible_at_task(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            A = random_spd(rng, 7)
            J = random_full_rank(rng, 3, 7)
            jbar = dyn_consistent_inverse(A, J)
            g0 = rng.normal(size=7)
            out = decompose(J, np.zeros(3), jbar, g0)
            assert np.abs(jbar.T @ out).max() <= 1e-10 * max(1.0, np.abs(g0).max())

    def test_superposition(self):
        rng = np.random.default_rng(10)
        A = random_spd(rng, 6)
        J = random_full_rank(rng, 3, 6)
        jbar = dyn_consistent_inverse(A, J)
        f1, f2 = rng.normal(size=3), rng.normal(size=3)
        g1, g2 = rng.normal(size=6), rng.normal(size=6)
        lhs = decompose(J, f1 + f2, jbar, g1 + g2)
        rhs = decompose(J, f1, jbar, g1) + decompose(J, f2, jbar, g2)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


class TestDynamicConsistency:
    def test_nullspace_torque_zero_task_acceleration(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(5, 10))
            k = int(rng.integers(2, min(5, n)))
            A = random_spd(rng, n)
            J = random_full_rank(rng, k, n)
            lam = operational_inertia(A, J)
            jbar = dyn_consistent_inverse(A, J, lam)
            N = nullspace_projector(J, jbar)
            g0 = rng.normal(size=n)
            resid = lam @ J @ np.linalg.solve(A, N @ g0)
            assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(g0)


class TestPlanarAmmStack:
    def setup_method(self):
        self.model = default_hexrotor(with_arm=True)
        self.state = AmmState(base_position=[0.0, 0.0, 1.0],
                              arm_q=[np.pi / 2, -np.pi / 3],
                              arm_qd=[0.1, -0.2],
                              base_ang_vel=[0.01, 0.02, -0.01])

    def test_dimensional_audit(self):
        # 6 base DOF + 2 joints, 3 task rows; output splits (2, 6)
        CJ, A = amm_task_model(self.model, self.state)
        assert CJ.J.shape == (3, 8)
        assert A.shape == (8, 8)
        jbar = dyn_consistent_inverse(A, CJ)
        av = decompose(CJ, np.array([1.0, -0.5, 0.2]), jbar, np.zeros(8))
        assert isinstance(av, ActuatorVector)
        assert av.joint_torques.shape == (2,)
        assert av.rotor_speeds_sq.shape == (6,)
        np.testing.assert_allclose(av.as_array(),
                                   CJ.J.T @ np.array([1.0, -0.5, 0.2]),
                                   atol=1e-12)

    def test_stacked_mass_matrix_spd(self):
        _, A = amm_task_model(self.model, self.state)
        np.testing.assert_allclose(A, A.T, atol=1e-9)
        assert np.linalg.eigvalsh(A).min() > 0

    def test_lambda_invariant_under_rotor_congruence(self):
        # Lambda from the stacked coordinates equals Lambda from the plain
        # kinematic coordinates: the congruence cannot change task inertia
        from ammsim import kernels
        CJ, A_z = amm_task_model(self.model, self.state)
        svec = self.state.as_vector(6)
        R = kernels.quat_to_rot(svec[3:7])
        A_u, _, pe, o1, o2, ahat, _ = kernels.amm_mass_bias(
            svec[0:3], R, svec[10:13], svec[13], svec[14], svec[15], svec[16],
            self.model.mass, self.model.inertia,
            self.model.arm_param_vector(), 9.81)
        Ve = np.zeros((3, 8))
        Ve[:, 0:3] = np.eye(3)
        Ve[:, 3:6] = -kernels.skew3(pe - svec[0:3]) @ R
        Ve[:, 6] = kernels.cross3(ahat, pe - o1)
        Ve[:, 7] = kernels.cross3(ahat, pe - o2)
        J_u = np.vstack([Ve[0], Ve[2], np.concatenate([np.zeros(3), R[1], np.zeros(2)])])
        lam_u = operational_inertia(A_u, J_u)
        lam_z = operational_inertia(A_z, CJ)
        np.testing.assert_allclose(lam_z, lam_u, rtol=1e-8, atol=1e-12)

    def test_dynamic_consistency_on_real_system(self):
        rng = np.random.default_rng(12)
        CJ, A = amm_task_model(self.model, self.state)
        st = osc_state(A, CJ)
        for _ in range(20):
            g0 = rng.normal(size=8)
            resid = st.Lambda @ CJ.J @ np.linalg.solve(A, st.N @ g0)
            assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(g0)

    def test_osc_state_json(self):
        import json
        CJ, A = amm_task_model(self.model, self.state)
        doc = json.loads(osc_state(A, CJ).to_json())
        assert set(doc) == {"A", "Lambda", "Jbar", "N"}
        assert np.asarray(doc["Lambda"]).shape == (3, 3)


def test_combined_jacobian_validation():
    with pytest.raises(ValueError):
        CombinedJacobian(J=np.zeros((3, 8)), n_manip=9)
