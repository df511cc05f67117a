import copy

import numpy as np
import pytest

from geosyn.chain import (
    forward_kinematics,
    geometric_jacobian,
    load_model,
    mass_matrix,
    mass_matrix_derivatives,
)
from geosyn.errors import ModelError
from helpers import pendulum_doc, planar_doc, random_chain, two_link_oracle


class TestLoadModel:
    def test_pendulum_minimal_document(self):
        model = load_model(pendulum_doc())
        assert model.dof == 1
        assert model.links[0].name == "bob"

    def test_json_string_accepted(self):
        import json

        model = load_model(json.dumps(pendulum_doc()))
        assert model.dof == 1

    def test_non_unit_axis_rejected(self):
        doc = pendulum_doc()
        doc["links"][0]["axis"] = [1.0, 1.0, 0.0]
        with pytest.raises(ModelError, match="non-unit joint axis"):
            load_model(doc)
        with pytest.raises(ModelError, match="bob"):
            load_model(doc)

    def test_non_unit_quaternion_rejected(self):
        doc = pendulum_doc()
        doc["links"][0]["origin"]["quat"] = [1.0, 1.0, 0.0, 0.0]
        with pytest.raises(ModelError, match="non-unit origin quaternion"):
            load_model(doc)

    def test_non_spd_inertia_rejected(self):
        doc = pendulum_doc()
        doc["links"][0]["inertia"] = [-1.0, 0, 0, 0, -1.0, 0, 0, 0, -1.0]
        with pytest.raises(ModelError, match="non-SPD inertia"):
            load_model(doc)

    def test_asymmetric_inertia_rejected(self):
        doc = pendulum_doc()
        doc["links"][0]["inertia"] = [1.0, 0.5, 0, 0, 1.0, 0, 0, 0, 1.0]
        with pytest.raises(ModelError, match="non-symmetric inertia"):
            load_model(doc)

    def test_broken_chain_rejected(self):
        doc = planar_doc(2)
        doc["links"][1]["parent"] = "nonexistent"
        with pytest.raises(ModelError, match="broken chain"):
            load_model(doc)

    def test_missing_end_effector_rejected(self):
        doc = planar_doc(2)
        del doc["end_effector"]
        with pytest.raises(ModelError, match="end_effector"):
            load_model(doc)

    def test_unknown_end_effector_rejected(self):
        doc = planar_doc(2)
        doc["end_effector"] = "hand"
        with pytest.raises(ModelError, match="hand"):
            load_model(doc)

    def test_negative_mass_rejected(self):
        doc = pendulum_doc()
        doc["links"][0]["mass"] = -0.2
        with pytest.raises(ModelError, match="mass"):
            load_model(doc)

    def test_two_link_matches_lagrangian_oracle(self, planar2, rng):
        for _ in range(50):
            q = rng.uniform(-np.pi, np.pi, 2)
            assert np.allclose(mass_matrix(planar2, q), two_link_oracle(q[1]), atol=1e-12)

    def test_massless_tail_is_degenerate(self):
        doc = planar_doc(2)
        doc["links"][1]["mass"] = 0.0
        with pytest.raises(ModelError, match="positive definite"):
            load_model(doc)


class TestForwardKinematics:
    def test_stretched_chain(self, planar2):
        pose = forward_kinematics(planar2, [0.0, 0.0])
        np.testing.assert_allclose(pose.position, [2.0, 0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(pose.orientation, [1.0, 0.0, 0.0, 0.0], atol=1e-15)

    def test_rigid_rotation(self, planar2):
        pose = forward_kinematics(planar2, [np.pi / 2, 0.0])
        np.testing.assert_allclose(pose.position, [0.0, 2.0, 0.0], atol=1e-14)
        # 90 degree rotation about z
        np.testing.assert_allclose(
            pose.orientation, [np.cos(np.pi / 4), 0.0, 0.0, np.sin(np.pi / 4)], atol=1e-14
        )

    def test_matches_planar_closed_form(self, planar2, rng):
        for _ in range(100):
            q = rng.uniform(-np.pi, np.pi, 2)
            expected = np.array(
                [
                    np.cos(q[0]) + np.cos(q[0] + q[1]),
                    np.sin(q[0]) + np.sin(q[0] + q[1]),
                    0.0,
                ]
            )
            pose = forward_kinematics(planar2, q)
            np.testing.assert_allclose(pose.position, expected, atol=1e-13)

    def test_configuration_length_checked(self, planar2):
        with pytest.raises(ValueError, match="joints"):
            forward_kinematics(planar2, [0.0, 0.0, 0.0])

    def test_non_finite_configuration_rejected(self, planar2):
        with pytest.raises(ValueError, match="non-finite"):
            forward_kinematics(planar2, [np.nan, 0.0])


class TestGeometricJacobian:
    def test_planar_closed_form_columns(self, planar2):
        J = geometric_jacobian(planar2, [0.0, 0.0])
        np.testing.assert_allclose(J[:3, 0], [0.0, 2.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(J[:3, 1], [0.0, 1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(J[3:, 0], [0.0, 0.0, 1.0], atol=1e-15)

    def test_pendulum_angular_row(self):
        model = load_model(pendulum_doc())
        J = geometric_jacobian(model, [0.0])
        assert J[5, 0] == pytest.approx(1.0)

    @pytest.mark.parametrize("chain_seed,n", [(42, 7), (1, 4)])
    def test_matches_finite_differenced_fk(self, chain_seed, n, rng):
        model = random_chain(n, seed=chain_seed)
        h = 1e-7
        for _ in range(100):
            q = rng.uniform(-1.5, 1.5, n)
            J = geometric_jacobian(model, q)
            for k in range(n):
                e = np.zeros(n)
                e[k] = h
                dp = (
                    forward_kinematics(model, q + e).position
                    - forward_kinematics(model, q - e).position
                ) / (2 * h)
                np.testing.assert_allclose(J[:3, k], dp, atol=1e-6)


class TestMassMatrix:
    def test_point_mass_pendulum(self):
        model = load_model(pendulum_doc(mass=1.0, length=1.0))
        G = mass_matrix(model, [0.3])
        assert G.shape == (1, 1)
        assert G[0, 0] == pytest.approx(1.0, abs=1e-14)

    def test_two_link_stretched(self, planar2):
        G = mass_matrix(planar2, [0.7, 0.0])
        np.testing.assert_allclose(G, [[5.0, 2.0], [2.0, 1.0]], atol=1e-13)

    def test_two_link_folded(self, planar2):
        G = mass_matrix(planar2, [0.1, np.pi])
        np.testing.assert_allclose(G, [[1.0, 0.0], [0.0, 1.0]], atol=1e-13)

    @pytest.mark.parametrize("chain_seed,n", [(42, 7), (3, 5)])
    def test_spd_on_random_configurations(self, chain_seed, n, rng):
        model = random_chain(n, seed=chain_seed)
        for _ in range(50):
            q = rng.uniform(-np.pi, np.pi, n)
            G = mass_matrix(model, q)
            np.testing.assert_allclose(G, G.T, atol=1e-12)
            x = rng.normal(size=n)
            assert x @ G @ x > 0.0


class TestMassMatrixDerivatives:
    def test_two_link_analytic_slice(self, planar2, rng):
        for _ in range(20):
            q = rng.uniform(-np.pi, np.pi, 2)
            dG = mass_matrix_derivatives(planar2, q)
            assert dG[1, 0, 0] == pytest.approx(-2.0 * np.sin(q[1]), abs=1e-12)
            assert dG[1, 0, 1] == pytest.approx(-np.sin(q[1]), abs=1e-12)

    def test_constant_entries_have_zero_derivative(self, planar2, rng):
        q = rng.uniform(-np.pi, np.pi, 2)
        dG = mass_matrix_derivatives(planar2, q)
        # G22 of the planar chain is constant
        assert abs(dG[0, 1, 1]) < 1e-14
        assert abs(dG[1, 1, 1]) < 1e-14

    def test_slices_symmetric(self, chain7, rng):
        q = rng.uniform(-1.5, 1.5, 7)
        dG = mass_matrix_derivatives(chain7, q)
        for k in range(7):
            np.testing.assert_allclose(dG[k], dG[k].T, atol=1e-12)

    @pytest.mark.parametrize("chain_seed,n", [(42, 7), (9, 3)])
    def test_matches_central_finite_differences(self, chain_seed, n, rng):
        model = random_chain(n, seed=chain_seed)
        h = 1e-6
        for _ in range(100):
            q = rng.uniform(-1.5, 1.5, n)
            dG = mass_matrix_derivatives(model, q)
            for k in range(n):
                e = np.zeros(n)
                e[k] = h
                fd = (mass_matrix(model, q + e) - mass_matrix(model, q - e)) / (2 * h)
                np.testing.assert_allclose(dG[k], fd, atol=1e-5)


class TestModelProperties:
    def test_reach_of_planar_chain(self, planar2):
        assert planar2.reach() == pytest.approx(2.0)

    def test_packed_arrays_read_only(self, planar2):
        axes = planar2.kernel_args[0]
        with pytest.raises(ValueError):
            axes[0, 0] = 5.0

    def test_load_does_not_mutate_document(self):
        doc = planar_doc(2)
        snapshot = copy.deepcopy(doc)
        load_model(doc)
        assert doc == snapshot
