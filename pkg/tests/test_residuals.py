"""Test cases for camera-to-camera residuals and reprojection statistics."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dccal.core.errors import ShapeMismatchError
from dccal.core.solver import numeric_jacobian
from dccal.model.kinematics import JointState, pack_parameters
from dccal.estimators.residuals import (
    ReprojectionStats,
    evaluate_set,
    residual_dynamic,
    residual_static,
)


class TestResiduals:
    """Test residual definitions and stacking order."""

    def test_noiseless_residuals_vanish(self, noiseless_bundle):
        bundle = noiseless_bundle
        ds = bundle.dataset
        kin = pack_parameters(bundle.truth_model)
        for mset, beta in zip(ds.sets, bundle.truth_angles):
            evaluation = evaluate_set(
                kin, 2, beta.as_array(), ds.intrinsics_s, ds.intrinsics_d, mset, False
            )
            assert evaluation.residuals.shape == (4 * mset.num_points,)
            assert np.max(np.abs(evaluation.residuals)) < 1e-8

    def test_stacking_order(self, noisy_bundle):
        """[e_d(u), e_d(v), e_s(u), e_s(v)] point by point."""
        bundle = noisy_bundle
        ds = bundle.dataset
        mset, beta = ds.sets[0], bundle.truth_angles[0]
        evaluation = evaluate_set(
            pack_parameters(bundle.truth_model),
            2,
            beta.as_array(),
            ds.intrinsics_s,
            ds.intrinsics_d,
            mset,
            False,
        )
        per_point = evaluation.residuals.reshape(-1, 4)
        for j in (0, 5, mset.num_points - 1):
            e_d = residual_dynamic(
                bundle.truth_model, beta, ds.intrinsics_d, mset.p_s[j], mset.q_d[j]
            )
            e_s = residual_static(
                bundle.truth_model, beta, ds.intrinsics_s, mset.p_d[j], mset.q_s[j]
            )
            assert_allclose(per_point[j, :2], e_d, atol=1e-9)
            assert_allclose(per_point[j, 2:], e_s, atol=1e-9)

    def test_jacobian_matches_finite_differences(self, noisy_bundle, rng):
        """Analytic blocks agree with central differences on random configurations."""
        bundle = noisy_bundle
        ds = bundle.dataset
        kin_true = pack_parameters(bundle.truth_model)
        for trial in range(25):
            kin = kin_true + rng.normal(0.0, 0.01, kin_true.shape[0])
            mset = ds.sets[trial % ds.num_sets]
            beta = bundle.truth_angles[trial % ds.num_sets].as_array()
            beta = beta + rng.normal(0.0, 0.05, 2)
            evaluation = evaluate_set(
                kin, 2, beta, ds.intrinsics_s, ds.intrinsics_d, mset, True
            )

            def by_kin(x):
                return evaluate_set(
                    x, 2, beta, ds.intrinsics_s, ds.intrinsics_d, mset, False
                ).residuals

            def by_beta(b):
                return evaluate_set(
                    kin, 2, b, ds.intrinsics_s, ds.intrinsics_d, mset, False
                ).residuals

            for analytic, numeric in (
                (evaluation.jac_kinematic, numeric_jacobian(by_kin, kin)),
                (evaluation.jac_joints, numeric_jacobian(by_beta, beta)),
            ):
                error = np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric)
                assert error < 1e-4


class TestReprojectionStats:
    """Test the reprojection statistics."""

    def test_single_point(self):
        stats = ReprojectionStats.from_residuals(np.array([3.0, 4.0, 0.0, 0.0]), [1])
        assert stats.n_points == 2
        assert stats.mean_px == pytest.approx(2.5)
        assert stats.std_px == pytest.approx(2.5)
        assert stats.rms_px == pytest.approx(2.5)
        assert stats.mean_dynamic_px == pytest.approx(5.0)
        assert stats.mean_static_px == pytest.approx(0.0)
        assert stats.per_set_mean_px == pytest.approx((2.5,))

    def test_per_set_means(self):
        residuals = np.array(
            [1.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0, 2.0, 0.0, 4.0, 4.0, 0.0]
        )
        stats = ReprojectionStats.from_residuals(residuals, [1, 2])
        assert stats.per_set_mean_px == pytest.approx((1.0, 3.0))
        assert stats.mean_px == pytest.approx(14.0 / 6.0)

    def test_size_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            ReprojectionStats.from_residuals(np.zeros(8), [3])

    def test_residual_helpers_take_joint_states(self, truth_model, camera):
        """The single-point helpers accept a JointState."""
        beta = JointState((0.0, 0.0))
        e = residual_dynamic(
            truth_model, beta, camera, np.array([0.0, 0.0, 1.0]), [0.0, 0.0]
        )
        assert e.shape == (2,)
        assert np.all(np.isfinite(e))
