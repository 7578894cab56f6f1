import math

import numpy as np
import pytest

from armid.dynamics import inverse_dynamics_batch
from armid.excite import DesignProblem, FourierTrajectory, random_feasible_trajectory, sample_trajectory
from armid.model import (
    combine_inertial,
    is_physically_feasible,
    pack_params,
    solid_sphere_params,
    unpack_params,
)
from armid.simulate import (
    FIXTURE_NAMES,
    NoiseSpec,
    SimulateError,
    builtin_fixture,
    generate_dataset,
    lump_payload,
    write_dataset,
)


def _test_trajectory(n, seed=0, omega=2 * math.pi * 0.1, L=3):
    rng = np.random.default_rng(seed)
    a = 0.3 * rng.standard_normal((n, L))
    b = 0.3 * rng.standard_normal((n, L))
    return FourierTrajectory(omega, L, np.zeros(n), a, b)


class TestFixtures:
    def test_pendulum_shape(self):
        fixture = builtin_fixture("pendulum1")
        assert fixture.model.num_joints == 1
        assert pack_params(fixture.model).shape == (13,)

    @pytest.mark.parametrize("name", FIXTURE_NAMES)
    def test_all_links_feasible(self, name):
        fixture = builtin_fixture(name)
        for params in fixture.model.inertial_params:
            report = is_physically_feasible(params)
            assert report.feasible, f"{name}: {report.binding_constraint}"

    def test_arm7_limits(self):
        fixture = builtin_fixture("arm7")
        assert fixture.model.num_joints == 7
        for joint in fixture.model.joint_specs:
            assert joint.position_limits == (-2.9, 2.9)
            assert joint.velocity_limit == 1.7

    def test_unknown_name(self):
        with pytest.raises(SimulateError, match="unknown fixture"):
            builtin_fixture("arm99")


class TestGenerate:
    def test_zero_noise_reproduces_inverse_dynamics(self):
        fixture = builtin_fixture("planar2")
        traj = _test_trajectory(2)
        trials = generate_dataset(fixture, traj, 50.0, 1, NoiseSpec(seed=3))
        trial = trials[0]
        _, q, qd, qdd = sample_trajectory(traj, 50.0)
        tau = inverse_dynamics_batch(fixture.model, q, qd, qdd)
        np.testing.assert_allclose(trial.tau, tau, atol=1e-12)
        np.testing.assert_allclose(trial.q, q, atol=1e-12)

    def test_same_seed_bit_identical(self):
        fixture = builtin_fixture("planar2")
        traj = _test_trajectory(2)
        noise = NoiseSpec(torque_abs_std=0.1, position_std=1e-4, seed=11)
        a = generate_dataset(fixture, traj, 50.0, 3, noise)
        b = generate_dataset(fixture, traj, 50.0, 3, noise)
        for ta, tb in zip(a, b):
            np.testing.assert_array_equal(ta.q, tb.q)
            np.testing.assert_array_equal(ta.tau, tb.tau)

    def test_trials_differ_within_seed(self):
        fixture = builtin_fixture("planar2")
        traj = _test_trajectory(2)
        noise = NoiseSpec(torque_abs_std=0.1, seed=11)
        a, b = generate_dataset(fixture, traj, 50.0, 2, noise)
        assert not np.array_equal(a.tau, b.tau)

    def test_aliasing_rejected(self):
        fixture = builtin_fixture("planar2")
        traj = _test_trajectory(2, L=5)
        with pytest.raises(SimulateError, match="alias"):
            generate_dataset(fixture, traj, 0.5, 1, NoiseSpec())

    def test_noise_statistics(self):
        # empirical std of additive torque noise within 5% over ~1e5 draws
        fixture = builtin_fixture("pendulum1")
        traj = _test_trajectory(1, omega=2 * math.pi * 0.2)
        noise = NoiseSpec(torque_abs_std=0.25, seed=5)
        trials = generate_dataset(fixture, traj, 200.0, 100, noise)
        _, q, qd, qdd = sample_trajectory(traj, 200.0)
        tau_true = inverse_dynamics_batch(fixture.model, q, qd, qdd)
        residuals = np.concatenate([(t.tau - tau_true).ravel() for t in trials])
        assert residuals.size >= 1e5
        assert abs(np.std(residuals) - 0.25) / 0.25 < 0.05

    def test_relative_noise_scales_with_torque(self):
        fixture = builtin_fixture("pendulum1")
        traj = _test_trajectory(1)
        noise = NoiseSpec(torque_rel_std=0.01, seed=6)
        trials = generate_dataset(fixture, traj, 100.0, 200, noise)
        _, q, qd, qdd = sample_trajectory(traj, 100.0)
        tau_true = inverse_dynamics_batch(fixture.model, q, qd, qdd)
        stack = np.stack([t.tau for t in trials])
        stds = np.std(stack - tau_true, axis=0)
        big = np.abs(tau_true) > np.percentile(np.abs(tau_true), 90)
        ratio = np.mean(stds[big] / np.abs(tau_true)[big])
        assert abs(ratio - 0.01) / 0.01 < 0.15


class TestPayloadLumping:
    def test_lumped_equals_manual_composite(self):
        fixture = builtin_fixture("chain3")
        payload = solid_sphere_params(0.4, 0.05, [0.0, 0.0, 0.1])
        lumped = lump_payload(fixture.model, payload)
        vec = pack_params(fixture.model).copy()
        vec[26:39] = combine_inertial(fixture.model.inertial_params[2], payload).to_vector()
        manual = unpack_params(vec, fixture.model)
        rng = np.random.default_rng(1)
        q = rng.uniform(-2, 2, (50, 3))
        qd = rng.uniform(-2, 2, (50, 3))
        qdd = rng.uniform(-5, 5, (50, 3))
        np.testing.assert_allclose(
            inverse_dynamics_batch(lumped, q, qd, qdd),
            inverse_dynamics_batch(manual, q, qd, qdd),
            atol=1e-12,
        )

    def test_generate_uses_lumped_payload(self):
        fixture = builtin_fixture("chain3")
        payload = solid_sphere_params(0.4, 0.05, [0.0, 0.0, 0.1])
        loaded = fixture.with_payload(payload)
        traj = _test_trajectory(3)
        trial = generate_dataset(loaded, traj, 50.0, 1, NoiseSpec())[0]
        _, q, qd, qdd = sample_trajectory(traj, 50.0)
        tau = inverse_dynamics_batch(lump_payload(fixture.model, payload), q, qd, qdd)
        np.testing.assert_allclose(trial.tau, tau, atol=1e-12)

    def test_infeasible_payload_rejected(self):
        fixture = builtin_fixture("chain3")
        from armid.model import LinkInertialParams

        bogus = LinkInertialParams(-0.5, np.zeros(3), np.zeros((3, 3)))
        with pytest.raises(SimulateError, match="payload"):
            fixture.with_payload(bogus)


class TestWriteDataset:
    def test_emits_trials_and_manifest(self, tmp_path):
        fixture = builtin_fixture("planar2")
        problem = DesignProblem(model=fixture.model, sample_rate=20.0)
        rng = np.random.default_rng(2)
        traj = random_feasible_trajectory(problem, 2 * math.pi * 0.1, 3, rng)
        paths = write_dataset(tmp_path, fixture, traj, 50.0, 2, NoiseSpec(seed=1))
        assert len(paths) == 2
        assert (tmp_path / "manifest.json").exists()
        import json

        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["fixture"] == "planar2"
        assert len(manifest["truth_parameters"]) == 26
        assert manifest["noise"]["seed"] == 1
