"""Trajectory angles, kinematics, medium force laws, and fitness arithmetic."""

import numpy as np
import pytest

from voxleg import simulate
from voxleg.simulate import (
    InvalidLegError,
    LegRig,
    MediumModel,
    OutOfRangeError,
    StepTrajectory,
    TorqueTrace,
    _force_scale,
    _medium_forces,
    evaluate,
    fitness_from_trace,
    fitness_value,
    joint_angles,
    medium_torque,
    surface_mask,
    voxel_kinematics,
)
from voxleg.voxels import EmptyGridError, GridDims, VoxelGrid

SMALL = GridDims(4, 8, 4, 5.0)


def single_voxel_grid(dims=SMALL, at=(1, 2, 1)) -> VoxelGrid:
    occ = np.zeros(dims.shape, dtype=bool)
    occ[at] = True
    return VoxelGrid(dims, occ)


class TestJointAngles:
    def test_phase_endpoints_exact(self):
        assert joint_angles(0) == (30.0, 30.0, -30.0)
        assert joint_angles(999) == (30.0, 0.0, 0.0)
        assert joint_angles(2999) == (-30.0, 30.0, -30.0)

    def test_phase_two_sweeps_coxa(self):
        assert joint_angles(1000) == (30.0, 0.0, 0.0)
        assert joint_angles(1999) == (-30.0, 0.0, 0.0)
        mid = joint_angles(1500)
        assert -30.0 < mid[0] < 30.0
        assert mid[1] == 0.0 and mid[2] == 0.0

    def test_tibia_mirrors_femur(self):
        for step in range(0, 3000, 37):
            _, femur, tibia = joint_angles(step)
            assert tibia == -femur

    def test_continuity_bound(self):
        angles = np.array([joint_angles(s) for s in range(3000)])
        deltas = np.abs(np.diff(angles, axis=0))
        assert deltas.max() <= 60.0 / 999.0 + 1e-12

    def test_out_of_range(self):
        with pytest.raises(OutOfRangeError):
            joint_angles(-1)
        with pytest.raises(OutOfRangeError):
            joint_angles(3000)

    def test_custom_trajectory_length(self):
        traj = StepTrajectory(n_steps=300)
        assert joint_angles(0, traj) == (30.0, 30.0, -30.0)
        assert joint_angles(99, traj) == (30.0, 0.0, 0.0)
        assert joint_angles(299, traj) == (-30.0, 30.0, -30.0)

    def test_trajectory_validation(self):
        with pytest.raises(ValueError):
            StepTrajectory(n_steps=100)  # not a multiple of 3
        with pytest.raises(ValueError):
            StepTrajectory(dt=0.0)


class TestKinematics:
    def test_single_voxel_reported_alone(self):
        grid = single_voxel_grid()
        pos, vel = voxel_kinematics(LegRig(), grid, 0)
        assert pos.shape == (1, 3) and vel.shape == (1, 3)

    def test_surface_mask_of_solid_block(self):
        grid = VoxelGrid.full(SMALL)
        mask = surface_mask(grid)
        # Interior of a 4x8x4 block is 2x6x2.
        assert mask.sum() == SMALL.cell_count - 2 * 6 * 2
        assert bool(mask[0].all())

    def test_position_matches_analytic_transform(self):
        # At step 999 the femur and tibia are straight (0 deg) and the coxa is
        # yawed +30 deg, so the tibia joint sits at Ry(30) @ (130, 0, 0) and
        # the voxel hangs below it.
        rig = LegRig()
        dims = GridDims(1, 1, 1, 5.0)
        grid = VoxelGrid.full(dims)
        pos, _ = voxel_kinematics(rig, grid, 999)
        yaw = np.radians(30.0)
        ry = np.array(
            [
                [np.cos(yaw), 0.0, np.sin(yaw)],
                [0.0, 1.0, 0.0],
                [-np.sin(yaw), 0.0, np.cos(yaw)],
            ]
        )
        local = np.array([0.0, -2.5, 0.0])  # voxel center, 2.5 mm below joint
        expected = ry @ local + ry @ np.array([130.0, 0.0, 0.0])
        assert np.allclose(pos[0], expected, atol=1e-9)

    def test_static_angles_give_zero_velocity(self, monkeypatch):
        def frozen(steps, trajectory):
            steps = np.asarray(steps)
            return np.broadcast_to(
                np.array([10.0, 20.0, -20.0]), (steps.shape[0], 3)
            ).copy()

        monkeypatch.setattr(simulate, "_angles_for_steps", frozen)
        _, vel = voxel_kinematics(LegRig(), single_voxel_grid(), 1500)
        assert np.allclose(vel, 0.0, atol=1e-9)

    def test_velocity_matches_position_difference(self):
        rig = LegRig()
        grid = single_voxel_grid()
        step = 500
        traj = StepTrajectory()
        pos_prev, _ = voxel_kinematics(rig, grid, step - 1, traj)
        pos_next, _ = voxel_kinematics(rig, grid, step + 1, traj)
        _, vel = voxel_kinematics(rig, grid, step, traj)
        assert np.allclose(vel, (pos_next - pos_prev) / (2 * traj.dt), atol=1e-9)

    def test_empty_grid_raises(self):
        with pytest.raises(EmptyGridError):
            voxel_kinematics(LegRig(), VoxelGrid.empty(SMALL), 0)


class TestForceLaws:
    def test_no_force_above_surface(self):
        positions = np.array([[0.0, 10.0, 0.0]])  # above terrain at -40
        velocities = np.array([[100.0, 0.0, 0.0]])
        force = _medium_forces(positions, velocities, MediumModel.soil(), 5.0)
        assert np.allclose(force, 0.0)

    def test_no_force_at_rest(self):
        positions = np.array([[0.0, -100.0, 0.0]])
        velocities = np.zeros((1, 3))
        force = _medium_forces(positions, velocities, MediumModel.soil(), 5.0)
        assert np.allclose(force, 0.0)

    def test_force_opposes_velocity(self):
        positions = np.array([[0.0, -100.0, 0.0]])
        velocities = np.array([[30.0, -40.0, 0.0]])
        for medium in (MediumModel.soil(), MediumModel.gravel(), MediumModel.fluid()):
            force = _medium_forces(positions, velocities, medium, 5.0)[0]
            cosine = force @ velocities[0] / (
                np.linalg.norm(force) * np.linalg.norm(velocities[0])
            )
            assert cosine == pytest.approx(-1.0)

    def test_soil_magnitude_is_depth_proportional(self):
        medium = MediumModel.soil()
        velocities = np.array([[100.0, 0.0, 0.0]])
        f1 = _medium_forces(np.array([[0.0, -50.0, 0.0]]), velocities, medium, 5.0)
        f2 = _medium_forces(np.array([[0.0, -60.0, 0.0]]), velocities, medium, 5.0)
        # Depths are 10 and 20 mm below the -40 surface.
        assert np.linalg.norm(f2) == pytest.approx(2 * np.linalg.norm(f1))
        # Hand value: k * depth * A = 0.002 * 10 * 25 = 0.5 N.
        assert np.linalg.norm(f1) == pytest.approx(0.5)

    def test_fluid_drag_quadruples_when_speed_doubles(self):
        medium = MediumModel.fluid()
        positions = np.array([[0.0, -100.0, 0.0]])
        f1 = _medium_forces(positions, np.array([[50.0, 0.0, 0.0]]), medium, 5.0)
        f2 = _medium_forces(positions, np.array([[100.0, 0.0, 0.0]]), medium, 5.0)
        assert np.linalg.norm(f2) == pytest.approx(4 * np.linalg.norm(f1))

    def test_fluid_hand_value(self):
        # 0.5 * 1000 * 1.0 * (25e-6 m^2) * (1 m/s)^2 = 0.0125 N.
        medium = MediumModel.fluid()
        force = _medium_forces(
            np.array([[0.0, -100.0, 0.0]]),
            np.array([[1000.0, 0.0, 0.0]]),
            medium,
            5.0,
        )
        assert np.linalg.norm(force) == pytest.approx(0.0125)

    def test_gravel_horizontal_motion_costs_more(self):
        medium = MediumModel.gravel()
        positions = np.array([[0.0, -100.0, 0.0]])
        vertical = _medium_forces(positions, np.array([[0.0, -80.0, 0.0]]), medium, 5.0)
        horizontal = _medium_forces(positions, np.array([[80.0, 0.0, 0.0]]), medium, 5.0)
        assert np.linalg.norm(horizontal) == pytest.approx(
            1.5 * np.linalg.norm(vertical)
        )

    def test_gravel_exceeds_soil(self):
        positions = np.array([[0.0, -100.0, 0.0]])
        velocities = np.array([[10.0, -10.0, 10.0]])
        soil = _medium_forces(positions, velocities, MediumModel.soil(), 5.0)
        gravel = _medium_forces(positions, velocities, MediumModel.gravel(), 5.0)
        assert np.linalg.norm(gravel) > np.linalg.norm(soil)

    def test_unknown_medium_rejected(self):
        with pytest.raises(ValueError):
            MediumModel(kind="lava")


class TestMediumTorque:
    def test_all_zero_above_terrain_without_gravity(self):
        rig = LegRig(gravity=0.0)
        medium = MediumModel.soil(terrain_height=-1e9)
        taus = medium_torque(rig, single_voxel_grid(), 777, medium)
        assert taus == (0.0, 0.0, 0.0)

    def test_gravity_cross_product_hand_check(self):
        # Zero-coefficient medium isolates gravity.  At step 999 all pitch
        # angles are 0 and the coxa is yawed 30 deg, so the pitch axis is
        # Ry(30) @ z and the single voxel sits 2.5 mm under the tibia joint.
        rig = LegRig()
        dims = GridDims(1, 1, 1, 5.0)
        grid = VoxelGrid.full(dims)
        medium = MediumModel.soil(k_soil=0.0)
        tau = medium_torque(rig, grid, 999, medium)
        yaw = np.radians(30.0)
        ry = np.array(
            [
                [np.cos(yaw), 0.0, np.sin(yaw)],
                [0.0, 1.0, 0.0],
                [-np.sin(yaw), 0.0, np.cos(yaw)],
            ]
        )
        pos = ry @ (np.array([130.0, 0.0, 0.0]) + np.array([0.0, -2.5, 0.0]))
        femur_joint = ry @ np.array([50.0, 0.0, 0.0])
        tibia_joint = ry @ np.array([130.0, 0.0, 0.0])
        force = np.array([0.0, -rig.voxel_mass_kg(5.0) * rig.gravity, 0.0])
        pitch_axis = ry @ np.array([0.0, 0.0, 1.0])
        expected_coxa = np.cross(pos, force) @ np.array([0.0, 1.0, 0.0]) / 1000.0
        expected_femur = np.cross(pos - femur_joint, force) @ pitch_axis / 1000.0
        expected_tibia = np.cross(pos - tibia_joint, force) @ pitch_axis / 1000.0
        assert tau[0] == pytest.approx(expected_coxa, abs=1e-12)
        assert tau[1] == pytest.approx(expected_femur, abs=1e-12)
        assert tau[2] == pytest.approx(expected_tibia, abs=1e-12)

    def test_mass_loading_is_monotone_at_femur(self):
        # With the medium silenced, every added voxel hangs on the same side
        # of the femur joint, so the gravity torque magnitude only grows.
        rig = LegRig()
        medium = MediumModel.soil(k_soil=0.0)
        occ = np.zeros(SMALL.shape, dtype=bool)
        prev = 0.0
        for extent in range(1, SMALL.ny + 1):
            occ[1, :extent, 1] = True
            tau = medium_torque(rig, VoxelGrid(SMALL, occ.copy()), 1500, medium)
            assert abs(tau[1]) >= prev
            prev = abs(tau[1])

    def test_kernel_agrees_with_reference_forces(self):
        # Cross-check the evaluation kernel against the plain numpy force law
        # plus explicit cross products.
        rig = LegRig(gravity=0.0)
        grid = VoxelGrid.full(GridDims(2, 3, 2, 5.0))
        traj = StepTrajectory()
        for medium in (
            MediumModel.soil(terrain_height=140.0),
            MediumModel.gravel(terrain_height=140.0),
            MediumModel.fluid(terrain_height=140.0),
        ):
            for step in (0, 450, 1500, 2700):
                pos, vel = voxel_kinematics(rig, grid, step, traj)
                forces = _medium_forces(pos, vel, medium, 5.0)
                yaw = np.radians(joint_angles(step, traj)[0])
                ry = np.array(
                    [
                        [np.cos(yaw), 0.0, np.sin(yaw)],
                        [0.0, 1.0, 0.0],
                        [-np.sin(yaw), 0.0, np.cos(yaw)],
                    ]
                )
                femur_joint = ry @ np.array([rig.coxa_length, 0.0, 0.0])
                pitch_axis = ry @ np.array([0.0, 0.0, 1.0])
                expected_femur = (
                    np.cross(pos - femur_joint, forces).sum(axis=0) @ pitch_axis
                ) / 1000.0
                expected_coxa = np.cross(pos, forces).sum(axis=0)[1] / 1000.0
                tau = medium_torque(rig, grid, step, medium, traj)
                assert tau[0] == pytest.approx(expected_coxa, abs=1e-9)
                assert tau[1] == pytest.approx(expected_femur, abs=1e-9)

    def test_out_of_range_step(self):
        with pytest.raises(OutOfRangeError):
            medium_torque(LegRig(), single_voxel_grid(), 3000, MediumModel.soil())

    def test_empty_grid(self):
        with pytest.raises(EmptyGridError):
            medium_torque(LegRig(), VoxelGrid.empty(SMALL), 0, MediumModel.soil())


class TestFitness:
    def test_delta_zero_is_reciprocal(self):
        assert fitness_value(1.0, 0.0) == 1.0
        assert fitness_value(0.25, 0.0) == 4.0

    def test_direct_substitution_cases(self):
        assert fitness_value(1.0, 5.0) == pytest.approx(0.5, abs=1e-12)
        assert fitness_value(0.1, 10.0) == pytest.approx(10.0 / 3.0, abs=1e-12)

    def test_strictly_decreasing_in_delta_and_torque(self, rng):
        for _ in range(50):
            t = float(rng.uniform(0.01, 5.0))
            d = float(rng.uniform(0.0, 99.0))
            assert fitness_value(t, d) > fitness_value(t, d + 0.5)
            assert fitness_value(t, d) > fitness_value(t + 0.01, d)

    def test_stub_trace_arithmetic(self):
        ones = np.full(10, 0.5)
        trace = TorqueTrace(ones, np.zeros(10), np.zeros(10))
        assert trace.mean == 0.5
        assert fitness_from_trace(trace, 5.0) == pytest.approx(1.0, abs=1e-12)

    def test_zero_torque_is_degenerate(self):
        with pytest.raises(InvalidLegError):
            fitness_value(0.0, 10.0)


class TestEvaluate:
    def test_trace_shape_and_fitness_consistency(self):
        grid = VoxelGrid.full(GridDims(2, 4, 2, 5.0))
        fitness, trace = evaluate(grid)
        assert len(trace) == 3000
        assert np.all(trace.combined >= 0.0)
        from voxleg.voxels import occupancy_percentage

        assert fitness == fitness_value(trace.mean, occupancy_percentage(grid))

    def test_bit_identical_across_calls(self):
        grid = VoxelGrid.full(GridDims(2, 4, 2, 5.0))
        f1, t1 = evaluate(grid)
        f2, t2 = evaluate(grid)
        assert f1 == f2
        assert np.array_equal(t1.tau_coxa, t2.tau_coxa)
        assert np.array_equal(t1.tau_femur, t2.tau_femur)
        assert np.array_equal(t1.tau_tibia, t2.tau_tibia)

    def test_trace_agrees_with_single_step_torques(self):
        grid = VoxelGrid.full(GridDims(2, 3, 2, 5.0))
        medium = MediumModel.gravel()
        _, trace = evaluate(grid, medium=medium)
        for step in (0, 500, 1500, 2999):
            tau = medium_torque(LegRig(), grid, step, medium)
            assert trace.tau_coxa[step] == pytest.approx(tau[0], abs=1e-12)
            assert trace.tau_femur[step] == pytest.approx(tau[1], abs=1e-12)
            assert trace.tau_tibia[step] == pytest.approx(tau[2], abs=1e-12)

    def test_empty_grid_is_invalid(self):
        with pytest.raises(InvalidLegError):
            evaluate(VoxelGrid.empty(SMALL))

    def test_trace_csv_round_trip(self, tmp_path):
        grid = VoxelGrid.full(GridDims(2, 3, 2, 5.0))
        _, trace = evaluate(grid, trajectory=StepTrajectory(n_steps=30))
        out = tmp_path / "trace.csv"
        trace.write_csv(out)
        lines = out.read_text().splitlines()
        assert lines[0] == "step,tau_coxa,tau_femur,tau_tibia,tau_sum"
        assert len(lines) == 31
        first = lines[1].split(",")
        assert float(first[1]) == trace.tau_coxa[0]
