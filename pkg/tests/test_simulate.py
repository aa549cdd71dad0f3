import math

import numpy as np
import pytest

from floorref.errors import DegenerateMotion, MarkNotVisible, TargetNotVisible
from floorref.experiment import measure_mark
from floorref.geometry import apply, compose, invert, rotation_distance
from floorref.pipeline import compute_rob_h_cam
from floorref.schemas import session_to_dict
from floorref.simulate import (
    GLASS_NOISE,
    NO_NOISE,
    NoiseConfig,
    RobotPlacement,
    camera_ground_offset,
    default_placements,
    demo_world,
    experiment_placement,
    inject_wooden_plate,
    pose_on_surface,
    simulate_mark_observation,
    simulate_referencing_session,
)


class TestDeterminism:
    def test_same_seed_bit_identical(self):
        world = demo_world(seed=123)
        p0, p1 = default_placements(world)
        a = simulate_referencing_session(world, GLASS_NOISE, p0, p1)
        b = simulate_referencing_session(world, GLASS_NOISE, p0, p1)
        assert session_to_dict(a) == session_to_dict(b)

    def test_trial_substreams_differ(self):
        world = demo_world(seed=123)
        p0, p1 = default_placements(world)
        a = simulate_referencing_session(world, GLASS_NOISE, p0, p1, trial=0)
        b = simulate_referencing_session(world, GLASS_NOISE, p0, p1, trial=1)
        assert session_to_dict(a) != session_to_dict(b)


class TestSessionGeneration:
    def test_zero_noise_recovers_truth(self, world, noiseless_session):
        result = compute_rob_h_cam(noiseless_session)
        g = world.h_rob_cam_true
        assert rotation_distance(result.h_rob_cam.rotation, g.rotation) < 1e-8
        assert np.max(np.abs(result.h_rob_cam.translation - g.translation)) < 1e-6

    def test_target_not_visible_off_plate(self, world):
        p0 = RobotPlacement(5000.0, 5000.0, 0.0)
        p1 = RobotPlacement(5200.0, 5000.0, 0.0)
        with pytest.raises(TargetNotVisible, match="simulate_referencing_session"):
            simulate_referencing_session(world, NO_NOISE, p0, p1)

    def test_coincident_placements_rejected(self, world):
        p = RobotPlacement(100.0, 100.0, 0.0)
        with pytest.raises(DegenerateMotion, match="simulate_referencing_session"):
            simulate_referencing_session(world, NO_NOISE, p, p)

    def test_robot_smr_equals_true_pose_translation(self, world, noiseless_session):
        p0, p1 = default_placements(world)
        for index, placement in ((0, p0), (1, p1)):
            truth = pose_on_surface(world, placement, "plate").translation
            assert np.array_equal(noiseless_session.robot_position(index), truth)

    def test_tracker_noise_empirical_sigma(self):
        world = demo_world(seed=9)
        p0, p1 = default_placements(world)
        sigma = 0.035
        noise = NoiseConfig(tracker_sigma_mm=sigma)
        truth = {}
        base = simulate_referencing_session(world, NO_NOISE, p0, p1)
        for m in base.tracker:
            truth[(m.point_id, m.position_index)] = m.position
        samples = []
        n_sessions = 2000  # 5 points x 2000 sessions = 1e4 smr measurements
        for trial in range(n_sessions):
            s = simulate_referencing_session(world, noise, p0, p1, trial=trial)
            for m in s.tracker:
                samples.append(m.position - truth[(m.point_id, m.position_index)])
        devs = np.array(samples).ravel()
        assert abs(devs.std() - sigma) / sigma < 0.05


class TestSupportPose:
    def test_flat_plate_pose_is_exact(self, world):
        h = pose_on_surface(world, RobotPlacement(210.0, -270.0, 0.3), "plate")
        assert np.allclose(h.rotation[:, 2], [0.0, 0.0, 1.0], atol=1e-15)
        assert h.translation[2] == world.robot.smr_height_mm

    @pytest.mark.parametrize("surface", ["plate", "floor"])
    def test_wheels_rest_on_surface(self, surface):
        world = demo_world(seed=3)
        world = inject_wooden_plate(world, 1.5)
        from dataclasses import replace

        world = replace(world, floor_inclination_rad=math.radians(1.0), floor_azimuth_rad=0.7)
        placement = RobotPlacement(250.0, -180.0, 0.8)
        h = pose_on_surface(world, placement, surface)
        surf = world.plate_surface_z if surface == "plate" else world.floor_surface_z
        contacts = apply(h, world.robot.wheel_contacts_rob)
        gaps = np.abs(np.asarray(surf(contacts[:, 0], contacts[:, 1])) - contacts[:, 2])
        assert np.max(gaps) < 1e-9

    def test_smr_sits_above_support_plane(self):
        world = demo_world(seed=3)
        from dataclasses import replace

        world = replace(world, floor_inclination_rad=math.radians(2.0))
        h = pose_on_surface(world, RobotPlacement(500.0, 100.0, 0.2), "floor")
        contacts = apply(h, world.robot.wheel_contacts_rob)
        n = np.cross(contacts[1] - contacts[0], contacts[2] - contacts[0])
        n = n / np.linalg.norm(n)
        if n[2] < 0:
            n = -n
        heights = (h.translation - contacts) @ n
        assert np.max(np.abs(heights - world.robot.smr_height_mm)) < 1e-9


class TestMarkObservation:
    def test_mark_under_principal_ray_hits_principal_point(self, world):
        mark = np.array([1500.0, 700.0, 0.0])
        placement = experiment_placement(world, mark, 0.4, (0.0, 0.0))
        ip, _ = simulate_mark_observation(world, NO_NOISE, placement, mark)
        assert abs(ip.row - world.camera.cy_px) < 1e-9
        assert abs(ip.col - world.camera.cx_px) < 1e-9

    def test_round_trip_with_true_calibration(self, world, noiseless_result):
        mark = np.array([1500.0, 700.0, 0.0])
        for yaw in (0.0, 1.1, -2.0):
            placement = experiment_placement(world, mark, yaw, (4.0, -6.0))
            ip, smr = simulate_mark_observation(world, NO_NOISE, placement, mark)
            h_abs_rob = pose_on_surface(world, placement, "floor")
            recovered = measure_mark(noiseless_result, ip, h_abs_rob)
            assert np.max(np.abs(recovered - mark)) < 1e-6

    def test_mark_not_visible(self, world):
        mark = np.array([1500.0, 700.0, 0.0])
        placement = RobotPlacement(0.0, 0.0, 0.0)
        with pytest.raises(MarkNotVisible):
            simulate_mark_observation(world, NO_NOISE, placement, mark)


class TestWoodenPlateInjection:
    def test_zero_amplitude_is_identity(self, world):
        w = inject_wooden_plate(world, 0.0)
        p0, p1 = default_placements(world)
        a = simulate_referencing_session(world, NO_NOISE, p0, p1)
        b = simulate_referencing_session(w, NO_NOISE, p0, p1)
        assert session_to_dict(a) == session_to_dict(b)

    def test_truth_unchanged(self, world):
        w = inject_wooden_plate(world, 1.0)
        assert np.array_equal(w.h_rob_cam_true.matrix, world.h_rob_cam_true.matrix)

    def test_tiny_amplitude_continuity(self, world):
        p0, p1 = default_placements(world)
        flat = compute_rob_h_cam(simulate_referencing_session(world, NO_NOISE, p0, p1))
        bent = compute_rob_h_cam(
            simulate_referencing_session(inject_wooden_plate(world, 1e-6), NO_NOISE, p0, p1)
        )
        delta = np.linalg.norm(flat.h_rob_cam.translation - bent.h_rob_cam.translation)
        assert delta < 1e-4

    def test_peak_amplitude_matches_config(self):
        world = inject_wooden_plate(demo_world(seed=0), 1.0)
        ex, ey = world.plate.extent_mm
        grid_x = np.linspace(0.0, ex, 101)
        grid_y = np.linspace(0.0, ey, 101)
        xx, yy = np.meshgrid(grid_x, grid_y)
        rise = np.asarray(world.surface_rise_pcs(xx, yy))
        assert abs(np.max(np.abs(rise)) - 1.0) < 0.02

    def test_negative_amplitude_rejected(self, world):
        with pytest.raises(ValueError):
            inject_wooden_plate(world, -0.1)


class TestFloorInclination:
    def test_mark_shift_grows_with_inclination(self, world, noiseless_result):
        from dataclasses import replace

        mark_xy = (1500.0, 700.0)
        shifts = []
        for incl_deg in (0.0, 0.2, 0.5, 1.0):
            w = replace(
                world,
                floor_inclination_rad=math.radians(incl_deg),
                floor_azimuth_rad=0.3,
            )
            mark = np.array(
                [mark_xy[0], mark_xy[1], float(np.asarray(w.floor_surface_z(*mark_xy)))]
            )
            placement = experiment_placement(w, mark, 0.9, (3.0, 2.0))
            ip, smr = simulate_mark_observation(w, NO_NOISE, placement, mark)
            # flat-floor attitude assumption: yaw-only rotation, measured smr
            from floorref import frames
            from floorref.geometry import RigidTransform, rotation_about_z

            h_assumed = RigidTransform(
                rotation_about_z(placement.yaw_rad),
                smr.position,
                source=frames.ROB,
                dest=frames.ABS,
            )
            recovered = measure_mark(noiseless_result, ip, h_assumed)
            shifts.append(float(np.linalg.norm(recovered - mark)))
        assert shifts[0] < 1e-6
        assert all(b > a for a, b in zip(shifts, shifts[1:]))


def test_camera_ground_offset_is_principal_ray_hit(world):
    g0 = camera_ground_offset(world)
    t = world.h_rob_cam_true.translation
    axis = world.h_rob_cam_true.rotation @ np.array([0.0, 0.0, 1.0])
    s = (-world.robot.smr_height_mm - t[2]) / axis[2]
    assert np.allclose(g0, (t + s * axis)[:2])


def test_ground_truth_poses_consistency(world):
    from floorref.simulate import ground_truth_poses

    p0, p1 = default_placements(world)
    truth = ground_truth_poses(world, p0, p1)
    h_abs_cam = compose(truth["abs_H_rob_0"], truth["rob_H_cam"])
    assert h_abs_cam.dest == "abs"
    assert np.array_equal(
        truth["abs_H_rob_0"].translation, pose_on_surface(world, p0, "plate").translation
    )
    assert np.array_equal(invert(truth["abs_H_ref"]).matrix, invert(world.h_abs_ref).matrix)
