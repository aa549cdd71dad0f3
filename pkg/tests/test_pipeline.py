import math

import numpy as np
import pytest

from floorref import frames
from floorref.errors import (
    DegenerateConfiguration,
    DegenerateMotion,
    InconsistentRuns,
    MissingMeasurement,
)
from floorref.geometry import (
    RigidTransform,
    apply,
    compose,
    invert,
    register_points,
    rotation_about_axis,
    rotation_about_z,
    rotation_distance,
)
from floorref.pipeline import (
    ReferencingSession,
    TrackerMeasurement,
    compute_rob_h_cam,
    estimate_plate_pose,
    estimate_robot_pose,
    plate_normal,
    reversal_average,
)
from floorref.simulate import (
    GLASS_NOISE,
    NO_NOISE,
    default_placements,
    demo_world,
    random_world,
    simulate_referencing_session,
)


class TestPlateNormal:
    def test_hand_case_with_floor_rule(self):
        # raw cross product (P_b - P_r) x (P_g - P_r) = (0, 0, -1), flipped up
        n = plate_normal([0, 0, 0], [1, 0, 0], [0, 1, 0])
        assert np.allclose(n, [0.0, 0.0, 1.0], atol=1e-15)

    def test_translation_invariance(self):
        p = [np.array([0.0, 0.0, 0.0]), np.array([30.0, 1.0, 0.5]), np.array([4.0, 25.0, -0.2])]
        base = plate_normal(*p)
        shift = np.array([123.4, -56.7, 89.0])
        moved = plate_normal(*(q + shift for q in p))
        assert np.max(np.abs(base - moved)) < 1e-12

    def test_unit_norm(self):
        n = plate_normal([0, 0, 0], [400, 3, 1], [7, 350, 2])
        assert abs(np.linalg.norm(n) - 1.0) < 1e-12

    def test_collinear_rejected(self):
        with pytest.raises(DegenerateConfiguration):
            plate_normal([0, 0, 0], [10, 0, 0], [20, 0, 0])

    def test_camera_axis_rule(self):
        # a camera looking down (-z axis direction) must see the normal oppose it
        n = plate_normal([0, 0, 0], [1, 0, 0], [0, 1, 0], camera_axis=[0.0, 0.0, -1.0])
        assert np.allclose(n, [0.0, 0.0, 1.0])
        n = plate_normal([0, 0, 0], [1, 0, 0], [0, 1, 0], camera_axis=[0.0, 0.0, 1.0])
        assert np.allclose(n, [0.0, 0.0, -1.0])


def session_with_tracker(tracker):
    world = demo_world(seed=1)
    base = simulate_referencing_session(world, NO_NOISE, *default_placements(world))
    return ReferencingSession(
        camera=base.camera,
        plate=base.plate,
        image_observation=base.image_observation,
        tracker=tuple(tracker),
    )


class TestRobotPose:
    def _session(self, p0, p1):
        return session_with_tracker(
            [
                TrackerMeasurement("robot_smr", np.asarray(p0, dtype=float), 0),
                TrackerMeasurement("robot_smr", np.asarray(p1, dtype=float), 1),
            ]
        )

    def test_straight_move_gives_identity_rotation(self):
        s = self._session([0, 0, 0.5], [100, 0, 0.5])
        h = estimate_robot_pose(s, [0.0, 0.0, 1.0])
        assert np.allclose(h.rotation, np.eye(3), atol=1e-15)
        assert np.allclose(h.translation, [0.0, 0.0, 0.5])

    def test_sideways_move_gives_quarter_turn(self):
        s = self._session([0, 0, 0.5], [0, 100, 0.5])
        h = estimate_robot_pose(s, [0.0, 0.0, 1.0])
        expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        assert np.allclose(h.rotation, expected, atol=1e-15)

    def test_normal_is_third_column_exactly(self):
        n = np.array([0.1, -0.2, 1.0])
        n = n / np.linalg.norm(n)
        s = self._session([10, 20, 30], [150, -40, 25])
        h = estimate_robot_pose(s, n)
        assert np.array_equal(h.rotation[:, 2], n)
        assert abs(float(h.rotation[:, 0] @ n)) < 1e-12
        assert abs(np.linalg.det(h.rotation) - 1.0) < 1e-12

    def test_short_move_rejected(self):
        s = self._session([0, 0, 0], [30, 0, 0])
        with pytest.raises(DegenerateMotion):
            estimate_robot_pose(s, [0.0, 0.0, 1.0])

    def test_move_along_normal_rejected(self):
        s = self._session([0, 0, 0], [0, 0, 100])
        with pytest.raises(DegenerateMotion):
            estimate_robot_pose(s, [0.0, 0.0, 1.0])

    def test_missing_position_one(self):
        s = session_with_tracker([TrackerMeasurement("robot_smr", np.zeros(3), 0)])
        with pytest.raises(MissingMeasurement):
            estimate_robot_pose(s, [0.0, 0.0, 1.0])


class TestPlatePoseEstimate:
    def test_noiseless_matches_true_camera_pose(self, world, noiseless_session):
        est = estimate_plate_pose(noiseless_session)
        h_abs_cam = compose(est.h_abs_scn, est.scene.h_scn_cam)
        from floorref.simulate import pose_on_surface

        p0, _ = default_placements(world)
        truth = compose(pose_on_surface(world, p0, "plate"), world.h_rob_cam_true)
        assert rotation_distance(h_abs_cam.rotation, truth.rotation) < 1e-8
        assert np.max(np.abs(h_abs_cam.translation - truth.translation)) < 1e-6
        assert est.registration_rms_mm < 1e-9
        assert not est.suspect

    def test_registration_rms_under_tracker_noise(self):
        # three seated-smr points with 35 um tracker noise on the targets
        rng = np.random.default_rng(21)
        src = np.array([[40.0, 40.0, -19.0], [560.0, 60.0, -19.0], [300.0, 360.0, -19.0]])
        worst = 0.0
        for _ in range(1000):
            rot = rotation_about_axis(rng.normal(size=3), rng.uniform(-math.pi, math.pi))
            t = rng.uniform(-500, 500, size=3)
            dst = src @ rot.T + t + rng.normal(0.0, 0.035, size=src.shape)
            worst = max(worst, register_points(src, dst).rms_mm)
        assert worst <= 0.15

    def test_unknown_observed_mark_rejected(self, noiseless_session):
        mark_id, ip = noiseless_session.image_observation[0]
        swapped = (("ghost", ip),) + noiseless_session.image_observation[1:]
        bad = ReferencingSession(
            camera=noiseless_session.camera,
            plate=noiseless_session.plate,
            image_observation=swapped,
            tracker=noiseless_session.tracker,
        )
        with pytest.raises(MissingMeasurement, match="ghost"):
            estimate_plate_pose(bad)

    def test_coincident_nest_measurements_rejected(self, noiseless_session):
        tracker = []
        for m in noiseless_session.tracker:
            if m.point_id == "g":
                m = TrackerMeasurement("g", noiseless_session.nest_position("r"), None)
            tracker.append(m)
        bad = ReferencingSession(
            camera=noiseless_session.camera,
            plate=noiseless_session.plate,
            image_observation=noiseless_session.image_observation,
            tracker=tuple(tracker),
        )
        with pytest.raises(DegenerateConfiguration):
            compute_rob_h_cam(bad)

    def test_suspect_flag_on_inconsistent_plate(self, noiseless_session):
        # an in-plane shift of one nest distorts the measured triangle shape,
        # which rigid registration cannot absorb
        tracker = []
        for m in noiseless_session.tracker:
            if m.point_id == "b":
                m = TrackerMeasurement("b", m.position + [3.0, 0.0, 0.0], None)
            tracker.append(m)
        tampered = ReferencingSession(
            camera=noiseless_session.camera,
            plate=noiseless_session.plate,
            image_observation=noiseless_session.image_observation,
            tracker=tuple(tracker),
        )
        est = estimate_plate_pose(tampered)
        assert est.registration_rms_mm > 0.5
        assert est.suspect


class TestFullChain:
    def test_noiseless_round_trip(self):
        for seed in (1, 2, 3):
            world = random_world(seed)
            session = simulate_referencing_session(world, NO_NOISE, *default_placements(world))
            result = compute_rob_h_cam(session)
            g = world.h_rob_cam_true
            assert rotation_distance(result.h_rob_cam.rotation, g.rotation) < 1e-8
            assert np.max(np.abs(result.h_rob_cam.translation - g.translation)) < 1e-6

    def test_full_noise_monte_carlo_error(self):
        # tracker 35 um + image 0.05 px over 500 seeded trials of one rig
        world = random_world(1234)
        placements = default_placements(world)
        worst_t = worst_r = 0.0
        for trial in range(500):
            session = simulate_referencing_session(world, GLASS_NOISE, *placements, trial=trial)
            result = compute_rob_h_cam(session)
            g = world.h_rob_cam_true
            worst_t = max(worst_t, float(np.linalg.norm(result.h_rob_cam.translation - g.translation)))
            worst_r = max(worst_r, rotation_distance(result.h_rob_cam.rotation, g.rotation))
        assert worst_t < 0.3
        assert math.degrees(worst_r) < 0.05

    def test_composite_matches_factors_exactly(self, noiseless_result):
        r = noiseless_result
        rebuilt = compose(compose(invert(r.h_abs_rob), r.h_abs_scn), r.scene.h_scn_cam)
        assert np.array_equal(rebuilt.matrix, r.h_rob_cam.matrix)
        p = np.array([10.0, 20.0, 0.0])
        via_chain = apply(rebuilt, p)
        via_stored = apply(r.h_rob_cam, p)
        assert np.max(np.abs(via_chain - via_stored)) < 1e-12

    def test_missing_robot_position_names_stage(self, noiseless_session):
        tracker = tuple(
            m
            for m in noiseless_session.tracker
            if not (m.point_id == "robot_smr" and m.position_index == 1)
        )
        bad = ReferencingSession(
            camera=noiseless_session.camera,
            plate=noiseless_session.plate,
            image_observation=noiseless_session.image_observation,
            tracker=tracker,
        )
        with pytest.raises(MissingMeasurement, match="estimate_robot_pose"):
            compute_rob_h_cam(bad)

    def test_gauge_invariance(self, world):
        session = simulate_referencing_session(world, GLASS_NOISE, *default_placements(world))
        base = compute_rob_h_cam(session).h_rob_cam
        rng = np.random.default_rng(55)
        for _ in range(5):
            g = RigidTransform(
                rotation_about_axis(rng.normal(size=3), rng.uniform(-math.pi, math.pi)),
                rng.uniform(-2000, 2000, size=3),
                source=frames.ABS,
                dest=frames.ABS,
            )
            moved = ReferencingSession(
                camera=session.camera,
                plate=session.plate,
                image_observation=session.image_observation,
                tracker=tuple(
                    TrackerMeasurement(m.point_id, apply(g, m.position), m.position_index)
                    for m in session.tracker
                ),
            )
            out = compute_rob_h_cam(moved).h_rob_cam
            assert rotation_distance(out.rotation, base.rotation) < 1e-9
            assert np.max(np.abs(out.translation - base.translation)) < 1e-9

    def test_normal_opposes_camera_axis(self, noiseless_result):
        r = noiseless_result
        axis_abs = (
            r.h_abs_scn.rotation @ r.scene.h_scn_cam.rotation @ np.array([0.0, 0.0, 1.0])
        )
        n = r.h_abs_rob.rotation[:, 2]
        assert float(n @ axis_abs) < 0.0


class TestReversal:
    def test_average_of_identical_runs_is_identity_operation(self, noiseless_result):
        merged = reversal_average(noiseless_result, noiseless_result)
        assert np.allclose(merged.h_rob_cam.matrix, noiseless_result.h_rob_cam.matrix, atol=1e-12)
        assert merged.reversal_of is not None

    def test_translation_mean(self, noiseless_result):
        eps = np.array([0.4, -0.2, 0.1])
        shifted = noiseless_result.with_hand_eye(
            RigidTransform(
                noiseless_result.h_rob_cam.rotation,
                noiseless_result.h_rob_cam.translation + eps,
                source=frames.CAM,
                dest=frames.ROB,
            )
        )
        merged = reversal_average(noiseless_result, shifted)
        expected = noiseless_result.h_rob_cam.translation + eps / 2.0
        assert np.max(np.abs(merged.h_rob_cam.translation - expected)) < 1e-12

    def test_rotation_chordal_mean_of_symmetric_pair(self, noiseless_result):
        base = noiseless_result.h_rob_cam
        eps = math.radians(0.1)

        def spun(sign):
            return noiseless_result.with_hand_eye(
                RigidTransform(
                    rotation_about_z(sign * eps) @ base.rotation,
                    base.translation,
                    source=frames.CAM,
                    dest=frames.ROB,
                )
            )

        merged = reversal_average(spun(+1), spun(-1))
        assert np.linalg.norm(merged.h_rob_cam.rotation - base.rotation) < 1e-10

    def test_inconsistent_runs_rejected(self, noiseless_result):
        off = noiseless_result.with_hand_eye(
            RigidTransform(
                noiseless_result.h_rob_cam.rotation,
                noiseless_result.h_rob_cam.translation + [3.0, 0.0, 0.0],
                source=frames.CAM,
                dest=frames.ROB,
            )
        )
        with pytest.raises(InconsistentRuns):
            reversal_average(noiseless_result, off)

    def test_averaged_result_keeps_chain_consistent(self, noiseless_result):
        eps = np.array([0.3, 0.3, -0.3])
        shifted = noiseless_result.with_hand_eye(
            RigidTransform(
                noiseless_result.h_rob_cam.rotation,
                noiseless_result.h_rob_cam.translation + eps,
                source=frames.CAM,
                dest=frames.ROB,
            )
        )
        merged = reversal_average(noiseless_result, shifted)
        rebuilt = compose(merged.h_rob_cam, invert(merged.scene.h_scn_cam))
        assert np.array_equal(rebuilt.matrix, merged.h_rob_scn.matrix)
