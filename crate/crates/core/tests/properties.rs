use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use proptest::prelude::*;

use so3gait::controller::adapt_step;
use so3gait::planner::{translation_plan, Mode};
use so3gait::so3::{candidate_steps, dist_r, dist_t, euler_zxz_decompose, wrap_angle};
use so3gait::{Rot3, Vec3, DEG};

fn quat() -> impl Strategy<Value = Rot3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("nonzero", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
        .prop_map(|(w, x, y, z)| Rot3::from_quaternion([w, x, y, z]).unwrap())
}

fn to_nalgebra(r: &Rot3) -> UnitQuaternion<f64> {
    let [w, x, y, z] = r.quaternion();
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z))
}

proptest! {
    #[test]
    fn distance_is_symmetric_and_zero_on_self(a in quat(), b in quat()) {
        prop_assert!((dist_r(&a, &b) - dist_r(&b, &a)).abs() < 1e-12);
        prop_assert!(dist_r(&a, &a) < 1e-12);
        prop_assert!(dist_r(&a, &b) >= 0.0);
    }

    #[test]
    fn zxz_round_trip(r in quat()) {
        let e = euler_zxz_decompose(&r);
        prop_assert!((0.0..=PI + 1e-12).contains(&e.theta));
        prop_assert!(dist_r(&r, &e.to_rot()) < 1e-9);
    }

    #[test]
    fn canonical_sign(r in quat()) {
        let q = r.quaternion();
        let neg = Rot3::from_quaternion(q.map(|v| -v)).unwrap();
        for (a, b) in neg.quaternion().iter().zip(q) {
            prop_assert!((a - b).abs() < 1e-15);
        }
        let norm: f64 = q.iter().map(|v| v * v).sum();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        let first = q.iter().copied().find(|v| *v != 0.0).unwrap();
        prop_assert!(first > 0.0);
    }

    #[test]
    fn schedule_covers_circle(sigma_deg in 0.2..90.0f64, angle in -PI..PI) {
        let sigma = sigma_deg * DEG;
        let s = candidate_steps(sigma).unwrap();
        prop_assert_eq!(s.steps()[0], 0.0);
        prop_assert_eq!(*s.steps().last().unwrap(), PI);
        let nearest = s.iter().map(|m| wrap_angle(angle - m).abs()).fold(f64::INFINITY, f64::min);
        prop_assert!(nearest <= sigma / 2.0 + 1e-9);
        for w in s.steps()[1..s.len() - 1].chunks(2) {
            prop_assert_eq!(w[0], -w[1]);
        }
    }

    #[test]
    fn adapted_step_stays_in_bounds(sigma_deg in 0.5..5.0f64, delta in 0.0..1.0f64, lambda in 0.0..1.0f64) {
        let b = (0.5 * DEG, 5.0 * DEG);
        let s = adapt_step(sigma_deg * DEG, delta, lambda, b);
        prop_assert!(s >= b.0 && s <= b.1);
    }

    #[test]
    fn translation_step_does_not_increase_error(
        x in -0.02..0.02f64, y in -0.02..0.02f64, z in -0.02..0.02f64,
    ) {
        let start = Vec3::new(x, y, z);
        let plan = translation_plan(start, Vec3::ZERO, 0.003).unwrap();
        prop_assert!(plan.actions.len() <= 1);
        if let Some(a) = plan.first() {
            prop_assert!(matches!(a.mode, Mode::TransY | Mode::TransZ));
            let moved = match a.mode {
                Mode::TransY => Vec3::new(x, y + a.magnitude, z),
                _ => Vec3::new(x, y, z + a.magnitude),
            };
            prop_assert!(dist_t(moved, Vec3::ZERO) <= dist_t(start, Vec3::ZERO) + 1e-15);
        } else {
            prop_assert!(y.abs() < 0.0015 && z.abs() < 0.0015);
        }
    }

    #[test]
    fn matrix_and_rpy_match_nalgebra(r in quat()) {
        let q = to_nalgebra(&r);
        let m = q.to_rotation_matrix();
        let ours = r.matrix();
        for (i, row) in ours.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                prop_assert!((v - m[(i, j)]).abs() < 1e-12);
            }
        }
        let (roll, pitch, yaw) = q.euler_angles();
        let rpy = r.rpy();
        let back = Rot3::from_rpy(rpy.roll, rpy.pitch, rpy.yaw);
        prop_assert!(r.angle_to(&back) < 1e-9);
        // Away from gimbal lock the angles themselves agree.
        if pitch.abs() < 1.5 {
            prop_assert!(wrap_angle(rpy.roll - roll).abs() < 1e-9);
            prop_assert!((rpy.pitch - pitch).abs() < 1e-9);
            prop_assert!(wrap_angle(rpy.yaw - yaw).abs() < 1e-9);
        }
    }

    #[test]
    fn distance_matches_nalgebra_euler(a in quat(), b in quat()) {
        let (ra, pa, ya) = to_nalgebra(&a).euler_angles();
        let (rb, pb, yb) = to_nalgebra(&b).euler_angles();
        prop_assume!(pa.abs() < 1.5 && pb.abs() < 1.5);
        let d = [wrap_angle(ra - rb), pa - pb, wrap_angle(ya - yb)];
        let expect = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((dist_r(&a, &b) - expect).abs() < 1e-9);
    }

    #[test]
    fn composition_matches_nalgebra(a in quat(), b in quat()) {
        let ours = (a * b).quaternion();
        let theirs = to_nalgebra(&a) * to_nalgebra(&b);
        prop_assert!(to_nalgebra(&Rot3::from_quaternion(ours).unwrap()).angle_to(&theirs) < 1e-9);
    }
}

#[test]
fn axis_rotations_match_nalgebra() {
    for angle in [-2.0, -0.3, 0.0, 0.7, 3.0] {
        let x = Rot3::about_axis(so3gait::Axis::X, angle).unwrap();
        let z = Rot3::about_axis(so3gait::Axis::Z, angle).unwrap();
        let nx = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), angle);
        let nz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle);
        assert!(to_nalgebra(&x).angle_to(&nx) < 1e-12);
        assert!(to_nalgebra(&z).angle_to(&nz) < 1e-12);
    }
}

#[test]
fn rpy_convention_is_extrinsic_xyz() {
    let (roll, pitch, yaw) = (0.3, -0.4, 1.1);
    let m = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), pitch)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), roll);
    let r = Rot3::from_rpy(roll, pitch, yaw);
    let ours = r.matrix();
    for i in 0..3 {
        for j in 0..3 {
            assert_abs_diff_eq!(ours[i][j], m[(i, j)], epsilon = 1e-12);
        }
    }
    let rpy = r.rpy();
    assert_abs_diff_eq!(rpy.roll, roll, epsilon = 1e-12);
    assert_abs_diff_eq!(rpy.pitch, pitch, epsilon = 1e-12);
    assert_abs_diff_eq!(rpy.yaw, yaw, epsilon = 1e-12);
}

#[test]
fn distance_worked_example() {
    // Yaw 170 deg vs -170 deg is 20 deg apart, not 340.
    let a = Rot3::from_rpy(0.0, 0.0, 170.0 * DEG);
    let b = Rot3::from_rpy(0.0, 0.0, -170.0 * DEG);
    assert_abs_diff_eq!(dist_r(&a, &b), 20.0 * DEG, epsilon = 1e-9);
    let c = Rot3::from_rpy(3.0 * DEG, 4.0 * DEG, 0.0);
    assert_abs_diff_eq!(dist_r(&Rot3::default(), &c), 5.0 * DEG, epsilon = 1e-9);
}
