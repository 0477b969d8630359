//! Rotation and translation primitives.
//!
//! Rotations are stored as unit quaternions `[w, x, y, z]` with a
//! non-negative scalar part, so the two antipodal representatives of a
//! rotation collapse to one value. Matrices and angle triples are derived
//! views. All rotations about named axes are extrinsic (hand frame).

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `sin(theta)` the Z-X-Z split is treated as gimbal-locked.
const GIMBAL_EPS: f64 = 1e-12;

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w += TAU;
    }
    w
}

/// Wrap an angle into `[0, 2π)`.
fn wrap_positive(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        match i {
            0 => Axis::X,
            1 => Axis::Y,
            _ => Axis::Z,
        }
    }
}

/// A point or displacement in the hand frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn try_new(x: f64, y: f64, z: f64) -> Result<Self> {
        let v = Self { x, y, z };
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite vector {v}")));
        }
        Ok(v)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn get(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    pub fn with(mut self, axis: Axis, value: f64) -> Self {
        match axis {
            Axis::X => self.x = value,
            Axis::Y => self.y = value,
            Axis::Z => self.z = value,
        }
        self
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Serialize for Vec3 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vec3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(d)?;
        Vec3::try_new(x, y, z).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Euclidean distance between two positions.
pub fn dist_t(a: Vec3, b: Vec3) -> f64 {
    (a - b).norm()
}

/// Roll, pitch and yaw of a rotation under the extrinsic X-Y-Z convention,
/// `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rpy {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Rpy {
    pub fn to_array(self) -> [f64; 3] {
        [self.roll, self.pitch, self.yaw]
    }

    /// L2 norm of the component-wise wrapped difference.
    pub fn wrapped_distance(&self, other: &Rpy) -> f64 {
        let dr = wrap_angle(self.roll - other.roll);
        let dp = wrap_angle(self.pitch - other.pitch);
        let dy = wrap_angle(self.yaw - other.yaw);
        (dr * dr + dp * dp + dy * dy).sqrt()
    }
}

/// An element of SO(3).
#[derive(Clone, Copy, PartialEq)]
pub struct Rot3 {
    q: [f64; 4],
}

impl fmt::Debug for Rot3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [w, x, y, z] = self.q;
        write!(f, "Rot3({w:.12}, {x:.12}, {y:.12}, {z:.12})")
    }
}

impl Default for Rot3 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Rot3 {
    pub const IDENTITY: Rot3 = Rot3 { q: [1.0, 0.0, 0.0, 0.0] };

    /// Normalize and canonicalize a raw quaternion `[w, x, y, z]`.
    pub fn from_quaternion(q: [f64; 4]) -> Result<Self> {
        if q.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite quaternion {q:?}")));
        }
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n < 1e-12 {
            return Err(Error::InvalidArgument("zero quaternion".into()));
        }
        Ok(Self::canonical([q[0] / n, q[1] / n, q[2] / n, q[3] / n]))
    }

    fn canonical(mut q: [f64; 4]) -> Self {
        // Sign fixed by the first non-zero component, so w = 0 is also unambiguous.
        let lead = q.iter().copied().find(|c| *c != 0.0).unwrap_or(1.0);
        if lead < 0.0 {
            for c in &mut q {
                *c = -*c;
            }
        }
        Rot3 { q }
    }

    fn renormalized(q: [f64; 4]) -> Self {
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        Self::canonical([q[0] / n, q[1] / n, q[2] / n, q[3] / n])
    }

    /// Scalar-first components.
    pub fn quaternion(&self) -> [f64; 4] {
        self.q
    }

    pub fn inverse(&self) -> Rot3 {
        let [w, x, y, z] = self.q;
        Self::canonical([w, -x, -y, -z])
    }

    /// Rotation by `angle` about a hand-frame axis.
    pub fn about_axis(axis: Axis, angle: f64) -> Result<Rot3> {
        if !angle.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite angle {angle}")));
        }
        Ok(Self::about_axis_unchecked(axis, angle))
    }

    pub(crate) fn about_axis_unchecked(axis: Axis, angle: f64) -> Rot3 {
        let (s, c) = (0.5 * angle).sin_cos();
        let mut q = [c, 0.0, 0.0, 0.0];
        q[1 + axis.index()] = s;
        Self::canonical(q)
    }

    /// `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64) -> Rot3 {
        Self::about_axis_unchecked(Axis::Z, yaw)
            * Self::about_axis_unchecked(Axis::Y, pitch)
            * Self::about_axis_unchecked(Axis::X, roll)
    }

    /// Rotation vector (axis times angle) with the angle in `[0, π]`.
    pub fn from_rotation_vector(v: [f64; 3]) -> Rot3 {
        let angle = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if angle < 1e-300 {
            return Self::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let k = s / angle;
        Self::renormalized([c, v[0] * k, v[1] * k, v[2] * k])
    }

    /// Uniformly distributed random rotation.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Rot3 {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random::<f64>() * TAU;
        let u3: f64 = rng.random::<f64>() * TAU;
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        Self::renormalized([b * u3.cos(), a * u2.sin(), a * u2.cos(), b * u3.sin()])
    }

    /// Row-major rotation matrix.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let [w, x, y, z] = self.q;
        let (xx, yy, zz) = (x * x, y * y, z * z);
        let (xy, xz, yz) = (x * y, x * z, y * z);
        let (wx, wy, wz) = (w * x, w * y, w * z);
        [
            [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
        ]
    }

    pub fn rpy(&self) -> Rpy {
        let m = self.matrix();
        let cp = (m[0][0] * m[0][0] + m[1][0] * m[1][0]).sqrt();
        let pitch = (-m[2][0]).atan2(cp);
        if cp > 1e-12 {
            Rpy { roll: m[2][1].atan2(m[2][2]), pitch, yaw: m[1][0].atan2(m[0][0]) }
        } else {
            // Gimbal lock: only yaw - roll (or yaw + roll) is observable.
            Rpy { roll: 0.0, pitch, yaw: (-m[0][1]).atan2(m[1][1]) }
        }
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let v = (self.q[1] * self.q[1] + self.q[2] * self.q[2] + self.q[3] * self.q[3]).sqrt();
        2.0 * v.atan2(self.q[0].abs())
    }

    /// Geodesic angle between two rotations.
    pub fn angle_to(&self, other: &Rot3) -> f64 {
        (self.inverse() * *other).angle()
    }

    /// Component-wise mean of sign-aligned quaternions, renormalized.
    /// Adequate for tightly clustered samples only.
    pub fn chordal_mean(samples: &[Rot3]) -> Option<Rot3> {
        let first = samples.first()?;
        let mut acc = [0.0; 4];
        for s in samples {
            let dot: f64 = (0..4).map(|i| s.q[i] * first.q[i]).sum();
            let sign = if dot < 0.0 { -1.0 } else { 1.0 };
            for (a, c) in acc.iter_mut().zip(s.q) {
                *a += sign * c;
            }
        }
        Rot3::from_quaternion(acc).ok()
    }
}

impl Mul for Rot3 {
    type Output = Rot3;

    /// Group product `self · rhs` (apply `rhs` first).
    fn mul(self, rhs: Rot3) -> Rot3 {
        let [aw, ax, ay, az] = self.q;
        let [bw, bx, by, bz] = rhs.q;
        Rot3::renormalized([
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ])
    }
}

impl Neg for Rot3 {
    type Output = Rot3;
    fn neg(self) -> Rot3 {
        self.inverse()
    }
}

impl Serialize for Rot3 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.q.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rot3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let q = <[f64; 4]>::deserialize(d)?;
        Rot3::from_quaternion(q).map_err(serde::de::Error::custom)
    }
}

/// Extrinsic rotation about a hand-frame axis.
pub fn rot_about_axis(axis: Axis, angle: f64) -> Result<Rot3> {
    Rot3::about_axis(axis, angle)
}

pub fn compose(a: Rot3, b: Rot3) -> Rot3 {
    a * b
}

/// Rotational distance: L2 norm of the wrapped roll/pitch/yaw difference.
pub fn dist_r(a: &Rot3, b: &Rot3) -> f64 {
    a.rpy().wrapped_distance(&b.rpy())
}

/// Object configuration: position and orientation in the hand frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    #[serde(rename = "T")]
    pub t: Vec3,
    #[serde(rename = "R")]
    pub r: Rot3,
}

impl Pose {
    pub fn new(t: Vec3, r: Rot3) -> Self {
        Self { t, r }
    }
}

/// Proper Euler angles with `R = Rz(phi) · Rx(theta) · Rz(psi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerZxz {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl EulerZxz {
    pub fn to_rot(&self) -> Rot3 {
        Rot3::about_axis_unchecked(Axis::Z, self.phi)
            * Rot3::about_axis_unchecked(Axis::X, self.theta)
            * Rot3::about_axis_unchecked(Axis::Z, self.psi)
    }
}

/// Z-X-Z decomposition. Total on SO(3); at `theta ∈ {0, π}` the free angle
/// is folded into `phi` and `psi = 0`.
pub fn euler_zxz_decompose(r: &Rot3) -> EulerZxz {
    let m = r.matrix();
    let s_theta = (m[2][0] * m[2][0] + m[2][1] * m[2][1]).sqrt();
    let theta = s_theta.atan2(m[2][2]);

    // phi + psi and phi - psi are each well conditioned near one of the poles.
    let sum = (m[1][0] - m[0][1]).atan2(m[0][0] + m[1][1]);
    let diff = (m[1][0] + m[0][1]).atan2(m[0][0] - m[1][1]);

    if s_theta < GIMBAL_EPS {
        let phi = if m[2][2] > 0.0 { sum } else { diff };
        return EulerZxz { phi: wrap_positive(phi), theta, psi: 0.0 };
    }

    let mut phi = 0.5 * (sum + diff);
    let mut psi = 0.5 * (sum - diff);
    // (sum, diff) only fix (phi, psi) up to a joint shift by π; the column
    // (sin φ sin θ, -cos φ sin θ) of the third column resolves it.
    if phi.sin() * m[0][2] - phi.cos() * m[1][2] < 0.0 {
        phi += PI;
        psi += PI;
    }
    EulerZxz { phi: wrap_positive(phi), theta, psi: wrap_positive(psi) }
}

/// Ordered step offsets `[0, σ, -σ, 2σ, -2σ, …, π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSchedule {
    steps: Vec<f64>,
    sigma: f64,
}

impl StepSchedule {
    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().copied()
    }
}

/// Builds the candidate schedule for `sigma ∈ (0, π]`.
pub fn candidate_steps(sigma: f64) -> Result<StepSchedule> {
    if !(sigma.is_finite() && sigma > 0.0 && sigma <= PI) {
        return Err(Error::InvalidArgument(format!("step size {sigma} outside (0, π]")));
    }
    // Multiples within this slack of π are treated as π itself.
    let slack = 1e-9 * PI;
    let mut steps = vec![0.0];
    let mut k = 1u32;
    loop {
        let m = f64::from(k) * sigma;
        if m >= PI - slack {
            break;
        }
        steps.push(m);
        steps.push(-m);
        k += 1;
    }
    steps.push(PI);
    Ok(StepSchedule { steps, sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rz(a: f64) -> Rot3 {
        rot_about_axis(Axis::Z, a).unwrap()
    }
    fn rx(a: f64) -> Rot3 {
        rot_about_axis(Axis::X, a).unwrap()
    }

    #[test]
    fn axis_rotation_basics() {
        assert_eq!(rz(0.0), Rot3::IDENTITY);
        assert!(dist_r(&(rx(PI) * rx(PI)), &Rot3::IDENTITY) < 1e-12);
        assert!(dist_r(&(rz(0.3) * rz(0.4)), &rz(0.7)) < 1e-12);
        assert!(rot_about_axis(Axis::X, f64::NAN).is_err());
        assert!(rot_about_axis(Axis::Y, f64::INFINITY).is_err());
    }

    #[test]
    fn compose_identity_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = Rot3::random(&mut rng);
        assert_eq!(compose(Rot3::IDENTITY, r), r);
        let i = compose(r, r.inverse());
        assert!(dist_r(&i, &Rot3::IDENTITY) < 1e-12);
    }

    #[test]
    fn canonical_sign() {
        let r = Rot3::from_quaternion([-0.5, 0.5, 0.5, 0.5]).unwrap();
        assert_eq!(r.quaternion(), [0.5, -0.5, -0.5, -0.5]);
        let half_turn = Rot3::from_quaternion([0.0, -1.0, 0.0, 0.0]).unwrap();
        assert_eq!(half_turn.quaternion(), [0.0, 1.0, 0.0, 0.0]);
        assert!(Rot3::from_quaternion([0.0; 4]).is_err());
    }

    #[test]
    fn dist_examples() {
        assert_eq!(dist_r(&rz(0.4), &rz(0.4)), 0.0);
        assert_abs_diff_eq!(dist_r(&Rot3::IDENTITY, &rz(0.2)), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(dist_t(Vec3::ZERO, Vec3::ZERO), 0.0);
        assert_abs_diff_eq!(dist_t(Vec3::ZERO, Vec3::new(0.0, -0.018, 0.0)), 0.018, epsilon = 1e-15);
        assert_abs_diff_eq!(dist_t(Vec3::new(1.0, 2.0, 2.0), Vec3::ZERO), 3.0);
    }

    #[test]
    fn dist_wraps_across_pi() {
        let a = rz(PI - 0.05);
        let b = rz(-PI + 0.05);
        assert_abs_diff_eq!(dist_r(&a, &b), 0.1, epsilon = 1e-9);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_eq!(wrap_positive(-1e-18), 0.0);
    }

    #[test]
    fn zxz_examples() {
        let e = euler_zxz_decompose(&Rot3::IDENTITY);
        assert_eq!((e.phi, e.theta, e.psi), (0.0, 0.0, 0.0));
        let e = euler_zxz_decompose(&rx(PI / 2.0));
        assert_abs_diff_eq!(e.phi, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.theta, PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.psi, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zxz_gimbal_folds_into_phi() {
        let e = euler_zxz_decompose(&rz(1.1));
        assert_eq!(e.psi, 0.0);
        assert_eq!(e.theta, 0.0);
        assert_abs_diff_eq!(e.phi, 1.1, epsilon = 1e-12);

        let r = rz(0.4) * rx(PI) * rz(0.3);
        let e = euler_zxz_decompose(&r);
        assert_eq!(e.psi, 0.0);
        assert_abs_diff_eq!(e.theta, PI, epsilon = 1e-12);
        assert!(dist_r(&e.to_rot(), &r) < 1e-9);
    }

    #[test]
    fn zxz_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let r = Rot3::random(&mut rng);
            let e = euler_zxz_decompose(&r);
            assert!((0.0..TAU).contains(&e.phi));
            assert!((0.0..=PI).contains(&e.theta));
            assert!((0.0..TAU).contains(&e.psi));
            assert!(dist_r(&e.to_rot(), &r) < 1e-9, "{r:?} -> {e:?}");
        }
    }

    #[test]
    fn schedule_examples() {
        let s = candidate_steps(PI / 2.0).unwrap();
        assert_eq!(s.steps(), &[0.0, PI / 2.0, -PI / 2.0, PI]);
        assert_eq!(candidate_steps(PI).unwrap().steps(), &[0.0, PI]);
        assert!(candidate_steps(0.0).is_err());
        assert!(candidate_steps(PI + 1e-6).is_err());
        assert!(candidate_steps(f64::NAN).is_err());
    }

    #[test]
    fn schedule_with_remainder_ends_at_pi() {
        let s = candidate_steps(0.4 * PI).unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(*s.steps().last().unwrap(), PI);
    }
}
