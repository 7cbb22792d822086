//! Rigid-motion kernels on SE(3) and its Lie algebra.
//!
//! Every 6-vector is stored angular part first: a strain twist is `(K, Q)`,
//! a velocity twist `(Ω, V)` and a wrench `(moment, force)`.

use nalgebra::{Matrix3, Matrix4, Matrix6, UnitQuaternion, Vector3, Vector6};
use std::ops::Mul;

/// Body-frame twist (strain or velocity), angular components first.
pub type Twist = Vector6<f64>;
/// Body-frame wrench, moment components first.
pub type Wrench = Vector6<f64>;

/// Below this rotation angle the exponential coefficients switch to their
/// Taylor series; the closed forms lose digits to cancellation there.
const SERIES_ANGLE: f64 = 0.3;

/// Builds a twist from its angular and linear parts.
pub fn twist(angular: Vector3<f64>, linear: Vector3<f64>) -> Twist {
    Twist::new(angular.x, angular.y, angular.z, linear.x, linear.y, linear.z)
}

pub fn angular(v: &Twist) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

pub fn linear(v: &Twist) -> Vector3<f64> {
    Vector3::new(v[3], v[4], v[5])
}

/// Rest strain of a straight, unstretched rod: no curvature, unit axial stretch.
pub fn straight_strain() -> Twist {
    Twist::new(0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Maps a twist to its 4x4 matrix representation in se(3).
pub fn hat(v: &Twist) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&angular(v)));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&linear(v));
    m
}

/// Inverse of [`hat`]; reads the skew part from its lower triangle.
pub fn vee(m: &Matrix4<f64>) -> Twist {
    Twist::new(m[(2, 1)], m[(0, 2)], m[(1, 0)], m[(0, 3)], m[(1, 3)], m[(2, 3)])
}

/// Lie-algebra adjoint `[[K̃, 0], [Q̃, K̃]]`.
pub fn ad(v: &Twist) -> Matrix6<f64> {
    let k = skew(&angular(v));
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&k);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&k);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&skew(&linear(v)));
    m
}

/// `ad(a) * b` without forming the matrix.
pub fn ad_mul(a: &Twist, b: &Twist) -> Twist {
    let (ka, qa) = (angular(a), linear(a));
    let (kb, qb) = (angular(b), linear(b));
    twist(ka.cross(&kb), qa.cross(&kb) + ka.cross(&qb))
}

/// `ad(a)ᵀ * w`, the coadjoint action used for wrenches.
pub fn coad_mul(a: &Twist, w: &Wrench) -> Wrench {
    let (ka, qa) = (angular(a), linear(a));
    let (m, f) = (angular(w), linear(w));
    // ad(a)ᵀ = [[-K̃, -Q̃], [0, -K̃]]
    twist(-ka.cross(&m) - qa.cross(&f), -ka.cross(&f))
}

/// Rigid transform `(R, u)` mapping body coordinates to the reference frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(u: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), u)
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Self {
        Self::new(m.fixed_view::<3, 3>(0, 0).into(), m.fixed_view::<3, 1>(0, 3).into())
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    /// Adjoint `[[R, 0], [ũR, R]]`, transporting body twists to the parent frame.
    pub fn adjoint(&self) -> Matrix6<f64> {
        let r = &self.rotation;
        let mut m = Matrix6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
        m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(skew(&self.translation) * r));
        m
    }

    /// Inverse adjoint `[[Rᵀ, 0], [−Rᵀũ, Rᵀ]]`, equal to the adjoint of the inverse pose.
    pub fn adjoint_inv(&self) -> Matrix6<f64> {
        let rt = self.rotation.transpose();
        let mut m = Matrix6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&rt);
        m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-(rt * skew(&self.translation))));
        m
    }

    /// `adjoint_inv() * v` without forming the matrix.
    pub fn adjoint_inv_mul(&self, v: &Twist) -> Twist {
        let rt = self.rotation.transpose();
        let w = angular(v);
        twist(rt * w, rt * (linear(v) - self.translation.cross(&w)))
    }

    /// Orientation as a unit quaternion.
    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_matrix(&self.rotation)
    }

    /// Largest deviation of the rotation block from orthonormality, including
    /// the determinant.
    pub fn orthonormality_error(&self) -> f64 {
        let e = (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs().max();
        e.max((self.rotation.determinant() - 1.0).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.iter().chain(self.translation.iter()).all(|x| x.is_finite())
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        Pose::new(self.rotation * rhs.rotation, self.rotation * rhs.translation + self.translation)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        Pose::new(self.rotation * rhs.rotation, self.rotation * rhs.translation + self.translation)
    }
}

/// Coefficients of the screw exponential and its integral.
struct Coefficients {
    /// sin θ / θ
    a: f64,
    /// (1 − cos θ) / θ²
    b: f64,
    /// (θ − sin θ) / θ³
    c: f64,
    /// (θ² + 2 cos θ − 2) / (2θ⁴)
    d: f64,
    /// (2θ − 3 sin θ + θ cos θ) / (2θ⁵)
    e: f64,
}

impl Coefficients {
    fn new(theta: f64) -> Self {
        if theta < SERIES_ANGLE {
            let t2 = theta * theta;
            let series = |c: [f64; 5]| c[0] + t2 * (c[1] + t2 * (c[2] + t2 * (c[3] + t2 * c[4])));
            Self {
                a: series([1.0, -1.0 / 6.0, 1.0 / 120.0, -1.0 / 5040.0, 1.0 / 362880.0]),
                b: series([0.5, -1.0 / 24.0, 1.0 / 720.0, -1.0 / 40320.0, 1.0 / 3628800.0]),
                c: series([1.0 / 6.0, -1.0 / 120.0, 1.0 / 5040.0, -1.0 / 362880.0, 1.0 / 39916800.0]),
                d: series([1.0 / 24.0, -1.0 / 720.0, 1.0 / 40320.0, -1.0 / 3628800.0, 1.0 / 479001600.0]),
                e: series([1.0 / 120.0, -1.0 / 2520.0, 1.0 / 120960.0, -1.0 / 9979200.0, 1.0 / 1245404160.0]),
            }
        } else {
            let (s, c) = theta.sin_cos();
            let t2 = theta * theta;
            Self {
                a: s / theta,
                b: (1.0 - c) / t2,
                c: (theta - s) / (t2 * theta),
                d: (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2),
                e: (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t2 * t2 * theta),
            }
        }
    }
}

/// `exp(s * hat(v))` in closed form.
pub fn exp_pose(v: &Twist, s: f64) -> Pose {
    let phi = angular(v) * s;
    let rho = linear(v) * s;
    let co = Coefficients::new(phi.norm());
    let p = skew(&phi);
    let p2 = p * p;
    let i = Matrix3::identity();
    let rotation = i + p * co.a + p2 * co.b;
    let left_jacobian = i + p * co.b + p2 * co.c;
    Pose::new(rotation, left_jacobian * rho)
}

/// `exp(s * ad(v))`, evaluated as the adjoint of [`exp_pose`].
pub fn exp_ad(v: &Twist, s: f64) -> Matrix6<f64> {
    exp_pose(v, s).adjoint()
}

/// `∫₀ˢ exp(−(s − τ) ad(v)) dτ`, the factor that maps a rate of the screw
/// parameters to the body velocity at the end of the screw motion.
pub fn tangent_op(v: &Twist, s: f64) -> Matrix6<f64> {
    let phi = angular(v) * s;
    let rho = linear(v) * s;
    let co = Coefficients::new(phi.norm());
    let p = skew(&phi);
    let r = skew(&rho);
    let p2 = p * p;
    let i = Matrix3::identity();

    // Right Jacobian of SO(3) and the coupling block of the SE(3) right
    // Jacobian, written for the angular-first layout.
    let jr = i - p * co.b + p2 * co.c;
    let pr = p * r;
    let rp = r * p;
    let prp = pr * p;
    let qr = r * -0.5 + (pr + rp - prp) * co.c - (p * pr + rp * p - prp * 3.0) * co.d + (prp * p + p * prp) * co.e;

    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(jr * s));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&(jr * s));
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&(qr * s));
    m
}
