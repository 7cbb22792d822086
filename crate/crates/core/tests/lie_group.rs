//! Randomized identities of the rigid-motion group used by the kinematics.

use nalgebra::{Matrix4, Matrix6};
use plsrod::quadrature::GaussLegendre;
use plsrod::se3::{ad, exp_ad, exp_pose, hat, tangent_op, Pose, Twist};
use proptest::prelude::*;

fn twist_strategy(bound: f64) -> impl Strategy<Value = Twist> {
    prop::array::uniform6(-bound..bound).prop_map(|a| Twist::from_row_slice(&a))
}

/// Twists of norm at most `bound`, including near-zero angular parts.
fn bounded_twist(bound: f64) -> impl Strategy<Value = Twist> {
    (twist_strategy(1.0), 0.0..bound, prop::bool::weighted(0.2)).prop_map(move |(v, r, tiny)| {
        let mut v = v.normalize() * r;
        if tiny {
            v.fixed_rows_mut::<3>(0).scale_mut(1e-7);
        }
        v
    })
}

fn pose_strategy() -> impl Strategy<Value = Pose> {
    (bounded_twist(20.0), 0.0..0.5f64).prop_map(|(v, s)| exp_pose(&v, s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exponential_is_a_proper_rotation(v in bounded_twist(50.0), s in 0.0..0.2f64) {
        let g = exp_pose(&v, s);
        let r = g.rotation;
        prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).amax() <= 1e-10);
        prop_assert!((r.determinant() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn adjoint_of_exponential_is_exponential_of_ad(v in bounded_twist(50.0), s in 0.0..0.2f64) {
        let direct = exp_pose(&v, s).adjoint();
        prop_assert!((direct - exp_ad(&v, s)).amax() <= 1e-9 * (1.0 + direct.amax()));
        // Independent oracle: scaling-and-squaring matrix exponential of s·ad(v).
        let generic = (ad(&v) * s).exp();
        prop_assert!((generic - exp_ad(&v, s)).amax() <= 1e-9 * (1.0 + generic.amax()));
    }

    #[test]
    fn exponential_is_a_one_parameter_semigroup(v in bounded_twist(50.0), s1 in 0.0..0.1f64, s2 in 0.0..0.1f64) {
        let joint = exp_pose(&v, s1 + s2).to_homogeneous();
        let split = (exp_pose(&v, s1) * exp_pose(&v, s2)).to_homogeneous();
        prop_assert!((joint - split).amax() <= 1e-10);
    }

    #[test]
    fn exponential_matches_matrix_exponential(v in bounded_twist(50.0), s in 0.0..0.2f64) {
        let generic: Matrix4<f64> = (hat(&v) * s).exp();
        prop_assert!((exp_pose(&v, s).to_homogeneous() - generic).amax() <= 1e-10 * (1.0 + generic.amax()));
    }

    #[test]
    fn adjoint_inverts_through_the_group_inverse(g in pose_strategy()) {
        let product = g.adjoint() * g.inverse().adjoint();
        prop_assert!((product - Matrix6::identity()).amax() <= 1e-10);
        let inv = g.adjoint().try_inverse().unwrap();
        prop_assert!((inv - g.adjoint_inv()).amax() <= 1e-9 * (1.0 + inv.amax()));
    }

    #[test]
    fn tangent_operator_matches_dense_quadrature(v in bounded_twist(50.0), s in 0.0..0.2f64) {
        let rule = GaussLegendre::new(64);
        let mut oracle = Matrix6::zeros();
        for (tau, w) in rule.on_interval(0.0, s) {
            oracle += exp_ad(&v, -(s - tau)) * w;
        }
        let t = tangent_op(&v, s);
        prop_assert!((t - oracle).amax() <= 1e-10 * (1.0 + oracle.amax()));
    }
}

#[test]
fn tangent_operator_at_zero_twist_is_scaled_identity() {
    let t = tangent_op(&Twist::zeros(), 0.13);
    assert!((t - Matrix6::identity() * 0.13).amax() == 0.0);
}
