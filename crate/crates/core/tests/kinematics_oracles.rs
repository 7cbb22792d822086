//! Randomized kinematics checks against independent oracles: RK4 integration of
//! the pose ODE and central differences in time and in the joint coordinates.

use nalgebra::DMatrix;
use plsrod::kinematics::{acceleration_at, jacobian, jacobian_dot, jacobian_time_derivative, pose_at, velocity_at};
use plsrod::rod::Rod;
use plsrod::se3::{vee, Twist};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

use common::{random_rate, random_state, rk4_pose};

const STATES: u64 = 50;

fn rod(segments: usize) -> Rod {
    common::benchmark_rod(0.0, segments)
}

fn rel(a: &Twist, b: &Twist) -> f64 {
    (a - b).norm() / b.norm().max(1e-12)
}

#[test]
fn pose_agrees_with_rk4_integration() {
    let rod = rod(90);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..STATES {
        let q = random_state(&rod, &mut rng, 20.0, 0.2);
        let x = rng.gen_range(0.0..0.2);
        let g = pose_at(&rod, &q, x).unwrap().to_homogeneous();
        let oracle = rk4_pose(&rod, &q, x, 1e-5);
        worst = worst.max((g - oracle).amax());
    }
    assert!(worst < 1e-8, "worst pose deviation {worst:e}");
}

#[test]
fn velocity_agrees_with_time_differences_of_pose() {
    let rod = rod(10);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = 1e-6;
    for case in 0..STATES {
        let q = random_state(&rod, &mut rng, 15.0, 0.1);
        let qd = random_rate(rod.dof(), &mut rng, 5.0);
        let x = rng.gen_range(0.01..0.2);
        let gp = pose_at(&rod, &(&q + &qd * h), x).unwrap().to_homogeneous();
        let gm = pose_at(&rod, &(&q - &qd * h), x).unwrap().to_homogeneous();
        let g_inv = pose_at(&rod, &q, x).unwrap().inverse().to_homogeneous();
        let oracle = vee(&(g_inv * (gp - gm) / (2.0 * h)));
        let eta = velocity_at(&rod, &q, &qd, x, &Twist::zeros()).unwrap();
        assert!(rel(&eta, &oracle) < 1e-4, "case {case}: {:e}", rel(&eta, &oracle));
    }
}

#[test]
fn acceleration_agrees_with_time_differences_of_velocity() {
    let rod = rod(10);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let h = 1e-5;
    for case in 0..STATES {
        let q = random_state(&rod, &mut rng, 15.0, 0.1);
        let qd = random_rate(rod.dof(), &mut rng, 5.0);
        let qdd = random_rate(rod.dof(), &mut rng, 50.0);
        let x = rng.gen_range(0.01..0.2);
        // q(t) = q + t q̇ + t²/2 q̈
        let at = |t: f64| (&q + &qd * t + &qdd * (0.5 * t * t), &qd + &qdd * t);
        let (qp, qdp) = at(h);
        let (qm, qdm) = at(-h);
        let vp = velocity_at(&rod, &qp, &qdp, x, &Twist::zeros()).unwrap();
        let vm = velocity_at(&rod, &qm, &qdm, x, &Twist::zeros()).unwrap();
        let oracle = (vp - vm) / (2.0 * h);
        let acc = acceleration_at(&rod, &q, &qd, &qdd, x, &Twist::zeros(), &Twist::zeros()).unwrap();
        assert!(rel(&acc, &oracle) < 1e-3, "case {case}: {:e}", rel(&acc, &oracle));
    }
}

#[test]
fn jacobian_agrees_with_coordinate_differences() {
    let rod = rod(6);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..STATES {
        let q = random_state(&rod, &mut rng, 15.0, 0.1);
        let x = rng.gen_range(0.0..0.2);
        let j = jacobian(&rod, &q, x).unwrap();
        let g_inv = pose_at(&rod, &q, x).unwrap().inverse().to_homogeneous();
        let mut fd = DMatrix::zeros(6, rod.dof());
        for i in 0..rod.dof() {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += h;
            qm[i] -= h;
            let dg = pose_at(&rod, &qp, x).unwrap().to_homogeneous() - pose_at(&rod, &qm, x).unwrap().to_homogeneous();
            fd.set_column(i, &vee(&(g_inv * dg / (2.0 * h))));
        }
        worst = worst.max((j - fd).amax());
    }
    assert!(worst <= 1e-5, "worst Jacobian deviation {worst:e}");
}

#[test]
fn jacobian_rate_agrees_with_directional_differences() {
    let rod = rod(6);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let h = 1e-6;
    let (mut worst_matrix, mut worst_applied): (f64, f64) = (0.0, 0.0);
    for _ in 0..STATES {
        let q = random_state(&rod, &mut rng, 15.0, 0.1);
        let qd = random_rate(rod.dof(), &mut rng, 5.0);
        let x = rng.gen_range(0.0..0.2);
        let fd =
            (jacobian(&rod, &(&q + &qd * h), x).unwrap() - jacobian(&rod, &(&q - &qd * h), x).unwrap()) / (2.0 * h);
        let scale = fd.amax().max(1.0);
        let exact = jacobian_time_derivative(&rod, &q, &qd, x).unwrap();
        worst_matrix = worst_matrix.max((exact - &fd).amax() / scale);
        let jd = jacobian_dot(&rod, &q, &qd, x).unwrap();
        worst_applied = worst_applied.max((jd * &qd - fd * &qd).amax() / scale);
    }
    assert!(worst_matrix <= 1e-4, "worst dJ/dt deviation {worst_matrix:e}");
    assert!(worst_applied <= 1e-4, "worst J̇ q̇ deviation {worst_applied:e}");
}
