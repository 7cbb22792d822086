//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DVector, Matrix4, Vector3};
use plsrod::actuation::{gravity_twist, CableLayout, Loads};
use plsrod::identification::Experiment;
use plsrod::kinematics::strain_at;
use plsrod::rod::{Material, Partition, RadiusProfile, Rod};
use plsrod::se3::hat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const SECTION_ENDS: [f64; 3] = [0.09, 0.16, 0.2];

/// The conical benchmark rod: L = 0.2 m, R from 1 cm to 5 mm, three sections.
pub fn benchmark_rod(viscosity: f64, segments: usize) -> Rod {
    let profile = RadiusProfile::new(1e-2, 5e-3, 0.2).unwrap();
    let material = Material::new(1.1e5, 3.793e4, 2000.0, viscosity).unwrap();
    Rod::new(profile, material, Partition::new(&SECTION_ENDS, segments).unwrap()).unwrap()
}

pub fn gravity_only() -> Loads {
    Loads { gravity: gravity_twist(Vector3::new(0.0, 0.0, -9.81)), ..Loads::default() }
}

/// Surface cables in the order used by the prototype tables: −y, −z, +y, +z.
pub fn prototype_cables(rod: &Rod) -> CableLayout {
    let deg = |d: f64| d.to_radians();
    CableLayout::on_surface(&rod.profile, &[deg(180.0), deg(270.0), deg(0.0), deg(90.0)])
}

/// Rest state plus bounded random perturbations of curvature and linear strain.
pub fn random_state(rod: &Rod, rng: &mut ChaCha8Rng, curvature: f64, stretch: f64) -> DVector<f64> {
    let mut q = rod.rest_state();
    for i in 0..q.len() {
        q[i] += if i % 6 < 3 { rng.gen_range(-curvature..curvature) } else { rng.gen_range(-stretch..stretch) };
    }
    q
}

pub fn random_rate(n: usize, rng: &mut ChaCha8Rng, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale))
}

/// Classical RK4 on `g' = g hat(ξ(X))`, restarted at each section boundary.
pub fn rk4_pose(rod: &Rod, q: &DVector<f64>, x_end: f64, step: f64) -> Matrix4<f64> {
    let field = |x: f64| hat(&strain_at(rod, q, x).unwrap());
    let mut g = rod.base.to_homogeneous();
    for w in rod.partition.bounds().windows(2) {
        let (a, b) = (w[0], w[1].min(x_end));
        if b <= a {
            break;
        }
        let m = ((b - a) / step).ceil() as usize;
        let h = (b - a) / m as f64;
        for i in 0..m {
            let x = a + h * i as f64;
            let k1 = g * field(x);
            let k2 = (g + k1 * (h / 2.0)) * field(x + h / 2.0);
            let k3 = (g + k2 * (h / 2.0)) * field(x + h / 2.0);
            let k4 = (g + k3 * h) * field((x + h).min(b));
            g += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    g
}

/// Experiments from a CSV with columns t1..t4 (N) and x, y, z (cm).
pub fn load_experiments(name: &str) -> Vec<Experiment> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name);
    let mut reader = csv::Reader::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            let v: Vec<f64> = r.iter().map(|f| f.trim().parse().unwrap()).collect();
            Experiment { tensions: v[..4].to_vec(), tip: Vector3::new(v[4], v[5], v[6]) / 100.0 }
        })
        .collect()
}
