//! Piecewise constant strain (PCS) baseline: one constant strain twist per section.
//!
//! Shares the rod description, cable model and Newton driver with the linear-strain
//! model so that both can be compared on the same inputs.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::actuation::{actuation_wrench, gravity_wrench, CableLayout, Loads};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::rod::Rod;
use crate::se3::{exp_pose, tangent_op, Pose, Twist, Wrench};
use crate::statics::{solve_with_continuation, Tolerances};

/// Section strains, 6 per section.
fn section_twists(rod: &Rod, q: &DVector<f64>) -> Result<Vec<Twist>> {
    let n = rod.sections();
    if q.len() != 6 * n {
        return Err(Error::Dimension { what: "constant-strain state", expected: 6 * n, found: q.len() });
    }
    Ok((0..n).map(|i| q.fixed_rows::<6>(6 * i).into_owned()).collect())
}

/// Rest state: each section takes the rest strain at its midpoint.
pub fn rest_state(rod: &Rod) -> DVector<f64> {
    let p = &rod.partition;
    let mut q = DVector::zeros(6 * rod.sections());
    for n in 0..rod.sections() {
        let mid = p.section_start(n) + 0.5 * p.section_length(n);
        q.fixed_rows_mut::<6>(6 * n).copy_from(&rod.rest_strain_in(n, mid));
    }
    q
}

/// Pose at `x` together with the 6 × 6N body Jacobian.
pub fn pose_and_jacobian(rod: &Rod, q: &DVector<f64>, x: f64) -> Result<(Pose, DMatrix<f64>)> {
    let xi = section_twists(rod, q)?;
    let p = &rod.partition;
    let m = p.section_of(x)?;
    Ok(local_pose_and_jacobian(rod, &xi, m, x - p.section_start(m)))
}

fn local_pose_and_jacobian(rod: &Rod, xi: &[Twist], section: usize, offset: f64) -> (Pose, DMatrix<f64>) {
    let p = &rod.partition;
    let mut jac = DMatrix::zeros(6, 6 * xi.len());
    let mut pose = rod.base;
    let mut tails = Vec::with_capacity(section);
    for (n, strain) in xi.iter().enumerate().take(section) {
        pose = pose * exp_pose(strain, p.section_length(n));
        tails.push(pose);
    }
    let local = exp_pose(&xi[section], offset);
    pose = pose * local;
    for (n, end) in tails.iter().enumerate() {
        let relative = end.inverse() * pose;
        let block = relative.adjoint_inv() * tangent_op(&xi[n], p.section_length(n));
        jac.fixed_view_mut::<6, 6>(0, 6 * n).copy_from(&block);
    }
    jac.fixed_view_mut::<6, 6>(0, 6 * section).copy_from(&tangent_op(&xi[section], offset));
    (pose, jac)
}

pub fn pose_at(rod: &Rod, q: &DVector<f64>, x: f64) -> Result<Pose> {
    Ok(pose_and_jacobian(rod, q, x)?.0)
}

pub fn end_effector(rod: &Rod, q: &DVector<f64>) -> Result<Vector3<f64>> {
    Ok(pose_at(rod, q, rod.length())?.translation)
}

/// Virtual-work residual per section:
/// `∫ₙ [Σ(ξₙ − ξ₀) + ΛT] dX − ∫ Jₙᵀ F̄_e dX − Jₙ(L)ᵀ F_tip`.
pub fn static_residual(rod: &Rod, layout: &CableLayout, loads: &Loads, q: &DVector<f64>) -> Result<DVector<f64>> {
    let xi = section_twists(rod, q)?;
    let p = &rod.partition;
    let rule = GaussLegendre::new(rod.quadrature_order);
    let cables = loads.has_cable_load();
    let mut r = DVector::zeros(6 * xi.len());
    for m in 0..xi.len() {
        let h = p.segment_length(m);
        let start = p.section_start(m);
        let mut internal = Wrench::zeros();
        for i in 0..p.segments() {
            for (x, w) in rule.on_interval(start + i as f64 * h, start + (i + 1) as f64 * h) {
                let props = rod.properties_unchecked(x);
                let act = if cables { actuation_wrench(layout, &xi[m], x, &loads.tensions)? } else { Wrench::zeros() };
                internal += (props.stiffness.component_mul(&(xi[m] - rod.rest_strain_in(m, x))) + act) * w;
                let (pose, jac) = local_pose_and_jacobian(rod, &xi, m, x - start);
                r -= jac.transpose() * gravity_wrench(&props, &pose, &loads.gravity) * w;
            }
        }
        let mut block = r.fixed_rows_mut::<6>(6 * m);
        block += internal;
    }
    let last = xi.len() - 1;
    let (_, jac) = local_pose_and_jacobian(rod, &xi, last, p.section_length(last));
    r -= jac.transpose() * loads.tip;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcsSolution {
    pub q: DVector<f64>,
    pub end_effector: Vector3<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Static equilibrium of the constant-strain model; rows are scaled like the
/// integral rows of the linear-strain residual.
pub fn solve_static(rod: &Rod, layout: &CableLayout, loads: &Loads, tolerances: Tolerances) -> Result<PcsSolution> {
    if !loads.tensions.is_empty() {
        crate::actuation::check_tensions(layout, &loads.tensions)?;
    }
    let props = rod.properties_unchecked(0.0);
    let (bend, axial) = (props.stiffness[1], props.stiffness[3] * rod.length());
    let scale = DVector::from_fn(6 * rod.sections(), |i, _| if i % 6 < 3 { 1.0 / bend } else { 1.0 / axial });
    let rest = rest_state(rod);
    let residual = |l: &Loads, z: &DVector<f64>| Ok(static_residual(rod, layout, l, z)?.component_mul(&scale));
    let out = solve_with_continuation(residual, loads, rest.clone(), rest, tolerances)?;
    Ok(PcsSolution {
        end_effector: end_effector(rod, &out.z)?,
        q: out.z,
        iterations: out.iterations,
        residual: out.residual,
    })
}
