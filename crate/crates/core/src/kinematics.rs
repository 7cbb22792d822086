//! Piecewise linear strain kinematics.
//!
//! The strain varies linearly between interpolation nodes. For evaluation every
//! section is split into `k` segments, and over each segment the strain is
//! frozen into one screw `Θ` (see [`SegmentRule`]). A pose is the product of the
//! segment exponentials, and velocities, Jacobians and their rates are carried
//! along the same product from base to tip.

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::rod::{Interp, Rod, SegmentRule};
use crate::se3::{ad, ad_mul, coad_mul, exp_pose, tangent_op, Pose, Twist, Wrench};
use nalgebra::{DMatrix, DVector, Matrix6};

/// Splits a stacked state vector into its node twists.
pub fn node_twists(rod: &Rod, v: &DVector<f64>) -> Result<Vec<Twist>> {
    if v.len() != rod.dof() {
        return Err(Error::Dimension { what: "joint vector", expected: rod.dof(), found: v.len() });
    }
    Ok((0..rod.nodes()).map(|i| v.fixed_rows::<6>(6 * i).into_owned()).collect())
}

/// Stacks node twists into one vector.
pub fn stack(nodes: &[Twist]) -> DVector<f64> {
    DVector::from_iterator(6 * nodes.len(), nodes.iter().flat_map(|t| t.iter().copied()))
}

/// Continuous strain `ξ(X) = Φ(X) q`.
pub fn strain_at(rod: &Rod, q: &DVector<f64>, x: f64) -> Result<Twist> {
    let w = rod.partition.interp(x)?;
    let nodes = node_twists(rod, q)?;
    Ok(nodes[w.section] * w.a + nodes[w.section + 1] * w.b)
}

/// Interpolation matrix Φ(X), 6 × 6(N+1).
pub fn interpolation_matrix(rod: &Rod, x: f64) -> Result<DMatrix<f64>> {
    let w = rod.partition.interp(x)?;
    let mut phi = DMatrix::zeros(6, rod.dof());
    for i in 0..6 {
        phi[(i, 6 * w.section + i)] = w.a;
        phi[(i, 6 * (w.section + 1) + i)] = w.b;
    }
    Ok(phi)
}

/// Derivatives of the segment screw with respect to the two node strains of its
/// section, `E_a = ∂Θ/∂ξ̄_{n−1}` and `E_b = ∂Θ/∂ξ̄_n`.
///
/// Both are `αI` / `βI` for the sampling rules; the fourth-order rule adds a
/// commutator term with coefficient `c = h²/12`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScrewMap {
    pub alpha: f64,
    pub beta: f64,
    c: f64,
    inv_len: f64,
    mid: Twist,
    slope: Twist,
}

impl ScrewMap {
    pub fn a_mul(&self, v: &Twist) -> Twist {
        let mut r = v * self.alpha;
        if self.c != 0.0 {
            r -= (ad_mul(&self.mid, v) * self.inv_len + ad_mul(&self.slope, v) * self.alpha) * self.c;
        }
        r
    }

    pub fn b_mul(&self, v: &Twist) -> Twist {
        let mut r = v * self.beta;
        if self.c != 0.0 {
            r -= (ad_mul(&self.slope, v) * self.beta - ad_mul(&self.mid, v) * self.inv_len) * self.c;
        }
        r
    }

    pub fn a_tr_mul(&self, w: &Wrench) -> Wrench {
        let mut r = w * self.alpha;
        if self.c != 0.0 {
            r -= (coad_mul(&self.mid, w) * self.inv_len + coad_mul(&self.slope, w) * self.alpha) * self.c;
        }
        r
    }

    pub fn b_tr_mul(&self, w: &Wrench) -> Wrench {
        let mut r = w * self.beta;
        if self.c != 0.0 {
            r -= (coad_mul(&self.slope, w) * self.beta - coad_mul(&self.mid, w) * self.inv_len) * self.c;
        }
        r
    }

    pub fn a_matrix(&self) -> Matrix6<f64> {
        let mut m = Matrix6::identity() * self.alpha;
        if self.c != 0.0 {
            m -= (ad(&self.mid) * self.inv_len + ad(&self.slope) * self.alpha) * self.c;
        }
        m
    }

    pub fn b_matrix(&self) -> Matrix6<f64> {
        let mut m = Matrix6::identity() * self.beta;
        if self.c != 0.0 {
            m -= (ad(&self.slope) * self.beta - ad(&self.mid) * self.inv_len) * self.c;
        }
        m
    }

    /// Time derivatives of `E_a` and `E_b` for given node rates.
    pub fn rate_matrices(&self, rate_a: &Twist, rate_b: &Twist) -> (Matrix6<f64>, Matrix6<f64>) {
        if self.c == 0.0 {
            return (Matrix6::zeros(), Matrix6::zeros());
        }
        let mid_rate = rate_a * self.alpha + rate_b * self.beta;
        let slope_rate = (rate_b - rate_a) * self.inv_len;
        let (am, asl) = (ad(&mid_rate) * self.inv_len, ad(&slope_rate));
        ((am + asl * self.alpha) * -self.c, (asl * self.beta - am) * -self.c)
    }

    /// `Ė_a ξ̇_a + Ė_b ξ̇_b`, which simplifies to `−2c ad(ξ̇′) ξ̇_mid`.
    pub fn rate_term(&self, rate_a: &Twist, rate_b: &Twist) -> Twist {
        if self.c == 0.0 {
            return Twist::zeros();
        }
        let mid_rate = rate_a * self.alpha + rate_b * self.beta;
        let slope_rate = (rate_b - rate_a) * self.inv_len;
        ad_mul(&slope_rate, &mid_rate) * (-2.0 * self.c)
    }
}

/// Screw and its node derivatives for the piece `[s0, s0 + t]` of `section`.
pub(crate) fn segment_screw(rod: &Rod, nodes: &[Twist], section: usize, s0: f64, t: f64) -> (Twist, ScrewMap) {
    let start = rod.partition.section_start(section);
    let len = rod.partition.section_length(section);
    let sample = match rod.rule {
        SegmentRule::LeftEndpoint => s0,
        SegmentRule::Midpoint | SegmentRule::Magnus4 => s0 + 0.5 * t,
    };
    let beta = (sample - start) / len;
    let alpha = 1.0 - beta;
    let (xa, xb) = (&nodes[section], &nodes[section + 1]);
    let mid = xa * alpha + xb * beta;
    let slope = (xb - xa) / len;
    let c = if rod.rule == SegmentRule::Magnus4 { t * t / 12.0 } else { 0.0 };
    let screw = if c != 0.0 { mid - ad_mul(&slope, &mid) * c } else { mid };
    (screw, ScrewMap { alpha, beta, c, inv_len: 1.0 / len, mid, slope })
}

/// Kinematic quantities carried along the rod.
#[derive(Debug, Clone)]
pub struct Frame {
    /// Inertial pose of the cross section.
    pub pose: Pose,
    /// Jacobian blocks, one per node; blocks past the current section are zero.
    pub jac: Vec<Matrix6<f64>>,
    /// Blocks of J̇ (defined so that `J̇ q̇` is the velocity-product acceleration).
    pub jac_dot: Vec<Matrix6<f64>>,
    /// Body velocity twist η.
    pub vel: Twist,
    /// Body acceleration twist η̇.
    pub acc: Twist,
}

impl Frame {
    fn base(rod: &Rod, what: Track) -> Self {
        let blocks = |on: bool| if on { vec![Matrix6::zeros(); rod.nodes()] } else { Vec::new() };
        Self {
            pose: rod.base,
            jac: blocks(what.jacobian),
            jac_dot: blocks(what.jacobian_dot),
            vel: Twist::zeros(),
            acc: Twist::zeros(),
        }
    }

    /// J as a dense 6 × 6(N+1) matrix.
    pub fn jacobian_matrix(&self) -> DMatrix<f64> {
        blocks_to_matrix(&self.jac)
    }

    pub fn jacobian_dot_matrix(&self) -> DMatrix<f64> {
        blocks_to_matrix(&self.jac_dot)
    }
}

pub(crate) fn blocks_to_matrix(blocks: &[Matrix6<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(6, 6 * blocks.len());
    for (i, b) in blocks.iter().enumerate() {
        m.view_mut((0, 6 * i), (6, 6)).copy_from(b);
    }
    m
}

/// Which optional quantities a sweep carries.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Track {
    pub jacobian: bool,
    pub jacobian_dot: bool,
}

/// Advances a [`Frame`] over one piece of a segment.
pub(crate) struct Propagator<'a> {
    rod: &'a Rod,
    nodes: Vec<Twist>,
    rates: Option<Vec<Twist>>,
    accels: Option<Vec<Twist>>,
    track: Track,
    inner: GaussLegendre,
}

impl<'a> Propagator<'a> {
    pub fn new(
        rod: &'a Rod,
        q: &DVector<f64>,
        qdot: Option<&DVector<f64>>,
        qddot: Option<&DVector<f64>>,
        track: Track,
    ) -> Result<Self> {
        let nodes = node_twists(rod, q)?;
        let rates = qdot.map(|v| node_twists(rod, v)).transpose()?;
        let accels = qddot.map(|v| node_twists(rod, v)).transpose()?;
        if track.jacobian_dot && rates.is_none() {
            return Err(Error::InvalidModel("the Jacobian rate needs joint velocities".into()));
        }
        Ok(Self { rod, nodes, rates, accels, track, inner: GaussLegendre::new(rod.quadrature_order) })
    }

    pub fn rod(&self) -> &Rod {
        self.rod
    }

    pub fn nodes(&self) -> &[Twist] {
        &self.nodes
    }

    pub fn start(&self) -> Frame {
        Frame::base(self.rod, self.track)
    }

    /// Frame at `s0 + t` given the frame `from` at `s0`; `s0` must be a segment
    /// start inside `section` and `t` at most one segment length.
    pub fn step(&self, from: &Frame, section: usize, s0: f64, t: f64, out: &mut Frame) {
        let (screw, map) = segment_screw(self.rod, &self.nodes, section, s0, t);
        let e = exp_pose(&screw, t);
        out.pose = from.pose * e;
        if !(self.track.jacobian || self.rates.is_some()) {
            return;
        }
        let adinv = e.adjoint_inv();
        let tang = tangent_op(&screw, t);
        let (na, nb) = (section, section + 1);

        if self.track.jacobian {
            for j in 0..=nb {
                out.jac[j] = adinv * from.jac[j];
            }
            out.jac[na] += tang * map.a_matrix();
            out.jac[nb] += tang * map.b_matrix();
            for j in nb + 1..out.jac.len() {
                out.jac[j].fill(0.0);
            }
        }

        let Some(rates) = &self.rates else { return };
        let (ra, rb) = (&rates[na], &rates[nb]);
        let screw_rate = map.a_mul(ra) + map.b_mul(rb);
        out.vel = adinv * from.vel + tang * screw_rate;

        // Velocity along the frozen screw at the inner quadrature nodes, and the
        // integral of exp(−(t−τ) ad Θ) ad(η(τ)) needed by the acceleration terms.
        let mut product = Matrix6::zeros();
        let mut product_applied = Twist::zeros();
        for (tau, w) in self.inner.on_interval(0.0, t) {
            let vel_tau = exp_pose(&screw, tau).adjoint_inv_mul(&from.vel) + tangent_op(&screw, tau) * screw_rate;
            let back = exp_pose(&screw, t - tau);
            if self.track.jacobian_dot {
                product += back.adjoint_inv() * ad(&vel_tau) * w;
            }
            product_applied += back.adjoint_inv_mul(&ad_mul(&vel_tau, &screw_rate)) * w;
        }

        if self.track.jacobian_dot {
            let (da, db) = map.rate_matrices(ra, rb);
            for j in 0..=nb {
                out.jac_dot[j] = adinv * from.jac_dot[j];
            }
            out.jac_dot[na] += product * map.a_matrix() + tang * da;
            out.jac_dot[nb] += product * map.b_matrix() + tang * db;
            for j in nb + 1..out.jac_dot.len() {
                out.jac_dot[j].fill(0.0);
            }
        }

        let screw_acc = match &self.accels {
            Some(acc) => map.a_mul(&acc[na]) + map.b_mul(&acc[nb]),
            None => Twist::zeros(),
        } + map.rate_term(ra, rb);
        out.acc = adinv * from.acc + tang * screw_acc + product_applied;
    }

    /// Frame at arc length `x`, walking from a start frame at the base.
    pub fn frame_at(&self, start: Frame, x: f64) -> Result<Frame> {
        let partition = &self.rod.partition;
        let target = partition.section_of(x)?;
        let k = partition.segments();
        let mut cur = start;
        let mut next = cur.clone();
        for section in 0..=target {
            let s_start = partition.section_start(section);
            let h = partition.segment_length(section);
            let (full, rest) = if section < target {
                (k, 0.0)
            } else {
                let offset = (x - s_start).max(0.0);
                let j = ((offset / h).floor() as usize).min(k - 1);
                (j, offset - j as f64 * h)
            };
            for i in 0..full {
                self.step(&cur, section, s_start + i as f64 * h, h, &mut next);
                std::mem::swap(&mut cur, &mut next);
            }
            if section == target && rest > 0.0 {
                self.step(&cur, section, s_start + full as f64 * h, rest, &mut next);
                std::mem::swap(&mut cur, &mut next);
            }
        }
        Ok(cur)
    }
}

/// Data handed to the visitor of [`sweep`] at each quadrature point.
pub(crate) struct Point<'a> {
    pub x: f64,
    /// Quadrature weight (m).
    pub weight: f64,
    pub interp: Interp,
    /// ξ(X) = Φ(X) q.
    pub strain: Twist,
    /// dξ/dX inside the section.
    pub strain_slope: Twist,
    pub frame: &'a Frame,
}

/// Visits every quadrature point of the rod in order from base to tip and
/// returns the tip frame.
pub(crate) fn sweep(prop: &Propagator, mut visit: impl FnMut(&Point)) -> Frame {
    let rod = prop.rod();
    let partition = &rod.partition;
    let rule = GaussLegendre::new(rod.quadrature_order);
    let mut cur = prop.start();
    let mut next = cur.clone();
    let mut scratch = cur.clone();
    for section in 0..partition.sections() {
        let s_start = partition.section_start(section);
        let h = partition.segment_length(section);
        let len = partition.section_length(section);
        let (xa, xb) = (prop.nodes()[section], prop.nodes()[section + 1]);
        let slope = (xb - xa) / len;
        for i in 0..partition.segments() {
            let s0 = s_start + i as f64 * h;
            for (u, w) in rule.unit() {
                let t = u * h;
                prop.step(&cur, section, s0, t, &mut scratch);
                let interp = partition.interp_in(section, s0 + t);
                visit(&Point {
                    x: s0 + t,
                    weight: w * h,
                    interp,
                    strain: xa * interp.a + xb * interp.b,
                    strain_slope: slope,
                    frame: &scratch,
                });
            }
            prop.step(&cur, section, s0, h, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
    }
    cur
}

/// Local data handed to a wrench density in [`project_density`].
pub struct DensityPoint {
    pub x: f64,
    pub interp: Interp,
    /// ξ(X) = Φ(X) q.
    pub strain: Twist,
    /// dξ/dX inside the section.
    pub strain_slope: Twist,
    /// Inertial pose of the cross section.
    pub pose: Pose,
}

struct SegmentRecord {
    section: usize,
    map: ScrewMap,
    adinv_t: Matrix6<f64>,
    tang_t: Matrix6<f64>,
    local: Wrench,
}

/// Generalized force `∫₀ᴸ Jᵀ f dX + J(L)ᵀ F_tip` for a body-frame wrench density `f`,
/// returned for all N+1 node blocks.
///
/// The integral is accumulated backwards from the tip, so J itself is never formed.
pub fn project_density(
    rod: &Rod,
    q: &DVector<f64>,
    mut density: impl FnMut(&DensityPoint) -> Result<Wrench>,
    tip: &Wrench,
) -> Result<DVector<f64>> {
    let nodes = node_twists(rod, q)?;
    let partition = &rod.partition;
    let rule = GaussLegendre::new(rod.quadrature_order);
    let k = partition.segments();
    let mut out = vec![Wrench::zeros(); rod.nodes()];
    let mut records = Vec::with_capacity(partition.sections() * k);
    let mut pose = rod.base;
    for section in 0..partition.sections() {
        let s_start = partition.section_start(section);
        let h = partition.segment_length(section);
        let len = partition.section_length(section);
        let (xa, xb) = (nodes[section], nodes[section + 1]);
        let slope = (xb - xa) / len;
        for i in 0..k {
            let s0 = s_start + i as f64 * h;
            let mut local = Wrench::zeros();
            for (u, w) in rule.unit() {
                let t = u * h;
                let (screw, map) = segment_screw(rod, &nodes, section, s0, t);
                let e = exp_pose(&screw, t);
                let interp = partition.interp_in(section, s0 + t);
                let point = DensityPoint {
                    x: s0 + t,
                    interp,
                    strain: xa * interp.a + xb * interp.b,
                    strain_slope: slope,
                    pose: pose * e,
                };
                let f = density(&point)? * (w * h);
                let v = tangent_op(&screw, t).transpose() * f;
                out[section] += map.a_tr_mul(&v);
                out[section + 1] += map.b_tr_mul(&v);
                local += e.adjoint_inv().transpose() * f;
            }
            let (screw, map) = segment_screw(rod, &nodes, section, s0, h);
            let e = exp_pose(&screw, h);
            records.push(SegmentRecord {
                section,
                map,
                adinv_t: e.adjoint_inv().transpose(),
                tang_t: tangent_op(&screw, h).transpose(),
                local,
            });
            pose = pose * e;
        }
    }
    let mut acc = *tip;
    for rec in records.iter().rev() {
        let v = rec.tang_t * acc;
        out[rec.section] += rec.map.a_tr_mul(&v);
        out[rec.section + 1] += rec.map.b_tr_mul(&v);
        acc = rec.local + rec.adinv_t * acc;
    }
    Ok(stack(&out))
}

/// Inertial pose of the cross section at `x`.
pub fn pose_at(rod: &Rod, q: &DVector<f64>, x: f64) -> Result<Pose> {
    let prop = Propagator::new(rod, q, None, None, Track::default())?;
    Ok(prop.frame_at(prop.start(), x)?.pose)
}

/// Poses at several arc lengths.
pub fn poses_at(rod: &Rod, q: &DVector<f64>, xs: &[f64]) -> Result<Vec<Pose>> {
    let prop = Propagator::new(rod, q, None, None, Track::default())?;
    xs.iter().map(|&x| Ok(prop.frame_at(prop.start(), x)?.pose)).collect()
}

/// Inertial tip position.
pub fn end_effector(rod: &Rod, q: &DVector<f64>) -> Result<nalgebra::Vector3<f64>> {
    Ok(pose_at(rod, q, rod.length())?.translation)
}

/// Body velocity at `x` for joint rates `qdot` and base velocity `base_vel`.
pub fn velocity_at(rod: &Rod, q: &DVector<f64>, qdot: &DVector<f64>, x: f64, base_vel: &Twist) -> Result<Twist> {
    let prop = Propagator::new(rod, q, Some(qdot), None, Track::default())?;
    let mut start = prop.start();
    start.vel = *base_vel;
    Ok(prop.frame_at(start, x)?.vel)
}

/// Body acceleration at `x`.
pub fn acceleration_at(
    rod: &Rod,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    qddot: &DVector<f64>,
    x: f64,
    base_vel: &Twist,
    base_acc: &Twist,
) -> Result<Twist> {
    let prop = Propagator::new(rod, q, Some(qdot), Some(qddot), Track::default())?;
    let mut start = prop.start();
    start.vel = *base_vel;
    start.acc = *base_acc;
    Ok(prop.frame_at(start, x)?.acc)
}

/// Geometric Jacobian `J(q, X)`, 6 × 6(N+1), mapping joint rates to the body velocity.
pub fn jacobian(rod: &Rod, q: &DVector<f64>, x: f64) -> Result<DMatrix<f64>> {
    let track = Track { jacobian: true, jacobian_dot: false };
    let prop = Propagator::new(rod, q, None, None, track)?;
    Ok(prop.frame_at(prop.start(), x)?.jacobian_matrix())
}

/// Jacobian rate `J̇(q, q̇, X)`.
///
/// `J̇ q̇` equals the time derivative of `J` along `q̇` applied to `q̇`, which is
/// what the equations of motion use. The matrix itself is built from the
/// segment-wise integrals of `ad(η)` and differs from the entrywise derivative
/// of `J` by a part that vanishes on `q̇`.
pub fn jacobian_dot(rod: &Rod, q: &DVector<f64>, qdot: &DVector<f64>, x: f64) -> Result<DMatrix<f64>> {
    let track = Track { jacobian: true, jacobian_dot: true };
    let prop = Propagator::new(rod, q, Some(qdot), None, track)?;
    Ok(prop.frame_at(prop.start(), x)?.jacobian_dot_matrix())
}

/// Entrywise time derivative `dJ/dt` along `q̇`.
///
/// Differs from [`jacobian_dot`] by `ad(η) J`, which vanishes on `q̇`.
pub fn jacobian_time_derivative(rod: &Rod, q: &DVector<f64>, qdot: &DVector<f64>, x: f64) -> Result<DMatrix<f64>> {
    let track = Track { jacobian: true, jacobian_dot: true };
    let prop = Propagator::new(rod, q, Some(qdot), None, track)?;
    let frame = prop.frame_at(prop.start(), x)?;
    let ad_vel = DMatrix::from_column_slice(6, 6, ad(&frame.vel).as_slice());
    Ok(frame.jacobian_dot_matrix() - ad_vel * frame.jacobian_matrix())
}

/// `M` uniformly spaced samples `(X, pose)` from base to tip.
pub fn centerline(rod: &Rod, q: &DVector<f64>, samples: usize) -> Result<Vec<(f64, Pose)>> {
    if samples < 2 {
        return Err(Error::InvalidModel("a centerline needs at least two samples".into()));
    }
    let l = rod.length();
    let xs: Vec<f64> = (0..samples).map(|i| l * i as f64 / (samples - 1) as f64).collect();
    let poses = poses_at(rod, q, &xs)?;
    Ok(xs.into_iter().zip(poses).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rod::{Material, Partition, RadiusProfile};
    use crate::se3::{hat, straight_strain, vee};
    use crate::testutil::max_diff;
    use nalgebra::{Matrix4, Vector3};

    fn rod(sections: &[f64], k: usize) -> Rod {
        let l = *sections.last().unwrap();
        let profile = RadiusProfile::new(1e-2, 5e-3, l).unwrap();
        let material = Material::new(1.1e5, 3.793e4, 2000.0, 10.0).unwrap();
        Rod::new(profile, material, Partition::new(sections, k).unwrap()).unwrap()
    }

    fn random_state(rod: &Rod, seed: u64, curvature: f64) -> DVector<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut q = rod.rest_state();
        for i in 0..q.len() {
            q[i] += if i % 6 < 3 { rng.gen_range(-curvature..curvature) } else { rng.gen_range(-0.2..0.2) };
        }
        q
    }

    #[test]
    fn straight_rod_lies_on_x_axis() {
        let rod = rod(&[0.09, 0.16, 0.2], 5);
        let q = rod.rest_state();
        for i in 0..=20 {
            let x = 0.01 * i as f64;
            let g = pose_at(&rod, &q, x).unwrap();
            assert!((g.translation - Vector3::new(x, 0.0, 0.0)).norm() < 1e-15);
            assert!(max_diff(&g.rotation, &nalgebra::Matrix3::identity()) < 1e-15);
        }
    }

    #[test]
    fn constant_strain_is_a_circular_arc() {
        let rod = rod(&[0.2], 7);
        let kappa = 8.0;
        let xi = Twist::new(0.0, 0.0, kappa, 1.0, 0.0, 0.0);
        let q = stack(&[xi, xi]);
        let g = pose_at(&rod, &q, 0.2).unwrap();
        let angle = kappa * 0.2;
        let expected = Vector3::new(angle.sin() / kappa, (1.0 - angle.cos()) / kappa, 0.0);
        assert!((g.translation - expected).norm() < 1e-13);
        assert!(max_diff(&g.to_homogeneous(), &exp_pose(&xi, 0.2).to_homogeneous()) < 1e-13);
    }

    /// RK4 on g' = g hat(Φ(X) q) with a fixed step; `None` keeps the rod's own strain field.
    fn rk4_pose(rod: &Rod, q: &DVector<f64>, x_end: f64, step: f64) -> Matrix4<f64> {
        let field = |x: f64| hat(&strain_at(rod, q, x.min(rod.length())).unwrap());
        let n = (x_end / step).round() as usize;
        let h = x_end / n as f64;
        let mut g = rod.base.to_homogeneous();
        let mut x = 0.0;
        // Integrate section by section so the strain kink sits on a step boundary.
        let bounds = rod.partition.bounds();
        let mut steps = Vec::new();
        for w in bounds.windows(2) {
            let (a, b) = (w[0], w[1].min(x_end));
            if b <= a {
                break;
            }
            let m = ((b - a) / h).ceil() as usize;
            for i in 0..m {
                steps.push((a + (b - a) * i as f64 / m as f64, (b - a) / m as f64));
            }
        }
        for (x0, hh) in steps {
            let k1 = g * field(x0);
            let k2 = (g + k1 * (hh / 2.0)) * field(x0 + hh / 2.0);
            let k3 = (g + k2 * (hh / 2.0)) * field(x0 + hh / 2.0);
            let k4 = (g + k3 * hh) * field(x0 + hh);
            g += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (hh / 6.0);
            x = x0 + hh;
        }
        let _ = x;
        g
    }

    #[test]
    fn pose_matches_rk4_oracle() {
        let rod = rod(&[0.09, 0.16, 0.2], 90);
        for seed in 0..5 {
            let q = random_state(&rod, seed, 20.0);
            let g = pose_at(&rod, &q, 0.2).unwrap();
            let oracle = rk4_pose(&rod, &q, 0.2, 1e-5);
            assert!(max_diff(&g.to_homogeneous(), &oracle) < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn segment_rules_converge_at_their_orders() {
        let base = rod(&[0.09, 0.16, 0.2], 8);
        let q = random_state(&base, 3, 20.0);
        let oracle = rk4_pose(&base, &q, 0.2, 1e-5);
        let err = |rule, k| {
            let r = base.clone().with_rule(rule).with_segments(k).unwrap();
            (pose_at(&r, &q, 0.2).unwrap().translation - oracle.fixed_view::<3, 1>(0, 3)).norm()
        };
        let ratio = |rule| err(rule, 8) / err(rule, 16);
        assert!((1.7..2.3).contains(&ratio(SegmentRule::LeftEndpoint)));
        assert!((3.5..4.5).contains(&ratio(SegmentRule::Midpoint)));
        assert!(ratio(SegmentRule::Magnus4) > 12.0);
    }

    #[test]
    fn jacobian_is_zero_past_the_containing_section() {
        let rod = rod(&[0.09, 0.16, 0.2], 6);
        let q = random_state(&rod, 1, 10.0);
        let j = jacobian(&rod, &q, 0.05).unwrap();
        assert!(j.columns(0, 12).norm() > 0.0);
        assert_eq!(j.columns(12, 12).norm(), 0.0);
        let j2 = jacobian(&rod, &q, 0.12).unwrap();
        assert_eq!(j2.columns(18, 6).norm(), 0.0);
        // A boundary point belongs to the left section.
        let jb = jacobian(&rod, &q, 0.09).unwrap();
        assert_eq!(jb.columns(12, 12).norm(), 0.0);
    }

    #[test]
    fn uniform_rate_on_straight_rod_gives_tangent_operator() {
        let rod = rod(&[0.09, 0.16, 0.2], 6);
        let q = rod.rest_state();
        let x = 0.03;
        let j = jacobian(&rod, &q, x).unwrap();
        let sum = j.columns(0, 6) + j.columns(6, 6);
        assert!(max_diff(&sum, &tangent_op(&straight_strain(), x)) < 1e-14);
    }

    #[test]
    fn jacobian_matches_finite_differences_of_pose() {
        let rod = rod(&[0.09, 0.16, 0.2], 12);
        let q = random_state(&rod, 9, 15.0);
        for &x in &[0.04, 0.09, 0.131, 0.2] {
            let j = jacobian(&rod, &q, x).unwrap();
            let g_inv = pose_at(&rod, &q, x).unwrap().inverse().to_homogeneous();
            let h = 1e-6;
            for i in 0..rod.dof() {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[i] += h;
                qm[i] -= h;
                let dg = (pose_at(&rod, &qp, x).unwrap().to_homogeneous()
                    - pose_at(&rod, &qm, x).unwrap().to_homogeneous())
                    / (2.0 * h);
                let col = vee(&(g_inv * dg));
                assert!((col - j.column(i)).amax() < 1e-8, "x {x} column {i}");
            }
        }
    }

    #[test]
    fn velocity_agrees_with_jacobian() {
        let rod = rod(&[0.09, 0.16, 0.2], 10);
        let q = random_state(&rod, 4, 15.0);
        let qd = random_state(&rod, 5, 3.0) - rod.rest_state();
        for &x in &[0.0, 0.02, 0.09, 0.17, 0.2] {
            let v = velocity_at(&rod, &q, &qd, x, &Twist::zeros()).unwrap();
            let jq = jacobian(&rod, &q, x).unwrap() * &qd;
            assert!((v - jq).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_rates_give_zero_velocity_and_acceleration() {
        let rod = rod(&[0.1, 0.2], 5);
        let q = random_state(&rod, 2, 10.0);
        let z = DVector::zeros(rod.dof());
        assert_eq!(velocity_at(&rod, &q, &z, 0.15, &Twist::zeros()).unwrap(), Twist::zeros());
        assert_eq!(acceleration_at(&rod, &q, &z, &z, 0.15, &Twist::zeros(), &Twist::zeros()).unwrap(), Twist::zeros());
        assert_eq!(jacobian_dot(&rod, &q, &z, 0.15).unwrap().norm(), 0.0);
    }

    #[test]
    fn acceleration_splits_into_jacobian_terms() {
        let rod = rod(&[0.09, 0.16, 0.2], 8);
        let q = random_state(&rod, 6, 15.0);
        let qd = random_state(&rod, 7, 3.0) - rod.rest_state();
        let qdd = random_state(&rod, 8, 3.0) - rod.rest_state();
        for &x in &[0.05, 0.16, 0.2] {
            let acc = acceleration_at(&rod, &q, &qd, &qdd, x, &Twist::zeros(), &Twist::zeros()).unwrap();
            let j = jacobian(&rod, &q, x).unwrap();
            let jd = jacobian_dot(&rod, &q, &qd, x).unwrap();
            assert!((acc - (j * &qdd + jd * &qd)).norm() < 1e-10 * (1.0 + acc.norm()));
        }
    }

    #[test]
    fn backward_projection_matches_dense_jacobian_quadrature() {
        let rod = rod(&[0.09, 0.16, 0.2], 5);
        let q = random_state(&rod, 12, 15.0);
        let density = |p: &DensityPoint| -> Result<Wrench> {
            let r = p.pose.rotation;
            Ok(Wrench::new(p.x, r[(0, 1)], -p.strain[2], p.pose.translation.z, 1.0, p.strain_slope[1] * 1e-2))
        };
        let tip = Wrench::new(0.1, -0.2, 0.3, 1.0, 0.5, -0.4);
        let fast = project_density(&rod, &q, density, &tip).unwrap();

        let prop = Propagator::new(&rod, &q, None, None, Track { jacobian: true, jacobian_dot: false }).unwrap();
        let mut dense = DVector::zeros(rod.dof());
        let tip_frame = sweep(&prop, |p| {
            let dp = DensityPoint {
                x: p.x,
                interp: p.interp,
                strain: p.strain,
                strain_slope: p.strain_slope,
                pose: p.frame.pose,
            };
            let f = density(&dp).unwrap() * p.weight;
            dense += p.frame.jacobian_matrix().transpose() * f;
        });
        dense += tip_frame.jacobian_matrix().transpose() * tip;
        assert!((fast - &dense).amax() < 1e-13 * (1.0 + dense.amax()));
    }
}
