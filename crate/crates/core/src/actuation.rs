//! Cable routing, the cable wrench map Λ(X), distributed gravity and tip loads.

use crate::error::{Error, Result};
use crate::rod::{RadiusProfile, SectionProperties};
use crate::se3::{angular, linear, twist, Pose, Twist, Wrench};
use nalgebra::{DMatrix, Vector3};

/// One cable running along the rod at a fixed azimuth.
///
/// Its body-frame offset is `d(X) = r(X) (0, cos φ, sin φ)` with `r` affine in X.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cable {
    /// Azimuth φ (rad) measured from the body y axis towards z.
    pub angle: f64,
    /// Radial offset at the base (m).
    pub base_offset: f64,
    /// Radial offset at the tip (m).
    pub tip_offset: f64,
    /// Rod length the offsets are interpolated over (m).
    pub length: f64,
}

impl Cable {
    /// A cable on the rod surface, `r(X) = R(X)`.
    pub fn on_surface(profile: &RadiusProfile, angle: f64) -> Self {
        Self { angle, base_offset: profile.base_radius, tip_offset: profile.tip_radius, length: profile.length }
    }

    fn direction(&self) -> Vector3<f64> {
        let (s, c) = self.angle.sin_cos();
        Vector3::new(0.0, c, s)
    }

    pub fn radial(&self, x: f64) -> f64 {
        self.base_offset + (self.tip_offset - self.base_offset) * x / self.length
    }

    pub fn offset(&self, x: f64) -> Vector3<f64> {
        self.direction() * self.radial(x)
    }

    pub fn offset_slope(&self) -> Vector3<f64> {
        self.direction() * ((self.tip_offset - self.base_offset) / self.length)
    }
}

/// All cables of a rod, in input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CableLayout {
    pub cables: Vec<Cable>,
}

impl CableLayout {
    pub fn new(cables: Vec<Cable>) -> Self {
        Self { cables }
    }

    /// Cables on the surface at the given azimuths (rad).
    pub fn on_surface(profile: &RadiusProfile, angles: &[f64]) -> Self {
        Self::new(angles.iter().map(|&a| Cable::on_surface(profile, a)).collect())
    }

    /// Four surface cables at 0°, 90°, 180° and 270°.
    pub fn symmetric_four(profile: &RadiusProfile) -> Self {
        let q = std::f64::consts::FRAC_PI_2;
        Self::on_surface(profile, &[0.0, q, 2.0 * q, 3.0 * q])
    }

    pub fn len(&self) -> usize {
        self.cables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cables.is_empty()
    }

    /// Checks that every cable stays within the cross section, up to `tol` (m).
    pub fn check_inside(&self, profile: &RadiusProfile, tol: f64) -> Result<()> {
        for (i, c) in self.cables.iter().enumerate() {
            for x in [0.0, profile.length] {
                if c.radial(x).abs() > profile.radius(x) + tol {
                    return Err(Error::InvalidModel(format!(
                        "cable {i} sits {} m from the axis at X = {x} m, outside radius {}",
                        c.radial(x),
                        profile.radius(x)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Validates cable tensions: one finite, non-negative value per cable.
pub fn check_tensions(layout: &CableLayout, tensions: &[f64]) -> Result<()> {
    if tensions.len() != layout.len() {
        return Err(Error::Dimension { what: "cable tensions", expected: layout.len(), found: tensions.len() });
    }
    if let Some(t) = tensions.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::InvalidModel(format!("cable tensions must be non-negative, got {t}")));
    }
    Ok(())
}

/// Unnormalized cable direction `Q + K × d + d′` in the body frame.
fn raw_tangent(cable: &Cable, strain: &Twist, x: f64) -> Vector3<f64> {
    linear(strain) + angular(strain).cross(&cable.offset(x)) + cable.offset_slope()
}

/// Unit tangent of cable `index` at `x` for the local strain.
pub fn cable_tangent(layout: &CableLayout, strain: &Twist, x: f64, index: usize) -> Result<Vector3<f64>> {
    let cable = &layout.cables[index];
    let v = raw_tangent(cable, strain, x);
    let n = v.norm();
    if !(n > 1e-9) {
        return Err(Error::SingularTangent { cable: index, x });
    }
    Ok(v / n)
}

/// Λ(X): column i is the body wrench `(d_i × t_i; t_i)` per unit tension of cable i.
pub fn actuation_matrix(layout: &CableLayout, strain: &Twist, x: f64) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(6, layout.len());
    for (i, cable) in layout.cables.iter().enumerate() {
        let t = cable_tangent(layout, strain, x, i)?;
        let col = twist(cable.offset(x).cross(&t), t);
        m.column_mut(i).copy_from(&col);
    }
    Ok(m)
}

/// Λ(X) T and its derivative along X, for a strain varying as `strain + slope·δX`.
pub fn actuation_wrench_with_slope(
    layout: &CableLayout,
    strain: &Twist,
    strain_slope: &Twist,
    x: f64,
    tensions: &[f64],
) -> Result<(Wrench, Wrench)> {
    let mut w = Wrench::zeros();
    let mut dw = Wrench::zeros();
    let (k, dk) = (angular(strain), angular(strain_slope));
    for (i, (cable, &tension)) in layout.cables.iter().zip(tensions).enumerate() {
        if tension == 0.0 {
            continue;
        }
        let d = cable.offset(x);
        let dd = cable.offset_slope();
        let v = raw_tangent(cable, strain, x);
        let n = v.norm();
        if !(n > 1e-9) {
            return Err(Error::SingularTangent { cable: i, x });
        }
        let t = v / n;
        let dv = linear(strain_slope) + dk.cross(&d) + k.cross(&dd);
        let dt = (dv - t * t.dot(&dv)) / n;
        w += twist(d.cross(&t), t) * tension;
        dw += twist(dd.cross(&t) + d.cross(&dt), dt) * tension;
    }
    Ok((w, dw))
}

/// Λ(X) T.
pub fn actuation_wrench(layout: &CableLayout, strain: &Twist, x: f64, tensions: &[f64]) -> Result<Wrench> {
    Ok(actuation_wrench_with_slope(layout, strain, &Twist::zeros(), x, tensions)?.0)
}

/// Distributed gravity wrench `ℳ Ad⁻¹_g 𝒢` in the body frame, where `pose`
/// is the inertial pose of the section (base frame included) and `gravity` the
/// inertial gravity acceleration twist.
pub fn gravity_wrench(props: &SectionProperties, pose: &Pose, gravity: &Twist) -> Wrench {
    props.mass.component_mul(&pose.adjoint_inv_mul(gravity))
}

/// Gravity twist for a linear acceleration vector (m/s²).
pub fn gravity_twist(acceleration: Vector3<f64>) -> Twist {
    twist(Vector3::zeros(), acceleration)
}

/// Concentrated tip wrench; identity on its input.
pub fn tip_wrench(wrench: Wrench) -> Wrench {
    wrench
}

/// Axial tip force F: `(0, 0, 0, F, 0, 0)`.
pub fn axial_tip_force(force: f64) -> Wrench {
    Wrench::new(0.0, 0.0, 0.0, force, 0.0, 0.0)
}

/// External loading of a rod.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Loads {
    /// Gravity acceleration twist in the inertial frame.
    pub gravity: Twist,
    /// Body-frame wrench applied at the tip.
    pub tip: Wrench,
    /// Cable tensions (N), one per cable.
    pub tensions: Vec<f64>,
}

impl Loads {
    /// The same loads multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { gravity: self.gravity * s, tip: self.tip * s, tensions: self.tensions.iter().map(|t| t * s).collect() }
    }

    pub fn has_cable_load(&self) -> bool {
        self.tensions.iter().any(|&t| t != 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rod::{CrossSection, Material};
    use crate::se3::{exp_pose, straight_strain};
    use nalgebra::Rotation3;
    use std::f64::consts::FRAC_PI_2;

    fn profile() -> RadiusProfile {
        RadiusProfile::new(1e-2, 5e-3, 0.2).unwrap()
    }

    #[test]
    fn straight_cylindrical_tangent_is_axial() {
        let p = RadiusProfile::cylindrical(0.01, 0.2).unwrap();
        let layout = CableLayout::on_surface(&p, &[0.3]);
        let t = cable_tangent(&layout, &straight_strain(), 0.1, 0).unwrap();
        assert!((t - Vector3::x()).norm() < 1e-15);
    }

    #[test]
    fn conical_routing_tilts_the_tangent() {
        let layout = CableLayout::on_surface(&profile(), &[0.0]);
        let s = (5e-3 - 1e-2) / 0.2;
        let t = cable_tangent(&layout, &straight_strain(), 0.05, 0).unwrap();
        let expected = Vector3::new(1.0, s, 0.0).normalize();
        assert!((t - expected).norm() < 1e-15);
        assert!((t.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_strain_is_rejected() {
        let layout = CableLayout::new(vec![Cable { angle: 0.0, base_offset: 0.0, tip_offset: 0.0, length: 0.2 }]);
        let err = cable_tangent(&layout, &Twist::zeros(), 0.1, 0).unwrap_err();
        assert!(matches!(err, Error::SingularTangent { cable: 0, .. }));
    }

    #[test]
    fn symmetric_cables_cancel_moments() {
        let p = RadiusProfile::cylindrical(0.01, 0.2).unwrap();
        let layout = CableLayout::symmetric_four(&p);
        let lam = actuation_matrix(&layout, &straight_strain(), 0.1).unwrap();
        let c = 0.7;
        let w = &lam * nalgebra::DVector::from_element(4, c);
        let expected = Wrench::new(0.0, 0.0, 0.0, 4.0 * c, 0.0, 0.0);
        assert!((w - expected).norm() < 1e-15);
    }

    #[test]
    fn single_offset_cable_column() {
        let layout = CableLayout::new(vec![Cable { angle: 0.0, base_offset: 0.02, tip_offset: 0.02, length: 0.2 }]);
        let lam = actuation_matrix(&layout, &straight_strain(), 0.1).unwrap();
        let expected = Wrench::new(0.0, 0.0, -0.02, 1.0, 0.0, 0.0);
        assert!((lam.column(0) - expected).norm() < 1e-16);
        let centred = CableLayout::new(vec![Cable { angle: 0.0, base_offset: 0.0, tip_offset: 0.0, length: 0.2 }]);
        let lam0 = actuation_matrix(&centred, &straight_strain(), 0.1).unwrap();
        assert_eq!(lam0.column(0).into_owned(), nalgebra::DVector::from_column_slice(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn tangent_follows_the_cable_path() {
        // Along a constant-strain piece, the cable point u + R d moves along R t.
        let layout = CableLayout::on_surface(&profile(), &[0.7]);
        let xi = Twist::new(2.0, -5.0, 8.0, 1.05, 0.1, -0.05);
        let x = 0.08;
        let h = 1e-6;
        let point = |s: f64| {
            let g = exp_pose(&xi, s);
            g.translation + g.rotation * layout.cables[0].offset(s)
        };
        let fd = (point(x + h) - point(x - h)) / (2.0 * h);
        let body = exp_pose(&xi, x).rotation.transpose() * fd;
        let t = cable_tangent(&layout, &xi, x, 0).unwrap();
        assert!((body.normalize() - t).norm() < 1e-8);
    }

    #[test]
    fn wrench_slope_matches_finite_differences() {
        let layout = CableLayout::symmetric_four(&profile());
        let xi = Twist::new(2.0, -5.0, 8.0, 1.05, 0.1, -0.05);
        let slope = Twist::new(10.0, 3.0, -20.0, 0.2, -0.4, 0.3);
        let tensions = [0.5, 1.0, 0.0, 2.0];
        let x = 0.11;
        let h = 1e-6 * 0.2;
        let at = |s: f64| actuation_wrench(&layout, &(xi + slope * (s - x)), s, &tensions).unwrap();
        let fd = (at(x + h) - at(x - h)) / (2.0 * h);
        let (w, dw) = actuation_wrench_with_slope(&layout, &xi, &slope, x, &tensions).unwrap();
        assert!((w - at(x)).norm() < 1e-15);
        assert!((dw - fd).norm() < 1e-7 * (1.0 + fd.norm()));
    }

    #[test]
    fn actuation_is_linear_in_tension() {
        let layout = CableLayout::symmetric_four(&profile());
        let xi = Twist::new(1.0, 2.0, -3.0, 0.98, 0.01, 0.02);
        let a = [0.1, 0.2, 0.3, 0.4];
        let b = [1.0, 0.0, 0.5, 0.0];
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x + y).collect();
        let wa = actuation_wrench(&layout, &xi, 0.05, &a).unwrap();
        let wb = actuation_wrench(&layout, &xi, 0.05, &b).unwrap();
        let ws = actuation_wrench(&layout, &xi, 0.05, &sum).unwrap();
        assert!((ws - (wa * 2.0 + wb)).norm() < 1e-15);
    }

    #[test]
    fn gravity_wrench_cases() {
        let m = Material::new(1e5, 4e4, 2000.0, 0.0).unwrap();
        let props = SectionProperties::new(&m, &CrossSection::circular(0.01));
        let g = gravity_twist(Vector3::new(0.0, 0.0, 9.81));
        let w = gravity_wrench(&props, &Pose::identity(), &g);
        let area = std::f64::consts::PI * 1e-4;
        assert!((w - Wrench::new(0.0, 0.0, 0.0, 0.0, 0.0, 2000.0 * area * 9.81)).norm() < 1e-12);
        assert_eq!(gravity_wrench(&props, &Pose::identity(), &Twist::zeros()), Wrench::zeros());

        // A section turned 90° about y sees gravity along its −x axis.
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), FRAC_PI_2).into_inner();
        let w = gravity_wrench(&props, &Pose::new(r, Vector3::new(0.3, 0.1, 0.0)), &g);
        let expected = Wrench::new(0.0, 0.0, 0.0, -2000.0 * area * 9.81, 0.0, 0.0);
        assert!((w - expected).norm() < 1e-12);

        // Spinning about the gravity axis keeps the inertial resultant.
        let spin = Rotation3::from_axis_angle(&Vector3::z_axis(), 0.8).into_inner();
        let base = Pose::new(Rotation3::from_euler_angles(0.3, -0.2, 0.5).into_inner(), Vector3::zeros());
        let spun = Pose::new(spin * base.rotation, Vector3::zeros());
        let inertial = |p: &Pose| p.rotation * linear(&gravity_wrench(&props, p, &g));
        assert!((inertial(&base) - inertial(&spun)).norm() < 1e-12);
    }

    #[test]
    fn layout_checks() {
        let p = profile();
        let layout = CableLayout::symmetric_four(&p);
        assert!(layout.check_inside(&p, 1e-12).is_ok());
        let outside = CableLayout::new(vec![Cable { angle: 0.0, base_offset: 0.02, tip_offset: 0.02, length: 0.2 }]);
        assert!(outside.check_inside(&p, 1e-6).is_err());
        assert!(check_tensions(&layout, &[0.0, 1.0, 0.0, 2.0]).is_ok());
        assert!(check_tensions(&layout, &[0.0, -1.0, 0.0, 2.0]).is_err());
        assert!(check_tensions(&layout, &[0.0]).is_err());
        assert_eq!(tip_wrench(axial_tip_force(0.05)), Wrench::new(0.0, 0.0, 0.0, 0.05, 0.0, 0.0));
    }
}
