//! Rod geometry, material law and cross-sectional properties.

use crate::error::{Error, Result};
use crate::se3::{straight_strain, Pose, Twist};
use nalgebra::{DVector, Matrix6, Vector6};
use std::f64::consts::PI;

/// Affine radius `R(X) = R_base + (R_tip − R_base) X / L` (conical or cylindrical rod).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusProfile {
    pub base_radius: f64,
    pub tip_radius: f64,
    pub length: f64,
}

impl RadiusProfile {
    pub fn new(base_radius: f64, tip_radius: f64, length: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidModel(format!("rod length must be positive, got {length}")));
        }
        if !(tip_radius > 0.0 && tip_radius <= base_radius && base_radius.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "radii must satisfy 0 < tip <= base, got base {base_radius}, tip {tip_radius}"
            )));
        }
        Ok(Self { base_radius, tip_radius, length })
    }

    pub fn cylindrical(radius: f64, length: f64) -> Result<Self> {
        Self::new(radius, radius, length)
    }

    pub fn check(&self, x: f64) -> Result<()> {
        if (0.0..=self.length).contains(&x) {
            Ok(())
        } else {
            Err(Error::OutOfRange { x, length: self.length })
        }
    }

    /// Radius at `x`, without range checking.
    pub fn radius(&self, x: f64) -> f64 {
        self.base_radius + self.slope() * x
    }

    /// dR/dX.
    pub fn slope(&self) -> f64 {
        (self.tip_radius - self.base_radius) / self.length
    }
}

/// Isotropic Kelvin–Voigt material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    /// Young's modulus E (Pa).
    pub young_modulus: f64,
    /// Shear modulus G (Pa).
    pub shear_modulus: f64,
    /// Density ρ (kg/m³).
    pub density: f64,
    /// Viscosity μ (Pa·s); zero gives a purely elastic rod.
    pub viscosity: f64,
}

impl Material {
    pub fn new(young_modulus: f64, shear_modulus: f64, density: f64, viscosity: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(young_modulus) && ok(shear_modulus) && ok(density)) {
            return Err(Error::InvalidModel(format!(
                "E, G and density must be positive, got {young_modulus}, {shear_modulus}, {density}"
            )));
        }
        if !(viscosity >= 0.0 && viscosity.is_finite()) {
            return Err(Error::InvalidModel(format!("viscosity must be non-negative, got {viscosity}")));
        }
        Ok(Self { young_modulus, shear_modulus, density, viscosity })
    }

    /// Builds the shear modulus from Poisson's ratio, `G = E / (2(1 + ν))`.
    pub fn from_poisson(young_modulus: f64, poisson: f64, density: f64, viscosity: f64) -> Result<Self> {
        if !(-1.0 < poisson && poisson < 0.5) {
            return Err(Error::InvalidModel(format!("Poisson ratio must lie in (-1, 0.5), got {poisson}")));
        }
        Self::new(young_modulus, young_modulus / (2.0 * (1.0 + poisson)), density, viscosity)
    }
}

/// Geometric quantities of a circular cross section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossSection {
    /// Area (m²).
    pub area: f64,
    /// Polar second moment J_x = J_y + J_z (m⁴).
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

impl CrossSection {
    pub fn circular(radius: f64) -> Self {
        let j = PI * radius.powi(4) / 4.0;
        Self { area: PI * radius * radius, jx: 2.0 * j, jy: j, jz: j }
    }
}

/// Diagonals of the block-diagonal mass, stiffness and damping matrices of a
/// cross section, ordered like a twist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionProperties {
    /// ρ (J_x, J_y, J_z, A, A, A)
    pub mass: Vector6<f64>,
    /// (G J_x, E J_y, E J_z, E A, G A, G A)
    pub stiffness: Vector6<f64>,
    /// μ (J_x, 3J_y, 3J_z, 3A, A, A)
    pub damping: Vector6<f64>,
}

impl SectionProperties {
    pub fn new(material: &Material, cs: &CrossSection) -> Self {
        let (e, g, rho, mu) = (material.young_modulus, material.shear_modulus, material.density, material.viscosity);
        let (a, jx, jy, jz) = (cs.area, cs.jx, cs.jy, cs.jz);
        Self {
            mass: Vector6::new(jx, jy, jz, a, a, a) * rho,
            stiffness: Vector6::new(g * jx, e * jy, e * jz, e * a, g * a, g * a),
            damping: Vector6::new(jx, 3.0 * jy, 3.0 * jz, 3.0 * a, a, a) * mu,
        }
    }

    pub fn mass_matrix(&self) -> Matrix6<f64> {
        Matrix6::from_diagonal(&self.mass)
    }

    pub fn stiffness_matrix(&self) -> Matrix6<f64> {
        Matrix6::from_diagonal(&self.stiffness)
    }

    pub fn damping_matrix(&self) -> Matrix6<f64> {
        Matrix6::from_diagonal(&self.damping)
    }
}

/// How the linear strain over one segment is frozen into a single screw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SegmentRule {
    /// Strain sampled at the segment's left end. First-order accurate in the segment length.
    LeftEndpoint,
    /// Strain sampled at the segment midpoint. Second-order accurate.
    Midpoint,
    /// Midpoint strain plus the commutator correction `−h²/12 · ad(ξ′) ξ_mid`,
    /// the fourth-order Magnus exponent of a linearly varying strain.
    #[default]
    Magnus4,
}

/// Section boundaries `0 = L₀ < L₁ < … < L_N = L` with `k` segments per section.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    bounds: Vec<f64>,
    segments: usize,
}

/// Section containing a point together with its two interpolation weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interp {
    /// Zero-based section index; the section spans nodes `section` and `section + 1`.
    pub section: usize,
    /// Weight of the left node, `(L_n − X)/(L_n − L_{n−1})`.
    pub a: f64,
    /// Weight of the right node, `(X − L_{n−1})/(L_n − L_{n−1})`.
    pub b: f64,
}

impl Partition {
    /// `ends` lists the right end of every section (the last one is the rod length).
    pub fn new(ends: &[f64], segments: usize) -> Result<Self> {
        if ends.is_empty() {
            return Err(Error::InvalidModel("a partition needs at least one section".into()));
        }
        if segments == 0 {
            return Err(Error::InvalidModel("segments per section must be positive".into()));
        }
        let mut bounds = Vec::with_capacity(ends.len() + 1);
        bounds.push(0.0);
        for &e in ends {
            let last = *bounds.last().unwrap();
            if !(e > last && e.is_finite()) {
                return Err(Error::InvalidModel(format!("section bounds must strictly increase, got {ends:?}")));
            }
            bounds.push(e);
        }
        Ok(Self { bounds, segments })
    }

    /// Smallest per-section segment count that keeps every segment at most `max_spacing` long.
    pub fn segments_for_spacing(ends: &[f64], max_spacing: f64) -> usize {
        let mut prev = 0.0;
        let mut k = 1;
        for &e in ends {
            k = k.max(((e - prev) / max_spacing - 1e-9).ceil() as usize);
            prev = e;
        }
        k
    }

    pub fn with_segments(&self, segments: usize) -> Result<Self> {
        Self::new(&self.bounds[1..], segments)
    }

    pub fn sections(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn nodes(&self) -> usize {
        self.bounds.len()
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    /// All boundaries including 0 and L.
    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn length(&self) -> f64 {
        *self.bounds.last().unwrap()
    }

    pub fn section_start(&self, n: usize) -> f64 {
        self.bounds[n]
    }

    pub fn section_length(&self, n: usize) -> f64 {
        self.bounds[n + 1] - self.bounds[n]
    }

    pub fn segment_length(&self, n: usize) -> f64 {
        self.section_length(n) / self.segments as f64
    }

    /// Section index holding `x`; a point on an interior boundary belongs to the
    /// section on its left, and `x = 0` to the first section.
    pub fn section_of(&self, x: f64) -> Result<usize> {
        let length = self.length();
        if !(0.0..=length).contains(&x) {
            return Err(Error::OutOfRange { x, length });
        }
        let n = self.bounds[1..].partition_point(|&b| b < x);
        Ok(n.min(self.sections() - 1))
    }

    pub fn interp(&self, x: f64) -> Result<Interp> {
        let section = self.section_of(x)?;
        Ok(self.interp_in(section, x))
    }

    /// Weights of `x` measured in a given section (no range checks).
    pub fn interp_in(&self, section: usize, x: f64) -> Interp {
        let b = (x - self.bounds[section]) / self.section_length(section);
        Interp { section, a: 1.0 - b, b }
    }
}

/// Complete description of a rod: geometry, material, discretization and base frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Rod {
    pub profile: RadiusProfile,
    pub material: Material,
    pub partition: Partition,
    /// Pose of the clamped base in the inertial frame.
    pub base: Pose,
    /// Gauss–Legendre points per segment.
    pub quadrature_order: usize,
    pub rule: SegmentRule,
    rest: Vec<Twist>,
}

impl Rod {
    /// A rod that is straight and unstretched at rest, with 4 quadrature points per
    /// segment and the default segment rule.
    pub fn new(profile: RadiusProfile, material: Material, partition: Partition) -> Result<Self> {
        if (partition.length() - profile.length).abs() > 1e-12 * profile.length {
            return Err(Error::InvalidModel(format!(
                "partition ends at {} m but the rod is {} m long",
                partition.length(),
                profile.length
            )));
        }
        let rest = vec![straight_strain(); partition.nodes()];
        Ok(Self {
            profile,
            material,
            partition,
            base: Pose::identity(),
            quadrature_order: 4,
            rule: SegmentRule::default(),
            rest,
        })
    }

    pub fn with_base(mut self, base: Pose) -> Self {
        self.base = base;
        self
    }

    pub fn with_rule(mut self, rule: SegmentRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_quadrature(mut self, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidModel("quadrature order must be positive".into()));
        }
        self.quadrature_order = order;
        Ok(self)
    }

    pub fn with_segments(mut self, segments: usize) -> Result<Self> {
        self.partition = self.partition.with_segments(segments)?;
        Ok(self)
    }

    pub fn with_material(mut self, material: Material) -> Self {
        self.material = material;
        self
    }

    /// Replaces the rest strains (one twist per node).
    pub fn with_rest(mut self, rest: &DVector<f64>) -> Result<Self> {
        let nodes = self.partition.nodes();
        if rest.len() != 6 * nodes {
            return Err(Error::Dimension { what: "rest strains", expected: 6 * nodes, found: rest.len() });
        }
        self.rest = (0..nodes).map(|i| rest.fixed_rows::<6>(6 * i).into_owned()).collect();
        Ok(self)
    }

    pub fn length(&self) -> f64 {
        self.profile.length
    }

    pub fn sections(&self) -> usize {
        self.partition.sections()
    }

    pub fn nodes(&self) -> usize {
        self.partition.nodes()
    }

    /// Size of the generalized coordinate vector, 6(N+1).
    pub fn dof(&self) -> usize {
        6 * self.nodes()
    }

    pub fn rest_node(&self, i: usize) -> &Twist {
        &self.rest[i]
    }

    /// Stacked rest strains q₀.
    pub fn rest_state(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.rest.iter().flat_map(|t| t.iter().copied()))
    }

    /// Rest strain interpolated at `x` within `section`.
    pub fn rest_strain_in(&self, section: usize, x: f64) -> Twist {
        let w = self.partition.interp_in(section, x);
        self.rest[section] * w.a + self.rest[section + 1] * w.b
    }

    pub fn cross_section(&self, x: f64) -> Result<CrossSection> {
        self.profile.check(x)?;
        Ok(CrossSection::circular(self.profile.radius(x)))
    }

    pub fn section_properties(&self, x: f64) -> Result<SectionProperties> {
        Ok(SectionProperties::new(&self.material, &self.cross_section(x)?))
    }

    /// Section properties without range checks, for inner loops.
    pub(crate) fn properties_unchecked(&self, x: f64) -> SectionProperties {
        SectionProperties::new(&self.material, &CrossSection::circular(self.profile.radius(x)))
    }

    /// d/dX of the stiffness diagonal.
    pub(crate) fn stiffness_slope(&self, x: f64) -> Vector6<f64> {
        let r = self.profile.radius(x);
        let dr = self.profile.slope();
        let da = 2.0 * PI * r * dr;
        let dj = PI * r.powi(3) * dr;
        let (e, g) = (self.material.young_modulus, self.material.shear_modulus);
        Vector6::new(2.0 * g * dj, e * dj, e * dj, e * da, g * da, g * da)
    }

    /// d/dX of the damping diagonal.
    pub(crate) fn damping_slope(&self, x: f64) -> Vector6<f64> {
        let r = self.profile.radius(x);
        let dr = self.profile.slope();
        let da = 2.0 * PI * r * dr;
        let dj = PI * r.powi(3) * dr;
        Vector6::new(2.0 * dj, 3.0 * dj, 3.0 * dj, 3.0 * da, da, da) * self.material.viscosity
    }
}
