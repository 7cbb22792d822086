//! Scenario files: TOML with every length in metres unless a section declares `unit = "cm"`.
//!
//! Unknown keys are rejected and deserialization errors carry the dotted path of the
//! offending field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{Rotation3, Vector3};
use plsrod::actuation::{gravity_twist, Cable, CableLayout, Loads};
use plsrod::identification::{Bounds, Theta};
use plsrod::reduction::{make_selection, Mode, ModeSelection};
use plsrod::rod::{Material, Partition, RadiusProfile, Rod, SegmentRule};
use plsrod::se3::{Pose, Wrench};
use plsrod::statics::Tolerances;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    #[default]
    M,
    Cm,
}

impl LengthUnit {
    /// Metres per unit.
    pub fn factor(self) -> f64 {
        match self {
            LengthUnit::M => 1.0,
            LengthUnit::Cm => 0.01,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub rod: RodConfig,
    #[serde(default)]
    pub cables: Option<CablesConfig>,
    #[serde(default)]
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, rename = "static")]
    pub static_run: Option<StaticRun>,
    #[serde(default)]
    pub sweep: Option<SweepRun>,
    #[serde(default)]
    pub dynamic: Option<DynamicRun>,
    #[serde(default)]
    pub compare: Option<CompareRun>,
    #[serde(default)]
    pub identify: Option<IdentifyRun>,
    #[serde(default)]
    pub validate: Option<ValidateRun>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleName {
    LeftEndpoint,
    Midpoint,
    #[default]
    Magnus4,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RodConfig {
    /// Unit of `length`, the radii and `section_ends`.
    #[serde(default)]
    pub unit: LengthUnit,
    pub length: f64,
    pub base_radius: f64,
    /// Defaults to `base_radius` (a cylinder).
    pub tip_radius: Option<f64>,
    /// Right ends of the sections; the last must equal `length`.
    pub section_ends: Vec<f64>,
    /// Segments per section.
    #[serde(default = "default_segments")]
    pub segments: usize,
    /// Gauss–Legendre points per segment.
    #[serde(default = "default_quadrature")]
    pub quadrature: usize,
    #[serde(default)]
    pub rule: RuleName,
    pub material: MaterialConfig,
}

fn default_segments() -> usize {
    10
}

fn default_quadrature() -> usize {
    4
}

/// SI units: Pa, kg/m³, Pa·s. Give exactly one of `shear_modulus` and `poisson`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub young_modulus: f64,
    pub shear_modulus: Option<f64>,
    pub poisson: Option<f64>,
    pub density: f64,
    #[serde(default)]
    pub viscosity: f64,
}

/// Cables at the given azimuths (degrees from body y towards z). Offsets default to
/// the rod surface; when given, both are required and use `unit`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CablesConfig {
    pub angles_deg: Vec<f64>,
    #[serde(default)]
    pub unit: LengthUnit,
    pub base_offset: Option<f64>,
    pub tip_offset: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    /// Gravitational acceleration in the inertial frame (m/s²).
    #[serde(default)]
    pub gravity: [f64; 3],
    /// Base position in the inertial frame, in the rod's unit.
    #[serde(default)]
    pub base_position: [f64; 3],
    /// Base orientation as a rotation vector (rad).
    #[serde(default)]
    pub base_rotation: [f64; 3],
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        Self { gravity: [0.0; 3], base_position: [0.0; 3], base_rotation: [0.0; 3] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_residual")]
    pub residual: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
}

fn default_residual() -> f64 {
    Tolerances::default().residual
}

fn default_step() -> f64 {
    Tolerances::default().step
}

fn default_iterations() -> usize {
    Tolerances::default().max_iterations
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { residual: default_residual(), step: default_step(), max_iterations: default_iterations() }
    }
}

fn default_mode() -> String {
    "full".into()
}

fn default_samples() -> usize {
    21
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticRun {
    /// Cable tensions (N); empty means no actuation.
    #[serde(default)]
    pub tensions: Vec<f64>,
    /// Body-frame tip wrench (N·m, N), angular part first.
    #[serde(default)]
    pub tip_wrench: [f64; 6],
    #[serde(default = "default_mode")]
    pub mode: String,
    /// Centerline samples written to the CSV.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRun {
    #[serde(default)]
    pub tensions: Vec<f64>,
    /// One body-frame tip wrench per load step.
    pub tip_wrenches: Vec<[f64; 6]>,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum InputConfig {
    Constant { tensions: Vec<f64> },
    Step { before: Vec<f64>, after: Vec<f64>, at: f64 },
    Ramp { from: Vec<f64>, to: Vec<f64>, start: f64, end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartState {
    /// The rest configuration.
    #[default]
    Rest,
    /// Static equilibrium under gravity and the tensions at t = 0.
    Equilibrium,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicRun {
    /// Time step (s).
    pub dt: f64,
    /// Final time (s).
    pub t_end: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default = "default_max_acceleration")]
    pub max_acceleration: f64,
    #[serde(default)]
    pub input: Option<InputConfig>,
    #[serde(default)]
    pub start: StartState,
    /// Amplitude of a seeded random initial strain rate (1/s); zero starts at rest.
    #[serde(default)]
    pub initial_rate: f64,
}

fn default_sample_every() -> usize {
    10
}

fn default_max_acceleration() -> f64 {
    1e9
}

fn default_models() -> Vec<String> {
    ["full", "pcs", "euler_bernoulli", "extensible_kirchhoff", "timoshenko"].map(String::from).to_vec()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareRun {
    /// Mode names or masks, plus `pcs` for the piecewise constant strain model.
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    #[serde(default)]
    pub tensions: Vec<f64>,
    #[serde(default)]
    pub tip_wrench: [f64; 6],
    /// Unit of the reference tips.
    #[serde(default)]
    pub reference_unit: LengthUnit,
    /// Reference end-effector positions keyed by model name.
    #[serde(default)]
    pub reference: BTreeMap<String, [f64; 3]>,
}

/// SI material parameters.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaConfig {
    pub young_modulus: f64,
    pub shear_modulus: f64,
    pub density: f64,
}

impl ThetaConfig {
    pub fn theta(&self, path: &str) -> Result<Theta, CliError> {
        let t = Theta::new(self.young_modulus, self.shear_modulus, self.density);
        if t.as_vector().iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(t)
        } else {
            Err(CliError::config(path, "material parameters must be positive and finite"))
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub lower: ThetaConfig,
    pub upper: ThetaConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifyRun {
    /// Experiment CSV, relative to the config file.
    pub experiments: PathBuf,
    /// Starting parameters; the rod material when absent.
    #[serde(default)]
    pub initial: Option<ThetaConfig>,
    #[serde(default)]
    pub extra_starts: Vec<ThetaConfig>,
    /// Additional starts drawn log-uniformly inside the bounds from the run seed.
    #[serde(default)]
    pub random_starts: usize,
    #[serde(default)]
    pub bounds: Option<BoundsConfig>,
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateRun {
    pub experiments: PathBuf,
    /// Parameters to evaluate; the rod material when absent.
    #[serde(default)]
    pub theta: Option<ThetaConfig>,
}

/// A parsed scenario plus the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub dir: PathBuf,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub segments: Option<usize>,
    pub quadrature: Option<usize>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config = parse(&text)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, dir })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }
}

pub fn parse(text: &str) -> Result<ScenarioConfig, CliError> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(&path, e.into_inner().message().trim())
    })
}

fn positive(value: f64, path: &str) -> Result<f64, CliError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(CliError::config(path, format!("must be positive and finite, got {value}")))
    }
}

impl ScenarioConfig {
    pub fn material(&self) -> Result<Material, CliError> {
        let m = &self.rod.material;
        let built = match (m.shear_modulus, m.poisson) {
            (Some(g), None) => Material::new(m.young_modulus, g, m.density, m.viscosity),
            (None, Some(nu)) => Material::from_poisson(m.young_modulus, nu, m.density, m.viscosity),
            _ => return Err(CliError::config("rod.material", "give exactly one of `shear_modulus` and `poisson`")),
        };
        built.map_err(|e| CliError::config("rod.material", e.to_string()))
    }

    pub fn rod(&self, overrides: Overrides) -> Result<Rod, CliError> {
        let r = &self.rod;
        let u = r.unit.factor();
        let length = positive(r.length, "rod.length")? * u;
        let base = positive(r.base_radius, "rod.base_radius")? * u;
        let tip = positive(r.tip_radius.unwrap_or(r.base_radius), "rod.tip_radius")? * u;
        let profile = RadiusProfile::new(base, tip, length).map_err(|e| CliError::config("rod", e.to_string()))?;
        let ends: Vec<f64> = r.section_ends.iter().map(|x| x * u).collect();
        let segments = overrides.segments.unwrap_or(r.segments);
        let partition =
            Partition::new(&ends, segments).map_err(|e| CliError::config("rod.section_ends", e.to_string()))?;
        let rule = match r.rule {
            RuleName::LeftEndpoint => SegmentRule::LeftEndpoint,
            RuleName::Midpoint => SegmentRule::Midpoint,
            RuleName::Magnus4 => SegmentRule::Magnus4,
        };
        let env = &self.environment;
        let rotation = Rotation3::new(Vector3::from(env.base_rotation));
        let base_pose = Pose::new(*rotation.matrix(), Vector3::from(env.base_position) * u);
        Rod::new(profile, self.material()?, partition)
            .and_then(|rod| rod.with_quadrature(overrides.quadrature.unwrap_or(r.quadrature)))
            .map(|rod| rod.with_rule(rule).with_base(base_pose))
            .map_err(|e| CliError::config("rod", e.to_string()))
    }

    pub fn layout(&self, rod: &Rod) -> Result<CableLayout, CliError> {
        let Some(c) = &self.cables else { return Ok(CableLayout::default()) };
        let u = c.unit.factor();
        let cables = c
            .angles_deg
            .iter()
            .map(|a| {
                let mut cable = Cable::on_surface(&rod.profile, a.to_radians());
                match (c.base_offset, c.tip_offset) {
                    (None, None) => {}
                    (Some(b), Some(t)) => {
                        cable.base_offset = b * u;
                        cable.tip_offset = t * u;
                    }
                    _ => return Err(CliError::config("cables", "give both `base_offset` and `tip_offset` or neither")),
                }
                Ok(cable)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let layout = CableLayout::new(cables);
        layout.check_inside(&rod.profile, 1e-9).map_err(|e| CliError::config("cables", e.to_string()))?;
        Ok(layout)
    }

    pub fn loads(&self, tensions: &[f64], tip: &[f64; 6]) -> Loads {
        Loads {
            gravity: gravity_twist(Vector3::from(self.environment.gravity)),
            tip: Wrench::from_column_slice(tip),
            tensions: tensions.to_vec(),
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        let s = &self.solver;
        Tolerances { residual: s.residual, step: s.step, max_iterations: s.max_iterations }
    }
}

pub fn selection(name: &str, path: &str) -> Result<ModeSelection, CliError> {
    let mode: Mode = name.parse().map_err(|e: plsrod::Error| CliError::config(path, e.to_string()))?;
    make_selection(mode).map_err(|e| CliError::config(path, e.to_string()))
}

pub fn bounds(run: &IdentifyRun) -> Result<Bounds, CliError> {
    match &run.bounds {
        None => Ok(Bounds::default()),
        Some(b) => {
            let lower = b.lower.theta("identify.bounds.lower")?;
            let upper = b.upper.theta("identify.bounds.upper")?;
            if lower.as_vector().iter().zip(upper.as_vector().iter()).any(|(l, u)| l >= u) {
                return Err(CliError::config("identify.bounds", "every lower bound must be below its upper bound"));
            }
            Ok(Bounds { lower, upper })
        }
    }
}
