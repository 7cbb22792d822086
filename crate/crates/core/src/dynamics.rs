//! Generalized dynamics of the linear-strain rod and its time integration.
//!
//! Interior nodes follow the weak form of the Cosserat momentum balance,
//! `M q̈ + C q̇ = F_i + F_e + H T`, where every term is `∫ Jᵀ(·) dX` restricted to the
//! first N node blocks. The tip node follows the Kelvin–Voigt boundary condition
//! `γ(L) ξ̇_N + Σ(L)(ξ_N − ξ₀_N) + Λ(L) T = F_tip`.

use nalgebra::{DMatrix, DVector, Matrix6, Vector3};

use crate::actuation::{actuation_wrench_with_slope, CableLayout, Loads};
use crate::error::{Error, Result};
use crate::kinematics::{node_twists, sweep, Propagator, Track};
use crate::rod::Rod;
use crate::se3::{ad, Twist, Wrench};
use crate::statics::fd_jacobian;

/// Generalized matrices at one state, kept with all N+1 row blocks.
///
/// The accessors without the `_all` suffix drop the last row block, which the
/// boundary condition replaces.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedModel {
    /// ∫ Jᵀ ℳ J dX.
    pub mass_all: DMatrix<f64>,
    /// ∫ Jᵀ (ℳ J̇ − ad(J q̇)ᵀ ℳ J) dX.
    pub coriolis_all: DMatrix<f64>,
    /// ∫ Jᵀ (Σ′Φ + ΣΦ′ − ad(ξ)ᵀ Σ Φ) dX; internal elastic force is `K (q − q₀)`.
    pub stiffness_all: DMatrix<f64>,
    /// Same form with γ in place of Σ; internal viscous force is `D q̇`.
    pub damping_all: DMatrix<f64>,
    /// ∫ Jᵀ ℳ Ad⁻¹ dX with the pose taken relative to the base.
    pub gravity_map_all: DMatrix<f64>,
    /// ∫ Jᵀ (Λ′ − ad(ξ)ᵀ Λ) dX, one column per cable.
    pub actuation_all: DMatrix<f64>,
    /// γ(L) and Σ(L) on the diagonal.
    pub tip_damping: Matrix6<f64>,
    pub tip_stiffness: Matrix6<f64>,
    /// ½ ∫ (ξ − ξ₀)ᵀ Σ (ξ − ξ₀) dX.
    pub elastic_energy: f64,
    /// ∫ ρA p dX in the inertial frame.
    pub mass_moment: Vector3<f64>,
    sections: usize,
}

impl GeneralizedModel {
    fn top(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.rows(0, 6 * self.sections).into_owned()
    }

    /// M(q), 6N × 6(N+1).
    pub fn mass(&self) -> DMatrix<f64> {
        self.top(&self.mass_all)
    }

    pub fn coriolis(&self) -> DMatrix<f64> {
        self.top(&self.coriolis_all)
    }

    pub fn stiffness(&self) -> DMatrix<f64> {
        self.top(&self.stiffness_all)
    }

    pub fn damping(&self) -> DMatrix<f64> {
        self.top(&self.damping_all)
    }

    /// G(q), 6N × 6.
    pub fn gravity_map(&self) -> DMatrix<f64> {
        self.top(&self.gravity_map_all)
    }

    /// H(q), 6N × cables.
    pub fn actuation(&self) -> DMatrix<f64> {
        self.top(&self.actuation_all)
    }

    /// F_i = K(q)(q − q₀) + D(q) q̇ on the interior rows.
    pub fn internal_force(&self, q: &DVector<f64>, rest: &DVector<f64>, qdot: &DVector<f64>) -> DVector<f64> {
        self.stiffness() * (q - rest) + self.damping() * qdot
    }

    /// G(q) Ad⁻¹_{g_r} 𝒢 for the inertial gravity twist.
    pub fn gravity_force(&self, rod: &Rod, gravity: &Twist) -> DVector<f64> {
        self.gravity_map() * rod.base.adjoint_inv_mul(gravity)
    }

    pub fn kinetic_energy(&self, qdot: &DVector<f64>) -> f64 {
        0.5 * qdot.dot(&(&self.mass_all * qdot))
    }

    /// Potential of a uniform gravity field, `−∫ ρA 𝒢_lin · p dX`.
    pub fn gravity_energy(&self, gravity: &Twist) -> f64 {
        -Vector3::new(gravity[3], gravity[4], gravity[5]).dot(&self.mass_moment)
    }
}

/// Builds every generalized matrix in one base-to-tip sweep.
pub fn generalized_model(
    rod: &Rod,
    layout: &CableLayout,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> Result<GeneralizedModel> {
    let dof = rod.dof();
    if qdot.len() != dof {
        return Err(Error::Dimension { what: "joint velocities", expected: dof, found: qdot.len() });
    }
    let track = Track { jacobian: true, jacobian_dot: true };
    let prop = Propagator::new(rod, q, Some(qdot), None, track)?;
    let cables = layout.len();
    let rest = rod.rest_state();
    let mut mass = DMatrix::zeros(dof, dof);
    let mut coriolis = DMatrix::zeros(dof, dof);
    let mut stiffness = DMatrix::zeros(dof, dof);
    let mut damping = DMatrix::zeros(dof, dof);
    let mut gravity_map = DMatrix::zeros(dof, 6);
    let mut actuation = DMatrix::zeros(dof, cables);
    let mut elastic = 0.0;
    let mut moment = Vector3::zeros();
    let mut failure = None;
    let base_inv = rod.base.inverse();
    let unit: Vec<Vec<f64>> =
        (0..cables).map(|i| (0..cables).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();

    sweep(&prop, |p| {
        if failure.is_some() {
            return;
        }
        let n = p.interp.section;
        let active = 6 * (n + 2);
        let w = p.weight;
        let props = rod.properties_unchecked(p.x);
        let jac = p.frame.jacobian_matrix().columns(0, active).into_owned();
        let jac_dot = p.frame.jacobian_dot_matrix().columns(0, active).into_owned();
        let jt = jac.transpose() * w;

        let mj = scale_rows(&props.mass, &jac);
        mass.view_mut((0, 0), (active, active)).gemm(1.0, &jt, &mj, 1.0);
        let cor = scale_rows(&props.mass, &jac_dot) - ad(&p.frame.vel).transpose() * &mj;
        coriolis.view_mut((0, 0), (active, active)).gemm(1.0, &jt, &cor, 1.0);

        // Φ has blocks a·I and b·I at nodes n and n+1; Φ′ has ∓1/ℓ there.
        let inv_len = 1.0 / rod.partition.section_length(n);
        let co = ad(&p.strain).transpose();
        let constitutive = |diag: &nalgebra::Vector6<f64>, slope: &nalgebra::Vector6<f64>| {
            let d = Matrix6::from_diagonal(diag);
            let ds = Matrix6::from_diagonal(slope);
            let lead = ds - co * d;
            let mut m = DMatrix::zeros(6, 12);
            m.fixed_view_mut::<6, 6>(0, 0).copy_from(&(lead * p.interp.a - d * inv_len));
            m.fixed_view_mut::<6, 6>(0, 6).copy_from(&(lead * p.interp.b + d * inv_len));
            m
        };
        let ks = constitutive(&props.stiffness, &rod.stiffness_slope(p.x));
        let ds = constitutive(&props.damping, &rod.damping_slope(p.x));
        stiffness.view_mut((0, 6 * n), (active, 12)).gemm(1.0, &jt, &ks, 1.0);
        damping.view_mut((0, 6 * n), (active, 12)).gemm(1.0, &jt, &ds, 1.0);

        let relative = base_inv * p.frame.pose;
        let ga = scale_rows(&props.mass, &DMatrix::from_column_slice(6, 6, relative.adjoint_inv().as_slice()));
        gravity_map.view_mut((0, 0), (active, 6)).gemm(1.0, &jt, &ga, 1.0);

        for (i, e) in unit.iter().enumerate() {
            match actuation_wrench_with_slope(layout, &p.strain, &p.strain_slope, p.x, e) {
                Ok((lam, lam_slope)) => {
                    let col = lam_slope - co * lam;
                    let mut target = actuation.view_mut((0, i), (active, 1));
                    target.gemm(1.0, &jt, &DMatrix::from_column_slice(6, 1, col.as_slice()), 1.0);
                }
                Err(err) => failure = Some(err),
            }
        }

        let rest_strain = rest.fixed_rows::<6>(6 * n) * p.interp.a + rest.fixed_rows::<6>(6 * n + 6) * p.interp.b;
        let dev = p.strain - rest_strain;
        elastic += 0.5 * w * dev.dot(&props.stiffness.component_mul(&dev));
        moment += p.frame.pose.translation * (props.mass[3] * w);
    });
    if let Some(err) = failure {
        return Err(err);
    }
    let tip = rod.properties_unchecked(rod.length());
    Ok(GeneralizedModel {
        mass_all: mass,
        coriolis_all: coriolis,
        stiffness_all: stiffness,
        damping_all: damping,
        gravity_map_all: gravity_map,
        actuation_all: actuation,
        tip_damping: tip.damping_matrix(),
        tip_stiffness: tip.stiffness_matrix(),
        elastic_energy: elastic,
        mass_moment: moment,
        sections: rod.sections(),
    })
}

fn scale_rows(diag: &nalgebra::Vector6<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= diag[i];
    }
    out
}

/// M(q) alone.
pub fn generalized_mass(rod: &Rod, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    Ok(generalized_model(rod, &CableLayout::default(), q, &DVector::zeros(rod.dof()))?.mass())
}

/// C(q, q̇).
pub fn coriolis(rod: &Rod, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<DMatrix<f64>> {
    Ok(generalized_model(rod, &CableLayout::default(), q, qdot)?.coriolis())
}

/// (K(q), D(q)).
pub fn stiffness_damping(rod: &Rod, q: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = generalized_model(rod, &CableLayout::default(), q, &DVector::zeros(rod.dof()))?;
    Ok((m.stiffness(), m.damping()))
}

/// (F_e(q), G(q)) for the gravity twist in `loads`.
pub fn external_generalized(rod: &Rod, q: &DVector<f64>, gravity: &Twist) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let m = generalized_model(rod, &CableLayout::default(), q, &DVector::zeros(rod.dof()))?;
    Ok((m.gravity_force(rod, gravity), m.gravity_map()))
}

/// H(q).
pub fn actuation_generalized(rod: &Rod, layout: &CableLayout, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    Ok(generalized_model(rod, layout, q, &DVector::zeros(rod.dof()))?.actuation())
}

/// The stacked square system `M̲ q̈ + C̲ q̇ − K̲ = H̲ T + H̄ Ṫ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledOde {
    /// [M; Γ].
    pub mass: DMatrix<f64>,
    /// [C; σ].
    pub damping: DMatrix<f64>,
    /// [G Ad⁻¹_{g_r} 𝒢 + F_i; 0].
    pub forcing: DVector<f64>,
    /// [H; 0].
    pub input: DMatrix<f64>,
    /// [0; −Λ(L)].
    pub input_rate: DMatrix<f64>,
}

impl AssembledOde {
    /// Solves for q̈.
    pub fn acceleration(&self, qdot: &DVector<f64>, tensions: &[f64], rates: &[f64]) -> Result<DVector<f64>> {
        let t = DVector::from_column_slice(tensions);
        let dt = DVector::from_column_slice(rates);
        let rhs = &self.forcing - &self.damping * qdot
            + if t.is_empty() { DVector::zeros(qdot.len()) } else { &self.input * t }
            + if dt.is_empty() { DVector::zeros(qdot.len()) } else { &self.input_rate * dt };
        solve_square(&self.mass, &rhs, "stacked mass matrix")
    }
}

fn solve_square(m: &DMatrix<f64>, rhs: &DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
    match m.clone().lu().solve(rhs) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x),
        _ => {
            let sv = m.clone().singular_values();
            let condition = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
            Err(Error::Singular { what, condition })
        }
    }
}

/// Assembles the stacked dynamic system. Needs a positive viscosity, otherwise the
/// tip condition has no rate term and the system is differential-algebraic.
pub fn assemble(
    rod: &Rod,
    layout: &CableLayout,
    loads: &Loads,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> Result<AssembledOde> {
    let tip_damping = rod.properties_unchecked(rod.length()).damping;
    if tip_damping.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::DifferentialAlgebraic);
    }
    let model = generalized_model(rod, layout, q, qdot)?;
    stack(rod, layout, loads, q, qdot, &model)
}

fn stack(
    rod: &Rod,
    layout: &CableLayout,
    loads: &Loads,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    model: &GeneralizedModel,
) -> Result<AssembledOde> {
    let dof = rod.dof();
    let top = 6 * rod.sections();
    let mut mass = model.mass_all.clone();
    let mut damping = model.coriolis_all.clone();
    mass.rows_mut(top, 6).fill(0.0);
    damping.rows_mut(top, 6).fill(0.0);
    mass.view_mut((top, top), (6, 6)).copy_from(&model.tip_damping);
    damping.view_mut((top, top), (6, 6)).copy_from(&model.tip_stiffness);

    let mut forcing = DVector::zeros(dof);
    let interior = model.internal_force(q, &rod.rest_state(), qdot) + model.gravity_force(rod, &loads.gravity);
    forcing.rows_mut(0, top).copy_from(&interior);

    let mut input = model.actuation_all.clone();
    input.rows_mut(top, 6).fill(0.0);
    let mut input_rate = DMatrix::zeros(dof, layout.len());
    if !layout.is_empty() {
        let nodes = node_twists(rod, q)?;
        let lam = crate::actuation::actuation_matrix(layout, &nodes[rod.sections()], rod.length())?;
        input_rate.view_mut((top, 0), (6, layout.len())).copy_from(&(-lam));
    }
    Ok(AssembledOde { mass, damping, forcing, input, input_rate })
}

/// Cable tensions as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum TensionInput {
    Constant(Vec<f64>),
    /// Jumps from `before` to `after` at time `at`.
    Step {
        before: Vec<f64>,
        after: Vec<f64>,
        at: f64,
    },
    /// Linear ramp from `from` at `start` to `to` at `end`, constant outside.
    Ramp {
        from: Vec<f64>,
        to: Vec<f64>,
        start: f64,
        end: f64,
    },
}

impl TensionInput {
    pub fn value(&self, t: f64) -> Vec<f64> {
        match self {
            TensionInput::Constant(v) => v.clone(),
            TensionInput::Step { before, after, at } => {
                if t < *at {
                    before.clone()
                } else {
                    after.clone()
                }
            }
            TensionInput::Ramp { from, to, start, end } => {
                let s = ((t - start) / (end - start)).clamp(0.0, 1.0);
                from.iter().zip(to).map(|(a, b)| a + s * (b - a)).collect()
            }
        }
    }

    /// Ṫ(t); zero away from ramps (a step is a jump, not a rate).
    pub fn rate(&self, t: f64) -> Vec<f64> {
        match self {
            TensionInput::Ramp { from, to, start, end } if t >= *start && t < *end => {
                from.iter().zip(to).map(|(a, b)| (b - a) / (end - start)).collect()
            }
            _ => vec![0.0; self.len()],
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensionInput::Constant(v) => v.len(),
            TensionInput::Step { before, .. } => before.len(),
            TensionInput::Ramp { from, .. } => from.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, layout: &CableLayout) -> Result<()> {
        let lists: Vec<&Vec<f64>> = match self {
            TensionInput::Constant(v) => vec![v],
            TensionInput::Step { before, after, .. } => vec![before, after],
            TensionInput::Ramp { from, to, start, end } => {
                if !(end > start) {
                    return Err(Error::InvalidModel("a tension ramp must end after it starts".into()));
                }
                vec![from, to]
            }
        };
        for l in lists {
            if !l.is_empty() {
                crate::actuation::check_tensions(layout, l)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Keep every n-th state in the trajectory.
    pub sample_every: usize,
    /// ‖q̈‖ above this aborts the run.
    pub max_acceleration: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self { dt: 1e-3, t_end: 1.0, sample_every: 10, max_acceleration: 1e9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    pub kinetic: f64,
    pub elastic: f64,
    pub gravity: f64,
}

impl EnergyRecord {
    pub fn total(&self) -> f64 {
        self.kinetic + self.elastic + self.gravity
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// One record per step, at the start of the step.
    pub energy: Vec<EnergyRecord>,
    /// Change applied to ξ_N so the initial state meets the tip condition.
    pub initial_projection: f64,
    /// Largest tip-condition residual seen during the run.
    pub boundary_drift: f64,
}

/// Residual of `γ(L) ξ̇_N + Σ(L)(ξ_N − ξ₀_N) + Λ(L) T − F_tip`.
fn tip_condition(
    rod: &Rod,
    layout: &CableLayout,
    tip: &Twist,
    rate: &Twist,
    tensions: &[f64],
    load: &Wrench,
) -> Result<Wrench> {
    let n = rod.sections();
    let props = rod.properties_unchecked(rod.length());
    let act = if tensions.iter().any(|&t| t != 0.0) {
        actuation_wrench_with_slope(layout, tip, &Twist::zeros(), rod.length(), tensions)?.0
    } else {
        Wrench::zeros()
    };
    Ok(props.damping.component_mul(rate) + props.stiffness.component_mul(&(tip - rod.rest_node(n))) + act - load)
}

/// Newton on a 6-vector equation with a finite-difference Jacobian.
fn solve_tip(f: impl Fn(&Twist) -> Result<Wrench>, start: Twist, scale: f64) -> Result<Twist> {
    let mut x = start;
    let as_dyn = |v: &DVector<f64>| -> Result<DVector<f64>> {
        let t = Twist::from_column_slice(v.as_slice());
        Ok(DVector::from_column_slice(f(&t)?.as_slice()))
    };
    for _ in 0..30 {
        let r = f(&x)?;
        if r.norm() <= 1e-13 * scale {
            return Ok(x);
        }
        let xd = DVector::from_column_slice(x.as_slice());
        let jac = fd_jacobian(as_dyn, &xd)?;
        let step = solve_square(&jac, &DVector::from_column_slice(r.as_slice()), "tip condition Jacobian")?;
        x -= Twist::from_column_slice(step.as_slice());
        if step.norm() <= 1e-15 * (1.0 + x.norm()) {
            return Ok(x);
        }
    }
    let r = f(&x)?.norm();
    if r <= 1e-9 * scale {
        Ok(x)
    } else {
        Err(Error::NoConvergence { iterations: 30, residual: r / scale, history: vec![] })
    }
}

/// Integrates the cable-driven dynamics with a fixed step.
///
/// Interior nodes use a semi-implicit update: stiffness and damping matrices are
/// frozen over the step and treated implicitly, Coriolis and external terms
/// explicitly. The tip strain is advanced by implicit Euler on the undifferentiated
/// tip condition, so it cannot drift. Before the first step, ξ_N is projected onto
/// the tip condition for the given initial rate. Tensions are read from `input`;
/// those in `loads` are ignored.
pub fn simulate(
    rod: &Rod,
    layout: &CableLayout,
    loads: &Loads,
    input: &TensionInput,
    q0: &DVector<f64>,
    qdot0: &DVector<f64>,
    options: &SimulationOptions,
) -> Result<Trajectory> {
    let dof = rod.dof();
    for (what, v) in [("initial state", q0), ("initial velocities", qdot0)] {
        if v.len() != dof {
            return Err(Error::Dimension { what, expected: dof, found: v.len() });
        }
    }
    if !(options.dt > 0.0 && options.t_end >= 0.0 && options.sample_every >= 1) {
        return Err(Error::InvalidModel(format!("invalid simulation options {options:?}")));
    }
    if !input.is_empty() {
        input.check(layout)?;
    }
    let tip_props = rod.properties_unchecked(rod.length());
    if tip_props.damping.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::DifferentialAlgebraic);
    }
    let top = 6 * rod.sections();
    let scale = tip_props.stiffness.amax();
    let tip_of = |v: &DVector<f64>| Twist::from_column_slice(&v.as_slice()[top..]);
    let rest = rod.rest_state();
    let dt = options.dt;
    let tensions_at = |t: f64| if input.is_empty() { vec![0.0; layout.len()] } else { input.value(t) };

    let mut q = q0.clone();
    let mut qdot = qdot0.clone();
    let t0 = tensions_at(0.0);
    let rate0 = tip_of(&qdot);
    let projected = solve_tip(|x| tip_condition(rod, layout, x, &rate0, &t0, &loads.tip), tip_of(&q), scale)?;
    let initial_projection = (projected - tip_of(&q)).norm();
    q.rows_mut(top, 6).copy_from(&projected);

    let steps = (options.t_end / dt).round() as usize;
    let mut samples = vec![Sample { t: 0.0, q: q.clone(), qdot: qdot.clone() }];
    let mut energy = Vec::with_capacity(steps + 1);
    let mut drift: f64 = 0.0;
    for step in 0..=steps {
        let t = step as f64 * dt;
        let model = generalized_model(rod, layout, &q, &qdot)?;
        energy.push(EnergyRecord {
            t,
            kinetic: model.kinetic_energy(&qdot),
            elastic: model.elastic_energy,
            gravity: model.gravity_energy(&loads.gravity),
        });
        if step == steps {
            break;
        }
        let t1 = t + dt;
        let tens = tensions_at(t1);

        let tip_old = tip_of(&q);
        let tip_rate_old = tip_of(&qdot);
        let tip_new =
            solve_tip(|x| tip_condition(rod, layout, x, &((x - tip_old) / dt), &tens, &loads.tip), tip_old, scale)?;
        let tip_rate_new = (tip_new - tip_old) / dt;
        let tip_acc = (tip_rate_new - tip_rate_old) / dt;

        let stiff = model.stiffness();
        let damp = model.damping();
        let mass = model.mass();
        let k_aa = stiff.columns(0, top);
        let d_aa = damp.columns(0, top);
        let lhs = mass.columns(0, top) - d_aa * dt - k_aa * (dt * dt);
        let qdot_a = qdot.rows(0, top).into_owned();
        let d_tip = DVector::from_column_slice((tip_new - tip_old).as_slice());
        let d_tip_rate = DVector::from_column_slice((tip_rate_new - tip_rate_old).as_slice());
        let mut rhs = model.internal_force(&q, &rest, &qdot) + model.gravity_force(rod, &loads.gravity)
            - model.coriolis() * &qdot
            - mass.columns(top, 6) * DVector::from_column_slice(tip_acc.as_slice())
            + k_aa * &qdot_a * dt
            + stiff.columns(top, 6) * d_tip
            + damp.columns(top, 6) * d_tip_rate;
        if !tens.is_empty() {
            rhs += model.actuation() * DVector::from_column_slice(&tens);
        }
        let acc = solve_square(&lhs, &rhs, "interior mass matrix")?;
        let norm = acc.norm();
        if !(norm <= options.max_acceleration) {
            return Err(Error::BlowUp { t: t1, norm });
        }
        let new_rate = qdot_a + acc * dt;
        let new_pos = q.rows(0, top) + &new_rate * dt;
        q.rows_mut(0, top).copy_from(&new_pos);
        qdot.rows_mut(0, top).copy_from(&new_rate);
        q.rows_mut(top, 6).copy_from(&tip_new);
        qdot.rows_mut(top, 6).copy_from(&tip_rate_new);

        let r = tip_condition(rod, layout, &tip_new, &tip_rate_new, &tens, &loads.tip)?.norm() / scale;
        drift = drift.max(r);
        if (step + 1) % options.sample_every == 0 || step + 1 == steps {
            samples.push(Sample { t: t1, q: q.clone(), qdot: qdot.clone() });
        }
    }
    Ok(Trajectory { samples, energy, initial_projection, boundary_drift: drift })
}
