//! Material identification (E, G, ρ) from measured tip positions.
//!
//! Each equilibrium is eliminated by an inner static solve, so the outer problem
//! is a 3-parameter minimization of `Σᵢ ‖uᵢ(θ) − u_eiᵢ‖` over log-parameters.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::kinematics::end_effector;
use crate::rod::Material;
use crate::statics::{fd_jacobian, reduced_residual, solve_static, StaticProblem, Tolerances};

/// One loading case: cable tensions (N) and the measured tip position (m).
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub tensions: Vec<f64>,
    pub tip: Vector3<f64>,
}

/// Young's modulus (Pa), shear modulus (Pa) and density (kg/m³).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theta {
    pub young_modulus: f64,
    pub shear_modulus: f64,
    pub density: f64,
}

impl Theta {
    pub fn new(young_modulus: f64, shear_modulus: f64, density: f64) -> Self {
        Self { young_modulus, shear_modulus, density }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.young_modulus, self.shear_modulus, self.density)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    fn logs(&self) -> Vector3<f64> {
        self.as_vector().map(f64::ln)
    }

    fn from_logs(v: &Vector3<f64>) -> Self {
        Self::from_vector(&v.map(f64::exp))
    }

    fn check(&self) -> Result<()> {
        if self.as_vector().iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Identification(format!("material parameters must be positive, got {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: Theta,
    pub upper: Theta,
}

impl Default for Bounds {
    fn default() -> Self {
        Self { lower: Theta::new(1e4, 1e3, 500.0), upper: Theta::new(1e7, 5e6, 5000.0) }
    }
}

impl Bounds {
    fn clamp_logs(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let (lo, hi) = (self.lower.logs(), self.upper.logs());
        Vector3::from_fn(|i, _| v[i].clamp(lo[i], hi[i]))
    }

    fn contains(&self, t: &Theta) -> bool {
        let (v, lo, hi) = (t.as_vector(), self.lower.as_vector(), self.upper.as_vector());
        (0..3).all(|i| v[i] >= lo[i] && v[i] <= hi[i])
    }
}

/// Static problem for one experiment: the template with θ and the tensions swapped in.
fn experiment_problem(template: &StaticProblem, theta: &Theta, experiment: &Experiment) -> StaticProblem {
    let mut p = template.clone();
    let mut material = p.rod.material;
    material.young_modulus = theta.young_modulus;
    material.shear_modulus = theta.shear_modulus;
    material.density = theta.density;
    p.rod = p.rod.with_material(material);
    p.loads.tensions = experiment.tensions.clone();
    p
}

/// Objective value with the equilibria behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub theta: Theta,
    /// Σ of Euclidean tip errors (m).
    pub value: f64,
    pub tips: Vec<Vector3<f64>>,
    pub errors: Vec<f64>,
    /// Full equilibrium state per experiment.
    pub states: Vec<DVector<f64>>,
}

impl Evaluation {
    fn residual(&self, experiments: &[Experiment]) -> DVector<f64> {
        DVector::from_iterator(
            3 * experiments.len(),
            self.tips.iter().zip(experiments).flat_map(|(u, e)| (u - e.tip).iter().copied().collect::<Vec<_>>()),
        )
    }
}

/// Solves every experiment at `theta` and sums the tip errors.
///
/// `warm` optionally supplies one starting state per experiment.
pub fn objective(
    theta: &Theta,
    experiments: &[Experiment],
    template: &StaticProblem,
    warm: Option<&[DVector<f64>]>,
) -> Result<Evaluation> {
    theta.check()?;
    Material::new(theta.young_modulus, theta.shear_modulus, theta.density, template.rod.material.viscosity)?;
    let mut tips = Vec::with_capacity(experiments.len());
    let mut errors = Vec::with_capacity(experiments.len());
    let mut states = Vec::with_capacity(experiments.len());
    for (i, e) in experiments.iter().enumerate() {
        let mut p = experiment_problem(template, theta, e);
        if let Some(w) = warm {
            p.initial = w.get(i).cloned();
        }
        let sol = solve_static(&p).map_err(|err| Error::Identification(format!("experiment {}: {err}", i + 1)))?;
        let tip = end_effector(&p.rod, &sol.q)?;
        errors.push((tip - e.tip).norm());
        tips.push(tip);
        states.push(sol.q);
    }
    Ok(Evaluation { theta: *theta, value: errors.iter().sum(), tips, errors, states })
}

/// Predicted tips and errors for validation inputs.
pub fn validate(theta: &Theta, experiments: &[Experiment], template: &StaticProblem) -> Result<Evaluation> {
    objective(theta, experiments, template, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifyOptions {
    pub bounds: Bounds,
    pub max_iterations: usize,
    /// Stop when the objective falls below this value (m).
    pub objective_tol: f64,
    /// Stop when a step changes every log-parameter by less than this.
    pub step_tol: f64,
    /// Additional starting points, tried after the main one.
    pub extra_starts: Vec<Theta>,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        Self {
            bounds: Bounds::default(),
            max_iterations: 60,
            objective_tol: 1e-12,
            step_tol: 1e-10,
            extra_starts: Vec::new(),
        }
    }
}

/// Singular values of the tip-residual Jacobian in log-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RankProbe {
    pub singular_values: Vec<f64>,
    /// Smallest over largest singular value.
    pub ratio: f64,
    pub deficient: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationResult {
    pub theta: Theta,
    pub objective: f64,
    pub initial_objective: f64,
    pub evaluation: Evaluation,
    pub iterations: usize,
    /// Objective after each accepted step, starting with the initial value.
    pub history: Vec<f64>,
    pub rank: RankProbe,
    /// Index of the start that produced the result (0 is `theta_init`).
    pub start: usize,
}

/// Below this ratio of singular values the parameters are reported as not separable.
const RANK_RATIO: f64 = 1e-6;

/// Minimizes the summed tip error by a Levenberg–Marquardt loop on iteratively
/// reweighted least squares, with central differences in log-parameters.
pub fn identify(
    experiments: &[Experiment],
    template: &StaticProblem,
    theta_init: &Theta,
    options: &IdentifyOptions,
) -> Result<IdentificationResult> {
    if experiments.is_empty() {
        return Err(Error::Identification("no experiments given".into()));
    }
    let mut starts = vec![*theta_init];
    starts.extend(options.extra_starts.iter().copied());
    let mut best: Option<IdentificationResult> = None;
    let mut failures = Vec::new();
    for (index, start) in starts.iter().enumerate() {
        match descend(experiments, template, start, options) {
            Ok(mut r) => {
                r.start = index;
                if best.as_ref().is_none_or(|b| r.objective < b.objective) {
                    best = Some(r);
                }
            }
            Err(Error::Identification(msg)) => failures.push(format!("start {index}: {msg}")),
            Err(e) => failures.push(format!("start {index}: {e}")),
        }
    }
    best.ok_or_else(|| Error::Identification(format!("every start failed: {}", failures.join("; "))))
}

fn descend(
    experiments: &[Experiment],
    template: &StaticProblem,
    start: &Theta,
    options: &IdentifyOptions,
) -> Result<IdentificationResult> {
    start.check()?;
    if !options.bounds.contains(start) {
        return Err(Error::Identification(format!("start {start:?} lies outside the bounds")));
    }
    let mut current = objective(start, experiments, template, None)?;
    let initial_objective = current.value;
    let mut history = vec![current.value];
    let mut damping = 1e-3;
    let mut iterations = 0;
    let mut jac = residual_jacobian(experiments, template, &current)?;
    while iterations < options.max_iterations && current.value > options.objective_tol {
        iterations += 1;
        let r = current.residual(experiments);
        // Reweighting turns Σ‖rᵢ‖ into a weighted sum of squares with the same gradient.
        let floor = 1e-9 * (1.0 + current.value);
        let weights = DVector::from_iterator(r.len(), current.errors.iter().flat_map(|e| [1.0 / e.max(floor); 3]));
        let jw = DMatrix::from_fn(jac.nrows(), 3, |i, j| jac[(i, j)] * weights[i]);
        let normal: Matrix3<f64> = (jac.transpose() * &jw).fixed_view::<3, 3>(0, 0).into_owned();
        let gradient: Vector3<f64> = (jw.transpose() * &r).fixed_rows::<3>(0).into_owned();
        let logs = current.theta.logs();
        let mut accepted = None;
        for _ in 0..12 {
            let lhs = normal + Matrix3::from_diagonal(&normal.diagonal()) * damping;
            let Some(step) = lhs.lu().solve(&(-gradient)) else {
                damping *= 10.0;
                continue;
            };
            let trial_logs = options.bounds.clamp_logs(&(logs + step));
            let moved = (trial_logs - logs).amax();
            if moved < options.step_tol {
                break;
            }
            match objective(&Theta::from_logs(&trial_logs), experiments, template, Some(&current.states)) {
                Ok(trial) if trial.value < current.value => {
                    accepted = Some((trial, moved));
                    break;
                }
                _ => damping *= 10.0,
            }
        }
        let Some((next, moved)) = accepted else { break };
        damping = (damping / 10.0).max(1e-12);
        current = next;
        history.push(current.value);
        if moved < options.step_tol {
            break;
        }
        jac = residual_jacobian(experiments, template, &current)?;
    }
    let rank = rank_of(&jac);
    Ok(IdentificationResult {
        theta: current.theta,
        objective: current.value,
        initial_objective,
        evaluation: current,
        iterations,
        history,
        rank,
        start: 0,
    })
}

/// d(stacked tip residual)/d(log θ), central differences with step 1e-4.
fn residual_jacobian(experiments: &[Experiment], template: &StaticProblem, at: &Evaluation) -> Result<DMatrix<f64>> {
    let logs = at.theta.logs();
    let h = 1e-4;
    let mut jac = DMatrix::zeros(3 * experiments.len(), 3);
    for j in 0..3 {
        let mut plus = logs;
        plus[j] += h;
        let mut minus = logs;
        minus[j] -= h;
        let fp = objective(&Theta::from_logs(&plus), experiments, template, Some(&at.states))?;
        let fm = objective(&Theta::from_logs(&minus), experiments, template, Some(&at.states))?;
        jac.set_column(j, &((fp.residual(experiments) - fm.residual(experiments)) / (2.0 * h)));
    }
    Ok(jac)
}

fn rank_of(jac: &DMatrix<f64>) -> RankProbe {
    let sv = jac.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    RankProbe { singular_values: sv.iter().copied().collect(), ratio, deficient: ratio < RANK_RATIO }
}

/// Identifiability of θ from the given experiments at one parameter point.
pub fn rank_probe(experiments: &[Experiment], template: &StaticProblem, theta: &Theta) -> Result<RankProbe> {
    let at = objective(theta, experiments, template, None)?;
    Ok(rank_of(&residual_jacobian(experiments, template, &at)?))
}

/// Optimality conditions of the full-space problem at (θ, q₁ … q_N̄).
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// Multipliers of the scaled static constraints, one block per experiment.
    pub multipliers: Vec<DVector<f64>>,
    /// ∂ℒ/∂(log θ); zero at an interior optimum.
    pub parameter_stationarity: Vector3<f64>,
    /// Largest norm of ∂ℒ/∂qᵢ.
    pub state_stationarity: f64,
    /// Largest scaled static residual.
    pub feasibility: f64,
}

/// Recovers the multipliers from `∂f/∂qᵢ + (∂Hᵢ/∂qᵢ)ᵀ λᵢ = 0` and reports the
/// remaining stationarity and feasibility residuals of the Lagrangian
/// `ℒ = Σ‖uᵢ − u_eiᵢ‖ + Σ λᵢᵀ Hᵢ(θ, qᵢ)`.
pub fn kkt_check(
    theta: &Theta,
    states: &[DVector<f64>],
    experiments: &[Experiment],
    template: &StaticProblem,
) -> Result<KktReport> {
    if states.len() != experiments.len() {
        return Err(Error::Dimension { what: "equilibrium states", expected: experiments.len(), found: states.len() });
    }
    let mut multipliers = Vec::with_capacity(states.len());
    let mut parameter_stationarity = Vector3::zeros();
    let mut state_stationarity: f64 = 0.0;
    let mut feasibility: f64 = 0.0;
    for (e, q) in experiments.iter().zip(states) {
        let p = experiment_problem(template, theta, e);
        let z = p.selection.project(q)?;
        let constraint = |z: &DVector<f64>| reduced_residual(&p, z);
        feasibility = feasibility.max(constraint(&z)?.norm());
        let dh_dq = fd_jacobian(constraint, &z)?;

        let rest = p.rod.rest_state();
        let tip_error = |z: &DVector<f64>| -> Result<DVector<f64>> {
            let q = p.selection.lift(z, &rest)?;
            Ok(DVector::from_column_slice((end_effector(&p.rod, &q)? - e.tip).as_slice()))
        };
        let err = tip_error(&z)?;
        let norm = err.norm();
        let du_dq = fd_jacobian(tip_error, &z)?;
        let df_dq = if norm > 0.0 { du_dq.transpose() * (&err / norm) } else { DVector::zeros(z.len()) };

        let lambda = dh_dq
            .transpose()
            .lu()
            .solve(&(-&df_dq))
            .ok_or(Error::Singular { what: "static constraint Jacobian", condition: f64::INFINITY })?;
        state_stationarity = state_stationarity.max((&df_dq + dh_dq.transpose() * &lambda).norm());

        let logs = theta.logs();
        let h = 1e-4;
        for j in 0..3 {
            let mut plus = logs;
            plus[j] += h;
            let mut minus = logs;
            minus[j] -= h;
            let hp = reduced_residual(&experiment_problem(template, &Theta::from_logs(&plus), e), &z)?;
            let hm = reduced_residual(&experiment_problem(template, &Theta::from_logs(&minus), e), &z)?;
            parameter_stationarity[j] += lambda.dot(&((hp - hm) / (2.0 * h)));
        }
        multipliers.push(lambda);
    }
    Ok(KktReport { multipliers, parameter_stationarity, state_stationarity, feasibility })
}

/// Synthetic measurements: the model's own tips at `theta` for each tension set.
pub fn synthesize(theta: &Theta, tensions: &[Vec<f64>], template: &StaticProblem) -> Result<Vec<Experiment>> {
    let placeholders: Vec<Experiment> =
        tensions.iter().map(|t| Experiment { tensions: t.clone(), tip: Vector3::zeros() }).collect();
    let eval = objective(theta, &placeholders, template, None)?;
    Ok(placeholders.into_iter().zip(eval.tips).map(|(e, tip)| Experiment { tip, ..e }).collect())
}

/// Tight default tolerances for inner solves, so finite differences in θ are clean.
pub fn inner_tolerances() -> Tolerances {
    Tolerances { residual: 1e-11, ..Tolerances::default() }
}
