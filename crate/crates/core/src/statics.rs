//! Static equilibrium under gravity, tip loads and cable tensions.
//!
//! The residual is the weak form of the Cosserat balance law over the linear strain
//! field, with node N replaced by the tip boundary condition.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::actuation::{actuation_wrench_with_slope, gravity_wrench, CableLayout, Loads};
use crate::error::{Error, Result};
use crate::kinematics::{end_effector, node_twists, project_density, DensityPoint};
use crate::reduction::{tip_constraint_wrench, ModeSelection};
use crate::rod::Rod;
use crate::se3::{coad_mul, Twist, Wrench};

/// Stopping rules for the Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Bound on the scaled residual norm.
    pub residual: f64,
    /// Relative step size below which the iteration is declared stalled.
    pub step: f64,
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { residual: 1e-8, step: 1e-14, max_iterations: 50 }
    }
}

impl Tolerances {
    fn check(&self) -> Result<()> {
        if !(self.residual > 0.0 && self.step > 0.0 && self.max_iterations >= 1) {
            return Err(Error::InvalidModel(format!("invalid tolerances {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticProblem {
    pub rod: Rod,
    pub layout: CableLayout,
    pub selection: ModeSelection,
    pub loads: Loads,
    /// Full-length starting state; the rest state when `None`.
    pub initial: Option<DVector<f64>>,
    pub tolerances: Tolerances,
}

impl StaticProblem {
    pub fn new(rod: Rod, layout: CableLayout, loads: Loads) -> Self {
        Self { rod, layout, selection: ModeSelection::full(), loads, initial: None, tolerances: Tolerances::default() }
    }

    pub fn with_selection(mut self, selection: ModeSelection) -> Self {
        self.selection = selection;
        self
    }

    pub fn with_initial(mut self, q: DVector<f64>) -> Self {
        self.initial = Some(q);
        self
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    /// Number of unknowns after mode reduction.
    pub fn unknowns(&self) -> usize {
        self.selection.per_node() * self.rod.nodes()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticSolution {
    /// Equilibrium strains for all nodes, constrained slots included.
    pub q: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Scaled residual norm at the start of each Newton iteration and at exit.
    pub history: Vec<f64>,
    /// Whether the solve fell back to load continuation.
    pub continuation: bool,
}

impl StaticSolution {
    pub fn end_effector(&self, rod: &Rod) -> Result<Vector3<f64>> {
        end_effector(rod, &self.q)
    }
}

/// Unscaled equilibrium residual for every node block.
///
/// Rows of node n < N hold `−∫ Jₙᵀ (F_i′ − ad_ξᵀ F_i + F̄_e) dX` with the internal wrench
/// `F_i = Σ(ξ − ξ₀) + Λ T`. The last block holds the tip condition
/// `Σ(L)(ξ_N − ξ₀_N) + Λ(L) T − F_tip`. For a reduced selection the constrained part
/// of the tip wrench is added to the integral rows through J(L)ᵀ, so that projecting
/// onto the allowed components gives the reduced equilibrium.
pub fn static_residual(problem: &StaticProblem, q: &DVector<f64>) -> Result<DVector<f64>> {
    let rod = &problem.rod;
    let loads = &problem.loads;
    check_loads(problem)?;
    let tip_load = if problem.selection.is_full() {
        Wrench::zeros()
    } else {
        let w = tip_constraint_wrench(rod, &problem.layout, loads, q)?;
        let mut c = Wrench::zeros();
        for &i in problem.selection.constrained() {
            c[i] = w[i];
        }
        c
    };
    let cables = loads.has_cable_load();
    let density = |p: &DensityPoint| -> Result<Wrench> {
        let section = p.interp.section;
        let props = rod.properties_unchecked(p.x);
        let rest = rod.rest_strain_in(section, p.x);
        let rest_slope = (rod.rest_node(section + 1) - rod.rest_node(section)) / rod.partition.section_length(section);
        let strain = p.strain - rest;
        let (act, act_slope) = if cables {
            actuation_wrench_with_slope(&problem.layout, &p.strain, &p.strain_slope, p.x, &loads.tensions)?
        } else {
            (Wrench::zeros(), Wrench::zeros())
        };
        let internal = props.stiffness.component_mul(&strain) + act;
        let internal_slope = rod.stiffness_slope(p.x).component_mul(&strain)
            + props.stiffness.component_mul(&(p.strain_slope - rest_slope))
            + act_slope;
        Ok(internal_slope - coad_mul(&p.strain, &internal) + gravity_wrench(&props, &p.pose, &loads.gravity))
    };
    let mut r = -project_density(rod, q, density, &tip_load)?;

    let nodes = node_twists(rod, q)?;
    let n = rod.sections();
    let length = rod.length();
    let tip_props = rod.properties_unchecked(length);
    let act = if cables {
        actuation_wrench_with_slope(&problem.layout, &nodes[n], &Twist::zeros(), length, &loads.tensions)?.0
    } else {
        Wrench::zeros()
    };
    let tip = tip_props.stiffness.component_mul(&(nodes[n] - rod.rest_node(n))) + act - loads.tip;
    r.fixed_rows_mut::<6>(6 * n).copy_from(&tip);
    Ok(r)
}

fn check_loads(problem: &StaticProblem) -> Result<()> {
    if problem.loads.tensions.is_empty() {
        return Ok(());
    }
    crate::actuation::check_tensions(&problem.layout, &problem.loads.tensions)
}

/// Row weights that make the residual dimensionless: moment rows by EJ_y(0), force
/// rows by EA(0)·L for the integral blocks; EJ_y(0)/L and EA(0) for the tip block.
pub fn residual_scale(rod: &Rod) -> DVector<f64> {
    let props = rod.properties_unchecked(0.0);
    let (bend, axial) = (props.stiffness[1], props.stiffness[3]);
    let length = rod.length();
    let tip = rod.sections();
    DVector::from_fn(rod.dof(), |i, _| {
        let moment = i % 6 < 3;
        match (i / 6 == tip, moment) {
            (false, true) => 1.0 / bend,
            (false, false) => 1.0 / (axial * length),
            (true, true) => length / bend,
            (true, false) => 1.0 / axial,
        }
    })
}

/// Scaled residual in the reduced coordinates q̄.
pub fn reduced_residual(problem: &StaticProblem, reduced: &DVector<f64>) -> Result<DVector<f64>> {
    let rest = problem.rod.rest_state();
    let q = problem.selection.lift(reduced, &rest)?;
    let r = static_residual(problem, &q)?.component_mul(&residual_scale(&problem.rod));
    problem.selection.project(&r)
}

/// Solves for equilibrium by damped Newton with a finite-difference Jacobian.
///
/// If the direct solve fails, the loads are ramped up from the rest state with an
/// adaptive increment that halves after each failed solve.
pub fn solve_static(problem: &StaticProblem) -> Result<StaticSolution> {
    problem.tolerances.check()?;
    let rest = problem.rod.rest_state();
    let start = match &problem.initial {
        Some(q) if q.len() != rest.len() => {
            return Err(Error::Dimension { what: "initial state", expected: rest.len(), found: q.len() })
        }
        Some(q) => q.clone(),
        None => rest.clone(),
    };
    let z0 = problem.selection.project(&start)?;
    let z_rest = problem.selection.project(&rest)?;
    let residual = |loads: &Loads, z: &DVector<f64>| {
        let mut stage = problem.clone();
        stage.loads = loads.clone();
        reduced_residual(&stage, z)
    };
    let outcome = solve_with_continuation(residual, &problem.loads, z0, z_rest, problem.tolerances)?;
    Ok(StaticSolution {
        q: problem.selection.lift(&outcome.z, &rest)?,
        residual: outcome.residual,
        iterations: outcome.iterations,
        converged: true,
        history: outcome.history,
        continuation: outcome.continuation,
    })
}

#[derive(Debug)]
pub(crate) struct NewtonOutcome {
    pub z: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
    pub continuation: bool,
}

/// Newton from `z0` at the full loads; on failure, a 10-step load ramp from `z_rest`.
pub(crate) fn solve_with_continuation(
    residual: impl Fn(&Loads, &DVector<f64>) -> Result<DVector<f64>>,
    loads: &Loads,
    z0: DVector<f64>,
    z_rest: DVector<f64>,
    tol: Tolerances,
) -> Result<NewtonOutcome> {
    match newton(|z| residual(loads, z), z0, tol) {
        Ok(out) => Ok(out),
        Err(first @ (Error::Dimension { .. } | Error::InvalidModel(_))) => Err(first),
        Err(_) => {
            // Adaptive load ramp: halve the increment on failure, grow it after a success.
            let mut total =
                NewtonOutcome { z: z_rest, iterations: 0, residual: 0.0, history: Vec::new(), continuation: true };
            let (mut reached, mut increment) = (0.0_f64, 0.1_f64);
            while reached < 1.0 {
                let target = (reached + increment).min(1.0);
                match newton(|z| residual(&loads.scaled(target), z), total.z.clone(), tol) {
                    Ok(out) => {
                        total.z = out.z;
                        total.iterations += out.iterations;
                        total.history.extend(out.history);
                        total.residual = out.residual;
                        reached = target;
                        increment = (increment * 1.5).min(0.25);
                    }
                    Err(e @ (Error::Dimension { .. } | Error::InvalidModel(_))) => return Err(e),
                    Err(e) if increment < MIN_LOAD_INCREMENT => return Err(e),
                    Err(_) => increment *= 0.5,
                }
            }
            Ok(total)
        }
    }
}

/// Smallest load-ramp increment before continuation gives up.
const MIN_LOAD_INCREMENT: f64 = 1e-4;

fn newton(
    residual: impl Fn(&DVector<f64>) -> Result<DVector<f64>>,
    mut z: DVector<f64>,
    tol: Tolerances,
) -> Result<NewtonOutcome> {
    let mut r = residual(&z)?;
    let mut norm = r.norm();
    let mut history = vec![norm];
    let done =
        |z, iterations, residual, history| Ok(NewtonOutcome { z, iterations, residual, history, continuation: false });
    for iteration in 0..tol.max_iterations {
        if norm <= tol.residual {
            return done(z, iteration, norm, history);
        }
        let jac = fd_jacobian(&residual, &z)?;
        let step = solve_linear(jac, &r)?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = &z - &step * lambda;
            if let Ok(rt) = residual(&trial) {
                let nt = rt.norm();
                if nt.is_finite() && nt < norm {
                    accepted = Some((trial, rt, nt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((trial, rt, nt)) = accepted else {
            return Err(Error::NoConvergence { iterations: iteration + 1, residual: norm, history });
        };
        let moved = (&trial - &z).norm();
        z = trial;
        r = rt;
        norm = nt;
        history.push(norm);
        if moved <= tol.step * (1.0 + z.norm()) && norm > tol.residual {
            return Err(Error::NoConvergence { iterations: iteration + 1, residual: norm, history });
        }
    }
    if norm <= tol.residual {
        return done(z, tol.max_iterations, norm, history);
    }
    Err(Error::NoConvergence { iterations: tol.max_iterations, residual: norm, history })
}

/// Central differences with per-coordinate step 1e-6·max(1, |z_i|).
pub(crate) fn fd_jacobian(
    residual: impl Fn(&DVector<f64>) -> Result<DVector<f64>>,
    z: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = z.len();
    let mut jac = DMatrix::zeros(0, 0);
    let mut probe = z.clone();
    for j in 0..n {
        let h = 1e-6 * z[j].abs().max(1.0);
        probe[j] = z[j] + h;
        let plus = residual(&probe)?;
        probe[j] = z[j] - h;
        let minus = residual(&probe)?;
        probe[j] = z[j];
        if j == 0 {
            jac = DMatrix::zeros(plus.len(), n);
        }
        jac.set_column(j, &((plus - minus) / (2.0 * h)));
    }
    Ok(jac)
}

fn solve_linear(jac: DMatrix<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
    let sv = jac.clone().singular_values();
    let (max, min) = (sv.max(), sv.min());
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition < 1e14) {
        return Err(Error::Singular { what: "Newton matrix", condition });
    }
    match jac.lu().solve(r) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x),
        _ => Err(Error::Singular { what: "Newton matrix", condition }),
    }
}

/// Solutions of a tip-load sweep, possibly cut short.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub solutions: Vec<StaticSolution>,
    /// Why the sweep stopped early, if it did.
    pub error: Option<Error>,
}

/// Solves for each tip wrench in turn, starting every solve from the previous equilibrium.
pub fn load_sweep(problem: &StaticProblem, schedule: &[Wrench]) -> Sweep {
    let mut solutions = Vec::with_capacity(schedule.len());
    let mut current = problem.clone();
    for tip in schedule {
        current.loads.tip = *tip;
        match solve_static(&current) {
            Ok(sol) => {
                current.initial = Some(sol.q.clone());
                solutions.push(sol);
            }
            Err(e) => return Sweep { solutions, error: Some(e) },
        }
    }
    Sweep { solutions, error: None }
}
