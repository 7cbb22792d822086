use nalgebra::{DVector, Vector3};
use plsrod::actuation::CableLayout;
use plsrod::dynamics::{simulate, SimulationOptions, TensionInput};
use plsrod::identification::{identify, inner_tolerances, validate, IdentifyOptions, Theta};
use plsrod::kinematics::end_effector;
use plsrod::rod::Rod;
use plsrod::se3::Wrench;
use plsrod::statics::{load_sweep, solve_static, StaticProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{bounds, selection, InputConfig, Overrides, Scenario, ScenarioConfig, StartState};
use crate::error::CliError;
use crate::experiments;
use crate::output::{centerline_header, centerline_rows, header, num, Artifacts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Static equilibrium: solution JSON and centerline CSV.
    Static,
    /// Tip-load sweep with warm starts: one centerline CSV per load.
    Sweep,
    /// Dynamic rollout: trajectory CSV and energy JSON.
    Dynamic,
    /// Tip positions of several models side by side.
    Compare,
    /// Material parameter identification from an experiment table.
    Identify,
    /// Per-experiment tip errors for given material parameters.
    Validate,
}

pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub overrides: Overrides,
    pub seed: u64,
}

impl Context<'_> {
    fn config(&self) -> &ScenarioConfig {
        &self.scenario.config
    }

    fn rod_and_cables(&self) -> Result<(Rod, CableLayout), CliError> {
        let rod = self.config().rod(self.overrides)?;
        let layout = self.config().layout(&rod)?;
        Ok((rod, layout))
    }
}

fn section<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    value.as_ref().ok_or_else(|| CliError::config(name, format!("the `{name}` command needs a [{name}] section")))
}

fn point(v: &Vector3<f64>) -> Value {
    json!([v.x, v.y, v.z])
}

/// Runs `command` and returns a JSON summary for stdout.
pub fn run(command: Command, ctx: &Context, out: &mut Artifacts) -> Result<Value, CliError> {
    match command {
        Command::Static => run_static(ctx, out),
        Command::Sweep => run_sweep(ctx, out),
        Command::Dynamic => run_dynamic(ctx, out),
        Command::Compare => run_compare(ctx, out),
        Command::Identify => run_identify(ctx, out),
        Command::Validate => run_validate(ctx, out),
    }
}

fn run_static(ctx: &Context, out: &mut Artifacts) -> Result<Value, CliError> {
    let cfg = ctx.config();
    let run = section(&cfg.static_run, "static")?;
    let (rod, layout) = ctx.rod_and_cables()?;
    let problem = StaticProblem::new(rod.clone(), layout, cfg.loads(&run.tensions, &run.tip_wrench))
        .with_selection(selection(&run.mode, "static.mode")?)
        .with_tolerances(cfg.tolerances());
    let sol = solve_static(&problem)?;
    let tip = sol.end_effector(&rod)?;
    let summary = json!({
        "mode": run.mode,
        "end_effector": point(&tip),
        "residual": sol.residual,
        "iterations": sol.iterations,
        "continuation": sol.continuation,
    });
    let mut full = summary.clone();
    full["history"] = json!(sol.history);
    full["q"] = json!(sol.q.as_slice());
    out.json("solution.json", &full)?;
    out.csv("centerline.csv", &centerline_header(), &centerline_rows(&rod, &sol.q, run.samples)?)?;
    Ok(summary)
}

fn run_sweep(ctx: &Context, out: &mut Artifacts) -> Result<Value, CliError> {
    let cfg = ctx.config();
    let run = section(&cfg.sweep, "sweep")?;
    if run.tip_wrenches.is_empty() {
        return Err(CliError::config("sweep.tip_wrenches", "needs at least one load"));
    }
    let (rod, layout) = ctx.rod_and_cables()?;
    let problem = StaticProblem::new(rod.clone(), layout, cfg.loads(&run.tensions, &[0.0; 6]))
        .with_selection(selection(&run.mode, "sweep.mode")?)
        .with_tolerances(cfg.tolerances());
    let schedule: Vec<Wrench> = run.tip_wrenches.iter().map(|w| Wrench::from_column_slice(w)).collect();
    let sweep = load_sweep(&problem, &schedule);
    let mut rows = Vec::new();
    for (i, (sol, load)) in sweep.solutions.iter().zip(&schedule).enumerate() {
        let tip = sol.end_effector(&rod)?;
        let mut row = vec![i.to_string()];
        row.extend(load.iter().chain(tip.iter()).map(|v| num(*v)));
        row.extend([sol.iterations.to_string(), num(sol.residual)]);
        rows.push(row);
        out.csv(&format!("sweep_{i:03}.csv"), &centerline_header(), &centerline_rows(&rod, &sol.q, run.samples)?)?;
    }
    let names = ["step", "m_x", "m_y", "m_z", "f_x", "f_y", "f_z", "x", "y", "z", "iterations", "residual"];
    out.csv("sweep.csv", &header(&names), &rows)?;
    match sweep.error {
        Some(e) => Err(e.into()),
        None => Ok(json!({ "loads": schedule.len() })),
    }
}

fn tension_input(input: &Option<InputConfig>) -> TensionInput {
    match input.clone() {
        None => TensionInput::Constant(Vec::new()),
        Some(InputConfig::Constant { tensions }) => TensionInput::Constant(tensions),
        Some(InputConfig::Step { before, after, at }) => TensionInput::Step { before, after, at },
        Some(InputConfig::Ramp { from, to, start, end }) => TensionInput::Ramp { from, to, start, end },
    }
}

fn run_dynamic(ctx: &Context, out: &mut Artifacts) -> Result<Value, CliError> {
    let cfg = ctx.config();
    let run = section(&cfg.dynamic, "dynamic")?;
    let (rod, layout) = ctx.rod_and_cables()?;
    let input = tension_input(&run.input);
    let loads = cfg.loads(&[], &[0.0; 6]);
    let q0 = match run.start {
        StartState::Rest => rod.rest_state(),
        StartState::Equilibrium => {
            let at_start = StaticProblem::new(rod.clone(), layout.clone(), cfg.loads(&input.value(0.0), &[0.0; 6]))
                .with_tolerances(cfg.tolerances());
            solve_static(&at_start)?.q
        }
    };
    if !(run.initial_rate.is_finite() && run.initial_rate >= 0.0) {
        return Err(CliError::config("dynamic.initial_rate", "must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let a = run.initial_rate;
    let qdot0 = DVector::from_fn(rod.dof(), |_, _| if a > 0.0 { rng.gen_range(-a..a) } else { 0.0 });
    let options = SimulationOptions {
        dt: run.dt,
        t_end: run.t_end,
        sample_every: run.sample_every,
        max_acceleration: run.max_acceleration,
    };
    let traj = simulate(&rod, &layout, &loads, &input, &q0, &qdot0, &options)?;

    let mut names = header(&["t", "x", "y", "z"]);
    names.extend((0..rod.dof()).map(|i| format!("q{i}")));
    let rows = traj
        .samples
        .iter()
        .map(|s| {
            let tip = end_effector(&rod, &s.q)?;
            let mut row: Vec<String> = [s.t, tip.x, tip.y, tip.z].iter().map(|v| num(*v)).collect();
            row.extend(s.q.iter().map(|v| num(*v)));
            Ok(row)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    out.csv("trajectory.csv", &names, &rows)?;

    let largest_gain = traj.energy.windows(2).map(|w| w[1].total() - w[0].total()).fold(f64::NEG_INFINITY, f64::max);
    let summary = json!({
        "samples": traj.samples.len(),
        "final_end_effector": point(&end_effector(&rod, &traj.samples.last().map(|s| s.q.clone()).unwrap_or(q0))?),
        "initial_projection": traj.initial_projection,
        "boundary_drift": traj.boundary_drift,
        "largest_step_energy_gain": if largest_gain.is_finite() { json!(largest_gain) } else { Value::Null },
    });
    let mut energy = summary.clone();
    energy["records"] = traj
        .energy
        .iter()
        .map(|e| json!({ "t": e.t, "kinetic": e.kinetic, "elastic": e.elastic, "gravity": e.gravity, "total": e.total() }))
        .collect();
    out.json("energy.json", &energy)?;
    Ok(summary)
}

fn run_compare(ctx: &Context, out: &mut Artifacts) -> Result<Value, CliError> {
    let cfg = ctx.config();
    let run = section(&cfg.compare, "compare")?;
    for key in run.reference.keys() {
        if !run.models.contains(key) {
            return Err(CliError::config(&format!("compare.reference.{key}"), "not one of `compare.models`"));
        }
    }
    let (rod, layout) = ctx.rod_and_cables()?;
    let loads = cfg.loads(&run.tensions, &run.tip_wrench);
    let unit = run.reference_unit.factor();
    let mut rows = Vec::new();
    let mut summary = serde_json::Map::new();
    for (i, model) in run.models.iter().enumerate() {
        let tip = if model == "pcs" {
            plsrod::pcs::solve_static(&rod, &layout, &loads, cfg.tolerances())?.end_effector
        } else {
            let problem = StaticProblem::new(rod.clone(), layout.clone(), loads.clone())
                .with_selection(selection(model, &format!("compare.models[{i}]"))?)
                .with_tolerances(cfg.tolerances());
            solve_static(&problem)?.end_effector(&rod)?
        };
        let mut row = vec![model.clone()];
        row.extend(tip.iter().map(|v| num(*v)));
        let mut entry = json!({ "end_effector": point(&tip) });
        match run.reference.get(model) {
            Some(r) => {
                let reference = Vector3::from(*r) * unit;
                let error = (tip - reference).norm();
                let relative = error / reference.norm();
                row.extend(reference.iter().chain([error, relative].iter()).map(|v| num(*v)));
                entry["error"] = json!(error);
                entry["relative_error"] = json!(relative);
            }
            None => row.extend(std::iter::repeat_n(String::new(), 5)),
        }
        rows.push(row);
        summary.insert(model.clone(), entry);
    }
    let names = ["model", "x", "y", "z", "ref_x", "ref_y", "ref_z", "error", "relative_error"];
    out.csv("compare.csv", &header(&names), &rows)?;
    Ok(Value::Object(summary))
}

fn material_theta(cfg: &ScenarioConfig) -> Result<Theta, CliError> {
    let m = cfg.material()?;
    Ok(Theta::new(m.young_modulus, m.shear_modulus, m.density))
}

fn identification_template(ctx: &Context) -> Result<StaticProblem, CliError> {
    let (rod, layout) = ctx.rod_and_cables()?;
    let loads = ctx.config().loads(&[], &[0.0; 6]);
    Ok(StaticProblem::new(rod, layout, loads).with_tolerances(inner_tolerances()))
}

fn theta_json(t: &Theta) -> Value {
    json!({ "young_modulus": t.young_modulus, "shear_modulus": t.shear_modulus, "density": t.density })
}

fn run_identify(ctx: &Context, out: &mut Artifacts) -> Result<Value, CliError> {
    let cfg = ctx.config();
    let run = section(&cfg.identify, "identify")?;
    let template = identification_template(ctx)?;
    let data = experiments::read(&ctx.scenario.resolve(&run.experiments), template.layout.len())?;
    let initial = match &run.initial {
        Some(t) => t.theta("identify.initial")?,
        None => material_theta(cfg)?,
    };
    let bounds = bounds(run)?;
    let mut extra_starts = run
        .extra_starts
        .iter()
        .enumerate()
        .map(|(i, t)| t.theta(&format!("identify.extra_starts[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let (lo, hi) = (bounds.lower.as_vector(), bounds.upper.as_vector());
    for _ in 0..run.random_starts {
        let v = Vector3::from_fn(|i, _| (lo[i].ln() + rng.gen::<f64>() * (hi[i].ln() - lo[i].ln())).exp());
        extra_starts.push(Theta::from_vector(&v));
    }
    let mut options = IdentifyOptions { bounds, extra_starts, ..IdentifyOptions::default() };
    if let Some(n) = run.max_iterations {
        options.max_iterations = n;
    }
    let result = identify(&data, &template, &initial, &options)?;
    let summary = json!({
        "theta": theta_json(&result.theta),
        "objective": result.objective,
        "initial_objective": result.initial_objective,
        "iterations": result.iterations,
        "start": result.start,
        "rank_deficient": result.rank.deficient,
    });
    let mut full = summary.clone();
    full["history"] = json!(result.history);
    full["errors"] = json!(result.evaluation.errors);
    full["tips"] = result.evaluation.tips.iter().map(point).collect();
    full["singular_values"] = json!(result.rank.singular_values);
    full["singular_value_ratio"] = json!(result.rank.ratio);
    out.json("theta.json", &full)?;
    Ok(summary)
}

fn run_validate(ctx: &Context, out: &mut Artifacts) -> Result<Value, CliError> {
    let cfg = ctx.config();
    let run = section(&cfg.validate, "validate")?;
    let template = identification_template(ctx)?;
    let cables = template.layout.len();
    let data = experiments::read(&ctx.scenario.resolve(&run.experiments), cables)?;
    let theta = match &run.theta {
        Some(t) => t.theta("validate.theta")?,
        None => material_theta(cfg)?,
    };
    let mut names = vec!["experiment".to_string()];
    names.extend((1..=cables).map(|i| format!("t{i}")));
    names.extend(header(&[
        "measured_x",
        "measured_y",
        "measured_z",
        "model_x",
        "model_y",
        "model_z",
        "error",
        "status",
    ]));
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut failed = Vec::new();
    // One solve per experiment so a missing equilibrium only blanks its own row.
    for (i, e) in data.iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(e.tensions.iter().chain(e.tip.iter()).map(|v| num(*v)));
        match validate(&theta, std::slice::from_ref(e), &template) {
            Ok(eval) => {
                row.extend(eval.tips[0].iter().chain([eval.errors[0]].iter()).map(|v| num(*v)));
                row.push("ok".into());
                errors.push(eval.errors[0]);
            }
            Err(err) => {
                let reason = match err {
                    plsrod::Error::Identification(m) => m.trim_start_matches("experiment 1: ").to_string(),
                    other => other.to_string(),
                };
                row.extend(std::iter::repeat_n(String::new(), 4));
                row.push(reason.clone());
                failed.push(format!("experiment {}: {reason}", i + 1));
            }
        }
        rows.push(row);
    }
    out.csv("validation.csv", &names, &rows)?;
    if !failed.is_empty() {
        return Err(CliError::Unsolved(format!("validation incomplete: {}", failed.join("; "))));
    }
    Ok(json!({
        "theta": theta_json(&theta),
        "total_error": errors.iter().sum::<f64>(),
        "largest_error": errors.iter().cloned().fold(0.0, f64::max),
    }))
}
