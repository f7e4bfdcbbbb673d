//! Subcommand implementations. Each returns `Outcome::Pass` (exit 0) or
//! `Outcome::Fail` (exit 1, a quantitative bound was violated); usage and
//! configuration problems surface as errors (exit 2).

use std::fs;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde_json::json;

use slowshadow::planner::{Planner, PlannerError};
use slowshadow::spanning::certify_gradients;
use slowshadow::symbolic::compute_constants;
use slowshadow::verify::{
    epsilon_sweep, same_code_drift_experiment, shadow_error, uniform_closeness_experiment,
};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

/// Writes all artifacts of one run into a directory named by command and
/// timestamp; file names carry the seed, contents are timestamp-free.
pub struct OutputWriter {
    run_dir: PathBuf,
    seed: u64,
}

impl OutputWriter {
    pub fn create(root: &str, command: &str, seed: u64) -> Result<Self> {
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut run_dir = PathBuf::from(root).join(format!("{command}-{stamp}"));
        let mut suffix = 1;
        while run_dir.exists() {
            suffix += 1;
            run_dir = PathBuf::from(root).join(format!("{command}-{stamp}-{suffix}"));
        }
        fs::create_dir_all(&run_dir)
            .with_context(|| format!("cannot create output directory {}", run_dir.display()))?;
        Ok(Self { run_dir, seed })
    }

    pub fn write(&self, name: &str, ext: &str, contents: &str) -> Result<PathBuf> {
        let path = self.run_dir.join(format!("{name}_seed{}.{ext}", self.seed));
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, "json", &text)
    }
}

pub fn cmd_check_a3(config: &RunConfig, out: &OutputWriter) -> Result<Outcome> {
    // The check itself accepts any action count: too few actions is a
    // verdict (unsatisfiable), not a configuration error.
    let (fields, domain) = config.field_parts()?;
    let grid = domain.grid(config.planner.grid_resolution);
    let mut points = Vec::with_capacity(grid.len());
    let mut all_satisfied = true;
    for point in grid {
        let gradients = fields
            .iter()
            .map(|f| f.grad_action(&point, &domain))
            .collect::<Result<Vec<_>, _>>()?;
        let certificate = certify_gradients(&gradients);
        all_satisfied &= certificate.satisfied;
        points.push(json!({ "point": point, "certificate": certificate }));
    }
    let satisfied = points
        .iter()
        .filter(|p| p["certificate"]["satisfied"].as_bool().unwrap_or(false))
        .count();
    let report = json!({
        "config": config.as_json(),
        "resolution": config.planner.grid_resolution,
        "points_total": points.len(),
        "points_satisfied": satisfied,
        "all_satisfied": all_satisfied,
        "grid": points,
    });
    let path = out.write_json("check_a3", &report)?;
    println!(
        "spanning condition: {}/{} grid points satisfied",
        satisfied,
        points.len()
    );
    println!("report: {}", path.display());
    if all_satisfied {
        println!("check-a3: PASS");
        Ok(Outcome::Pass)
    } else {
        println!("check-a3: FAIL — condition does not hold on the whole grid");
        Ok(Outcome::Fail)
    }
}

pub fn cmd_shadow(config: &RunConfig, out: &OutputWriter) -> Result<Outcome> {
    let params = config.reduced_map()?;
    let curve = config.curve()?;
    let planner = Planner::new(params.clone(), config.planner.l)?
        .with_region_resolution(config.planner.grid_resolution)
        .with_stall_horizon(config.planner.stall_horizon);
    let constants = planner.constants().clone();
    // Gate ε before any computation, quoting the computed threshold.
    if config.model.epsilon > constants.eps_usable {
        bail!(
            "ε = {} exceeds the usable bound {:.6e} for this model; lower model.epsilon",
            config.model.epsilon,
            constants.eps_usable
        );
    }

    let result = match planner.shadow_curve(&curve, config.planner.k_max) {
        Ok(result) => result,
        Err(err @ PlannerError::ShadowingFailure { .. })
        | Err(err @ PlannerError::DisplacementTooLarge { .. }) => {
            println!("shadow: FAIL — {err}");
            return Ok(Outcome::Fail);
        }
        Err(other) => return Err(other.into()),
    };
    let max_error = shadow_error(&curve, &result, config.planner.samples_per_interval)?;
    let bound = constants.shadowing_constant() * result.epsilon;

    let csv = result.to_csv(params.fields());
    let csv_path = out.write("trajectory", "csv", &csv)?;
    let summary = json!({
        "config": config.as_json(),
        "constants": constants,
        "epsilon": result.epsilon,
        "waypoints": result.waypoints.len(),
        "final_section": result.final_section(),
        "waypoint_errors": result.waypoint_errors,
        "waypoint_pre_errors": result.waypoint_pre_errors,
        "max_waypoint_error": result.max_waypoint_error,
        "max_shadow_error": max_error,
        "bound": bound,
        "fitted_c": max_error / result.epsilon,
        "code": result.code.display(&params.fields().labels()),
    });
    let summary_path = out.write_json("shadow_summary", &summary)?;
    println!(
        "max shadow error {max_error:.6e} vs Cε = {bound:.6e} (C = {:.3})",
        constants.shadowing_constant()
    );
    println!("trajectory: {}", csv_path.display());
    println!("summary:    {}", summary_path.display());
    if max_error <= bound {
        println!("shadow: PASS");
        Ok(Outcome::Pass)
    } else {
        println!("shadow: FAIL — error above the composite bound");
        Ok(Outcome::Fail)
    }
}

pub fn cmd_verify(config: &RunConfig, out: &OutputWriter) -> Result<Outcome> {
    const KNOWN: [&str; 4] = [
        "uniform-closeness",
        "same-code-drift",
        "shadow-error",
        "epsilon-sweep",
    ];
    for name in &config.verify.experiments {
        if !KNOWN.contains(&name.as_str()) {
            bail!(
                "unknown experiment `{name}` (expected one of {})",
                KNOWN.join(", ")
            );
        }
    }
    let params = config.reduced_map()?;
    let mut all_pass = true;

    for name in &config.verify.experiments {
        match name.as_str() {
            "uniform-closeness" => {
                for &n in &config.verify.n_values {
                    let report = uniform_closeness_experiment(
                        &params,
                        n,
                        config.verify.trials,
                        config.seed,
                    )?;
                    let mut value = serde_json::to_value(&report)?;
                    value["config"] = config.as_json();
                    out.write_json(&format!("uniform_closeness_n{n}"), &value)?;
                    out.write(
                        &format!("uniform_closeness_n{n}"),
                        "csv",
                        &report.trials_csv(),
                    )?;
                    println!(
                        "uniform-closeness (N = {n}): {} — worst ratio {:.4}",
                        if report.pass { "PASS" } else { "FAIL" },
                        report.max_ratio
                    );
                    all_pass &= report.pass;
                }
            }
            "same-code-drift" => {
                let report = same_code_drift_experiment(
                    &params,
                    config.verify.k0,
                    config.verify.trials,
                    config.seed,
                )?;
                let mut value = serde_json::to_value(&report)?;
                value["config"] = config.as_json();
                out.write_json("same_code_drift", &value)?;
                out.write("same_code_drift", "csv", &report.trials_csv())?;
                println!(
                    "same-code-drift: {} — worst ratio {:.4}",
                    if report.pass { "PASS" } else { "FAIL" },
                    report.max_ratio
                );
                all_pass &= report.pass;
            }
            "shadow-error" => {
                let curve = config.curve()?;
                let planner = Planner::new(params.clone(), config.planner.l)?
                    .with_region_resolution(config.planner.grid_resolution)
                    .with_stall_horizon(config.planner.stall_horizon);
                let result = planner.shadow_curve(&curve, config.planner.k_max)?;
                let max_error = shadow_error(&curve, &result, config.planner.samples_per_interval)?;
                let bound = result.constants.shadowing_constant() * result.epsilon;
                let pass = max_error <= bound;
                let value = json!({
                    "config": config.as_json(),
                    "constants": result.constants,
                    "max_shadow_error": max_error,
                    "bound": bound,
                    "ratio": max_error / bound,
                    "pass": pass,
                    "seed": config.seed,
                });
                out.write_json("shadow_error", &value)?;
                println!(
                    "shadow-error: {} — {max_error:.6e} vs bound {bound:.6e}",
                    if pass { "PASS" } else { "FAIL" }
                );
                all_pass &= pass;
            }
            "epsilon-sweep" => {
                let (report, pass) = run_sweep(config, &params)?;
                let mut value = serde_json::to_value(&report)?;
                value["config"] = config.as_json();
                out.write_json("epsilon_sweep", &value)?;
                println!(
                    "epsilon-sweep: {} — slope {:?}",
                    if pass { "PASS" } else { "FAIL" },
                    report.slope
                );
                all_pass &= pass;
            }
            _ => unreachable!("validated above"),
        }
    }
    println!("verify: {}", if all_pass { "PASS" } else { "FAIL" });
    Ok(if all_pass {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

fn run_sweep(
    config: &RunConfig,
    params: &slowshadow::symbolic::ReducedMapParams,
) -> Result<(slowshadow::verify::SweepReport, bool)> {
    let curve = config.curve()?;
    let report = epsilon_sweep(
        &curve,
        &config.sweep.epsilons,
        params,
        config.planner.l,
        config.sweep.k_max,
        config.planner.samples_per_interval,
        config.seed,
    )?;
    let slope_ok = report
        .slope
        .map(|s| (0.75..=1.25).contains(&s))
        .unwrap_or(false);
    let pass = report.all_ok && slope_ok;
    Ok((report, pass))
}

pub fn cmd_sweep(config: &RunConfig, out: &OutputWriter) -> Result<Outcome> {
    let params = config.reduced_map()?;
    let (report, pass) = run_sweep(config, &params)?;
    let mut value = serde_json::to_value(&report)?;
    value["config"] = config.as_json();
    let path = out.write_json("epsilon_sweep", &value)?;
    for point in &report.points {
        match (&point.max_error, &point.failure) {
            (Some(err), _) => println!("ε = {:>9.3e}: max error {err:.6e}", point.epsilon),
            (None, Some(msg)) => println!("ε = {:>9.3e}: FAILED — {msg}", point.epsilon),
            _ => {}
        }
    }
    match report.slope {
        Some(slope) => println!("fitted log-log slope: {slope:.6}"),
        None => println!("fitted log-log slope: unavailable"),
    }
    println!("report: {}", path.display());
    println!("sweep: {}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

pub fn cmd_constants(config: &RunConfig, out: &OutputWriter) -> Result<Outcome> {
    let params = config.reduced_map()?;
    let constants = compute_constants(&params, config.planner.l)?;
    let value = json!({
        "config": config.as_json(),
        "constants": constants,
        "shadowing_constant": constants.shadowing_constant(),
    });
    let path = out.write_json("constants", &value)?;
    println!("‖φ‖_C¹         = {:.6}", constants.phi_c1);
    println!("C (Gronwall)   = {:.6}", constants.c);
    println!("K              = {:.6}", constants.k);
    println!("C₁ (at K₀ = K) = {:.6}", constants.c1);
    println!("C₂             = {:.6}", constants.c2);
    println!("A (closed)     = {:.6}", constants.a);
    println!("A (recursive)  = {:.6e}", constants.a_recursive);
    println!("usable ε       = {:.6e}", constants.eps_usable);
    println!(
        "composite C    = {:.6} (Cε = {:.6e})",
        constants.shadowing_constant(),
        constants.shadowing_constant() * params.epsilon()
    );
    println!("record: {}", path.display());
    Ok(Outcome::Pass)
}
