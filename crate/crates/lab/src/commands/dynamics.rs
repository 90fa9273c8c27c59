//! Gradient flow of the linear denoiser towards its equilibrium.

use kdiff_core::analytic::compute_moments;
use kdiff_core::geometry::sample_noise;
use kdiff_core::lindyn::{
    run_gradient_flow, stability_bound, FlowConfig, GradientMode, LinearModel,
};
use kdiff_core::rng::stream;
use serde::Serialize;

use super::{Check, Report};
use crate::config::{ExperimentConfig, GradientKind, InitKind};
use crate::output::{write_json, Cell, CsvSink};
use crate::LabError;

#[derive(Serialize)]
struct DynamicsSummary {
    converged: bool,
    steps: usize,
    step_size: f64,
    stability_bound: f64,
    final_loss: f64,
    optimal_loss: f64,
    final_dist_par: f64,
    final_dist_perp: f64,
    equilibrium_parallel: f64,
    equilibrium_perpendicular: f64,
    tolerance: f64,
    checks: Vec<Check>,
}

pub fn cmd_dynamics(config: &ExperimentConfig) -> Result<Report, LabError> {
    let data = config.data_source()?;
    let basis = data
        .basis()
        .ok_or_else(|| LabError::invalid("dynamics needs manifold data (no data.spectrum)"))?
        .clone();
    let objective = config.objective()?;
    let dyn_cfg = &config.dynamics;
    let dim = basis.ambient();

    let model = match dyn_cfg.init {
        InitKind::Zeros => LinearModel::zeros(dim),
        InitKind::Random => {
            let mut rng = stream(config.seed, "lab.dynamics.init");
            LinearModel::new(sample_noise(dim, dim, &mut rng) / (dim as f64).sqrt())?
        }
    };
    let mode = match dyn_cfg.gradient {
        GradientKind::Exact => GradientMode::Exact,
        GradientKind::Stochastic => GradientMode::Stochastic {
            batch: dyn_cfg.batch,
            seed: config.seed,
        },
    };
    let flow = FlowConfig {
        step_size: dyn_cfg.step_size,
        steps: dyn_cfg.steps,
        mode,
    };

    let mut report = Report::default();
    let bound = stability_bound(&compute_moments(&objective, config.theory.quad_nodes)?);
    if dyn_cfg.step_size >= bound {
        eprintln!(
            "warning: step size {} is at or above the stability bound {bound:.6}",
            dyn_cfg.step_size
        );
    }

    let traj = run_gradient_flow(&model, &basis, &objective, &flow)?;
    let path = config.output_dir.join("dynamics.csv");
    let mut csv = CsvSink::create(&path, &["step", "loss", "dist_par", "dist_perp"])?;
    for r in &traj.records {
        csv.row(&[
            Cell::Int(r.step),
            Cell::Real(r.loss),
            Cell::Real(r.dist_par),
            Cell::Real(r.dist_perp),
        ])?;
    }
    csv.finish()?;
    report.files.push(path);

    let last = *traj.last();
    let converged = last.dist_par < dyn_cfg.tolerance && last.dist_perp < dyn_cfg.tolerance;
    report
        .checks
        .push(Check::new("converged_to_equilibrium", converged));

    let path = config.output_dir.join("summary.json");
    write_json(
        &path,
        &DynamicsSummary {
            converged,
            steps: dyn_cfg.steps,
            step_size: dyn_cfg.step_size,
            stability_bound: bound,
            final_loss: last.loss,
            optimal_loss: traj.optimal_loss,
            final_dist_par: last.dist_par,
            final_dist_perp: last.dist_perp,
            equilibrium_parallel: traj.equilibrium.parallel,
            equilibrium_perpendicular: traj.equilibrium.perpendicular,
            tolerance: dyn_cfg.tolerance,
            checks: report.checks.clone(),
        },
    )?;
    report.files.push(path);
    Ok(report)
}
