//! Optimal loss Δ*(k) over a k grid.

use kdiff_core::analytic::{colored_optimal_loss, compute_moments, optimal_loss, Spectrum};
use kdiff_core::schedule::TargetSpec;
use serde::Serialize;

use super::{delta_for_k, theory_k_star, Check, Report};
use crate::config::ExperimentConfig;
use crate::output::{write_json, Cell, CsvSink};
use crate::LabError;

#[derive(Serialize)]
struct TheorySummary {
    k_star: f64,
    delta_at_k_star: f64,
    closed_form: bool,
    ambient: usize,
    intrinsic: usize,
    spectrum_trace: f64,
    checks: Vec<Check>,
}

pub fn cmd_theory(config: &ExperimentConfig) -> Result<Report, LabError> {
    let dims = config.dims()?;
    let template = config.objective_for(TargetSpec::K { k: 0.5 })?;
    let nodes = config.theory.quad_nodes;
    let points = config.theory.k_points;
    if points < 2 {
        return Err(LabError::invalid("theory.k_points must be at least 2"));
    }
    let grid: Vec<f64> = (0..points)
        .map(|i| i as f64 / (points - 1) as f64)
        .collect();
    let mut report = Report::default();

    let path = config.output_dir.join("theory.csv");
    let mut csv = CsvSink::create(
        &path,
        &["k", "delta_total", "delta_parallel", "delta_perpendicular"],
    )?;
    for &k in &grid {
        let mut obj = template.clone();
        obj.target = TargetSpec::k_target(k)?;
        let m = compute_moments(&obj, nodes)?;
        let loss = optimal_loss(&m, dims)?;
        csv.row(&[
            Cell::Real(k),
            Cell::Real(loss.total),
            Cell::Real(loss.parallel),
            Cell::Real(loss.perpendicular),
        ])?;
    }
    csv.finish()?;
    report.files.push(path);

    let spectrum = match config.spectrum()? {
        Some(s) => {
            let path = config.output_dir.join("colored.csv");
            let mut header = vec!["k".to_string(), "delta_total".to_string()];
            header.extend((0..s.dim()).map(|i| format!("delta_mode{i}")));
            let mut csv = CsvSink::create(&path, &header)?;
            for &k in &grid {
                let mut obj = template.clone();
                obj.target = TargetSpec::k_target(k)?;
                let m = compute_moments(&obj, nodes)?;
                let loss = colored_optimal_loss(&s, &m)?;
                let mut row = vec![Cell::Real(k), Cell::Real(loss.total)];
                row.extend(loss.per_mode.iter().map(|v| Cell::Real(*v)));
                csv.row(&row)?;
            }
            csv.finish()?;
            report.files.push(path);
            s
        }
        None => Spectrum::binary(dims),
    };

    let (k_star, closed_form) = theory_k_star(&template, &spectrum, nodes)?;
    let delta_at_k_star = delta_for_k(&template, &spectrum, k_star, nodes)?;
    let grid_min = grid
        .iter()
        .map(|&k| delta_for_k(&template, &spectrum, k, nodes))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    report.checks.push(Check::new(
        "k_star_minimizes_grid",
        delta_at_k_star <= grid_min + 1e-12 * (1.0 + grid_min.abs()),
    ));

    let path = config.output_dir.join("summary.json");
    write_json(
        &path,
        &TheorySummary {
            k_star,
            delta_at_k_star,
            closed_form,
            ambient: dims.ambient(),
            intrinsic: dims.intrinsic(),
            spectrum_trace: spectrum.trace(),
            checks: report.checks.clone(),
        },
    )?;
    report.files.push(path);
    Ok(report)
}
