//! Probability-flow sampling with a k-Diff velocity field.

use kdiff_core::analytic::{colored_optimal_weight, compute_moments};
use kdiff_core::geometry::{sample_noise, DataSource};
use kdiff_core::kdiff::{KParam, ToyNetwork};
use kdiff_core::rng::stream;
use kdiff_core::sampler::{integrate, FnField, KDiffField, SampleRun, VelocityField};
use kdiff_core::schedule::TargetSpec;
use kdiff_core::Matrix;
use serde::Serialize;

use super::train::train_from_config;
use super::{off_manifold_fraction, require_flow_matching, support_projector, Check, Report};
use crate::config::{ExperimentConfig, SampleNet, SolverKind};
use crate::output::{write_json, Cell, CsvSink};
use crate::LabError;

#[derive(Serialize)]
struct Diagnostics {
    n_samples: usize,
    steps: usize,
    solver: &'static str,
    net: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    off_manifold_t0: Option<f64>,
    off_manifold_t1: Option<f64>,
    mean_squared_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_max_error: Option<f64>,
    checks: Vec<Check>,
}

pub fn cmd_sample(config: &ExperimentConfig) -> Result<Report, LabError> {
    require_flow_matching(config, "sampling")?;
    let data = config.data_source()?;
    let dim = data.ambient();
    let n = config.sample.n_samples;
    let run = SampleRun::uniform(config.sample.steps, config.solver())?;
    let floor = config.train.clamp_floor;
    let z0 = sample_noise(dim, n, &mut stream(config.seed, "lab.sample.noise"));
    let mut report = Report::default();

    let (z1, k, oracle_max_error) = match config.sample.net {
        SampleNet::OptimalLinear => {
            let TargetSpec::K { k } = config.target_spec()? else {
                return Err(LabError::invalid(
                    "sample.net = \"optimal_linear\" needs target.kind = \"k\"",
                ));
            };
            let net = ToyNetwork::pure_linear(&equilibrium_weight(config, &data)?)?;
            let kparam = KParam::constant(k, false)?;
            let field = KDiffField {
                net: &net,
                kparam: &kparam,
                clamp_floor: floor,
            };
            (integrate_batch(&field, &run, z0.clone())?, Some(k), None)
        }
        SampleNet::Trained => {
            let trained = train_from_config(config, &data)?;
            let field = KDiffField {
                net: &trained.net,
                kparam: &trained.kparam,
                clamp_floor: floor,
            };
            let k = trained.history.final_k.representative();
            (integrate_batch(&field, &run, z0.clone())?, Some(k), None)
        }
        SampleNet::Oracle => {
            let x = data.sample(n, &mut stream(config.seed, "lab.sample.oracle"));
            // Along the straight path from z0 to x the velocity is x − z0.
            let drift = &x - &z0;
            let field = FnField(|_: &Matrix, _: f64| drift.clone());
            let z1 = integrate_batch(&field, &run, z0.clone())?;
            let err = (n > 0).then(|| (&z1 - &x).amax());
            if let Some(err) = err {
                let scale = 1.0 + x.amax();
                report
                    .checks
                    .push(Check::new("oracle_hits_data", err <= 1e-12 * scale));
            }
            (z1, None, err)
        }
    };

    let path = config.output_dir.join("samples.csv");
    let header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    let mut csv = CsvSink::create(&path, &header)?;
    let mut row = Vec::with_capacity(dim);
    for col in z1.column_iter() {
        row.clear();
        row.extend(col.iter().map(|v| Cell::Real(*v)));
        csv.row(&row)?;
    }
    csv.finish()?;
    report.files.push(path);

    let projector = support_projector(&data);
    let f0 = projector
        .as_ref()
        .and_then(|p| off_manifold_fraction(p, &z0));
    let f1 = projector
        .as_ref()
        .and_then(|p| off_manifold_fraction(p, &z1));
    if config.sample.net != SampleNet::Oracle {
        if let (Some(f0), Some(f1)) = (f0, f1) {
            report
                .checks
                .push(Check::new("off_manifold_decreases", f1 < f0));
        }
    }

    let path = config.output_dir.join("diagnostics.json");
    write_json(
        &path,
        &Diagnostics {
            n_samples: n,
            steps: config.sample.steps,
            solver: match config.sample.solver {
                SolverKind::Euler => "euler",
                SolverKind::Heun => "heun",
            },
            net: match config.sample.net {
                SampleNet::OptimalLinear => "optimal_linear",
                SampleNet::Trained => "trained",
                SampleNet::Oracle => "oracle",
            },
            k,
            off_manifold_t0: f0,
            off_manifold_t1: f1,
            mean_squared_norm: (n > 0).then(|| z1.norm_squared() / n as f64),
            oracle_max_error,
            checks: report.checks.clone(),
        },
    )?;
    report.files.push(path);
    Ok(report)
}

fn integrate_batch<F: VelocityField>(
    field: &F,
    run: &SampleRun,
    z0: Matrix,
) -> Result<Matrix, LabError> {
    if z0.ncols() == 0 {
        return Ok(z0);
    }
    Ok(integrate(field, run, z0)?)
}

/// Equilibrium weight of the configured objective for this data source.
fn equilibrium_weight(config: &ExperimentConfig, data: &DataSource) -> Result<Matrix, LabError> {
    let m = compute_moments(&config.objective()?, config.theory.quad_nodes)?;
    Ok(match data {
        DataSource::Manifold(basis) => {
            kdiff_core::lindyn::LinearModel::equilibrium(basis, &m)?.into_weight()
        }
        DataSource::Colored(c) => colored_optimal_weight(c.spectrum(), &m)?,
    })
}
