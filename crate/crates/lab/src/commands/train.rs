//! Joint training of a toy network and its k parameter.

use kdiff_core::geometry::DataSource;
use kdiff_core::kdiff::{train, KParam, KSnapshot, LossMode, ToyNetwork, TrainHistory};
use kdiff_core::rng::stream;
use kdiff_core::schedule::{LossTargetSpec, Objective, ProcessSpec, TargetSpec};
use serde::Serialize;

use super::{require_flow_matching, theory_k_star, Check, Report};
use crate::config::{ExperimentConfig, NetKind};
use crate::output::{write_json, Cell, CsvSink};
use crate::LabError;

#[derive(Serialize)]
struct TrainSummary {
    final_k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_k_probes: Option<[f64; 5]>,
    theory_k_star: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    abs_gap: Option<f64>,
    final_loss: f64,
    steps: usize,
    checks: Vec<Check>,
}

pub(crate) struct Trained {
    pub net: ToyNetwork,
    pub kparam: KParam,
    pub history: TrainHistory,
}

/// Builds the network and k parameter from the config and trains them.
pub(crate) fn train_from_config(
    config: &ExperimentConfig,
    data: &DataSource,
) -> Result<Trained, LabError> {
    require_flow_matching(config, "training")?;
    let tc = config.train_config()?;
    let dim = data.ambient();
    let mut net = match config.train.net {
        NetKind::PureLinear => ToyNetwork::pure_linear_zeros(dim),
        NetKind::TwoLayer => {
            let mut rng = stream(config.seed, "lab.train.init");
            ToyNetwork::two_layer(dim, config.train.hidden, &mut rng)?
        }
    };
    let mut kparam = tc.initial_kparam(config.train.bins)?;
    let history = train(&mut net, &mut kparam, data, &tc)?;
    Ok(Trained {
        net,
        kparam,
        history,
    })
}

pub fn cmd_train(config: &ExperimentConfig) -> Result<Report, LabError> {
    let data = config.data_source()?;
    let Trained {
        kparam, history, ..
    } = train_from_config(config, &data)?;
    let mut report = Report::default();

    let path = config.output_dir.join("history.csv");
    let header: &[&str] = if kparam.is_binned() {
        &[
            "step", "loss", "k_t0", "k_t0.25", "k_t0.5", "k_t0.75", "k_t1",
        ]
    } else {
        &["step", "loss", "k"]
    };
    let mut csv = CsvSink::create(&path, header)?;
    for r in &history.records {
        let mut row = vec![Cell::Int(r.step), Cell::Real(r.loss)];
        match r.k {
            KSnapshot::Constant(k) => row.push(Cell::Real(k)),
            KSnapshot::Probes(p) => row.extend(p.iter().map(|v| Cell::Real(*v))),
        }
        csv.row(&row)?;
    }
    csv.finish()?;
    report.files.push(path);

    let template = Objective {
        process: ProcessSpec::FlowMatching,
        target: TargetSpec::K { k: 0.5 },
        loss: match config.train_config()?.loss_mode {
            LossMode::ULoss => LossTargetSpec::U,
            LossMode::VLossAlg1 => LossTargetSpec::V,
        },
        measure: config.measure()?,
        kappa_floor: None,
    };
    let (k_star, _) = theory_k_star(&template, &data.spectrum(), config.theory.quad_nodes)?;
    let final_k = history.final_k.representative();
    let abs_gap = kparam.is_trainable().then(|| (final_k - k_star).abs());
    if let Some(gap) = abs_gap {
        report
            .checks
            .push(Check::new("k_near_theory", gap <= config.train.k_tolerance));
    }
    report.checks.push(Check::new(
        "finite_history",
        history.records.iter().all(|r| r.loss.is_finite()),
    ));

    let path = config.output_dir.join("summary.json");
    write_json(
        &path,
        &TrainSummary {
            final_k,
            final_k_probes: match history.final_k {
                KSnapshot::Probes(p) => Some(p),
                KSnapshot::Constant(_) => None,
            },
            theory_k_star: k_star,
            abs_gap,
            final_loss: history.records.last().map_or(f64::NAN, |r| r.loss),
            steps: config.train.steps,
            checks: report.checks.clone(),
        },
    )?;
    report.files.push(path);
    Ok(report)
}
