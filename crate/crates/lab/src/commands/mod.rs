mod dynamics;
mod sample;
mod theory;
mod train;

use std::path::PathBuf;

use kdiff_core::analytic::{
    argmin_k, colored_optimal_k, colored_optimal_loss, compute_moments, Spectrum,
};
use kdiff_core::geometry::DataSource;
use kdiff_core::schedule::{Objective, TargetSpec};
use kdiff_core::Matrix;
use serde::Serialize;

use crate::config::{ExperimentConfig, ProcessKind};
use crate::output::ensure_dir;
use crate::LabError;

pub use dynamics::cmd_dynamics;
pub use sample::cmd_sample;
pub use theory::cmd_theory;
pub use train::cmd_train;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Theory,
    Dynamics,
    Train,
    Sample,
}

/// A named pass/fail invariant evaluated at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &'static str, passed: bool) -> Self {
        Self { name, passed }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name)
    }
}

/// Creates the output directory and dispatches.
pub fn run(command: Command, config: &ExperimentConfig) -> Result<Report, LabError> {
    ensure_dir(&config.output_dir)?;
    match command {
        Command::Theory => cmd_theory(config),
        Command::Dynamics => cmd_dynamics(config),
        Command::Train => cmd_train(config),
        Command::Sample => cmd_sample(config),
    }
}

/// Optimal loss for a k target, summed over the data spectrum.
fn delta_for_k(
    template: &Objective,
    spectrum: &Spectrum,
    k: f64,
    quad_nodes: usize,
) -> Result<f64, LabError> {
    let mut obj = template.clone();
    obj.target = TargetSpec::k_target(k)?;
    let m = compute_moments(&obj, quad_nodes)?;
    Ok(colored_optimal_loss(spectrum, &m)?.total)
}

/// Minimizer of the optimal loss over the k family: closed form for the
/// canonical objective, golden section otherwise.
fn theory_k_star(
    template: &Objective,
    spectrum: &Spectrum,
    quad_nodes: usize,
) -> Result<(f64, bool), LabError> {
    if template.is_canonical() {
        return Ok((colored_optimal_k(spectrum), true));
    }
    let mut failure = None;
    let k = argmin_k(
        |k| match delta_for_k(template, spectrum, k, quad_nodes) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        1e-9,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok((k, false)),
    }
}

fn require_flow_matching(config: &ExperimentConfig, what: &str) -> Result<(), LabError> {
    if config.process != ProcessKind::FlowMatching {
        return Err(LabError::invalid(format!(
            "{what} uses the flow matching process only"
        )));
    }
    Ok(())
}

/// Orthogonal projector onto the support of the data distribution, or
/// `None` when the data fill the whole space.
fn support_projector(data: &DataSource) -> Option<Matrix> {
    match data {
        DataSource::Manifold(b) if b.intrinsic() < b.ambient() => Some(b.projector()),
        DataSource::Manifold(_) => None,
        DataSource::Colored(c) => {
            let s = c.spectrum();
            let q = s.eigenvectors()?;
            let dim = s.dim();
            let mut p = Matrix::zeros(dim, dim);
            let mut rank = 0;
            for (i, &lambda) in s.eigenvalues().iter().enumerate() {
                if lambda > 0.0 {
                    let col = q.column(i);
                    p += col * col.transpose();
                    rank += 1;
                }
            }
            (rank < dim).then_some(p)
        }
    }
}

/// `‖(I − P) Z‖²_F / ‖Z‖²_F` pooled over all columns.
fn off_manifold_fraction(projector: &Matrix, z: &Matrix) -> Option<f64> {
    if z.ncols() == 0 {
        return None;
    }
    let total = z.norm_squared();
    if total == 0.0 {
        return None;
    }
    let off = z - projector * z;
    Some(off.norm_squared() / total)
}
