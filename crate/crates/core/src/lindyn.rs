//! The single-layer linear denoiser `û = W z`.
//!
//! With whitened data on `span(P)` and white noise, the expected loss is a
//! quadratic in `W` whose coefficients are the scalars of a
//! [`MomentSet`]:
//!
//! ```text
//! L(W) = ½ [ I_αα‖WP‖² + I_σσ‖W‖² − 2 I_φα tr(PᵀWP) − 2 I_ψσ tr W + I_φφ d + I_ψψ D ]
//! ```
//!
//! Gradient flow splits into a parallel mode `W PPᵀ`, contracting at rate
//! `I_αα + I_σσ`, and a perpendicular mode `W (I − PPᵀ)`, contracting at
//! rate `I_σσ`. The perpendicular mode never sees `φ`.

use alloc::vec::Vec;

use rand::Rng;

use crate::analytic::{self, EquilibriumCoeffs, MomentSet, DEFAULT_QUAD_NODES};
use crate::geometry::{sample_noise, DataSource, ManifoldBasis};
use crate::rng::{chunk_stream, StreamRng};
use crate::schedule::Objective;
use crate::{math, Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    w: Matrix,
}

impl LinearModel {
    pub fn new(w: Matrix) -> Result<Self> {
        if !w.is_square() {
            return Err(Error::dim(alloc::format!(
                "weight must be square, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("weight has non-finite entries"));
        }
        Ok(Self { w })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            w: Matrix::zeros(dim, dim),
        }
    }

    /// `W* = c∥ PPᵀ + c⊥ (I − PPᵀ)`.
    pub fn equilibrium(basis: &ManifoldBasis, moments: &MomentSet) -> Result<Self> {
        let coeffs = analytic::optimal_weight_coeffs(moments)?;
        Ok(Self {
            w: coeffs.weight(basis),
        })
    }

    pub fn weight(&self) -> &Matrix {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn into_weight(self) -> Matrix {
        self.w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeDecomposition {
    pub parallel: Matrix,
    pub perpendicular: Matrix,
}

impl ModeDecomposition {
    pub fn recompose(&self) -> Matrix {
        &self.parallel + &self.perpendicular
    }
}

/// `W∥ = W PPᵀ`, `W⊥ = W (I − PPᵀ)`.
pub fn decompose(model: &LinearModel, basis: &ManifoldBasis) -> Result<ModeDecomposition> {
    check_dims(model, basis)?;
    let parallel = &model.w * basis.projector();
    let perpendicular = &model.w - &parallel;
    Ok(ModeDecomposition {
        parallel,
        perpendicular,
    })
}

fn check_dims(model: &LinearModel, basis: &ManifoldBasis) -> Result<()> {
    if model.dim() != basis.ambient() {
        return Err(Error::dim(alloc::format!(
            "weight is {0}x{0} but the basis lives in R^{1}",
            model.dim(),
            basis.ambient()
        )));
    }
    Ok(())
}

/// Expected loss of an arbitrary `W`.
pub fn expected_loss(model: &LinearModel, basis: &ManifoldBasis, m: &MomentSet) -> Result<f64> {
    check_dims(model, basis)?;
    let w = &model.w;
    let wp = w * basis.matrix();
    let ptwp = basis.matrix().transpose() * &wp;
    let d = basis.intrinsic() as f64;
    let big = basis.ambient() as f64;
    Ok(0.5
        * (m.alpha_sq * wp.norm_squared() + m.sigma_sq * w.norm_squared()
            - 2.0 * m.phi_alpha * ptwp.trace()
            - 2.0 * m.psi_sigma * w.trace()
            + m.phi_sq * d
            + m.psi_sq * big))
}

/// Descent direction `−∂L/∂W` computed from the objective's moments.
pub fn exact_gradient(
    model: &LinearModel,
    basis: &ManifoldBasis,
    objective: &Objective,
) -> Result<Matrix> {
    let m = analytic::compute_moments(objective, DEFAULT_QUAD_NODES)?;
    exact_gradient_from_moments(model, basis, &m)
}

/// `−[I_αα W PPᵀ + I_σσ W − I_φα PPᵀ − I_ψσ I]`.
pub fn exact_gradient_from_moments(
    model: &LinearModel,
    basis: &ManifoldBasis,
    m: &MomentSet,
) -> Result<Matrix> {
    check_dims(model, basis)?;
    let proj = basis.projector();
    let n = model.dim();
    let mut g = &model.w * &proj * m.alpha_sq + &model.w * m.sigma_sq - proj * m.phi_alpha;
    for i in 0..n {
        g[(i, i)] -= m.psi_sigma;
    }
    Ok(-g)
}

/// Sample average of `−κ² (W z − u) zᵀ` over columns of `x` and `n` and
/// the matching entries of `t`.
pub fn stochastic_gradient(
    model: &LinearModel,
    x: &Matrix,
    n: &Matrix,
    t: &[f64],
    objective: &Objective,
) -> Result<Matrix> {
    let dim = model.dim();
    if x.nrows() != dim || n.shape() != x.shape() || t.len() != x.ncols() {
        return Err(Error::dim("batch shapes disagree with the model"));
    }
    if t.is_empty() {
        return Err(Error::invalid("batch is empty"));
    }
    let (z, u) = forward_pair(x, n, t, objective);
    let mut r = &model.w * &z - u;
    for (j, &tj) in t.iter().enumerate() {
        let kappa = objective.kappa(tj)?;
        r.column_mut(j).scale_mut(kappa * kappa);
    }
    Ok(-(r * z.transpose()) / t.len() as f64)
}

/// `z = αx + σn` and `u = φx + ψn` column by column.
fn forward_pair(x: &Matrix, n: &Matrix, t: &[f64], objective: &Objective) -> (Matrix, Matrix) {
    let mut z = x.clone();
    let mut u = x.clone();
    for (j, &tj) in t.iter().enumerate() {
        let (a, s) = (objective.process.alpha(tj), objective.process.sigma(tj));
        let (phi, psi) = (objective.target.phi(tj), objective.target.psi(tj));
        let nj = n.column(j);
        z.column_mut(j).scale_mut(a);
        z.column_mut(j).axpy(s, &nj, 1.0);
        u.column_mut(j).scale_mut(phi);
        u.column_mut(j).axpy(psi, &nj, 1.0);
    }
    (z, u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    /// Expected gradient assembled from moments.
    Exact,
    /// Monte Carlo gradient from fresh `(x, n, t)` batches.
    Stochastic { batch: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    /// Learning rate per step, the reciprocal of the time constant.
    pub step_size: f64,
    pub steps: usize,
    pub mode: GradientMode,
}

impl FlowConfig {
    pub fn exact(step_size: f64, steps: usize) -> Self {
        Self {
            step_size,
            steps,
            mode: GradientMode::Exact,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid(alloc::format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if let GradientMode::Stochastic { batch: 0, .. } = self.mode {
            return Err(Error::invalid("stochastic batch must be at least 1"));
        }
        Ok(())
    }
}

/// Largest stable explicit-Euler step, `2 / (I_αα + I_σσ)`.
pub fn stability_bound(m: &MomentSet) -> f64 {
    2.0 / (m.alpha_sq + m.sigma_sq)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRecord {
    pub step: usize,
    pub loss: f64,
    /// `‖W∥ − W*∥‖_F`.
    pub dist_par: f64,
    /// `‖W⊥ − W*⊥‖_F`.
    pub dist_perp: f64,
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub records: Vec<FlowRecord>,
    pub model: LinearModel,
    pub modes: ModeDecomposition,
    pub equilibrium: EquilibriumCoeffs,
    pub optimal_loss: f64,
    /// Set when the step size is at or above [`stability_bound`].
    pub unstable_step: bool,
}

impl FlowTrajectory {
    pub fn last(&self) -> &FlowRecord {
        self.records.last().expect("trajectory records step 0")
    }
}

/// Consecutive loss increases that count as divergence in exact mode.
pub const DIVERGENCE_PATIENCE: usize = 10;

/// Explicit Euler on `dW/ds = −∂L/∂W`.
///
/// Exact mode evolves `W∥` and `W⊥` separately, so the perpendicular
/// trajectory is computed without touching `φ` or the parallel state.
pub fn run_gradient_flow(
    model: &LinearModel,
    basis: &ManifoldBasis,
    objective: &Objective,
    config: &FlowConfig,
) -> Result<FlowTrajectory> {
    config.validate()?;
    let m = analytic::compute_moments(objective, DEFAULT_QUAD_NODES)?;
    let coeffs = analytic::optimal_weight_coeffs(&m)?;
    let optimal = analytic::optimal_loss(&m, basis.dims())?.total;
    let proj = basis.projector();
    let comp = basis.complement_projector();
    let target_par = &proj * coeffs.parallel;
    let target_perp = &comp * coeffs.perpendicular;
    let unstable_step = config.step_size >= stability_bound(&m);

    let modes = decompose(model, basis)?;
    let mut par = modes.parallel;
    let mut perp = modes.perpendicular;
    let mut records = Vec::new();
    let mut logger = LogCadence::new(config.steps);

    let record = |step: usize, par: &Matrix, perp: &Matrix| -> Result<FlowRecord> {
        let w = LinearModel { w: par + perp };
        Ok(FlowRecord {
            step,
            loss: expected_loss(&w, basis, &m)?,
            dist_par: (par - &target_par).norm(),
            dist_perp: (perp - &target_perp).norm(),
        })
    };

    let mut prev = record(0, &par, &perp)?;
    records.push(prev);
    let mut increases = 0usize;
    let mut rng: Option<StreamRng> = match config.mode {
        GradientMode::Stochastic { seed, .. } => Some(crate::rng::stream(seed, "lindyn.flow")),
        GradientMode::Exact => None,
    };

    let h = config.step_size;
    let rate_par = m.alpha_sq + m.sigma_sq;
    let drive_par = m.phi_alpha + m.psi_sigma;
    for step in 1..=config.steps {
        match (config.mode, rng.as_mut()) {
            (GradientMode::Stochastic { batch, .. }, Some(rng)) => {
                let w = LinearModel { w: &par + &perp };
                let x = crate::geometry::sample_data(basis, batch, rng);
                let n = sample_noise(basis.ambient(), batch, rng);
                let t: Vec<f64> = (0..batch)
                    .map(|_| objective.measure.sample_t(rng))
                    .collect();
                let g = stochastic_gradient(&w, &x, &n, &t, objective)?;
                let w_next = w.w + g * h;
                par = &w_next * &proj;
                perp = w_next - &par;
            }
            _ => {
                // W∥ ← W∥ − h (rate∥ W∥ − drive∥ PPᵀ)
                par = &par * (1.0 - h * rate_par) + &proj * (h * drive_par);
                // W⊥ ← W⊥ − h (I_σσ W⊥ − I_ψσ (I − PPᵀ))
                perp = &perp * (1.0 - h * m.sigma_sq) + &comp * (h * m.psi_sigma);
            }
        }
        let current = record(step, &par, &perp)?;
        if !current.loss.is_finite() {
            return Err(Error::Divergence { step });
        }
        if config.mode == GradientMode::Exact {
            let slack = 1e-13 * (1.0 + math::abs(prev.loss));
            if current.loss > prev.loss + slack {
                increases += 1;
                if increases >= DIVERGENCE_PATIENCE {
                    return Err(Error::Divergence { step });
                }
            } else {
                increases = 0;
            }
        }
        if logger.keep(step) {
            records.push(current);
        }
        prev = current;
    }

    Ok(FlowTrajectory {
        records,
        model: LinearModel { w: &par + &perp },
        modes: ModeDecomposition {
            parallel: par,
            perpendicular: perp,
        },
        equilibrium: coeffs,
        optimal_loss: optimal,
        unstable_step,
    })
}

/// Every step for short runs, geometrically spaced steps for long ones.
struct LogCadence {
    total: usize,
    next: f64,
}

const DENSE_LOG_LIMIT: usize = 1000;
const LOG_RATIO: f64 = 1.02;

impl LogCadence {
    fn new(total: usize) -> Self {
        Self {
            total,
            next: DENSE_LOG_LIMIT as f64,
        }
    }

    fn keep(&mut self, step: usize) -> bool {
        if self.total <= DENSE_LOG_LIMIT || step <= DENSE_LOG_LIMIT || step == self.total {
            return true;
        }
        if step as f64 >= self.next {
            while self.next <= step as f64 {
                self.next *= LOG_RATIO;
            }
            return true;
        }
        false
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Number of individual samples (twice the antithetic pairs).
    pub samples: usize,
}

/// Running mean and sum of squared deviations of antithetic pair means.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct McPartial {
    pub count: usize,
    pub mean: f64,
    pub m2: f64,
}

impl McPartial {
    fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    /// Pairwise combination of two partials.
    pub fn merge(self, other: McPartial) -> McPartial {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        McPartial { count, mean, m2 }
    }

    pub fn finish(self) -> McEstimate {
        let var = if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        };
        McEstimate {
            estimate: self.mean,
            std_error: math::sqrt(var / self.count.max(1) as f64),
            samples: 2 * self.count,
        }
    }
}

/// Antithetic pairs per rng chunk.
pub const MC_CHUNK_PAIRS: usize = 4096;

/// Number of chunks and the pair count of the last one.
pub fn mc_chunks(n_samples: usize) -> (usize, usize) {
    let pairs = n_samples / 2;
    let chunks = pairs.div_ceil(MC_CHUNK_PAIRS);
    let last = pairs - (chunks.saturating_sub(1)) * MC_CHUNK_PAIRS;
    (chunks, last)
}

/// Pairs in chunk `index` out of `n_samples / 2`.
pub fn mc_chunk_len(n_samples: usize, index: usize) -> usize {
    let (chunks, last) = mc_chunks(n_samples);
    if index + 1 == chunks {
        last
    } else {
        MC_CHUNK_PAIRS
    }
}

/// One chunk of the Monte Carlo loss: `pairs` antithetic pairs `(n, −n)`
/// drawn from the chunk's own stream.
pub fn monte_carlo_partial(
    model: &LinearModel,
    data: &DataSource,
    objective: &Objective,
    seed: u64,
    index: usize,
    pairs: usize,
) -> Result<McPartial> {
    if data.ambient() != model.dim() {
        return Err(Error::dim("data dimension disagrees with the model"));
    }
    let mut rng = chunk_stream(seed, "lindyn.monte_carlo", index as u64);
    let x = data.sample(pairs, &mut rng);
    let n = sample_noise(model.dim(), pairs, &mut rng);
    let t: Vec<f64> = (0..pairs)
        .map(|_| objective.measure.sample_t(&mut rng))
        .collect();
    let wx = &model.w * &x;
    let wn = &model.w * &n;
    let mut partial = McPartial::default();
    for (j, &tj) in t.iter().enumerate() {
        let (a, s) = (objective.process.alpha(tj), objective.process.sigma(tj));
        let (phi, psi) = (objective.target.phi(tj), objective.target.psi(tj));
        let kappa = objective.kappa(tj)?;
        let mut plus = 0.0;
        let mut minus = 0.0;
        for i in 0..model.dim() {
            // (αW − φ)x and (σW − ψ)n, then the two signs of n.
            let data_part = a * wx[(i, j)] - phi * x[(i, j)];
            let noise_part = s * wn[(i, j)] - psi * n[(i, j)];
            let rp = data_part + noise_part;
            let rm = data_part - noise_part;
            plus += rp * rp;
            minus += rm * rm;
        }
        partial.push(0.25 * kappa * kappa * (plus + minus));
    }
    Ok(partial)
}

/// Monte Carlo estimate of `½ E ‖κ (W z − u)‖²`.
pub fn monte_carlo_loss(
    model: &LinearModel,
    data: &DataSource,
    objective: &Objective,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples < 2 {
        return Err(Error::invalid("Monte Carlo needs at least two samples"));
    }
    let (chunks, _) = mc_chunks(n_samples);
    let mut total = McPartial::default();
    for index in 0..chunks {
        let pairs = mc_chunk_len(n_samples, index);
        total = total.merge(monte_carlo_partial(
            model, data, objective, seed, index, pairs,
        )?);
    }
    Ok(total.finish())
}

/// Draws the `(x, n, t)` triples of a stochastic batch.
pub fn draw_batch<R: Rng + ?Sized>(
    basis: &ManifoldBasis,
    objective: &Objective,
    batch: usize,
    rng: &mut R,
) -> (Matrix, Matrix, Vec<f64>) {
    let x = crate::geometry::sample_data(basis, batch, rng);
    let n = sample_noise(basis.ambient(), batch, rng);
    let t = (0..batch)
        .map(|_| objective.measure.sample_t(rng))
        .collect();
    (x, n, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::canonical_moments;
    use crate::geometry::random_orthonormal_basis;
    use crate::rng::stream;
    use crate::schedule::TargetSpec;

    fn basis(big: usize, small: usize, seed: u64) -> ManifoldBasis {
        random_orthonormal_basis(big, small, &mut stream(seed, "basis")).unwrap()
    }

    fn k_objective(k: f64) -> Objective {
        Objective::flow_matching(TargetSpec::k_target(k).unwrap())
    }

    #[test]
    fn decompose_identity_and_projector() {
        let b = basis(6, 2, 1);
        let modes = decompose(&LinearModel::zeros(6), &b).unwrap();
        assert_eq!(modes.recompose(), Matrix::zeros(6, 6));
        let id = LinearModel::new(Matrix::identity(6, 6)).unwrap();
        let modes = decompose(&id, &b).unwrap();
        assert!((modes.parallel - b.projector()).amax() < 1e-15);
        assert!((modes.perpendicular - b.complement_projector()).amax() < 1e-15);
        let p = LinearModel::new(b.projector()).unwrap();
        let modes = decompose(&p, &b).unwrap();
        assert!(modes.perpendicular.amax() < 1e-12);
    }

    #[test]
    fn decompose_rejects_mismatch() {
        assert!(matches!(
            decompose(&LinearModel::zeros(5), &basis(6, 2, 1)),
            Err(Error::Dim(_))
        ));
        assert!(LinearModel::new(Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn exact_gradient_examples() {
        let b = basis(5, 2, 2);
        let g = exact_gradient(&LinearModel::zeros(5), &b, &k_objective(1.0)).unwrap();
        assert!((g - b.projector() * 0.5).amax() < 1e-12);
        let g = exact_gradient(&LinearModel::zeros(5), &b, &k_objective(0.0)).unwrap();
        assert!((g + Matrix::identity(5, 5) * 0.5).amax() < 1e-12);
        let m = canonical_moments(0.3).unwrap();
        let w = LinearModel::equilibrium(&b, &m).unwrap();
        let g = exact_gradient_from_moments(&w, &b, &m).unwrap();
        assert!(g.amax() < 1e-12);
    }

    #[test]
    fn stochastic_gradient_at_data_end() {
        let b = basis(4, 1, 3);
        let obj = k_objective(0.7);
        let mut rng = stream(3, "test");
        let x = crate::geometry::sample_data(&b, 1, &mut rng);
        let n = sample_noise(4, 1, &mut rng);
        let w = LinearModel::new(Matrix::identity(4, 4) * 0.4).unwrap();
        // σ(1) = 0, but ψ = −0.3 keeps a noise term in the target.
        let g = stochastic_gradient(&w, &x, &n, &[1.0], &obj).unwrap();
        let expect = -((&w.w * &x - &x * 0.7 + &n * 0.3) * x.transpose());
        assert!((g - expect).amax() < 1e-12);
        let g = stochastic_gradient(&w, &x, &n, &[1.0], &k_objective(1.0)).unwrap();
        let expect = -((&w.w * &x - &x) * x.transpose());
        assert!((g - expect).amax() < 1e-12);
        let g = stochastic_gradient(&w, &Matrix::zeros(4, 1), &Matrix::zeros(4, 1), &[0.3], &obj)
            .unwrap();
        assert_eq!(g, Matrix::zeros(4, 4));
    }

    #[test]
    fn flow_reaches_x_prediction_equilibrium() {
        let b = basis(16, 4, 4);
        let traj = run_gradient_flow(
            &LinearModel::zeros(16),
            &b,
            &k_objective(1.0),
            &FlowConfig::exact(0.5, 200),
        )
        .unwrap();
        let err = (traj.model.weight() - b.projector() * 0.75).norm();
        assert!(err < 1e-6, "{err}");
        assert_eq!(traj.records.len(), 201);
        assert!(!traj.unstable_step);
    }

    #[test]
    fn flow_from_equilibrium_is_constant() {
        let b = basis(6, 3, 5);
        let m = canonical_moments(0.5).unwrap();
        let start = LinearModel::equilibrium(&b, &m).unwrap();
        let traj =
            run_gradient_flow(&start, &b, &k_objective(0.5), &FlowConfig::exact(0.5, 50)).unwrap();
        assert!((traj.model.weight() - start.weight()).amax() < 1e-14);
        for r in &traj.records {
            assert!((r.loss - traj.optimal_loss).abs() < 1e-12);
        }
    }

    #[test]
    fn flow_above_stability_bound_diverges() {
        let b = basis(6, 3, 5);
        let err = run_gradient_flow(
            &LinearModel::zeros(6),
            &b,
            &k_objective(0.8),
            &FlowConfig::exact(3.5, 500),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn flow_rejects_bad_config() {
        let b = basis(3, 1, 5);
        let bad = FlowConfig::exact(0.0, 5);
        assert!(run_gradient_flow(&LinearModel::zeros(3), &b, &k_objective(1.0), &bad).is_err());
    }

    #[test]
    fn long_runs_thin_the_log() {
        let mut c = LogCadence::new(100_000);
        let kept = (1..=100_000).filter(|s| c.keep(*s)).count();
        assert!(kept > 1200 && kept < 1300, "{kept}");
        let mut c = LogCadence::new(500);
        assert!((1..=500).all(|s| c.keep(s)));
    }

    #[test]
    fn partial_merge_matches_single_pass() {
        let values = [0.3, 1.2, -0.4, 2.2, 0.9, 1.1, 0.0];
        let mut whole = McPartial::default();
        values.iter().for_each(|v| whole.push(*v));
        let mut a = McPartial::default();
        let mut b = McPartial::default();
        values[..3].iter().for_each(|v| a.push(*v));
        values[3..].iter().for_each(|v| b.push(*v));
        let merged = a.merge(b);
        assert_eq!(merged.count, whole.count);
        assert!((merged.mean - whole.mean).abs() < 1e-15);
        assert!((merged.m2 - whole.m2).abs() < 1e-13);
    }

    #[test]
    fn chunk_layout() {
        assert_eq!(mc_chunks(2), (1, 1));
        assert_eq!(mc_chunks(2 * MC_CHUNK_PAIRS), (1, MC_CHUNK_PAIRS));
        assert_eq!(mc_chunks(2 * MC_CHUNK_PAIRS + 2), (2, 1));
        assert_eq!(mc_chunk_len(2 * MC_CHUNK_PAIRS + 2, 0), MC_CHUNK_PAIRS);
    }

    #[test]
    fn monte_carlo_needs_two_samples() {
        let b = basis(2, 1, 1);
        let data = DataSource::Manifold(b);
        let err = monte_carlo_loss(&LinearModel::zeros(2), &data, &k_objective(0.5), 1, 0);
        assert!(err.is_err());
    }
}
