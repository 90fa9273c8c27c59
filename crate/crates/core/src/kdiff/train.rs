use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::kparam::{clamped_denominator, KParam, KSnapshot};
use super::network::ToyNetwork;
use super::optim::{optimizer_step, LrSchedule, Optimizer, OptimizerState};
use super::DEFAULT_CLAMP_FLOOR;
use crate::geometry::{sample_noise, DataSource};
use crate::rng::stream;
use crate::schedule::TimeMeasure;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// `½‖û − u‖²`.
    ULoss,
    /// `½‖v − v̂‖²` after converting both `u` and `û` to velocities.
    VLossAlg1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss_mode: LossMode,
    pub optimizer: Optimizer,
    pub lr_schedule: LrSchedule,
    pub batch: usize,
    pub steps: usize,
    pub seed: u64,
    pub clamp_floor: f64,
    pub k_trainable: bool,
    pub k_init: f64,
    /// Treat the target `v` (or `u`) as constant with respect to `k`.
    pub stop_grad_target: bool,
    pub measure: TimeMeasure,
    /// History cadence in steps.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_mode: LossMode::ULoss,
            optimizer: Optimizer::adam(1e-2),
            lr_schedule: LrSchedule::Constant,
            batch: 256,
            steps: 20_000,
            seed: 0,
            clamp_floor: DEFAULT_CLAMP_FLOOR,
            k_trainable: true,
            k_init: 0.5,
            stop_grad_target: false,
            measure: TimeMeasure::uniform(),
            log_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if !(self.clamp_floor > 0.0 && self.clamp_floor < 1.0) {
            return Err(Error::invalid(alloc::format!(
                "clamp floor must lie in (0, 1), got {}",
                self.clamp_floor
            )));
        }
        if self.batch == 0 {
            return Err(Error::invalid("batch must be at least 1"));
        }
        if self.log_every == 0 {
            return Err(Error::invalid("log_every must be at least 1"));
        }
        if let LrSchedule::LinearDecay { final_fraction } = self.lr_schedule {
            if !(0.0..=1.0).contains(&final_fraction) {
                return Err(Error::invalid(
                    "final learning-rate fraction must lie in [0, 1]",
                ));
            }
        }
        if let LrSchedule::InverseTime { half_life } = self.lr_schedule {
            if !(half_life > 0.0) {
                return Err(Error::invalid("learning-rate half life must be positive"));
            }
        }
        Ok(())
    }

    /// `k` parameter described by `k_init` and `k_trainable`; binned when
    /// `bins` is given.
    pub fn initial_kparam(&self, bins: Option<usize>) -> Result<KParam> {
        match bins {
            None => KParam::constant(self.k_init, self.k_trainable),
            Some(n) => KParam::binned(n, self.k_init, self.k_trainable),
        }
    }
}

/// Clean data, noise and times of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub x: Matrix,
    pub noise: Matrix,
    pub t: Vec<f64>,
}

impl TrainingBatch {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `z = t x + (1 − t) e`.
    pub fn noisy(&self) -> Matrix {
        let mut z = self.x.clone();
        for (j, &t) in self.t.iter().enumerate() {
            z.column_mut(j).scale_mut(t);
            z.column_mut(j).axpy(1.0 - t, &self.noise.column(j), 1.0);
        }
        z
    }

    /// `u = k x − (1 − k) e` with per-column `k`.
    pub fn target(&self, k: &[f64]) -> Matrix {
        let mut u = self.x.clone();
        for (j, &kj) in k.iter().enumerate() {
            u.column_mut(j).scale_mut(kj);
            u.column_mut(j)
                .axpy(-(1.0 - kj), &self.noise.column(j), 1.0);
        }
        u
    }
}

/// Draws times (one per column of `x`) and then the noise matrix.
pub fn draw_batch<R: Rng + ?Sized>(x: Matrix, measure: &TimeMeasure, rng: &mut R) -> TrainingBatch {
    let t: Vec<f64> = (0..x.ncols()).map(|_| measure.sample_t(rng)).collect();
    let noise = sample_noise(x.nrows(), x.ncols(), rng);
    TrainingBatch { x, noise, t }
}

/// Loss of a batch given the network output, with the gradients needed
/// for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    /// Mean of `per_sample`.
    pub loss: f64,
    pub per_sample: Vec<f64>,
    /// `∂loss/∂û`.
    pub grad_u_hat: Matrix,
    /// `∂loss/∂kⱼ` for each column's `k`.
    pub grad_k: Vec<f64>,
}

/// Per-sample losses and gradients for output `u_hat` on `batch`.
///
/// Where the denominator floor is active, its derivative in `k` is zero.
pub fn per_sample_losses(
    mode: LossMode,
    batch: &TrainingBatch,
    k: &[f64],
    u_hat: &Matrix,
    clamp_floor: f64,
    stop_grad_target: bool,
) -> BatchLoss {
    let b = batch.len();
    let inv_b = 1.0 / b as f64;
    let z = batch.noisy();
    let u = batch.target(k);
    let mut per_sample = vec![0.0; b];
    let mut grad_u_hat = Matrix::zeros(u_hat.nrows(), b);
    let mut grad_k = vec![0.0; b];
    for j in 0..b {
        let (x, e) = (batch.x.column(j), batch.noise.column(j));
        match mode {
            LossMode::ULoss => {
                let r = u_hat.column(j) - u.column(j);
                per_sample[j] = 0.5 * r.norm_squared();
                grad_u_hat.set_column(j, &(&r * inv_b));
                if !stop_grad_target {
                    // ∂u/∂k = x + e
                    grad_k[j] = -(r.dot(&x) + r.dot(&e)) * inv_b;
                }
            }
            LossMode::VLossAlg1 => {
                let t = batch.t[j];
                let kj = k[j];
                let (den, active) = clamped_denominator(t, kj, clamp_floor);
                let dden = if active { 0.0 } else { 1.0 - 2.0 * t };
                let a = 1.0 - 2.0 * kj;
                let mut loss = 0.0;
                let mut gk = 0.0;
                for i in 0..z.nrows() {
                    let zi = z[(i, j)];
                    let num = a * zi + u[(i, j)];
                    let num_hat = a * zi + u_hat[(i, j)];
                    let diff = num / den - num_hat / den;
                    loss += diff * diff;
                    grad_u_hat[(i, j)] = -diff * inv_b / den;
                    let dv_hat = (-2.0 * zi * den - num_hat * dden) / (den * den);
                    let dv = if stop_grad_target {
                        0.0
                    } else {
                        ((-2.0 * zi + x[i] + e[i]) * den - num * dden) / (den * den)
                    };
                    gk += diff * (dv - dv_hat);
                }
                per_sample[j] = 0.5 * loss;
                grad_k[j] = gk * inv_b;
            }
        }
    }
    let loss = per_sample.iter().sum::<f64>() * inv_b;
    BatchLoss {
        loss,
        per_sample,
        grad_u_hat,
        grad_k,
    }
}

/// Loss and gradients of one training step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub loss: f64,
    pub net_grads: Vec<f64>,
    /// Gradient with respect to the `k` logits; zero when `k` is frozen.
    pub k_grads: Vec<f64>,
}

/// Forward and backward pass on a fixed batch.
pub fn evaluate_batch(
    net: &ToyNetwork,
    kparam: &KParam,
    batch: &TrainingBatch,
    mode: LossMode,
    clamp_floor: f64,
    stop_grad_target: bool,
) -> Result<StepOutput> {
    if batch.is_empty() {
        return Err(Error::invalid("batch is empty"));
    }
    if batch.x.nrows() != net.dim() {
        return Err(Error::dim(alloc::format!(
            "data has dimension {} but the network expects {}",
            batch.x.nrows(),
            net.dim()
        )));
    }
    let partials: Vec<_> = batch.t.iter().map(|&t| kparam.k_with_partials(t)).collect();
    let k: Vec<f64> = partials.iter().map(|p| p.0).collect();
    let z = batch.noisy();
    let (u_hat, cache) = net.forward_cached(&z, &batch.t);
    let bl = per_sample_losses(mode, batch, &k, &u_hat, clamp_floor, stop_grad_target);
    if !bl.loss.is_finite() {
        return Err(Error::NonFiniteLoss { step: 0 });
    }
    let net_grads = net.backward(&cache, &bl.grad_u_hat);
    let mut k_grads = vec![0.0; kparam.logits().len()];
    if kparam.is_trainable() {
        for (j, (_, parts)) in partials.iter().enumerate() {
            for &(i, dk) in parts {
                k_grads[i] += bl.grad_k[j] * dk;
            }
        }
    }
    Ok(StepOutput {
        loss: bl.loss,
        net_grads,
        k_grads,
    })
}

/// Draws `t` and noise for the clean batch `x` and evaluates it.
pub fn training_step<R: Rng + ?Sized>(
    net: &ToyNetwork,
    kparam: &KParam,
    x: Matrix,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<StepOutput> {
    let batch = draw_batch(x, &config.measure, rng);
    evaluate_batch(
        net,
        kparam,
        &batch,
        config.loss_mode,
        config.clamp_floor,
        config.stop_grad_target,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRecord {
    pub step: usize,
    /// Batch loss before the update at this step.
    pub loss: f64,
    /// `k` after the update.
    pub k: KSnapshot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<HistoryRecord>,
    pub final_k: KSnapshot,
}

/// Runs `config.steps` optimizer steps on fresh batches from `data`.
///
/// Data and the `(t, noise)` draws use separate streams derived from
/// `config.seed`.
pub fn train(
    net: &mut ToyNetwork,
    kparam: &mut KParam,
    data: &DataSource,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    if data.ambient() != net.dim() {
        return Err(Error::dim(alloc::format!(
            "data has dimension {} but the network expects {}",
            data.ambient(),
            net.dim()
        )));
    }
    let mut data_rng = stream(config.seed, "kdiff.train.data");
    let mut noise_rng = stream(config.seed, "kdiff.train.noise");
    let mut net_state = OptimizerState::new(net.n_params());
    let mut k_state = OptimizerState::new(kparam.logits().len());
    let mut records = Vec::new();

    for step in 0..config.steps {
        let x = data.sample(config.batch, &mut data_rng);
        let out = training_step(net, kparam, x, config, &mut noise_rng).map_err(|e| match e {
            Error::NonFiniteLoss { .. } => Error::NonFiniteLoss { step },
            other => other,
        })?;
        let lr = config.optimizer.lr() * config.lr_schedule.factor(step, config.steps);
        let opt = config.optimizer.with_lr(lr);
        optimizer_step(net.params_mut(), &out.net_grads, &mut net_state, &opt)?;
        if kparam.is_trainable() {
            optimizer_step(kparam.logits_mut(), &out.k_grads, &mut k_state, &opt)?;
            kparam.clamp_logits();
        }
        if net.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence { step });
        }
        if step % config.log_every == 0 || step + 1 == config.steps {
            records.push(HistoryRecord {
                step,
                loss: out.loss,
                k: kparam.snapshot(),
            });
        }
    }
    Ok(TrainHistory {
        records,
        final_k: kparam.snapshot(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::DimensionPair;
    use crate::geometry::ManifoldBasis;

    fn toy_batch() -> TrainingBatch {
        let x = Matrix::from_row_slice(2, 3, &[0.5, -1.0, 0.2, 1.5, 0.3, -0.7]);
        let noise = Matrix::from_row_slice(2, 3, &[0.1, 0.9, -1.3, -0.4, 0.6, 0.8]);
        TrainingBatch {
            x,
            noise,
            t: vec![0.2, 0.55, 0.8],
        }
    }

    #[test]
    fn perfect_output_has_zero_loss_and_gradient() {
        let batch = toy_batch();
        let k = [0.3, 0.6, 0.9];
        let u = batch.target(&k);
        for mode in [LossMode::ULoss, LossMode::VLossAlg1] {
            let bl = per_sample_losses(mode, &batch, &k, &u, 0.05, false);
            assert_eq!(bl.loss, 0.0);
            assert!(bl.grad_u_hat.iter().all(|g| *g == 0.0));
            assert!(bl.grad_k.iter().all(|g| *g == 0.0));
        }
    }

    #[test]
    fn velocity_loss_is_kappa_scaled() {
        let batch = toy_batch();
        let k = [0.3, 0.6, 0.9];
        let u_hat = Matrix::from_element(2, 3, 0.25);
        let ul = per_sample_losses(LossMode::ULoss, &batch, &k, &u_hat, 0.05, false);
        let vl = per_sample_losses(LossMode::VLossAlg1, &batch, &k, &u_hat, 0.05, false);
        for j in 0..3 {
            let den = k[j] * (1.0 - batch.t[j]) + (1.0 - k[j]) * batch.t[j];
            let kappa = 1.0 / den;
            assert!((vl.per_sample[j] - kappa * kappa * ul.per_sample[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn stop_grad_removes_target_path() {
        let batch = toy_batch();
        let k = [0.3, 0.6, 0.9];
        let u_hat = Matrix::from_element(2, 3, 0.25);
        let bl = per_sample_losses(LossMode::ULoss, &batch, &k, &u_hat, 0.05, true);
        assert!(bl.grad_k.iter().all(|g| *g == 0.0));
        let bl = per_sample_losses(LossMode::VLossAlg1, &batch, &k, &u_hat, 0.05, true);
        assert!(bl.grad_k.iter().any(|g| *g != 0.0));
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.clamp_floor = 1.0;
        assert!(c.validate().is_err());
        let c = TrainConfig {
            batch: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let dims = DimensionPair::new(4, 2).unwrap();
        let data = DataSource::Manifold(ManifoldBasis::axis_aligned(dims));
        let config = TrainConfig {
            steps: 30,
            batch: 8,
            log_every: 5,
            seed: 11,
            ..TrainConfig::default()
        };
        let run = || {
            let mut net = ToyNetwork::pure_linear_zeros(4);
            let mut k = config.initial_kparam(None).unwrap();
            let h = train(&mut net, &mut k, &data, &config).unwrap();
            (h, net)
        };
        let (a, na) = run();
        let (b, nb) = run();
        assert_eq!(a, b);
        assert_eq!(na, nb);
        assert_eq!(a.records.len(), 7);
    }

    #[test]
    fn frozen_k_does_not_move() {
        let dims = DimensionPair::new(3, 1).unwrap();
        let data = DataSource::Manifold(ManifoldBasis::axis_aligned(dims));
        let config = TrainConfig {
            steps: 20,
            batch: 4,
            k_trainable: false,
            k_init: 0.3,
            ..TrainConfig::default()
        };
        let mut net = ToyNetwork::pure_linear_zeros(3);
        let mut k = config.initial_kparam(Some(4)).unwrap();
        let before = k.clone();
        train(&mut net, &mut k, &data, &config).unwrap();
        assert_eq!(k, before);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let dims = DimensionPair::new(3, 1).unwrap();
        let data = DataSource::Manifold(ManifoldBasis::axis_aligned(dims));
        let mut net = ToyNetwork::pure_linear_zeros(4);
        let mut k = KParam::constant_logit(0.0, true);
        let c = TrainConfig::default();
        assert!(matches!(
            train(&mut net, &mut k, &data, &c),
            Err(Error::Dim(_))
        ));
    }
}
