use alloc::vec::Vec;

use super::kparam::KParam;
use super::network::ToyNetwork;
use super::train::{evaluate_batch, per_sample_losses, LossMode, TrainingBatch};
use crate::{math, Result};

/// Worst disagreement between analytic and central-difference gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Index into network parameters followed by `k` logits.
    pub worst_index: usize,
    pub checked: usize,
}

/// `|a − b| / max(|a|, |b|, scale_floor)`.
pub fn relative_error(a: f64, b: f64, scale_floor: f64) -> f64 {
    let scale = math::abs(a).max(math::abs(b)).max(scale_floor);
    if scale == 0.0 {
        0.0
    } else {
        math::abs(a - b) / scale
    }
}

fn batch_loss(
    net: &ToyNetwork,
    kparam: &KParam,
    batch: &TrainingBatch,
    mode: LossMode,
    clamp_floor: f64,
) -> f64 {
    let k: Vec<f64> = batch.t.iter().map(|&t| kparam.k_value(t)).collect();
    let u_hat = net.forward(&batch.noisy(), &batch.t);
    per_sample_losses(mode, batch, &k, &u_hat, clamp_floor, false).loss
}

/// Compares [`evaluate_batch`] gradients against central differences of
/// the loss with step `h`, over every network parameter and every `k`
/// logit (the latter only when `k` is trainable).
///
/// Errors are relative to `max(|analytic|, |numeric|, scale_floor · ‖g‖∞)`,
/// where `‖g‖∞` is the largest analytic gradient entry.
pub fn gradient_check(
    net: &ToyNetwork,
    kparam: &KParam,
    batch: &TrainingBatch,
    mode: LossMode,
    clamp_floor: f64,
    h: f64,
    scale_floor: f64,
) -> Result<GradCheck> {
    let out = evaluate_batch(net, kparam, batch, mode, clamp_floor, false)?;
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
        checked: 0,
    };
    let g_max = out
        .net_grads
        .iter()
        .chain(out.k_grads.iter())
        .fold(0.0f64, |m, g| m.max(math::abs(*g)));
    let floor = scale_floor * g_max;
    let mut probe = net.clone();
    for i in 0..net.n_params() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let plus = batch_loss(&probe, kparam, batch, mode, clamp_floor);
        probe.params_mut()[i] = orig - h;
        let minus = batch_loss(&probe, kparam, batch, mode, clamp_floor);
        probe.params_mut()[i] = orig;
        record(
            &mut report,
            i,
            out.net_grads[i],
            (plus - minus) / (2.0 * h),
            floor,
        );
    }
    if kparam.is_trainable() {
        let mut kprobe = kparam.clone();
        for i in 0..kparam.logits().len() {
            let orig = kprobe.logits()[i];
            kprobe.logits_mut()[i] = orig + h;
            let plus = batch_loss(net, &kprobe, batch, mode, clamp_floor);
            kprobe.logits_mut()[i] = orig - h;
            let minus = batch_loss(net, &kprobe, batch, mode, clamp_floor);
            kprobe.logits_mut()[i] = orig;
            let idx = net.n_params() + i;
            record(
                &mut report,
                idx,
                out.k_grads[i],
                (plus - minus) / (2.0 * h),
                floor,
            );
        }
    }
    Ok(report)
}

fn record(report: &mut GradCheck, index: usize, analytic: f64, numeric: f64, floor: f64) {
    let err = relative_error(analytic, numeric, floor);
    report.checked += 1;
    if err > report.max_rel_error || err.is_nan() {
        report.max_rel_error = err;
        report.worst_index = index;
    }
}
