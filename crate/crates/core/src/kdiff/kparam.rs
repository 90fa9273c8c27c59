use alloc::vec;
use alloc::vec::Vec;

use crate::{math, Error, Matrix, Result};

/// Logits are kept within `±LOGIT_LIMIT`, where `sigmoid` is still
/// strictly between 0 and 1 in double precision.
pub const LOGIT_LIMIT: f64 = 36.0;

pub const DEFAULT_BINS: usize = 128;

/// Times at which a binned `k(t)` is reported.
pub const PROBE_TIMES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub enum KMode {
    Constant(f64),
    /// Logits at knots `tᵢ = i / N`, `N + 1` of them.
    Binned(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KParam {
    mode: KMode,
    trainable: bool,
}

impl KParam {
    /// Constant `k` given by its value in `(0, 1)`.
    pub fn constant(k: f64, trainable: bool) -> Result<Self> {
        Ok(Self {
            mode: KMode::Constant(checked_logit(k)?),
            trainable,
        })
    }

    pub fn constant_logit(w: f64, trainable: bool) -> Self {
        Self {
            mode: KMode::Constant(w),
            trainable,
        }
    }

    /// `bins + 1` knots, all starting at `k`.
    pub fn binned(bins: usize, k: f64, trainable: bool) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("binned k needs at least one bin"));
        }
        let w = checked_logit(k)?;
        Ok(Self {
            mode: KMode::Binned(vec![w; bins + 1]),
            trainable,
        })
    }

    pub fn binned_logits(logits: Vec<f64>, trainable: bool) -> Result<Self> {
        if logits.len() < 2 {
            return Err(Error::invalid("binned k needs at least two knots"));
        }
        Ok(Self {
            mode: KMode::Binned(logits),
            trainable,
        })
    }

    pub fn mode(&self) -> &KMode {
        &self.mode
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
    }

    pub fn is_binned(&self) -> bool {
        matches!(self.mode, KMode::Binned(_))
    }

    pub fn logits(&self) -> &[f64] {
        match &self.mode {
            KMode::Constant(w) => core::slice::from_ref(w),
            KMode::Binned(w) => w,
        }
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        match &mut self.mode {
            KMode::Constant(w) => core::slice::from_mut(w),
            KMode::Binned(w) => w,
        }
    }

    /// Pulls every logit back into `±LOGIT_LIMIT`.
    pub fn clamp_logits(&mut self) {
        for w in self.logits_mut() {
            *w = w.clamp(-LOGIT_LIMIT, LOGIT_LIMIT);
        }
    }

    pub fn k_value(&self, t: f64) -> f64 {
        self.k_with_partials(t).0
    }

    /// `k(t)` and up to two `(knot, ∂k/∂wᵢ)` pairs.
    pub fn k_with_partials(&self, t: f64) -> (f64, [(usize, f64); 2]) {
        match &self.mode {
            KMode::Constant(w) => {
                let (k, dk) = squash(*w);
                (k, [(0, dk), (0, 0.0)])
            }
            KMode::Binned(w) => {
                let bins = w.len() - 1;
                let pos = t.clamp(0.0, 1.0) * bins as f64;
                let i = (math::floor(pos) as usize).min(bins - 1);
                let frac = pos - i as f64;
                let (k0, d0) = squash(w[i]);
                let (k1, d1) = squash(w[i + 1]);
                (
                    (1.0 - frac) * k0 + frac * k1,
                    [(i, (1.0 - frac) * d0), (i + 1, frac * d1)],
                )
            }
        }
    }

    pub fn snapshot(&self) -> KSnapshot {
        match &self.mode {
            KMode::Constant(_) => KSnapshot::Constant(self.k_value(0.0)),
            KMode::Binned(_) => KSnapshot::Probes(PROBE_TIMES.map(|t| self.k_value(t))),
        }
    }
}

/// `k` as logged during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KSnapshot {
    Constant(f64),
    /// `k` at [`PROBE_TIMES`].
    Probes([f64; 5]),
}

impl KSnapshot {
    /// The constant value, or the mid-time probe for binned `k`.
    pub fn representative(&self) -> f64 {
        match self {
            KSnapshot::Constant(k) => *k,
            KSnapshot::Probes(p) => p[2],
        }
    }
}

/// `sigmoid(w)` and its derivative, with the logit limited to
/// `±LOGIT_LIMIT`. The derivative is zero beyond the limit.
fn squash(w: f64) -> (f64, f64) {
    let clipped = w.clamp(-LOGIT_LIMIT, LOGIT_LIMIT);
    let k = math::sigmoid(clipped);
    let dk = if clipped == w { k * (1.0 - k) } else { 0.0 };
    (k, dk)
}

fn checked_logit(k: f64) -> Result<f64> {
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::invalid(alloc::format!(
            "initial k must lie strictly inside (0, 1), got {k}"
        )));
    }
    Ok(math::logit(k).clamp(-LOGIT_LIMIT, LOGIT_LIMIT))
}

/// `k(1 − t) + (1 − k)t`, evaluated as `k + (1 − 2k)t` so that `k = ½`
/// gives exactly `½`.
#[inline]
pub fn conversion_denominator(t: f64, k: f64) -> f64 {
    k + (1.0 - 2.0 * k) * t
}

/// The denominator with the floor applied, and whether the floor is active.
#[inline]
pub fn clamped_denominator(t: f64, k: f64, floor: f64) -> (f64, bool) {
    let raw = conversion_denominator(t, k);
    if raw < floor {
        (floor, true)
    } else {
        (raw, false)
    }
}

/// `v = ((1 − 2k) z + u) / max(k(1 − t) + (1 − k)t, floor)`.
pub fn u_to_v(u: &[f64], z: &[f64], t: f64, k: f64, floor: f64) -> Vec<f64> {
    let (den, _) = clamped_denominator(t, k, floor);
    let a = 1.0 - 2.0 * k;
    u.iter()
        .zip(z)
        .map(|(ui, zi)| (a * zi + ui) / den)
        .collect()
}

/// Column-wise [`u_to_v`] with per-column `t` and `k`.
pub fn u_to_v_columns(u: &Matrix, z: &Matrix, t: &[f64], k: &[f64], floor: f64) -> Matrix {
    let mut v = u.clone();
    for (j, mut col) in v.column_iter_mut().enumerate() {
        let (den, _) = clamped_denominator(t[j], k[j], floor);
        let a = 1.0 - 2.0 * k[j];
        for (vi, zi) in col.iter_mut().zip(z.column(j).iter()) {
            *vi = (a * zi + *vi) / den;
        }
    }
    v
}
