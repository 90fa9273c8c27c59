//! Learnable prediction targets `u = k x − (1 − k) n` and their training.
//!
//! The target interpolates between noise prediction (`k = 0`), velocity
//! prediction (`k = ½`, up to a factor 2) and data prediction (`k = 1`).
//! A network trained on `u` yields a velocity through
//!
//! ```text
//! v = ((1 − 2k) z + u) / max(k(1 − t) + (1 − k)t, floor)
//! ```
//!
//! `k` is `sigmoid(w)` for a single logit `w`, or a piecewise-linear
//! interpolation of sigmoids at `N + 1` evenly spaced knots.

mod gradcheck;
mod kparam;
mod network;
mod optim;
mod train;

pub use gradcheck::{gradient_check, relative_error, GradCheck};
pub use kparam::{
    clamped_denominator, conversion_denominator, u_to_v, u_to_v_columns, KMode, KParam, KSnapshot,
    DEFAULT_BINS, LOGIT_LIMIT, PROBE_TIMES,
};
pub use network::{silu, silu_prime, ForwardCache, ToyNetwork};
pub use optim::{optimizer_step, LrSchedule, Optimizer, OptimizerState};
pub use train::{
    draw_batch, evaluate_batch, per_sample_losses, train, training_step, BatchLoss, HistoryRecord,
    LossMode, StepOutput, TrainConfig, TrainHistory, TrainingBatch,
};

/// Default floor on the velocity-conversion denominator.
pub const DEFAULT_CLAMP_FLOOR: f64 = 0.05;
