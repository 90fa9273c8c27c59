use alloc::vec;
use alloc::vec::Vec;

use crate::{math, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
        }
    }

    pub fn lr(&self) -> f64 {
        match self {
            Optimizer::Sgd { lr } | Optimizer::Adam { lr, .. } => *lr,
        }
    }

    pub fn with_lr(mut self, new_lr: f64) -> Self {
        match &mut self {
            Optimizer::Sgd { lr } | Optimizer::Adam { lr, .. } => *lr = new_lr,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr() > 0.0 && self.lr().is_finite()) {
            return Err(Error::invalid(alloc::format!(
                "learning rate must be positive, got {}",
                self.lr()
            )));
        }
        if let Optimizer::Adam {
            beta1, beta2, eps, ..
        } = *self
        {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(Error::invalid("Adam needs betas in [0, 1) and eps > 0"));
            }
        }
        Ok(())
    }
}

/// Learning-rate multiplier over the run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Linear ramp from 1 at the first step to `final_fraction` at the last.
    LinearDecay { final_fraction: f64 },
    /// `1 / (1 + step / half_life)`.
    InverseTime { half_life: f64 },
}

impl LrSchedule {
    pub fn factor(&self, step: usize, steps: usize) -> f64 {
        match *self {
            LrSchedule::Constant => 1.0,
            LrSchedule::LinearDecay { final_fraction } => {
                if steps <= 1 {
                    return 1.0;
                }
                let progress = step as f64 / (steps - 1) as f64;
                1.0 + (final_fraction - 1.0) * progress.min(1.0)
            }
            LrSchedule::InverseTime { half_life } => 1.0 / (1.0 + step as f64 / half_life),
        }
    }
}

/// Adam moments and step counter. Unused by SGD.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerState {
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// One SGD or bias-corrected Adam update, in place.
pub fn optimizer_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
    optimizer: &Optimizer,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::dim(alloc::format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    state.steps += 1;
    match *optimizer {
        Optimizer::Sgd { lr } => {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        Optimizer::Adam {
            lr,
            beta1,
            beta2,
            eps,
        } => {
            if state.m.len() != params.len() {
                state.m = vec![0.0; params.len()];
                state.v = vec![0.0; params.len()];
            }
            let n = state.steps as i32;
            let c1 = 1.0 - libm::pow(beta1, n as f64);
            let c2 = 1.0 - libm::pow(beta2, n as f64);
            for i in 0..params.len() {
                let g = grads[i];
                state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
                state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
                let m_hat = state.m[i] / c1;
                let v_hat = state.v[i] / c2;
                params[i] -= lr * m_hat / (math::sqrt(v_hat) + eps);
            }
        }
    }
    Ok(())
}
