//! Process coefficients, prediction and loss targets, κ and time measures.
//!
//! The forward process mixes data `x` and noise `n` as `z = α x + σ n`; the
//! network regresses `u = φ x + ψ n`. Training may measure the error in a
//! different variable `w = ξ x + η n`, whose error is `κ` times the error in
//! `u` with
//!
//! ```text
//! κ = (ξσ − ηα) / (φσ − ψα)
//! ```

use alloc::sync::Arc;
use core::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::math;
use crate::{Error, Result};

/// A coefficient as a function of diffusion time.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Smallest |φσ − ψα| treated as invertible.
pub const DEGENERATE_EPS: f64 = f64::EPSILON;

/// Signal and noise coefficients (α, σ) of the forward process.
#[derive(Clone)]
pub enum ProcessSpec {
    /// α = t, σ = 1 − t. `t = 0` is pure noise, `t = 1` is data.
    FlowMatching,
    Custom {
        alpha: ScalarFn,
        sigma: ScalarFn,
    },
}

impl ProcessSpec {
    pub fn custom(
        alpha: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ProcessSpec::Custom {
            alpha: Arc::new(alpha),
            sigma: Arc::new(sigma),
        }
    }

    #[inline]
    pub fn alpha(&self, t: f64) -> f64 {
        match self {
            ProcessSpec::FlowMatching => t,
            ProcessSpec::Custom { alpha, .. } => alpha(t),
        }
    }

    #[inline]
    pub fn sigma(&self, t: f64) -> f64 {
        match self {
            ProcessSpec::FlowMatching => 1.0 - t,
            ProcessSpec::Custom { sigma, .. } => sigma(t),
        }
    }
}

impl fmt::Debug for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessSpec::FlowMatching => f.write_str("FlowMatching"),
            ProcessSpec::Custom { .. } => f.write_str("Custom"),
        }
    }
}

/// Prediction target coefficients (φ, ψ).
#[derive(Clone)]
pub enum TargetSpec {
    /// Noise prediction: φ = 0, ψ = 1.
    Epsilon,
    /// Data prediction: φ = 1, ψ = 0.
    X,
    /// Velocity prediction: φ = 1, ψ = −1.
    V,
    /// `u = k x − (1 − k) n`. Build with [`TargetSpec::k_target`].
    K {
        k: f64,
    },
    Custom {
        phi: ScalarFn,
        psi: ScalarFn,
    },
}

impl TargetSpec {
    /// The k-parameterized target. `k` must lie in `[0, 1]`.
    pub fn k_target(k: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&k) {
            return Err(Error::invalid(alloc::format!("k = {k} is outside [0, 1]")));
        }
        Ok(TargetSpec::K { k })
    }

    pub fn custom(
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        psi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TargetSpec::Custom {
            phi: Arc::new(phi),
            psi: Arc::new(psi),
        }
    }

    #[inline]
    pub fn phi(&self, t: f64) -> f64 {
        match self {
            TargetSpec::Epsilon => 0.0,
            TargetSpec::X | TargetSpec::V => 1.0,
            TargetSpec::K { k } => *k,
            TargetSpec::Custom { phi, .. } => phi(t),
        }
    }

    #[inline]
    pub fn psi(&self, t: f64) -> f64 {
        match self {
            TargetSpec::Epsilon => 1.0,
            TargetSpec::X => 0.0,
            TargetSpec::V => -1.0,
            TargetSpec::K { k } => -(1.0 - *k),
            TargetSpec::Custom { psi, .. } => psi(t),
        }
    }
}

impl fmt::Debug for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSpec::Epsilon => f.write_str("Epsilon"),
            TargetSpec::X => f.write_str("X"),
            TargetSpec::V => f.write_str("V"),
            TargetSpec::K { k } => write!(f, "K({k})"),
            TargetSpec::Custom { .. } => f.write_str("Custom"),
        }
    }
}

/// The variable `w = ξ x + η n` whose squared error is minimized.
#[derive(Clone)]
pub enum LossTargetSpec {
    /// `w = u`, so κ ≡ 1.
    U,
    X,
    Eps,
    V,
    Custom {
        xi: ScalarFn,
        eta: ScalarFn,
    },
}

impl LossTargetSpec {
    pub fn custom(
        xi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        eta: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        LossTargetSpec::Custom {
            xi: Arc::new(xi),
            eta: Arc::new(eta),
        }
    }

    /// `(ξ, η)`, or `None` for the u-loss whose coefficients are the target's.
    pub fn coefficients(&self, t: f64) -> Option<(f64, f64)> {
        match self {
            LossTargetSpec::U => None,
            LossTargetSpec::X => Some((1.0, 0.0)),
            LossTargetSpec::Eps => Some((0.0, 1.0)),
            LossTargetSpec::V => Some((1.0, -1.0)),
            LossTargetSpec::Custom { xi, eta } => Some((xi(t), eta(t))),
        }
    }
}

impl fmt::Debug for LossTargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossTargetSpec::U => f.write_str("U"),
            LossTargetSpec::X => f.write_str("X"),
            LossTargetSpec::Eps => f.write_str("Eps"),
            LossTargetSpec::V => f.write_str("V"),
            LossTargetSpec::Custom { .. } => f.write_str("Custom"),
        }
    }
}

/// `φσ − ψα`, the determinant of the `(x, n) → (z, u)` map.
#[inline]
pub fn target_determinant(process: &ProcessSpec, target: &TargetSpec, t: f64) -> f64 {
    target.phi(t) * process.sigma(t) - target.psi(t) * process.alpha(t)
}

/// Error scaling factor κ at time `t`.
///
/// `clamp_floor`, when set, replaces |φσ − ψα| by at least that value
/// instead of failing on a singular target.
pub fn kappa(
    process: &ProcessSpec,
    target: &TargetSpec,
    loss: &LossTargetSpec,
    t: f64,
    clamp_floor: Option<f64>,
) -> Result<f64> {
    let Some((xi, eta)) = loss.coefficients(t) else {
        return Ok(1.0);
    };
    let mut den = target_determinant(process, target, t);
    match clamp_floor {
        Some(floor) if math::abs(den) < floor => {
            den = if den < 0.0 { -floor } else { floor };
        }
        _ => {
            if math::abs(den) < DEGENERATE_EPS {
                return Err(Error::DegenerateTarget {
                    t,
                    denominator: den,
                });
            }
        }
    }
    Ok((xi * process.sigma(t) - eta * process.alpha(t)) / den)
}

/// Recovers `(x̂, n̂)` from `(z, û)` by inverting the process/target map.
pub fn recover_data_noise(
    process: &ProcessSpec,
    target: &TargetSpec,
    t: f64,
    z: f64,
    u: f64,
) -> Result<(f64, f64)> {
    let det = target_determinant(process, target, t);
    if math::abs(det) < DEGENERATE_EPS {
        return Err(Error::DegenerateTarget {
            t,
            denominator: det,
        });
    }
    let (a, s) = (process.alpha(t), process.sigma(t));
    let (phi, psi) = (target.phi(t), target.psi(t));
    Ok(((-psi * z + s * u) / det, (phi * z - a * u) / det))
}

/// How diffusion times are drawn during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeSampler {
    Uniform,
    /// `logit(t) ~ N(mu, sigma²)`.
    LogitNormal {
        mu: f64,
        sigma: f64,
    },
}

/// A sampling distribution over `t` restricted to an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeMeasure {
    lo: f64,
    hi: f64,
    sampler: TimeSampler,
    /// Probability mass of the unrestricted sampler inside `[lo, hi]`.
    mass: f64,
}

impl Default for TimeMeasure {
    fn default() -> Self {
        Self::uniform()
    }
}

impl TimeMeasure {
    pub fn uniform() -> Self {
        Self {
            lo: 0.0,
            hi: 1.0,
            sampler: TimeSampler::Uniform,
            mass: 1.0,
        }
    }

    pub fn logit_normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(TimeSampler::LogitNormal { mu, sigma }, 0.0, 1.0)
    }

    pub fn new(sampler: TimeSampler, lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::invalid(alloc::format!(
                "time interval [{lo}, {hi}] must satisfy 0 <= lo < hi <= 1"
            )));
        }
        let mass = match sampler {
            TimeSampler::Uniform => 1.0,
            TimeSampler::LogitNormal { mu, sigma } => {
                if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
                    return Err(Error::invalid("logit-normal needs finite mu and sigma > 0"));
                }
                let m = logit_normal_cdf(hi, mu, sigma) - logit_normal_cdf(lo, mu, sigma);
                if m <= 0.0 {
                    return Err(Error::invalid("time interval carries no probability mass"));
                }
                m
            }
        };
        Ok(Self {
            lo,
            hi,
            sampler,
            mass,
        })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn sampler(&self) -> TimeSampler {
        self.sampler
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }

    /// Probability density of `t`; zero outside the interval.
    pub fn density(&self, t: f64) -> f64 {
        if !self.contains(t) {
            return 0.0;
        }
        match self.sampler {
            TimeSampler::Uniform => 1.0 / (self.hi - self.lo),
            TimeSampler::LogitNormal { mu, sigma } => {
                if t <= 0.0 || t >= 1.0 {
                    return 0.0;
                }
                let g = (math::logit(t) - mu) / sigma;
                math::normal_pdf(g) / (sigma * t * (1.0 - t)) / self.mass
            }
        }
    }

    /// Distribution function of `t`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= self.lo {
            return 0.0;
        }
        if t >= self.hi {
            return 1.0;
        }
        match self.sampler {
            TimeSampler::Uniform => (t - self.lo) / (self.hi - self.lo),
            TimeSampler::LogitNormal { mu, sigma } => {
                (logit_normal_cdf(t, mu, sigma) - logit_normal_cdf(self.lo, mu, sigma)) / self.mass
            }
        }
    }

    /// Maps a standard normal draw through the logit-normal transform.
    /// Returns `None` for the uniform sampler.
    pub fn from_normal_draw(&self, g: f64) -> Option<f64> {
        match self.sampler {
            TimeSampler::Uniform => None,
            TimeSampler::LogitNormal { mu, sigma } => Some(math::sigmoid(mu + sigma * g)),
        }
    }

    /// Draws one time. Logit-normal draws outside a restricted interval are
    /// rejected and redrawn.
    pub fn sample_t<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.sampler {
            TimeSampler::Uniform => self.lo + (self.hi - self.lo) * rng.random::<f64>(),
            TimeSampler::LogitNormal { mu, sigma } => loop {
                let g: f64 = rng.sample(StandardNormal);
                let t = math::sigmoid(mu + sigma * g);
                if self.contains(t) {
                    return t;
                }
            },
        }
    }
}

fn logit_normal_cdf(t: f64, mu: f64, sigma: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        math::normal_cdf((math::logit(t) - mu) / sigma)
    }
}

/// Effective measure weight `density(t) · κ(t)²`.
pub fn effective_weight<K>(measure: &TimeMeasure, kappa_fn: K, t: f64) -> Result<f64>
where
    K: Fn(f64) -> Result<f64>,
{
    let density = measure.density(t);
    let k = kappa_fn(t)?;
    Ok(density * k * k)
}

/// Everything that defines a training objective for a linear denoiser.
#[derive(Debug, Clone)]
pub struct Objective {
    pub process: ProcessSpec,
    pub target: TargetSpec,
    pub loss: LossTargetSpec,
    pub measure: TimeMeasure,
    /// Optional floor on |φσ − ψα| when evaluating κ. Off by default.
    pub kappa_floor: Option<f64>,
}

impl Objective {
    /// Flow matching, uniform time, u-loss.
    pub fn flow_matching(target: TargetSpec) -> Self {
        Self {
            process: ProcessSpec::FlowMatching,
            target,
            loss: LossTargetSpec::U,
            measure: TimeMeasure::uniform(),
            kappa_floor: None,
        }
    }

    pub fn with_loss(mut self, loss: LossTargetSpec) -> Self {
        self.loss = loss;
        self
    }

    pub fn with_measure(mut self, measure: TimeMeasure) -> Self {
        self.measure = measure;
        self
    }

    pub fn kappa(&self, t: f64) -> Result<f64> {
        kappa(&self.process, &self.target, &self.loss, t, self.kappa_floor)
    }

    pub fn effective_weight(&self, t: f64) -> Result<f64> {
        effective_weight(&self.measure, |s| self.kappa(s), t)
    }

    /// True when the objective is the one for which the optimal `k` has a
    /// closed form: flow matching, uniform `t` on `[0, 1]`, u-loss.
    pub fn is_canonical(&self) -> bool {
        matches!(self.process, ProcessSpec::FlowMatching)
            && matches!(self.loss, LossTargetSpec::U)
            && self.measure == TimeMeasure::uniform()
    }
}
