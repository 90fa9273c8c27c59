//! Equilibrium weights, optimal losses and optimal prediction targets.
//!
//! Every quantity here is a function of a handful of scalar integrals of the
//! effective measure `D̃ = density · κ²` (a [`MomentSet`]). For the linear
//! denoiser `û = W z` trained on whitened data on a `d`-dimensional subspace
//! of `R^D`, the equilibrium weight is
//!
//! ```text
//! W* = c∥ PPᵀ + c⊥ (I − PPᵀ)
//! c∥ = (∫φα + ∫ψσ) / (∫α² + ∫σ²)        c⊥ = ∫ψσ / ∫σ²
//! ```
//!
//! and the loss at equilibrium splits into a part proportional to `d` and a
//! part proportional to `D − d`. For colored data with second moment
//! `Σ = Σᵢ λᵢ qᵢqᵢᵀ` the same formulas hold mode by mode with `λᵢ` scaling
//! the data terms.

use alloc::vec::Vec;

use crate::geometry::ManifoldBasis;
use crate::quadrature::GaussLegendre;
use crate::schedule::{Objective, TargetSpec};
use crate::{math, Error, Matrix, Result};

pub const DEFAULT_QUAD_NODES: usize = 64;

/// Scalar integrals of the effective measure.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentSet {
    /// ∫D̃
    pub mass: f64,
    /// ∫D̃ α
    pub alpha: f64,
    /// ∫D̃ σ
    pub sigma: f64,
    /// ∫D̃ α²
    pub alpha_sq: f64,
    /// ∫D̃ σ²
    pub sigma_sq: f64,
    /// ∫D̃ ασ
    pub alpha_sigma: f64,
    /// ∫D̃ φα
    pub phi_alpha: f64,
    /// ∫D̃ ψσ
    pub psi_sigma: f64,
    /// ∫D̃ φ²
    pub phi_sq: f64,
    /// ∫D̃ ψ²
    pub psi_sq: f64,
}

/// Integrates the moments of `objective` with an `quad_nodes`-point
/// Gauss–Legendre rule over the measure's interval.
pub fn compute_moments(objective: &Objective, quad_nodes: usize) -> Result<MomentSet> {
    let rule = GaussLegendre::new(quad_nodes)?;
    compute_moments_with(objective, &rule)
}

pub fn compute_moments_with(objective: &Objective, rule: &GaussLegendre) -> Result<MomentSet> {
    let (lo, hi) = objective.measure.interval();
    let mut m = MomentSet::default();
    for (t, w) in rule.mapped(lo, hi) {
        let weight = objective.effective_weight(t)?;
        let a = objective.process.alpha(t);
        let s = objective.process.sigma(t);
        let phi = objective.target.phi(t);
        let psi = objective.target.psi(t);
        let values = [weight, a, s, phi, psi];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::QuadratureDivergence { t });
        }
        let ww = w * weight;
        m.mass += ww;
        m.alpha += ww * a;
        m.sigma += ww * s;
        m.alpha_sq += ww * a * a;
        m.sigma_sq += ww * s * s;
        m.alpha_sigma += ww * a * s;
        m.phi_alpha += ww * phi * a;
        m.psi_sigma += ww * psi * s;
        m.phi_sq += ww * phi * phi;
        m.psi_sq += ww * psi * psi;
    }
    Ok(m)
}

/// Moments of flow matching with uniform `t` and u-loss for the target
/// `u = k x − (1 − k) n`.
pub fn canonical_moments(k: f64) -> Result<MomentSet> {
    compute_moments(
        &Objective::flow_matching(TargetSpec::k_target(k)?),
        DEFAULT_QUAD_NODES,
    )
}

/// Ambient dimension `D` and intrinsic dimension `d`, `1 <= d <= D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimensionPair {
    ambient: usize,
    intrinsic: usize,
}

impl DimensionPair {
    pub fn new(ambient: usize, intrinsic: usize) -> Result<Self> {
        if intrinsic == 0 {
            return Err(Error::dim("intrinsic dimension must be at least 1"));
        }
        if intrinsic > ambient {
            return Err(Error::dim(alloc::format!(
                "intrinsic dimension {intrinsic} exceeds ambient dimension {ambient}"
            )));
        }
        Ok(Self { ambient, intrinsic })
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn intrinsic(&self) -> usize {
        self.intrinsic
    }

    pub fn codimension(&self) -> usize {
        self.ambient - self.intrinsic
    }
}

/// Eigen-decomposition of a data second moment `Σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: Option<Matrix>,
}

impl Spectrum {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::dim("spectrum is empty"));
        }
        if let Some(bad) = eigenvalues.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::invalid(alloc::format!(
                "eigenvalue {bad} is negative or not finite"
            )));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors: None,
        })
    }

    /// Attaches eigenvectors as the columns of an orthogonal `D × D` matrix.
    pub fn with_eigenvectors(mut self, q: Matrix) -> Result<Self> {
        let n = self.eigenvalues.len();
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::dim(alloc::format!(
                "eigenvector matrix is {}x{}, expected {n}x{n}",
                q.nrows(),
                q.ncols()
            )));
        }
        let gram = q.transpose() * &q;
        let err = (gram - Matrix::identity(n, n)).amax();
        if err > 1e-10 {
            return Err(Error::invalid(alloc::format!(
                "eigenvectors are not orthonormal (max deviation {err:e})"
            )));
        }
        self.eigenvectors = Some(q);
        Ok(self)
    }

    /// The whitened-manifold spectrum: `d` ones followed by `D − d` zeros.
    pub fn binary(dims: DimensionPair) -> Self {
        let mut eigenvalues = alloc::vec![0.0; dims.ambient()];
        eigenvalues[..dims.intrinsic()].fill(1.0);
        Self {
            eigenvalues,
            eigenvectors: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> Option<&Matrix> {
        self.eigenvectors.as_ref()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

/// Coefficients of `W*` on the data subspace and its complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumCoeffs {
    pub parallel: f64,
    pub perpendicular: f64,
}

impl EquilibriumCoeffs {
    /// `W* = c∥ PPᵀ + c⊥ (I − PPᵀ)`.
    pub fn weight(&self, basis: &ManifoldBasis) -> Matrix {
        let proj = basis.projector();
        let n = basis.ambient();
        &proj * self.parallel + (Matrix::identity(n, n) - &proj) * self.perpendicular
    }
}

pub fn optimal_weight_coeffs(m: &MomentSet) -> Result<EquilibriumCoeffs> {
    let den_par = m.alpha_sq + m.sigma_sq;
    if !(den_par > 0.0) {
        return Err(Error::SingularEquilibrium("∫D̃(α² + σ²) is not positive"));
    }
    if !(m.sigma_sq > 0.0) {
        return Err(Error::SingularEquilibrium("∫D̃σ² is not positive"));
    }
    Ok(EquilibriumCoeffs {
        parallel: (m.phi_alpha + m.psi_sigma) / den_par,
        perpendicular: m.psi_sigma / m.sigma_sq,
    })
}

/// Loss at equilibrium and its two contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalLoss {
    pub total: f64,
    /// Intra-manifold part, proportional to `d`.
    pub parallel: f64,
    /// Residual part from the orthogonal complement, proportional to `D − d`.
    pub perpendicular: f64,
}

pub fn optimal_loss(m: &MomentSet, dims: DimensionPair) -> Result<OptimalLoss> {
    // Validates the denominators.
    optimal_weight_coeffs(m)?;
    let d = dims.intrinsic() as f64;
    let codim = dims.codimension() as f64;
    let cross = m.phi_alpha + m.psi_sigma;
    let parallel = 0.5 * d * (m.phi_sq + m.psi_sq - cross * cross / (m.alpha_sq + m.sigma_sq));
    let perpendicular = 0.5 * codim * (m.psi_sq - m.psi_sigma * m.psi_sigma / m.sigma_sq);
    Ok(OptimalLoss {
        total: parallel + perpendicular,
        parallel,
        perpendicular,
    })
}

/// Closed form of the optimal loss for flow matching, uniform `t`, u-loss
/// and target `u = k x − (1 − k) n`:
/// `(2(D + d)k² − 4Dk + 2D + 3d) / 16`.
pub fn optimal_loss_poly(k: f64, dims: DimensionPair) -> f64 {
    let big = dims.ambient() as f64;
    let small = dims.intrinsic() as f64;
    (2.0 * (big + small) * k * k - 4.0 * big * k + (2.0 * big + 3.0 * small)) / 16.0
}

/// `k* = D / (D + d)`.
pub fn optimal_k(dims: DimensionPair) -> f64 {
    let big = dims.ambient() as f64;
    big / (big + dims.intrinsic() as f64)
}

/// Per-mode equilibrium coefficient `∫D̃(λφα + ψσ) / ∫D̃(λα² + σ²)`.
pub fn colored_mode_coefficient(lambda: f64, m: &MomentSet) -> Result<f64> {
    let den = lambda * m.alpha_sq + m.sigma_sq;
    if !(den > 0.0) {
        return Err(Error::SingularEquilibrium("∫D̃(λα² + σ²) is not positive"));
    }
    Ok((lambda * m.phi_alpha + m.psi_sigma) / den)
}

/// `W* = Σᵢ cᵢ qᵢqᵢᵀ`. Needs eigenvectors.
pub fn colored_optimal_weight(spectrum: &Spectrum, m: &MomentSet) -> Result<Matrix> {
    let q = spectrum
        .eigenvectors()
        .ok_or_else(|| Error::invalid("colored equilibrium weight needs eigenvectors"))?;
    let n = spectrum.dim();
    let mut scaled = q.clone();
    for (i, &lambda) in spectrum.eigenvalues().iter().enumerate() {
        let c = colored_mode_coefficient(lambda, m)?;
        scaled.column_mut(i).scale_mut(c);
    }
    let w = scaled * q.transpose();
    debug_assert_eq!(w.nrows(), n);
    Ok(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColoredLoss {
    pub total: f64,
    pub per_mode: Vec<f64>,
}

/// Optimal loss for colored data, mode by mode.
pub fn colored_optimal_loss(spectrum: &Spectrum, m: &MomentSet) -> Result<ColoredLoss> {
    let per_mode = spectrum
        .eigenvalues()
        .iter()
        .map(|&lambda| {
            let den = lambda * m.alpha_sq + m.sigma_sq;
            if !(den > 0.0) {
                return Err(Error::SingularEquilibrium("∫D̃(λα² + σ²) is not positive"));
            }
            let cross = lambda * m.phi_alpha + m.psi_sigma;
            Ok(0.5 * (lambda * m.phi_sq + m.psi_sq - cross * cross / den))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ColoredLoss {
        total: per_mode.iter().sum(),
        per_mode,
    })
}

/// Closed form of the colored optimal loss for flow matching, uniform `t`
/// and u-loss: `((D + TrΣ)k² − 2Dk + Σᵢ (1 + 4λᵢ)/(1 + λᵢ)) / 8`.
pub fn colored_optimal_loss_poly(k: f64, spectrum: &Spectrum) -> f64 {
    let big = spectrum.dim() as f64;
    let tail: f64 = spectrum
        .eigenvalues()
        .iter()
        .map(|l| (1.0 + 4.0 * l) / (1.0 + l))
        .sum();
    ((big + spectrum.trace()) * k * k - 2.0 * big * k + tail) / 8.0
}

/// `k* = D / (D + TrΣ)`.
pub fn colored_optimal_k(spectrum: &Spectrum) -> f64 {
    let big = spectrum.dim() as f64;
    big / (big + spectrum.trace())
}

/// Golden-section minimization of a unimodal function on `[0, 1]`.
///
/// On ties both ends move inward, so a constant function returns `0.5`.
pub fn argmin_k<F: FnMut(f64) -> f64>(mut loss_fn: F, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let tol = if tol > 0.0 { tol } else { 1e-10 };
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = loss_fn(c);
    let mut fd = loss_fn(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = loss_fn(c);
        } else if fd < fc {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = loss_fn(d);
        } else {
            a = c;
            b = d;
            c = b - INV_PHI * (b - a);
            d = a + INV_PHI * (b - a);
            fc = loss_fn(c);
            fd = loss_fn(d);
        }
    }
    0.5 * (a + b)
}

/// Relative-or-absolute closeness used by the analytic cross-checks.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    math::abs(a - b) <= tol * (1.0 + math::abs(a).max(math::abs(b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(big: usize, small: usize) -> DimensionPair {
        DimensionPair::new(big, small).unwrap()
    }

    #[test]
    fn canonical_moments_match_polynomial_integrals() {
        let m = compute_moments(&Objective::flow_matching(TargetSpec::V), 64).unwrap();
        assert!((m.mass - 1.0).abs() < 1e-12);
        assert!((m.alpha - 0.5).abs() < 1e-12);
        assert!((m.sigma - 0.5).abs() < 1e-12);
        assert!((m.alpha_sq - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.sigma_sq - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.alpha_sigma - 1.0 / 6.0).abs() < 1e-12);

        let m = canonical_moments(1.0).unwrap();
        assert!((m.phi_alpha - 0.5).abs() < 1e-12);
        assert_eq!(m.psi_sigma, 0.0);

        // ∫0.3 t dt = 0.15, ∫−0.7(1 − t) dt = −0.35
        let m = canonical_moments(0.3).unwrap();
        assert!((m.phi_alpha - 0.15).abs() < 1e-12);
        assert!((m.psi_sigma + 0.35).abs() < 1e-12);
    }

    #[test]
    fn moments_need_two_nodes() {
        let obj = Objective::flow_matching(TargetSpec::V);
        assert!(compute_moments(&obj, 1).is_err());
    }

    #[test]
    fn moments_report_non_finite_integrands() {
        let obj = Objective::flow_matching(TargetSpec::custom(|t| 1.0 / (t - t), |_| 0.0));
        let err = compute_moments(&obj, 8).unwrap_err();
        assert!(matches!(err, Error::QuadratureDivergence { .. }));
    }

    #[test]
    fn equilibrium_coefficients() {
        let c = optimal_weight_coeffs(&canonical_moments(1.0).unwrap()).unwrap();
        assert!((c.parallel - 0.75).abs() < 1e-12 && c.perpendicular.abs() < 1e-12);
        let c = optimal_weight_coeffs(&canonical_moments(0.5).unwrap()).unwrap();
        assert!(c.parallel.abs() < 1e-12 && (c.perpendicular + 0.75).abs() < 1e-12);
        let c = optimal_weight_coeffs(&canonical_moments(0.0).unwrap()).unwrap();
        assert!((c.parallel + 0.75).abs() < 1e-12 && (c.perpendicular + 1.5).abs() < 1e-12);
    }

    #[test]
    fn singular_equilibrium() {
        let m = MomentSet::default();
        assert!(matches!(
            optimal_weight_coeffs(&m),
            Err(Error::SingularEquilibrium(_))
        ));
        assert!(optimal_loss(&m, dims(2, 1)).is_err());
    }

    #[test]
    fn optimal_loss_examples() {
        for d in [1, 3, 8] {
            let l = optimal_loss(&canonical_moments(1.0).unwrap(), dims(d, d)).unwrap();
            assert!(l.perpendicular.abs() < 1e-12);
            assert!((l.total - 5.0 * d as f64 / 16.0).abs() < 1e-12);
            let l = optimal_loss(&canonical_moments(0.0).unwrap(), dims(d, d)).unwrap();
            assert!((l.total - 5.0 * d as f64 / 16.0).abs() < 1e-12);
        }
        let l = optimal_loss(&canonical_moments(0.5).unwrap(), dims(2, 1)).unwrap();
        assert!((l.total - 0.28125).abs() < 1e-12);
        // x-prediction removes the residual part whatever the codimension.
        let l = optimal_loss(&canonical_moments(1.0).unwrap(), dims(40, 3)).unwrap();
        assert!(l.perpendicular.abs() < 1e-12);
    }

    #[test]
    fn polynomial_examples() {
        assert!((optimal_loss_poly(1.0, dims(4, 4)) - 1.25).abs() < 1e-15);
        for d in [1, 2, 7] {
            assert!((optimal_loss_poly(0.5, dims(d, d)) - d as f64 / 4.0).abs() < 1e-15);
        }
        assert!((optimal_loss_poly(0.0, dims(2, 1)) - 0.4375).abs() < 1e-15);
    }

    #[test]
    fn optimal_k_examples() {
        assert_eq!(optimal_k(dims(5, 5)), 0.5);
        assert!((optimal_k(dims(100, 10)) - 0.909_091).abs() < 1e-6);
        assert!((optimal_k(dims(64, 4)) - 16.0 / 17.0).abs() < 1e-15);
        let numeric = argmin_k(|k| optimal_loss_poly(k, dims(64, 4)), 1e-10);
        assert!((numeric - 16.0 / 17.0).abs() < 1e-8);
    }

    #[test]
    fn argmin_examples() {
        let k = argmin_k(|k| optimal_loss_poly(k, dims(100, 10)), 1e-10);
        assert!((k - 100.0 / 110.0).abs() < 1e-8);
        assert_eq!(argmin_k(|_| 3.0, 1e-8), 0.5);
        let s = Spectrum::new(alloc::vec![2.0, 1.0, 0.0]).unwrap();
        let k = argmin_k(|k| colored_optimal_loss_poly(k, &s), 1e-10);
        assert!((k - 0.5).abs() < 1e-8);
        // Boundary minimum.
        let k = argmin_k(|k| (k - 1.0) * (k - 1.0), 1e-10);
        assert!((k - 1.0).abs() < 1e-8);
    }

    #[test]
    fn dimension_pair_validation() {
        assert!(DimensionPair::new(3, 0).is_err());
        assert!(DimensionPair::new(3, 4).is_err());
        assert_eq!(DimensionPair::new(3, 3).unwrap().codimension(), 0);
    }

    #[test]
    fn spectrum_validation() {
        assert!(Spectrum::new(alloc::vec![]).is_err());
        assert!(Spectrum::new(alloc::vec![1.0, -0.1]).is_err());
        let s = Spectrum::new(alloc::vec![1.0, 0.5]).unwrap();
        assert!(s.clone().with_eigenvectors(Matrix::identity(3, 3)).is_err());
        assert!(s
            .clone()
            .with_eigenvectors(Matrix::from_element(2, 2, 1.0))
            .is_err());
        assert!(s.with_eigenvectors(Matrix::identity(2, 2)).is_ok());
    }

    #[test]
    fn colored_single_mode() {
        let s = Spectrum::new(alloc::vec![3.0]).unwrap();
        let l = colored_optimal_loss(&s, &canonical_moments(0.5).unwrap()).unwrap();
        assert!((l.total - 0.40625).abs() < 1e-12);
        assert!((colored_optimal_loss_poly(0.5, &s) - 0.40625).abs() < 1e-15);
    }

    #[test]
    fn colored_optimal_k_examples() {
        let s = Spectrum::new(alloc::vec![2.0, 1.0, 0.0]).unwrap();
        assert_eq!(colored_optimal_k(&s), 0.5);
        let s = Spectrum::new(alloc::vec![0.0; 6]).unwrap();
        assert_eq!(colored_optimal_k(&s), 1.0);
        let s = Spectrum::binary(dims(10, 4));
        assert_eq!(colored_optimal_k(&s), optimal_k(dims(10, 4)));
    }

    #[test]
    fn colored_mode_coefficient_limits() {
        for k in [0.2, 0.5, 0.9] {
            let m = canonical_moments(k).unwrap();
            let c = colored_mode_coefficient(1e6, &m).unwrap();
            assert!((c - m.phi_alpha / m.alpha_sq).abs() < 1e-5);
            let c = colored_mode_coefficient(0.0, &m).unwrap();
            assert_eq!(c, optimal_weight_coeffs(&m).unwrap().perpendicular);
            let c = colored_mode_coefficient(1.0, &m).unwrap();
            assert_eq!(c, optimal_weight_coeffs(&m).unwrap().parallel);
        }
    }

    #[test]
    fn colored_weight_requires_eigenvectors() {
        let s = Spectrum::new(alloc::vec![1.0, 0.0]).unwrap();
        assert!(colored_optimal_weight(&s, &canonical_moments(0.5).unwrap()).is_err());
    }
}
