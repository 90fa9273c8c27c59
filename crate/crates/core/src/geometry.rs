//! Synthetic data on linear manifolds.
//!
//! Samplers return `D × batch` matrices, one sample per column.

use alloc::vec::Vec;

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::analytic::{DimensionPair, Spectrum};
use crate::{Error, Matrix, Result};

/// Orthonormal basis `P` (`D × d`) of the data subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldBasis {
    p: Matrix,
}

impl ManifoldBasis {
    pub fn new(p: Matrix) -> Result<Self> {
        if p.ncols() == 0 || p.ncols() > p.nrows() {
            return Err(Error::dim(alloc::format!(
                "basis must be D x d with 1 <= d <= D, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        let d = p.ncols();
        let err = (p.transpose() * &p - Matrix::identity(d, d)).amax();
        if err > 1e-10 {
            return Err(Error::invalid(alloc::format!(
                "basis columns are not orthonormal (max deviation {err:e})"
            )));
        }
        Ok(Self { p })
    }

    /// The first `d` coordinate axes.
    pub fn axis_aligned(dims: DimensionPair) -> Self {
        Self {
            p: Matrix::identity(dims.ambient(), dims.intrinsic()),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn ambient(&self) -> usize {
        self.p.nrows()
    }

    pub fn intrinsic(&self) -> usize {
        self.p.ncols()
    }

    pub fn dims(&self) -> DimensionPair {
        DimensionPair::new(self.ambient(), self.intrinsic()).expect("basis shape is validated")
    }

    /// `PPᵀ`.
    pub fn projector(&self) -> Matrix {
        &self.p * self.p.transpose()
    }

    /// `I − PPᵀ`.
    pub fn complement_projector(&self) -> Matrix {
        let n = self.ambient();
        Matrix::identity(n, n) - self.projector()
    }

    /// `PPᵀ z` for a batch of columns.
    pub fn project(&self, z: &Matrix) -> Matrix {
        &self.p * (self.p.transpose() * z)
    }

    /// `(I − PPᵀ) z` for a batch of columns.
    pub fn project_out(&self, z: &Matrix) -> Matrix {
        z - self.project(z)
    }
}

/// Orthonormal `D × d` basis from the QR factorization of a Gaussian
/// matrix, with column signs fixed so that `R` has a positive diagonal.
pub fn random_orthonormal_basis<R: Rng + ?Sized>(
    ambient: usize,
    intrinsic: usize,
    rng: &mut R,
) -> Result<ManifoldBasis> {
    let dims = DimensionPair::new(ambient, intrinsic)?;
    let g = gaussian_matrix(dims.ambient(), dims.intrinsic(), rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..intrinsic {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(ManifoldBasis { p: q })
}

/// Random `D × D` orthogonal matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Matrix> {
    Ok(random_orthonormal_basis(dim, dim, rng)?.p)
}

/// Data second moment `Σ = AAᵀ` with its eigen-decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredCovariance {
    factor: Matrix,
    spectrum: Spectrum,
}

impl ColoredCovariance {
    /// `A = Q diag(√λ)` from a spectrum that carries eigenvectors.
    pub fn from_spectrum(spectrum: Spectrum) -> Result<Self> {
        let q = spectrum
            .eigenvectors()
            .ok_or_else(|| Error::invalid("colored covariance needs eigenvectors"))?;
        let mut factor = q.clone();
        for (j, &lambda) in spectrum.eigenvalues().iter().enumerate() {
            factor.column_mut(j).scale_mut(crate::math::sqrt(lambda));
        }
        Ok(Self { factor, spectrum })
    }

    /// Any `D × r` factor; the spectrum is obtained by a symmetric
    /// eigen-decomposition of `AAᵀ`.
    pub fn from_factor(factor: Matrix) -> Result<Self> {
        if factor.nrows() == 0 || factor.ncols() == 0 {
            return Err(Error::dim("covariance factor is empty"));
        }
        if factor.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("covariance factor is not finite"));
        }
        let sigma = &factor * factor.transpose();
        let eig = SymmetricEigen::new(sigma);
        // Round-off can leave tiny negative eigenvalues on a PSD matrix.
        let lambdas: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
        let spectrum = Spectrum::new(lambdas)?.with_eigenvectors(eig.eigenvectors)?;
        Ok(Self { factor, spectrum })
    }

    /// `Σ = Q diag(λ) Qᵀ` with a random orthogonal `Q`.
    pub fn random_rotation<R: Rng + ?Sized>(eigenvalues: Vec<f64>, rng: &mut R) -> Result<Self> {
        let q = random_orthogonal(eigenvalues.len(), rng)?;
        Self::from_spectrum(Spectrum::new(eigenvalues)?.with_eigenvectors(q)?)
    }

    /// `Σ = PPᵀ`, the whitened manifold case.
    pub fn from_basis(basis: &ManifoldBasis) -> Result<Self> {
        Self::from_factor(basis.p.clone())
    }

    pub fn factor(&self) -> &Matrix {
        &self.factor
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn ambient(&self) -> usize {
        self.factor.nrows()
    }

    /// `AAᵀ`.
    pub fn matrix(&self) -> Matrix {
        &self.factor * self.factor.transpose()
    }
}

/// `x = P x̃` with `x̃ ~ N(0, I_d)`.
pub fn sample_data<R: Rng + ?Sized>(basis: &ManifoldBasis, batch: usize, rng: &mut R) -> Matrix {
    let latent = gaussian_matrix(basis.intrinsic(), batch, rng);
    &basis.p * latent
}

/// `x = A g` with `g ~ N(0, I)`, so `E[xxᵀ] = Σ`.
pub fn sample_colored<R: Rng + ?Sized>(
    cov: &ColoredCovariance,
    batch: usize,
    rng: &mut R,
) -> Matrix {
    let g = gaussian_matrix(cov.factor.ncols(), batch, rng);
    &cov.factor * g
}

/// I.i.d. standard normal `D × batch` matrix.
pub fn sample_noise<R: Rng + ?Sized>(dim: usize, batch: usize, rng: &mut R) -> Matrix {
    gaussian_matrix(dim, batch, rng)
}

/// Column-major fill, so the draw order is sample by sample.
fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Where training and evaluation data come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Manifold(ManifoldBasis),
    Colored(ColoredCovariance),
}

impl DataSource {
    pub fn ambient(&self) -> usize {
        match self {
            DataSource::Manifold(b) => b.ambient(),
            DataSource::Colored(c) => c.ambient(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Matrix {
        match self {
            DataSource::Manifold(b) => sample_data(b, batch, rng),
            DataSource::Colored(c) => sample_colored(c, batch, rng),
        }
    }

    /// Eigenvalues of the data second moment.
    pub fn spectrum(&self) -> Spectrum {
        match self {
            DataSource::Manifold(b) => Spectrum::binary(b.dims()),
            DataSource::Colored(c) => c.spectrum.clone(),
        }
    }

    /// `D / (D + TrΣ)`.
    pub fn optimal_k(&self) -> f64 {
        crate::analytic::colored_optimal_k(&self.spectrum())
    }

    pub fn basis(&self) -> Option<&ManifoldBasis> {
        match self {
            DataSource::Manifold(b) => Some(b),
            DataSource::Colored(_) => None,
        }
    }
}
