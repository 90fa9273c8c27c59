use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrixView, DVectorView};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{math, Error, Matrix, Result};

/// `x · sigmoid(x)`.
#[inline]
pub fn silu(x: f64) -> f64 {
    x * math::sigmoid(x)
}

#[inline]
pub fn silu_prime(x: f64) -> f64 {
    let s = math::sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Small differentiable maps `(z, t) ↦ û`, applied to `D × batch` inputs.
///
/// Parameters live in one flat vector so that optimizers can treat every
/// variant alike.
#[derive(Debug, Clone, PartialEq)]
pub enum ToyNetwork {
    /// `û = W z`. Parameters are `W` in column-major order.
    PureLinear { dim: usize, params: Vec<f64> },
    /// `û = W₂ silu(W₁ [z; t] + b₁) + b₂`. Parameters are
    /// `[W₁ (H × (D+1)), b₁ (H), W₂ (D × H), b₂ (D)]`, matrices column-major.
    TwoLayer {
        dim: usize,
        hidden: usize,
        params: Vec<f64>,
    },
}

/// Intermediate values kept from the forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    pre: Option<Matrix>,
    hidden: Option<Matrix>,
}

impl ToyNetwork {
    pub fn pure_linear(w: &Matrix) -> Result<Self> {
        if !w.is_square() || w.nrows() == 0 {
            return Err(Error::dim("linear weight must be square and non-empty"));
        }
        Ok(ToyNetwork::PureLinear {
            dim: w.nrows(),
            params: w.as_slice().to_vec(),
        })
    }

    pub fn pure_linear_zeros(dim: usize) -> Self {
        ToyNetwork::PureLinear {
            dim,
            params: vec![0.0; dim * dim],
        }
    }

    /// Gaussian weights with variance `1 / fan_in`, zero biases.
    pub fn two_layer<R: Rng + ?Sized>(dim: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        if dim == 0 || hidden == 0 {
            return Err(Error::dim("two-layer network needs positive sizes"));
        }
        let mut params = vec![0.0; Self::two_layer_len(dim, hidden)];
        let n1 = hidden * (dim + 1);
        let s1 = 1.0 / math::sqrt((dim + 1) as f64);
        for p in &mut params[..n1] {
            *p = s1 * rng.sample::<f64, _>(StandardNormal);
        }
        let w2 = n1 + hidden;
        let s2 = 1.0 / math::sqrt(hidden as f64);
        for p in &mut params[w2..w2 + dim * hidden] {
            *p = s2 * rng.sample::<f64, _>(StandardNormal);
        }
        Ok(ToyNetwork::TwoLayer {
            dim,
            hidden,
            params,
        })
    }

    fn two_layer_len(dim: usize, hidden: usize) -> usize {
        hidden * (dim + 1) + hidden + dim * hidden + dim
    }

    pub fn dim(&self) -> usize {
        match self {
            ToyNetwork::PureLinear { dim, .. } | ToyNetwork::TwoLayer { dim, .. } => *dim,
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            ToyNetwork::PureLinear { params, .. } | ToyNetwork::TwoLayer { params, .. } => params,
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            ToyNetwork::PureLinear { params, .. } | ToyNetwork::TwoLayer { params, .. } => params,
        }
    }

    pub fn n_params(&self) -> usize {
        self.params().len()
    }

    /// `W` for the linear variant.
    pub fn linear_weight(&self) -> Option<Matrix> {
        match self {
            ToyNetwork::PureLinear { dim, params } => {
                Some(Matrix::from_column_slice(*dim, *dim, params))
            }
            ToyNetwork::TwoLayer { .. } => None,
        }
    }

    pub fn forward(&self, z: &Matrix, t: &[f64]) -> Matrix {
        self.forward_cached(z, t).0
    }

    pub fn forward_cached(&self, z: &Matrix, t: &[f64]) -> (Matrix, ForwardCache) {
        debug_assert_eq!(z.nrows(), self.dim());
        debug_assert_eq!(z.ncols(), t.len());
        match self {
            ToyNetwork::PureLinear { dim, params } => {
                let w = DMatrixView::from_slice(params, *dim, *dim);
                let out = w * z;
                let cache = ForwardCache {
                    input: z.clone(),
                    pre: None,
                    hidden: None,
                };
                (out, cache)
            }
            ToyNetwork::TwoLayer {
                dim,
                hidden,
                params,
            } => {
                let (d, h) = (*dim, *hidden);
                let l = TwoLayerLayout::new(d, h);
                let input = Matrix::from_fn(
                    d + 1,
                    z.ncols(),
                    |i, j| {
                        if i < d {
                            z[(i, j)]
                        } else {
                            t[j]
                        }
                    },
                );
                let w1 = DMatrixView::from_slice(&params[l.w1.clone()], h, d + 1);
                let b1 = DVectorView::from_slice(&params[l.b1.clone()], h);
                let w2 = DMatrixView::from_slice(&params[l.w2.clone()], d, h);
                let b2 = DVectorView::from_slice(&params[l.b2.clone()], d);
                let mut pre = w1 * &input;
                for mut col in pre.column_iter_mut() {
                    col += b1;
                }
                let act = pre.map(silu);
                let mut out = w2 * &act;
                for mut col in out.column_iter_mut() {
                    col += b2;
                }
                let cache = ForwardCache {
                    input,
                    pre: Some(pre),
                    hidden: Some(act),
                };
                (out, cache)
            }
        }
    }

    /// Parameter gradient given `∂loss/∂û` for the cached batch.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Matrix) -> Vec<f64> {
        match self {
            ToyNetwork::PureLinear { .. } => {
                let g = grad_out * cache.input.transpose();
                g.as_slice().to_vec()
            }
            ToyNetwork::TwoLayer {
                dim,
                hidden,
                params,
            } => {
                let (d, h) = (*dim, *hidden);
                let l = TwoLayerLayout::new(d, h);
                let pre = cache
                    .pre
                    .as_ref()
                    .expect("two-layer cache holds activations");
                let act = cache
                    .hidden
                    .as_ref()
                    .expect("two-layer cache holds activations");
                let w2 = DMatrixView::from_slice(&params[l.w2.clone()], d, h);
                let mut grads = vec![0.0; params.len()];

                let g_w2 = grad_out * act.transpose();
                grads[l.w2.clone()].copy_from_slice(g_w2.as_slice());
                grads[l.b2.clone()].copy_from_slice(grad_out.column_sum().as_slice());

                let mut g_pre = w2.transpose() * grad_out;
                g_pre.zip_apply(pre, |g, p| *g *= silu_prime(p));
                let g_w1 = &g_pre * cache.input.transpose();
                grads[l.w1.clone()].copy_from_slice(g_w1.as_slice());
                grads[l.b1.clone()].copy_from_slice(g_pre.column_sum().as_slice());
                grads
            }
        }
    }
}

struct TwoLayerLayout {
    w1: core::ops::Range<usize>,
    b1: core::ops::Range<usize>,
    w2: core::ops::Range<usize>,
    b2: core::ops::Range<usize>,
}

impl TwoLayerLayout {
    fn new(d: usize, h: usize) -> Self {
        let w1 = 0..h * (d + 1);
        let b1 = w1.end..w1.end + h;
        let w2 = b1.end..b1.end + d * h;
        let b2 = w2.end..w2.end + d;
        Self { w1, b1, w2, b2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn silu_derivative() {
        for x in [-3.0, -0.5, 0.0, 0.7, 4.0] {
            let h = 1e-6;
            let fd = (silu(x + h) - silu(x - h)) / (2.0 * h);
            assert!((fd - silu_prime(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_forward_is_matrix_product() {
        let w = Matrix::from_fn(3, 3, |i, j| (i as f64) - 2.0 * j as f64);
        let net = ToyNetwork::pure_linear(&w).unwrap();
        let z = Matrix::from_fn(3, 2, |i, j| (i + j) as f64 * 0.5);
        assert_eq!(net.forward(&z, &[0.1, 0.9]), &w * &z);
        assert_eq!(net.linear_weight().unwrap(), w);
    }

    #[test]
    fn two_layer_shapes_and_determinism() {
        let a = ToyNetwork::two_layer(4, 6, &mut stream(1, "init")).unwrap();
        let b = ToyNetwork::two_layer(4, 6, &mut stream(1, "init")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_params(), 6 * 5 + 6 + 4 * 6 + 4);
        let z = Matrix::from_element(4, 3, 0.2);
        let out = a.forward(&z, &[0.0, 0.5, 1.0]);
        assert_eq!(out.shape(), (4, 3));
        assert_eq!(out, a.forward(&z, &[0.0, 0.5, 1.0]));
        assert!(ToyNetwork::two_layer(0, 2, &mut stream(1, "init")).is_err());
    }
}
