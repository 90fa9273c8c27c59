//! Deterministic ODE integration from noise (`t = 0`) to data (`t = 1`).

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::geometry::sample_noise;
use crate::kdiff::{u_to_v_columns, KParam, ToyNetwork};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Euler,
    Heun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRun {
    grid: Vec<f64>,
    pub solver: Solver,
}

impl SampleRun {
    /// `steps` equal intervals on `[0, 1]`.
    pub fn uniform(steps: usize, solver: Solver) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("sampler needs at least one step"));
        }
        let grid = (0..=steps).map(|i| i as f64 / steps as f64).collect();
        Ok(Self { grid, solver })
    }

    pub fn from_grid(grid: Vec<f64>, solver: Solver) -> Result<Self> {
        if grid.len() < 2 || grid[0] != 0.0 || grid[grid.len() - 1] != 1.0 {
            return Err(Error::invalid("time grid must run from 0 to 1"));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("time grid must be strictly increasing"));
        }
        Ok(Self { grid, solver })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }
}

/// A velocity field evaluated on a `D × batch` state at a common time.
pub trait VelocityField {
    fn velocity(&self, z: &Matrix, t: f64) -> Matrix;
}

/// Velocity from a network trained on `u = k x − (1 − k) n`.
#[derive(Debug, Clone, Copy)]
pub struct KDiffField<'a> {
    pub net: &'a ToyNetwork,
    pub kparam: &'a KParam,
    pub clamp_floor: f64,
}

impl VelocityField for KDiffField<'_> {
    fn velocity(&self, z: &Matrix, t: f64) -> Matrix {
        let times = vec![t; z.ncols()];
        let u = self.net.forward(z, &times);
        let k = vec![self.kparam.k_value(t); z.ncols()];
        u_to_v_columns(&u, z, &times, &k, self.clamp_floor)
    }
}

/// A network that predicts the velocity directly.
#[derive(Debug, Clone, Copy)]
pub struct DirectVelocity<'a> {
    pub net: &'a ToyNetwork,
}

impl VelocityField for DirectVelocity<'_> {
    fn velocity(&self, z: &Matrix, t: f64) -> Matrix {
        self.net.forward(z, &vec![t; z.ncols()])
    }
}

/// Any closure `(z, t) ↦ v`.
pub struct FnField<F>(pub F);

impl<F: Fn(&Matrix, f64) -> Matrix> VelocityField for FnField<F> {
    fn velocity(&self, z: &Matrix, t: f64) -> Matrix {
        (self.0)(z, t)
    }
}

fn check_finite(z: &Matrix, t: f64) -> Result<()> {
    if z.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState { t })
    }
}

/// `z + (t_next − t) v(z, t)`.
pub fn euler_step<F: VelocityField + ?Sized>(
    field: &F,
    z: &Matrix,
    t: f64,
    t_next: f64,
) -> Result<Matrix> {
    let v = field.velocity(z, t);
    let out = z + v * (t_next - t);
    check_finite(&out, t_next)?;
    Ok(out)
}

/// Euler predictor followed by the trapezoidal corrector.
pub fn heun_step<F: VelocityField + ?Sized>(
    field: &F,
    z: &Matrix,
    t: f64,
    t_next: f64,
) -> Result<Matrix> {
    let h = t_next - t;
    let v0 = field.velocity(z, t);
    let pred = z + &v0 * h;
    check_finite(&pred, t_next)?;
    let v1 = field.velocity(&pred, t_next);
    let out = z + (v0 + v1) * (0.5 * h);
    check_finite(&out, t_next)?;
    Ok(out)
}

/// Integrates `z0` over the run's grid.
pub fn integrate<F: VelocityField + ?Sized>(
    field: &F,
    run: &SampleRun,
    z0: Matrix,
) -> Result<Matrix> {
    integrate_observed(field, run, z0, |_, _| {})
}

/// [`integrate`], calling `observe(t, z)` on the initial state and after
/// every step.
pub fn integrate_observed<F, O>(
    field: &F,
    run: &SampleRun,
    z0: Matrix,
    mut observe: O,
) -> Result<Matrix>
where
    F: VelocityField + ?Sized,
    O: FnMut(f64, &Matrix),
{
    check_finite(&z0, run.grid[0])?;
    let mut z = z0;
    observe(run.grid[0], &z);
    for w in run.grid.windows(2) {
        z = match run.solver {
            Solver::Euler => euler_step(field, &z, w[0], w[1])?,
            Solver::Heun => heun_step(field, &z, w[0], w[1])?,
        };
        observe(w[1], &z);
    }
    Ok(z)
}

/// Draws `n_samples` standard normal starts in `R^dim` and integrates them.
/// Output is `dim × n_samples`.
pub fn run_sampler<F, R>(
    run: &SampleRun,
    field: &F,
    dim: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<Matrix>
where
    F: VelocityField + ?Sized,
    R: Rng + ?Sized,
{
    if n_samples == 0 {
        return Ok(Matrix::zeros(dim, 0));
    }
    let z0 = sample_noise(dim, n_samples, rng);
    integrate(field, run, z0)
}
