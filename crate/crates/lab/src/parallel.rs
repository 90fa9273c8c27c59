//! Chunk-parallel Monte Carlo.
//!
//! Chunks are evaluated on the rayon pool and merged in chunk order, so the
//! estimate is bitwise identical to the sequential `monte_carlo_loss` for any
//! number of worker threads.

use kdiff_core::geometry::DataSource;
use kdiff_core::lindyn::{
    mc_chunk_len, mc_chunks, monte_carlo_partial, LinearModel, McEstimate, McPartial,
};
use kdiff_core::schedule::Objective;
use kdiff_core::{Error, Result};
use rayon::prelude::*;

pub fn par_monte_carlo_loss(
    model: &LinearModel,
    data: &DataSource,
    objective: &Objective,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter(
            "Monte Carlo needs at least two samples".into(),
        ));
    }
    let (chunks, _) = mc_chunks(n_samples);
    let partials = (0..chunks)
        .into_par_iter()
        .map(|index| {
            let pairs = mc_chunk_len(n_samples, index);
            monte_carlo_partial(model, data, objective, seed, index, pairs)
        })
        .collect::<Result<Vec<McPartial>>>()?;
    Ok(partials
        .into_iter()
        .fold(McPartial::default(), McPartial::merge)
        .finish())
}
