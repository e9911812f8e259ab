//! Uniform measures, counter-based sampling and Monte Carlo estimates.
//!
//! Sample `i` under seed `s` is drawn from its own ChaCha stream, so a run is
//! identical for any number of worker threads and the first `S` samples of a
//! larger run are exactly the samples of the smaller one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::grid::GridSpec;
use crate::space::{Point, Space};

/// Per-sample generator: stream `stream` of the ChaCha8 generator keyed by `seed`.
pub fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Normalized volume measure on a space, or normalized counting measure on
/// the cell centers of a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureModel {
    space: Space,
    grid: Option<GridSpec>,
}

impl MeasureModel {
    pub fn lebesgue(space: Space) -> Self {
        MeasureModel { space, grid: None }
    }

    pub fn grid(grid: GridSpec) -> Self {
        MeasureModel {
            space: grid.space(),
            grid: Some(grid),
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn grid_spec(&self) -> Option<&GridSpec> {
        self.grid.as_ref()
    }

    /// 1 on tori, the box volume on boxes.
    pub fn total_mass(&self) -> f64 {
        self.space.volume()
    }

    /// Write sample `index` into `out`.
    #[inline]
    pub fn sample_into(&self, seed: u64, index: u64, out: &mut [f64]) {
        let mut rng = sample_rng(seed, index);
        match &self.grid {
            Some(g) => {
                let cell = rng.random_range(0..g.cell_count());
                g.center_into(cell, out);
            }
            None => {
                let lo = self.space.origin();
                let side = self.space.side();
                for c in out.iter_mut() {
                    *c = lo + side * rng.random::<f64>();
                }
            }
        }
    }

    pub fn sample(&self, seed: u64, index: u64) -> Point {
        let mut out = vec![0.0; self.space.dim()];
        self.sample_into(seed, index, &mut out);
        Point::from_raw(self.space, out)
    }
}

/// Monte Carlo estimate of the normalized measure of a set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

impl MeasureEstimate {
    pub fn from_count(hits: u64, samples: u64, seed: u64) -> Self {
        let value = hits as f64 / samples as f64;
        MeasureEstimate {
            value,
            std_error: (value * (1.0 - value) / samples as f64).sqrt(),
            samples,
            seed,
        }
    }
}

/// Fraction of `samples` draws satisfying `pred`; deterministic in `seed`.
pub fn monte_carlo_fraction<F>(
    model: &MeasureModel,
    samples: u64,
    seed: u64,
    pred: F,
) -> MeasureEstimate
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let dim = model.space().dim();
    let hits: u64 = (0..samples)
        .into_par_iter()
        .map_init(
            || vec![0.0; dim],
            |x, i| {
                model.sample_into(seed, i, x);
                pred(x) as u64
            },
        )
        .sum();
    MeasureEstimate::from_count(hits, samples, seed)
}

/// Exact fraction of grid cells whose center satisfies `pred`.
pub fn exhaustive_fraction<F>(grid: &GridSpec, pred: F) -> f64
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let dim = grid.dim();
    let hits: u64 = (0..grid.cell_count())
        .into_par_iter()
        .map_init(
            || vec![0.0; dim],
            |x, i| {
                grid.center_into(i, x);
                pred(x) as u64
            },
        )
        .sum();
    hits as f64 / grid.cell_count() as f64
}
