//! Local dimension from the growth of ball masses over dyadic radii.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::measure::MeasureModel;
use crate::space::{Point, Space};

/// Measure whose ball masses are fitted.
#[derive(Debug, Clone, PartialEq)]
pub enum DimensionMeasure {
    /// Normalized volume, evaluated exactly cell by cell on `grid`.
    Uniform(GridSpec),
    /// Nonnegative cell weights, each spread uniformly over its cell.
    Weights { grid: GridSpec, weights: Vec<f64> },
    /// Fraction of `samples` draws from `model` inside each ball.
    MonteCarlo { model: MeasureModel, samples: u64, seed: u64 },
}

impl DimensionMeasure {
    pub fn weights(grid: GridSpec, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.cell_count() {
            return Err(Error::invalid(
                "weights",
                format!("expected {} cell weights, got {}", grid.cell_count(), weights.len()),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights", "must be finite and >= 0"));
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(Error::invalid("weights", "total weight is zero"));
        }
        Ok(DimensionMeasure::Weights { grid, weights })
    }

    fn space(&self) -> Space {
        match self {
            DimensionMeasure::Uniform(g) | DimensionMeasure::Weights { grid: g, .. } => g.space(),
            DimensionMeasure::MonteCarlo { model, .. } => model.space(),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            DimensionMeasure::Uniform(g) => format!("exact-uniform[{g}]"),
            DimensionMeasure::Weights { grid, .. } => format!("exact-weights[{grid}]"),
            DimensionMeasure::MonteCarlo { samples, seed, .. } => format!("monte-carlo[S={samples},seed={seed}]"),
        }
    }
}

/// Ball masses over dyadic radii and the fitted log-log slope.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDimensionEstimate {
    pub y: Point,
    pub scheme: String,
    /// Radii that entered the fit, increasing.
    pub radii: Vec<f64>,
    pub masses: Vec<f64>,
    /// Radii dropped because their ball had zero mass.
    pub excluded: Vec<f64>,
    pub slope: f64,
    /// Root mean square residual of the fit in `ln mass`.
    pub residual: f64,
}

impl LocalDimensionEstimate {
    /// `r, mass` rows.
    pub fn write_csv(&self, w: impl Write) -> io::Result<()> {
        let mut out = crate::csv_writer(w);
        out.write_record(["r", "mass"])?;
        for (r, m) in self.radii.iter().zip(&self.masses) {
            out.write_record([r.to_string(), m.to_string()])?;
        }
        out.flush()
    }
}

pub const MIN_DYADIC_RADII: usize = 5;

/// Length of `[lo, hi] ∩ [c - r, c + r]` with the ball interval wrapped on
/// the unit circle when `torus` is set.
fn overlap(lo: f64, hi: f64, c: f64, r: f64, torus: bool) -> f64 {
    let one = |shift: f64| ((c + shift + r).min(hi) - (c + shift - r).max(lo)).max(0.0);
    if torus {
        one(-1.0) + one(0.0) + one(1.0)
    } else {
        one(0.0)
    }
}

/// Per-axis cell overlap fractions of the L∞ ball `B(y, r)`, as
/// `(axis index, fraction)` lists with zero entries dropped.
fn axis_fractions(grid: &GridSpec, y: &[f64], r: f64) -> Vec<Vec<(usize, f64)>> {
    let space = grid.space();
    let torus = space.is_torus();
    let w = grid.cell_width();
    let o = space.origin();
    y.iter()
        .map(|&c| {
            (0..grid.per_axis())
                .filter_map(|k| {
                    let lo = o + k as f64 * w;
                    let f = overlap(lo, lo + w, c, r, torus) / w;
                    (f > 0.0).then_some((k, f.min(1.0)))
                })
                .collect()
        })
        .collect()
}

fn exact_mass(grid: &GridSpec, weights: Option<&[f64]>, y: &[f64], r: f64) -> f64 {
    let axes = axis_fractions(grid, y, r);
    match weights {
        None => axes
            .iter()
            .map(|a| a.iter().map(|(_, f)| f).sum::<f64>() / grid.per_axis() as f64)
            .product(),
        Some(w) => {
            let total: f64 = w.iter().sum();
            let d = grid.dim();
            let counts: Vec<usize> = axes.iter().map(Vec::len).collect();
            let combos: usize = counts.iter().product();
            let mut coords = vec![0usize; d];
            let mut mass = 0.0;
            for code in 0..combos {
                let mut c = code;
                let mut frac = 1.0;
                for a in 0..d {
                    let (k, f) = axes[a][c % counts[a]];
                    c /= counts[a];
                    coords[a] = k;
                    frac *= f;
                }
                mass += w[grid.index_of(&coords)] * frac;
            }
            mass / total
        }
    }
}

/// Least-squares slope of `ln μ(B(y, r))` against `ln r` over the dyadic
/// radii `2^-k` in `[r_min, r_max]`.
pub fn local_dimension(measure: &DimensionMeasure, y: &Point, r_min: f64, r_max: f64) -> Result<LocalDimensionEstimate> {
    let space = measure.space();
    space.check_same(&y.space())?;
    if !(r_min > 0.0 && r_min < r_max) {
        return Err(Error::invalid("radii", format!("need 0 < r_min < r_max, got [{r_min}, {r_max}]")));
    }
    if r_max > space.diameter() / 2.0 {
        return Err(Error::invalid(
            "r_max",
            format!("{r_max} exceeds half the space diameter {}", space.diameter() / 2.0),
        ));
    }
    let mut all_radii: Vec<f64> = (0..1100)
        .map(|k| 2f64.powi(-k))
        .filter(|r| *r >= r_min && *r <= r_max)
        .collect();
    all_radii.reverse();
    if all_radii.len() < MIN_DYADIC_RADII {
        return Err(Error::invalid(
            "radii",
            format!("[{r_min}, {r_max}] holds {} dyadic radii, need {MIN_DYADIC_RADII}", all_radii.len()),
        ));
    }
    let masses: Vec<f64> = match measure {
        DimensionMeasure::Uniform(g) => all_radii.iter().map(|&r| exact_mass(g, None, y.coords(), r)).collect(),
        DimensionMeasure::Weights { grid, weights } => all_radii
            .iter()
            .map(|&r| exact_mass(grid, Some(weights), y.coords(), r))
            .collect(),
        DimensionMeasure::MonteCarlo { model, samples, seed } => {
            if *samples < 1 {
                return Err(Error::invalid("samples", "must be >= 1"));
            }
            let dim = space.dim();
            let counts = (0..*samples)
                .into_par_iter()
                .map_init(
                    || vec![0.0; dim],
                    |x, i| {
                        model.sample_into(*seed, i, x);
                        let d = space.distance(x, y.coords());
                        all_radii.iter().map(|&r| (d < r) as u64).collect::<Vec<u64>>()
                    },
                )
                .reduce(
                    || vec![0; all_radii.len()],
                    |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
                );
            counts.iter().map(|&c| c as f64 / *samples as f64).collect()
        }
    };
    let mut radii = Vec::new();
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (&r, &m) in all_radii.iter().zip(&masses) {
        if m > 0.0 {
            radii.push(r);
            kept.push(m);
        } else {
            excluded.push(r);
        }
    }
    if radii.len() < 2 {
        return Err(Error::invalid("radii", "fewer than two radii carry positive mass"));
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|m| m.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(LocalDimensionEstimate {
        y: y.clone(),
        scheme: measure.tag(),
        radii,
        masses: kept,
        excluded,
        slope,
        residual,
    })
}
