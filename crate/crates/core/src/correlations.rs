//! Correlation decay estimates and the superpolynomial-decay classifier.
//!
//! Every sum goes through [`det_sum`]: fixed chunks summed in index order,
//! then a pairwise tree over the chunk sums, so results are bitwise
//! independent of the worker count.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridPermutation, GridSpec};
use crate::observable::Observable;
use crate::system::{MapKind, SystemMap};

const CHUNK: usize = 4096;

/// Sum of `values` in a fixed association order.
pub fn det_sum(values: &[f64]) -> f64 {
    let mut level: Vec<f64> = values.par_chunks(CHUNK).map(|c| c.iter().sum()).collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|p| if p.len() == 2 { p[0] + p[1] } else { p[0] })
            .collect();
    }
    level.first().copied().unwrap_or(0.0)
}

/// How the integrals are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationScheme {
    /// Exact average over the cell centers of a grid.
    FullGrid(GridSpec),
    /// Average over `samples` draws from the map's natural measure.
    MonteCarlo { samples: u64, seed: u64 },
}

impl fmt::Display for CorrelationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrelationScheme::FullGrid(g) => write!(f, "full-grid[{g}]"),
            CorrelationScheme::MonteCarlo { .. } => write!(f, "monte-carlo"),
        }
    }
}

/// `Ĉ_n` with its standard error (Monte Carlo only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationValue {
    pub value: f64,
    pub std_error: Option<f64>,
}

fn check_scalar(map: &SystemMap, f: &Observable) -> Result<()> {
    f.check_space(&map.space())?;
    match f.codomain_dim(&map.space()) {
        1 => Ok(()),
        dim => Err(Error::NotScalar { dim }),
    }
}

/// Starting points of a scheme, with their images advanced in place.
struct Ensemble<'a> {
    map: &'a SystemMap,
    dim: usize,
    starts: Vec<f64>,
    current: Vec<f64>,
    steps: u64,
    /// Set when the map is a permutation of exactly the ensemble's cells.
    perm: Option<&'a GridPermutation>,
    grid: Option<GridSpec>,
}

impl<'a> Ensemble<'a> {
    fn new(map: &'a SystemMap, scheme: &CorrelationScheme) -> Result<Self> {
        let dim = map.space().dim();
        let (count, grid) = match scheme {
            CorrelationScheme::FullGrid(g) => {
                map.space().check_same(&g.space())?;
                (g.cell_count(), Some(*g))
            }
            CorrelationScheme::MonteCarlo { samples, .. } => {
                if *samples < 2 {
                    return Err(Error::invalid("samples", "need at least 2 samples"));
                }
                (*samples as usize, None)
            }
        };
        let mut starts = vec![0.0; count * dim];
        match scheme {
            CorrelationScheme::FullGrid(g) => starts
                .par_chunks_mut(dim)
                .enumerate()
                .for_each(|(i, x)| g.center_into(i, x)),
            CorrelationScheme::MonteCarlo { seed, .. } => {
                let model = map.natural_measure();
                starts
                    .par_chunks_mut(dim)
                    .enumerate()
                    .for_each(|(i, x)| model.sample_into(*seed, i as u64, x));
            }
        }
        let perm = match (map.kind(), grid) {
            (MapKind::Grid(p), Some(g)) if *p.grid() == g => Some(&**p),
            _ => None,
        };
        Ok(Ensemble {
            map,
            dim,
            current: starts.clone(),
            starts,
            steps: 0,
            perm,
            grid,
        })
    }

    fn len(&self) -> usize {
        self.starts.len() / self.dim
    }

    fn advance_to(&mut self, n: u64) {
        if let (Some(p), Some(g)) = (self.perm, self.grid) {
            let power = p.power(n as u128);
            self.current
                .par_chunks_mut(self.dim)
                .enumerate()
                .for_each(|(i, x)| g.center_into(power.apply(i), x));
        } else {
            if n < self.steps {
                self.current.copy_from_slice(&self.starts);
                self.steps = 0;
            }
            let delta = n - self.steps;
            let map = self.map;
            self.current
                .par_chunks_mut(self.dim)
                .for_each(|x| map.advance(x, delta));
        }
        self.steps = n;
    }

    fn eval(&self, f: &Observable, points: &[f64]) -> Vec<f64> {
        points.par_chunks(self.dim).map(|x| f.value(x)).collect()
    }
}

/// Sample covariance of `a` against `b`, shifted by the first entries so a
/// constant input gives exactly zero.
fn centered_correlation(a: &[f64], b: &[f64], monte_carlo: bool) -> CorrelationValue {
    let n = a.len() as f64;
    let u: Vec<f64> = a.iter().map(|x| x - a[0]).collect();
    let v: Vec<f64> = b.iter().map(|y| y - b[0]).collect();
    let uv: Vec<f64> = u.iter().zip(&v).map(|(x, y)| x * y).collect();
    let (mean_u, mean_v) = (det_sum(&u) / n, det_sum(&v) / n);
    let value = (det_sum(&uv) / n - mean_u * mean_v).abs();
    let std_error = monte_carlo.then(|| {
        let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| (x - mean_u) * (y - mean_v)).collect();
        let mean_w = det_sum(&w) / n;
        let sq: Vec<f64> = w.iter().map(|t| (t - mean_w) * (t - mean_w)).collect();
        (det_sum(&sq) / (n - 1.0) / n).sqrt()
    });
    CorrelationValue { value, std_error }
}

/// `|∫ φ∘T^n ψ dμ − ∫ φ dμ ∫ ψ dμ|` under `scheme`.
///
/// `∫ φ dμ` is taken as the average of `φ∘T^n` over the same points, which
/// is equal by invariance and exact for grid permutations.
pub fn correlation(
    map: &SystemMap,
    phi: &Observable,
    psi: &Observable,
    n: u64,
    scheme: &CorrelationScheme,
) -> Result<CorrelationValue> {
    Ok(correlations_at(map, phi, psi, &[n], scheme)?.remove(0))
}

fn correlations_at(
    map: &SystemMap,
    phi: &Observable,
    psi: &Observable,
    horizons: &[u64],
    scheme: &CorrelationScheme,
) -> Result<Vec<CorrelationValue>> {
    check_scalar(map, phi)?;
    check_scalar(map, psi)?;
    let mut ens = Ensemble::new(map, scheme)?;
    let b = ens.eval(psi, &ens.starts);
    let monte_carlo = matches!(scheme, CorrelationScheme::MonteCarlo { .. });
    let mut out = Vec::with_capacity(horizons.len());
    for &n in horizons {
        ens.advance_to(n);
        let a = ens.eval(phi, &ens.current);
        out.push(centered_correlation(&a, &b, monte_carlo));
    }
    debug_assert!(ens.len() == b.len());
    Ok(out)
}

fn center_values(phi: &Observable, grid: &GridSpec) -> Result<Vec<f64>> {
    let space = grid.space();
    phi.check_space(&space)?;
    match phi.codomain_dim(&space) {
        1 => {}
        dim => return Err(Error::NotScalar { dim }),
    }
    let dim = grid.dim();
    Ok((0..grid.cell_count())
        .into_par_iter()
        .map_init(
            || vec![0.0; dim],
            |x, i| {
                grid.center_into(i, x);
                phi.value(x)
            },
        )
        .collect())
}

fn sup_abs(values: &[f64]) -> f64 {
    values.par_iter().map(|v| v.abs()).reduce(|| 0.0, f64::max)
}

/// `sup|φ| + Lip(φ)`, with both terms taken over the cell centers of `grid`
/// and `Lip` over king-move neighbour pairs.
pub fn lipschitz_norm(phi: &Observable, grid: &GridSpec) -> Result<f64> {
    let values = center_values(phi, grid)?;
    let space = grid.space();
    let dim = grid.dim();
    let lip = (0..grid.cell_count())
        .into_par_iter()
        .map_init(
            || (vec![0.0; dim], vec![0.0; dim]),
            |(x, y), i| {
                grid.center_into(i, x);
                grid.neighbors(i)
                    .into_iter()
                    .map(|j| {
                        grid.center_into(j, y);
                        (values[i] - values[j]).abs() / space.distance(x, y)
                    })
                    .fold(0.0, f64::max)
            },
        )
        .reduce(|| 0.0, f64::max);
    Ok(sup_abs(&values) + lip)
}

/// `Ĉ_n` and `θ̂_n = Ĉ_n / (‖φ‖ ‖ψ‖)` over a list of horizons.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub phi: String,
    pub psi: String,
    pub horizons: Vec<u64>,
    pub raw: Vec<f64>,
    pub std_errors: Vec<Option<f64>>,
    pub theta: Vec<f64>,
    pub phi_norm: f64,
    pub psi_norm: f64,
    /// Values of `θ̂` at or below this are indistinguishable from rounding.
    pub resolution: f64,
    pub scheme: CorrelationScheme,
}

impl CorrelationSeries {
    /// A series from precomputed normalized values, with no rounding floor.
    pub fn from_theta(horizons: Vec<u64>, theta: Vec<f64>) -> Result<Self> {
        if horizons.len() != theta.len() {
            return Err(Error::invalid("theta", "needs one value per horizon"));
        }
        if theta.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::invalid("theta", "values must be >= 0"));
        }
        Ok(CorrelationSeries {
            phi: "given".into(),
            psi: "given".into(),
            std_errors: vec![None; horizons.len()],
            raw: theta.clone(),
            horizons,
            theta,
            phi_norm: 1.0,
            psi_norm: 1.0,
            resolution: 0.0,
            scheme: CorrelationScheme::MonteCarlo { samples: 0, seed: 0 },
        })
    }

    /// `n, C_hat, theta_hat, std_error, scheme, S, seed` rows.
    pub fn write_csv(&self, w: impl Write) -> io::Result<()> {
        let mut out = crate::csv_writer(w);
        out.write_record(["n", "C_hat", "theta_hat", "std_error", "scheme", "S", "seed"])?;
        let (samples, seed) = match self.scheme {
            CorrelationScheme::FullGrid(g) => (g.cell_count() as u64, String::new()),
            CorrelationScheme::MonteCarlo { samples, seed } => (samples, seed.to_string()),
        };
        let scheme = self.scheme.to_string();
        for i in 0..self.horizons.len() {
            out.write_record([
                self.horizons[i].to_string(),
                self.raw[i].to_string(),
                self.theta[i].to_string(),
                self.std_errors[i].map(|s| s.to_string()).unwrap_or_default(),
                scheme.clone(),
                samples.to_string(),
                seed.clone(),
            ])?;
        }
        out.flush()
    }
}

/// Correlations of `φ∘T^n` against `ψ` at each horizon, normalized by the
/// Lipschitz norms over `norm_grid`.
///
/// Horizons are visited in the given order; increasing lists reuse the
/// previous iterate.
pub fn correlation_series(
    map: &SystemMap,
    phi: &Observable,
    psi: &Observable,
    horizons: &[u64],
    scheme: &CorrelationScheme,
    norm_grid: &GridSpec,
) -> Result<CorrelationSeries> {
    if horizons.is_empty() {
        return Err(Error::invalid("horizons", "must not be empty"));
    }
    let values = correlations_at(map, phi, psi, horizons, scheme)?;
    let phi_norm = lipschitz_norm(phi, norm_grid)?;
    let psi_norm = lipschitz_norm(psi, norm_grid)?;
    let sup_grid = match scheme {
        CorrelationScheme::FullGrid(g) => g,
        CorrelationScheme::MonteCarlo { .. } => norm_grid,
    };
    let sup_phi = sup_abs(&center_values(phi, sup_grid)?);
    let sup_psi = sup_abs(&center_values(psi, sup_grid)?);
    let terms = match scheme {
        CorrelationScheme::FullGrid(g) => g.cell_count() as f64,
        CorrelationScheme::MonteCarlo { samples, .. } => *samples as f64,
    };
    let resolution =
        16.0 * (terms.log2() + 1.0) * f64::EPSILON * sup_phi * sup_psi / (phi_norm * psi_norm);
    let raw: Vec<f64> = values.iter().map(|v| v.value).collect();
    Ok(CorrelationSeries {
        phi: phi.to_string(),
        psi: psi.to_string(),
        horizons: horizons.to_vec(),
        theta: raw.iter().map(|c| c / (phi_norm * psi_norm)).collect(),
        std_errors: values.iter().map(|v| v.std_error).collect(),
        raw,
        phi_norm,
        psi_norm,
        resolution,
        scheme: *scheme,
    })
}

/// Outcome of the decay classifier for one exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayVerdict {
    ConsistentWithDecay,
    NotDecaying,
    Inconclusive,
}

impl fmt::Display for DecayVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecayVerdict::ConsistentWithDecay => "consistent-with-decay",
            DecayVerdict::NotDecaying => "not-decaying",
            DecayVerdict::Inconclusive => "inconclusive",
        })
    }
}

/// `s_n = n^p θ̂_n` for one exponent and its verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub p: f64,
    pub scaled: Vec<f64>,
    pub peak_index: usize,
    /// `s_last / s_peak`, or 0 when the whole sequence is zero.
    pub ratio: f64,
    pub verdict: DecayVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFitReport {
    pub horizons: Vec<u64>,
    pub fits: Vec<DecayFit>,
}

pub const MIN_DECAY_POINTS: usize = 8;

/// `floor(log10 n)` for `n >= 1`.
fn decade(n: u64) -> u32 {
    n.ilog10()
}

/// Classify `n^p θ̂_n` for each `p`.
///
/// The horizons must be increasing, at least [`MIN_DECAY_POINTS`] long and
/// fall in at least two decades `[10^j, 10^{j+1})`. Values of `θ̂` within
/// the series' rounding floor count as zero. Verdicts: consistent-with-decay
/// if the last value is at most a tenth of the peak; not-decaying if it is
/// at least nine tenths of the peak and the peak lies in the decade of the
/// last horizon; inconclusive otherwise.
pub fn superpoly_test(series: &CorrelationSeries, p_list: &[f64]) -> Result<DecayFitReport> {
    let h = &series.horizons;
    let spans = h.len() >= MIN_DECAY_POINTS
        && h.windows(2).all(|w| w[0] < w[1])
        && h[0] >= 1
        && decade(h[h.len() - 1]) > decade(h[0]);
    if !spans {
        return Err(Error::TooFewHorizons {
            required: MIN_DECAY_POINTS,
            found: format!("{} increasing points from {:?} to {:?}", h.len(), h.first(), h.last()),
        });
    }
    let last_decade = decade(h[h.len() - 1]);
    let fits = p_list
        .iter()
        .map(|&p| {
            let scaled: Vec<f64> = h
                .iter()
                .zip(&series.theta)
                .map(|(&n, &t)| if t <= series.resolution { 0.0 } else { (n as f64).powf(p) * t })
                .collect();
            let (peak_index, peak) = scaled
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, s)| if s > best.1 { (i, s) } else { best });
            let last = scaled[scaled.len() - 1];
            let verdict = if last <= 0.1 * peak {
                DecayVerdict::ConsistentWithDecay
            } else if last >= 0.9 * peak && decade(h[peak_index]) == last_decade {
                DecayVerdict::NotDecaying
            } else {
                DecayVerdict::Inconclusive
            };
            DecayFit {
                p,
                ratio: if peak > 0.0 { last / peak } else { 0.0 },
                scaled,
                peak_index,
                verdict,
            }
        })
        .collect();
    Ok(DecayFitReport {
        horizons: h.clone(),
        fits,
    })
}

impl DecayFitReport {
    /// `p, n, s_n` rows; verdicts go in summaries.
    pub fn write_csv(&self, w: impl Write) -> io::Result<()> {
        let mut out = crate::csv_writer(w);
        out.write_record(["p", "n", "s_n"])?;
        for fit in &self.fits {
            for (n, s) in self.horizons.iter().zip(&fit.scaled) {
                out.write_record([fit.p.to_string(), n.to_string(), s.to_string()])?;
            }
        }
        out.flush()
    }
}
