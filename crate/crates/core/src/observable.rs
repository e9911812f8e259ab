use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::space::{linf, Space};

/// A map from the state space into `R^m`.
///
/// `Identity` keeps the state space's own metric; every other variant is
/// compared with the L∞ norm on `R^m`.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    Identity,
    /// Component `j` is `amplitude * cos(2π ⟨k_j, x⟩)`.
    CoordinateTrig {
        frequencies: Vec<Vec<i64>>,
        amplitude: f64,
    },
    /// Scalar value per cell of `grid`.
    GridTable {
        grid: GridSpec,
        values: Arc<Vec<f64>>,
    },
}

impl Observable {
    pub fn trig(frequencies: Vec<Vec<i64>>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::invalid("frequencies", "need at least one frequency vector"));
        }
        Ok(Observable::CoordinateTrig {
            frequencies,
            amplitude: 1.0,
        })
    }

    /// `cos(2π x_axis)` on a `dim`-torus.
    pub fn cos_coordinate(dim: usize, axis: usize) -> Self {
        let mut k = vec![0; dim];
        k[axis] = 1;
        Observable::CoordinateTrig {
            frequencies: vec![k],
            amplitude: 1.0,
        }
    }

    pub fn table(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::invalid(
                "values",
                format!("expected {} cell values, got {}", grid.cell_count(), values.len()),
            ));
        }
        Ok(Observable::GridTable {
            grid,
            values: Arc::new(values),
        })
    }

    /// Multiply by `c`; the identity observable cannot be scaled.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        match self {
            Observable::Identity => Err(Error::invalid("observable", "identity cannot be scaled")),
            Observable::CoordinateTrig {
                frequencies,
                amplitude,
            } => Ok(Observable::CoordinateTrig {
                frequencies: frequencies.clone(),
                amplitude: amplitude * c,
            }),
            Observable::GridTable { grid, values } => Ok(Observable::GridTable {
                grid: *grid,
                values: Arc::new(values.iter().map(|v| v * c).collect()),
            }),
        }
    }

    /// Codomain dimension on `space`.
    pub fn codomain_dim(&self, space: &Space) -> usize {
        match self {
            Observable::Identity => space.dim(),
            Observable::CoordinateTrig { frequencies, .. } => frequencies.len(),
            Observable::GridTable { .. } => 1,
        }
    }

    /// Errors if the observable cannot be evaluated on `space`.
    pub fn check_space(&self, space: &Space) -> Result<()> {
        match self {
            Observable::Identity => Ok(()),
            Observable::CoordinateTrig { frequencies, .. } => {
                if frequencies.iter().all(|k| k.len() == space.dim()) {
                    Ok(())
                } else {
                    Err(Error::invalid(
                        "frequencies",
                        format!("each frequency vector needs {} entries", space.dim()),
                    ))
                }
            }
            Observable::GridTable { grid, .. } => grid.space().check_same(space),
        }
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Observable::Identity => out.copy_from_slice(x),
            Observable::CoordinateTrig {
                frequencies,
                amplitude,
            } => {
                for (o, k) in out.iter_mut().zip(frequencies) {
                    let phase: f64 = k.iter().zip(x).map(|(&kj, &xj)| kj as f64 * xj).sum();
                    *o = amplitude * (TAU * phase).cos();
                }
            }
            Observable::GridTable { grid, values } => out[0] = values[grid.cell_of(x)],
        }
    }

    /// First component; intended for scalar observables.
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Observable::Identity => x[0],
            Observable::CoordinateTrig {
                frequencies,
                amplitude,
            } => {
                let phase: f64 = frequencies[0].iter().zip(x).map(|(&kj, &xj)| kj as f64 * xj).sum();
                amplitude * (TAU * phase).cos()
            }
            Observable::GridTable { grid, values } => values[grid.cell_of(x)],
        }
    }

    /// Distance between two values of this observable.
    #[inline]
    pub fn distance(&self, space: &Space, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Observable::Identity => space.distance(a, b),
            _ => linf(a, b),
        }
    }

    /// Measure of the fiber `f^{-1}(f(y))` for grid tables (exact cell count);
    /// `None` for analytic observables, where it is assumed to vanish.
    pub fn fiber_mass(&self, y: &[f64]) -> Option<f64> {
        match self {
            Observable::GridTable { grid, values } => {
                let v = values[grid.cell_of(y)];
                let count = values.iter().filter(|&&w| w == v).count();
                Some(count as f64 / values.len() as f64)
            }
            _ => None,
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Identity => write!(f, "id"),
            Observable::CoordinateTrig {
                frequencies,
                amplitude,
            } => {
                if *amplitude != 1.0 {
                    write!(f, "{amplitude}*")?;
                }
                write!(f, "cos{frequencies:?}")
            }
            Observable::GridTable { grid, .. } => write!(f, "table[{grid}]"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation() {
        let phi = Observable::cos_coordinate(2, 0);
        assert!((phi.value(&[0.5, 0.3]) + 1.0).abs() < 1e-15);
        let multi = Observable::trig(vec![vec![1, 0], vec![0, 2]]).unwrap();
        let mut out = [0.0; 2];
        multi.eval_into(&[0.0, 0.25], &mut out);
        assert!((out[0] - 1.0).abs() < 1e-15 && (out[1] + 1.0).abs() < 1e-15);
        assert_eq!(multi.codomain_dim(&Space::torus(2)), 2);
    }

    #[test]
    fn table_lookup_and_fiber() {
        let g = GridSpec::torus(1, 2).unwrap();
        let t = Observable::table(g, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(t.value(&[0.3]), 1.0);
        assert_eq!(t.fiber_mass(&[0.3]), Some(0.5));
        assert!(Observable::table(g, vec![0.0]).is_err());
        assert_eq!(Observable::Identity.fiber_mass(&[0.3]), None);
    }

    #[test]
    fn identity_uses_wrap_metric() {
        let s = Space::torus(1);
        assert!((Observable::Identity.distance(&s, &[0.95], &[0.05]) - 0.1).abs() < 1e-15);
        let phi = Observable::cos_coordinate(1, 0);
        assert_eq!(phi.distance(&s, &[0.5], &[-0.5]), 1.0);
    }
}
