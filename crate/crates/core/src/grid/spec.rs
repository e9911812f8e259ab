use std::fmt;

use crate::error::{Error, Result};
use crate::space::Space;

/// Total cell cap: permutation arrays stay in memory.
pub const MAX_CELLS_LOG2: u32 = 26;

/// Dyadic grid of `2^level` cells per axis over a torus or box.
///
/// Cell indices are row-major with axis 0 varying fastest:
/// `index = sum_a k_a * 2^(level * a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    space: Space,
    level: u32,
}

impl GridSpec {
    pub fn new(space: Space, level: u32) -> Result<Self> {
        let dim = space.dim();
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if let Space::Box { half_width, .. } = space {
            if !(half_width > 0.0 && half_width.is_finite()) {
                return Err(Error::invalid("half_width", "must be a positive real"));
            }
        }
        let bits = level as u128 * dim as u128;
        if bits > MAX_CELLS_LOG2 as u128 {
            return Err(Error::GridTooLarge {
                cells: 1u128.checked_shl(bits.min(127) as u32).unwrap_or(u128::MAX),
            });
        }
        Ok(GridSpec { space, level })
    }

    pub fn torus(dim: usize, level: u32) -> Result<Self> {
        Self::new(Space::torus(dim), level)
    }

    pub fn cube(dim: usize, level: u32, half_width: f64) -> Result<Self> {
        Self::new(Space::cube(dim, half_width), level)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn per_axis(&self) -> usize {
        1usize << self.level
    }

    pub fn cell_count(&self) -> usize {
        1usize << (self.level as usize * self.dim())
    }

    pub fn cell_width(&self) -> f64 {
        self.space.side() / self.per_axis() as f64
    }

    /// Measure of one cell (normalized counting measure times volume).
    pub fn cell_volume(&self) -> f64 {
        self.cell_width().powi(self.dim() as i32)
    }

    #[inline]
    pub fn axis_coord(&self, index: usize, axis: usize) -> usize {
        (index >> (self.level as usize * axis)) & (self.per_axis() - 1)
    }

    #[inline]
    pub fn index_of(&self, axis_coords: &[usize]) -> usize {
        axis_coords
            .iter()
            .enumerate()
            .fold(0, |acc, (a, &k)| acc | (k << (self.level as usize * a)))
    }

    /// Cell containing a point (box boundary points clamp to the edge cells).
    #[inline]
    pub fn cell_of(&self, coords: &[f64]) -> usize {
        let w = self.cell_width();
        let origin = self.space.origin();
        let max = self.per_axis() - 1;
        let mut index = 0usize;
        for (a, &x) in coords.iter().enumerate() {
            let k = ((x - origin) / w).floor();
            let k = if k <= 0.0 { 0 } else { (k as usize).min(max) };
            index |= k << (self.level as usize * a);
        }
        index
    }

    #[inline]
    pub fn center_into(&self, index: usize, out: &mut [f64]) {
        let w = self.cell_width();
        let origin = self.space.origin();
        for (a, o) in out.iter_mut().enumerate() {
            *o = origin + (self.axis_coord(index, a) as f64 + 0.5) * w;
        }
    }

    pub fn center(&self, index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.center_into(index, &mut out);
        out
    }

    /// Chebyshev (king-move) neighbours at step distance 1, wrapping on tori.
    pub fn neighbors(&self, index: usize) -> Vec<usize> {
        let d = self.dim();
        let n = self.per_axis() as i64;
        let base: Vec<i64> = (0..d).map(|a| self.axis_coord(index, a) as i64).collect();
        let mut out = Vec::new();
        let total = 3usize.pow(d as u32);
        let mut coords = vec![0usize; d];
        'offsets: for code in 0..total {
            let mut c = code;
            let mut all_zero = true;
            for a in 0..d {
                let off = (c % 3) as i64 - 1;
                c /= 3;
                all_zero &= off == 0;
                let mut k = base[a] + off;
                if self.space.is_torus() {
                    k = k.rem_euclid(n);
                } else if k < 0 || k >= n {
                    continue 'offsets;
                }
                coords[a] = k as usize;
            }
            if !all_zero {
                let j = self.index_of(&coords);
                if j != index && !out.contains(&j) {
                    out.push(j);
                }
            }
        }
        out
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at level {}", self.space, self.level)
    }
}
