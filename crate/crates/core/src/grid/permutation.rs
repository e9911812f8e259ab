use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::space::Space;

/// A bijection of the cells of a dyadic grid.
///
/// Every bijection preserves the normalized counting measure, so these are
/// the finite stand-ins for measure-preserving homeomorphisms.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPermutation {
    grid: GridSpec,
    forward: Vec<u32>,
    inverse: Vec<u32>,
}

impl GridPermutation {
    pub fn identity(grid: GridSpec) -> Self {
        let forward: Vec<u32> = (0..grid.cell_count() as u32).collect();
        GridPermutation {
            grid,
            inverse: forward.clone(),
            forward,
        }
    }

    /// Validates that `forward` is a bijection of the grid's cells.
    pub fn from_forward(grid: GridSpec, forward: Vec<u32>) -> Result<Self> {
        let n = grid.cell_count();
        if forward.len() != n {
            return Err(Error::NotABijection {
                cells: n,
                reason: format!("array has length {}", forward.len()),
            });
        }
        let mut inverse = vec![u32::MAX; n];
        for (i, &j) in forward.iter().enumerate() {
            let slot = inverse.get_mut(j as usize).ok_or_else(|| Error::NotABijection {
                cells: n,
                reason: format!("cell {i} maps to out-of-range {j}"),
            })?;
            if *slot != u32::MAX {
                return Err(Error::NotABijection {
                    cells: n,
                    reason: format!("cells {} and {i} both map to {j}", *slot),
                });
            }
            *slot = i as u32;
        }
        Ok(GridPermutation {
            grid,
            forward,
            inverse,
        })
    }

    /// Translation by a whole number of cells along each axis, wrapping on
    /// every grid (on boxes this is the cyclic relabelling, not a rigid map).
    pub fn shift(grid: GridSpec, offsets: &[i64]) -> Result<Self> {
        if offsets.len() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                found: offsets.len(),
            });
        }
        let n = grid.per_axis() as i64;
        let mut axis = vec![0usize; grid.dim()];
        let forward = (0..grid.cell_count())
            .map(|i| {
                for (a, slot) in axis.iter_mut().enumerate() {
                    *slot = (grid.axis_coord(i, a) as i64 + offsets[a]).rem_euclid(n) as usize;
                }
                grid.index_of(&axis) as u32
            })
            .collect();
        Self::from_forward(grid, forward)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    #[inline]
    pub fn apply(&self, cell: usize) -> usize {
        self.forward[cell] as usize
    }

    #[inline]
    pub fn apply_inverse(&self, cell: usize) -> usize {
        self.inverse[cell] as usize
    }

    pub fn forward(&self) -> &[u32] {
        &self.forward
    }

    pub fn inverse_array(&self) -> &[u32] {
        &self.inverse
    }

    pub fn inverse(&self) -> GridPermutation {
        GridPermutation {
            grid: self.grid,
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    /// Same cell map, relabelled onto another grid with the same cell layout.
    pub fn transplant(&self, grid: GridSpec) -> Result<Self> {
        if grid.dim() != self.grid.dim() || grid.level() != self.grid.level() {
            return Err(Error::invalid(
                "grid",
                format!("cannot transplant {} onto {}", self.grid, grid),
            ));
        }
        Ok(GridPermutation {
            grid,
            forward: self.forward.clone(),
            inverse: self.inverse.clone(),
        })
    }

    /// Visit each cycle once, ordered by the cycle's smallest cell; each cycle
    /// starts at that cell.
    pub fn for_each_cycle(&self, mut visit: impl FnMut(&[u32])) {
        let mut visited = Bitmap::new(self.len());
        let mut cycle = Vec::new();
        for start in 0..self.len() {
            if visited.get(start) {
                continue;
            }
            cycle.clear();
            let mut c = start;
            while !visited.get(c) {
                visited.set(c);
                cycle.push(c as u32);
                c = self.forward[c] as usize;
            }
            visit(&cycle);
        }
    }

    /// `self^n` computed from the cycle structure in O(cells).
    pub fn power(&self, n: u128) -> GridPermutation {
        let mut forward = vec![0u32; self.len()];
        self.for_each_cycle(|cycle| {
            let len = cycle.len();
            let step = (n % len as u128) as usize;
            for (j, &c) in cycle.iter().enumerate() {
                forward[c as usize] = cycle[(j + step) % len];
            }
        });
        let mut inverse = vec![0u32; self.len()];
        for (i, &j) in forward.iter().enumerate() {
            inverse[j as usize] = i as u32;
        }
        GridPermutation {
            grid: self.grid,
            forward,
            inverse,
        }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &GridPermutation) -> Result<GridPermutation> {
        if self.grid != other.grid {
            return Err(Error::invalid("grid", "composition requires identical grids"));
        }
        let forward = other.forward.iter().map(|&j| self.forward[j as usize]).collect();
        GridPermutation::from_forward(self.grid, forward)
    }

    /// Largest metric distance between the images of a cell center under
    /// `self` and `other`.
    pub fn max_displacement_between(&self, other: &GridPermutation) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::invalid("grid", "displacement requires identical grids"));
        }
        let space = self.grid.space();
        let mut a = vec![0.0; self.grid.dim()];
        let mut b = vec![0.0; self.grid.dim()];
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            self.grid.center_into(self.apply(i), &mut a);
            self.grid.center_into(other.apply(i), &mut b);
            worst = worst.max(space.distance(&a, &b));
        }
        Ok(worst)
    }

    /// Cycle-length histogram.
    pub fn cycle_decomposition(&self) -> PeriodicityReport {
        let mut histogram = BTreeMap::new();
        self.for_each_cycle(|cycle| {
            *histogram.entry(cycle.len() as u64).or_insert(0u64) += cycle.len() as u64;
        });
        PeriodicityReport {
            histogram,
            total: self.len() as u64,
        }
    }

    /// Cycle length of each cell.
    pub fn periods(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.len()];
        self.for_each_cycle(|cycle| {
            for &c in cycle {
                out[c as usize] = cycle.len() as u32;
            }
        });
        out
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let (tag, half_width) = match self.grid.space() {
            Space::Torus { .. } => (0u32, 0.0f64),
            Space::Box { half_width, .. } => (1u32, half_width),
        };
        w.write_all(GPRM_MAGIC)?;
        w.write_all(&GPRM_VERSION.to_le_bytes())?;
        w.write_all(&(self.grid.dim() as u32).to_le_bytes())?;
        w.write_all(&self.grid.level().to_le_bytes())?;
        w.write_all(&tag.to_le_bytes())?;
        w.write_all(&half_width.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.len() * 8);
        for &j in &self.forward {
            buf.extend_from_slice(&(j as u64).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != GPRM_MAGIC {
            return Err(Error::BadFormat(format!("magic {magic:?}")));
        }
        let version = read_u32(&mut r)?;
        if version != GPRM_VERSION {
            return Err(Error::BadFormat(format!("unsupported version {version}")));
        }
        let dim = read_u32(&mut r)? as usize;
        let level = read_u32(&mut r)?;
        let tag = read_u32(&mut r)?;
        let mut f = [0u8; 8];
        r.read_exact(&mut f)?;
        let half_width = f64::from_le_bytes(f);
        let space = match tag {
            0 => Space::torus(dim),
            1 => Space::cube(dim, half_width),
            t => return Err(Error::BadFormat(format!("space tag {t}"))),
        };
        let grid = GridSpec::new(space, level)?;
        let mut bytes = vec![0u8; grid.cell_count() * 8];
        r.read_exact(&mut bytes)?;
        let forward = bytes
            .chunks_exact(8)
            .map(|c| {
                let v = u64::from_le_bytes(c.try_into().unwrap());
                u32::try_from(v).map_err(|_| Error::BadFormat(format!("cell index {v}")))
            })
            .collect::<Result<Vec<u32>>>()?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::BadFormat("trailing bytes".into()));
        }
        GridPermutation::from_forward(grid, forward)
    }
}

pub const GPRM_MAGIC: &[u8; 4] = b"GPRM";
pub const GPRM_VERSION: u32 = 1;

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Cycle-length histogram of a grid permutation: cycle length → cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicityReport {
    pub histogram: BTreeMap<u64, u64>,
    pub total: u64,
}

impl PeriodicityReport {
    /// Fraction of cells lying on cycles of length `<= period`.
    pub fn fraction(&self, period: u64) -> f64 {
        let within: u64 = self.histogram.range(..=period).map(|(_, c)| c).sum();
        within as f64 / self.total as f64
    }

    pub fn max_period(&self) -> u64 {
        self.histogram.keys().next_back().copied().unwrap_or(0)
    }

    /// Smallest period bound `P` with `fraction(P) > target`, if any.
    pub fn period_bound(&self, target: f64) -> Option<u64> {
        let mut within = 0u64;
        for (&len, &cells) in &self.histogram {
            within += cells;
            if within as f64 / self.total as f64 > target {
                return Some(len);
            }
        }
        None
    }

    /// Least common multiple of all cycle lengths `<= bound`; `None` on
    /// overflow. The permutation raised to this power fixes every cell
    /// counted by `fraction(bound)`.
    pub fn common_period(&self, bound: u64) -> Option<u128> {
        self.histogram
            .range(..=bound)
            .try_fold(1u128, |acc, (&len, _)| lcm(acc, len as u128))
    }
}

/// Fraction of cells of `report` on cycles of length at most `period`.
pub fn period_bound_fraction(report: &PeriodicityReport, period: u64) -> Result<f64> {
    if period < 1 {
        return Err(Error::invalid("P", "period bound must be >= 1"));
    }
    Ok(report.fraction(period))
}

fn lcm(a: u128, b: u128) -> Option<u128> {
    fn gcd(mut a: u128, mut b: u128) -> u128 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }
    (a / gcd(a, b)).checked_mul(b)
}

pub(crate) struct Bitmap(Vec<u64>);

impl Bitmap {
    pub(crate) fn new(n: usize) -> Self {
        Bitmap(vec![0; n.div_ceil(64)])
    }

    #[inline]
    pub(crate) fn get(&self, i: usize) -> bool {
        self.0[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize) {
        self.0[i >> 6] |= 1 << (i & 63);
    }
}
