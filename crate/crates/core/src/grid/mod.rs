//! Dyadic grids, cell permutations and their cycle structure.

mod discretize;
mod permutation;
mod spec;

pub use discretize::{discretize, displacement_in_cells};
pub use permutation::{period_bound_fraction, GridPermutation, PeriodicityReport, GPRM_MAGIC, GPRM_VERSION};
pub use spec::{GridSpec, MAX_CELLS_LOG2};

/// Cycle-length histogram of `perm`.
pub fn cycle_decomposition(perm: &GridPermutation) -> PeriodicityReport {
    perm.cycle_decomposition()
}
