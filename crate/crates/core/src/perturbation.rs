//! Short-period perturbations of grid permutations.
//!
//! [`build_cover`] tiles a grid by equal dyadic cubes, [`towerize`] closes
//! orbits inside each cube into cycles whose length is the first-return time,
//! and [`extend_to_box`] embeds a box permutation into a larger box by the
//! identity.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::grid::{GridPermutation, GridSpec, PeriodicityReport};
use crate::space::Space;

/// A tiling of a grid by equal dyadic cubes `U_i`, each with a concentric
/// inner cube `V_i`.
///
/// Cubes are indexed like cells (axis 0 fastest) and all lengths are in cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeCover {
    grid: GridSpec,
    edge: usize,
    inner_edge: usize,
    inner_offset: usize,
    delta: f64,
    epsilon: f64,
}

impl CubeCover {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Edge of every `U_i`.
    pub fn edge(&self) -> usize {
        self.edge
    }

    /// Edge of every `V_i`.
    pub fn inner_edge(&self) -> usize {
        self.inner_edge
    }

    /// Offset of `V_i`'s corner from `U_i`'s corner along each axis.
    pub fn inner_offset(&self) -> usize {
        self.inner_offset
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn cubes_per_axis(&self) -> usize {
        self.grid.per_axis() / self.edge
    }

    pub fn cube_count(&self) -> usize {
        self.cubes_per_axis().pow(self.grid.dim() as u32)
    }

    /// Corner cell coordinates of cube `i`.
    pub fn corner(&self, i: usize) -> Vec<usize> {
        let k = self.cubes_per_axis();
        let mut rest = i;
        (0..self.grid.dim())
            .map(|_| {
                let c = rest % k * self.edge;
                rest /= k;
                c
            })
            .collect()
    }

    /// Largest center-to-center distance inside one cube, in space units.
    pub fn cube_diameter(&self) -> f64 {
        (self.edge - 1) as f64 * self.grid.cell_width()
    }

    #[inline]
    pub fn cube_of(&self, cell: usize) -> usize {
        let k = self.cubes_per_axis();
        let mut idx = 0;
        let mut stride = 1;
        for a in 0..self.grid.dim() {
            idx += self.grid.axis_coord(cell, a) / self.edge * stride;
            stride *= k;
        }
        idx
    }

    #[inline]
    pub fn in_inner(&self, cell: usize) -> bool {
        (0..self.grid.dim()).all(|a| {
            let r = self.grid.axis_coord(cell, a) % self.edge;
            r >= self.inner_offset && r < self.inner_offset + self.inner_edge
        })
    }

    /// Cells of cube `i` in increasing index order.
    pub fn cells(&self, i: usize) -> Vec<usize> {
        let d = self.grid.dim();
        let corner = self.corner(i);
        let mut coords = corner.clone();
        let mut out = Vec::with_capacity(self.edge.pow(d as u32));
        for code in 0..self.edge.pow(d as u32) {
            let mut c = code;
            for a in 0..d {
                coords[a] = corner[a] + c % self.edge;
                c /= self.edge;
            }
            out.push(self.grid.index_of(&coords));
        }
        out
    }

    /// Normalized counting mass of `⋃ U_i`; the tiling is exact.
    pub fn outer_mass(&self) -> f64 {
        1.0
    }

    /// Normalized counting mass of `⋃ V_i`.
    pub fn inner_mass(&self) -> f64 {
        (self.inner_edge as f64 / self.edge as f64).powi(self.grid.dim() as i32)
    }
}

/// Tile `grid` by the largest dyadic cubes whose center-to-center diameter
/// is below `delta`, with inner cubes holding more than `1 - epsilon` of the
/// mass.
pub fn build_cover(grid: GridSpec, delta: f64, epsilon: f64) -> Result<CubeCover> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("epsilon", "must lie in (0, 1)"));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", "must be positive"));
    }
    let w = grid.cell_width();
    let mut edge = 1;
    while edge * 2 <= grid.per_axis() && (edge * 2 - 1) as f64 * w < delta {
        edge *= 2;
    }
    if edge < 2 {
        return Err(Error::DeltaTooSmall { delta, min_delta: w });
    }
    let d = grid.dim() as i32;
    // smallest inner edge whose volume fraction exceeds 1 - epsilon
    let whole = (edge as f64).powi(d);
    let inner_edge = (1..=edge)
        .find(|&v| (v as f64).powi(d) > (1.0 - epsilon) * whole)
        .unwrap_or(edge);
    Ok(CubeCover {
        grid,
        edge,
        inner_edge,
        inner_offset: (edge - inner_edge) / 2,
        delta,
        epsilon,
    })
}

/// Outcome of [`towerize`].
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub permutation: GridPermutation,
    /// Largest distance between `center(g(z))` and `center(τ(z))`.
    pub max_displacement: f64,
    pub periodicity: PeriodicityReport,
    /// Cells `w` of `U_i` with `h_i(w) != w`, per cube.
    pub redirects: Vec<u64>,
    /// Closed redirected cycles whose return was checked.
    pub verified_returns: u64,
    /// Smallest `P` with `fraction(P) > 1 - epsilon`.
    pub period_bound: Option<u64>,
    /// Least common multiple of the cycle lengths up to `period_bound`.
    pub common_period: Option<u128>,
    pub delta: f64,
    pub epsilon: f64,
}

impl PerturbationReport {
    /// Cumulative `(P, fraction(P))` over every realized cycle length.
    pub fn frontier(&self) -> Vec<(u64, f64)> {
        self.periodicity
            .histogram
            .keys()
            .map(|&p| (p, self.periodicity.fraction(p)))
            .collect()
    }

    /// `key = value` lines in a fixed order.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let grid = self.permutation.grid();
        let total_redirects: u64 = self.redirects.iter().sum();
        let _ = writeln!(s, "grid = {grid}");
        let _ = writeln!(s, "delta = {}", self.delta);
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "cubes = {}", self.redirects.len());
        let _ = writeln!(s, "redirects = {total_redirects}");
        let _ = writeln!(s, "verified_returns = {}", self.verified_returns);
        let _ = writeln!(s, "max_displacement = {}", self.max_displacement);
        let _ = writeln!(s, "max_period = {}", self.periodicity.max_period());
        match self.period_bound {
            Some(p) => {
                let _ = writeln!(s, "period_bound = {p}");
                let _ = writeln!(s, "period_bound_fraction = {}", self.periodicity.fraction(p));
            }
            None => {
                let _ = writeln!(s, "period_bound = none");
            }
        }
        match self.common_period {
            Some(q) => {
                let _ = writeln!(s, "common_period = {q}");
            }
            None => {
                let _ = writeln!(s, "common_period = overflow");
            }
        }
        s
    }

    /// `period,cells,cumulative_fraction` rows.
    pub fn write_histogram_csv(&self, w: impl Write) -> io::Result<()> {
        let mut out = crate::csv_writer(w);
        out.write_record(["period", "cells", "cumulative_fraction"])?;
        for (&p, &c) in &self.periodicity.histogram {
            out.write_record([p.to_string(), c.to_string(), self.periodicity.fraction(p).to_string()])?;
        }
        out.flush()
    }
}

/// Sequential tower redirect of `tau` over the cubes of `cover`.
///
/// For each cube `U_i` in index order, the first-return map `R` of the
/// current permutation to `U_i` is followed cycle by cycle. If `z_j` lies in
/// `V_i`, the arrival `z_{j+1} = R(z_j)` is sent back to `z_j`, closing
/// `z_j`'s excursion into a cycle of length equal to its return time. The
/// arrivals of the remaining cells of the `R`-cycle are chained among
/// themselves so the result stays a bijection. Every redirect stays inside
/// `U_i`, which bounds the displacement from `tau` by the cube diameter.
pub fn towerize(tau: &GridPermutation, cover: &CubeCover) -> Result<PerturbationReport> {
    if tau.grid() != cover.grid() {
        return Err(Error::CoverMismatch);
    }
    let n = tau.len();
    let mut fwd: Vec<u32> = tau.forward().to_vec();
    let mut inv: Vec<u32> = tau.inverse_array().to_vec();
    let mut seen = vec![u32::MAX; n];
    let mut redirects = Vec::with_capacity(cover.cube_count());
    let mut verified_returns = 0u64;

    let mut cycle: Vec<u32> = Vec::new();
    let mut times: Vec<u64> = Vec::new();
    let mut plan: Vec<(u32, u32)> = Vec::new();
    let mut loose: Vec<usize> = Vec::new();
    let mut closed: Vec<(u32, u64)> = Vec::new();

    for cube in 0..cover.cube_count() {
        let stamp = cube as u32;
        plan.clear();
        closed.clear();
        for start in cover.cells(cube) {
            if seen[start] == stamp {
                continue;
            }
            cycle.clear();
            times.clear();
            let mut z = start;
            loop {
                seen[z] = stamp;
                cycle.push(z as u32);
                let mut next = fwd[z] as usize;
                let mut t = 1u64;
                while cover.cube_of(next) != cube {
                    next = fwd[next] as usize;
                    t += 1;
                }
                times.push(t);
                if next == start {
                    break;
                }
                z = next;
            }
            let len = cycle.len();
            loose.clear();
            for j in 0..len {
                let arrival = cycle[(j + 1) % len];
                if cover.in_inner(cycle[j] as usize) {
                    plan.push((arrival, cycle[j]));
                    closed.push((cycle[j], times[j]));
                } else {
                    loose.push(j);
                }
            }
            for a in 0..loose.len() {
                let arrival = cycle[(loose[a] + 1) % len];
                plan.push((arrival, cycle[loose[(a + 1) % loose.len()]]));
            }
        }
        // g_i = h_i ∘ g_{i-1}: whoever landed on `arrival` now lands on `target`
        let mut moved = 0u64;
        let sources: Vec<u32> = plan.iter().map(|&(arrival, _)| inv[arrival as usize]).collect();
        for (&(arrival, target), &src) in plan.iter().zip(&sources) {
            if arrival != target {
                moved += 1;
            }
            fwd[src as usize] = target;
            inv[target as usize] = src;
        }
        redirects.push(moved);
        for &(z, t) in &closed {
            let mut w = z as usize;
            for _ in 0..t {
                w = fwd[w] as usize;
            }
            if w != z as usize {
                return Err(Error::GuaranteeViolated(format!(
                    "cell {z} does not return after {t} steps in cube {cube}"
                )));
            }
        }
        verified_returns += closed.len() as u64;
    }

    let permutation = GridPermutation::from_forward(*tau.grid(), fwd)
        .map_err(|e| Error::GuaranteeViolated(format!("output is not a bijection: {e}")))?;
    let grid = tau.grid();
    let space = grid.space();
    let mut a = vec![0.0; grid.dim()];
    let mut b = vec![0.0; grid.dim()];
    let mut max_displacement = 0.0f64;
    for z in 0..n {
        let (gz, tz) = (permutation.apply(z), tau.apply(z));
        if cover.cube_of(gz) != cover.cube_of(tz) {
            return Err(Error::GuaranteeViolated(format!(
                "cell {z}: g(z) = {gz} and tau(z) = {tz} lie in different cubes"
            )));
        }
        grid.center_into(gz, &mut a);
        grid.center_into(tz, &mut b);
        max_displacement = max_displacement.max(space.distance(&a, &b));
    }
    if max_displacement >= cover.delta() {
        return Err(Error::GuaranteeViolated(format!(
            "displacement {max_displacement} is not below delta {}",
            cover.delta()
        )));
    }
    let periodicity = permutation.cycle_decomposition();
    let period_bound = periodicity.period_bound(1.0 - cover.epsilon());
    let common_period = period_bound.and_then(|p| periodicity.common_period(p));
    Ok(PerturbationReport {
        permutation,
        max_displacement,
        periodicity,
        redirects,
        verified_returns,
        period_bound,
        common_period,
        delta: cover.delta(),
        epsilon: cover.epsilon(),
    })
}

/// Outcome of [`extend_to_box`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoxExtension {
    pub permutation: GridPermutation,
    /// Lebesgue volume of `C1 \ C`.
    pub annulus_volume: f64,
    /// Lebesgue volume of `C`.
    pub inner_volume: f64,
    /// Lebesgue volume of `[-L, L]^d`.
    pub box_volume: f64,
}

fn aligned_cells(name: &'static str, length: f64, width: f64) -> Result<usize> {
    let cells = length / width;
    let rounded = cells.round();
    if (cells - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(Error::Misaligned {
            name,
            reason: format!("{length} is not a whole number of cells of width {width}"),
        });
    }
    Ok(rounded as usize)
}

/// Embed `g`, a permutation of the box `C = [-c, c]^d`, into `[-L, L]^d`
/// with the same cell width, acting as the identity outside `C`.
///
/// `C1 = [-c1, c1]^d` with `c <= c1 <= L` only enters the bookkeeping: cells
/// of `C1 \ C` are fixed, exactly as the rest of the big box.
pub fn extend_to_box(g: &GridPermutation, c1_half_width: f64, big_half_width: f64) -> Result<BoxExtension> {
    let inner = g.grid();
    let c = match inner.space() {
        Space::Box { half_width, .. } => half_width,
        Space::Torus { .. } => {
            return Err(Error::invalid("g", "must act on a box grid; transplant torus permutations first"))
        }
    };
    if !(c <= c1_half_width && c1_half_width <= big_half_width) {
        return Err(Error::invalid(
            "C1",
            format!("need c <= c1 <= L, got c={c}, c1={c1_half_width}, L={big_half_width}"),
        ));
    }
    let w = inner.cell_width();
    let per_axis = aligned_cells("[-L, L]", 2.0 * big_half_width, w)?;
    if !per_axis.is_power_of_two() {
        return Err(Error::Misaligned {
            name: "[-L, L]",
            reason: format!("{per_axis} cells per axis is not a power of two"),
        });
    }
    let margin = aligned_cells("C", big_half_width - c, w)?;
    aligned_cells("C1", big_half_width - c1_half_width, w)?;
    let d = inner.dim();
    let outer = GridSpec::cube(d, per_axis.trailing_zeros(), big_half_width)?;

    let mut forward: Vec<u32> = (0..outer.cell_count() as u32).collect();
    let mut coords = vec![0usize; d];
    let embed = |cell: usize, coords: &mut [usize]| {
        for (a, slot) in coords.iter_mut().enumerate() {
            *slot = inner.axis_coord(cell, a) + margin;
        }
        outer.index_of(coords)
    };
    let mut image = vec![0usize; d];
    for cell in 0..inner.cell_count() {
        let from = embed(cell, &mut coords);
        forward[from] = embed(g.apply(cell), &mut image) as u32;
    }
    let permutation = GridPermutation::from_forward(outer, forward)?;
    let vol = |h: f64| (2.0 * h).powi(d as i32);
    Ok(BoxExtension {
        permutation,
        annulus_volume: vol(c1_half_width) - vol(c),
        inner_volume: vol(c),
        box_volume: vol(big_half_width),
    })
}

/// Restriction of `perm` to the aligned sub-box `[-c, c]^d`.
pub fn restrict_to_box(perm: &GridPermutation, c: f64) -> Result<GridPermutation> {
    let outer = perm.grid();
    let big = match outer.space() {
        Space::Box { half_width, .. } => half_width,
        Space::Torus { .. } => return Err(Error::invalid("perm", "must act on a box grid")),
    };
    if !(c > 0.0 && c <= big) {
        return Err(Error::invalid("c", format!("need 0 < c <= {big}")));
    }
    let w = outer.cell_width();
    let per_axis = aligned_cells("C", 2.0 * c, w)?;
    if !per_axis.is_power_of_two() {
        return Err(Error::Misaligned {
            name: "C",
            reason: format!("{per_axis} cells per axis is not a power of two"),
        });
    }
    let margin = aligned_cells("C", big - c, w)?;
    let d = outer.dim();
    let inner = GridSpec::cube(d, per_axis.trailing_zeros(), c)?;
    let mut coords = vec![0usize; d];
    let mut forward = Vec::with_capacity(inner.cell_count());
    for cell in 0..inner.cell_count() {
        for (a, slot) in coords.iter_mut().enumerate() {
            *slot = inner.axis_coord(cell, a) + margin;
        }
        let img = perm.apply(outer.index_of(&coords));
        for (a, slot) in coords.iter_mut().enumerate() {
            let k = outer.axis_coord(img, a);
            if k < margin || k >= margin + per_axis {
                return Err(Error::invalid("perm", format!("cell {cell} leaves the sub-box")));
            }
            *slot = k - margin;
        }
        forward.push(inner.index_of(&coords) as u32);
    }
    GridPermutation::from_forward(inner, forward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::discretize;
    use crate::system::SystemMap;

    #[test]
    fn cover_scale_selection() {
        let g = GridSpec::torus(1, 10).unwrap();
        let c = build_cover(g, 1.0 / 32.0, 0.1).unwrap();
        assert_eq!((c.edge(), c.cube_count(), c.inner_edge()), (32, 32, 29));
        assert!((c.inner_mass() - 29.0 / 32.0).abs() < 1e-15);
        assert!(c.cube_diameter() < 1.0 / 32.0);

        let small = GridSpec::torus(1, 2).unwrap();
        let c = build_cover(small, 3.0 * small.cell_width(), 0.1).unwrap();
        assert_eq!(c.edge(), 2);

        let whole = build_cover(g, 1.0, 0.1).unwrap();
        assert_eq!(whole.cube_count(), 1);
        assert!(whole.inner_mass() > 0.9);
    }

    #[test]
    fn cover_rejects_subcell_delta() {
        let g = GridSpec::torus(2, 5).unwrap();
        match build_cover(g, 1.0 / 32.0, 0.1) {
            Err(Error::DeltaTooSmall { min_delta, .. }) => assert_eq!(min_delta, 1.0 / 32.0),
            other => panic!("{other:?}"),
        }
        assert!(build_cover(g, 0.1, 0.0).is_err());
        assert!(build_cover(g, 0.1, 1.0).is_err());
    }

    #[test]
    fn cover_indexing_is_consistent() {
        let g = GridSpec::torus(2, 4).unwrap();
        let c = build_cover(g, 0.2, 0.3).unwrap();
        assert_eq!(c.edge(), 4);
        let mut owner = vec![usize::MAX; g.cell_count()];
        for i in 0..c.cube_count() {
            for cell in c.cells(i) {
                assert_eq!(c.cube_of(cell), i);
                assert_eq!(owner[cell], usize::MAX);
                owner[cell] = i;
            }
        }
        let inner = (0..g.cell_count()).filter(|&z| c.in_inner(z)).count();
        assert_eq!(inner as f64 / g.cell_count() as f64, c.inner_mass());
        assert!(c.inner_mass() > 0.7);
    }

    #[test]
    fn identity_is_a_fixed_point() {
        let g = GridSpec::torus(2, 4).unwrap();
        let id = GridPermutation::identity(g);
        let r = towerize(&id, &build_cover(g, 0.2, 0.1).unwrap()).unwrap();
        assert_eq!(r.permutation, id);
        assert_eq!(r.redirects.iter().sum::<u64>(), 0);
        assert_eq!(r.max_displacement, 0.0);
        assert_eq!(r.period_bound, Some(1));
    }

    #[test]
    fn shift_collapses_to_short_cycles() {
        let g = GridSpec::torus(1, 10).unwrap();
        let shift = GridPermutation::shift(g, &[1]).unwrap();
        let cover = build_cover(g, 1.0 / 32.0, 0.1).unwrap();
        let r = towerize(&shift, &cover).unwrap();
        assert!(r.periodicity.fraction(64) >= 0.9);
        assert!(r.max_displacement < 1.0 / 32.0);
        let oracle = r.permutation.cycle_decomposition();
        assert_eq!(oracle, r.periodicity);
        assert!(r.verified_returns > 0);
        assert!(r.summary().contains("period_bound = "));
    }

    #[test]
    fn golden_rotation_collapses_to_short_cycles() {
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let g = GridSpec::torus(1, 10).unwrap();
        let tau = discretize(&SystemMap::rotation(vec![golden]).unwrap(), g).unwrap();
        let r = towerize(&tau, &build_cover(g, 1.0 / 32.0, 0.1).unwrap()).unwrap();
        assert!(r.periodicity.fraction(64) >= 0.9, "{:?}", r.frontier());
        assert!(r.max_displacement <= 1.0 / 32.0);
        let p = r.period_bound.unwrap();
        let q = r.common_period.unwrap();
        let power = r.permutation.power(q);
        let fixed = (0..g.cell_count()).filter(|&z| power.apply(z) == z).count() as f64;
        assert!(fixed / g.cell_count() as f64 >= r.periodicity.fraction(p));
    }

    #[test]
    fn cat_map_guarantees_hold() {
        let g = GridSpec::torus(2, 6).unwrap();
        let tau = discretize(&SystemMap::cat_map(), g).unwrap();
        let cover = build_cover(g, 1.0 / 8.0, 0.1).unwrap();
        let r = towerize(&tau, &cover).unwrap();
        for z in 0..g.cell_count() {
            assert_eq!(cover.cube_of(r.permutation.apply(z)), cover.cube_of(tau.apply(z)));
        }
        assert!(r.max_displacement < 1.0 / 8.0);
    }

    #[test]
    fn cover_must_match() {
        let a = GridSpec::torus(1, 6).unwrap();
        let b = GridSpec::torus(1, 7).unwrap();
        let cover = build_cover(b, 0.1, 0.1).unwrap();
        assert!(matches!(towerize(&GridPermutation::identity(a), &cover), Err(Error::CoverMismatch)));
    }

    #[test]
    fn box_extension_round_trip() {
        let c = GridSpec::cube(2, 4, 1.0).unwrap();
        let g = GridPermutation::shift(c, &[3, 5]).unwrap();
        let ext = extend_to_box(&g, 1.5, 4.0).unwrap();
        let outer = ext.permutation.grid();
        assert_eq!(outer.per_axis(), 64);
        assert_eq!(restrict_to_box(&ext.permutation, 1.0).unwrap(), g);
        assert_eq!(ext.annulus_volume, 9.0 - 4.0);
        assert_eq!(ext.box_volume, 64.0);
        let moved = (0..outer.cell_count()).filter(|&z| ext.permutation.apply(z) != z).count();
        assert!(moved <= c.cell_count());

        let id = extend_to_box(&GridPermutation::identity(c), 1.0, 2.0).unwrap();
        assert_eq!(id.permutation, GridPermutation::identity(*id.permutation.grid()));
    }

    #[test]
    fn box_extension_alignment() {
        let c = GridSpec::cube(1, 3, 1.0).unwrap();
        let g = GridPermutation::identity(c);
        assert!(matches!(extend_to_box(&g, 1.1, 4.0), Err(Error::Misaligned { .. })));
        assert!(matches!(extend_to_box(&g, 1.0, 3.0), Err(Error::Misaligned { .. })));
        assert!(extend_to_box(&g, 2.0, 1.5).is_err());
        let torus = GridPermutation::identity(GridSpec::torus(1, 3).unwrap());
        assert!(extend_to_box(&torus, 1.0, 2.0).is_err());
    }
}
